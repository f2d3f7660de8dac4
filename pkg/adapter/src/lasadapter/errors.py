class AdapterError(Exception):
    """Startup or configuration problem: bad checkpoint, bad inventory, bad config.

    Per-utterance decode failures are deliberately NOT this type; they are
    caught inside the batch loop and downgraded to an empty hypothesis.
    """

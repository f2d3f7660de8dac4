"""TIMIT phone folding, as published by Lee & Hon (1989).

The recognizer may emit any symbol from its checkpoint's declared inventory;
before hypotheses leave this process they are folded onto the 39-phoneme
scoring alphabet (38 speech classes, silence dropped). Keeping the table here
means the toolkit on the other side of the file protocol never sees a raw
allophone.
"""

from __future__ import annotations

from lasadapter.errors import AdapterError

# allophone -> scoring class
_FOLD = {
    "ao": "aa",
    "ax": "ah", "ax-h": "ah",
    "axr": "er",
    "hv": "hh",
    "ix": "ih",
    "el": "l",
    "em": "m",
    "en": "n", "nx": "n",
    "eng": "ng",
    "zh": "sh",
    "ux": "uw",
}

# closures, pauses, glottal stop: all become silence and are dropped
_SILENCE = {"pau", "epi", "h#", "q", "bcl", "dcl", "gcl", "kcl", "pcl", "tcl", "sil"}

SCORING_CLASSES = frozenset({
    "aa", "ae", "ah", "aw", "ay", "b", "ch", "d", "dh", "dx", "eh", "er",
    "ey", "f", "g", "hh", "ih", "iy", "jh", "k", "l", "m", "n", "ng", "ow",
    "oy", "p", "r", "s", "sh", "t", "th", "uh", "uw", "v", "w", "y", "z",
})


def fold(symbol: str) -> str | None:
    """Scoring class for one emitted symbol, or None when it is silence.

    Raises AdapterError for a symbol outside the known phone sets; that can
    only happen with an inventory that slipped past validate_inventory.
    """
    if symbol in SCORING_CLASSES:
        return symbol
    if symbol in _FOLD:
        return _FOLD[symbol]
    if symbol in _SILENCE:
        return None
    raise AdapterError(f"symbol {symbol!r} has no scoring class")


def fold_sequence(symbols: list[str]) -> list[str]:
    out = []
    for s in symbols:
        folded = fold(s)
        if folded is not None:
            out.append(folded)
    return out


def validate_inventory(inventory: list[str]) -> None:
    """Startup check: every declared output symbol must land in the scoring set.

    An inventory may mix granularities (raw TIMIT phones, pre-folded classes,
    a silence token); what it may not contain is anything unfoldable.
    """
    if not inventory:
        raise AdapterError("checkpoint declares an empty inventory")
    bad = [s for s in inventory if s not in SCORING_CLASSES and s not in _FOLD and s not in _SILENCE]
    if bad:
        raise AdapterError(
            "inventory symbol(s) do not collapse onto the scoring alphabet: "
            + ", ".join(sorted(bad))
        )
    if len(set(inventory)) != len(inventory):
        raise AdapterError("inventory contains duplicate symbols")

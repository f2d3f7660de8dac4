"""Exception types shared across the toolkit.

Everything raised on purpose derives from CocktailEvalError so callers
(and the CLI) can catch toolkit failures as one family. Bad arguments to
library functions raise plain ValueError; filesystem trouble surfaces as
OSError.
"""


class CocktailEvalError(Exception):
    """Base class for all toolkit errors."""


class AudioFormatError(CocktailEvalError):
    """File is not NIST SPHERE or RIFF PCM16 mono audio."""


class CorruptAudioError(CocktailEvalError):
    """Audio header and payload disagree (truncated or mangled file)."""


class PhnParseError(CocktailEvalError):
    """A .PHN line could not be parsed; carries the offending line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


class AlignmentError(CocktailEvalError):
    """Phone spans are out of order, overlapping, empty, or out of bounds."""


class InventoryError(CocktailEvalError):
    """A phoneme symbol is not part of the active inventory."""


class StructureError(CocktailEvalError):
    """Corpus tree does not look like a TIMIT layout."""


class DegenerateSignalError(CocktailEvalError):
    """An operand is silent (zero power) where a power ratio is required."""


class ProtocolError(CocktailEvalError):
    """A backend violated the file protocol (coverage, duplicates, exit state)."""


class PlanError(CocktailEvalError):
    """An experiment plan is unsatisfiable for the given corpus or config."""


class ConfigError(CocktailEvalError):
    """Run configuration failed validation (unknown keys, bad values)."""

"""TIMIT phoneme inventory and the 61-to-39 class collapse.

The built-in table is the evaluation mapping of Lee & Hon (1989): closures,
pauses, epenthetic silence and the glottal stop fold into silence; allophone
groups fold onto a single representative. Silence is dropped from reference
sequences, leaving the 38 scored classes of the conventional "39 phoneme"
evaluation set (silence is the 39th).

The mapping is data, not code: it can be saved to and loaded from a plain
two-column text file, one `<fine-symbol> <class-or-sil>` pair per line.
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from .errors import InventoryError

SILENCE = "sil"

# Canonical 61-symbol TIMIT transcription inventory.
TIMIT_INVENTORY = (
    # stops and closures
    "b", "d", "g", "p", "t", "k", "dx", "q",
    "bcl", "dcl", "gcl", "pcl", "tcl", "kcl",
    # affricates
    "jh", "ch",
    # fricatives
    "s", "sh", "z", "zh", "f", "th", "v", "dh",
    # nasals
    "m", "n", "ng", "em", "en", "eng", "nx",
    # semivowels and glides
    "l", "r", "w", "y", "hh", "hv", "el",
    # vowels
    "iy", "ih", "eh", "ey", "ae", "aa", "aw", "ay", "ah", "ao",
    "oy", "ow", "uh", "uw", "ux", "er", "ax", "ix", "axr", "ax-h",
    # other
    "pau", "epi", "h#",
)

# Non-identity folds; every other inventory symbol maps to itself.
_FOLDS = {
    "ao": "aa",
    "ax": "ah",
    "ax-h": "ah",
    "axr": "er",
    "hv": "hh",
    "ix": "ih",
    "el": "l",
    "em": "m",
    "en": "n",
    "nx": "n",
    "eng": "ng",
    "zh": "sh",
    "ux": "uw",
    "bcl": SILENCE,
    "dcl": SILENCE,
    "gcl": SILENCE,
    "pcl": SILENCE,
    "tcl": SILENCE,
    "kcl": SILENCE,
    "q": SILENCE,
    "pau": SILENCE,
    "epi": SILENCE,
    "h#": SILENCE,
}


class CollapseMap:
    """Total mapping from a fine phoneme inventory onto scoring classes."""

    def __init__(self, mapping: dict[str, str]):
        if not mapping:
            raise ValueError("collapse mapping must not be empty")
        self.mapping = dict(mapping)
        image = set(self.mapping.values())
        for symbol in image:
            if symbol == SILENCE:
                continue
            if self.mapping.get(symbol) != symbol:
                raise ValueError(
                    f"collapse map is not idempotent: class {symbol!r} does not map to itself"
                )
        self.classes: tuple[str, ...] = tuple(sorted(image - {SILENCE}))

    @property
    def inventory(self) -> tuple[str, ...]:
        return tuple(self.mapping)

    def collapse(self, label: str) -> str:
        """Class symbol for one fine label; SILENCE for silence-family labels."""
        try:
            return self.mapping[label]
        except KeyError:
            raise InventoryError(f"phoneme {label!r} is not in the collapse inventory")

    def collapse_sequence(self, labels) -> list[str]:
        """Collapse a label sequence, dropping silence outright."""
        out = []
        for label in labels:
            symbol = self.collapse(label)
            if symbol != SILENCE:
                out.append(symbol)
        return out

    def is_silence(self, label: str) -> bool:
        return self.collapse(label) == SILENCE

    def save(self, path) -> None:
        path = Path(path)
        lines = [f"{fine} {coarse}" for fine, coarse in self.mapping.items()]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "CollapseMap":
        mapping = {}
        for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{line_no}: expected two columns, got {line!r}")
            mapping[parts[0]] = parts[1]
        return cls(mapping)


@lru_cache(maxsize=1)
def default_collapse_map() -> CollapseMap:
    """The built-in Lee-Hon evaluation mapping over the 61-symbol inventory."""
    return CollapseMap({fine: _FOLDS.get(fine, fine) for fine in TIMIT_INVENTORY})


def scoring_classes() -> tuple[str, ...]:
    """Sorted non-silence class symbols of the built-in mapping."""
    return default_collapse_map().classes

"""TIMIT corpus scanning: .PHN alignments, speaker metadata, catalogs.

Expected tree: <root>/{TRAIN,TEST}/DR*/<speaker>/<sentence>.{WAV,PHN},
case-insensitive. Speaker directory names start with M or F (gender) as in
the original distribution, e.g. FAKS0.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .audio import Waveform, audio_sample_count, load_audio
from .errors import (
    AlignmentError,
    CocktailEvalError,
    PhnParseError,
    StructureError,
)
from .phonemes import TIMIT_INVENTORY

logger = logging.getLogger(__name__)

SPLITS = ("train", "test")


@dataclass(frozen=True)
class PhoneEntry:
    """One aligned phone: [begin_sample, end_sample) plus fine label."""

    begin: int
    end: int
    label: str


@dataclass(frozen=True)
class PhoneAlignment:
    entries: tuple[PhoneEntry, ...]

    def labels(self) -> list[str]:
        return [e.label for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def parse_phn(path, inventory=None) -> PhoneAlignment:
    """Parse one .PHN file (`begin end label` per line).

    Labels are validated against `inventory` (the built-in 61-symbol TIMIT
    inventory when None). Raises PhnParseError for malformed lines and
    AlignmentError for empty, unordered, or overlapping spans.
    """
    path = Path(path)
    known = set(TIMIT_INVENTORY if inventory is None else inventory)
    entries: list[PhoneEntry] = []
    prev_end = None
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise PhnParseError(path, line_no, f"expected 'begin end label', got {line!r}")
        try:
            begin, end = int(parts[0]), int(parts[1])
        except ValueError:
            raise PhnParseError(path, line_no, f"non-numeric span in {line!r}")
        label = parts[2]
        if label not in known:
            raise PhnParseError(path, line_no, f"label {label!r} not in the phoneme inventory")
        if begin < 0 or end <= begin:
            raise AlignmentError(f"{path}:{line_no}: empty or negative span [{begin}, {end})")
        if prev_end is not None and begin < prev_end:
            raise AlignmentError(
                f"{path}:{line_no}: span [{begin}, {end}) overlaps previous end {prev_end}"
            )
        entries.append(PhoneEntry(begin, end, label))
        prev_end = end
    if not entries:
        raise AlignmentError(f"{path}: no phone entries")
    return PhoneAlignment(tuple(entries))


@dataclass
class UtteranceRecord:
    """One sentence: audio file, alignment, speaker metadata."""

    id: str
    audio_path: Path
    phn_path: Path
    speaker: str
    gender: str  # "m" or "f"
    split: str  # "train" or "test"
    n_samples: int
    _alignment: PhoneAlignment | None = field(default=None, repr=False)

    @property
    def alignment(self) -> PhoneAlignment:
        if self._alignment is None:
            alignment = parse_phn(self.phn_path)
            if alignment.entries[-1].end > self.n_samples:
                raise AlignmentError(
                    f"{self.phn_path}: alignment ends at {alignment.entries[-1].end}, "
                    f"audio has {self.n_samples} samples"
                )
            self._alignment = alignment
        return self._alignment

    def load_audio(self) -> Waveform:
        return load_audio(self.audio_path)


@dataclass
class CorpusCatalog:
    """All scanned utterances plus the scan bookkeeping."""

    root: Path
    utterances: list[UtteranceRecord]
    skipped: list[str] = field(default_factory=list)
    include_sa: bool = True

    def __post_init__(self):
        ids = [u.id for u in self.utterances]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise StructureError(f"duplicate utterance ids in catalog: {dupes[:5]}")

    def by_id(self, utterance_id: str) -> UtteranceRecord:
        for u in self.utterances:
            if u.id == utterance_id:
                return u
        raise KeyError(utterance_id)

    def select(self, split: str | None = None, gender: str | None = None) -> list[UtteranceRecord]:
        out = self.utterances
        if split is not None:
            out = [u for u in out if u.split == split]
        if gender is not None:
            out = [u for u in out if u.gender == gender]
        return list(out)

    def speakers(self, split: str | None = None, gender: str | None = None) -> list[str]:
        return sorted({u.speaker for u in self.select(split, gender)})

    def counts(self) -> dict:
        out = {}
        for split in SPLITS:
            utts = self.select(split)
            out[split] = {
                "utterances": len(utts),
                "speakers": len({u.speaker for u in utts}),
                "male_speakers": len({u.speaker for u in utts if u.gender == "m"}),
                "female_speakers": len({u.speaker for u in utts if u.gender == "f"}),
            }
        out["skipped"] = len(self.skipped)
        return out

    def save(self, path) -> None:
        path = Path(path)
        payload = {
            "root": str(self.root),
            "include_sa": self.include_sa,
            "skipped": self.skipped,
            "utterances": [
                {
                    "id": u.id,
                    "audio": str(u.audio_path.relative_to(self.root)),
                    "phn": str(u.phn_path.relative_to(self.root)),
                    "speaker": u.speaker,
                    "gender": u.gender,
                    "split": u.split,
                    "n_samples": u.n_samples,
                }
                for u in self.utterances
            ],
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path, root=None) -> "CorpusCatalog":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        base = Path(root) if root is not None else Path(payload["root"])
        utterances = [
            UtteranceRecord(
                id=u["id"],
                audio_path=base / u["audio"],
                phn_path=base / u["phn"],
                speaker=u["speaker"],
                gender=u["gender"],
                split=u["split"],
                n_samples=int(u["n_samples"]),
            )
            for u in payload["utterances"]
        ]
        return cls(
            root=base,
            utterances=utterances,
            skipped=list(payload.get("skipped", [])),
            include_sa=bool(payload.get("include_sa", True)),
        )


def _find_split_dir(root: Path, name: str) -> Path | None:
    for child in root.iterdir():
        if child.is_dir() and child.name.lower() == name:
            return child
    return None


def scan_corpus(root, include_sa: bool = True, inventory=None) -> CorpusCatalog:
    """Walk a TIMIT tree and build a catalog.

    Utterances with a missing counterpart file, an unparsable .PHN, or an
    alignment that overruns the audio are skipped with a warning and listed
    in catalog.skipped. A missing TRAIN or TEST directory is fatal.
    """
    root = Path(root)
    if not root.is_dir():
        raise StructureError(f"corpus root {root} is not a directory")

    utterances: list[UtteranceRecord] = []
    skipped: list[str] = []
    for split in SPLITS:
        split_dir = _find_split_dir(root, split)
        if split_dir is None:
            raise StructureError(f"corpus root {root} has no {split.upper()} directory")
        speaker_dirs = []
        for dialect in sorted(split_dir.iterdir()):
            if not dialect.is_dir():
                continue
            speaker_dirs.extend(d for d in sorted(dialect.iterdir()) if d.is_dir())
        if not speaker_dirs:
            raise StructureError(f"{split_dir} contains no speaker directories")

        for spk_dir in speaker_dirs:
            gender = spk_dir.name[:1].lower()
            if gender not in ("m", "f"):
                logger.debug("ignoring non-speaker directory %s", spk_dir)
                continue
            speaker = spk_dir.name.upper()
            files = [f for f in spk_dir.iterdir() if f.is_file()]
            phns = {f.stem.upper(): f for f in files if f.suffix.lower() == ".phn"}
            wavs = {f.stem.upper(): f for f in files if f.suffix.lower() == ".wav"}
            for sentence in sorted(set(phns) | set(wavs)):
                if not include_sa and sentence.startswith("SA"):
                    continue
                utt_id = f"{speaker}-{sentence}"
                if sentence not in phns or sentence not in wavs:
                    missing = ".PHN" if sentence not in phns else "audio"
                    logger.warning("skipping %s: missing %s file", utt_id, missing)
                    skipped.append(utt_id)
                    continue
                try:
                    n_samples = audio_sample_count(wavs[sentence])
                    alignment = parse_phn(phns[sentence], inventory=inventory)
                except CocktailEvalError as exc:
                    logger.warning("skipping %s: %s", utt_id, exc)
                    skipped.append(utt_id)
                    continue
                if alignment.entries[-1].end > n_samples:
                    logger.warning(
                        "skipping %s: alignment ends at %d, audio has %d samples",
                        utt_id,
                        alignment.entries[-1].end,
                        n_samples,
                    )
                    skipped.append(utt_id)
                    continue
                utterances.append(
                    UtteranceRecord(
                        id=utt_id,
                        audio_path=wavs[sentence],
                        phn_path=phns[sentence],
                        speaker=speaker,
                        gender=gender,
                        split=split,
                        n_samples=n_samples,
                        _alignment=alignment,
                    )
                )

    utterances.sort(key=lambda u: (u.split, u.id))
    if skipped:
        logger.warning("scan skipped %d utterance(s)", len(skipped))
    return CorpusCatalog(root=root, utterances=utterances, skipped=skipped, include_sa=include_sa)

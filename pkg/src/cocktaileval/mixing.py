"""Power-calibrated signal mixing and phone segment extraction.

TIR (target-to-interference ratio) is a power ratio in dB measured on the
unpadded operands: the interference is scaled so that

    10 * log10(power(target) / power(gain * interference)) == tir_db

then the operands are length-aligned and summed. No clipping happens here;
outputs stay real-valued and are only peak-normalized at WAV export.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .audio import Waveform, save_wav
from .corpus import UtteranceRecord
from .errors import DegenerateSignalError
from .phonemes import CollapseMap, SILENCE, default_collapse_map

# TIR grid used by the voice experiment, dB.
TIR_GRID_DB = tuple(float(t) for t in range(0, 31, 3))


@dataclass(frozen=True)
class TirSpec:
    """A target-to-interference ratio in dB. Must be finite."""

    tir_db: float

    def __post_init__(self):
        if not np.isfinite(self.tir_db):
            raise ValueError(f"TIR must be finite, got {self.tir_db}")
        object.__setattr__(self, "tir_db", float(self.tir_db))

    @classmethod
    def of(cls, value) -> "TirSpec":
        return value if isinstance(value, TirSpec) else cls(float(value))


def signal_power(waveform: Waveform) -> float:
    """Mean square amplitude."""
    return float(np.mean(np.square(waveform.samples)))


def gain_for_tir(target_power: float, interference_power: float, tir) -> float:
    """Scale for the interference so the realized power ratio equals tir.

    Derivation: power(g*x) = g^2 * power(x), so
    g = sqrt(target_power / (interference_power * 10^(tir_db/10))).
    """
    tir = TirSpec.of(tir)
    if target_power <= 0.0:
        raise DegenerateSignalError("target signal has zero power")
    if interference_power <= 0.0:
        raise DegenerateSignalError("interference signal has zero power")
    return float(np.sqrt(target_power / (interference_power * 10.0 ** (tir.tir_db / 10.0))))


@dataclass
class MixRecord:
    """One mixing event: the mixed waveform plus its provenance."""

    target_id: str
    interference_id: str
    tir_db: float
    gain: float
    mixed: Waveform
    seed_path: str = ""
    peak_scale: float = 1.0  # set when the mix is exported as WAV


def _fit_length(samples: np.ndarray, length: int) -> np.ndarray:
    if samples.size == length:
        return samples
    if samples.size > length:
        return samples[:length]
    return np.concatenate([samples, np.zeros(length - samples.size)])


def mix_at_tir(
    target: Waveform,
    interference: Waveform,
    tir,
    length_policy: str = "target",
    target_id: str = "",
    interference_id: str = "",
    seed_path: str = "",
) -> MixRecord:
    """Mix two waveforms at a controlled TIR.

    Powers are measured on the originals before any padding. Length policy
    "target" keeps the target length (interference zero-padded or truncated
    at the tail); "max" pads the shorter operand to the longer one, which is
    what symmetric phone-segment mixing uses.
    """
    tir = TirSpec.of(tir)
    if target.sample_rate != interference.sample_rate:
        raise ValueError(
            f"sample rates differ: {target.sample_rate} vs {interference.sample_rate}"
        )
    if length_policy not in ("target", "max"):
        raise ValueError(f"unknown length policy {length_policy!r}")
    gain = gain_for_tir(signal_power(target), signal_power(interference), tir)
    length = len(target) if length_policy == "target" else max(len(target), len(interference))
    mixed = _fit_length(target.samples, length) + gain * _fit_length(
        interference.samples, length
    )
    return MixRecord(
        target_id=target_id,
        interference_id=interference_id,
        tir_db=tir.tir_db,
        gain=gain,
        mixed=Waveform(mixed, target.sample_rate),
        seed_path=seed_path,
    )


@dataclass(frozen=True)
class PhoneSegment:
    """A non-silence phone span cut out of an utterance."""

    id: str
    label: str  # fine (61-set) label
    label39: str  # collapsed class label
    audio: Waveform
    source_utterance: str
    begin: int
    end: int


def extract_segments(record: UtteranceRecord, collapse_map: CollapseMap | None = None) -> list[PhoneSegment]:
    """Cut one audio segment per non-silence phone of the alignment.

    Silence-family phones are dropped. Span bounds were validated at scan
    time against the audio length.
    """
    cmap = collapse_map or default_collapse_map()
    waveform = record.load_audio()
    segments: list[PhoneSegment] = []
    for index, entry in enumerate(record.alignment.entries):
        label39 = cmap.collapse(entry.label)
        if label39 == SILENCE:
            continue
        segments.append(
            PhoneSegment(
                id=f"{record.id}:{index:03d}:{entry.label}",
                label=entry.label,
                label39=label39,
                audio=Waveform(waveform.samples[entry.begin : entry.end], waveform.sample_rate),
                source_utterance=record.id,
                begin=entry.begin,
                end=entry.end,
            )
        )
    return segments


def mix_segments(a: PhoneSegment, b: PhoneSegment, tir=0.0, seed_path: str = "") -> MixRecord:
    """Mix two phone segments symmetrically (max-length policy)."""
    return mix_at_tir(
        a.audio,
        b.audio,
        tir,
        length_policy="max",
        target_id=a.id,
        interference_id=b.id,
        seed_path=seed_path,
    )


def export_mix(record: MixRecord, path) -> float:
    """Write the mixed waveform as RIFF PCM16; records the peak scale used."""
    record.peak_scale = save_wav(record.mixed, path)
    return record.peak_scale


@dataclass
class MixMetadataWriter:
    """Append-only JSONL log of mixing events, one object per mix."""

    path: Path
    _fh: object = field(default=None, repr=False)

    def __post_init__(self):
        self.path = Path(self.path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8", newline="\n")

    def write(self, record: MixRecord, mix_id: str, audio_path: str | None = None) -> None:
        line = {
            "id": mix_id,
            "target": record.target_id,
            "interference": record.interference_id,
            "tir_db": record.tir_db,
            "gain": record.gain,
            "peak_scale": record.peak_scale,
            "seed_path": record.seed_path,
        }
        if audio_path is not None:
            line["audio"] = audio_path
        self._fh.write(json.dumps(line) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

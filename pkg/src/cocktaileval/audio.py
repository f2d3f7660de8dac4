"""Waveform container and NIST SPHERE / RIFF PCM16 audio IO.

TIMIT distributes audio as NIST SPHERE (.WAV extension, SPHERE header);
everything the toolkit writes is RIFF PCM16 mono. Samples live in memory
as float64 normalized by the int16 full scale, so a full-scale positive
sample is 32767/32768.
"""

from __future__ import annotations

import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AudioFormatError, CorruptAudioError

INT16_FULL_SCALE = 32768.0
_SPHERE_MAGIC = b"NIST_1A"


@dataclass(frozen=True)
class Waveform:
    """Mono audio: immutable float64 samples plus a sample rate in Hz."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("waveform must be a non-empty 1-D sample sequence")
        if int(self.sample_rate) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate


def _parse_sphere_fields(header: str, path) -> dict:
    fields: dict[str, object] = {}
    for raw in header.splitlines()[2:]:
        line = raw.strip()
        if not line or line.startswith(";"):
            continue
        if line == "end_head":
            break
        parts = line.split(None, 2)
        if len(parts) != 3:
            continue
        name, ftype, value = parts
        fields[name] = int(value) if ftype.startswith("-i") else value
    return fields


def _read_sphere(blob: bytes, path) -> Waveform:
    lines = blob.split(b"\n", 2)
    if len(lines) < 3:
        raise CorruptAudioError(f"{path}: SPHERE header cut short")
    try:
        header_size = int(lines[1].strip())
    except ValueError:
        raise CorruptAudioError(f"{path}: unreadable SPHERE header size {lines[1]!r}")
    if header_size < 16 or header_size > len(blob):
        raise CorruptAudioError(f"{path}: SPHERE header size {header_size} exceeds file")
    header = blob[:header_size].decode("ascii", errors="replace")
    fields = _parse_sphere_fields(header, path)

    channels = int(fields.get("channel_count", 1))
    if channels != 1:
        raise AudioFormatError(f"{path}: only mono audio is supported, got {channels} channels")
    if int(fields.get("sample_n_bytes", 2)) != 2:
        raise AudioFormatError(f"{path}: only 16-bit PCM is supported")
    coding = str(fields.get("sample_coding", "pcm"))
    if not coding.startswith("pcm"):
        raise AudioFormatError(f"{path}: unsupported sample coding {coding!r}")
    if "sample_rate" not in fields:
        raise CorruptAudioError(f"{path}: SPHERE header lacks sample_rate")
    rate = int(fields["sample_rate"])

    byte_format = str(fields.get("sample_byte_format", "01"))
    if byte_format == "01":
        dtype = "<i2"
    elif byte_format == "10":
        dtype = ">i2"
    else:
        raise AudioFormatError(f"{path}: unknown sample_byte_format {byte_format!r}")

    payload = blob[header_size:]
    count = int(fields.get("sample_count", len(payload) // 2))
    if len(payload) < 2 * count:
        raise CorruptAudioError(
            f"{path}: payload holds {len(payload) // 2} samples, header promises {count}"
        )
    raw = np.frombuffer(payload[: 2 * count], dtype=dtype)
    return Waveform(raw.astype(np.float64) / INT16_FULL_SCALE, rate)


def _read_riff(path) -> Waveform:
    try:
        with wave.open(str(path), "rb") as wf:
            channels = wf.getnchannels()
            width = wf.getsampwidth()
            rate = wf.getframerate()
            count = wf.getnframes()
            frames = wf.readframes(count)
    except (wave.Error, EOFError) as exc:
        raise CorruptAudioError(f"{path}: unreadable RIFF file ({exc})")
    if channels != 1:
        raise AudioFormatError(f"{path}: only mono audio is supported, got {channels} channels")
    if width != 2:
        raise AudioFormatError(f"{path}: only 16-bit PCM is supported, got {8 * width}-bit")
    if len(frames) < 2 * count:
        raise CorruptAudioError(
            f"{path}: payload holds {len(frames) // 2} samples, header promises {count}"
        )
    raw = np.frombuffer(frames, dtype="<i2")
    return Waveform(raw.astype(np.float64) / INT16_FULL_SCALE, rate)


def load_audio(path) -> Waveform:
    """Read a NIST SPHERE or RIFF PCM16 mono file, sniffing the magic bytes."""
    path = Path(path)
    blob = path.read_bytes()
    if blob[: len(_SPHERE_MAGIC)] == _SPHERE_MAGIC:
        return _read_sphere(blob, path)
    if blob[:4] == b"RIFF":
        return _read_riff(path)
    raise AudioFormatError(f"{path}: unrecognized audio magic {bytes(blob[:8])!r}")


def audio_sample_count(path) -> int:
    """Sample count from the header alone, without decoding the payload."""
    path = Path(path)
    with open(path, "rb") as fh:
        probe = fh.read(1024)
    if probe[: len(_SPHERE_MAGIC)] == _SPHERE_MAGIC:
        lines = probe.split(b"\n", 2)
        try:
            header_size = int(lines[1].strip())
        except (IndexError, ValueError):
            raise CorruptAudioError(f"{path}: unreadable SPHERE header")
        with open(path, "rb") as fh:
            header = fh.read(header_size).decode("ascii", errors="replace")
        fields = _parse_sphere_fields(header, path)
        if "sample_count" in fields:
            return int(fields["sample_count"])
        return (path.stat().st_size - header_size) // 2
    if probe[:4] == b"RIFF":
        try:
            with wave.open(str(path), "rb") as wf:
                return wf.getnframes()
        except (wave.Error, EOFError) as exc:
            raise CorruptAudioError(f"{path}: unreadable RIFF file ({exc})")
    raise AudioFormatError(f"{path}: unrecognized audio magic {bytes(probe[:8])!r}")


def save_wav(waveform: Waveform, path) -> float:
    """Write RIFF PCM16 mono.

    Samples are peak-normalized only if any |sample| exceeds 1.0 (mixes can
    leave the int16 range; source material cannot). Returns the scale factor
    applied, 1.0 when untouched, so callers can record it.
    """
    path = Path(path)
    peak = float(np.max(np.abs(waveform.samples)))
    scale = 1.0 if peak <= 1.0 else 1.0 / peak
    ints = np.clip(
        np.rint(waveform.samples * (scale * INT16_FULL_SCALE)), -32768, 32767
    ).astype("<i2")
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(waveform.sample_rate)
        wf.writeframes(ints.tobytes())
    return scale

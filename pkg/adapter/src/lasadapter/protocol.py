"""File formats spoken across the process boundary.

The evaluation toolkit hands us a manifest (JSON lines) and expects a
tab-separated hypothesis file back; feature containers and WAV files are
referenced from the manifest by path. Everything here reads or writes those
formats directly so this package needs no import from the toolkit.
"""

from __future__ import annotations

import json
import os
import struct
import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lasadapter.errors import AdapterError


@dataclass(frozen=True)
class Utterance:
    id: str
    ref: tuple[str, ...]
    audio: str | None = None
    features: str | None = None
    tags: dict = field(default_factory=dict)


def read_manifest(path) -> list[Utterance]:
    """Parse manifest.jsonl: one object per line, `id` and `ref` required."""
    utterances = []
    seen = set()
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise AdapterError(f"{path}:{line_no}: not JSON ({exc.msg})") from exc
        if not isinstance(obj, dict) or "id" not in obj or "ref" not in obj:
            raise AdapterError(f"{path}:{line_no}: manifest entries need 'id' and 'ref'")
        uid = str(obj["id"])
        if uid in seen:
            raise AdapterError(f"{path}:{line_no}: duplicate id {uid!r}")
        seen.add(uid)
        utterances.append(
            Utterance(
                id=uid,
                ref=tuple(str(s) for s in obj["ref"]),
                audio=obj.get("audio"),
                features=obj.get("features"),
                tags=obj.get("tags", {}),
            )
        )
    return utterances


def write_hypotheses(rows: list[tuple[str, list[str]]], path) -> None:
    """Write hyps.tsv atomically: the file only appears once it is complete.

    The consumer may be polling for this path (exchange mode), so a partial
    file must never be visible under the final name.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".part")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        for uid, symbols in rows:
            fh.write(f"{uid}\t{' '.join(symbols)}\n")
    os.replace(tmp, path)


_FEAT_MAGIC = b"FEAT"


def load_feature_matrix(path) -> np.ndarray:
    """Feature container: b"FEAT", uint32 LE rows and cols, float32 LE row-major."""
    blob = Path(path).read_bytes()
    if blob[:4] != _FEAT_MAGIC:
        raise AdapterError(f"{path}: not a feature container")
    if len(blob) < 12:
        raise AdapterError(f"{path}: truncated feature header")
    rows, cols = struct.unpack("<II", blob[4:12])
    payload = np.frombuffer(blob, dtype="<f4", offset=12)
    if payload.size != rows * cols:
        raise AdapterError(f"{path}: payload holds {payload.size} values, header says {rows}x{cols}")
    return payload.reshape(rows, cols).astype(np.float32)


def read_waveform(path) -> tuple[np.ndarray, int]:
    """Load mono 16-bit PCM audio as float64 in [-1, 1), plus its sample rate.

    Mixture audio written by the toolkit is RIFF; a baseline manifest points
    straight at corpus files, which for TIMIT are NIST SPHERE despite the
    .wav suffix. Both are handled here.
    """
    head = Path(path).open("rb").read(8)
    if head.startswith(b"NIST_1A"):
        return _read_sphere(path)
    if head[:4] == b"RIFF":
        return _read_riff(path)
    raise AdapterError(f"{path}: neither RIFF nor NIST SPHERE")


def _read_riff(path) -> tuple[np.ndarray, int]:
    with wave.open(str(path), "rb") as fh:
        if fh.getnchannels() != 1 or fh.getsampwidth() != 2:
            raise AdapterError(f"{path}: expected mono 16-bit PCM")
        rate = fh.getframerate()
        raw = fh.readframes(fh.getnframes())
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    return samples, rate


def _read_sphere(path) -> tuple[np.ndarray, int]:
    with open(path, "rb") as fh:
        if fh.readline().strip() != b"NIST_1A":
            raise AdapterError(f"{path}: bad SPHERE signature")
        try:
            header_size = int(fh.readline().strip())
        except ValueError as exc:
            raise AdapterError(f"{path}: bad SPHERE header size") from exc
        fh.seek(0)
        header = fh.read(header_size).decode("ascii", errors="replace")
        fields = {}
        for line in header.splitlines()[2:]:
            if line.strip() == "end_head":
                break
            parts = line.split(None, 2)
            if len(parts) == 3:
                fields[parts[0]] = parts[2]
        if fields.get("sample_coding", "pcm") != "pcm" or fields.get("sample_n_bytes") != "2":
            raise AdapterError(f"{path}: only 16-bit PCM SPHERE is supported")
        rate = int(fields["sample_rate"])
        count = int(fields["sample_count"])
        order = "<i2" if fields.get("sample_byte_format", "01") == "01" else ">i2"
        fh.seek(header_size)
        raw = fh.read(2 * count)
    if len(raw) != 2 * count:
        raise AdapterError(f"{path}: SPHERE payload shorter than sample_count")
    samples = np.frombuffer(raw, dtype=order).astype(np.float64) / 32768.0
    return samples, rate

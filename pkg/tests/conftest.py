"""Shared fixtures: synthetic TIMIT-layout corpora with known alignments.

Audio is deterministic int16 noise (seeded per utterance), so loading is
bit-exact and every phone span has nonzero power. Half the files are RIFF
and half are hand-rolled NIST SPHERE so both readers run through the whole
pipeline, not just their unit tests.
"""

from __future__ import annotations

import hashlib
import wave
from pathlib import Path

import numpy as np
import pytest

from cocktaileval.corpus import scan_corpus

SAMPLE_RATE = 16000

# h#-bracketed sequences; A covers the ten default test phonemes, B adds
# fold sources (ix -> ih, ax -> ah) and a glottal stop that collapses away.
PHONES_A = ("h#", "ow", "ey", "ah", "ay", "er", "s", "t", "aa", "ih", "eh", "h#")
PHONES_B = (
    "h#", "ow", "ey", "ah", "ay", "er", "s", "t", "aa", "ih", "eh", "ix", "q", "ax", "h#",
)


def sphere_bytes(
    ints: np.ndarray,
    rate: int = SAMPLE_RATE,
    big_endian: bool = False,
    sample_count: int | None = None,
    extra_lines: tuple[str, ...] = (),
) -> bytes:
    """A minimal but spec-shaped NIST SPHERE file."""
    count = len(ints) if sample_count is None else sample_count
    fields = [
        "channel_count -i 1",
        "sample_n_bytes -i 2",
        f"sample_count -i {count}",
        f"sample_rate -i {rate}",
        f"sample_byte_format -s2 {'10' if big_endian else '01'}",
        "sample_coding -s3 pcm",
        *extra_lines,
        "end_head",
    ]
    header = ("NIST_1A\n   1024\n" + "\n".join(fields) + "\n").encode("ascii")
    header += b" " * (1024 - len(header))
    payload = np.asarray(ints, dtype=">i2" if big_endian else "<i2").tobytes()
    return header + payload


def write_riff(path: Path, ints: np.ndarray, rate: int = SAMPLE_RATE) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(ints, dtype="<i2").tobytes())


def utterance_samples(utt_id: str, total: int) -> np.ndarray:
    """Deterministic int16 noise for one utterance, keyed by its id."""
    digest = hashlib.sha256(utt_id.encode("utf-8")).digest()
    rng = np.random.default_rng(list(np.frombuffer(digest, dtype=np.uint32)))
    return rng.integers(-8000, 8000, size=total).astype(np.int16)


def write_utterance(
    spk_dir: Path,
    sentence: str,
    phones,
    span: int = 800,
    silence_span: int = 400,
    fmt: str = "riff",
    rate: int = SAMPLE_RATE,
) -> None:
    """One .WAV/.PHN pair under spk_dir; phones is a label sequence."""
    spans = [(label, silence_span if label == "h#" else span) for label in phones]
    total = sum(n for _, n in spans)
    ints = utterance_samples(f"{spk_dir.name}-{sentence}", total)
    wav_path = spk_dir / f"{sentence}.WAV"
    spk_dir.mkdir(parents=True, exist_ok=True)
    if fmt == "riff":
        write_riff(wav_path, ints, rate)
    elif fmt == "sphere":
        wav_path.write_bytes(sphere_bytes(ints, rate))
    elif fmt == "sphere-be":
        wav_path.write_bytes(sphere_bytes(ints, rate, big_endian=True))
    else:
        raise ValueError(fmt)
    lines = []
    pos = 0
    for label, n in spans:
        lines.append(f"{pos} {pos + n} {label}")
        pos += n
    (spk_dir / f"{sentence}.PHN").write_text("\n".join(lines) + "\n", encoding="utf-8")


def build_small_corpus(root: Path) -> None:
    """Ten utterances: TEST 2M+2F speakers x 2 sentences, TRAIN 1M+1F x 1.

    Formats alternate per speaker so RIFF, little- and big-endian SPHERE
    all appear in the TEST split.
    """
    test_speakers = [
        ("DR1", "MAAA0", "riff"),
        ("DR1", "FBBB0", "sphere"),
        ("DR2", "MCCC0", "sphere-be"),
        ("DR2", "FDDD0", "riff"),
    ]
    for dialect, speaker, fmt in test_speakers:
        spk = root / "TEST" / dialect / speaker
        write_utterance(spk, "SX1", PHONES_A, fmt=fmt)
        write_utterance(spk, "SI2", PHONES_B, fmt=fmt)
    for dialect, speaker, fmt in [("DR3", "MEEE0", "riff"), ("DR3", "FGGG0", "sphere")]:
        spk = root / "TRAIN" / dialect / speaker
        write_utterance(spk, "SX1", PHONES_A, fmt=fmt)


# 40 self-mapping labels per sentence. Sized for the corruption calibration
# check: corruption is a pure function of (seed, utterance id, ref), so the
# independent token count per gender is 500 utterances x 40 = 20000, giving
# a 3-sigma band of 0.93 percentage points at a 26% substitution rate.
_BIG_BASE = (
    "ow", "ey", "ah", "ay", "er", "s", "t", "aa", "ih", "eh",
    "l", "r", "w", "y", "m", "n", "f", "v", "z", "k",
)
BIG_PHONES = ("h#", *_BIG_BASE, *_BIG_BASE, "h#")


def build_big_corpus(root: Path, speakers_per_gender: int = 50, sentences: int = 10) -> None:
    """A corpus sized for tight PER statistics. Short spans keep the audio
    small; only token counts and nonzero span power matter here."""
    for prefix in ("MBG", "FBG"):
        for s in range(speakers_per_gender):
            spk = root / "TEST" / "DR1" / f"{prefix}{s:02d}"
            for k in range(sentences):
                write_utterance(spk, f"SX{k}", BIG_PHONES, span=80, silence_span=80)
    for prefix in ("MTR", "FTR"):
        write_utterance(root / "TRAIN" / "DR1" / f"{prefix}00", "SX0", BIG_PHONES, span=80, silence_span=80)


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory) -> Path:
    root = tmp_path_factory.mktemp("timit-small")
    build_small_corpus(root)
    return root


@pytest.fixture(scope="session")
def catalog(corpus_root):
    return scan_corpus(corpus_root)


@pytest.fixture(scope="session")
def big_catalog(tmp_path_factory):
    root = tmp_path_factory.mktemp("timit-big")
    build_big_corpus(root)
    return scan_corpus(root)

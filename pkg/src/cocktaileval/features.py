"""39-dimensional MFCC features: 12 cepstra + log energy, deltas, delta-deltas.

Pipeline
--------
pre-emphasis -> 25 ms / 10 ms framing -> log frame energy (pre-window) ->
Hamming window -> magnitude-squared FFT -> 26 triangular mel filters
(HTK scale, 0..Nyquist) -> log with floor -> orthonormal DCT-II keeping
coefficients 1..12 -> append delta and delta-delta (regression window 2,
edges replicated).

Column layout of the output matrix: [energy, c1..c12] then the deltas of
those 13 columns, then the delta-deltas. Width 3 * (1 + cepstral_coeffs).
"""

from __future__ import annotations

import dataclasses
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import Waveform
from .errors import CorruptAudioError

_MAGIC = b"FEAT"


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction parameters. Defaults give the standard 39-dim layout.

    sample_rate      expected input rate, Hz
    window_length    analysis window, seconds
    hop_length       frame step, seconds
    pre_emphasis     first-order pre-emphasis coefficient
    mel_filters      number of triangular filters
    cepstral_coeffs  DCT coefficients kept (c1..cN; c0 is replaced by energy)
    delta_window     regression half-window for the delta features
    log_floor        floor applied inside every log
    """

    sample_rate: int = 16000
    window_length: float = 0.025
    hop_length: float = 0.010
    pre_emphasis: float = 0.97
    mel_filters: int = 26
    cepstral_coeffs: int = 12
    delta_window: int = 2
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.hop_length <= 0 or self.window_length < self.hop_length:
            raise ValueError("need window_length >= hop_length > 0")
        if self.cepstral_coeffs >= self.mel_filters:
            raise ValueError("cepstral_coeffs must be smaller than mel_filters")
        if self.delta_window < 1:
            raise ValueError("delta_window must be at least 1")
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")

    @property
    def window_samples(self) -> int:
        return int(round(self.window_length * self.sample_rate))

    @property
    def hop_samples(self) -> int:
        return int(round(self.hop_length * self.sample_rate))

    @property
    def fft_size(self) -> int:
        n = 1
        while n < self.window_samples:
            n *= 2
        return n

    @property
    def width(self) -> int:
        return 3 * (1 + self.cepstral_coeffs)


def frame_count(n_samples: int, config: FeatureConfig | None = None) -> int:
    """Number of frames for a signal of n_samples.

    Signals shorter than one window produce a single zero-padded frame;
    otherwise every full window at the hop spacing counts.
    """
    config = config or FeatureConfig()
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if n_samples < config.window_samples:
        return 1
    return 1 + (n_samples - config.window_samples) // config.hop_samples


def hz_to_mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_center_frequencies(config: FeatureConfig | None = None) -> np.ndarray:
    """Center frequency in Hz of each triangular filter."""
    config = config or FeatureConfig()
    points = np.linspace(0.0, hz_to_mel(config.sample_rate / 2.0), config.mel_filters + 2)
    return mel_to_hz(points[1:-1])


def mel_filterbank(config: FeatureConfig | None = None) -> np.ndarray:
    """Triangular filter matrix, shape (mel_filters, fft_size // 2 + 1)."""
    config = config or FeatureConfig()
    nfft = config.fft_size
    points = np.linspace(0.0, hz_to_mel(config.sample_rate / 2.0), config.mel_filters + 2)
    bins = np.floor((nfft + 1) * mel_to_hz(points) / config.sample_rate).astype(int)
    bank = np.zeros((config.mel_filters, nfft // 2 + 1))
    for j in range(config.mel_filters):
        left, center, right = bins[j], bins[j + 1], bins[j + 2]
        for k in range(left, center):
            bank[j, k] = (k - left) / max(center - left, 1)
        for k in range(center, right):
            bank[j, k] = (right - k) / max(right - center, 1)
    return bank


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal type-II DCT matrix: rows are basis vectors, D @ D.T = I."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    matrix = np.sqrt(2.0 / n) * np.cos(np.pi * (m + 0.5) * k / n)
    matrix[0] *= np.sqrt(0.5)
    return matrix


def _frames(samples: np.ndarray, config: FeatureConfig) -> np.ndarray:
    count = frame_count(samples.size, config)
    window, hop = config.window_samples, config.hop_samples
    if samples.size < window:
        padded = np.zeros((1, window))
        padded[0, : samples.size] = samples
        return padded
    index = np.arange(window)[None, :] + hop * np.arange(count)[:, None]
    return samples[index]


def mel_spectra(waveform: Waveform, config: FeatureConfig | None = None) -> np.ndarray:
    """Linear mel filterbank energies, shape (T, mel_filters).

    This is the pre-DCT tap, exposed for diagnostics: a pure tone maximizes
    the filter whose center frequency is nearest the tone.
    """
    config = config or FeatureConfig()
    if waveform.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform at {waveform.sample_rate} Hz, config expects {config.sample_rate} Hz"
        )
    emphasized = np.append(
        waveform.samples[:1], waveform.samples[1:] - config.pre_emphasis * waveform.samples[:-1]
    )
    frames = _frames(emphasized, config)
    windowed = frames * np.hamming(config.window_samples)
    power = np.abs(np.fft.rfft(windowed, config.fft_size)) ** 2
    return power @ mel_filterbank(config).T


def deltas(matrix: np.ndarray, window: int = 2) -> np.ndarray:
    """Regression deltas with edge replication.

    d_t = sum_{n=1..w} n * (c_{t+n} - c_{t-n}) / (2 * sum_{n=1..w} n^2),
    indices clamped to the matrix.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError("need a non-empty 2-D feature matrix")
    if window < 1:
        raise ValueError("delta window must be at least 1")
    count = matrix.shape[0]
    index = np.arange(count)
    out = np.zeros_like(matrix)
    for n in range(1, window + 1):
        out += n * (matrix[np.minimum(index + n, count - 1)] - matrix[np.maximum(index - n, 0)])
    return out / (2.0 * sum(n * n for n in range(1, window + 1)))


@dataclass(frozen=True)
class FeatureMatrix:
    """T x K feature matrix plus the frame rate in frames per second."""

    frames: np.ndarray
    frame_rate: float

    def __post_init__(self):
        frames = np.array(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1:
            raise ValueError("feature matrix must be 2-D with at least one frame")
        if not np.all(np.isfinite(frames)):
            raise ValueError("feature matrix contains non-finite values")
        frames.setflags(write=False)
        object.__setattr__(self, "frames", frames)

    @property
    def shape(self):
        return self.frames.shape


def mfcc39(waveform: Waveform, config: FeatureConfig | None = None) -> FeatureMatrix:
    """Full 39-dimensional feature matrix for one waveform."""
    config = config or FeatureConfig()
    if waveform.sample_rate != config.sample_rate:
        raise ValueError(
            f"waveform at {waveform.sample_rate} Hz, config expects {config.sample_rate} Hz"
        )
    emphasized = np.append(
        waveform.samples[:1], waveform.samples[1:] - config.pre_emphasis * waveform.samples[:-1]
    )
    frames = _frames(emphasized, config)
    # log frame energy before windowing
    energy = np.log(np.maximum(np.sum(frames * frames, axis=1), config.log_floor))
    windowed = frames * np.hamming(config.window_samples)
    power = np.abs(np.fft.rfft(windowed, config.fft_size)) ** 2
    filterbank = power @ mel_filterbank(config).T
    log_bank = np.log(np.maximum(filterbank, config.log_floor))
    basis = dct_matrix(config.mel_filters)[1 : config.cepstral_coeffs + 1]
    cepstra = log_bank @ basis.T
    static = np.column_stack([energy, cepstra])
    d1 = deltas(static, config.delta_window)
    d2 = deltas(d1, config.delta_window)
    return FeatureMatrix(
        np.column_stack([static, d1, d2]),
        frame_rate=config.sample_rate / config.hop_samples,
    )


def save_features(matrix: FeatureMatrix, path, config: FeatureConfig | None = None) -> None:
    """Binary container: magic, uint32 T and K, row-major float32 LE.

    A JSON sidecar at <path>.json records the extraction config and frame
    rate so consumers can verify what they are reading.
    """
    path = Path(path)
    frames = matrix.frames.astype("<f4")
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", frames.shape[0], frames.shape[1]))
        fh.write(frames.tobytes(order="C"))
    sidecar = {"frame_rate": matrix.frame_rate}
    if config is not None:
        sidecar["config"] = dataclasses.asdict(config)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=1), encoding="utf-8")


def load_features(path) -> FeatureMatrix:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:4] != _MAGIC:
        raise CorruptAudioError(f"{path}: not a feature container (magic {bytes(blob[:4])!r})")
    if len(blob) < 12:
        raise CorruptAudioError(f"{path}: feature container truncated")
    t, k = struct.unpack("<II", blob[4:12])
    expected = 12 + 4 * t * k
    if len(blob) < expected:
        raise CorruptAudioError(f"{path}: feature payload truncated ({len(blob)} < {expected})")
    frames = np.frombuffer(blob[12:expected], dtype="<f4").reshape(t, k)
    frame_rate = 0.0
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        frame_rate = float(json.loads(sidecar.read_text(encoding="utf-8")).get("frame_rate", 0.0))
    return FeatureMatrix(frames, frame_rate=frame_rate)

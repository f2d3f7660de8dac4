"""Internal acoustic front end: log-mel filterbank energies.

Used when the adapter is asked to featurize audio itself instead of reading
the toolkit's precomputed containers. The geometry lives in the checkpoint
(n_mels must equal the model's input width) so a model is never fed features
it was not trained on.
"""

from __future__ import annotations

import numpy as np

_PREEMPHASIS = 0.97
_WINDOW_S = 0.025
_HOP_S = 0.010
_LOG_FLOOR = 1e-10


def _mel(hz):
    return 2595.0 * np.log10(1.0 + np.asarray(hz) / 700.0)


def _hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel) / 2595.0) - 1.0)


def logmel(samples: np.ndarray, rate: int, n_mels: int) -> np.ndarray:
    """(T, n_mels) float32 log-mel energies at a 25 ms / 10 ms grid."""
    if samples.ndim != 1 or samples.size == 0:
        raise ValueError("expected a non-empty 1-D signal")
    window = int(round(_WINDOW_S * rate))
    hop = int(round(_HOP_S * rate))
    nfft = 1
    while nfft < window:
        nfft *= 2

    x = np.concatenate([samples[:1], samples[1:] - _PREEMPHASIS * samples[:-1]])
    if x.size < window:
        x = np.pad(x, (0, window - x.size))
    n_frames = 1 + (x.size - window) // hop
    idx = np.arange(window)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = x[idx] * np.hamming(window)

    power = np.abs(np.fft.rfft(frames, n=nfft, axis=1)) ** 2

    edges = _hz(np.linspace(_mel(0.0), _mel(rate / 2.0), n_mels + 2))
    bins = np.floor((nfft + 1) * edges / rate).astype(int)
    bank = np.zeros((n_mels, nfft // 2 + 1))
    for m in range(n_mels):
        lo, center, hi = bins[m], bins[m + 1], bins[m + 2]
        for k in range(lo + 1, center + 1):
            bank[m, k] = (k - lo) / max(center - lo, 1)
        for k in range(center + 1, hi):
            bank[m, k] = (hi - k) / max(hi - center, 1)

    return np.log(np.maximum(power @ bank.T, _LOG_FLOOR)).astype(np.float32)

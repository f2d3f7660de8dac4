"""Feature extraction: framing, filterbank geometry, DCT, deltas, container IO.

Expected values come from independent reimplementation inside the tests
(naive delta loop, hand-written bin formula, direct energy computation),
not from the module under test.
"""

import numpy as np
import pytest

from cocktaileval.audio import Waveform
from cocktaileval.errors import CorruptAudioError
from cocktaileval.features import (
    FeatureConfig,
    FeatureMatrix,
    dct_matrix,
    deltas,
    frame_count,
    hz_to_mel,
    load_features,
    mel_center_frequencies,
    mel_filterbank,
    mel_spectra,
    mel_to_hz,
    mfcc39,
    save_features,
)

CFG = FeatureConfig()


class TestConfig:
    def test_default_geometry(self):
        assert CFG.window_samples == 400
        assert CFG.hop_samples == 160
        assert CFG.fft_size == 512
        assert CFG.width == 39

    def test_validation(self):
        with pytest.raises(ValueError):
            FeatureConfig(window_length=0.005, hop_length=0.010)
        with pytest.raises(ValueError):
            FeatureConfig(hop_length=0.0)
        with pytest.raises(ValueError):
            FeatureConfig(cepstral_coeffs=26, mel_filters=26)
        with pytest.raises(ValueError):
            FeatureConfig(delta_window=0)
        with pytest.raises(ValueError):
            FeatureConfig(log_floor=0.0)


class TestFrameCount:
    @pytest.mark.parametrize(
        "n,expected",
        [
            (1, 1),
            (399, 1),
            (400, 1),
            (401, 1),
            (559, 1),
            (560, 2),
            (719, 2),
            (720, 3),
            (8800, 53),  # 1 + (8800 - 400) // 160
            (16000, 98),
        ],
    )
    def test_formula(self, n, expected):
        assert frame_count(n) == expected

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            frame_count(0)


class TestMelGeometry:
    def test_scale_round_trip(self):
        hz = np.array([20.0, 440.0, 1000.0, 7999.0])
        assert np.allclose(mel_to_hz(hz_to_mel(hz)), hz, rtol=1e-12)

    def test_filterbank_bins_match_hand_formula(self):
        # written out independently: HTK mel points, floor-bin triangles
        mel_max = 2595.0 * np.log10(1.0 + 8000.0 / 700.0)
        points_hz = 700.0 * (10.0 ** (np.linspace(0.0, mel_max, 28) / 2595.0) - 1.0)
        bins = np.floor(513.0 * points_hz / 16000.0).astype(int)
        bank = mel_filterbank(CFG)
        assert bank.shape == (26, 257)
        for j in (0, 5, 13, 25):
            left, center, right = bins[j], bins[j + 1], bins[j + 2]
            assert bank[j, center] == pytest.approx(1.0)
            assert np.all(bank[j, : left + 1] == 0.0)  # zero up to and at the left foot
            assert np.all(bank[j, right:] == 0.0)
            for k in range(left + 1, center):
                assert bank[j, k] == pytest.approx((k - left) / (center - left))
            for k in range(center + 1, right):
                assert bank[j, k] == pytest.approx((right - k) / (right - center))

    def test_filterbank_rows_nonneg_and_nonzero(self):
        bank = mel_filterbank(CFG)
        assert np.all(bank >= 0.0)
        assert np.all(bank.sum(axis=1) > 0.0)

    def test_center_frequencies_increase(self):
        centers = mel_center_frequencies(CFG)
        assert centers.shape == (26,)
        assert np.all(np.diff(centers) > 0)
        assert centers[-1] < 8000.0


class TestDct:
    def test_orthonormal(self):
        for n in (4, 13, 26):
            d = dct_matrix(n)
            assert np.allclose(d @ d.T, np.eye(n), atol=1e-10)

    def test_first_row_is_constant(self):
        d = dct_matrix(26)
        assert np.allclose(d[0], d[0][0])
        assert d[0][0] == pytest.approx(1.0 / np.sqrt(26))


def tone(freq: float, seconds: float = 0.5, rate: int = 16000) -> Waveform:
    t = np.arange(int(seconds * rate)) / rate
    return Waveform(0.5 * np.sin(2.0 * np.pi * freq * t), rate)


class TestToneDiagnostics:
    def test_tone_at_each_center_maximizes_its_own_filter(self):
        centers = mel_center_frequencies(CFG)
        for j, fc in enumerate(centers):
            spec = mel_spectra(tone(fc), CFG).mean(axis=0)
            assert int(np.argmax(spec)) == j, f"filter {j} at {fc:.1f} Hz"

    def test_1khz_tone_hits_a_neighboring_filter_of_the_nearest_center(self):
        # 1 kHz sits almost exactly between the centers at 921.5 and 1080.1 Hz,
        # so the argmax may land one filter off the nearest center
        centers = mel_center_frequencies(CFG)
        nearest = int(np.argmin(np.abs(centers - 1000.0)))
        spec = mel_spectra(tone(1000.0), CFG).mean(axis=0)
        assert abs(int(np.argmax(spec)) - nearest) <= 1

    def test_rate_mismatch(self):
        with pytest.raises(ValueError, match="8000"):
            mel_spectra(Waveform(np.ones(100), 8000), CFG)


def naive_deltas(matrix: np.ndarray, window: int) -> np.ndarray:
    count = matrix.shape[0]
    out = np.zeros_like(matrix, dtype=np.float64)
    denom = 2.0 * sum(n * n for n in range(1, window + 1))
    for t in range(count):
        acc = np.zeros(matrix.shape[1])
        for n in range(1, window + 1):
            acc = acc + n * (matrix[min(t + n, count - 1)] - matrix[max(t - n, 0)])
        out[t] = acc / denom
    return out


class TestDeltas:
    @pytest.mark.parametrize("window", [1, 2, 3])
    @pytest.mark.parametrize("rows", [1, 2, 5, 40])
    def test_matches_naive_loop(self, window, rows):
        rng = np.random.default_rng(100 * rows + window)
        m = rng.normal(size=(rows, 13))
        assert np.allclose(deltas(m, window), naive_deltas(m, window), atol=1e-12)

    def test_linear_trajectory_gives_the_slope(self):
        slope = 0.5
        m = slope * np.arange(20)[:, None] * np.ones((1, 13))
        d = deltas(m, 2)
        assert np.allclose(d[2:-2], slope, atol=1e-9)

    def test_constant_matrix_gives_exact_zeros(self):
        d = deltas(np.full((7, 13), 3.14159), 2)
        assert np.all(d == 0.0)

    def test_single_frame_is_zero(self):
        assert np.all(deltas(np.ones((1, 13)), 2) == 0.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            deltas(np.ones(5), 2)
        with pytest.raises(ValueError):
            deltas(np.ones((3, 4)), 0)


class TestMfcc:
    def test_shapes_across_lengths(self):
        rng = np.random.default_rng(9)
        for n in [1, 50, 399, 400, 401, 560, 1000, 8800]:
            w = Waveform(rng.normal(scale=0.1, size=n), 16000)
            matrix = mfcc39(w, CFG)
            assert matrix.shape == (frame_count(n), 39)
            assert matrix.frame_rate == 100.0

    def test_energy_column_computed_independently(self):
        rng = np.random.default_rng(10)
        samples = rng.normal(scale=0.1, size=1200)
        emphasized = np.append(samples[:1], samples[1:] - 0.97 * samples[:-1])
        expected = [
            np.log(max(np.sum(emphasized[160 * t : 160 * t + 400] ** 2), 1e-10))
            for t in range(frame_count(1200))
        ]
        matrix = mfcc39(Waveform(samples, 16000), CFG)
        assert np.allclose(matrix.frames[:, 0], expected, rtol=1e-12)

    def test_zero_signal_is_flat_and_deltas_vanish(self):
        matrix = mfcc39(Waveform(np.zeros(2000), 16000), CFG).frames
        assert np.allclose(matrix[:, 0], np.log(1e-10), rtol=1e-12)
        assert np.all(np.abs(matrix[:, 1:13]) < 1e-9)  # DCT of a constant bank
        assert np.all(np.abs(matrix[:, 13:]) < 1e-9)

    def test_column_layout_delta_of_static(self):
        rng = np.random.default_rng(11)
        w = Waveform(rng.normal(scale=0.1, size=3000), 16000)
        matrix = mfcc39(w, CFG).frames
        static = matrix[:, :13]
        assert np.allclose(matrix[:, 13:26], naive_deltas(static, 2), atol=1e-12)
        assert np.allclose(matrix[:, 26:39], naive_deltas(matrix[:, 13:26], 2), atol=1e-12)

    def test_rate_mismatch(self):
        with pytest.raises(ValueError):
            mfcc39(Waveform(np.ones(500), 22050), CFG)


class TestFeatureMatrix:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            FeatureMatrix(np.array([[1.0, np.nan]]), 100.0)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            FeatureMatrix(np.zeros((0, 39)), 100.0)

    def test_frozen_frames(self):
        m = FeatureMatrix(np.ones((2, 3)), 100.0)
        with pytest.raises(ValueError):
            m.frames[0, 0] = 5.0


class TestContainer:
    def test_round_trip_is_float32_exact(self, tmp_path):
        rng = np.random.default_rng(12)
        matrix = FeatureMatrix(rng.normal(size=(17, 39)), 100.0)
        path = tmp_path / "x.feat"
        save_features(matrix, path, CFG)
        back = load_features(path)
        assert back.shape == (17, 39)
        assert back.frame_rate == 100.0
        assert np.array_equal(back.frames, matrix.frames.astype("<f4").astype(np.float64))

    def test_sidecar_records_config(self, tmp_path):
        import json

        matrix = FeatureMatrix(np.ones((2, 39)), 100.0)
        save_features(matrix, tmp_path / "x.feat", CFG)
        sidecar = json.loads((tmp_path / "x.feat.json").read_text())
        assert sidecar["frame_rate"] == 100.0
        assert sidecar["config"]["mel_filters"] == 26

    def test_missing_sidecar_gives_zero_rate(self, tmp_path):
        matrix = FeatureMatrix(np.ones((2, 3)), 100.0)
        save_features(matrix, tmp_path / "x.feat")
        (tmp_path / "x.feat.json").unlink()
        assert load_features(tmp_path / "x.feat").frame_rate == 0.0

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.feat"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(CorruptAudioError, match="magic"):
            load_features(path)

    def test_truncated_payload(self, tmp_path):
        matrix = FeatureMatrix(np.ones((4, 39)), 100.0)
        path = tmp_path / "x.feat"
        save_features(matrix, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CorruptAudioError, match="truncated"):
            load_features(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "x.feat"
        path.write_bytes(b"FEAT\x01\x00")
        with pytest.raises(CorruptAudioError):
            load_features(path)

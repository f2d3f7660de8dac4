"""Acceptance suite: one test per criterion, one pass/fail line under -v.

C1  commanded target-to-interference ratios are realized to 1e-6 dB
C2  alignment error counts match exhaustive monotone-matching enumeration
C3  a seeded corruption backend's configured error rate is recovered
    within one percentage point, flat across TIR and identical across sets
C4  the full protocol, driven through the installed CLI, scores a perfect
    backend at exactly zero everywhere
C5  the 61-to-39 label collapse is total, idempotent, and silence-free
C6  default plans have the documented combinatorics
C7  reports are byte-identical across runs and worker counts
C8  feature matrices have the promised shape and exact degenerate values
"""

import itertools
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from cocktaileval.backend import CorruptingOracle, CorruptionRates
from cocktaileval.cli import main
from cocktaileval.experiments import (
    ExperimentReport,
    PhonemeExperimentPlan,
    VoiceExperimentPlan,
)
from cocktaileval.features import FeatureConfig, deltas, frame_count, mfcc39
from cocktaileval.audio import Waveform
from cocktaileval.mixing import TIR_GRID_DB, mix_at_tir
from cocktaileval.phonemes import TIMIT_INVENTORY, default_collapse_map, scoring_classes
from cocktaileval.scoring import edit_distance


def test_c1_tir_realization_within_1e6_db():
    rng = np.random.default_rng(2026)
    for trial in range(1000):
        n_target = int(rng.integers(200, 2000))
        n_interf = int(rng.integers(200, 2000))
        target = Waveform(rng.normal(scale=rng.uniform(0.01, 0.5), size=n_target), 16000)
        interf = Waveform(rng.normal(scale=rng.uniform(0.01, 0.5), size=n_interf), 16000)
        tir = float(TIR_GRID_DB[trial % len(TIR_GRID_DB)])
        record = mix_at_tir(target, interf, tir)
        # powers measured independently, pre-pad
        p_target = float(np.mean(target.samples**2))
        p_scaled = record.gain**2 * float(np.mean(interf.samples**2))
        realized = 10.0 * np.log10(p_target / p_scaled)
        assert abs(realized - tir) <= 1e-6, f"trial {trial}: {realized} vs {tir}"
        # and the mix really is target + gain * interference on the overlap
        overlap = min(n_target, n_interf)
        expected = target.samples[:overlap] + record.gain * interf.samples[:overlap]
        assert np.allclose(record.mixed.samples[:overlap], expected, atol=1e-12)


def _enumerated_distances(n: int, m: int, alphabet: int = 3):
    """Minimum monotone-matching cost for every (ref, hyp) pair of the
    given lengths: min over matched subsets of mismatches + unmatched."""
    refs = np.array(list(itertools.product(range(alphabet), repeat=n)), dtype=int)
    hyps = (
        np.array(list(itertools.product(range(alphabet), repeat=m)), dtype=int)
        if m > 0
        else np.zeros((1, 0), dtype=int)
    )
    best = np.full((len(refs), len(hyps)), n + m, dtype=int)
    for k in range(min(n, m) + 1):
        base = (n - k) + (m - k)
        if k == 0:
            best = np.minimum(best, base)
            continue
        for rows in itertools.combinations(range(n), k):
            ref_part = refs[:, rows]
            for cols in itertools.combinations(range(m), k):
                hyp_part = hyps[:, cols]
                mismatches = (ref_part[:, None, :] != hyp_part[None, :, :]).sum(axis=2)
                best = np.minimum(best, base + mismatches)
    return refs, hyps, best


def test_c2_edit_distance_matches_exhaustive_enumeration():
    for n in range(1, 6):
        for m in range(0, 6):
            refs, hyps, expected = _enumerated_distances(n, m)
            for i, ref in enumerate(refs):
                ref_list = list(ref)
                for j, hyp in enumerate(hyps):
                    counts = edit_distance(ref_list, list(hyp))
                    assert counts.errors == expected[i, j], (ref_list, list(hyp))
                    assert counts.ref_length == n


def _corruption_cells(big_catalog, substitution: float):
    from cocktaileval.experiments import run_voice_experiment

    plan = VoiceExperimentPlan(
        combos=("f-m", "m-f"), tir_grid=(0.0, 30.0), sets_per_cell=2, master_seed=0
    )
    oracle = CorruptingOracle(CorruptionRates(substitution=substitution), seed=0)
    cells, baseline = run_voice_experiment(
        big_catalog, plan, oracle, out_root=None, write_audio=False, workers=2
    )
    return cells, baseline


@pytest.mark.parametrize("substitution", [0.10, 0.26])
def test_c3_corruption_rate_recovered_within_one_point(big_catalog, substitution):
    cells, baseline = _corruption_cells(big_catalog, substitution)
    expected = 100.0 * substitution
    by_combo = {}
    for cell in cells:
        assert cell.status == "ok"
        assert abs(cell.mean_per - expected) <= 1.0, (cell.combo, cell.tir_db, cell.mean_per)
        # hypotheses are keyed by utterance id, so sets and TIRs must agree exactly
        assert cell.set_pers[0] == cell.set_pers[1]
        by_combo.setdefault(cell.combo, []).append(cell.mean_per)
    for combo, values in by_combo.items():
        assert values[0] == values[1], f"{combo}: PER varies across TIR"
    assert abs(baseline - expected) <= 1.0


def test_c4_cli_echo_run_scores_zero_everywhere(corpus_root, tmp_path):
    exe = shutil.which("cocktaileval")
    command = [exe] if exe else [sys.executable, "-m", "cocktaileval.cli"]
    out_root = tmp_path / "full"
    argv = command + [
        "run-all",
        "--corpus-root", str(corpus_root),
        "--output-root", str(out_root),
        "--seed", "0",
        "--set", 'voice.combos=["f-m","f-f","m-m","m-f"]',
        "--set", "voice.tir_grid=[0,15,30]",
        "--set", "voice.sets_per_cell=2",
        "--set", 'phoneme.phonemes=["ow","s","t"]',
        "--set", "phoneme.mixings_per_pair=20",
    ]
    proc = subprocess.run(argv, capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr[-2000:]

    report = ExperimentReport.load(out_root / "report.json")
    assert len(report.voice_cells) == 12
    for cell in report.voice_cells:
        assert cell.status == "ok"
        assert cell.set_pers == [0.0, 0.0]
    assert report.baseline_per == 0.0
    accuracies = report.stratification_accuracy_pct()
    assert set(accuracies) == {"ow", "s", "t"}
    assert all(value == 100.0 for value in accuracies.values())
    for name in ("complete", "stratified"):
        result = report.phoneme_sets[name]
        assert result.trial_count == 6 * 20
        assert result.error_rate == 0.0
        assert result.avg_length == 1.0
        assert result.oriented_total == 3
    reports_dir = out_root / "reports"
    for name in (
        "per_vs_tir.csv",
        "prediction_rates_complete.csv",
        "prediction_rates_stratified.csv",
        "stratification.csv",
        "summary.csv",
        "scatter_complete.csv",
        "scatter_stratified.csv",
        "per_vs_tir.gp",
        "run_ledger.json",
    ):
        assert (reports_dir / name).exists(), name
    # mixed audio was materialized under the default write_audio=true
    sample_set = out_root / "voice" / "f-m" / "tir0" / "set00"
    assert (sample_set / "audio").is_dir()
    assert (sample_set / "manifest.jsonl").exists()


def test_c5_collapse_is_total_idempotent_and_silence_free():
    cmap = default_collapse_map()
    assert len(TIMIT_INVENTORY) == 61
    for label in TIMIT_INVENTORY:
        collapsed = cmap.collapse(label)
        if collapsed in TIMIT_INVENTORY:
            # every non-silence class is itself a fine label and maps to itself
            assert cmap.collapse(collapsed) == collapsed
        else:
            assert collapsed == "sil"
    classes = scoring_classes()
    assert len(classes) == 38
    assert "sil" not in classes
    images = {cmap.collapse(label) for label in TIMIT_INVENTORY}
    assert images == set(classes) | {"sil"}
    assert cmap.collapse_sequence(["h#", "s", "pau", "t", "epi"]) == ["s", "t"]


def test_c6_default_plan_combinatorics():
    voice = VoiceExperimentPlan()
    assert len(voice.manifest_keys()) == 4 * 11 * 33 == 1452
    phoneme = PhonemeExperimentPlan()
    assert len(phoneme.pairs()) == 55
    assert phoneme.trial_count == 110000
    brute_pairs = list(itertools.combinations(phoneme.phonemes, 2))
    assert len(brute_pairs) == 45  # orientation denominator: non-self pairs


CORRUPT_RUN_SETS = (
    "--set", 'voice.combos=["f-m","m-m"]',
    "--set", "voice.tir_grid=[0,6]",
    "--set", "voice.sets_per_cell=2",
    "--set", 'phoneme.phonemes=["ow","s","t"]',
    "--set", "phoneme.mixings_per_pair=5",
    "--set", "write_audio=false",
    "--set", "backend.mode=corrupt",
    "--set", "backend.substitution=0.2",
    "--set", "backend.deletion=0.05",
    "--set", "backend.insertion=0.05",
)


def test_c7_reports_identical_across_runs_and_worker_counts(corpus_root, tmp_path):
    roots = []
    for name, workers in (("one", 1), ("two", 2), ("re", 1)):
        out_root = tmp_path / name
        code = main(
            [
                "run-all",
                "--corpus-root", str(corpus_root),
                "--output-root", str(out_root),
                "--seed", "7",
                "--workers", str(workers),
                *CORRUPT_RUN_SETS,
            ]
        )
        assert code == 0
        roots.append(out_root)

    first = roots[0]
    report_names = sorted(p.name for p in (first / "reports").iterdir())
    assert "per_vs_tir.csv" in report_names
    for other in roots[1:]:
        assert (other / "report.json").read_bytes() == (first / "report.json").read_bytes()
        for name in report_names:
            if name == "run_ledger.json":
                continue  # records the worker count, which legitimately differs
            assert (other / "reports" / name).read_bytes() == (
                first / "reports" / name
            ).read_bytes(), name
    # sanity: corruption produced a non-trivial PER, so the equality is meaningful
    report = ExperimentReport.load(first / "report.json")
    assert all(cell.mean_per > 5.0 for cell in report.voice_cells)


def test_c8_feature_shapes_and_exact_degenerate_values():
    config = FeatureConfig()
    rng = np.random.default_rng(88)
    for _ in range(100):
        n = int(rng.integers(1, 20000))
        matrix = mfcc39(Waveform(rng.normal(scale=0.1, size=n), 16000), config)
        assert matrix.shape == (frame_count(n, config), 39)
    silent = mfcc39(Waveform(np.zeros(4000), 16000), config).frames
    assert np.allclose(silent[:, 0], np.log(config.log_floor), rtol=1e-12)
    assert np.all(silent[:, 13:] == 0.0)
    ramp = 0.25 * np.arange(30)[:, None] * np.ones((1, 13))
    slope = deltas(ramp, config.delta_window)
    assert np.all(np.abs(slope[2:-2] - 0.25) <= 1e-9)

"""Phoneme error rate and mixed-phoneme prediction metrics.

PER pools raw error counts over a whole set:

    PER = 100 * (S + D + I) / N

with S, D, I from a minimum-cost alignment (unit costs) and N the summed
reference length. Ties between decompositions are broken toward
substitutions, but any minimum-cost decomposition has the same total.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class AlignmentCounts:
    substitutions: int
    deletions: int
    insertions: int
    ref_length: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def edit_distance(ref, hyp) -> AlignmentCounts:
    """Minimum-cost alignment counts between a reference and a hypothesis.

    Unit costs for substitution, deletion, insertion. The reference must be
    non-empty; the hypothesis may be empty (all deletions).
    """
    ref = list(ref)
    hyp = list(hyp)
    if not ref:
        raise ValueError("reference sequence must not be empty")
    n, m = len(ref), len(hyp)

    rows = [list(range(m + 1))]
    for i in range(1, n + 1):
        prev = rows[-1]
        cur = [i] + [0] * m
        for j in range(1, m + 1):
            same = ref[i - 1] == hyp[j - 1]
            cur[j] = min(prev[j - 1] + (0 if same else 1), prev[j] + 1, cur[j - 1] + 1)
        rows.append(cur)

    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and rows[i][j] == rows[i - 1][j - 1] + (
            0 if ref[i - 1] == hyp[j - 1] else 1
        ):
            if ref[i - 1] != hyp[j - 1]:
                subs += 1
            i, j = i - 1, j - 1
        elif i > 0 and rows[i][j] == rows[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return AlignmentCounts(subs, dels, ins, n)


def pooled_per(counts) -> float:
    """PER over already-aligned counts, pooled."""
    counts = list(counts)
    if not counts:
        raise ValueError("need at least one alignment")
    total_ref = sum(c.ref_length for c in counts)
    return 100.0 * sum(c.errors for c in counts) / total_ref


def per(pairs, pooled: bool = True) -> float:
    """PER over (reference, hypothesis) sequence pairs.

    pooled=True (default) sums error counts before dividing; pooled=False
    averages the per-utterance rates instead.
    """
    counts = [edit_distance(ref, hyp) for ref, hyp in pairs]
    if not counts:
        raise ValueError("need at least one (reference, hypothesis) pair")
    if pooled:
        return pooled_per(counts)
    return float(np.mean([100.0 * c.errors / c.ref_length for c in counts]))


@dataclass(frozen=True)
class MixtureTrial:
    """One mixed-pair trial: the two source labels and the hypothesis."""

    a: str
    b: str
    hypothesis: tuple[str, ...]


@dataclass
class PredictionRateMatrix:
    """Containment rates over unordered pairs.

    rates[r, c] is the percentage of trials of pair {r, c} whose hypothesis
    contains r (NaN where the pair has no trials); counts[r, c] is the trial
    count of that pair.
    """

    phonemes: tuple[str, ...]
    rates: np.ndarray
    counts: np.ndarray

    def index(self, phoneme: str) -> int:
        return self.phonemes.index(phoneme)

    def rate(self, row: str, col: str) -> float:
        return float(self.rates[self.index(row), self.index(col)])

    def row_mean(self, row: str) -> float:
        return float(np.nanmean(self.rates[self.index(row)]))

    def is_complete(self) -> bool:
        return bool(np.all(np.isfinite(self.rates)))


def mixture_metrics(trials, phonemes) -> tuple[PredictionRateMatrix, float, float]:
    """Prediction-rate matrix, error rate, and mean hypothesis length.

    The error rate is the percentage of all trials whose hypothesis contains
    neither source label. Results do not depend on trial order or on which
    of the two labels was tagged first.
    """
    trials = list(trials)
    phonemes = tuple(phonemes)
    if not trials:
        raise ValueError("need at least one trial")
    index = {p: k for k, p in enumerate(phonemes)}
    size = len(phonemes)

    pools: dict[tuple[str, str], list[MixtureTrial]] = {}
    for trial in trials:
        if trial.a not in index or trial.b not in index:
            raise ValueError(f"trial labels ({trial.a}, {trial.b}) outside the phoneme list")
        pools.setdefault(tuple(sorted((trial.a, trial.b))), []).append(trial)

    rates = np.full((size, size), np.nan)
    counts = np.zeros((size, size), dtype=int)
    for r in phonemes:
        for c in phonemes:
            pool = pools.get(tuple(sorted((r, c))))
            if not pool:
                continue
            hits = sum(1 for t in pool if r in t.hypothesis)
            rates[index[r], index[c]] = 100.0 * hits / len(pool)
            counts[index[r], index[c]] = len(pool)

    neither = sum(1 for t in trials if t.a not in t.hypothesis and t.b not in t.hypothesis)
    error_rate = 100.0 * neither / len(trials)
    avg_length = float(np.mean([len(t.hypothesis) for t in trials]))
    return PredictionRateMatrix(phonemes, rates, counts), error_rate, avg_length


def accuracy_oriented(matrix: PredictionRateMatrix, accuracies: dict[str, float]) -> tuple[int, int]:
    """Count unordered non-self pairs where the more accurately recognized
    phoneme also has the higher prediction rate within the pair.

    Ties in either quantity are never counted as oriented. Returns
    (oriented, total) with total = C(len(phonemes), 2).
    """
    missing = [p for p in matrix.phonemes if p not in accuracies]
    if missing:
        raise ValueError(f"no accuracy for phoneme(s): {missing}")
    if not matrix.is_complete():
        raise ValueError("prediction-rate matrix has missing cells")
    oriented = 0
    total = 0
    for a, b in combinations(matrix.phonemes, 2):
        total += 1
        acc_diff = accuracies[a] - accuracies[b]
        rate_diff = matrix.rate(a, b) - matrix.rate(b, a)
        if acc_diff == 0 or rate_diff == 0:
            continue
        if (acc_diff > 0) == (rate_diff > 0):
            oriented += 1
    return oriented, total


def write_counts_csv(rows, path) -> None:
    """Per-utterance alignment counts: id, S, D, I, ref_length."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "substitutions", "deletions", "insertions", "ref_length"])
        for utt_id, counts in rows:
            writer.writerow(
                [utt_id, counts.substitutions, counts.deletions, counts.insertions, counts.ref_length]
            )


def write_matrix_csv(matrix: PredictionRateMatrix, path) -> None:
    """10x10 (or NxN) rate matrix with a header row and column; blank = missing."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["phoneme", *matrix.phonemes])
        for r in matrix.phonemes:
            row = [r]
            for c in matrix.phonemes:
                value = matrix.rate(r, c)
                row.append("" if np.isnan(value) else f"{value:.4f}")
            writer.writerow(row)

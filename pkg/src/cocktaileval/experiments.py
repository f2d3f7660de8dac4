"""Experiment plans, seeded test-set construction, runners, and reports.

Two experiments share one seeding discipline: every random draw comes from
a generator derived from (master seed, experiment, cell, set, trial), so a
run is reproducible byte for byte regardless of worker count.

Voice experiment: for each (gender combo, TIR) cell, each target-gender
test utterance is mixed once per set against a seeded random utterance of
the interference gender, the backend transcribes the set, and PER is
pooled per set then averaged over sets.

Phoneme experiment: all unordered pairs (self-pairs included) of the
configured phonemes are mixed at 0 dB TIR, a fixed number of trials per
pair, and hypotheses are scored for containment of the two source labels.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .audio import Waveform, load_audio
from .backend import (
    ManifestEntry,
    StratifiedSet,
    TestSetManifest,
    spawn_backend,
    stratify,
    transcribe,
    write_manifest,
)
from .corpus import CorpusCatalog
from .errors import CocktailEvalError, PlanError
from .features import FeatureConfig, mfcc39, save_features
from .mixing import (
    MixMetadataWriter,
    PhoneSegment,
    TIR_GRID_DB,
    export_mix,
    extract_segments,
    mix_at_tir,
    mix_segments,
)
from .phonemes import CollapseMap, default_collapse_map, scoring_classes
from .scoring import (
    MixtureTrial,
    PredictionRateMatrix,
    accuracy_oriented,
    edit_distance,
    mixture_metrics,
    pooled_per,
)
from .seeding import derive_rng, seed_path
from .version import __version__

logger = logging.getLogger(__name__)

DEFAULT_COMBOS = ("f-m", "f-f", "m-m", "m-f")
DEFAULT_TEST_PHONEMES = ("ow", "ey", "ah", "ay", "er", "s", "t", "aa", "ih", "eh")
SOURCE_SETS = ("complete", "stratified")


def _parse_combo(combo: str) -> tuple[str, str]:
    parts = combo.lower().split("-")
    if len(parts) != 2 or parts[0] not in ("m", "f") or parts[1] not in ("m", "f"):
        raise PlanError(f"combo must look like 'f-m', got {combo!r}")
    return parts[0], parts[1]


@dataclass(frozen=True)
class VoiceExperimentPlan:
    """Gender combos x TIR grid x independent sets."""

    combos: tuple[str, ...] = DEFAULT_COMBOS
    tir_grid: tuple[float, ...] = TIR_GRID_DB
    sets_per_cell: int = 33
    master_seed: int = 0
    exclude_same_speaker: bool = True

    def __post_init__(self):
        combos = tuple(c.lower() for c in self.combos)
        if not combos or len(set(combos)) != len(combos):
            raise PlanError("combos must be non-empty and distinct")
        for combo in combos:
            _parse_combo(combo)
        object.__setattr__(self, "combos", combos)
        grid = tuple(float(t) for t in self.tir_grid)
        if not grid or len(set(grid)) != len(grid):
            raise PlanError("tir_grid must be non-empty and distinct")
        for tir in grid:
            if tir not in TIR_GRID_DB:
                raise PlanError(f"TIR {tir:g} dB is outside the supported grid {TIR_GRID_DB}")
        object.__setattr__(self, "tir_grid", grid)
        if self.sets_per_cell < 1:
            raise PlanError("sets_per_cell must be at least 1")

    def cells(self) -> list[tuple[str, float]]:
        return [(combo, tir) for combo in self.combos for tir in self.tir_grid]

    def manifest_keys(self) -> list[tuple[str, float, int]]:
        return [
            (combo, tir, k)
            for combo, tir in self.cells()
            for k in range(self.sets_per_cell)
        ]

    def to_dict(self) -> dict:
        return {
            "combos": list(self.combos),
            "tir_grid": list(self.tir_grid),
            "sets_per_cell": self.sets_per_cell,
            "master_seed": self.master_seed,
            "exclude_same_speaker": self.exclude_same_speaker,
        }


@dataclass(frozen=True)
class PhonemeExperimentPlan:
    """All unordered pairs (self-pairs included) of the listed phonemes."""

    phonemes: tuple[str, ...] = DEFAULT_TEST_PHONEMES
    mixings_per_pair: int = 2000
    source_sets: tuple[str, ...] = SOURCE_SETS
    master_seed: int = 0

    def __post_init__(self):
        phonemes = tuple(self.phonemes)
        if not phonemes or len(set(phonemes)) != len(phonemes):
            raise PlanError("phoneme list must be non-empty and distinct")
        known = set(scoring_classes())
        unknown = [p for p in phonemes if p not in known]
        if unknown:
            raise PlanError(f"phoneme(s) outside the scoring classes: {unknown}")
        object.__setattr__(self, "phonemes", phonemes)
        if self.mixings_per_pair < 1:
            raise PlanError("mixings_per_pair must be at least 1")
        sets = tuple(self.source_sets)
        if not sets or any(s not in SOURCE_SETS for s in sets) or len(set(sets)) != len(sets):
            raise PlanError(f"source_sets must be distinct values from {SOURCE_SETS}")
        object.__setattr__(self, "source_sets", sets)

    def pairs(self) -> list[tuple[str, str]]:
        return [
            (self.phonemes[i], self.phonemes[j])
            for i in range(len(self.phonemes))
            for j in range(i, len(self.phonemes))
        ]

    @property
    def trial_count(self) -> int:
        return len(self.pairs()) * self.mixings_per_pair

    def to_dict(self) -> dict:
        return {
            "phonemes": list(self.phonemes),
            "mixings_per_pair": self.mixings_per_pair,
            "source_sets": list(self.source_sets),
            "master_seed": self.master_seed,
        }


@lru_cache(maxsize=512)
def _cached_audio(path: str):
    # Waveform samples are immutable, so sharing across threads is safe.
    return load_audio(path)


def build_voice_testset(
    catalog: CorpusCatalog,
    combo: str,
    tir_db: float,
    set_index: int,
    master_seed: int = 0,
    out_dir=None,
    write_audio: bool = True,
    exclude_same_speaker: bool = True,
    featurize: bool = False,
    feature_config: FeatureConfig | None = None,
    collapse_map: CollapseMap | None = None,
) -> TestSetManifest:
    """One mixed-voice set: every target-gender test utterance exactly once.

    The interference utterance is drawn uniformly (seeded per target) from
    the interference-gender test pool, never the target utterance itself and
    by default never the same speaker.
    """
    cmap = collapse_map or default_collapse_map()
    target_gender, interference_gender = _parse_combo(combo)
    targets = catalog.select("test", target_gender)
    pool = catalog.select("test", interference_gender)
    if not targets:
        raise PlanError(f"no test utterances with target gender {target_gender!r}")

    out_dir = Path(out_dir) if out_dir is not None else None
    writer = MixMetadataWriter(out_dir / "mixes.jsonl") if out_dir is not None else None
    entries = []
    try:
        for target in targets:
            candidates = [
                u
                for u in pool
                if u.id != target.id
                and (not exclude_same_speaker or u.speaker != target.speaker)
            ]
            if not candidates:
                raise PlanError(
                    f"no interference candidates for {target.id} "
                    f"(gender {interference_gender!r}, exclude_same_speaker={exclude_same_speaker})"
                )
            rng = derive_rng(master_seed, "voice", combo, f"{tir_db:g}", set_index, target.id)
            pick = candidates[int(rng.integers(len(candidates)))]
            record = mix_at_tir(
                _cached_audio(str(target.audio_path)),
                _cached_audio(str(pick.audio_path)),
                tir_db,
                target_id=target.id,
                interference_id=pick.id,
                seed_path=seed_path(master_seed, "voice", combo, f"{tir_db:g}", set_index, target.id),
            )
            ref = tuple(cmap.collapse_sequence(target.alignment.labels()))
            if not ref:
                raise PlanError(f"utterance {target.id} has no non-silence phones")
            audio_path = None
            features_path = None
            if out_dir is not None and write_audio:
                audio_path = str(out_dir / "audio" / f"{target.id}.wav")
                export_mix(record, audio_path)
            if out_dir is not None and featurize:
                features_path = str(out_dir / "features" / f"{target.id}.feat")
                cfg = feature_config or FeatureConfig()
                save_features(mfcc39(record.mixed, cfg), features_path, cfg)
            if writer is not None:
                writer.write(record, target.id, audio_path)
            entries.append(
                ManifestEntry(
                    id=target.id,
                    ref=ref,
                    audio=audio_path,
                    features=features_path,
                    tags={
                        "combo": combo,
                        "tir_db": tir_db,
                        "set": set_index,
                        "interference": pick.id,
                    },
                )
            )
    finally:
        if writer is not None:
            writer.close()

    manifest = TestSetManifest(
        entries,
        metadata={"kind": "voice", "combo": combo, "tir_db": tir_db, "set": set_index},
    )
    if out_dir is not None:
        write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def baseline_manifest(catalog: CorpusCatalog, collapse_map: CollapseMap | None = None) -> TestSetManifest:
    """The untouched test split, references collapsed."""
    cmap = collapse_map or default_collapse_map()
    entries = []
    for utt in catalog.select("test"):
        ref = tuple(cmap.collapse_sequence(utt.alignment.labels()))
        if not ref:
            raise PlanError(f"utterance {utt.id} has no non-silence phones")
        entries.append(ManifestEntry(id=utt.id, ref=ref, audio=str(utt.audio_path)))
    if not entries:
        raise PlanError("catalog has no test utterances")
    return TestSetManifest(entries, metadata={"kind": "baseline"})


@dataclass
class VoiceCellResult:
    combo: str
    tir_db: float
    set_pers: list[float] = field(default_factory=list)
    status: str = "ok"
    error: str = ""

    @property
    def mean_per(self) -> float | None:
        if self.status != "ok" or not self.set_pers:
            return None
        return float(np.mean(self.set_pers))


def run_voice_experiment(
    catalog: CorpusCatalog,
    plan: VoiceExperimentPlan,
    backend,
    out_root=None,
    workers: int = 1,
    write_audio: bool = True,
    featurize: bool = False,
    feature_config: FeatureConfig | None = None,
    collapse_map: CollapseMap | None = None,
) -> tuple[list[VoiceCellResult], float]:
    """All cells of the plan plus the unmixed baseline PER.

    A set whose backend call fails marks its whole (combo, TIR) cell failed;
    the error text is kept and the cell is excluded from means.
    """
    out_root = Path(out_root) if out_root is not None else None

    def run_set(key):
        combo, tir, k = key
        set_dir = (
            out_root / "voice" / combo / f"tir{tir:g}" / f"set{k:02d}"
            if out_root is not None
            else None
        )
        manifest = build_voice_testset(
            catalog,
            combo,
            tir,
            k,
            master_seed=plan.master_seed,
            out_dir=set_dir,
            write_audio=write_audio,
            exclude_same_speaker=plan.exclude_same_speaker,
            featurize=featurize,
            feature_config=feature_config,
            collapse_map=collapse_map,
        )
        hypotheses = transcribe(manifest, spawn_backend(backend))
        counts = [
            edit_distance(entry.ref, hyp.predicted)
            for entry, hyp in zip(manifest.entries, hypotheses)
        ]
        return pooled_per(counts)

    keys = plan.manifest_keys()
    outcomes: dict[tuple[str, float, int], tuple[str, object]] = {}

    def guarded(key):
        try:
            return key, ("ok", run_set(key))
        except (CocktailEvalError, ValueError) as exc:
            logger.warning("voice set %s failed: %s", key, exc)
            return key, ("failed", f"{type(exc).__name__}: {exc}")

    if workers <= 1:
        for key in keys:
            k, outcome = guarded(key)
            outcomes[k] = outcome
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for k, outcome in pool.map(guarded, keys):
                outcomes[k] = outcome

    cells = []
    for combo, tir in plan.cells():
        result = VoiceCellResult(combo=combo, tir_db=tir)
        for k in range(plan.sets_per_cell):
            status, value = outcomes[(combo, tir, k)]
            if status == "ok":
                result.set_pers.append(value)
            elif result.status == "ok":
                result.status = "failed"
                result.error = str(value)
        cells.append(result)

    baseline = baseline_manifest(catalog, collapse_map)
    hypotheses = transcribe(baseline, spawn_backend(backend))
    baseline_per = pooled_per(
        edit_distance(entry.ref, hyp.predicted)
        for entry, hyp in zip(baseline.entries, hypotheses)
    )
    return cells, baseline_per


def build_segment_pools(
    catalog: CorpusCatalog,
    phonemes,
    collapse_map: CollapseMap | None = None,
    split: str = "test",
) -> dict[str, list[PhoneSegment]]:
    """Collect every non-silence segment of the listed classes from one split."""
    cmap = collapse_map or default_collapse_map()
    wanted = set(phonemes)
    pools: dict[str, list[PhoneSegment]] = {p: [] for p in phonemes}
    for utt in catalog.select(split):
        for segment in extract_segments(utt, cmap):
            if segment.label39 in wanted:
                pools[segment.label39].append(segment)
    for pool in pools.values():
        pool.sort(key=lambda s: s.id)
    return pools


@dataclass
class PhonemeSetResult:
    source_set: str
    matrix: PredictionRateMatrix
    error_rate: float
    avg_length: float
    trial_count: int
    oriented: int | None = None
    oriented_total: int | None = None
    scatter: list[tuple[str, float, float]] = field(default_factory=list)


def run_phoneme_experiment(
    pools: dict[str, list[PhoneSegment]],
    plan: PhonemeExperimentPlan,
    backend,
    source_set: str,
    out_root=None,
    workers: int = 1,
    write_audio: bool = True,
) -> PhonemeSetResult:
    """All pair cells for one source set (complete or stratified pools)."""
    for phoneme in plan.phonemes:
        if not pools.get(phoneme):
            raise PlanError(f"{source_set} set has no segments for phoneme {phoneme!r}")
    out_root = Path(out_root) if out_root is not None else None

    def run_pair(pair):
        a, b = pair
        pool_a, pool_b = pools[a], pools[b]
        pair_dir = (
            out_root / "phonemes" / source_set / f"{a}+{b}" if out_root is not None else None
        )
        writer = MixMetadataWriter(pair_dir / "mixes.jsonl") if pair_dir is not None else None
        entries = []
        try:
            for t in range(plan.mixings_per_pair):
                rng = derive_rng(plan.master_seed, "phoneme", source_set, a, b, t)
                seg_a = pool_a[int(rng.integers(len(pool_a)))]
                seg_b = pool_b[int(rng.integers(len(pool_b)))]
                record = mix_segments(
                    seg_a,
                    seg_b,
                    0.0,
                    seed_path=seed_path(plan.master_seed, "phoneme", source_set, a, b, t),
                )
                trial_id = f"{a}+{b}:{t:05d}"
                audio_path = None
                if pair_dir is not None and write_audio:
                    audio_path = str(pair_dir / "audio" / f"{t:05d}.wav")
                    export_mix(record, audio_path)
                if writer is not None:
                    writer.write(record, trial_id, audio_path)
                entries.append(
                    ManifestEntry(
                        id=trial_id,
                        ref=(a,),
                        audio=audio_path,
                        tags={"pair": [a, b], "segments": [seg_a.id, seg_b.id]},
                    )
                )
        finally:
            if writer is not None:
                writer.close()
        manifest = TestSetManifest(
            entries, metadata={"kind": "phoneme", "source_set": source_set, "pair": [a, b]}
        )
        if pair_dir is not None:
            write_manifest(manifest, pair_dir / "manifest.jsonl")
        hypotheses = transcribe(manifest, spawn_backend(backend))
        return [MixtureTrial(a, b, h.predicted) for h in hypotheses]

    pairs = plan.pairs()
    if workers <= 1:
        per_pair = [run_pair(pair) for pair in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_pair = list(pool.map(run_pair, pairs))

    trials = [trial for batch in per_pair for trial in batch]
    matrix, error_rate, avg_length = mixture_metrics(trials, plan.phonemes)
    return PhonemeSetResult(
        source_set=source_set,
        matrix=matrix,
        error_rate=error_rate,
        avg_length=avg_length,
        trial_count=len(trials),
    )


@dataclass
class ExperimentReport:
    """Everything one run produced, serializable to report.json."""

    toolkit_version: str = __version__
    master_seed: int = 0
    backend: dict = field(default_factory=dict)
    voice_plan: dict | None = None
    phoneme_plan: dict | None = None
    voice_cells: list[VoiceCellResult] = field(default_factory=list)
    baseline_per: float | None = None
    stratification: dict | None = None  # {"evaluated": {...}, "kept": {...}}
    phoneme_sets: dict[str, PhonemeSetResult] = field(default_factory=dict)

    def stratification_accuracy_pct(self) -> dict[str, float]:
        if self.stratification is None:
            return {}
        evaluated = self.stratification["evaluated"]
        kept = self.stratification["kept"]
        return {p: 100.0 * kept.get(p, 0) / evaluated[p] for p in evaluated}

    def to_dict(self) -> dict:
        def matrix_dict(matrix: PredictionRateMatrix) -> dict:
            rates = [[None if np.isnan(v) else float(v) for v in row] for row in matrix.rates]
            return {
                "phonemes": list(matrix.phonemes),
                "rates": rates,
                "counts": matrix.counts.tolist(),
            }

        return {
            "toolkit_version": self.toolkit_version,
            "master_seed": self.master_seed,
            "backend": self.backend,
            "voice_plan": self.voice_plan,
            "phoneme_plan": self.phoneme_plan,
            "baseline_per": self.baseline_per,
            "voice_cells": [
                {
                    "combo": c.combo,
                    "tir_db": c.tir_db,
                    "set_pers": c.set_pers,
                    "status": c.status,
                    "error": c.error,
                }
                for c in self.voice_cells
            ],
            "stratification": self.stratification,
            "phoneme_sets": {
                name: {
                    "source_set": r.source_set,
                    "matrix": matrix_dict(r.matrix),
                    "error_rate": r.error_rate,
                    "avg_length": r.avg_length,
                    "trial_count": r.trial_count,
                    "oriented": r.oriented,
                    "oriented_total": r.oriented_total,
                    "scatter": [list(row) for row in r.scatter],
                }
                for name, r in self.phoneme_sets.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        def matrix_from(obj: dict) -> PredictionRateMatrix:
            rates = np.array(
                [[np.nan if v is None else v for v in row] for row in obj["rates"]], dtype=float
            )
            return PredictionRateMatrix(
                tuple(obj["phonemes"]), rates, np.array(obj["counts"], dtype=int)
            )

        report = cls(
            toolkit_version=data.get("toolkit_version", __version__),
            master_seed=data.get("master_seed", 0),
            backend=data.get("backend", {}),
            voice_plan=data.get("voice_plan"),
            phoneme_plan=data.get("phoneme_plan"),
            baseline_per=data.get("baseline_per"),
            stratification=data.get("stratification"),
        )
        report.voice_cells = [
            VoiceCellResult(
                combo=c["combo"],
                tir_db=c["tir_db"],
                set_pers=list(c["set_pers"]),
                status=c.get("status", "ok"),
                error=c.get("error", ""),
            )
            for c in data.get("voice_cells", [])
        ]
        for name, obj in data.get("phoneme_sets", {}).items():
            report.phoneme_sets[name] = PhonemeSetResult(
                source_set=obj["source_set"],
                matrix=matrix_from(obj["matrix"]),
                error_rate=obj["error_rate"],
                avg_length=obj["avg_length"],
                trial_count=obj.get("trial_count", 0),
                oriented=obj.get("oriented"),
                oriented_total=obj.get("oriented_total"),
                scatter=[tuple(row) for row in obj.get("scatter", [])],
            )
        return report

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ExperimentReport":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _write_csv(path: Path, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "\n".join(",".join(str(cell) for cell in row) for row in rows)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")


def emit_reports(report: ExperimentReport, out_dir) -> list[Path]:
    """Write the CSV report set; returns the paths written."""
    out_dir = Path(out_dir)
    written: list[Path] = []

    if report.voice_cells or report.baseline_per is not None:
        max_sets = max((len(c.set_pers) for c in report.voice_cells), default=0)
        header = ["combo", "tir_db", "mean_per", "status"] + [
            f"per_set_{k}" for k in range(max_sets)
        ]
        rows: list[list] = [header]
        for cell in report.voice_cells:
            mean = cell.mean_per
            row = [
                cell.combo,
                f"{cell.tir_db:g}",
                "" if mean is None else f"{mean:.4f}",
                cell.status,
            ]
            row += [f"{p:.4f}" for p in cell.set_pers]
            row += [""] * (max_sets - len(cell.set_pers))
            rows.append(row)
        if report.baseline_per is not None:
            rows.append(
                ["unmixed", "", f"{report.baseline_per:.4f}", "ok"] + [""] * max_sets
            )
        path = out_dir / "per_vs_tir.csv"
        _write_csv(path, rows)
        written.append(path)

    for name, result in sorted(report.phoneme_sets.items()):
        path = out_dir / f"prediction_rates_{name}.csv"
        rows = [["phoneme", *result.matrix.phonemes]]
        for r in result.matrix.phonemes:
            row = [r]
            for c in result.matrix.phonemes:
                value = result.matrix.rate(r, c)
                row.append("" if np.isnan(value) else f"{value:.4f}")
            rows.append(row)
        _write_csv(path, rows)
        written.append(path)

    if report.stratification is not None:
        accuracy = report.stratification_accuracy_pct()
        kept = report.stratification["kept"]
        order = sorted(accuracy, key=lambda p: (-kept.get(p, 0), p))
        rows = [["phoneme", "occurrences", "accuracy"]]
        for p in order:
            rows.append([p, kept.get(p, 0), f"{accuracy[p]:.4f}"])
        path = out_dir / "stratification.csv"
        _write_csv(path, rows)
        written.append(path)

    if report.phoneme_sets:
        rows = [["source_set", "avg_length", "error_rate", "orientation"]]
        for name, result in sorted(report.phoneme_sets.items()):
            orientation = (
                f"{result.oriented}/{result.oriented_total}"
                if result.oriented is not None
                else ""
            )
            rows.append(
                [name, f"{result.avg_length:.4f}", f"{result.error_rate:.4f}", orientation]
            )
        path = out_dir / "summary.csv"
        _write_csv(path, rows)
        written.append(path)

        for name, result in sorted(report.phoneme_sets.items()):
            if not result.scatter:
                continue
            rows = [["phoneme", "stratification_accuracy", "mean_prediction_rate"]]
            for phoneme, acc, mean_rate in result.scatter:
                rows.append([phoneme, f"{acc:.4f}", f"{mean_rate:.4f}"])
            path = out_dir / f"scatter_{name}.csv"
            _write_csv(path, rows)
            written.append(path)

    return written


def emit_run_ledger(report: ExperimentReport, out_dir, config: dict | None = None) -> Path:
    """Machine-readable record of what ran: plans, seed, version, backend."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ledger = {
        "toolkit_version": report.toolkit_version,
        "master_seed": report.master_seed,
        "backend": report.backend,
        "voice_plan": report.voice_plan,
        "phoneme_plan": report.phoneme_plan,
    }
    if config is not None:
        ledger["config"] = config
    path = out_dir / "run_ledger.json"
    path.write_text(json.dumps(ledger, indent=1, sort_keys=True), encoding="utf-8")
    return path


def emit_plot_scripts(report: ExperimentReport, out_dir) -> list[Path]:
    """Gnuplot command files next to the CSVs they plot."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    if report.voice_cells:
        combos = sorted({c.combo for c in report.voice_cells})
        series = ", \\\n     ".join(
            f"'per_vs_tir.csv' using 2:(strcol(1) eq '{combo}' ? column(3) : 1/0) "
            f"with linespoints title '{combo.upper()}'"
            for combo in combos
        )
        lines = [
            "set datafile separator ','",
            "set xlabel 'TIR (dB)'",
            "set ylabel 'PER (%)'",
            "set key outside",
            "set yrange [0:*]",
        ]
        if report.baseline_per is not None:
            series += f", \\\n     {report.baseline_per:.4f} with lines dashtype 2 title 'unmixed'"
        lines.append(f"plot {series}")
        path = out_dir / "per_vs_tir.gp"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    for name, result in sorted(report.phoneme_sets.items()):
        if not result.scatter:
            continue
        lines = [
            "set datafile separator ','",
            "set xlabel 'Stratification accuracy (%)'",
            "set ylabel 'Mean prediction rate (%)'",
            f"plot 'scatter_{name}.csv' every ::1 using 2:3:1 with labels point pt 7 "
            "offset char 1,1 notitle",
        ]
        path = out_dir / f"scatter_{name}.gp"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    return written


def run_full(
    catalog: CorpusCatalog,
    voice_plan: VoiceExperimentPlan,
    phoneme_plan: PhonemeExperimentPlan,
    backend,
    out_root,
    workers: int = 1,
    write_audio: bool = True,
    featurize: bool = False,
    feature_config: FeatureConfig | None = None,
    collapse_map: CollapseMap | None = None,
    config_snapshot: dict | None = None,
) -> ExperimentReport:
    """The full protocol: voice experiment, stratification, phoneme experiments,
    reports, and the run ledger, all under out_root."""
    out_root = Path(out_root)
    report = ExperimentReport(
        master_seed=voice_plan.master_seed,
        backend=backend.describe() if hasattr(backend, "describe") else {"kind": "custom"},
        voice_plan=voice_plan.to_dict(),
        phoneme_plan=phoneme_plan.to_dict(),
    )

    logger.info("voice experiment: %d manifests", len(voice_plan.manifest_keys()))
    report.voice_cells, report.baseline_per = run_voice_experiment(
        catalog,
        voice_plan,
        backend,
        out_root=out_root,
        workers=workers,
        write_audio=write_audio,
        featurize=featurize,
        feature_config=feature_config,
        collapse_map=collapse_map,
    )

    logger.info("extracting phone segments for %s", phoneme_plan.phonemes)
    pools = build_segment_pools(catalog, phoneme_plan.phonemes, collapse_map)

    all_segments = [segment for phoneme in phoneme_plan.phonemes for segment in pools[phoneme]]
    segments_dir = out_root / "phonemes" / "segments_audio" if write_audio else None
    logger.info("stratifying %d segments", len(all_segments))
    stratified = stratify(all_segments, spawn_backend(backend), audio_dir=segments_dir)
    report.stratification = {
        "evaluated": stratified.evaluated,
        "kept": stratified.kept_counts(),
    }
    accuracy_pct = report.stratification_accuracy_pct()

    for source_set in phoneme_plan.source_sets:
        source_pools = pools if source_set == "complete" else stratified.kept
        logger.info("phoneme experiment over the %s set", source_set)
        result = run_phoneme_experiment(
            source_pools,
            phoneme_plan,
            backend,
            source_set,
            out_root=out_root,
            workers=workers,
            write_audio=write_audio,
        )
        result.oriented, result.oriented_total = accuracy_oriented(result.matrix, accuracy_pct)
        result.scatter = [
            (p, accuracy_pct[p], result.matrix.row_mean(p)) for p in phoneme_plan.phonemes
        ]
        report.phoneme_sets[source_set] = result

    report.save(out_root / "report.json")
    reports_dir = out_root / "reports"
    emit_reports(report, reports_dir)
    emit_plot_scripts(report, reports_dir)
    emit_run_ledger(report, reports_dir, config=config_snapshot)
    return report


def write_segments_index(segments, path) -> None:
    """JSONL index of segments (spans only; audio is cut on demand)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for segment in segments:
            fh.write(
                json.dumps(
                    {
                        "id": segment.id,
                        "utterance": segment.source_utterance,
                        "begin": segment.begin,
                        "end": segment.end,
                        "label": segment.label,
                        "label39": segment.label39,
                    }
                )
                + "\n"
            )


def load_segments_index(path, catalog: CorpusCatalog) -> list[PhoneSegment]:
    """Rebuild segments from an index by slicing the source audio."""
    segments = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        obj = json.loads(raw)
        utt = catalog.by_id(obj["utterance"])
        waveform = _cached_audio(str(utt.audio_path))
        begin, end = int(obj["begin"]), int(obj["end"])
        segments.append(
            PhoneSegment(
                id=obj["id"],
                label=obj["label"],
                label39=obj["label39"],
                audio=Waveform(waveform.samples[begin:end], waveform.sample_rate),
                source_utterance=obj["utterance"],
                begin=begin,
                end=end,
            )
        )
    return segments

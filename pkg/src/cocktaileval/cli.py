"""Command-line interface.

Exit codes: 0 success, 1 validation or runtime failure, 2 usage error
(argparse's convention). Every run-all config field can be overridden on
the command line with repeated `--set section.key=value` flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .backend import read_hypotheses, read_manifest
from .config import CORPUS_ROOT_ENV, RunConfig
from .corpus import CorpusCatalog, scan_corpus
from .errors import CocktailEvalError
from .experiments import (
    ExperimentReport,
    build_segment_pools,
    build_voice_testset,
    emit_plot_scripts,
    emit_reports,
    emit_run_ledger,
    load_segments_index,
    run_full,
    run_phoneme_experiment,
    write_segments_index,
)
from .backend import stratify as stratify_segments
from .features import load_features, mfcc39, save_features
from .phonemes import CollapseMap, default_collapse_map
from .scoring import edit_distance, pooled_per, write_counts_csv
from .version import __version__

logger = logging.getLogger(__name__)


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for dotted in getattr(args, "set", None) or []:
        if "=" not in dotted:
            raise CocktailEvalError(f"--set expects key=value, got {dotted!r}")
        key, _, value = dotted.partition("=")
        config.apply_override(key.strip(), value.strip())
    if getattr(args, "corpus_root", None):
        config.corpus_root = args.corpus_root
    if getattr(args, "output_root", None):
        config.output_root = args.output_root
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    return config


def _collapse_map(config: RunConfig) -> CollapseMap:
    if config.collapse_map_path:
        return CollapseMap.load(config.collapse_map_path)
    return default_collapse_map()


def _catalog(args, config: RunConfig) -> CorpusCatalog:
    if getattr(args, "catalog", None):
        return CorpusCatalog.load(args.catalog)
    root = config.resolve_corpus_root()
    return scan_corpus(root, include_sa=config.include_sa)


def cmd_ingest(args) -> int:
    config = _load_config(args)
    catalog = scan_corpus(config.resolve_corpus_root(), include_sa=config.include_sa)
    catalog.save(args.out)
    counts = catalog.counts()
    for split in ("train", "test"):
        c = counts[split]
        print(
            f"{split}: {c['utterances']} utterances, {c['speakers']} speakers "
            f"({c['male_speakers']}M / {c['female_speakers']}F)"
        )
    print(f"skipped: {counts['skipped']}")
    print(f"catalog written to {args.out}")
    return 0


def cmd_mix_voices(args) -> int:
    config = _load_config(args)
    catalog = _catalog(args, config)
    plan = config.voice_plan()
    out_root = Path(config.output_root)
    total = 0
    for combo, tir, k in plan.manifest_keys():
        set_dir = out_root / "voice" / combo / f"tir{tir:g}" / f"set{k:02d}"
        build_voice_testset(
            catalog,
            combo,
            tir,
            k,
            master_seed=plan.master_seed,
            out_dir=set_dir,
            write_audio=config.write_audio,
            exclude_same_speaker=plan.exclude_same_speaker,
            featurize=config.featurize,
            feature_config=config.features,
            collapse_map=_collapse_map(config),
        )
        total += 1
    print(f"built {total} voice manifest(s) under {out_root / 'voice'}")
    return 0


def cmd_extract_phonemes(args) -> int:
    config = _load_config(args)
    catalog = _catalog(args, config)
    cmap = _collapse_map(config)
    phonemes = args.phonemes.split(",") if args.phonemes else list(cmap.classes)
    pools = build_segment_pools(catalog, phonemes, cmap, split=args.split)
    segments = [seg for p in phonemes for seg in pools[p]]
    write_segments_index(segments, args.out)
    print(f"{len(segments)} segments across {len(phonemes)} classes -> {args.out}")
    return 0


def cmd_stratify(args) -> int:
    config = _load_config(args)
    catalog = _catalog(args, config)
    segments = load_segments_index(args.segments, catalog)
    backend = config.build_backend()
    audio_dir = Path(args.audio_dir) if args.audio_dir else None
    result = stratify_segments(segments, backend, audio_dir=audio_dir)
    kept_ids = sorted(s.id for pool in result.kept.values() for s in pool)
    payload = {
        "evaluated": result.evaluated,
        "kept": result.kept_counts(),
        "kept_ids": kept_ids,
    }
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(json.dumps(payload, indent=1), encoding="utf-8")
    for phoneme, accuracy in result.accuracies().items():
        print(f"{phoneme}\t{result.kept_counts()[phoneme]}\t{100 * accuracy:.1f}%")
    print(f"stratification written to {args.out}")
    return 0


def cmd_mix_phonemes(args) -> int:
    config = _load_config(args)
    catalog = _catalog(args, config)
    segments = load_segments_index(args.segments, catalog)
    if args.source_set == "stratified":
        if not args.stratified:
            raise CocktailEvalError("--source-set stratified requires --stratified kept.json")
        kept_ids = set(json.loads(Path(args.stratified).read_text(encoding="utf-8"))["kept_ids"])
        segments = [s for s in segments if s.id in kept_ids]
    plan = config.phoneme_plan()
    pools: dict[str, list] = {p: [] for p in plan.phonemes}
    for segment in segments:
        if segment.label39 in pools:
            pools[segment.label39].append(segment)
    for pool in pools.values():
        pool.sort(key=lambda s: s.id)
    backend = config.build_backend()
    result = run_phoneme_experiment(
        pools,
        plan,
        backend,
        args.source_set,
        out_root=Path(config.output_root),
        workers=config.workers,
        write_audio=config.write_audio,
    )
    report = ExperimentReport(master_seed=config.seed, backend=backend.describe())
    report.phoneme_sets[args.source_set] = result
    written = emit_reports(report, Path(config.output_root) / "reports")
    print(
        f"{result.trial_count} trials, error rate {result.error_rate:.2f}%, "
        f"avg length {result.avg_length:.3f}"
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_featurize(args) -> int:
    config = _load_config(args)
    cfg = config.features
    if args.audio:
        if not args.out:
            raise CocktailEvalError("--audio requires --out")
        from .audio import load_audio

        save_features(mfcc39(load_audio(args.audio), cfg), args.out, cfg)
        matrix = load_features(args.out)
        print(f"{args.out}: {matrix.shape[0]} x {matrix.shape[1]}")
        return 0
    if not args.manifest or not args.features_dir:
        raise CocktailEvalError("need --audio FILE or --manifest plus --features-dir")
    manifest = read_manifest(args.manifest)
    from .audio import load_audio
    from .backend import ManifestEntry, TestSetManifest, write_manifest

    features_dir = Path(args.features_dir)
    entries = []
    for entry in manifest.entries:
        if entry.audio is None:
            entries.append(entry)
            continue
        feat_path = str(features_dir / f"{entry.id.replace(':', '_')}.feat")
        save_features(mfcc39(load_audio(entry.audio), cfg), feat_path, cfg)
        entries.append(
            ManifestEntry(
                id=entry.id,
                ref=entry.ref,
                audio=entry.audio,
                features=feat_path,
                tags=entry.tags,
            )
        )
    out_manifest = args.out_manifest or args.manifest
    write_manifest(TestSetManifest(entries), out_manifest)
    print(f"featurized {len(entries)} entries -> {out_manifest}")
    return 0


def cmd_score(args) -> int:
    manifest = read_manifest(args.manifest)
    hyps = read_hypotheses(args.hyps)
    missing = [e.id for e in manifest.entries if e.id not in hyps]
    if missing:
        raise CocktailEvalError(f"hypotheses missing for {len(missing)} id(s): {missing[:10]}")
    rows = [(e.id, edit_distance(e.ref, hyps[e.id])) for e in manifest.entries]
    if args.per_utterance:
        import numpy as np

        value = float(np.mean([100.0 * c.errors / c.ref_length for _, c in rows]))
    else:
        value = pooled_per(c for _, c in rows)
    counts = [c for _, c in rows]
    print(
        f"PER {value:.4f}% "
        f"(S={sum(c.substitutions for c in counts)}, D={sum(c.deletions for c in counts)}, "
        f"I={sum(c.insertions for c in counts)}, N={sum(c.ref_length for c in counts)})"
    )
    if args.out:
        write_counts_csv(rows, args.out)
        print(f"per-utterance counts -> {args.out}")
    return 0


def cmd_report(args) -> int:
    report = ExperimentReport.load(args.report)
    out_dir = Path(args.out_dir)
    written = emit_reports(report, out_dir)
    if args.plots:
        written += emit_plot_scripts(report, out_dir)
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_run_all(args) -> int:
    config = _load_config(args)
    catalog = _catalog(args, config)
    backend = config.build_backend()
    report = run_full(
        catalog,
        config.voice_plan(),
        config.phoneme_plan(),
        backend,
        Path(config.output_root),
        workers=config.workers,
        write_audio=config.write_audio,
        featurize=config.featurize,
        feature_config=config.features,
        collapse_map=_collapse_map(config),
        config_snapshot=config.to_dict(),
    )
    ok_cells = [c for c in report.voice_cells if c.status == "ok"]
    failed = len(report.voice_cells) - len(ok_cells)
    print(f"voice cells: {len(ok_cells)} ok, {failed} failed")
    if report.baseline_per is not None:
        print(f"unmixed baseline PER {report.baseline_per:.4f}%")
    for name, result in sorted(report.phoneme_sets.items()):
        print(
            f"{name}: error rate {result.error_rate:.2f}%, avg length {result.avg_length:.3f}, "
            f"oriented {result.oriented}/{result.oriented_total}"
        )
    print(f"report -> {Path(config.output_root) / 'report.json'}")
    print(f"reports -> {Path(config.output_root) / 'reports'}")
    return 0


def _add_config_args(parser, corpus: bool = True) -> None:
    parser.add_argument("--config", help="JSON run config file")
    parser.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override one config field by dotted path (repeatable), "
        "e.g. --set voice.sets_per_cell=2",
    )
    parser.add_argument("--seed", type=int, help="master seed (overrides config)")
    parser.add_argument("--workers", type=int, help="parallel workers (overrides config)")
    parser.add_argument("--output-root", help="output directory root (overrides config)")
    if corpus:
        parser.add_argument(
            "--corpus-root",
            help=f"TIMIT root (overrides config and ${CORPUS_ROOT_ENV})",
        )
        parser.add_argument("--catalog", help="use a saved catalog.json instead of scanning")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cocktaileval",
        description="TIR-controlled mixed-speech and mixed-phoneme evaluation "
        "of phoneme-level ASR backends",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan a TIMIT tree into a catalog file")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="catalog JSON path to write")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mix-voices", help="build mixed-voice test sets (no evaluation)")
    _add_config_args(p)
    p.set_defaults(func=cmd_mix_voices)

    p = sub.add_parser("extract-phonemes", help="cut non-silence phone segments into an index")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="segments JSONL index to write")
    p.add_argument("--split", default="test", choices=("train", "test"))
    p.add_argument("--phonemes", help="comma-separated class list (default: all classes)")
    p.set_defaults(func=cmd_extract_phonemes)

    p = sub.add_parser("stratify", help="screen segments with the configured backend")
    _add_config_args(p)
    p.add_argument("--segments", required=True, help="segments JSONL index")
    p.add_argument("--out", required=True, help="stratification JSON to write")
    p.add_argument("--audio-dir", help="materialize segment WAVs here for file backends")
    p.set_defaults(func=cmd_stratify)

    p = sub.add_parser("mix-phonemes", help="run the mixed-phoneme experiment for one source set")
    _add_config_args(p)
    p.add_argument("--segments", required=True, help="segments JSONL index")
    p.add_argument("--source-set", default="complete", choices=("complete", "stratified"))
    p.add_argument("--stratified", help="stratification JSON (for --source-set stratified)")
    p.set_defaults(func=cmd_mix_phonemes)

    p = sub.add_parser("featurize", help="extract feature matrices")
    _add_config_args(p, corpus=False)
    p.add_argument("--audio", help="single audio file to featurize")
    p.add_argument("--out", help="feature container path (with --audio)")
    p.add_argument("--manifest", help="manifest whose audio entries to featurize")
    p.add_argument("--features-dir", help="directory for feature containers (with --manifest)")
    p.add_argument("--out-manifest", help="rewritten manifest path (default: in place)")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("score", help="PER of a hypotheses file against a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hyps", required=True)
    p.add_argument("--out", help="per-utterance alignment counts CSV")
    p.add_argument(
        "--per-utterance",
        action="store_true",
        help="average per-utterance rates instead of pooling counts",
    )
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", help="re-emit CSV reports from a saved report.json")
    p.add_argument("--report", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plots", action="store_true", help="also write gnuplot scripts")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run-all", help="full protocol: mix, stratify, evaluate, report")
    _add_config_args(p)
    p.set_defaults(func=cmd_run_all)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CocktailEvalError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""The model-agnostic backend file protocol, plus oracle backends.

A backend is anything that turns a test-set manifest into hypotheses:

  manifest.jsonl   one object per line:
                   {"id": ..., "audio": ..., "features": ..., "ref": [...], "tags": {...}}
  hyps.tsv         one line per id: `<id> TAB <space-separated class symbols>`
                   (the second field may be empty), UTF-8, LF line endings.

Launch convention for external backends:
  <command> --manifest <path> --out <path>     exit code 0 on success

In-process oracle backends (echo, empty, seeded corruption) exist for
calibration and tests; they honor the same contract minus the filesystem.
"""

from __future__ import annotations

import json
import shlex
import subprocess
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .audio import save_wav
from .errors import InventoryError, ProtocolError
from .mixing import PhoneSegment
from .phonemes import scoring_classes
from .seeding import derive_rng


@dataclass(frozen=True)
class ManifestEntry:
    """One trial: id, reference symbols, optional audio/features paths, tags."""

    id: str
    ref: tuple[str, ...]
    audio: str | None = None
    features: str | None = None
    tags: dict = field(default_factory=dict)


@dataclass
class TestSetManifest:
    entries: list[ManifestEntry]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate manifest ids: {dupes[:5]}")

    def ids(self) -> list[str]:
        return [e.id for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class Hypothesis:
    id: str
    predicted: tuple[str, ...]


def write_manifest(manifest: TestSetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for entry in manifest.entries:
            line = {"id": entry.id, "ref": list(entry.ref), "tags": entry.tags}
            if entry.audio is not None:
                line["audio"] = entry.audio
            if entry.features is not None:
                line["features"] = entry.features
            fh.write(json.dumps(line) + "\n")


def read_manifest(path) -> TestSetManifest:
    entries = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"{path}:{line_no}: bad manifest JSON ({exc})")
        if "id" not in obj or "ref" not in obj:
            raise ProtocolError(f"{path}:{line_no}: manifest entry needs 'id' and 'ref'")
        entries.append(
            ManifestEntry(
                id=str(obj["id"]),
                ref=tuple(obj["ref"]),
                audio=obj.get("audio"),
                features=obj.get("features"),
                tags=obj.get("tags", {}),
            )
        )
    return TestSetManifest(entries)


def write_hypotheses(hypotheses, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for hyp in hypotheses:
            fh.write(f"{hyp.id}\t{' '.join(hyp.predicted)}\n")


def read_hypotheses(path) -> dict[str, list[str]]:
    """Strict hyps.tsv reader: exactly one tab per line, duplicate ids rejected."""
    out: dict[str, list[str]] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if raw == "":
            continue
        if "\t" not in raw:
            raise ProtocolError(f"{path}:{line_no}: missing tab separator in {raw!r}")
        utt_id, _, symbols = raw.partition("\t")
        if "\t" in symbols:
            raise ProtocolError(f"{path}:{line_no}: more than one tab in {raw!r}")
        if not utt_id:
            raise ProtocolError(f"{path}:{line_no}: empty id field")
        if utt_id in out:
            raise ProtocolError(f"{path}:{line_no}: duplicate hypothesis for id {utt_id!r}")
        out[utt_id] = symbols.split()
    return out


class EchoOracle:
    """Predicts exactly the reference. The all-correct calibration point."""

    def run(self, manifest: TestSetManifest) -> dict[str, list[str]]:
        return {entry.id: list(entry.ref) for entry in manifest.entries}

    def describe(self) -> dict:
        return {"kind": "echo"}


class EmptyOracle:
    """Predicts nothing for every trial. The all-deletions calibration point."""

    def run(self, manifest: TestSetManifest) -> dict[str, list[str]]:
        return {entry.id: [] for entry in manifest.entries}

    def describe(self) -> dict:
        return {"kind": "empty"}


@dataclass(frozen=True)
class CorruptionRates:
    substitution: float = 0.0
    deletion: float = 0.0
    insertion: float = 0.0

    def __post_init__(self):
        for name in ("substitution", "deletion", "insertion"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} rate must be in [0, 1], got {value}")
        if self.substitution + self.deletion > 1.0:
            raise ValueError("substitution + deletion rates must not exceed 1")


@dataclass(frozen=True)
class CorruptingOracle:
    """Applies seeded per-token noise to the reference.

    Per reference token: substitute with probability `substitution` (uniform
    over the other class symbols), else delete with probability `deletion`,
    else keep. After each position a random symbol is inserted with
    probability `insertion`. A pure function of (manifest, rates, seed).
    """

    rates: CorruptionRates
    seed: int = 0
    alphabet: tuple[str, ...] = ()

    def _symbols(self) -> tuple[str, ...]:
        return self.alphabet if self.alphabet else scoring_classes()

    def run(self, manifest: TestSetManifest) -> dict[str, list[str]]:
        symbols = self._symbols()
        out = {}
        for entry in manifest.entries:
            rng = derive_rng(self.seed, "corrupt", entry.id)
            predicted: list[str] = []
            for token in entry.ref:
                draw = rng.random()
                if draw < self.rates.substitution:
                    pick = int(rng.integers(len(symbols) - 1))
                    if symbols[pick] == token:
                        pick = len(symbols) - 1
                    predicted.append(symbols[pick])
                elif draw < self.rates.substitution + self.rates.deletion:
                    pass
                else:
                    predicted.append(token)
                if rng.random() < self.rates.insertion:
                    predicted.append(symbols[int(rng.integers(len(symbols)))])
            out[entry.id] = predicted
        return out

    def describe(self) -> dict:
        return {
            "kind": "corrupt",
            "substitution": self.rates.substitution,
            "deletion": self.rates.deletion,
            "insertion": self.rates.insertion,
            "seed": self.seed,
        }


@dataclass
class SubprocessBackend:
    """Launches `<command> --manifest <path> --out <path>` per batch."""

    command: tuple[str, ...]
    workdir: Path | None = None
    timeout: float = 3600.0

    def run(self, manifest: TestSetManifest) -> dict[str, list[str]]:
        with tempfile.TemporaryDirectory(dir=self.workdir, prefix="backend-") as tmp:
            manifest_path = Path(tmp) / "manifest.jsonl"
            out_path = Path(tmp) / "hyps.tsv"
            write_manifest(manifest, manifest_path)
            argv = [*self.command, "--manifest", str(manifest_path), "--out", str(out_path)]
            proc = subprocess.run(
                argv, capture_output=True, text=True, timeout=self.timeout
            )
            if proc.returncode != 0:
                raise ProtocolError(
                    f"backend {shlex.join(self.command)} exited {proc.returncode}: "
                    f"{proc.stderr.strip()[:500]}"
                )
            if not out_path.exists():
                raise ProtocolError(
                    f"backend {shlex.join(self.command)} exited 0 but wrote no hyps.tsv"
                )
            return read_hypotheses(out_path)

    def spawn(self) -> "SubprocessBackend":
        return SubprocessBackend(self.command, self.workdir, self.timeout)

    def describe(self) -> dict:
        return {"kind": "subprocess", "command": list(self.command)}


@dataclass
class FileExchangeBackend:
    """Directory exchange: write manifest.jsonl, wait for hyps.tsv to appear.

    One in-flight batch per instance; calls are serialized by a lock. The
    partner process should write the hypotheses to a temporary name and
    rename it into place.
    """

    exchange_dir: Path
    poll_interval: float = 0.1
    timeout: float = 600.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def run(self, manifest: TestSetManifest) -> dict[str, list[str]]:
        with self._lock:
            exchange = Path(self.exchange_dir)
            exchange.mkdir(parents=True, exist_ok=True)
            out_path = exchange / "hyps.tsv"
            if out_path.exists():
                out_path.unlink()
            write_manifest(manifest, exchange / "manifest.jsonl")
            deadline = time.monotonic() + self.timeout
            while not out_path.exists():
                if time.monotonic() > deadline:
                    raise ProtocolError(
                        f"no hyps.tsv appeared in {exchange} within {self.timeout}s"
                    )
                time.sleep(self.poll_interval)
            hyps = read_hypotheses(out_path)
            out_path.unlink()
            return hyps

    def describe(self) -> dict:
        return {"kind": "exchange", "dir": str(self.exchange_dir)}


def spawn_backend(backend):
    """Independent instance for a worker thread; pure oracles are reentrant."""
    spawner = getattr(backend, "spawn", None)
    return spawner() if spawner is not None else backend


def transcribe(manifest: TestSetManifest, backend, inventory=None) -> list[Hypothesis]:
    """Run a backend over a manifest and validate the protocol.

    Guarantees exactly one hypothesis per manifest id, in manifest order,
    with every symbol drawn from the scoring inventory. Violations raise
    loudly instead of degrading silently.
    """
    allowed = set(scoring_classes() if inventory is None else inventory)
    raw = backend.run(manifest)
    wanted = set(manifest.ids())
    missing = sorted(wanted - set(raw))
    if missing:
        raise ProtocolError(f"backend returned no hypothesis for {len(missing)} id(s): {missing[:10]}")
    extra = sorted(set(raw) - wanted)
    if extra:
        raise ProtocolError(f"backend returned unknown id(s): {extra[:10]}")
    hypotheses = []
    for entry in manifest.entries:
        symbols = raw[entry.id]
        bad = sorted({s for s in symbols if s not in allowed})
        if bad:
            raise InventoryError(f"hypothesis for {entry.id!r} uses unknown symbol(s): {bad[:10]}")
        hypotheses.append(Hypothesis(id=entry.id, predicted=tuple(symbols)))
    return hypotheses


@dataclass
class StratifiedSet:
    """Per-phoneme survivors of the recognizability screen."""

    kept: dict[str, list[PhoneSegment]]
    evaluated: dict[str, int]

    def accuracy(self, phoneme: str) -> float:
        total = self.evaluated.get(phoneme, 0)
        if total == 0:
            raise KeyError(f"phoneme {phoneme!r} was not stratified")
        return len(self.kept.get(phoneme, [])) / total

    def accuracies(self) -> dict[str, float]:
        return {p: self.accuracy(p) for p in sorted(self.evaluated)}

    def kept_counts(self) -> dict[str, int]:
        return {p: len(self.kept.get(p, [])) for p in sorted(self.evaluated)}


def segment_manifest(segments, audio_dir=None, collapse_labels: bool = True) -> TestSetManifest:
    """Manifest over phone segments; writes per-segment WAVs when audio_dir is given."""
    entries = []
    audio_dir = Path(audio_dir) if audio_dir is not None else None
    for segment in segments:
        label = segment.label39 if collapse_labels else segment.label
        audio_path = None
        if audio_dir is not None:
            audio_path = str(audio_dir / (segment.id.replace(":", "_") + ".wav"))
            save_wav(segment.audio, audio_path)
        entries.append(
            ManifestEntry(
                id=segment.id,
                ref=(label,),
                audio=audio_path,
                tags={"label": segment.label, "label39": segment.label39},
            )
        )
    return TestSetManifest(entries, metadata={"kind": "segments"})


def stratify(segments, backend, audio_dir=None, collapse_labels: bool = True) -> StratifiedSet:
    """Keep each segment iff the backend's hypothesis contains its label.

    Containment is checked anywhere in the hypothesis, against the collapsed
    label by default (backends speak the 39-class alphabet).
    """
    segments = list(segments)
    manifest = segment_manifest(segments, audio_dir=audio_dir, collapse_labels=collapse_labels)
    hypotheses = {h.id: h.predicted for h in transcribe(manifest, backend)}
    kept: dict[str, list[PhoneSegment]] = {}
    evaluated: dict[str, int] = {}
    for segment in segments:
        label = segment.label39 if collapse_labels else segment.label
        evaluated[label] = evaluated.get(label, 0) + 1
        if label in hypotheses[segment.id]:
            kept.setdefault(label, []).append(segment)
    return StratifiedSet(kept=kept, evaluated=evaluated)

"""Run configuration: a JSON file with a fixed schema, overridable by flags.

Unknown keys are rejected so typos fail loudly instead of silently running
a default. The corpus root falls back to the COCKTAILEVAL_TIMIT_ROOT
environment variable when neither the file nor a flag provides one.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .backend import (
    CorruptingOracle,
    CorruptionRates,
    EchoOracle,
    EmptyOracle,
    FileExchangeBackend,
    SubprocessBackend,
)
from .errors import ConfigError
from .experiments import (
    DEFAULT_COMBOS,
    DEFAULT_TEST_PHONEMES,
    SOURCE_SETS,
    PhonemeExperimentPlan,
    VoiceExperimentPlan,
)
from .features import FeatureConfig
from .mixing import TIR_GRID_DB

CORPUS_ROOT_ENV = "COCKTAILEVAL_TIMIT_ROOT"
BACKEND_MODES = ("echo", "empty", "corrupt", "subprocess", "exchange")


def _checked(data: dict, cls, where: str) -> dict:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object, got {type(data).__name__}")
    allowed = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")
    return data


@dataclass
class VoiceSection:
    combos: list[str] = field(default_factory=lambda: list(DEFAULT_COMBOS))
    tir_grid: list[float] = field(default_factory=lambda: list(TIR_GRID_DB))
    sets_per_cell: int = 33
    exclude_same_speaker: bool = True


@dataclass
class PhonemeSection:
    phonemes: list[str] = field(default_factory=lambda: list(DEFAULT_TEST_PHONEMES))
    mixings_per_pair: int = 2000
    source_sets: list[str] = field(default_factory=lambda: list(SOURCE_SETS))


@dataclass
class BackendSection:
    mode: str = "echo"
    substitution: float = 0.0
    deletion: float = 0.0
    insertion: float = 0.0
    seed: int | None = None
    command: list[str] = field(default_factory=list)
    exchange_dir: str | None = None
    timeout: float = 3600.0

    def __post_init__(self):
        if self.mode not in BACKEND_MODES:
            raise ConfigError(f"backend.mode must be one of {BACKEND_MODES}, got {self.mode!r}")


@dataclass
class RunConfig:
    corpus_root: str | None = None
    output_root: str = "cocktaileval-out"
    seed: int = 0
    workers: int = 1
    include_sa: bool = True
    write_audio: bool = True
    featurize: bool = False
    collapse_map_path: str | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)
    voice: VoiceSection = field(default_factory=VoiceSection)
    phoneme: PhonemeSection = field(default_factory=PhonemeSection)
    backend: BackendSection = field(default_factory=BackendSection)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(_checked(data, cls, "config"))
        try:
            features = FeatureConfig(**_checked(data.pop("features", {}), FeatureConfig, "config.features"))
            voice = VoiceSection(**_checked(data.pop("voice", {}), VoiceSection, "config.voice"))
            phoneme = PhonemeSection(
                **_checked(data.pop("phoneme", {}), PhonemeSection, "config.phoneme")
            )
            backend = BackendSection(
                **_checked(data.pop("backend", {}), BackendSection, "config.backend")
            )
            return cls(features=features, voice=voice, phoneme=phoneme, backend=backend, **data)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad config value: {exc}")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})")
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def apply_override(self, dotted_key: str, raw_value: str) -> None:
        """Set one field by dotted path, e.g. voice.sets_per_cell=2.

        The value is parsed as JSON when possible, else taken as a string.
        Every config field is reachable this way, so CLI flags mirror the
        whole schema.
        """
        try:
            value = json.loads(raw_value)
        except json.JSONDecodeError:
            value = raw_value
        parts = dotted_key.split(".")
        parent = self
        for part in parts[:-1]:
            if not (
                dataclasses.is_dataclass(parent)
                and part in {f.name for f in dataclasses.fields(parent)}
            ):
                raise ConfigError(f"unknown config section {dotted_key!r}")
            parent = getattr(parent, part)
        name = parts[-1]
        if not dataclasses.is_dataclass(parent) or name not in {
            f.name for f in dataclasses.fields(parent)
        }:
            raise ConfigError(f"unknown config key {dotted_key!r}")
        if dataclasses.is_dataclass(getattr(parent, name)):
            raise ConfigError(f"{dotted_key!r} is a section, not a value")
        try:
            if getattr(type(parent), "__dataclass_params__").frozen:
                # only one nesting level exists, so the frozen section sits on self
                setattr(self, parts[0], dataclasses.replace(parent, **{name: value}))
            else:
                setattr(parent, name, value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {dotted_key!r}: {exc}")

    def resolve_corpus_root(self) -> Path:
        root = self.corpus_root or os.environ.get(CORPUS_ROOT_ENV)
        if not root:
            raise ConfigError(
                f"no corpus root: set corpus_root in the config, pass --corpus-root, "
                f"or export {CORPUS_ROOT_ENV}"
            )
        return Path(root)

    def voice_plan(self) -> VoiceExperimentPlan:
        return VoiceExperimentPlan(
            combos=tuple(self.voice.combos),
            tir_grid=tuple(self.voice.tir_grid),
            sets_per_cell=self.voice.sets_per_cell,
            master_seed=self.seed,
            exclude_same_speaker=self.voice.exclude_same_speaker,
        )

    def phoneme_plan(self) -> PhonemeExperimentPlan:
        return PhonemeExperimentPlan(
            phonemes=tuple(self.phoneme.phonemes),
            mixings_per_pair=self.phoneme.mixings_per_pair,
            source_sets=tuple(self.phoneme.source_sets),
            master_seed=self.seed,
        )

    def build_backend(self):
        section = self.backend
        if section.mode == "echo":
            return EchoOracle()
        if section.mode == "empty":
            return EmptyOracle()
        if section.mode == "corrupt":
            rates = CorruptionRates(
                substitution=section.substitution,
                deletion=section.deletion,
                insertion=section.insertion,
            )
            seed = self.seed if section.seed is None else section.seed
            return CorruptingOracle(rates=rates, seed=seed)
        if section.mode == "subprocess":
            if not section.command:
                raise ConfigError("backend.mode=subprocess requires backend.command")
            return SubprocessBackend(tuple(section.command), timeout=section.timeout)
        if section.mode == "exchange":
            if not section.exchange_dir:
                raise ConfigError("backend.mode=exchange requires backend.exchange_dir")
            return FileExchangeBackend(Path(section.exchange_dir), timeout=section.timeout)
        raise ConfigError(f"unhandled backend mode {section.mode!r}")

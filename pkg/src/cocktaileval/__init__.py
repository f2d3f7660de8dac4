"""Model-agnostic evaluation of phoneme-level ASR under cocktail-party mixing.

The package builds TIR-controlled two-speaker and two-phoneme test sets from
a TIMIT-style corpus, talks to recognizers through a small file protocol, and
scores the hypotheses into PER curves, prediction-rate matrices, and CSV
reports. See the README for the command-line surface.
"""

from .audio import Waveform, load_audio, save_wav
from .backend import (
    EchoOracle,
    EmptyOracle,
    CorruptingOracle,
    CorruptionRates,
    FileExchangeBackend,
    Hypothesis,
    ManifestEntry,
    SubprocessBackend,
    TestSetManifest,
    read_hypotheses,
    read_manifest,
    stratify,
    transcribe,
    write_hypotheses,
    write_manifest,
)
from .config import RunConfig
from .corpus import CorpusCatalog, PhoneAlignment, UtteranceRecord, parse_phn, scan_corpus
from .errors import (
    AlignmentError,
    AudioFormatError,
    CocktailEvalError,
    ConfigError,
    CorruptAudioError,
    DegenerateSignalError,
    InventoryError,
    PhnParseError,
    PlanError,
    ProtocolError,
    StructureError,
)
from .experiments import (
    ExperimentReport,
    PhonemeExperimentPlan,
    VoiceExperimentPlan,
    emit_reports,
    run_full,
)
from .features import FeatureConfig, load_features, mfcc39, save_features
from .mixing import TIR_GRID_DB, MixRecord, TirSpec, extract_segments, mix_at_tir, mix_segments
from .phonemes import CollapseMap, default_collapse_map, scoring_classes
from .scoring import AlignmentCounts, PredictionRateMatrix, edit_distance, per, pooled_per
from .seeding import derive_rng, seed_path
from .version import __version__

__all__ = [
    "__version__",
    "AlignmentCounts",
    "AlignmentError",
    "AudioFormatError",
    "CocktailEvalError",
    "CollapseMap",
    "ConfigError",
    "CorpusCatalog",
    "CorruptAudioError",
    "CorruptingOracle",
    "CorruptionRates",
    "DegenerateSignalError",
    "EchoOracle",
    "EmptyOracle",
    "ExperimentReport",
    "FeatureConfig",
    "FileExchangeBackend",
    "Hypothesis",
    "InventoryError",
    "ManifestEntry",
    "MixRecord",
    "PhnParseError",
    "PhoneAlignment",
    "PhonemeExperimentPlan",
    "PlanError",
    "PredictionRateMatrix",
    "ProtocolError",
    "RunConfig",
    "StructureError",
    "SubprocessBackend",
    "TIR_GRID_DB",
    "TestSetManifest",
    "TirSpec",
    "UtteranceRecord",
    "VoiceExperimentPlan",
    "Waveform",
    "default_collapse_map",
    "derive_rng",
    "edit_distance",
    "emit_reports",
    "extract_segments",
    "load_audio",
    "load_features",
    "mfcc39",
    "mix_at_tir",
    "mix_segments",
    "parse_phn",
    "per",
    "pooled_per",
    "read_hypotheses",
    "read_manifest",
    "run_full",
    "save_features",
    "save_wav",
    "scan_corpus",
    "scoring_classes",
    "seed_path",
    "stratify",
    "transcribe",
    "write_hypotheses",
    "write_manifest",
]

"""Batch inference against a manifest, hypotheses out.

One batch per process. The contract with the caller: every manifest id gets
exactly one output line, the process exits 0 if the batch as a whole ran, and
a single utterance failing to decode costs that utterance its hypothesis
(empty line, note on stderr) rather than failing the batch.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from lasadapter import frontend, protocol
from lasadapter.errors import AdapterError
from lasadapter.model import load_checkpoint, tokens_to_symbols
from lasadapter.phonemes import fold_sequence

FEATURE_SOURCES = ("toolkit", "internal")


@dataclass(frozen=True)
class AdapterConfig:
    checkpoint: Path
    features: str = "toolkit"
    device: str = "cpu"
    beam: int = 1

    def __post_init__(self):
        object.__setattr__(self, "checkpoint", Path(self.checkpoint))
        if not self.checkpoint.is_file():
            raise AdapterError(f"checkpoint not found: {self.checkpoint}")
        if self.features not in FEATURE_SOURCES:
            raise AdapterError(
                f"feature source must be one of {FEATURE_SOURCES}, got {self.features!r}"
            )
        if self.beam < 1:
            raise AdapterError("beam width must be at least 1")


def _featurize(utt: protocol.Utterance, cfg: AdapterConfig, input_dim: int) -> np.ndarray:
    if cfg.features == "toolkit":
        if utt.features is None:
            raise ValueError(f"{utt.id}: manifest entry has no features path")
        matrix = protocol.load_feature_matrix(utt.features)
    else:
        if utt.audio is None:
            raise ValueError(f"{utt.id}: manifest entry has no audio path")
        samples, rate = protocol.read_waveform(utt.audio)
        matrix = frontend.logmel(samples, rate, n_mels=input_dim)
    if matrix.shape[1] != input_dim:
        raise ValueError(
            f"{utt.id}: features are {matrix.shape[1]}-wide, model expects {input_dim}"
        )
    return matrix


def serve_batch(manifest_path, out_path, cfg: AdapterConfig) -> int:
    """Decode every manifest entry and write hyps.tsv. Returns the id count."""
    model, inventory, hparams = load_checkpoint(cfg.checkpoint, cfg.device)
    utterances = protocol.read_manifest(manifest_path)

    rows: list[tuple[str, list[str]]] = []
    for utt in utterances:
        try:
            feats = _featurize(utt, cfg, hparams["input_dim"])
            if cfg.beam > 1:
                tokens = model.decode_beam(feats, cfg.beam)
            else:
                tokens = model.decode_greedy(feats)
            symbols = fold_sequence(tokens_to_symbols(tokens, inventory))
        except Exception as exc:  # one bad utterance must not sink the batch
            print(f"las-adapter: {utt.id}: {exc}", file=sys.stderr)
            symbols = []
        rows.append((utt.id, symbols))

    protocol.write_hypotheses(rows, out_path)
    return len(rows)

"""Listener / attender / speller recognizer, inference only.

The model family: a pyramidal bidirectional-LSTM encoder that halves the
frame rate at every layer above the first, a content-attention bridge, and a
single-layer LSTM-cell decoder that emits one phone token per step. Training
(label smoothing included) happens elsewhere; this module exists so that a
trained checkpoint can be instantiated, validated, and decoded.

Checkpoints are torch-saved dicts:

    {"format": "las-adapter/1",
     "hparams": {...},            # architecture geometry, see HPARAM_KEYS
     "inventory": ["aa", ...],    # output symbols, token ids offset by 2
     "state_dict": {...}}

Token id 0 is start-of-sequence, 1 is end-of-sequence; inventory symbol i
maps to token id i + 2.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from lasadapter.errors import AdapterError
from lasadapter.phonemes import validate_inventory

SOS = 0
EOS = 1
_SPECIALS = 2

CHECKPOINT_FORMAT = "las-adapter/1"

HPARAM_KEYS = (
    "input_dim",
    "encoder_hidden",
    "encoder_layers",
    "embed_dim",
    "decoder_hidden",
    "attention_dim",
)

_MAX_DECODE_STEPS = 600


class Listener(nn.Module):
    """Pyramidal BiLSTM encoder: (1, T, F) -> (1, T / 2**(layers-1), 2H)."""

    def __init__(self, input_dim: int, hidden: int, layers: int):
        super().__init__()
        self.base = nn.LSTM(input_dim, hidden, batch_first=True, bidirectional=True)
        self.pyramid = nn.ModuleList(
            nn.LSTM(4 * hidden, hidden, batch_first=True, bidirectional=True)
            for _ in range(layers - 1)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out, _ = self.base(x)
        for layer in self.pyramid:
            t = out.shape[1] - (out.shape[1] % 2)  # drop an odd trailing frame
            if t == 0:
                break
            out = out[:, :t, :].reshape(1, t // 2, -1)
            out, _ = layer(out)
        return out


class Attender(nn.Module):
    """Scaled dot-product attention over projected encoder states."""

    def __init__(self, enc_dim: int, dec_dim: int, attn_dim: int):
        super().__init__()
        self.query = nn.Linear(dec_dim, attn_dim)
        self.key = nn.Linear(enc_dim, attn_dim)
        self.scale = attn_dim ** -0.5

    def keys(self, enc: torch.Tensor) -> torch.Tensor:
        return self.key(enc)

    def forward(self, state, keys, values):
        scores = (self.query(state).unsqueeze(1) * keys).sum(-1) * self.scale
        weights = torch.softmax(scores, dim=-1)
        context = (weights.unsqueeze(-1) * values).sum(1)
        return context, weights


class Speller(nn.Module):
    def __init__(self, vocab: int, embed_dim: int, enc_dim: int, hidden: int, attn_dim: int):
        super().__init__()
        self.embed = nn.Embedding(vocab, embed_dim)
        self.cell = nn.LSTMCell(embed_dim + enc_dim, hidden)
        self.attend = Attender(enc_dim, hidden, attn_dim)
        self.out = nn.Linear(hidden + enc_dim, vocab)


class Recognizer(nn.Module):
    def __init__(self, hparams: dict, vocab: int):
        super().__init__()
        enc_dim = 2 * hparams["encoder_hidden"]
        self.listener = Listener(
            hparams["input_dim"], hparams["encoder_hidden"], hparams["encoder_layers"]
        )
        self.speller = Speller(
            vocab,
            hparams["embed_dim"],
            enc_dim,
            hparams["decoder_hidden"],
            hparams["attention_dim"],
        )
        self._enc_dim = enc_dim
        self._hidden = hparams["decoder_hidden"]
        self._vocab = vocab

    @property
    def device(self) -> torch.device:
        return next(self.parameters()).device

    def _start_state(self):
        h = torch.zeros(1, self._hidden, device=self.device)
        c = torch.zeros(1, self._hidden, device=self.device)
        context = torch.zeros(1, self._enc_dim, device=self.device)
        return h, c, context

    def _step(self, token: int, h, c, context, keys, values):
        emb = self.speller.embed(torch.tensor([token], device=self.device))
        h, c = self.speller.cell(torch.cat([emb, context], dim=1), (h, c))
        context, _ = self.speller.attend(h, keys, values)
        logits = self.speller.out(torch.cat([h, context], dim=1))
        return logits.squeeze(0), h, c, context

    def _prepare(self, features: np.ndarray):
        x = torch.from_numpy(np.ascontiguousarray(features, dtype=np.float32))
        enc = self.listener(x.unsqueeze(0).to(self.device))
        keys = self.speller.attend.keys(enc)
        max_steps = min(_MAX_DECODE_STEPS, 2 * enc.shape[1] + 8)
        return enc, keys, max_steps

    @torch.no_grad()
    def decode_greedy(self, features: np.ndarray) -> list[int]:
        """Argmax decoding; token ids with specials stripped."""
        enc, keys, max_steps = self._prepare(features)
        h, c, context = self._start_state()
        token = SOS
        emitted: list[int] = []
        for _ in range(max_steps):
            logits, h, c, context = self._step(token, h, c, context, keys, enc)
            token = int(logits.argmax())
            if token == EOS:
                break
            if token != SOS:
                emitted.append(token)
        return emitted

    @torch.no_grad()
    def decode_beam(self, features: np.ndarray, width: int) -> list[int]:
        """Beam search, best finished hypothesis by length-normalized log prob."""
        enc, keys, max_steps = self._prepare(features)
        h, c, context = self._start_state()
        live = [(0.0, [SOS], h, c, context)]
        finished: list[tuple[float, list[int]]] = []
        for _ in range(max_steps):
            grown = []
            for score, tokens, h, c, context in live:
                logits, h2, c2, context2 = self._step(tokens[-1], h, c, context, keys, enc)
                logp = torch.log_softmax(logits, dim=-1)
                top = torch.topk(logp, min(width, self._vocab))
                for lp, tok in zip(top.values.tolist(), top.indices.tolist()):
                    grown.append((score + lp, tokens + [tok], h2, c2, context2))
            grown.sort(key=lambda cand: cand[0], reverse=True)
            live = []
            for cand in grown:
                if cand[1][-1] == EOS:
                    emitted = [t for t in cand[1][1:-1] if t not in (SOS, EOS)]
                    finished.append((cand[0] / max(len(cand[1]) - 1, 1), emitted))
                elif len(live) < width:
                    live.append(cand)
                if len(live) == width and len(finished) >= width:
                    break
            if not live:
                break
        if finished:
            return max(finished, key=lambda pair: pair[0])[1]
        if live:
            best = max(live, key=lambda cand: cand[0] / max(len(cand[1]) - 1, 1))
            return [t for t in best[1][1:] if t not in (SOS, EOS)]
        return []


def tokens_to_symbols(tokens: list[int], inventory: list[str]) -> list[str]:
    out = []
    for t in tokens:
        i = t - _SPECIALS
        if 0 <= i < len(inventory):
            out.append(inventory[i])
    return out


def _check_hparams(hparams: dict) -> dict:
    if not isinstance(hparams, dict):
        raise AdapterError("checkpoint hparams must be a mapping")
    missing = [k for k in HPARAM_KEYS if k not in hparams]
    if missing:
        raise AdapterError("checkpoint hparams missing " + ", ".join(missing))
    for key in HPARAM_KEYS:
        value = hparams[key]
        if not isinstance(value, int) or value < 1:
            raise AdapterError(f"hparam {key} must be a positive integer, got {value!r}")
    return hparams


def new_recognizer(hparams: dict, inventory: list[str]) -> Recognizer:
    return Recognizer(_check_hparams(hparams), len(inventory) + _SPECIALS)


def save_checkpoint(model: Recognizer, hparams: dict, inventory: list[str], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "hparams": dict(hparams),
            "inventory": list(inventory),
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path, device: str = "cpu"):
    """Instantiate a recognizer from disk. Any mismatch is a startup error.

    Returns (model in eval mode, inventory, hparams).
    """
    path = Path(path)
    if not path.is_file():
        raise AdapterError(f"checkpoint not found: {path}")
    try:
        blob = torch.load(path, map_location=device)
    except Exception as exc:
        raise AdapterError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise AdapterError(f"{path} is not a {CHECKPOINT_FORMAT} checkpoint")
    for key in ("hparams", "inventory", "state_dict"):
        if key not in blob:
            raise AdapterError(f"checkpoint missing {key!r}")
    inventory = [str(s) for s in blob["inventory"]]
    validate_inventory(inventory)
    model = new_recognizer(blob["hparams"], inventory)
    try:
        model.load_state_dict(blob["state_dict"], strict=True)
    except RuntimeError as exc:
        raise AdapterError(
            f"checkpoint weights do not match the declared architecture: {exc}"
        ) from exc
    model.to(device)
    model.eval()
    return model, inventory, blob["hparams"]

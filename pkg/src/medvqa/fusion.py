"""Answer prediction over fused question/image features.

A Bi-LSTM encodes the embedded question as one hidden state per timestep;
the image vector is tiled across timesteps, concatenated after the Bi-LSTM
output and batch-normalized along the feature axis.  Two independent leaf
models consume the fused feature: a two-way yes/no classifier and an
open-answer head that emits a fixed number of per-step distributions over
the answer vocabulary.  The leaf models share no weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .text_features import BLANK_ID, Vocab

EPS = 1e-12
YES_INDEX = 0
NO_INDEX = 1


@dataclass
class NetConfig:
    question_len: int = 21
    answer_len: int = 11
    lstm_hidden: int = 128
    others_hidden: int = 256
    image_dim: int = 1000
    dropout: float = 0.5
    lr: float = 1e-3
    batch_size: int = 256
    epochs: int = 251
    seed: int = 0
    freeze_embeddings: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


class FusionCore(nn.Module):
    """Embedding + Bi-LSTM + tile-and-concatenate fusion + batch norm."""

    def __init__(self, embedding_table: np.ndarray, config: NetConfig):
        super().__init__()
        self.config = config
        table = torch.as_tensor(np.asarray(embedding_table), dtype=torch.float32)
        self.embedding = nn.Embedding.from_pretrained(
            table, freeze=config.freeze_embeddings, padding_idx=BLANK_ID
        )
        self.lstm = nn.LSTM(
            table.shape[1],
            config.lstm_hidden,
            batch_first=True,
            bidirectional=True,
        )
        self.drop = nn.Dropout(config.dropout)
        self.fused_dim = 2 * config.lstm_hidden + config.image_dim
        self.bn = nn.BatchNorm1d(self.fused_dim)

    def encode_question(self, ids: torch.Tensor) -> torch.Tensor:
        """(B, m) int ids -> (B, m, 2*hidden); forward and backward states
        concatenated at each timestep."""
        emb = self.embedding(ids)
        out, _ = self.lstm(emb)
        return self.drop(out)

    def fuse(self, ids: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        """(B, m) ids and (B, image_dim) vectors -> (B, m, fused_dim)."""
        q = self.encode_question(ids)
        if image.shape[-1] != self.config.image_dim:
            raise ValueError(
                f"image feature dim {image.shape[-1]} != {self.config.image_dim}"
            )
        tiled = image.unsqueeze(1).expand(-1, q.shape[1], -1)
        fused = torch.cat([q, tiled], dim=2)
        return self.bn(fused.transpose(1, 2)).transpose(1, 2)


class YesNoModel(nn.Module):
    """Flattens the fused feature into a two-way softmax classifier."""

    def __init__(self, embedding_table: np.ndarray, config: NetConfig):
        super().__init__()
        self.core = FusionCore(embedding_table, config)
        self.head = nn.Linear(config.question_len * self.core.fused_dim, 2)

    def forward(self, ids: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        fused = self.core.fuse(ids, image)
        return self.head(fused.flatten(1))


class OthersModel(nn.Module):
    """Bridges the flattened fused feature to ``answer_len`` steps, each
    projected by a shared linear map onto the answer vocabulary."""

    def __init__(self, embedding_table: np.ndarray, config: NetConfig, answer_vocab_size: int):
        super().__init__()
        self.core = FusionCore(embedding_table, config)
        self.answer_len = config.answer_len
        self.answer_vocab_size = answer_vocab_size
        self.bridge = nn.Linear(
            config.question_len * self.core.fused_dim,
            config.answer_len * config.others_hidden,
        )
        self.proj = nn.Linear(config.others_hidden, answer_vocab_size)

    def forward(self, ids: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
        fused = self.core.fuse(ids, image)
        steps = self.bridge(fused.flatten(1))
        steps = steps.view(-1, self.answer_len, self.core.config.others_hidden)
        return self.proj(steps)


def predict_yes_no(model: YesNoModel, ids: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    """(B, 2) softmax probabilities; column order is (yes, no)."""
    model.eval()
    with torch.no_grad():
        return torch.softmax(model(ids, image), dim=-1)


def predict_others(model: OthersModel, ids: torch.Tensor, image: torch.Tensor) -> torch.Tensor:
    """(B, answer_len, vocab) per-step softmax distributions."""
    model.eval()
    with torch.no_grad():
        return torch.softmax(model(ids, image), dim=-1)


def yes_no_loss(actual: torch.Tensor, predicted: torch.Tensor) -> torch.Tensor:
    """Per-sample categorical cross entropy over the two answer classes."""
    return -(actual * torch.log(predicted + EPS)).sum(dim=-1)


def others_loss(actual: torch.Tensor, predicted: torch.Tensor) -> torch.Tensor:
    """Per-sample cross entropy summed over answer steps and vocabulary."""
    return -(actual * torch.log(predicted + EPS)).sum(dim=(-1, -2))


def one_hot(ids: torch.Tensor, num_classes: int) -> torch.Tensor:
    return torch.nn.functional.one_hot(ids, num_classes).to(torch.float32)


def init_output_bias_from_targets(model: nn.Module, targets: torch.Tensor) -> None:
    """Zero the output projection and start its bias at the empirical token
    log-prior, so an undertrained decoder backs off to the most likely
    token (usually padding) instead of emitting arbitrary words.
    """
    layer = model.proj if hasattr(model, "proj") else model.head
    flat = targets.reshape(-1, targets.shape[-1])
    prior = flat.mean(dim=0) + 1e-8
    with torch.no_grad():
        layer.weight.zero_()
        layer.bias.copy_(torch.log(prior))


def decode_yes_no(probs) -> str:
    probs = np.asarray(probs)
    return "yes" if probs[YES_INDEX] >= probs[NO_INDEX] else "no"


def decode_others(step_probs, vocab: Vocab) -> str:
    """Per-step argmax words joined by spaces; decoding stops at the first
    BLANK and BLANK tokens are dropped."""
    ids = np.asarray(step_probs).argmax(axis=-1)
    words = []
    for idx in ids:
        if idx == BLANK_ID:
            break
        words.append(vocab.word_of(int(idx)))
    return " ".join(w for w in words if w)


@dataclass
class AnswerPrediction:
    qtype: object
    decoded_text: str
    yes_no_probs: np.ndarray | None = None
    step_distributions: np.ndarray | None = None
    margin: float = 0.0


def categorical_accuracy(targets: torch.Tensor, probs: torch.Tensor) -> float:
    """Mean argmax agreement; for sequence outputs every step counts."""
    pred = probs.argmax(dim=-1)
    gold = targets.argmax(dim=-1)
    return float((pred == gold).float().mean())


@dataclass
class EpochStats:
    epoch: int
    loss: float
    categorical_accuracy: float


def fit(model: nn.Module, ids: torch.Tensor, images: torch.Tensor, targets: torch.Tensor,
        config: NetConfig, *, log_every: int = 0) -> list[EpochStats]:
    """Adam training loop on eps-clamped cross entropy.

    ``targets`` are one-hot: (B, 2) for the yes/no model, (B, r, z) for the
    open-answer model.  Batch order reshuffles each epoch from the config
    seed, so runs are reproducible.
    """
    if ids.shape[0] == 0:
        raise ValueError("empty training set for this route")
    loss_fn = yes_no_loss if targets.dim() == 2 else others_loss
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    gen = torch.Generator().manual_seed(config.seed)
    history = []
    n = ids.shape[0]
    for epoch in range(config.epochs):
        model.train()
        order = torch.randperm(n, generator=gen)
        total_loss = 0.0
        for start in range(0, n, config.batch_size):
            sel = order[start : start + config.batch_size]
            opt.zero_grad()
            probs = torch.softmax(model(ids[sel], images[sel]), dim=-1)
            loss = loss_fn(targets[sel], probs).mean()
            loss.backward()
            opt.step()
            total_loss += float(loss.detach()) * len(sel)
        model.eval()
        with torch.no_grad():
            probs = torch.softmax(model(ids, images), dim=-1)
            acc = categorical_accuracy(targets, probs)
        history.append(EpochStats(epoch + 1, total_loss / n, acc))
        if log_every and (epoch + 1) % log_every == 0:
            print(f"epoch {epoch + 1}: loss={history[-1].loss:.4f} cat_acc={acc:.4f}")
    return history


def _state_arrays(model: nn.Module) -> dict:
    return {k: v.detach().cpu().numpy() for k, v in model.state_dict().items()}


def save_model_npz(model: nn.Module, path) -> None:
    np.savez(Path(path), **_state_arrays(model))


def load_model_npz(model: nn.Module, path) -> None:
    with np.load(Path(path)) as data:
        state = {k: torch.from_numpy(np.asarray(data[k])) for k in data.files}
    model.load_state_dict(state)

"""Question-type routing: a linear SVM over hand-built question features.

Each question becomes a 510-dim vector: 10 binary entries flagging the
presence of fixed identifier words, followed by tf-idf weights for a frozen
top-500 word list ranked by the highest tf-idf value attained on the training
questions.  The classifier is trained with subgradient descent on the
regularized hinge objective and routes questions to YES_NO (margin >= 0) or
OTHERS (margin < 0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import QType
from .text_features import tokenize

IDENTIFIER_WORDS = ("is", "was", "are", "how", "can", "does", "which", "what", "type", "there")
TFIDF_TOP_K = 500


def identifier_vector(tokens, identifier_words=IDENTIFIER_WORDS) -> np.ndarray:
    """Presence bit per identifier word, computed on raw lowercased tokens."""
    present = set(tokens)
    return np.asarray([1.0 if w in present else 0.0 for w in identifier_words], dtype=np.float32)


def hinge_loss(t: float, y: float) -> float:
    """max(0, 1 - t*y) for a true label t in {+1,-1} and classifier score y."""
    return max(0.0, 1.0 - t * y)


@dataclass
class QsStats:
    """Corpus statistics frozen at training time.

    ``word_list`` holds the tf-idf feature words in rank order (may be
    shorter than ``top_k`` for small corpora; tail feature positions then
    stay zero) and ``idf`` the matching inverse-document-frequency values.
    """

    n_questions: int
    word_list: list[str]
    idf: np.ndarray
    top_k: int = TFIDF_TOP_K
    idf_mode: str = "doc_freq"


def _idf_denominator(word: str, doc_freq: dict, total_freq: dict, mode: str) -> int:
    if mode == "doc_freq":
        return doc_freq.get(word, 0)
    if mode == "summed_tf":
        return total_freq.get(word, 0)
    raise ValueError(f"unknown idf_mode: {mode}")


def build_qs_stats(questions, *, top_k: int = TFIDF_TOP_K, idf_mode: str = "doc_freq") -> QsStats:
    """Scan training questions and freeze the top-k tf-idf word list.

    Words are ranked by the maximum tf-idf value they attain over the
    training questions, ties broken lexicographically.
    """
    token_lists = [tokenize(q) for q in questions]
    n = len(token_lists)
    if n == 0:
        raise ValueError("need at least one training question")
    doc_freq: dict[str, int] = {}
    total_freq: dict[str, int] = {}
    for toks in token_lists:
        for w in set(toks):
            doc_freq[w] = doc_freq.get(w, 0) + 1
        for w in toks:
            total_freq[w] = total_freq.get(w, 0) + 1

    idf_of = {}
    for w in doc_freq:
        denom = _idf_denominator(w, doc_freq, total_freq, idf_mode)
        idf_of[w] = math.log(n / denom) if denom > 0 else 0.0

    best: dict[str, float] = {}
    for toks in token_lists:
        if not toks:
            continue
        length = len(toks)
        counts: dict[str, int] = {}
        for w in toks:
            counts[w] = counts.get(w, 0) + 1
        for w, c in counts.items():
            val = (c / length) * idf_of[w]
            if val > best.get(w, -1.0):
                best[w] = val
    ranked = sorted(best, key=lambda w: (-best[w], w))[:top_k]
    return QsStats(
        n_questions=n,
        word_list=ranked,
        idf=np.asarray([idf_of[w] for w in ranked], dtype=np.float64),
        top_k=top_k,
        idf_mode=idf_mode,
    )


def tfidf(word: str, question_tokens, stats: QsStats) -> float:
    """tf(w,q) * ln(n / df(w)) with a zero guard for corpus-absent words."""
    if not question_tokens:
        return 0.0
    try:
        j = stats.word_list.index(word)
    except ValueError:
        return 0.0
    tf = question_tokens.count(word) / len(question_tokens)
    return tf * float(stats.idf[j])


def featurize(question_text: str, stats: QsStats,
              identifier_words=IDENTIFIER_WORDS) -> np.ndarray:
    """Concatenate identifier bits and tf-idf weights into one vector.

    The output length is ``len(identifier_words) + stats.top_k`` regardless
    of corpus size.
    """
    tokens = tokenize(question_text)
    vec = np.zeros(len(identifier_words) + stats.top_k, dtype=np.float32)
    vec[: len(identifier_words)] = identifier_vector(tokens, identifier_words)
    if tokens:
        length = len(tokens)
        counts: dict[str, int] = {}
        for w in tokens:
            counts[w] = counts.get(w, 0) + 1
        base = len(identifier_words)
        for j, w in enumerate(stats.word_list):
            c = counts.get(w)
            if c:
                vec[base + j] = (c / length) * stats.idf[j]
    return vec


@dataclass
class SvmModel:
    """Linear classifier plus the frozen featurization state.

    Decision rule: YES_NO iff <v,w> + b >= 0.
    """

    weights: np.ndarray
    bias: float
    identifier_words: tuple
    tfidf_word_list: list[str]
    idf_values: np.ndarray
    top_k: int = TFIDF_TOP_K
    idf_mode: str = "doc_freq"
    train_hinge_loss: float = float("nan")

    def stats(self) -> QsStats:
        return QsStats(
            n_questions=0,
            word_list=self.tfidf_word_list,
            idf=self.idf_values,
            top_k=self.top_k,
            idf_mode=self.idf_mode,
        )

    def margin(self, question_text: str) -> float:
        v = featurize(question_text, self.stats(), self.identifier_words)
        return float(np.dot(v, self.weights) + self.bias)

    def to_json(self) -> str:
        obj = {
            "weights": [float(x) for x in self.weights],
            "bias": float(self.bias),
            "identifier_words": list(self.identifier_words),
            "tfidf_word_list": list(self.tfidf_word_list),
            "idf_values": [float(x) for x in self.idf_values],
            "top_k": self.top_k,
            "idf_mode": self.idf_mode,
            "train_hinge_loss": float(self.train_hinge_loss),
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_json(cls, text: str) -> "SvmModel":
        d = json.loads(text)
        return cls(
            weights=np.asarray(d["weights"], dtype=np.float64),
            bias=float(d["bias"]),
            identifier_words=tuple(d["identifier_words"]),
            tfidf_word_list=list(d["tfidf_word_list"]),
            idf_values=np.asarray(d["idf_values"], dtype=np.float64),
            top_k=int(d["top_k"]),
            idf_mode=d.get("idf_mode", "doc_freq"),
            train_hinge_loss=float(d.get("train_hinge_loss", "nan")),
        )

    @classmethod
    def load(cls, path) -> "SvmModel":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass
class SvmConfig:
    c: float = 1.0  # soft-margin weight in (1/2)||w||^2 + c * sum hinge
    epochs: int = 10
    seed: int = 0


def train_svm(features, labels, config: SvmConfig | None = None, *,
              stats: QsStats | None = None,
              identifier_words=IDENTIFIER_WORDS) -> SvmModel:
    """Subgradient descent on the soft-margin hinge objective.

    ``labels`` use +1 for YES_NO and -1 for OTHERS.  The per-step weight
    decay corresponds to the standard objective (1/2)||w||^2 + c*sum(hinge),
    i.e. a per-sample regularizer of 1/(c*n).  Training shuffles with a
    fixed seed, so identical inputs reproduce identical weights.
    """
    config = config or SvmConfig()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("features and labels must align")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("training data must contain both classes")

    rng = np.random.default_rng(config.seed)
    n, d = X.shape
    lam = 1.0 / (config.c * n)
    # the bias rides along as a regularized constant feature so that the
    # 1/(lam*t) step sizes cannot leave it with an unrecoverable early kick
    Xb = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    step = 0
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for i in order:
            step += 1
            eta = 1.0 / (lam * step)
            margin = y[i] * (Xb[i] @ w)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * y[i] * Xb[i]

    b = float(w[-1])
    w = w[:-1]
    final_loss = float(np.mean(np.maximum(0.0, 1.0 - y * (X @ w + b))))
    st = stats or QsStats(n_questions=n, word_list=[], idf=np.zeros(0))
    return SvmModel(
        weights=w,
        bias=b,
        identifier_words=tuple(identifier_words),
        tfidf_word_list=list(st.word_list),
        idf_values=np.asarray(st.idf, dtype=np.float64),
        top_k=st.top_k,
        idf_mode=st.idf_mode,
        train_hinge_loss=final_loss,
    )


def train_router(questions, qtypes, *, top_k: int = TFIDF_TOP_K,
                 config: SvmConfig | None = None, idf_mode: str = "doc_freq") -> SvmModel:
    """Build corpus statistics, featurize and train in one step."""
    stats = build_qs_stats(questions, top_k=top_k, idf_mode=idf_mode)
    X = np.stack([featurize(q, stats) for q in questions])
    y = [1.0 if t is QType.YES_NO else -1.0 for t in qtypes]
    return train_svm(X, y, config, stats=stats)


def predict_qtype(model: SvmModel, question_text: str) -> tuple[QType, float]:
    """Route a question; returns (qtype, raw margin)."""
    m = model.margin(question_text)
    return (QType.YES_NO if m >= 0.0 else QType.OTHERS), m

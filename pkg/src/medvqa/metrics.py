"""Evaluation suite: answer preprocessing, corpus BLEU, word-similarity
scoring, macro precision/recall/F1 and exact-match accuracy.

BLEU is the classic corpus-level form: clipped n-gram counts pooled over all
pairs, a uniform-weight geometric mean and a brevity penalty.  No smoothing
is applied; a zero modified precision at any included order yields 0.
Orders with no candidate n-grams anywhere in the corpus are excluded from
the geometric mean, so an identity corpus of short answers still scores 1.
"""

from __future__ import annotations

import math
import string
from collections import Counter
from dataclasses import dataclass, field

from .taxonomy import Taxonomy, bundled_taxonomy
from .text_features import load_wordlist

EVAL_STOPWORDS = load_wordlist("eval_stopwords")

_PUNCT_TO_SPACE = str.maketrans({c: " " for c in string.punctuation})


def preprocess_for_eval(answer: str, stopwords: frozenset = EVAL_STOPWORDS) -> list[str]:
    """Lowercase, replace punctuation with spaces, split, drop stopwords."""
    tokens = answer.lower().translate(_PUNCT_TO_SPACE).split()
    return [t for t in tokens if t not in stopwords]


def _ngram_counts(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidates, references, *, max_order: int = 4) -> float:
    """Corpus BLEU over aligned token-list pairs."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references must align pairwise")
    if not candidates:
        raise ValueError("empty corpus")

    clipped = [0] * (max_order + 1)
    total = [0] * (max_order + 1)
    c_len = 0
    r_len = 0
    for cand, ref in zip(candidates, references):
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, max_order + 1):
            cn = _ngram_counts(cand, n)
            if not cn:
                continue
            rn = _ngram_counts(ref, n)
            total[n] += sum(cn.values())
            clipped[n] += sum(min(count, rn[g]) for g, count in cn.items())

    orders = [n for n in range(1, max_order + 1) if total[n] > 0]
    if not orders:
        return 1.0 if r_len == 0 else 0.0
    if any(clipped[n] == 0 for n in orders):
        return 0.0
    log_mean = sum(math.log(clipped[n] / total[n]) for n in orders) / len(orders)
    bp = 1.0 if c_len > r_len else math.exp(1.0 - r_len / c_len)
    return bp * math.exp(log_mean)


def _direction_score(from_tokens, to_tokens, taxonomy: Taxonomy) -> float:
    scores = []
    for a in from_tokens:
        best = 0.0
        for b in to_tokens:
            sim = taxonomy.wup(a, b)
            if sim is None:
                sim = 1.0 if a == b else 0.0
            if sim > best:
                best = sim
        scores.append(best)
    return sum(scores) / len(scores)


def wbss(candidate_tokens, reference_tokens, taxonomy: Taxonomy | None = None) -> float:
    """Word-level semantic similarity via pairwise Wu-Palmer best matches.

    Directional scores (candidate->reference and reverse) are combined by
    harmonic mean; tokens outside the taxonomy fall back to exact match.
    """
    if not candidate_tokens and not reference_tokens:
        return 1.0
    if not candidate_tokens or not reference_tokens:
        return 0.0
    taxonomy = taxonomy or bundled_taxonomy()
    s_cr = _direction_score(candidate_tokens, reference_tokens, taxonomy)
    s_rc = _direction_score(reference_tokens, candidate_tokens, taxonomy)
    if s_cr + s_rc == 0.0:
        return 0.0
    return 2.0 * s_cr * s_rc / (s_cr + s_rc)


def corpus_wbss(candidates, references, taxonomy: Taxonomy | None = None) -> float:
    """Mean per-pair wbss over an aligned corpus."""
    if len(candidates) != len(references):
        raise ValueError("candidates and references must align pairwise")
    if not candidates:
        raise ValueError("empty corpus")
    taxonomy = taxonomy or bundled_taxonomy()
    return sum(wbss(c, r, taxonomy) for c, r in zip(candidates, references)) / len(candidates)


def prf_per_class(gold, pred, classes=None) -> dict:
    """Per-class (precision, recall, f1, support) from aligned label lists."""
    if len(gold) != len(pred):
        raise ValueError("gold and predicted labels must align")
    if not gold:
        raise ValueError("empty label lists")
    if classes is None:
        classes = sorted(set(gold) | set(pred), key=str)
    out = {}
    for c in classes:
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        n_pred = sum(1 for p in pred if p == c)
        n_gold = sum(1 for g in gold if g == c)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold if n_gold else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out[c] = (precision, recall, f1, n_gold)
    return out


def macro_prf(gold, pred, classes=None) -> tuple[float, float, float]:
    """Unweighted per-class mean of precision, recall and F1."""
    per_class = prf_per_class(gold, pred, classes)
    k = len(per_class)
    p = sum(v[0] for v in per_class.values()) / k
    r = sum(v[1] for v in per_class.values()) / k
    f = sum(v[2] for v in per_class.values()) / k
    return p, r, f


def weighted_prf(gold, pred, classes=None) -> tuple[float, float, float]:
    """Support-weighted per-class mean of precision, recall and F1."""
    per_class = prf_per_class(gold, pred, classes)
    n = sum(v[3] for v in per_class.values())
    if n == 0:
        return 0.0, 0.0, 0.0
    p = sum(v[0] * v[3] for v in per_class.values()) / n
    r = sum(v[1] * v[3] for v in per_class.values()) / n
    f = sum(v[2] * v[3] for v in per_class.values()) / n
    return p, r, f


def accuracy(gold, pred, *, preprocess: bool = True) -> float:
    """Exact-match fraction; strings are eval-preprocessed before comparing."""
    if len(gold) != len(pred):
        raise ValueError("gold and predicted answers must align")
    if not gold:
        raise ValueError("empty answer lists")
    if preprocess:
        gold = [preprocess_for_eval(g) for g in gold]
        pred = [preprocess_for_eval(p) for p in pred]
    return sum(1 for g, p in zip(gold, pred) if g == p) / len(gold)


@dataclass
class EvalReport:
    bleu: float
    wbss: float
    macro_p: float
    macro_r: float
    macro_f1: float
    accuracy: float
    n_pairs: int = 0
    error_counts: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("bleu", "wbss", "macro_p", "macro_r", "macro_f1", "accuracy"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0,1]")

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "wbss": self.wbss,
            "macro_p": self.macro_p,
            "macro_r": self.macro_r,
            "macro_f1": self.macro_f1,
            "accuracy": self.accuracy,
            "n_pairs": self.n_pairs,
            "error_counts": dict(self.error_counts),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            bleu=d["bleu"],
            wbss=d["wbss"],
            macro_p=d["macro_p"],
            macro_r=d["macro_r"],
            macro_f1=d["macro_f1"],
            accuracy=d["accuracy"],
            n_pairs=d.get("n_pairs", 0),
            error_counts=dict(d.get("error_counts", {})),
        )


def evaluate_answers(predictions, references, taxonomy: Taxonomy | None = None) -> EvalReport:
    """Score aligned raw answer strings with every corpus metric.

    Macro P/R/F1 here treat each distinct preprocessed reference answer as a
    class label, which is mainly informative for yes/no subsets.
    """
    if len(predictions) != len(references):
        raise ValueError("predictions and references must align")
    if not predictions:
        raise ValueError("empty prediction list")
    pred_tokens = [preprocess_for_eval(p) for p in predictions]
    ref_tokens = [preprocess_for_eval(r) for r in references]
    gold_labels = [" ".join(t) for t in ref_tokens]
    pred_labels = [" ".join(t) for t in pred_tokens]
    p, r, f = macro_prf(gold_labels, pred_labels, classes=sorted(set(gold_labels)))
    return EvalReport(
        bleu=bleu(pred_tokens, ref_tokens),
        wbss=corpus_wbss(pred_tokens, ref_tokens, taxonomy),
        macro_p=p,
        macro_r=r,
        macro_f1=f,
        accuracy=accuracy(predictions, references),
        n_pairs=len(predictions),
    )

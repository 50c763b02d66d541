"""Question preprocessing, vocabularies and the 600-dim word embedding table.

Questions go through lowercase -> tokenize -> lemmatize -> stopword removal
-> digit/alphanumeric token mapping, then get encoded as fixed-length integer
sequences against a frequency-ranked vocabulary.  Each vocabulary word is
embedded as the concatenation of a GloVe half and a character n-gram
(sub-word) half, so out-of-GloVe medical terms still receive a usable vector.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

# Reserved vocabulary slots.  Index 0 must stay the padding token.
BLANK_ID = 0
UNK_ID = 1
NUM_ID = 2
POS_ID = 3
RESERVED = 4
_SPECIAL_STRINGS = {BLANK_ID: "", UNK_ID: "unk", NUM_ID: "num", POS_ID: "pos"}

QUESTION_LEN = 21
ANSWER_LEN = 11

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into alphanumeric tokens."""
    return _TOKEN_RE.findall(text.lower())


def load_wordlist(name_or_path) -> frozenset[str]:
    """Read a one-word-per-line list; '#' lines are comments.

    ``name_or_path`` is either a packaged list name ("question_stopwords",
    "eval_stopwords") or a filesystem path.
    """
    p = Path(str(name_or_path))
    if p.is_file():
        text = p.read_text(encoding="utf-8")
    else:
        text = (
            resources.files("medvqa.data")
            .joinpath(f"{name_or_path}.txt")
            .read_text(encoding="utf-8")
        )
    words = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            words.append(line)
    return frozenset(words)


QUESTION_STOPWORDS = load_wordlist("question_stopwords")


class RuleLemmatizer:
    """Small deterministic English lemmatizer: irregular forms plus plural
    stripping.  Outputs are pinned by golden tests; swap in a richer
    lemmatizer through the ``lemmatizer`` argument of preprocess_question.
    """

    IRREGULAR = {
        "is": "be", "are": "be", "was": "be", "were": "be", "am": "be",
        "been": "be", "being": "be",
        "has": "have", "had": "have", "having": "have",
        "does": "do", "did": "do", "doing": "do", "done": "do",
        "seen": "see", "sees": "see", "saw": "see",
        "shows": "show", "shown": "show", "showed": "show", "showing": "show",
        "taken": "take", "takes": "take", "took": "take",
        "found": "find", "finds": "find",
        "children": "child", "feet": "foot", "teeth": "tooth",
        "men": "man", "women": "woman",
    }

    def __call__(self, token: str) -> str:
        if token in self.IRREGULAR:
            return self.IRREGULAR[token]
        if token.endswith("sses"):
            return token[:-2]
        if token.endswith("ies") and len(token) > 4:
            return token[:-3] + "y"
        if token.endswith(("xes", "ches", "shes", "zes", "oes")):
            return token[:-2]
        if token.endswith("s") and len(token) > 3 and not token.endswith(("ss", "us", "is")):
            return token[:-1]
        return token


_DEFAULT_LEMMATIZER = RuleLemmatizer()
_DIGITS_RE = re.compile(r"^[0-9]+$")
_HAS_DIGIT_RE = re.compile(r"[0-9]")


def preprocess_question(
    text: str,
    *,
    lemmatizer=None,
    stopwords: frozenset[str] = QUESTION_STOPWORDS,
) -> list[str]:
    """Normalize a question into model tokens.

    Pure-digit tokens become "num" and digit/letter mixtures become "pos";
    both mappings run after lemmatization and stopword removal.
    """
    lemmatizer = lemmatizer or _DEFAULT_LEMMATIZER
    out = []
    for tok in tokenize(text):
        lemma = lemmatizer(tok)
        if lemma in stopwords:
            continue
        if _DIGITS_RE.match(lemma):
            out.append("num")
        elif _HAS_DIGIT_RE.search(lemma):
            out.append("pos")
        else:
            out.append(lemma)
    return out


def preprocess_answer(text: str) -> list[str]:
    """Lowercase/tokenize only: answer targets keep stopwords and digits."""
    return tokenize(text)


@dataclass(frozen=True)
class Vocab:
    """Frequency-ranked word index with reserved special slots 0..3."""

    word_to_index: dict
    max_size: int

    @property
    def size(self) -> int:
        return RESERVED + len(self.word_to_index)

    def id_of(self, token: str) -> int:
        if token == "num":
            return NUM_ID
        if token == "pos":
            return POS_ID
        return self.word_to_index.get(token, UNK_ID)

    def word_of(self, index: int) -> str:
        if index < RESERVED:
            return _SPECIAL_STRINGS[index]
        return self.index_to_word()[index]

    def index_to_word(self) -> dict:
        if not hasattr(self, "_itw"):
            object.__setattr__(
                self, "_itw", {i: w for w, i in self.word_to_index.items()}
            )
        return self._itw

    def words(self) -> list[str]:
        return sorted(self.word_to_index, key=self.word_to_index.get)

    def to_dict(self) -> dict:
        return {"max_size": self.max_size, "words": self.words()}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocab":
        return cls(
            word_to_index={w: RESERVED + i for i, w in enumerate(d["words"])},
            max_size=d["max_size"],
        )


def build_vocab(token_lists, max_size: int | None = None) -> Vocab:
    """Keep the ``max_size`` most frequent words, ties broken lexicographically.

    ``max_size=None`` keeps every word (used for answer vocabularies).
    "num"/"pos" tokens are excluded: they map to reserved ids.
    """
    if max_size is not None and max_size < 1:
        raise ValueError("max_size must be >= 1")
    counts: dict[str, int] = {}
    seen_any = False
    for toks in token_lists:
        seen_any = True
        for t in toks:
            if t in ("num", "pos"):
                continue
            counts[t] = counts.get(t, 0) + 1
    if not seen_any:
        raise ValueError("need at least one token list")
    ranked = sorted(counts, key=lambda w: (-counts[w], w))
    if max_size is not None:
        ranked = ranked[:max_size]
    return Vocab(
        word_to_index={w: RESERVED + i for i, w in enumerate(ranked)},
        max_size=max_size if max_size is not None else len(ranked),
    )


def encode(tokens, vocab: Vocab, length: int) -> list[int]:
    """Map tokens to ids, truncate to ``length`` and right-pad with BLANK."""
    ids = [vocab.id_of(t) for t in tokens[:length]]
    ids.extend([BLANK_ID] * (length - len(ids)))
    return ids


def load_glove(path, *, dim: int | None = None, restrict_to=None) -> dict:
    """Parse a GloVe text file (word + floats per line) into a dict.

    ``restrict_to`` limits parsing to the given words to bound memory.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"word-vector file not found: {path}")
    keep = set(restrict_to) if restrict_to is not None else None
    vectors: dict[str, np.ndarray] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").split(" ")
            if len(parts) < 2:
                continue
            word = parts[0]
            if keep is not None and word not in keep:
                continue
            try:
                vec = np.asarray([float(x) for x in parts[1:]], dtype=np.float32)
            except ValueError as exc:
                raise ValueError(f"{path}: bad vector at line {lineno}") from exc
            if dim is not None and vec.shape[0] != dim:
                raise ValueError(
                    f"{path}: expected {dim}-dim vector at line {lineno}, got {vec.shape[0]}"
                )
            vectors[word] = vec
    return vectors


def _char_ngrams(word: str, nmin: int, nmax: int) -> list[str]:
    marked = f"<{word}>"
    grams = []
    for n in range(nmin, nmax + 1):
        for i in range(len(marked) - n + 1):
            grams.append(marked[i : i + n])
    return grams


class SubwordVectors:
    """Character n-gram vectors composed into word vectors by averaging.

    In seeded mode every n-gram vector is derived deterministically from a
    digest of the n-gram, so any nonempty word composes to a nonzero vector.
    Vectors loaded from a FastText-style text file take precedence; words
    with no known n-grams fall back to the seeded scheme.
    """

    def __init__(self, dim: int = 300, seed: int = 0, nmin: int = 3, nmax: int = 5,
                 ngram_vectors: dict | None = None):
        self.dim = dim
        self.seed = seed
        self.nmin = nmin
        self.nmax = nmax
        self.ngram_vectors = dict(ngram_vectors or {})

    @classmethod
    def from_file(cls, path, *, dim: int | None = None, seed: int = 0,
                  nmin: int = 3, nmax: int = 5) -> "SubwordVectors":
        vectors = load_glove(path, dim=dim)
        if not vectors:
            raise ValueError(f"no sub-word vectors found in {path}")
        actual = next(iter(vectors.values())).shape[0]
        return cls(dim=actual, seed=seed, nmin=nmin, nmax=nmax, ngram_vectors=vectors)

    def _seeded_vector(self, gram: str) -> np.ndarray:
        digest = hashlib.sha256(f"{self.seed}:{gram}".encode()).digest()
        rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
        return rng.standard_normal(self.dim).astype(np.float32) / np.sqrt(self.dim)

    def ngram_vector(self, gram: str) -> np.ndarray | None:
        if gram in self.ngram_vectors:
            return self.ngram_vectors[gram]
        if not self.ngram_vectors:
            return self._seeded_vector(gram)
        return None

    def word_vector(self, word: str) -> np.ndarray:
        if not word:
            return np.zeros(self.dim, dtype=np.float32)
        grams = _char_ngrams(word, self.nmin, self.nmax)
        parts = [v for v in (self.ngram_vector(g) for g in grams) if v is not None]
        if not parts:
            # File-backed model missing every n-gram of this word.
            return self._seeded_vector(f"<{word}>")
        return np.mean(parts, axis=0, dtype=np.float32).astype(np.float32)

    def save(self, path, words) -> None:
        """Persist the n-gram vectors used by ``words`` in GloVe text format."""
        grams = sorted({g for w in words for g in _char_ngrams(w, self.nmin, self.nmax)})
        with Path(path).open("w", encoding="utf-8") as fh:
            for g in grams:
                vec = self.ngram_vector(g)
                if vec is None:
                    continue
                fh.write(g + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")


def build_embedding_table(
    vocab: Vocab,
    glove_vectors: dict,
    subword: SubwordVectors,
    *,
    glove_dim: int = 300,
) -> np.ndarray:
    """Assemble the per-word embedding rows: GloVe half then sub-word half.

    Words absent from GloVe get a zero first half; the BLANK and UNK rows
    are all zeros.
    """
    dim = glove_dim + subword.dim
    table = np.zeros((vocab.size, dim), dtype=np.float32)
    for word, idx in vocab.word_to_index.items():
        g = glove_vectors.get(word)
        if g is not None:
            table[idx, :glove_dim] = g
        table[idx, glove_dim:] = subword.word_vector(word)
    for special_id in (NUM_ID, POS_ID):
        word = _SPECIAL_STRINGS[special_id]
        g = glove_vectors.get(word)
        if g is not None:
            table[special_id, :glove_dim] = g
        table[special_id, glove_dim:] = subword.word_vector(word)
    if not np.isfinite(table).all():
        raise ValueError("embedding table contains non-finite values")
    return table

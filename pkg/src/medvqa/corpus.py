"""Dataset ingestion for radiology question answering corpora.

Two on-disk layouts are supported: a JSON file (array or JSON-lines) in the
style of the RAD release, and delimiter-separated rows in the style of the
CLEF18 release.  Both are normalized into the same record stream and can be
round-tripped through a canonical JSON-lines format.
"""

from __future__ import annotations

import json
import logging
import string
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

log = logging.getLogger(__name__)


class QType(Enum):
    YES_NO = "yes_no"
    OTHERS = "others"
    UNKNOWN = "unknown"


class Source(Enum):
    RAD = "rad"
    CLEF18 = "clef18"


class Split(Enum):
    TRAIN = "train"
    VALIDATION = "validation"
    TEST = "test"


class CorpusError(ValueError):
    """Malformed dataset file; message carries the offending line number."""


_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def normalize_answer(answer: str) -> str:
    """Lowercase, strip punctuation and collapse whitespace."""
    return " ".join(answer.lower().translate(_PUNCT_TABLE).split())


def derive_qtype(answer: str) -> QType:
    """Label an answer as YES_NO or OTHERS from its normalized text."""
    norm = normalize_answer(answer)
    if not norm:
        raise ValueError("cannot derive a question type from an empty answer")
    return QType.YES_NO if norm in ("yes", "no") else QType.OTHERS


@dataclass(frozen=True)
class QAItem:
    image_id: str
    image_path: str
    question: str
    answer: str
    qtype: QType = QType.UNKNOWN
    source: Source = Source.RAD

    def __post_init__(self):
        if not self.question.strip():
            raise ValueError("question must be non-empty after trimming")
        if self.qtype is QType.YES_NO and self.answer:
            if normalize_answer(self.answer) not in ("yes", "no"):
                raise ValueError(
                    f"yes/no item has incompatible answer: {self.answer!r}"
                )

    def with_qtype(self, qtype: QType) -> "QAItem":
        return replace(self, qtype=qtype)


@dataclass(frozen=True)
class Dataset:
    items: tuple[QAItem, ...]
    split: Split
    name: str
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)


# Maps canonical field names to the keys used inside a RAD-style JSON file.
DEFAULT_RAD_KEYS = {"image": "image", "question": "question", "answer": "answer"}


def _iter_json_records(path: Path):
    """Yield (record_number, dict) from a JSON array or JSON-lines file."""
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if not stripped:
        return
    if stripped.startswith("["):
        try:
            records = json.loads(text)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{path}: invalid JSON at line {exc.lineno}") from exc
        for i, rec in enumerate(records, start=1):
            yield i, rec
    else:
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                yield i, json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: invalid JSON at line {i}") from exc


def _resolve_image(raw: str, image_root: Path) -> Path:
    p = Path(raw)
    return p if p.is_absolute() else image_root / p


def load_dataset(
    path,
    format: str,
    split: Split,
    *,
    source: Source | None = None,
    key_map: dict | str | Path | None = None,
    delimiter: str = "\t",
    image_root=None,
    name: str | None = None,
) -> Dataset:
    """Load a RAD_JSON or CLEF18_DELIMITED file into a Dataset.

    Items preserve file order and carry qtype UNKNOWN; records whose image
    file is missing on disk are skipped with a warning and counted in
    ``Dataset.skipped``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dataset file not found: {path}")
    fmt = format.upper()
    if fmt not in ("RAD_JSON", "CLEF18_DELIMITED"):
        raise ValueError(f"unknown dataset format: {format}")
    root = Path(image_root) if image_root is not None else path.parent

    if isinstance(key_map, (str, Path)):
        key_map = json.loads(Path(key_map).read_text(encoding="utf-8"))
    keys = dict(DEFAULT_RAD_KEYS, **(key_map or {}))

    items: list[QAItem] = []
    skipped = 0

    def add(lineno: int, image_ref: str, image_id: str, question: str, answer: str, src: Source):
        nonlocal skipped
        if not question.strip():
            raise CorpusError(f"{path}: empty question at line {lineno}")
        image_path = _resolve_image(image_ref, root)
        if not image_path.is_file():
            log.warning("skipping line %d of %s: missing image %s", lineno, path, image_path)
            skipped += 1
            return
        items.append(
            QAItem(
                image_id=image_id,
                image_path=str(image_path),
                question=question.strip(),
                answer=answer.strip(),
                qtype=QType.UNKNOWN,
                source=src,
            )
        )

    if fmt == "RAD_JSON":
        src = source or Source.RAD
        for lineno, rec in _iter_json_records(path):
            if not isinstance(rec, dict):
                raise CorpusError(f"{path}: record at line {lineno} is not an object")
            try:
                image_ref = str(rec[keys["image"]])
                question = str(rec[keys["question"]])
                answer = str(rec.get(keys["answer"], ""))
            except KeyError as exc:
                raise CorpusError(f"{path}: missing key {exc} at line {lineno}") from exc
            image_id = str(rec.get("image_id", Path(image_ref).stem))
            add(lineno, image_ref, image_id, question, answer, src)
    else:
        src = source or Source.CLEF18
        with path.open(encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line.strip():
                    continue
                parts = line.split(delimiter)
                if len(parts) < 2:
                    raise CorpusError(
                        f"{path}: expected at least 2 delimited fields at line {lineno}"
                    )
                image_id = parts[0].strip()
                question = parts[1]
                answer = parts[2] if len(parts) > 2 else ""
                # rows carry a bare image id; probe the usual raster suffixes
                image_ref = image_id
                for ext in ("", ".png", ".jpg", ".jpeg"):
                    if (root / (image_id + ext)).is_file():
                        image_ref = image_id + ext
                        break
                add(lineno, image_ref, image_id, question, answer, src)

    return Dataset(
        items=tuple(items),
        split=split,
        name=name or path.stem,
        skipped=skipped,
    )


def with_derived_qtypes(dataset: Dataset) -> Dataset:
    """Return a copy whose items carry qtypes derived from their answers."""
    items = tuple(
        it.with_qtype(derive_qtype(it.answer)) if it.answer.strip() else it
        for it in dataset.items
    )
    return replace(dataset, items=items)


def merge(a: Dataset, b: Dataset) -> Dataset:
    """Concatenate two datasets of the same split; a's items come first."""
    if a.split is not b.split:
        raise ValueError(f"split mismatch: {a.split.value} vs {b.split.value}")
    return Dataset(
        items=a.items + b.items,
        split=a.split,
        name=f"{a.name}+{b.name}",
        skipped=a.skipped + b.skipped,
    )


def save_canonical(dataset: Dataset, path) -> None:
    """Write the canonical JSON-lines form, one UTF-8 record per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for it in dataset.items:
            rec = {
                "image_id": it.image_id,
                "image_path": it.image_path,
                "question": it.question,
                "answer": it.answer,
                "source": it.source.value,
            }
            if it.qtype is not QType.UNKNOWN:
                rec["qtype"] = it.qtype.value
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_canonical(path, split: Split, *, name: str | None = None, check_images: bool = False) -> Dataset:
    """Reload a canonical JSON-lines file written by save_canonical."""
    path = Path(path)
    items = []
    skipped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path}: invalid JSON at line {lineno}") from exc
            if check_images and not Path(rec["image_path"]).is_file():
                log.warning("skipping line %d of %s: missing image", lineno, path)
                skipped += 1
                continue
            items.append(
                QAItem(
                    image_id=rec["image_id"],
                    image_path=rec["image_path"],
                    question=rec["question"],
                    answer=rec.get("answer", ""),
                    qtype=QType(rec["qtype"]) if "qtype" in rec else QType.UNKNOWN,
                    source=Source(rec.get("source", "rad")),
                )
            )
    return Dataset(tuple(items), split=split, name=name or path.stem, skipped=skipped)

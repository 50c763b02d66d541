"""Aggregation of manually annotated prediction errors.

Categories are assigned by a human annotator; this module only validates
and counts them.  Annotation files are JSON-lines (optionally gzipped) with
fields qa_id, gold, predicted, category and an optional note.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from pathlib import Path

CATEGORIES = (
    "semantic",
    "modality_plane",
    "specification",
    "boundary_loss",
    "miscellaneous",
)


@dataclass(frozen=True)
class ErrorRecord:
    qa_id: str
    gold: str
    predicted: str
    category: str
    note: str = ""

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(
                f"unknown error category {self.category!r}; expected one of {CATEGORIES}"
            )


def load_annotations(path) -> list[ErrorRecord]:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    records = []
    with opener(path, "rt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}: invalid JSON at line {lineno}") from exc
            records.append(
                ErrorRecord(
                    qa_id=rec["qa_id"],
                    gold=rec.get("gold", ""),
                    predicted=rec.get("predicted", ""),
                    category=rec["category"],
                    note=rec.get("note", ""),
                )
            )
    if not records:
        raise ValueError(f"{path}: no annotation records")
    return records


def aggregate(records) -> dict:
    counts = {c: 0 for c in CATEGORIES}
    for r in records:
        counts[r.category] += 1
    total = len(records)
    return {
        "total": total,
        "counts": counts,
        "percentages": {c: round(100.0 * n / total, 2) for c, n in counts.items()},
    }

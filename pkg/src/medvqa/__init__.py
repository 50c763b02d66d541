"""Hierarchical medical visual question answering.

A linear question-type classifier routes each (image, question) pair to a
yes/no head or an open-answer head built on fused Bi-LSTM and CNN features,
with a full training, evaluation and serving harness.
"""

__version__ = "0.1.0"

from .corpus import Dataset, QAItem, QType, Source, Split, derive_qtype, load_dataset, merge

__all__ = [
    "Dataset",
    "QAItem",
    "QType",
    "Source",
    "Split",
    "derive_qtype",
    "load_dataset",
    "merge",
    "__version__",
]

"""Run configuration: one JSON file drives every command, and every run
embeds its config snapshot in the artifacts it writes."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

from ..fusion import NetConfig

MODE_WITH_QS = "with_qs"
MODE_WITHOUT_QS = "without_qs"


@dataclass
class RunConfig:
    seed: int = 0
    mode: str = MODE_WITH_QS

    # dataset files (RAD-style JSON / CLEF-style TSV); optional per command
    rad_train: str | None = None
    rad_test: str | None = None
    clef_train: str | None = None
    clef_val: str | None = None
    clef_test: str | None = None
    clef_images: str | None = None

    # embedding sources
    glove_path: str | None = None
    subword_path: str | None = None
    glove_dim: int = 300
    subword_dim: int = 300

    # question-type classifier
    qs_top_k: int = 500
    qs_c: float = 1.0
    qs_epochs: int = 10
    qs_idf_mode: str = "doc_freq"

    # vocabulary and net geometry
    question_vocab_size: int = 1050
    net: NetConfig = field(default_factory=NetConfig)

    backbone: str = "tiny"
    cache_dir: str | None = None
    wordnet_dir: str | None = None
    select: str = "final"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["net"] = self.net.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        net = NetConfig.from_dict(d.pop("net", {}))
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        cfg = cls(**known)
        cfg.net = net
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def derived_seed(self, label: str) -> int:
        """Deterministic per-component seed fanned out from the run seed."""
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        return int.from_bytes(digest[:4], "little")

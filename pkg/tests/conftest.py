import json
from pathlib import Path

import pytest

from medvqa import synthetic
from medvqa.fusion import NetConfig
from medvqa.harness.config import RunConfig

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def small_workspace(tmp_path_factory):
    """Scaled-down synthetic corpora plus a low-dim word-vector fixture,
    sized for module tests and the desk-scale ablation."""
    root = tmp_path_factory.mktemp("small_ws")
    rad = synthetic.make_rad(root / "rad", n_train=240, n_test=60, n_images=40, seed=7)
    clef = synthetic.make_clef(
        root / "clef18", n_train=300, n_val=40, n_test=60, n_images=50, seed=11
    )
    words = synthetic.corpus_words(
        rad["train"], rad["test"], clef["train"], clef["val"], clef["test"]
    )
    glove_path = root / "glove32.txt"
    synthetic.write_glove(glove_path, words, dim=32, seed=3, coverage=0.85)
    return {"root": root, "rad": rad, "clef": clef, "glove": glove_path}


@pytest.fixture(scope="session")
def full_workspace(tmp_path_factory):
    """Manifest-sized synthetic corpora used by the acceptance criteria."""
    root = tmp_path_factory.mktemp("full_ws")
    rad = synthetic.make_rad(root / "rad", seed=7)
    clef = synthetic.make_clef(root / "clef18", seed=11)
    return {"root": root, "rad": rad, "clef": clef}


def small_run_config(ws, **overrides) -> RunConfig:
    net = NetConfig(
        lstm_hidden=32,
        others_hidden=64,
        dropout=0.2,
        epochs=overrides.pop("epochs", 30),
        batch_size=256,
        lr=1e-3,
    )
    cfg = RunConfig(
        rad_train=str(ws["rad"]["train"]),
        rad_test=str(ws["rad"]["test"]),
        clef_train=str(ws["clef"]["train"]),
        clef_val=str(ws["clef"]["val"]),
        clef_test=str(ws["clef"]["test"]),
        clef_images=str(ws["clef"]["images_dir"]),
        glove_path=str(ws["glove"]),
        glove_dim=32,
        subword_dim=32,
        question_vocab_size=1050,
        backbone="tiny",
    )
    cfg.net = net
    for k, v in overrides.items():
        setattr(cfg, k, v)
    return cfg


@pytest.fixture()
def small_config(small_workspace, tmp_path):
    cfg = small_run_config(small_workspace)
    cfg.cache_dir = str(tmp_path / "cache")
    return cfg


@pytest.fixture(scope="session")
def error_fixture_path():
    return DATA_DIR / "error_annotations.jsonl.gz"

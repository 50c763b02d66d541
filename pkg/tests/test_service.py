import base64
import io

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient
from PIL import Image

from medvqa.fusion import NetConfig, OthersModel, YesNoModel
from medvqa.harness.config import RunConfig
from medvqa.harness.pipeline import VqaSystem
from medvqa.harness.service import InferenceEngine, create_app
from medvqa.routing import SvmConfig, train_router
from medvqa.corpus import QType
from medvqa.text_features import build_vocab, preprocess_answer, preprocess_question
from medvqa.vision import FeatureCache, ImageFeature, resolve_backbone


def _png_bytes(seed=0, size=64):
    rng = np.random.default_rng(seed)
    img = Image.fromarray(rng.integers(0, 256, (size, size), dtype=np.uint8), mode="L")
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture(scope="module")
def engine(tmp_path_factory):
    questions = [
        "Is there an abnormality in this ct image?",
        "Is the lung normal?",
        "What modality is this image?",
        "Where is the mass located?",
    ]
    answers = ["yes", "no", "ct", "in the left lung"]
    qtypes = [QType.YES_NO, QType.YES_NO, QType.OTHERS, QType.OTHERS]

    cfg = RunConfig(glove_dim=8, subword_dim=8, backbone="tiny")
    cfg.net = NetConfig(lstm_hidden=8, others_hidden=8, dropout=0.0, epochs=1, batch_size=4)
    question_vocab = build_vocab([preprocess_question(q) for q in questions], 1050)
    answer_vocab = build_vocab([preprocess_answer(a) for a in answers[2:]], None)
    table = np.zeros((question_vocab.size, 16), dtype=np.float32)

    torch.manual_seed(0)
    system = VqaSystem(
        config=cfg,
        question_vocab=question_vocab,
        answer_vocab=answer_vocab,
        qs_model=train_router(questions, qtypes, config=SvmConfig(epochs=30)),
        yes_no_model=YesNoModel(table, cfg.net).eval(),
        others_model=OthersModel(table, cfg.net, answer_vocab.size).eval(),
        backbone_tag="tiny-conv/seed0:logits",
    )
    cache = FeatureCache(tmp_path_factory.mktemp("svc_cache"))
    backbone = resolve_backbone("tiny")
    cache.put(ImageFeature("known-image", np.zeros(1000, dtype=np.float32), backbone.tag))
    return InferenceEngine(system, backbone=backbone, cache=cache)


@pytest.fixture()
def client(engine):
    return TestClient(create_app(engine))


def test_health_before_load_is_503():
    app = create_app(engine=None)
    with TestClient(app) as client:
        assert client.get("/v1/health").status_code == 503
        r = client.post("/v1/ask", json={"question": "Is it?", "image_id": "x"})
        assert r.status_code == 503


def test_health_after_load(client):
    r = client.get("/v1/health")
    assert r.status_code == 200
    body = r.json()
    assert body["backbone_tag"] == "tiny-conv/seed0:logits"
    assert body["status"] == "ok"


def test_empty_question_is_400(client):
    r = client.post("/v1/ask", json={"question": "   ", "image_id": "known-image"})
    assert r.status_code == 400


def test_missing_image_fields_is_400(client):
    r = client.post("/v1/ask", json={"question": "Is the lung normal?"})
    assert r.status_code == 400


def test_malformed_payload_is_400(client):
    r = client.post("/v1/ask", json={"question": ["not", "a", "string"]})
    assert r.status_code == 400


def test_invalid_base64_is_422(client):
    r = client.post("/v1/ask", json={"question": "Is it?", "image": "%%%not-base64%%%"})
    assert r.status_code == 422


def test_undecodable_image_is_422(client):
    garbage = base64.b64encode(b"definitely not an image").decode()
    r = client.post("/v1/ask", json={"question": "Is it?", "image": garbage})
    assert r.status_code == 422


def test_unknown_image_id_is_404(client):
    r = client.post("/v1/ask", json={"question": "Is it?", "image_id": "missing"})
    assert r.status_code == 404


def test_ask_with_uploaded_image(client):
    payload = {
        "question": "Is there an abnormality in this ct image?",
        "image": base64.b64encode(_png_bytes()).decode(),
    }
    r = client.post("/v1/ask", json=payload)
    assert r.status_code == 200
    body = r.json()
    assert set(body) == {"answer", "qtype", "margin", "step_confidences", "latency_ms"}
    assert body["qtype"] == "yes_no"
    assert body["answer"] in ("yes", "no")
    assert body["latency_ms"] >= 0.0


def test_ask_with_cached_feature(client):
    r = client.post(
        "/v1/ask", json={"question": "Where is the mass located?", "image_id": "known-image"}
    )
    assert r.status_code == 200
    body = r.json()
    assert body["qtype"] == "others"
    assert len(body["step_confidences"]) == 11


def test_identical_requests_identical_answers(client):
    payload = {
        "question": "What modality is this image?",
        "image": base64.b64encode(_png_bytes(3)).decode(),
    }
    a = client.post("/v1/ask", json=payload).json()
    b = client.post("/v1/ask", json=payload).json()
    for key in ("answer", "qtype", "margin", "step_confidences"):
        assert a[key] == b[key]

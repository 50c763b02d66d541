"""HTTP inference service over a trained checkpoint.

POST /v1/ask takes {"question": ..., "image": <base64> | "image_id": <cached
id>} and returns the decoded answer, the routed question type, the routing
margin and per-step confidences.  GET /v1/health reports 503 until the model
has been loaded.
"""

from __future__ import annotations

import base64
import io
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from ..corpus import QType
from ..vision import FeatureCache, extract_features, load_and_resize, resolve_backbone
from .pipeline import QTYPE_LABELS, VqaSystem


class InferenceEngine:
    """Checkpoint + backbone + feature cache behind a single ask() call.

    Feature extraction and the model forward pass are serialized with a
    lock; the loaded models themselves are immutable.
    """

    def __init__(self, system: VqaSystem, backbone=None, cache: FeatureCache | None = None):
        self.system = system
        self.backbone = backbone or resolve_backbone(system.config.backbone)
        self.cache = cache
        self._lock = threading.Lock()

    @classmethod
    def from_checkpoint(cls, checkpoint_dir, cache_dir=None) -> "InferenceEngine":
        system = VqaSystem.load(checkpoint_dir)
        cache = FeatureCache(cache_dir) if cache_dir else (
            FeatureCache(system.config.cache_dir) if system.config.cache_dir else None
        )
        return cls(system, cache=cache)

    def feature_for_image_bytes(self, raw: bytes) -> np.ndarray:
        try:
            with Image.open(io.BytesIO(raw)) as img:
                img = img.convert("RGB")
                if img.size != (299, 299):
                    img = img.resize((299, 299), Image.BILINEAR)
                arr = np.asarray(img, dtype=np.float32)
        except (UnidentifiedImageError, OSError) as exc:
            raise ValueError("undecodable image payload") from exc
        if self.backbone.normalization == "inception":
            arr = arr / 127.5 - 1.0
        return self.backbone.features(arr[np.newaxis, ...])[0]

    def ask(self, question: str, *, image_bytes: bytes | None = None,
            image_id: str | None = None) -> dict:
        start = time.perf_counter()
        with self._lock:
            if image_bytes is not None:
                vector = self.feature_for_image_bytes(image_bytes)
            else:
                if self.cache is None:
                    raise LookupError("no feature cache configured for image_id lookups")
                feat = self.cache.get(image_id, self.backbone.tag)
                if feat is None:
                    raise LookupError(f"no cached feature for image_id {image_id!r}")
                vector = feat.vector
            pred = self.system.predict_item(question, vector)
        if pred.qtype is QType.YES_NO and pred.yes_no_probs is not None:
            confidences = [float(max(pred.yes_no_probs))]
        else:
            confidences = [float(p.max()) for p in pred.step_distributions]
        return {
            "answer": pred.decoded_text,
            "qtype": QTYPE_LABELS.get(pred.qtype, "others"),
            "margin": pred.margin,
            "step_confidences": confidences,
            "latency_ms": (time.perf_counter() - start) * 1000.0,
        }


class AskRequest(BaseModel):
    question: str = ""
    image: str | None = None
    image_id: str | None = None


def create_app(engine: InferenceEngine | None = None, checkpoint_dir=None,
               cache_dir=None) -> FastAPI:
    @asynccontextmanager
    async def warm_up(app: FastAPI):
        if app.state.engine is None and app.state.checkpoint_dir is not None:
            app.state.engine = InferenceEngine.from_checkpoint(
                app.state.checkpoint_dir, cache_dir=app.state.cache_dir
            )
        yield

    app = FastAPI(title="medvqa inference service", lifespan=warm_up)
    app.state.engine = engine
    app.state.checkpoint_dir = checkpoint_dir
    app.state.cache_dir = cache_dir

    @app.exception_handler(RequestValidationError)
    async def malformed(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": "malformed request payload"})

    @app.get("/v1/health")
    def health():
        if app.state.engine is None:
            return JSONResponse(status_code=503, content={"status": "warming up"})
        system = app.state.engine.system
        return {
            "status": "ok",
            "mode": system.config.mode,
            "backbone_tag": app.state.engine.backbone.tag,
            "answer_vocab_size": system.answer_vocab.size,
        }

    @app.post("/v1/ask")
    def ask(payload: AskRequest):
        if app.state.engine is None:
            return JSONResponse(status_code=503, content={"error": "model not loaded yet"})
        if not payload.question.strip():
            return JSONResponse(status_code=400, content={"error": "question must be non-empty"})
        if payload.image is None and payload.image_id is None:
            return JSONResponse(
                status_code=400, content={"error": "provide image (base64) or image_id"}
            )
        image_bytes = None
        if payload.image is not None:
            try:
                image_bytes = base64.b64decode(payload.image, validate=True)
            except Exception:
                return JSONResponse(status_code=422, content={"error": "invalid base64 image"})
        try:
            return app.state.engine.ask(
                payload.question, image_bytes=image_bytes, image_id=payload.image_id
            )
        except ValueError:
            return JSONResponse(status_code=422, content={"error": "undecodable image"})
        except LookupError as exc:
            return JSONResponse(status_code=404, content={"error": str(exc)})

    return app


def serve(checkpoint_dir, *, host: str = "127.0.0.1", port: int = 8000, cache_dir=None) -> None:
    import uvicorn

    app = create_app(checkpoint_dir=checkpoint_dir, cache_dir=cache_dir)
    uvicorn.run(app, host=host, port=port)

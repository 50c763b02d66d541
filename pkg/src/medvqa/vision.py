"""Image feature extraction behind a pluggable backbone, plus a binary
feature cache.

Every backbone maps a batch of 299x299x3 images to 1000-dim vectors (the
activations of an ImageNet classifier's final fully connected layer, taken
pre-softmax).  A small deterministic convolutional backbone is provided so
the pipeline and tests run without pretrained weights; paper-scale runs plug
in an exported Inception-Resnet-v2 via the torchscript backbone spec.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import quote

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

IMAGE_SIZE = 299
FEATURE_DIM = 1000


class ImageReadError(ValueError):
    pass


class BackboneWeightsError(RuntimeError):
    pass


def load_and_resize(image_path, *, size: int = IMAGE_SIZE, normalize: str | None = "inception") -> np.ndarray:
    """Read an image file into a float32 (size, size, 3) array.

    Grayscale inputs are replicated across channels; resizing is bilinear
    and skipped when the file already matches.  ``normalize`` selects the
    backbone input convention: "inception" maps to [-1, 1], None keeps raw
    0..255 values.
    """
    path = Path(image_path)
    try:
        with Image.open(path) as img:
            img = img.convert("RGB")
            if img.size != (size, size):
                img = img.resize((size, size), Image.BILINEAR)
            arr = np.asarray(img, dtype=np.float32)
    except (UnidentifiedImageError, OSError) as exc:
        raise ImageReadError(f"cannot read image file: {path}") from exc
    if normalize is None:
        return arr
    if normalize == "inception":
        return arr / 127.5 - 1.0
    raise ValueError(f"unknown normalization: {normalize}")


@dataclass(frozen=True)
class ImageFeature:
    image_id: str
    vector: np.ndarray
    backbone_tag: str

    def __post_init__(self):
        if self.vector.shape != (FEATURE_DIM,):
            raise ValueError(f"feature vector must be {FEATURE_DIM}-dim, got {self.vector.shape}")
        if not np.isfinite(self.vector).all():
            raise ValueError("feature vector contains non-finite values")


class TinyConvBackbone:
    """Deterministic seeded CNN with a 1000-way final layer.

    Not ImageNet-trained; it exists so feature shapes, caching and training
    run end to end on any machine.
    """

    normalization = "inception"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.tag = f"tiny-conv/seed{seed}:logits"
        gen = torch.Generator().manual_seed(seed)
        self._net = torch.nn.Sequential(
            torch.nn.Conv2d(3, 8, kernel_size=5, stride=4),
            torch.nn.ReLU(),
            torch.nn.Conv2d(8, 16, kernel_size=5, stride=4),
            torch.nn.ReLU(),
            torch.nn.AdaptiveAvgPool2d(4),
            torch.nn.Flatten(),
            torch.nn.Linear(16 * 16, FEATURE_DIM),
        )
        with torch.no_grad():
            for p in self._net.parameters():
                p.copy_(torch.empty_like(p).normal_(0.0, 0.25, generator=gen))
        self._net.eval()

    def features(self, batch: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
        x = x.permute(0, 3, 1, 2)
        with torch.no_grad():
            out = self._net(x)
        return out.numpy().astype(np.float32)


class TorchscriptBackbone:
    """Wraps an exported classifier (e.g. Inception-Resnet-v2 with ImageNet
    weights) stored as a TorchScript file producing 1000-dim pre-softmax
    outputs for (B, 3, 299, 299) input."""

    normalization = "inception"

    def __init__(self, tag: str, weights_path):
        path = Path(weights_path)
        if not path.is_file():
            raise BackboneWeightsError(
                f"backbone weights not found at {path}; export the pretrained "
                f"classifier to TorchScript and pass its path in the backbone "
                f"spec, e.g. torchscript:{tag}:/path/to/model.pt"
            )
        self.tag = tag
        self._net = torch.jit.load(str(path), map_location="cpu")
        self._net.eval()

    def features(self, batch: np.ndarray) -> np.ndarray:
        x = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
        x = x.permute(0, 3, 1, 2)
        with torch.no_grad():
            out = self._net(x)
        out = out.numpy().astype(np.float32)
        if out.shape[1] != FEATURE_DIM:
            raise ValueError(f"backbone produced {out.shape[1]}-dim output, expected {FEATURE_DIM}")
        return out


def resolve_backbone(spec: str):
    """Build a backbone from a spec string.

    Accepted forms: "tiny", "tiny:<seed>", "torchscript:<tag>:<path>".
    """
    if spec == "tiny":
        return TinyConvBackbone()
    if spec.startswith("tiny:"):
        return TinyConvBackbone(seed=int(spec.split(":", 1)[1]))
    if spec.startswith("torchscript:"):
        _, tag, path = spec.split(":", 2)
        return TorchscriptBackbone(tag, path)
    raise ValueError(f"unknown backbone spec: {spec}")


def extract_features(image: np.ndarray, backbone, *, image_id: str = "") -> ImageFeature:
    """Run one preprocessed image through the backbone."""
    vec = backbone.features(image[np.newaxis, ...])[0]
    return ImageFeature(image_id=image_id, vector=vec, backbone_tag=backbone.tag)


class FeatureCache:
    """One little-endian float32 file per image plus a JSON manifest,
    laid out as <root>/<backbone_tag>/<image_id>.f32."""

    def __init__(self, root):
        self.root = Path(root)

    def _tag_dir(self, backbone_tag: str) -> Path:
        return self.root.joinpath(*backbone_tag.split("/"))

    def _entry_path(self, backbone_tag: str, image_id: str) -> Path:
        return self._tag_dir(backbone_tag) / (quote(image_id, safe="") + ".f32")

    def _manifest_path(self, backbone_tag: str) -> Path:
        return self._tag_dir(backbone_tag) / "manifest.json"

    def _load_manifest(self, backbone_tag: str) -> dict:
        path = self._manifest_path(backbone_tag)
        if path.is_file():
            return json.loads(path.read_text(encoding="utf-8"))
        return {"backbone_tag": backbone_tag, "dim": FEATURE_DIM, "entries": {}}

    def _atomic_write(self, path: Path, data: bytes) -> None:
        tmp = path.with_suffix(path.suffix + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, path)

    def put(self, feature: ImageFeature) -> None:
        data = feature.vector.astype("<f4").tobytes()
        path = self._entry_path(feature.backbone_tag, feature.image_id)
        if path.is_file() and path.read_bytes() == data:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        self._atomic_write(path, data)
        manifest = self._load_manifest(feature.backbone_tag)
        manifest["entries"][feature.image_id] = path.name
        self._atomic_write(
            self._manifest_path(feature.backbone_tag),
            json.dumps(manifest, sort_keys=True, indent=1).encode(),
        )

    def get(self, image_id: str, backbone_tag: str) -> ImageFeature | None:
        path = self._entry_path(backbone_tag, image_id)
        if not path.is_file():
            return None
        vec = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float32)
        return ImageFeature(image_id=image_id, vector=vec, backbone_tag=backbone_tag)


def extract_dataset_features(dataset, backbone, cache: FeatureCache, *, batch_size: int = 16) -> dict:
    """Extract (or fetch cached) features for every distinct image in a
    dataset; returns image_id -> ImageFeature."""
    out: dict[str, ImageFeature] = {}
    pending: list[tuple[str, str]] = []
    seen = set()
    for item in dataset:
        if item.image_id in seen:
            continue
        seen.add(item.image_id)
        cached = cache.get(item.image_id, backbone.tag)
        if cached is not None:
            out[item.image_id] = cached
        else:
            pending.append((item.image_id, item.image_path))
    for start in range(0, len(pending), batch_size):
        chunk = pending[start : start + batch_size]
        batch = np.stack(
            [load_and_resize(p, normalize=backbone.normalization) for _, p in chunk]
        )
        vecs = backbone.features(batch)
        for (image_id, _), vec in zip(chunk, vecs):
            feat = ImageFeature(image_id=image_id, vector=vec, backbone_tag=backbone.tag)
            cache.put(feat)
            out[image_id] = feat
    return out

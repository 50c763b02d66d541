"""Deterministic synthetic radiology QA corpora.

The real RAD and CLEF18 releases are licensed downloads and cannot ship with
this repository, so tests and demos run against generated stand-ins that
mirror the documented shapes: item counts, yes/no proportions per split,
question phrasing built around the same identifier words, and answers that
are deterministic functions of rendered image attributes (so the answer
heads have something learnable).  Loaders accept the real datasets through
the same entry points.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

ORGANS = ("lung", "liver", "spleen", "kidney", "brain", "heart", "pancreas", "bladder", "aorta", "colon")
MODALITIES = ("x-ray", "ct", "mri", "ultrasound", "angiogram", "pet scan")
PLANES = ("axial", "sagittal", "coronal", "pa", "ap", "longitudinal")
FINDINGS = ("mass", "lesion", "nodule", "fracture", "hemorrhage", "edema", "cyst", "tumor", "effusion", "opacity", "thickening", "calcification")
SIDES = ("left", "right", "upper", "lower", "bilateral")
ADJECTIVES = ("acute", "chronic", "diffuse", "focal", "prominent", "subtle", "enhancing", "irregular", "calcified", "nodular", "cystic", "hyperintense")
SEQUENCES = ("t1", "t2", "flair", "diffusion")

# Pinned out-of-GloVe words: the fixture writer never emits vectors for
# these, so sub-word coverage has something to prove.
EXCLUDED_FROM_GLOVE = ("hyperintensity", "periventricular", "thoraco")

IMAGE_SIZE = 64


@dataclass(frozen=True)
class SynthImage:
    image_id: str
    filename: str
    organ: str
    modality: str
    plane: str
    finding: str
    present: bool
    side: str


def _stable_seed(*parts) -> int:
    digest = hashlib.sha256(":".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def render_image(path, img: SynthImage) -> None:
    """Draw a small pattern whose geometry encodes the image attributes."""
    rng = np.random.default_rng(_stable_seed("pixels", img.image_id))
    base = 40 + MODALITIES.index(img.modality) * 30
    canvas = Image.new("L", (IMAGE_SIZE, IMAGE_SIZE), color=base)
    draw = ImageDraw.Draw(canvas)

    # plane -> stripe orientation and spacing
    p = PLANES.index(img.plane)
    spacing = 6 + 2 * (p % 3)
    stripe = base + 25
    if p < 3:
        for y in range(0, IMAGE_SIZE, spacing):
            draw.line([(0, y), (IMAGE_SIZE, y)], fill=stripe)
    else:
        for x in range(0, IMAGE_SIZE, spacing):
            draw.line([(x, 0), (x, IMAGE_SIZE)], fill=stripe)

    # organ -> central shape
    o = ORGANS.index(img.organ)
    half = 10 + o
    box = [32 - half, 32 - half, 32 + half, 32 + half]
    shade = 130 + 10 * (o % 5)
    if o % 3 == 0:
        draw.ellipse(box, outline=255, width=3, fill=shade)
    elif o % 3 == 1:
        draw.rectangle(box, outline=255, width=3, fill=shade)
    else:
        draw.polygon([(32, box[1]), (box[0], box[3]), (box[2], box[3])], outline=255, fill=shade)

    # finding -> bright blob whose position encodes the side
    if img.present:
        offsets = {"left": (-18, 0), "right": (18, 0), "upper": (0, -18), "lower": (0, 18), "bilateral": (0, 0)}
        dx, dy = offsets[img.side]
        f = FINDINGS.index(img.finding)
        r = 3 + f % 5
        cx, cy = 32 + dx, 32 + dy
        draw.ellipse([cx - r, cy - r, cx + r, cy + r], fill=235 - 8 * (f % 3))

    noise = rng.integers(-3, 4, size=(IMAGE_SIZE, IMAGE_SIZE), dtype=np.int16)
    arr = np.clip(np.asarray(canvas, dtype=np.int16) + noise, 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path)


def make_images(images_dir, n: int, *, prefix: str, seed: int) -> list[SynthImage]:
    images_dir = Path(images_dir)
    images_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        image_id = f"{prefix}_{i:05d}"
        img = SynthImage(
            image_id=image_id,
            filename=f"{image_id}.png",
            organ=ORGANS[rng.integers(len(ORGANS))],
            modality=MODALITIES[rng.integers(len(MODALITIES))],
            plane=PLANES[rng.integers(len(PLANES))],
            finding=FINDINGS[rng.integers(len(FINDINGS))],
            present=bool(rng.random() < 0.5),
            side=SIDES[rng.integers(len(SIDES))],
        )
        render_image(images_dir / img.filename, img)
        out.append(img)
    return out


def _other_than(value, pool, rng) -> str:
    choices = [v for v in pool if v != value]
    return choices[rng.integers(len(choices))]


# Half the organ pool reads as "visible" so presence questions about these
# organs have a question-determined answer, mirroring the strong per-phrasing
# answer priors of the real corpora.
VISIBLE_ORGANS = frozenset(ORGANS[:5])


def yes_no_qa(img: SynthImage, rng, *, style: str = "rad") -> tuple[str, str]:
    template = rng.integers(6)
    if template == 0:
        q = f"Is there an abnormality in this {img.modality} image?"
        a = "yes" if img.present else "no"
    elif template == 1:
        q = f"Is the {img.organ} normal?"
        a = "no" if img.present else "yes"
    elif template == 2:
        o = ORGANS[rng.integers(len(ORGANS))]
        q = f"Is the {o} visible in this image?"
        a = "yes" if o in VISIBLE_ORGANS else "no"
    elif template == 3:
        verb = "demonstrate" if style == "clef" else "show"
        q = f"Does the {img.modality} {verb} a {img.finding}?"
        a = "yes" if img.present else "no"
    elif template == 4:
        q = f"Are there any {img.finding}s present?"
        a = "yes" if img.present else "no"
    else:
        m = img.modality if rng.random() < 0.5 else _other_than(img.modality, MODALITIES, rng)
        q = f"Is this a {m} image?"
        a = "yes" if m == img.modality else "no"
    return q, a


def others_qa(img: SynthImage, rng, *, style: str = "rad") -> tuple[str, str]:
    template = rng.integers(13 if style == "rad" else 15)
    if template == 0:
        return "What modality is this image?", img.modality
    if template == 1:
        return "In what plane was this image taken?", f"{img.plane} plane"
    if template == 2:
        if img.present:
            return f"Where is the {img.finding} located?", f"in the {img.side} {img.organ}"
        return f"Where is the {img.finding} located?", "no abnormality seen"
    if template == 3:
        if img.present:
            adj = ADJECTIVES[rng.integers(len(ADJECTIVES))]
            return f"What does the {img.modality} show?", f"a {adj} {img.finding}"
        return f"What does the {img.modality} show?", f"normal {img.organ}"
    if template == 4:
        return "What organ is shown in this image?", f"the {img.organ}"
    if template == 5:
        return "Which side is affected?", f"the {img.side} side"
    if template == 6:
        return "How was this image taken?", img.modality
    if template == 7:
        return "What type of image is this?", img.modality
    if template == 8:
        # questions without a leading auxiliary still demand open answers
        if img.present:
            return (
                f"Evidence of {img.finding} in the {img.organ}?",
                f"in the {img.side} {img.organ}",
            )
        return f"Evidence of {img.finding} in the {img.organ}?", f"no evidence of {img.finding}"
    # or-choice questions mirror the yes/no phrasings but take open answers,
    # so an unrouted model has to resolve the answer type from content
    if template == 9:
        other = _other_than(img.modality, MODALITIES, rng)
        first, second = (img.modality, other) if rng.random() < 0.5 else (other, img.modality)
        return f"Is this a {first} or a {second} image?", img.modality
    if template == 10:
        return f"Are the {img.finding}s on the left or right side?", img.side
    if template == 11:
        verb = "demonstrate" if style == "clef" else "show"
        other = _other_than(img.finding, FINDINGS, rng)
        return f"Does the {img.modality} {verb} a {img.finding} or a {other}?", img.finding
    if template == 12:
        return "What protocol was used for this image?", "a routine imaging protocol scan"
    # CLEF-flavored long, semi-automatic style
    if template == 13:
        a1 = ADJECTIVES[rng.integers(len(ADJECTIVES))]
        a2 = ADJECTIVES[rng.integers(len(ADJECTIVES))]
        seq = SEQUENCES[rng.integers(len(SEQUENCES))]
        q = (
            f"what reveals {a1} {a2} {img.finding} in the {img.side} {img.organ} "
            f"and small areas of hyperintensity in the periventricular region on {seq} sequences?"
        )
        return q, f"{img.modality} of the {img.organ}"
    a1 = ADJECTIVES[rng.integers(len(ADJECTIVES))]
    q = f"what does the {img.modality} in {img.plane} plane show in the thoraco region?"
    return q, f"the {a1} {img.finding} in the {img.side} {img.organ}"


def _gen_items(images, n: int, yes_no_frac: float, style: str, rng) -> list[dict]:
    items = []
    for _ in range(n):
        img = images[rng.integers(len(images))]
        if rng.random() < yes_no_frac:
            q, a = yes_no_qa(img, rng, style=style)
        else:
            q, a = others_qa(img, rng, style=style)
        items.append({"image": img, "question": q, "answer": a})
    return items


def make_rad(out_dir, *, n_train: int = 3064, n_test: int = 451, n_images: int = 315,
             yes_no_frac: float = 0.53, seed: int = 7) -> dict:
    """RAD-style workspace: JSON arrays plus a shared image pool."""
    out_dir = Path(out_dir)
    images = make_images(out_dir / "images", n_images, prefix="rad", seed=seed)
    rng = np.random.default_rng(_stable_seed("rad-items", seed))
    paths = {}
    for split, n in (("train", n_train), ("test", n_test)):
        records = [
            {
                "image": f"images/{it['image'].filename}",
                "question": it["question"],
                "answer": it["answer"],
            }
            for it in _gen_items(images, n, yes_no_frac, "rad", rng)
        ]
        path = out_dir / f"{split}.json"
        path.write_text(json.dumps(records, indent=1), encoding="utf-8")
        paths[split] = path
    paths["images_dir"] = out_dir / "images"
    return paths


def make_clef(out_dir, *, n_train: int = 5413, n_val: int = 500, n_test: int = 500,
              n_images: int = 400, seed: int = 11) -> dict:
    """CLEF18-style workspace: tab-delimited rows plus a shared image pool."""
    out_dir = Path(out_dir)
    images = make_images(out_dir / "images", n_images, prefix="clef", seed=seed)
    rng = np.random.default_rng(_stable_seed("clef-items", seed))
    fractions = {"train": 0.006, "val": 0.06, "test": 0.10}
    sizes = {"train": n_train, "val": n_val, "test": n_test}
    paths = {}
    for split in ("train", "val", "test"):
        rows = []
        for it in _gen_items(images, sizes[split], fractions[split], "clef", rng):
            rows.append(f"{it['image'].image_id}\t{it['question']}\t{it['answer']}")
        path = out_dir / f"{split}.tsv"
        path.write_text("\n".join(rows) + "\n", encoding="utf-8")
        paths[split] = path
    paths["images_dir"] = out_dir / "images"
    return paths


def write_glove(path, words, *, dim: int = 300, seed: int = 3,
                exclude=EXCLUDED_FROM_GLOVE, coverage: float = 1.0) -> list[str]:
    """Write a GloVe-format fixture covering ``words``; returns covered words.

    ``coverage`` < 1 drops a deterministic hash-based subset, and ``exclude``
    is always dropped, so out-of-vocabulary paths stay testable.
    """
    covered = []
    lines = []
    for w in sorted(set(words)):
        if w in exclude:
            continue
        if coverage < 1.0 and (_stable_seed("cover", w) % 1000) / 1000.0 >= coverage:
            continue
        rng = np.random.default_rng(_stable_seed("glove", seed, w))
        vec = rng.standard_normal(dim) * 0.3
        lines.append(w + " " + " ".join(f"{x:.5f}" for x in vec))
        covered.append(w)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return covered


def corpus_words(*dataset_paths) -> set:
    """All whitespace/alphanumeric tokens in generated question/answer files."""
    import re

    words = set()
    for p in dataset_paths:
        text = Path(p).read_text(encoding="utf-8")
        words.update(re.findall(r"[a-z0-9]+", text.lower()))
    return words

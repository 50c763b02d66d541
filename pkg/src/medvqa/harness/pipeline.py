"""End-to-end orchestration: dataset selection, question-type classifier
experiments, answer-model training, prediction and evaluation reports.

A trained system is persisted as a checkpoint directory (weight arrays in
.npz files with shape metadata, vocabularies and classifier state as JSON,
plus a config snapshot) that is sufficient on its own to reproduce
inference.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .. import corpus, fusion, metrics, routing
from ..corpus import Dataset, QAItem, QType, Source, Split
from ..taxonomy import Taxonomy, bundled_taxonomy
from ..text_features import (
    SubwordVectors,
    Vocab,
    build_embedding_table,
    build_vocab,
    encode,
    load_glove,
    preprocess_answer,
    preprocess_question,
)
from ..vision import FeatureCache, extract_dataset_features, resolve_backbone
from .config import MODE_WITH_QS, MODE_WITHOUT_QS, RunConfig

QTYPE_LABELS = {QType.YES_NO: "yes_no", QType.OTHERS: "others"}


def load_split(config: RunConfig, dataset: str, split: str) -> Dataset:
    """Resolve a (dataset, split) pair from the config's file paths."""
    split_enum = {"train": Split.TRAIN, "val": Split.VALIDATION, "test": Split.TEST}[split]
    if dataset == "rad":
        path = {"train": config.rad_train, "test": config.rad_test}.get(split)
        if path is None:
            raise ValueError(f"config has no RAD path for split {split}")
        return corpus.load_dataset(path, "RAD_JSON", split_enum, source=Source.RAD, name=f"rad-{split}")
    if dataset == "clef18":
        path = {"train": config.clef_train, "val": config.clef_val, "test": config.clef_test}.get(split)
        if path is None:
            raise ValueError(f"config has no CLEF18 path for split {split}")
        return corpus.load_dataset(
            path,
            "CLEF18_DELIMITED",
            split_enum,
            source=Source.CLEF18,
            image_root=config.clef_images,
            name=f"clef18-{split}",
        )
    if dataset == "combined":
        return corpus.merge(load_split(config, "clef18", split), load_split(config, "rad", split))
    raise ValueError(f"unknown dataset name: {dataset}")


# ---------------------------------------------------------------------------
# question-type classifier experiment (Table-5-style report)
# ---------------------------------------------------------------------------


def run_qs_experiment(config: RunConfig, dataset: str) -> tuple[routing.SvmModel, dict]:
    """Train the router on the train split and score it on the test split."""
    train = corpus.with_derived_qtypes(load_split(config, dataset, "train"))
    test = corpus.with_derived_qtypes(load_split(config, dataset, "test"))
    model = routing.train_router(
        [it.question for it in train],
        [it.qtype for it in train],
        top_k=config.qs_top_k,
        idf_mode=config.qs_idf_mode,
        config=routing.SvmConfig(
            c=config.qs_c, epochs=config.qs_epochs, seed=config.derived_seed("qs")
        ),
    )
    gold = [QTYPE_LABELS[it.qtype] for it in test]
    pred = [QTYPE_LABELS[routing.predict_qtype(model, it.question)[0]] for it in test]
    classes = ["yes_no", "others"]
    per_class = metrics.prf_per_class(gold, pred, classes)
    macro = metrics.macro_prf(gold, pred, classes)
    weighted = metrics.weighted_prf(gold, pred, classes)
    report = {
        "dataset": dataset,
        "n_train": len(train),
        "n_test": len(test),
        "train_hinge_loss": model.train_hinge_loss,
        "classes": {
            c: {"precision": v[0], "recall": v[1], "f1": v[2], "support": v[3]}
            for c, v in per_class.items()
        },
        "macro": {"precision": macro[0], "recall": macro[1], "f1": macro[2]},
        # Support-weighted figures correspond to the "overall" column of the
        # usual question-type tables.
        "overall": {"precision": weighted[0], "recall": weighted[1], "f1": weighted[2]},
    }
    return model, report


# ---------------------------------------------------------------------------
# tensors
# ---------------------------------------------------------------------------


def encode_questions(items, vocab: Vocab, length: int) -> torch.Tensor:
    rows = [encode(preprocess_question(it.question), vocab, length) for it in items]
    return torch.tensor(rows, dtype=torch.long)


def encode_answers_open(items, vocab: Vocab, length: int) -> torch.Tensor:
    rows = [encode(preprocess_answer(it.answer), vocab, length) for it in items]
    ids = torch.tensor(rows, dtype=torch.long)
    return fusion.one_hot(ids, vocab.size)


def encode_answers_yes_no(items) -> torch.Tensor:
    rows = []
    for it in items:
        norm = corpus.normalize_answer(it.answer)
        rows.append([1.0, 0.0] if norm == "yes" else [0.0, 1.0])
    return torch.tensor(rows, dtype=torch.float32)


def image_matrix(items, features: dict) -> torch.Tensor:
    return torch.tensor(
        np.stack([features[it.image_id].vector for it in items]), dtype=torch.float32
    )


# ---------------------------------------------------------------------------
# the trained system
# ---------------------------------------------------------------------------


@dataclass
class VqaSystem:
    config: RunConfig
    question_vocab: Vocab
    answer_vocab: Vocab
    qs_model: routing.SvmModel | None
    yes_no_model: fusion.YesNoModel | None
    others_model: fusion.OthersModel
    backbone_tag: str

    def route(self, question: str) -> tuple[QType, float]:
        if self.config.mode == MODE_WITHOUT_QS or self.qs_model is None:
            return QType.OTHERS, 0.0
        return routing.predict_qtype(self.qs_model, question)

    def predict_item(self, question: str, image_vector: np.ndarray) -> fusion.AnswerPrediction:
        qtype, margin = self.route(question)
        ids = torch.tensor(
            [encode(preprocess_question(question), self.question_vocab, self.config.net.question_len)],
            dtype=torch.long,
        )
        img = torch.tensor(image_vector[np.newaxis, :], dtype=torch.float32)
        if qtype is QType.YES_NO and self.yes_no_model is not None:
            probs = fusion.predict_yes_no(self.yes_no_model, ids, img)[0].numpy()
            return fusion.AnswerPrediction(
                qtype=qtype,
                decoded_text=fusion.decode_yes_no(probs),
                yes_no_probs=probs,
                margin=margin,
            )
        probs = fusion.predict_others(self.others_model, ids, img)[0].numpy()
        return fusion.AnswerPrediction(
            qtype=qtype,
            decoded_text=fusion.decode_others(probs, self.answer_vocab),
            step_distributions=probs,
            margin=margin,
        )

    def predict_dataset(self, dataset: Dataset, features: dict) -> list[fusion.AnswerPrediction]:
        return [
            self.predict_item(it.question, features[it.image_id].vector) for it in dataset
        ]

    # -- persistence -------------------------------------------------------

    def save(self, out_dir) -> None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        snapshot = self.config.to_dict()
        snapshot["backbone_tag"] = self.backbone_tag
        snapshot["answer_vocab_size"] = self.answer_vocab.size
        (out_dir / "config.json").write_text(
            json.dumps(snapshot, sort_keys=True, indent=1), encoding="utf-8"
        )
        (out_dir / "question_vocab.json").write_text(
            json.dumps(self.question_vocab.to_dict()), encoding="utf-8"
        )
        (out_dir / "answer_vocab.json").write_text(
            json.dumps(self.answer_vocab.to_dict()), encoding="utf-8"
        )
        if self.qs_model is not None:
            self.qs_model.save(out_dir / "qs_model.json")
        if self.yes_no_model is not None:
            fusion.save_model_npz(self.yes_no_model, out_dir / "yes_no.npz")
        fusion.save_model_npz(self.others_model, out_dir / "others.npz")

    @classmethod
    def load(cls, checkpoint_dir) -> "VqaSystem":
        checkpoint_dir = Path(checkpoint_dir)
        snapshot = json.loads((checkpoint_dir / "config.json").read_text(encoding="utf-8"))
        config = RunConfig.from_dict(snapshot)
        question_vocab = Vocab.from_dict(
            json.loads((checkpoint_dir / "question_vocab.json").read_text(encoding="utf-8"))
        )
        answer_vocab = Vocab.from_dict(
            json.loads((checkpoint_dir / "answer_vocab.json").read_text(encoding="utf-8"))
        )
        embed_dim = config.glove_dim + config.subword_dim
        zeros = np.zeros((question_vocab.size, embed_dim), dtype=np.float32)
        qs_model = None
        qs_path = checkpoint_dir / "qs_model.json"
        if qs_path.is_file():
            qs_model = routing.SvmModel.load(qs_path)
        yes_no_model = None
        yes_no_path = checkpoint_dir / "yes_no.npz"
        if yes_no_path.is_file():
            yes_no_model = fusion.YesNoModel(zeros, config.net)
            fusion.load_model_npz(yes_no_model, yes_no_path)
            yes_no_model.eval()
        others_model = fusion.OthersModel(zeros, config.net, answer_vocab.size)
        fusion.load_model_npz(others_model, checkpoint_dir / "others.npz")
        others_model.eval()
        return cls(
            config=config,
            question_vocab=question_vocab,
            answer_vocab=answer_vocab,
            qs_model=qs_model,
            yes_no_model=yes_no_model,
            others_model=others_model,
            backbone_tag=snapshot.get("backbone_tag", config.backbone),
        )


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


def build_embedding(config: RunConfig, question_vocab: Vocab) -> np.ndarray:
    if config.glove_path is None:
        raise ValueError("config.glove_path is required to build embeddings")
    words = question_vocab.words() + ["unk", "num", "pos"]
    glove = load_glove(config.glove_path, dim=config.glove_dim, restrict_to=words)
    if config.subword_path:
        subword = SubwordVectors.from_file(config.subword_path, dim=config.subword_dim)
    else:
        subword = SubwordVectors(dim=config.subword_dim, seed=config.derived_seed("subword"))
    return build_embedding_table(question_vocab, glove, subword, glove_dim=config.glove_dim)


def extract_features_for(config: RunConfig, datasets, cache_dir=None) -> tuple[dict, str]:
    backbone = resolve_backbone(config.backbone)
    cache = FeatureCache(cache_dir or config.cache_dir or ".feature_cache")
    features: dict = {}
    for ds in datasets:
        features.update(extract_dataset_features(ds, backbone, cache))
    return features, backbone.tag


def train_system(config: RunConfig, train_set: Dataset, features: dict,
                 backbone_tag: str, *, qs_model: routing.SvmModel | None = None) -> "TrainingResult":
    """Train the leaf models for the configured mode.

    In hierarchical mode the two heads are trained on their gold-routed
    subsets and share no weights; without routing a single open-answer model
    covers the full answer vocabulary including "yes"/"no".
    """
    train_set = corpus.with_derived_qtypes(train_set)
    items = list(train_set)
    q_tokens_all = [preprocess_question(it.question) for it in items]
    question_vocab = build_vocab(q_tokens_all, config.question_vocab_size)
    table = build_embedding(config, question_vocab)
    logs: dict[str, list] = {}

    if config.mode == MODE_WITH_QS:
        if qs_model is None:
            qs_model = routing.train_router(
                [it.question for it in items],
                [it.qtype for it in items],
                top_k=config.qs_top_k,
                idf_mode=config.qs_idf_mode,
                config=routing.SvmConfig(
                    c=config.qs_c, epochs=config.qs_epochs, seed=config.derived_seed("qs")
                ),
            )
        yes_no_items = [it for it in items if it.qtype is QType.YES_NO]
        others_items = [it for it in items if it.qtype is QType.OTHERS]
        if not yes_no_items:
            raise ValueError("empty yes/no route in training data")
        if not others_items:
            raise ValueError("empty open-answer route in training data")

        answer_vocab = build_vocab(
            [preprocess_answer(it.answer) for it in others_items], max_size=None
        )

        torch.manual_seed(config.derived_seed("yes_no_init"))
        yn_cfg = fusion.NetConfig(**{**config.net.to_dict(), "seed": config.derived_seed("yes_no_fit")})
        yes_no_model = fusion.YesNoModel(table, yn_cfg)
        logs["yes_no"] = fusion.fit(
            yes_no_model,
            encode_questions(yes_no_items, question_vocab, yn_cfg.question_len),
            image_matrix(yes_no_items, features),
            encode_answers_yes_no(yes_no_items),
            yn_cfg,
        )

        torch.manual_seed(config.derived_seed("others_init"))
        ot_cfg = fusion.NetConfig(**{**config.net.to_dict(), "seed": config.derived_seed("others_fit")})
        others_model = fusion.OthersModel(table, ot_cfg, answer_vocab.size)
        others_targets = encode_answers_open(others_items, answer_vocab, ot_cfg.answer_len)
        fusion.init_output_bias_from_targets(others_model, others_targets)
        logs["others"] = fusion.fit(
            others_model,
            encode_questions(others_items, question_vocab, ot_cfg.question_len),
            image_matrix(others_items, features),
            others_targets,
            ot_cfg,
        )
    else:
        if not items:
            raise ValueError("empty training data")
        answer_vocab = build_vocab([preprocess_answer(it.answer) for it in items], max_size=None)
        qs_model = None
        yes_no_model = None
        torch.manual_seed(config.derived_seed("others_init"))
        ot_cfg = fusion.NetConfig(**{**config.net.to_dict(), "seed": config.derived_seed("others_fit")})
        others_model = fusion.OthersModel(table, ot_cfg, answer_vocab.size)
        all_targets = encode_answers_open(items, answer_vocab, ot_cfg.answer_len)
        fusion.init_output_bias_from_targets(others_model, all_targets)
        logs["others"] = fusion.fit(
            others_model,
            encode_questions(items, question_vocab, ot_cfg.question_len),
            image_matrix(items, features),
            all_targets,
            ot_cfg,
        )

    system = VqaSystem(
        config=config,
        question_vocab=question_vocab,
        answer_vocab=answer_vocab,
        qs_model=qs_model,
        yes_no_model=yes_no_model,
        others_model=others_model,
        backbone_tag=backbone_tag,
    )
    return TrainingResult(system=system, logs=logs)


@dataclass
class TrainingResult:
    system: VqaSystem
    logs: dict

    def log_dict(self) -> dict:
        return {
            head: [
                {"epoch": e.epoch, "loss": e.loss, "categorical_accuracy": e.categorical_accuracy}
                for e in entries
            ]
            for head, entries in self.logs.items()
        }


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def evaluate_split(system: VqaSystem, test_set: Dataset, features: dict,
                   taxonomy: Taxonomy | None = None) -> dict:
    """Score predictions against references, split by gold question type."""
    predictions = system.predict_dataset(test_set, features)
    taxonomy = taxonomy or (
        Taxonomy.load(system.config.wordnet_dir) if system.config.wordnet_dir else bundled_taxonomy()
    )
    pred_texts = [p.decoded_text for p in predictions]
    refs = [it.answer for it in test_set]
    gold_types = [corpus.derive_qtype(it.answer) if it.answer.strip() else QType.OTHERS for it in test_set]

    report: dict = {"n_items": len(test_set)}
    groups = {
        "yes_no": [i for i, t in enumerate(gold_types) if t is QType.YES_NO],
        "others": [i for i, t in enumerate(gold_types) if t is QType.OTHERS],
        "overall": list(range(len(test_set))),
    }
    for label, idx in groups.items():
        if not idx:
            report[label] = None
            continue
        report[label] = metrics.evaluate_answers(
            [pred_texts[i] for i in idx], [refs[i] for i in idx], taxonomy
        ).to_dict()
    return report


def write_predictions(path, dataset: Dataset, predictions) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, (item, pred) in enumerate(zip(dataset, predictions)):
            fh.write(
                json.dumps(
                    {
                        "qa_id": f"{item.source.value}_{i:05d}",
                        "prediction": pred.decoded_text,
                        "qtype": QTYPE_LABELS.get(pred.qtype, "others"),
                        "margin": pred.margin,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def write_references(path, dataset: Dataset) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for i, item in enumerate(dataset):
            fh.write(
                json.dumps(
                    {"qa_id": f"{item.source.value}_{i:05d}", "reference": item.answer},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_jsonl_field(path, field: str) -> dict:
    out = {}
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out[rec["qa_id"]] = rec[field]
    return out


def evaluate_files(predictions_path, references_path, taxonomy: Taxonomy | None = None) -> dict:
    """Score a predictions JSONL against a references JSONL by qa_id."""
    preds = read_jsonl_field(predictions_path, "prediction")
    refs = read_jsonl_field(references_path, "reference")
    ids = sorted(refs)
    missing = [i for i in ids if i not in preds]
    if missing:
        raise ValueError(f"predictions missing for {len(missing)} ids, e.g. {missing[0]}")
    report = metrics.evaluate_answers([preds[i] for i in ids], [refs[i] for i in ids], taxonomy)
    return {"overall": report.to_dict(), "n_items": len(ids)}


# ---------------------------------------------------------------------------
# ablation
# ---------------------------------------------------------------------------


def run_ablation(config: RunConfig, dataset: str, *, seeds=None, cache_dir=None) -> dict:
    """Paired runs that differ only in routing; features and splits are
    extracted once and shared byte-for-byte."""
    seeds = list(seeds) if seeds is not None else [config.seed]
    train_set = load_split(config, dataset, "train")
    test_set = load_split(config, dataset, "test")
    features, tag = extract_features_for(config, [train_set, test_set], cache_dir)

    results: dict = {"dataset": dataset, "seeds": seeds, "runs": []}
    for seed in seeds:
        row = {"seed": seed}
        for mode in (MODE_WITH_QS, MODE_WITHOUT_QS):
            cfg = RunConfig.from_dict({**config.to_dict(), "seed": seed, "mode": mode})
            trained = train_system(cfg, train_set, features, tag)
            report = evaluate_split(trained.system, test_set, features)
            row[mode] = report
        results["runs"].append(row)

    def mean_overall(mode):
        vals = [r[mode]["overall"]["bleu"] for r in results["runs"] if r[mode]["overall"]]
        return sum(vals) / len(vals)

    results["mean_overall_bleu"] = {
        MODE_WITH_QS: mean_overall(MODE_WITH_QS),
        MODE_WITHOUT_QS: mean_overall(MODE_WITHOUT_QS),
    }
    results["delta_bleu"] = (
        results["mean_overall_bleu"][MODE_WITH_QS]
        - results["mean_overall_bleu"][MODE_WITHOUT_QS]
    )
    return results

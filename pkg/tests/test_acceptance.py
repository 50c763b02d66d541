"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line with the measured value next to its threshold.

The canonical RAD/CLEF18 releases are licensed downloads, so these run
against the manifest-sized synthetic stand-ins (see medvqa.synthetic);
pointing the config paths at the real files runs the same code
unchanged.
"""

import json
import time

import numpy as np
import pytest
import torch

from medvqa import metrics, synthetic
from medvqa.corpus import QType, derive_qtype
from medvqa.fusion import (
    NetConfig,
    OthersModel,
    YesNoModel,
    fit,
    one_hot,
    others_loss,
    yes_no_loss,
)
from medvqa.harness import error_report, pipeline
from medvqa.harness.config import MODE_WITH_QS, MODE_WITHOUT_QS, RunConfig

from .conftest import small_run_config
from .oracles import brute_force_bleu, confusion_matrix_prf, finite_difference_grads


def _report(name, ok, detail):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def full_config(full_workspace):
    ws = full_workspace
    return RunConfig(
        rad_train=str(ws["rad"]["train"]),
        rad_test=str(ws["rad"]["test"]),
        clef_train=str(ws["clef"]["train"]),
        clef_val=str(ws["clef"]["val"]),
        clef_test=str(ws["clef"]["test"]),
        clef_images=str(ws["clef"]["images_dir"]),
        seed=0,
    )


def test_qs_reproduction_rad(full_config):
    start = time.perf_counter()
    _, report = pipeline.run_qs_experiment(full_config, "rad")
    elapsed = time.perf_counter() - start
    macro = report["macro"]
    ok = (
        macro["precision"] >= 0.95
        and macro["recall"] >= 0.95
        and macro["f1"] >= 0.95
        and elapsed < 120.0
    )
    _report(
        "QS reproduction (RAD)",
        ok,
        f"macro P/R/F1 = {macro['precision']:.3f}/{macro['recall']:.3f}/{macro['f1']:.3f} "
        f"(>= 0.95 each), runtime {elapsed:.1f}s (< 120s)",
    )


def test_qs_clef18(full_config):
    _, report = pipeline.run_qs_experiment(full_config, "clef18")
    others_recall = report["classes"]["others"]["recall"]
    overall_f1 = report["overall"]["f1"]
    yes_no_recall = report["classes"]["yes_no"]["recall"]
    ok = others_recall >= 0.95 and overall_f1 >= 0.85
    _report(
        "QS on CLEF18",
        ok,
        f"others recall {others_recall:.3f} (>= 0.95), overall F1 {overall_f1:.3f} (>= 0.85); "
        f"yes/no recall {yes_no_recall:.3f} reported, not asserted",
    )


def test_metric_oracles():
    vocab = ["yes", "no", "right", "left", "lobe", "lung", "mass", "axial", "mri", "ct", "scan"]
    rng = np.random.default_rng(42)
    worst = 0.0
    n_corpora = 24
    for k in range(n_corpora):
        cands, refs = [], []
        for _ in range(1 + k % 6):
            cands.append(list(rng.choice(vocab, size=rng.integers(0, 8))))
            refs.append(list(rng.choice(vocab, size=rng.integers(1, 8))))
        worst = max(worst, abs(metrics.bleu(cands, refs) - brute_force_bleu(cands, refs)))
    bleu_ok = worst <= 1e-9

    prf_ok = True
    classes = ["a", "b", "c"]
    for k in range(10):
        gold = [classes[i] for i in rng.integers(3, size=40)]
        pred = [classes[i] for i in rng.integers(3, size=40)]
        _, macro = confusion_matrix_prf(gold, pred, classes)
        got = metrics.macro_prf(gold, pred, classes)
        prf_ok = prf_ok and got == pytest.approx(macro, abs=0)
        acc = metrics.accuracy(gold, pred, preprocess=False)
        want_acc = sum(g == p for g, p in zip(gold, pred)) / len(gold)
        prf_ok = prf_ok and acc == want_acc

    _report(
        "Metric oracles",
        bleu_ok and prf_ok,
        f"BLEU max |diff| {worst:.2e} over {n_corpora} corpora (<= 1e-9); "
        f"macro P/R/F1 and accuracy match confusion-matrix oracle exactly: {prf_ok}",
    )


def test_gradient_correctness():
    start = time.perf_counter()
    worst = 0.0
    for kind in ("yes_no", "others"):
        torch.manual_seed(7)
        config = NetConfig(question_len=5, answer_len=3, lstm_hidden=4, others_hidden=6,
                           image_dim=8, dropout=0.0, seed=7, freeze_embeddings=False)
        rng = np.random.default_rng(13)
        table = rng.normal(0, 0.3, size=(10, 12)).astype(np.float32)
        table[0] = 0.0
        if kind == "yes_no":
            model = YesNoModel(table, config).double()
            targets = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
            loss_fn = yes_no_loss
        else:
            model = OthersModel(table, config, answer_vocab_size=7).double()
            targets = one_hot(torch.tensor([[4, 5, 0], [6, 0, 0]]), 7).double()
            loss_fn = others_loss
        ids = torch.tensor(rng.integers(4, 10, size=(2, 5)), dtype=torch.long)
        img = torch.tensor(rng.normal(size=(2, 8)), dtype=torch.float64)
        model.train()

        def loss():
            return loss_fn(targets, torch.softmax(model(ids, img), dim=-1)).mean()

        params = [p for p in model.parameters() if p.requires_grad]
        model.zero_grad()
        loss().backward()
        analytic = [p.grad.clone() for p in params]
        numeric = finite_difference_grads(loss, params)
        for a, n in zip(analytic, numeric):
            denom = torch.clamp(torch.maximum(a.abs(), n.abs()), min=1e-6)
            worst = max(worst, float(((a - n).abs() / denom).max()))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-4 and elapsed < 60.0
    _report(
        "Gradient correctness",
        ok,
        f"max relative error {worst:.2e} (<= 1e-4) across both losses, runtime {elapsed:.1f}s (< 60s)",
    )


def test_overfit_sanity(full_workspace, tmp_path):
    start = time.perf_counter()
    ws = full_workspace
    cfg = RunConfig(
        rad_train=str(ws["rad"]["train"]),
        rad_test=str(ws["rad"]["test"]),
        cache_dir=str(tmp_path / "cache"),
        seed=0,
    )
    train = pipeline.load_split(cfg, "rad", "train")
    subset_items = [it for it in train if derive_qtype(it.answer) is QType.OTHERS][:32]
    subset = type(train)(items=tuple(subset_items), split=train.split, name="overfit-32")

    glove_path = tmp_path / "glove300.txt"
    words = {t for it in subset for t in it.question.lower().split()}
    synthetic.write_glove(glove_path, {w.strip("?") for w in words}, dim=300, seed=3)
    cfg.glove_path = str(glove_path)

    features, tag = pipeline.extract_features_for(cfg, [subset])

    from medvqa.text_features import build_vocab, preprocess_answer, preprocess_question

    question_vocab = build_vocab([preprocess_question(it.question) for it in subset], 1050)
    answer_vocab = build_vocab([preprocess_answer(it.answer) for it in subset], None)
    table = pipeline.build_embedding(cfg, question_vocab)

    net = NetConfig(epochs=200, batch_size=32, dropout=0.0, lr=1e-3, seed=0)
    torch.manual_seed(0)
    model = OthersModel(table, net, answer_vocab.size)
    history = fit(
        model,
        pipeline.encode_questions(subset, question_vocab, net.question_len),
        pipeline.image_matrix(subset, features),
        pipeline.encode_answers_open(subset, answer_vocab, net.answer_len),
        net,
    )
    best = max(h.categorical_accuracy for h in history)
    elapsed = time.perf_counter() - start
    ok = best >= 0.95 and elapsed < 600.0
    _report(
        "Overfit sanity",
        ok,
        f"32-item per-token categorical accuracy peaked at {best:.3f} (>= 0.95) "
        f"within {len(history)} epochs, runtime {elapsed:.0f}s (< 600s)",
    )


def test_qs_impact_ablation(small_workspace, tmp_path):
    cfg = small_run_config(small_workspace, epochs=50)
    cfg.cache_dir = str(tmp_path / "cache")
    results = pipeline.run_ablation(cfg, "rad", seeds=[0, 1, 2])
    mean_with = results["mean_overall_bleu"][MODE_WITH_QS]
    mean_without = results["mean_overall_bleu"][MODE_WITHOUT_QS]

    train = pipeline.load_split(cfg, "rad", "train")
    test = pipeline.load_split(cfg, "rad", "test")
    features, tag = pipeline.extract_features_for(cfg, [train, test])
    trained = pipeline.train_system(cfg, train, features, tag)
    routed = trained.system.predict_dataset(test, features)
    yn_routed = [p for p in routed if p.qtype is QType.YES_NO]
    restricted = all(p.decoded_text in ("yes", "no") for p in yn_routed)

    ok = mean_with >= mean_without and restricted
    _report(
        "QS-impact property (desk-scale ablation)",
        ok,
        f"mean overall BLEU with routing {mean_with:.3f} >= without {mean_without:.3f} "
        f"(3 seeds, 50 epochs); all {len(yn_routed)} yes/no-routed answers in {{yes,no}}: {restricted}",
    )


def test_determinism(small_workspace, tmp_path):
    def one_run(tag):
        cfg = small_run_config(small_workspace, epochs=4)
        cfg.cache_dir = str(tmp_path / f"cache_{tag}")
        train = pipeline.load_split(cfg, "rad", "train")
        test = pipeline.load_split(cfg, "rad", "test")
        features, backbone_tag = pipeline.extract_features_for(cfg, [train, test])
        result = pipeline.train_system(cfg, train, features, backbone_tag)
        report = pipeline.evaluate_split(result.system, test, features)
        return result.system.qs_model.to_json().encode(), report

    qs_a, rep_a = one_run("a")
    qs_b, rep_b = one_run("b")
    ok = qs_a == qs_b and rep_a == rep_b
    _report(
        "Determinism",
        ok,
        f"identical-seed runs: QS model bytes equal: {qs_a == qs_b}; "
        f"evaluation reports equal: {rep_a == rep_b}",
    )


def test_error_report_proportions(error_fixture_path):
    records = error_report.load_annotations(error_fixture_path)
    summary = error_report.aggregate(records)
    expected = {
        "modality_plane": 20.54,
        "semantic": 14.16,
        "specification": 16.48,
        "boundary_loss": 20.49,
        "miscellaneous": 28.33,
    }
    ok = summary["percentages"] == expected
    _report(
        "Error-report aggregation",
        ok,
        f"percentages {summary['percentages']} == published {expected}",
    )

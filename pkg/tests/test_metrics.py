import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from medvqa.metrics import (
    EvalReport,
    accuracy,
    bleu,
    corpus_wbss,
    evaluate_answers,
    macro_prf,
    preprocess_for_eval,
    prf_per_class,
    wbss,
    weighted_prf,
)
from medvqa.taxonomy import Taxonomy, bundled_taxonomy

from .oracles import brute_force_bleu, confusion_matrix_prf


# -- preprocessing ----------------------------------------------------------


def test_preprocess_for_eval_goldens():
    assert preprocess_for_eval("The liver") == ["liver"]
    assert preprocess_for_eval("Yes.") == ["yes"]
    assert preprocess_for_eval("on the patient's left") == ["patient", "left"]


# -- bleu --------------------------------------------------------------------


def test_bleu_identity_long_candidate():
    tokens = ["right", "lower", "lobe", "lung", "field"]
    assert bleu([tokens], [tokens]) == pytest.approx(1.0)


def test_bleu_zero_when_an_included_order_has_no_match():
    cand = [["right", "lobe"]]
    ref = [["right", "lower", "lobe"]]
    # p1 = 2/2 but p2 = 0/1 -> geometric mean collapses to 0
    assert bleu(cand, ref) == 0.0


def test_bleu_brevity_penalty_path():
    cand = [["right", "lower"]]
    ref = [["right", "lower", "lobe"]]
    # p1 = p2 = 1, orders 3-4 skipped, BP = exp(1 - 3/2)
    assert bleu(cand, ref) == pytest.approx(math.exp(1 - 3 / 2), abs=1e-12)


def test_bleu_empty_corpus_is_an_error():
    with pytest.raises(ValueError):
        bleu([], [])


def test_bleu_both_sides_empty_tokens():
    assert bleu([[], []], [[], []]) == 1.0
    assert bleu([[]], [["liver"]]) == 0.0


def _random_corpora(seed, n_pairs, vocab, max_len):
    rng = np.random.default_rng(seed)
    cands, refs = [], []
    for _ in range(n_pairs):
        cands.append([vocab[i] for i in rng.integers(len(vocab), size=rng.integers(0, max_len))])
        refs.append([vocab[i] for i in rng.integers(len(vocab), size=rng.integers(1, max_len))])
    return cands, refs


def test_bleu_matches_brute_force_oracle_on_many_corpora():
    vocab = ["yes", "no", "right", "left", "lobe", "lung", "mass", "axial", "mri", "ct"]
    checked = 0
    for seed in range(25):
        cands, refs = _random_corpora(seed, n_pairs=1 + seed % 7, vocab=vocab, max_len=9)
        got = bleu(cands, refs)
        want = brute_force_bleu(cands, refs)
        assert got == pytest.approx(want, abs=1e-9), f"seed {seed}"
        checked += 1
    assert checked >= 20


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.lists(st.sampled_from("abcdef"), min_size=1, max_size=8),
        min_size=1,
        max_size=6,
    )
)
def test_bleu_identity_property(corpus):
    assert bleu(corpus, corpus) == pytest.approx(1.0)


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False))
def test_bleu_pair_permutation_invariance(rnd):
    cands, refs = _random_corpora(rnd.randrange(1000), 5, ["a", "b", "c", "d"], 6)
    pairs = list(zip(cands, refs))
    rnd.shuffle(pairs)
    shuffled_c, shuffled_r = zip(*pairs)
    assert bleu(list(shuffled_c), list(shuffled_r)) == pytest.approx(bleu(cands, refs), abs=1e-12)


def test_bleu_monotonicity_spot_check():
    ref = [["right", "lower", "lobe", "lung"]]
    exact = bleu([["right", "lower", "lobe", "lung"]], ref)
    padded = bleu([["right", "lower", "lobe", "lung", "zzz"]], ref)
    assert padded <= exact


# -- wbss ---------------------------------------------------------------------


def test_wbss_identity_and_disjoint():
    assert wbss(["lung", "mass"], ["lung", "mass"]) == pytest.approx(1.0)
    assert wbss(["qqq"], ["zzz"]) == 0.0


def test_wbss_empty_rules():
    assert wbss([], []) == 1.0
    assert wbss([], ["lung"]) == 0.0
    assert wbss(["lung"], []) == 0.0


def test_wbss_taxonomy_golden_value():
    # lung depth 6, lobe depth 5, deepest shared subsumer depth 4
    expected = 2 * 4 / (6 + 5)
    assert bundled_taxonomy().wup("lung", "lobe") == pytest.approx(expected, abs=1e-12)
    assert wbss(["lung"], ["lobe"]) == pytest.approx(expected, abs=1e-12)
    assert 0.0 < wbss(["lung"], ["lobe"]) < 1.0


def test_wbss_multi_sense_takes_best_pair():
    # "mass" has a tissue-growth sense and an object-heap sense
    assert bundled_taxonomy().wup("mass", "lesion") == pytest.approx(10 / 12, abs=1e-12)


def test_wbss_exact_match_fallback_mixes_with_taxonomy():
    score = wbss(["lung", "qqq"], ["lobe", "qqq"])
    direction = (8 / 11 + 1.0) / 2
    assert score == pytest.approx(direction, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.sampled_from(["lung", "lobe", "mass", "qqq", "zzz"]), max_size=4),
    st.lists(st.sampled_from(["lung", "lobe", "mass", "qqq", "zzz"]), max_size=4),
)
def test_wbss_symmetry(a, b):
    assert wbss(a, b) == pytest.approx(wbss(b, a), abs=1e-12)


def test_corpus_wbss_averages_pairs():
    val = corpus_wbss([["lung"], ["qqq"]], [["lung"], ["zzz"]])
    assert val == pytest.approx(0.5)


# -- macro / accuracy ----------------------------------------------------------


def test_macro_prf_hand_example():
    gold = ["A", "A", "B", "B"]
    pred = ["A", "B", "B", "B"]
    p, r, f = macro_prf(gold, pred, classes=["A", "B"])
    assert p == pytest.approx(5 / 6)
    assert r == pytest.approx(3 / 4)
    assert f == pytest.approx(11 / 15)


def test_macro_prf_matches_confusion_matrix_oracle():
    rng = np.random.default_rng(0)
    classes = ["x", "y", "z"]
    for _ in range(10):
        gold = [classes[i] for i in rng.integers(3, size=30)]
        pred = [classes[i] for i in rng.integers(3, size=30)]
        _, macro = confusion_matrix_prf(gold, pred, classes)
        assert macro_prf(gold, pred, classes) == pytest.approx(macro)


def test_macro_perfect_and_errors():
    assert macro_prf(["A", "B"], ["A", "B"]) == (1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        macro_prf([], [])


def test_zero_support_class_contributes_zero():
    p, r, f = macro_prf(["A", "A"], ["A", "A"], classes=["A", "B"])
    assert (p, r, f) == (0.5, 0.5, 0.5)


def test_weighted_prf_weights_by_support():
    gold = ["A"] * 9 + ["B"]
    pred = ["A"] * 10
    _, _, f_macro = macro_prf(gold, pred, classes=["A", "B"])
    _, _, f_weighted = weighted_prf(gold, pred, classes=["A", "B"])
    per = prf_per_class(gold, pred, classes=["A", "B"])
    assert f_weighted == pytest.approx(0.9 * per["A"][2])
    assert f_weighted > f_macro


def test_accuracy_examples():
    assert accuracy(["yes", "no", "yes"], ["yes", "yes", "yes"]) == pytest.approx(2 / 3)
    assert accuracy(["a"], ["a"]) == 1.0
    assert accuracy(["a b"], ["c"]) == 0.0
    with pytest.raises(ValueError):
        accuracy([], [])


def test_accuracy_applies_eval_preprocessing():
    assert accuracy(["The liver."], ["liver"]) == 1.0


# -- report ---------------------------------------------------------------------


def test_eval_report_bounds():
    with pytest.raises(ValueError):
        EvalReport(bleu=1.2, wbss=0, macro_p=0, macro_r=0, macro_f1=0, accuracy=0)


def test_evaluate_answers_identity():
    rep = evaluate_answers(["right lobe", "yes"], ["right lobe", "yes"])
    assert rep.bleu == pytest.approx(1.0)
    assert rep.accuracy == 1.0
    assert rep.wbss == pytest.approx(1.0)
    assert rep.macro_f1 == 1.0
    assert rep.n_pairs == 2


def test_evaluate_report_round_trip():
    rep = evaluate_answers(["right lobe"], ["right lower lobe"])
    again = EvalReport.from_dict(rep.to_dict())
    assert again == rep

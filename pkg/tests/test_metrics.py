import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from derail.errors import (
    AllZeroDifferences,
    DegenerateRanks,
    EmptyReference,
    LengthMismatch,
    OutOfRange,
    SingleClass,
)
from derail.metrics import (
    SeverityThreshold,
    default_threshold,
    dichotomize,
    edit_distance,
    quadratic_weighted_kappa,
    roc_auc,
    spearman,
    wer_cer,
    wilcoxon_signed_rank,
)

from oracle_metrics import auc_pairs, levenshtein, spearman_midrank_pearson, wilcoxon_enumerated


@pytest.mark.parametrize("x,y,rho", [
    ([1, 2, 3], [10, 20, 30], 1.0),
    ([1, 2, 3], [3, 2, 1], -1.0),
])
def test_spearman_perfect(x, y, rho):
    assert spearman(x, y) == (rho, 0.0)


def test_spearman_ties():
    rho, p = spearman([1, 2, 2, 3], [1, 2, 3, 4])
    assert rho == pytest.approx(3 / math.sqrt(10), abs=1e-15)
    assert 0 < p < 1


def test_spearman_p_matches_scipy():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=40), rng.normal(size=40)
    ref = __import__("scipy").stats.spearmanr(x, y)
    rho, p = spearman(x, y)
    assert rho == pytest.approx(ref.statistic, abs=1e-12)
    assert p == pytest.approx(ref.pvalue, rel=1e-9)


def test_spearman_errors():
    with pytest.raises(LengthMismatch):
        spearman([1, 2, 3], [1, 2])
    with pytest.raises(DegenerateRanks):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateRanks):
        spearman([1, 2], [1, 2])


@pytest.mark.parametrize("labels,scores,auc", [
    ([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8], 0.75),
    ([0, 0, 1, 1], [0.1, 0.2, 0.3, 0.4], 1.0),
    ([0, 1, 0, 1], [0.5, 0.5, 0.5, 0.5], 0.5),
])
def test_auc(labels, scores, auc):
    assert roc_auc(labels, scores) == auc


def test_auc_single_class():
    with pytest.raises(SingleClass):
        roc_auc([1, 1], [0.1, 0.2])


def test_dichotomize():
    assert dichotomize([2.5, 3.0, 3.5], SeverityThreshold("TALD", 3)) == [False, True, True]
    assert dichotomize([0.74, 0.75], SeverityThreshold("TLI", 0.75)) == [False, True]
    assert dichotomize([], SeverityThreshold("TALD", 3)) == []


def test_thresholds():
    assert default_threshold("TALD").cutoff == 3.0
    assert default_threshold("TLI").cutoff == 0.75
    assert default_threshold("TLC").cutoff == 3.0
    assert default_threshold("synthetic") == SeverityThreshold("synthetic", 3.0)
    with pytest.raises(OutOfRange):
        SeverityThreshold("TLI", 3.0)


def test_qwk_cases():
    assert quadratic_weighted_kappa([0, 1, 2, 2], [0, 1, 2, 2], 3) == 1.0
    assert quadratic_weighted_kappa([0, 2], [2, 0], 3) == -1.0
    rng = np.random.default_rng(11)
    a, b = rng.integers(0, 5, 10_000), rng.integers(0, 5, 10_000)
    assert abs(quadratic_weighted_kappa(a, b, 5)) <= 0.05


def test_qwk_errors():
    with pytest.raises(LengthMismatch):
        quadratic_weighted_kappa([0], [0, 1], 3)
    with pytest.raises(OutOfRange):
        quadratic_weighted_kappa([0, 3], [0, 1], 3)


def test_wer_examples():
    assert wer_cer("the cat sat on the mat", "the cat sit on mat") == 2 / 6
    assert round(wer_cer("the cat sat on the mat", "the cat sit on mat"), 4) == 0.3333
    assert wer_cer("Hello, world!", "hello world") == 0.0
    assert wer_cer("ab", "", "char") == 1.0
    with pytest.raises(EmptyReference):
        wer_cer(" ... ", "x")


def test_wilcoxon_examples():
    assert wilcoxon_signed_rank([1, 2, 3], [0, 0, 0]) == (0.0, 0.25)
    assert wilcoxon_signed_rank([0, 1], [1, 0]) == (1.5, 1.0)
    with pytest.raises(AllZeroDifferences):
        wilcoxon_signed_rank([1, 2], [1, 2])


def test_wilcoxon_large_n_normal():
    rng = np.random.default_rng(3)
    a = rng.normal(0.3, 1, 60)
    b = np.zeros(60)
    ref = __import__("scipy").stats.wilcoxon(a, b, correction=True, method="approx")
    w, p = wilcoxon_signed_rank(a, b)
    assert w == ref.statistic
    assert p == pytest.approx(ref.pvalue, rel=1e-9)


def test_wilcoxon_uniformly_better_24():
    rng = np.random.default_rng(8)
    b = rng.uniform(0.3, 0.6, 24)
    w, p = wilcoxon_signed_rank(b + rng.uniform(0.01, 0.05, 24), b)
    assert w == 0.0 and p < 0.05


@pytest.mark.parametrize("n", range(1, 11))
def test_wilcoxon_enumeration_small(n):
    rng = np.random.default_rng(n)
    for _ in range(5):
        a = np.round(rng.normal(size=n), 1)
        b = np.round(rng.normal(size=n), 1)
        if np.all(a == b):
            continue
        assert wilcoxon_signed_rank(a, b) == wilcoxon_enumerated(a, b)


small = st.lists(st.integers(-3, 3), min_size=3, max_size=12)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=3, max_size=25))
def test_spearman_properties(pairs):
    # a 0.1 grid keeps exp and the affine map strictly increasing in floating point
    x = [p[0] / 10 for p in pairs]
    y = [p[1] / 10 for p in pairs]
    try:
        rho, p = spearman(x, y)
    except DegenerateRanks:
        return
    assert spearman(y, x)[0] == pytest.approx(rho, abs=1e-12)
    assert spearman(np.exp(x), [3 * v + 1 for v in y])[0] == pytest.approx(rho, abs=1e-12)
    assert rho == pytest.approx(spearman_midrank_pearson(x, y), abs=1e-12)
    assert 0.0 <= p <= 1.0


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.integers(-5, 5)), min_size=2, max_size=30))
def test_auc_properties(rows):
    labels = [r[0] for r in rows]
    scores = [float(r[1]) for r in rows]
    if all(labels) or not any(labels):
        return
    auc = roc_auc(labels, scores)
    assert auc == auc_pairs(labels, scores)
    assert roc_auc(labels, np.exp(scores)) == auc
    if len(set(scores)) == len(scores):
        assert roc_auc(labels, [-s for s in scores]) == pytest.approx(1 - auc, abs=1e-15)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=30), st.integers(0, 2))
def test_qwk_properties(a, shift):
    k = 6
    assert quadratic_weighted_kappa(a, a, k) == 1.0
    rng = np.random.default_rng(len(a))
    b = list(rng.integers(0, 4, len(a)))
    assert quadratic_weighted_kappa([v + shift for v in a], [v + shift for v in b], k) == pytest.approx(
        quadratic_weighted_kappa(a, b, k), abs=1e-12)


tokens = st.lists(st.sampled_from("abcd"), max_size=9)


@settings(max_examples=400, deadline=None)
@given(tokens, tokens, tokens)
def test_edit_distance_metric(a, b, c):
    d_ab = edit_distance(a, b)
    assert d_ab == levenshtein(a, b)
    assert d_ab == edit_distance(b, a)
    assert (d_ab == 0) == (a == b)
    assert edit_distance(a, c) <= d_ab + edit_distance(b, c)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from regd.evaluation import (
    RankResult,
    best_threshold_f1,
    f1_at_threshold,
    format_table,
    pessimistic_rank,
    ranking_metrics,
)


def test_best_threshold_examples():
    assert best_threshold_f1([-0.5, -0.5, 0.3, 0.3], [1, 1, 0, 0]) == (-0.5, 1.0)
    t, f1 = best_threshold_f1([0.4, 0.1], [1, 0])
    assert t == 0.4 and f1 == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        best_threshold_f1([0.1, 0.2], [1, 1])
    with pytest.raises(ValueError):
        best_threshold_f1([0.1, np.nan], [1, 0])
    with pytest.raises(ValueError):
        best_threshold_f1([0.1], [1, 0])


def test_f1_at_threshold_examples():
    s = f1_at_threshold([0.0, 0.0, 1.0], [1, 0, 0], 0.5)
    assert (s.precision, s.recall) == (0.5, 1.0) and s.f1 == pytest.approx(2 / 3)
    s = f1_at_threshold([1.0, 2.0], [1, 0], 0.0)
    assert (s.precision, s.recall, s.f1) == (0.0, 0.0, 0.0)
    s = f1_at_threshold([0.0, 2.0], [1, 0], 0.0)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 40), ties=st.booleans())
def test_exact_sweep_dominates_dense_grid(seed, n, ties):
    rng = np.random.default_rng(seed)
    energies = rng.normal(size=n)
    if ties:
        energies = np.round(energies, 1)
    labels = rng.random(n) < 0.5
    labels[0], labels[1] = True, False
    t, f1 = best_threshold_f1(energies, labels)
    assert f1 >= oracles.grid_best_f1(energies, labels, 2000) - 1e-12
    assert f1 == pytest.approx(oracles.f1_counts(energies, labels, t))
    # exact optimum over every observed energy
    assert f1 == pytest.approx(max(oracles.f1_counts(energies, labels, e) for e in energies))
    # the smallest threshold attaining it
    assert all(oracles.f1_counts(energies, labels, e) < f1 - 1e-12 for e in energies if e < t)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_adding_a_correct_pair_never_lowers_f1(seed):
    rng = np.random.default_rng(seed)
    energies = rng.normal(size=20)
    labels = rng.random(20) < 0.5
    t = 0.0
    before = f1_at_threshold(energies, labels, t).f1
    after_pos = f1_at_threshold(np.r_[energies, -1.0], np.r_[labels, True], t).f1
    after_neg = f1_at_threshold(np.r_[energies, 1.0], np.r_[labels, False], t).f1
    assert after_pos >= before - 1e-12 and after_neg >= before - 1e-12


def test_ranking_examples():
    m = ranking_metrics([RankResult(1, 100)])
    assert (m.h1, m.mrr, m.mr, m.auc) == (1.0, 1.0, 1.0, 1.0)
    m = ranking_metrics([RankResult(1, 11), RankResult(3, 11)])
    assert m.h1 == 0.5 and m.h10 == 1.0 and m.mr == 2.0 and m.median == 2.0
    assert m.mrr == pytest.approx(2 / 3) and m.auc == pytest.approx(0.9)
    assert ranking_metrics([RankResult(7, 7)]).auc == 0.0
    assert set(m.as_dict()) == {"h1", "h10", "h100", "median", "mrr", "mr", "auc", "queries"}
    with pytest.raises(ValueError):
        RankResult(0, 3)
    with pytest.raises(ValueError):
        ranking_metrics([])


def test_pessimistic_ties():
    assert pessimistic_rank([0.5, 0.1, 0.5, 0.9], 0) == 3
    assert pessimistic_rank([0.5, 0.1, 0.5, 0.9], 1) == 1


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_rank_invariant_to_candidate_order(seed):
    rng = np.random.default_rng(seed)
    scores = np.round(rng.normal(size=30), 1)
    true = int(rng.integers(30))
    perm = rng.permutation(30)
    assert pessimistic_rank(scores[perm], int(np.nonzero(perm == true)[0][0])) == pessimistic_rank(scores, true)


def test_single_candidate_queries_skip_auc():
    m = ranking_metrics([RankResult(1, 1), RankResult(2, 3)])
    assert m.auc == pytest.approx(0.5)
    assert np.isnan(ranking_metrics([RankResult(1, 1)]).auc)


def test_format_table():
    text = format_table({"f1": 0.5, "queries": 3})
    assert text.splitlines() == ["f1       0.5000", "queries  3"]

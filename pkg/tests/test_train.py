import json

import numpy as np
import pytest

from regd.dissim import EVAL_COUNTS, boundary_dissim
from regd.graph import NegativeSampler
from regd.model import EmbeddingTable, EnergyConfig, batch_loss
from regd.train import (
    TrainSettings,
    labeled_pairs,
    rng_stream,
    train_dag,
)

TREE = [("r", "a"), ("r", "b"), ("a", "c"), ("a", "d"), ("b", "e"), ("b", "f")]
NODES = ["r", "a", "b", "c", "d", "e", "f"]


def fresh(seed=0, dim=2):
    return EmbeddingTable.initialize(NODES, "box", dim, rng_stream(seed, "init"))


def test_streams_are_independent_and_reproducible():
    a = rng_stream(3, "train").random(4)
    assert np.array_equal(a, rng_stream(3, "train").random(4))
    assert not np.array_equal(a, rng_stream(3, "eval").random(4))
    with pytest.raises(KeyError):
        rng_stream(0, "other")


def test_settings_validation():
    with pytest.raises(ValueError):
        TrainSettings(batch_size=0)
    with pytest.raises(ValueError):
        TrainSettings(lr=0)


def test_training_is_deterministic():
    lines = []
    runs = []
    for _ in range(2):
        t = fresh()
        train_dag(t, TREE, EnergyConfig(), TrainSettings(epochs=20, batch_size=4, seed=5), sink=lines.append)
        runs.append(t.params.tobytes())
    assert runs[0] == runs[1]
    assert lines[:20] == lines[20:] and json.loads(lines[0])["epoch"] == 1


def test_lambda_zero_never_evaluates_depth():
    before = EVAL_COUNTS["depth"]
    train_dag(fresh(), TREE, EnergyConfig(lam=0.0), TrainSettings(epochs=5, batch_size=4))
    assert EVAL_COUNTS["depth"] == before
    train_dag(fresh(), TREE, EnergyConfig(lam=0.5), TrainSettings(epochs=1, batch_size=4))
    assert EVAL_COUNTS["depth"] > before


def test_training_lowers_the_loss():
    history = train_dag(fresh(), TREE, EnergyConfig(), TrainSettings(epochs=100, batch_size=6, lr=0.05))
    assert history[-1]["loss"] < history[0]["loss"]


def test_near_containment_at_the_loss_floor():
    """With λ=0, one negative each and a loss near its floor γ1·|P|, every positive is nearly contained."""
    t = fresh()
    cfg = EnergyConfig(lam=0.0)
    train_dag(t, TREE, cfg, TrainSettings(epochs=1500, batch_size=6, lr=0.01, negatives=1))
    p, c = t.lookup(u for u, _ in TREE), t.lookup(v for _, v in TREE)
    neg = NegativeSampler(len(t), zip(p, c)).corrupt(p, 1, np.random.default_rng(0))
    loss, _ = batch_loss(t, p, c, neg, cfg, grad=False)
    gap = loss - cfg.gamma1 * len(TREE)
    bd = np.array([boundary_dissim(t.region(u), t.region(v)) for u, v in TREE])
    assert 0 <= gap < 0.05
    # every loss term is at least its floor, so no positive can exceed γ1 by more than the gap
    assert np.all(bd <= cfg.gamma1 + gap + 1e-12)


def test_labeled_pairs_filter_known_and_fall_back_for_roots():
    t = fresh()
    closure = set(TREE) | {("r", "c"), ("r", "d"), ("r", "e"), ("r", "f")}
    pairs = labeled_pairs(t, [("r", "c"), ("a", "d")], closure, 10, np.random.default_rng(0))
    assert len(pairs) == 2 + 20 and pairs.labels[:2].all() and not pairs.labels[2:].any()
    neg = {(t.ids[u], t.ids[v]) for u, v in zip(pairs.parents[2:], pairs.children[2:])}
    assert not neg & closure and all(u != v for u, v in neg)
    # the root reaches every node, so its positive (r, c) is corrupted on the parent side
    root_side = [(t.ids[u], t.ids[v]) for u, v in zip(pairs.parents[2:], pairs.children[2:]) if t.ids[v] == "c"]
    assert len(root_side) == 10 and all(u not in ("r", "a", "c") for u, _ in root_side)


def test_labeled_pairs_without_any_corruption():
    t = EmbeddingTable.initialize(["a", "b"], "box", 2, np.random.default_rng(0))
    pairs = labeled_pairs(t, [("a", "b")], {("a", "b")}, 5, np.random.default_rng(0))
    assert len(pairs) == 1 and pairs.labels.all()

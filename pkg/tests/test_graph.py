import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from regd.graph import (
    CycleError,
    Dag,
    NegativeSampler,
    SplitSpec,
    basic_edges,
    read_edges,
    sample_negatives,
    split,
    transitive_closure,
    write_split,
)


def test_closure_examples():
    assert transitive_closure(Dag([("a", "b"), ("b", "c")])) == {("a", "b"), ("b", "c"), ("a", "c")}
    assert transitive_closure(Dag([("a", "b")])) == {("a", "b")}


def test_basic_examples():
    chain = Dag([("a", "b"), ("b", "c"), ("a", "c")])
    assert basic_edges(chain) == {("a", "b"), ("b", "c")}
    tree = [("r", "a"), ("r", "b"), ("a", "c"), ("a", "d"), ("b", "e")]
    assert basic_edges(Dag(tree)) == set(tree)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_closure_and_reduction_match_brute_force(seed):
    nodes, edges = oracles.random_dag(np.random.default_rng(seed), max_nodes=20)
    dag = Dag(edges, nodes)
    closure = transitive_closure(dag)
    assert closure == oracles.floyd_warshall_closure(nodes, edges)
    basic = basic_edges(dag)
    assert oracles.is_minimal_generator(nodes, sorted(basic), closure)
    assert transitive_closure(Dag(basic, nodes)) == closure


def test_cycles_rejected_with_witness():
    with pytest.raises(CycleError) as err:
        Dag([("a", "b"), ("b", "c"), ("c", "a")])
    cycle = err.value.cycle
    assert cycle[0] == cycle[-1] and set(cycle) == {"a", "b", "c"}
    with pytest.raises(CycleError):
        Dag([("a", "a")])


def test_topological_order():
    dag = Dag([("c", "d"), ("a", "b"), ("b", "c")])
    order = dag.topological_order()
    assert all(order.index(u) < order.index(v) for u, v in dag.edges)


def test_read_edges(tmp_path):
    path = tmp_path / "e.tsv"
    path.write_text("# comment\n\na\tb\nb\tc d\n")
    assert read_edges(path) == [("a", "b"), ("b", "c d")]
    path.write_text("a b\n")
    with pytest.raises(ValueError, match=":1:"):
        read_edges(path)


# --- splits ------------------------------------------------------------------

def test_tree_split_is_empty():
    s = split(Dag([("r", "a"), ("r", "b")]), SplitSpec(0.0, 0.0))
    assert s.valid == [] and s.test == [] and sorted(s.train) == [("r", "a"), ("r", "b")]


def test_chain_of_four_split():
    s = split(Dag([("a", "b"), ("b", "c"), ("c", "d")]), SplitSpec(1 / 3, 1 / 3, seed=3))
    assert len(s.closure) == 6 and len(s.basic) == 3
    assert len(s.valid) == 1 and len(s.test) == 1
    nonbasic = s.closure - s.basic
    assert set(s.valid) <= nonbasic and set(s.test) <= nonbasic and set(s.valid) != set(s.test)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_split_disjoint_and_reproducible(seed):
    nodes, edges = oracles.random_dag(np.random.default_rng(seed), max_nodes=25, density=0.3)
    dag = Dag(edges, nodes)
    spec = SplitSpec(0.2, 0.2, seed=seed % 7, train_nonbasic=0.5)
    a, b = split(dag, spec), split(dag, spec)
    assert (a.train, a.valid, a.test) == (b.train, b.valid, b.test)
    train, valid, test = set(a.train), set(a.valid), set(a.test)
    assert not (train & valid or train & test or valid & test)
    assert a.basic <= train and train | valid | test <= a.closure


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(valid=0.7, test=0.7)
    with pytest.raises(ValueError):
        SplitSpec(valid=-0.1)


def test_write_split(tmp_path):
    dag = Dag([("a", "b"), ("b", "c")])
    spec = SplitSpec(0.0, 0.0, seed=4)
    write_split(tmp_path, split(dag, spec), spec, source="x.tsv")
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 4 and manifest["valid"] == 0.0 and manifest["test"] == 0.0
    assert manifest["counts"]["closure"] == 3 and manifest["counts"]["basic"] == 2
    assert read_edges(tmp_path / "basic.tsv") == [("a", "b"), ("b", "c")]


# --- negatives ---------------------------------------------------------------

def test_forced_corruption():
    rng = np.random.default_rng(0)
    assert sample_negatives(("a", "b"), 1, ["a", "b", "c"], [("a", "b")], rng) == [("a", "c")]


def test_negatives_avoid_training_pairs_and_self():
    rng = np.random.default_rng(1)
    nodes, edges = oracles.random_dag(rng, max_nodes=50, density=0.2)
    index = {n: i for i, n in enumerate(nodes)}
    pairs = [(index[u], index[v]) for u, v in edges]
    sampler = NegativeSampler(len(nodes), pairs)
    forbidden = set(pairs)
    parents = np.array([u for u, _ in pairs])
    ok = sampler.available(parents) > 0
    draws = sampler.corrupt(parents[ok], 10, rng)
    assert draws.shape == (ok.sum(), 10)
    for u, row in zip(parents[ok], draws):
        assert all(v != u and (u, v) not in forbidden for v in row)


def test_negative_streams_are_seeded():
    sampler = NegativeSampler(20, [(0, 1), (0, 2)])
    a = sampler.corrupt([0, 3, 5], 10, np.random.default_rng(9))
    b = sampler.corrupt([0, 3, 5], 10, np.random.default_rng(9))
    np.testing.assert_array_equal(a, b)


def test_sampler_available_and_exhaustion():
    sampler = NegativeSampler(3, [(0, 1), (0, 2), (0, 1)])
    np.testing.assert_array_equal(sampler.available([0, 1]), [0, 2])
    with pytest.raises(ValueError, match="no valid corruption"):
        sampler.corrupt([0], 1, np.random.default_rng(0))
    groups = NegativeSampler(3, [(5, 0)], num_groups=6, exclude_self=False)
    assert groups.available([5])[0] == 2
    assert set(groups.corrupt([5] * 50, 1, np.random.default_rng(0)).ravel()) == {1, 2}

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from regd.dissim import (
    EVAL_COUNTS,
    VOLUME_FLOOR,
    BoundaryVariant,
    DepthConfig,
    GKind,
    boundary_dissim,
    cone_boundary_dissim,
    depth_dissim,
    depth_dissim_hyperbolic_config,
    dissim_gradient,
    halfspace_distance,
    volume_dissim,
)
from regd.optim import finite_difference
from regd.regions import (
    BallRegion,
    BoxRegion,
    RegionKind,
    ball,
    box,
    contains_region,
    log_param_vector,
    region_from_raw,
    sample_points,
)

P1 = DepthConfig(p=1)


# --- depth -------------------------------------------------------------------

def test_depth_examples():
    assert depth_dissim(ball((0, 0), 1), ball((0, 0), 1)) == 0.0
    value = depth_dissim(ball((0, 0), 1), ball((3, 0), 2))
    assert value == pytest.approx(oracles.depth_linear((0, 0), (1,), (3, 0), (2,)), rel=1e-15)
    assert value == pytest.approx(5.0, rel=1e-15)
    value = depth_dissim(box((0, 0), (1, 1)), box((2, 0), (1, 1)), P1)
    assert value == pytest.approx(oracles.depth_linear((0, 0), (1, 1), (2, 0), (1, 1), p=1), rel=1e-15)
    assert value == pytest.approx(1.0, rel=1e-15)


def test_hyperbolic_configuration_examples():
    a = ball((0,), 1)
    assert depth_dissim_hyperbolic_config(a, a) == 0.0
    value = depth_dissim_hyperbolic_config(a, ball((0,), math.e))
    assert value == pytest.approx(1.0, rel=1e-14)
    assert value == pytest.approx(oracles.halfspace((0, 1), (0, math.e)), rel=1e-14)
    with pytest.raises(TypeError):
        depth_dissim_hyperbolic_config(box((0,), (1,)), box((0,), (1,)))


def test_halfspace_examples():
    assert halfspace_distance((0, 1), (0, 1)) == 0.0
    assert halfspace_distance((0, 1), (0, math.e)) == pytest.approx(1.0, rel=1e-14)
    assert halfspace_distance((0, 1), (1, 1)) == pytest.approx(math.acosh(1.5), rel=1e-14)
    assert halfspace_distance((0, 1), (1, 1)) == pytest.approx(0.9624236501192069, rel=1e-14)
    with pytest.raises(ValueError):
        halfspace_distance((0, 0), (0, 1))


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**31), dim=st.integers(1, 6))
def test_hyperbolic_configuration_matches_halfspace_oracle(seed, dim):
    rng = np.random.default_rng(seed)
    c1, c2 = rng.normal(size=dim), rng.normal(size=dim)
    r1, r2 = np.exp(rng.uniform(-5, 5, 2))
    got = depth_dissim_hyperbolic_config(ball(c1, r1), ball(c2, r2))
    want = oracles.halfspace([*c1, r1], [*c2, r2])
    assert abs(got - want) <= 1e-12 * max(1.0, want)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), dim=st.integers(1, 5), kind=st.sampled_from(["ball", "box"]),
       p=st.sampled_from([1, 2]))
def test_depth_symmetric_nonnegative_and_matches_oracle(seed, dim, kind, p):
    rng = np.random.default_rng(seed)
    width = 1 if kind == "ball" else dim
    a = region_from_raw(kind, rng.normal(size=dim), rng.uniform(0.1, 2, width))
    b = region_from_raw(kind, rng.normal(size=dim), rng.uniform(0.1, 2, width))
    cfg = DepthConfig(p=p)
    ab, ba = depth_dissim(a, b, cfg), depth_dissim(b, a, cfg)
    assert ab == pytest.approx(ba, rel=1e-14) and ab >= 0
    assert ab == pytest.approx(oracles.depth_linear(a.center, a.size, b.center, b.size, p=p), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31), kind=st.sampled_from(["ball", "box"]))
def test_depth_is_translation_invariant(seed, kind):
    rng = np.random.default_rng(seed)
    width = 1 if kind == "ball" else 3
    a = region_from_raw(kind, rng.normal(size=3), rng.uniform(0.1, 2, width))
    b = region_from_raw(kind, rng.normal(size=3), rng.uniform(0.1, 2, width))
    shift = rng.normal(size=3)
    moved = depth_dissim(region_from_raw(kind, a.center + shift, a.size), region_from_raw(kind, b.center + shift, b.size))
    assert moved == pytest.approx(depth_dissim(a, b), rel=1e-9, abs=1e-12)


def test_depth_config_validation():
    with pytest.raises(ValueError):
        DepthConfig(p=3)
    with pytest.raises(ValueError):
        DepthConfig(g_slope=0)
    with pytest.raises(ValueError):
        DepthConfig(f_scale=-1)
    assert DepthConfig(g="arcosh1p").g is GKind.ARCOSH


def test_depth_counter_increments():
    before = EVAL_COUNTS["depth"]
    depth_dissim(ball((0,), 1), ball((1,), 1))
    assert EVAL_COUNTS["depth"] == before + 1


# --- boundary ----------------------------------------------------------------

def _min_clearance_by_sampling(parent, child, rng, count=20000):
    """Smallest distance from the child's boundary to the parent's complement (balls)."""
    u = rng.normal(size=(count, child.dim))
    pts = child.center + child.radius * u / np.linalg.norm(u, axis=1, keepdims=True)
    return float(np.min(parent.radius - np.linalg.norm(pts - parent.center, axis=1)))


def _max_escape_by_sampling(parent, child, rng, count=20000):
    pts = np.vstack([sample_points(child, count, rng), child.lower, child.upper])
    gap = np.maximum(np.abs(pts - parent.center) - parent.offset, 0.0)
    return float(np.max(np.linalg.norm(gap, axis=1)))


def test_boundary_examples():
    rng = np.random.default_rng(0)
    parent, child = ball((0, 0), 2), ball((0, 0), 1)
    assert boundary_dissim(parent, child) == -1.0
    assert -_min_clearance_by_sampling(parent, child, rng) == pytest.approx(-1.0, abs=1e-9)
    assert boundary_dissim(ball((0, 0), 2), ball((1, 0), 1)) == 0.0
    parent, child = box((0,), (1,)), box((3,), (1,))
    assert boundary_dissim(parent, child) == 3.0
    assert _max_escape_by_sampling(parent, child, rng) == pytest.approx(3.0, abs=1e-12)
    assert oracles.box_escape_distance((0,), (1,), (3,), (1,)) == 3.0


def test_boundary_asymmetry_witness():
    big, small = ball((0, 0), 2), ball((1, 0), 0.5)
    assert boundary_dissim(big, small) != boundary_dissim(small, big)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**31), dim=st.integers(1, 4))
def test_box_boundary_matches_oracles(seed, dim):
    rng = np.random.default_rng(seed)
    parent = box(rng.normal(size=dim), rng.uniform(0.1, 2, dim))
    child = box(rng.normal(size=dim), rng.uniform(0.1, 2, dim))
    value = boundary_dissim(parent, child)
    if contains_region(parent, child):
        want = oracles.box_depth_inside(parent.center, parent.offset, child.center, child.offset)
        assert value <= 0
    else:
        want = oracles.box_escape_distance(parent.center, parent.offset, child.center, child.offset)
        assert value > 0
    assert value == pytest.approx(want, rel=1e-12, abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(seed=st.integers(0, 2**31), dim=st.integers(1, 4))
def test_ball_boundary_matches_oracle_and_sign(seed, dim):
    rng = np.random.default_rng(seed)
    parent = ball(rng.normal(size=dim), rng.uniform(0.1, 2))
    child = ball(rng.normal(size=dim), rng.uniform(0.1, 2))
    value = boundary_dissim(parent, child)
    assert value == pytest.approx(oracles.ball_boundary(parent.center, parent.radius, child.center, child.radius),
                                  rel=1e-12, abs=1e-12)
    assert (value <= 0) == contains_region(parent, child)


# --- volume and cone ---------------------------------------------------------

def test_volume_examples():
    a = box((0,), (1,))
    assert volume_dissim(a, a) == 0.0
    assert volume_dissim(a, box((1,), (1,))) == pytest.approx(math.log(2), rel=1e-15)
    far = volume_dissim(a, box((5,), (1,)))
    assert far == pytest.approx(-math.log(VOLUME_FLOOR), rel=1e-15)
    assert far == pytest.approx(23.03, abs=0.005)
    with pytest.raises(TypeError):
        volume_dissim(ball((0,), 1), ball((0,), 1))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_volume_matches_sampled_overlap(seed):
    rng = np.random.default_rng(seed)
    parent = box(rng.uniform(-1, 1, 2), rng.uniform(0.5, 1.5, 2))
    child = box(rng.uniform(-1, 1, 2), rng.uniform(0.5, 1.5, 2))
    value = volume_dissim(parent, child)
    assert value >= 0
    overlap = oracles.overlap_volume_mc(parent.lower, parent.upper, child.lower, child.upper, rng, 50_000)
    ratio = overlap / np.prod(2 * child.offset)
    if ratio > 0.05:
        assert math.exp(-value) == pytest.approx(ratio, abs=0.03)


def test_cone_examples():
    a = ball((0, 0), 1)
    assert cone_boundary_dissim(a, a) == 0.0
    assert cone_boundary_dissim(ball((0,), 1), ball((1,), 1)) == pytest.approx(math.asinh(1), rel=1e-15)
    assert cone_boundary_dissim(ball((0,), 2), ball((0,), 1)) == pytest.approx(math.asinh(-2) + math.asinh(1), rel=1e-15)
    assert cone_boundary_dissim(ball((0,), 2), ball((0,), 1)) == pytest.approx(-0.56226, abs=1e-5)
    with pytest.raises(TypeError):
        cone_boundary_dissim(box((0,), (1,)), box((0,), (1,)))
    with pytest.raises(ValueError):
        BoundaryVariant.CONE.check_kind(RegionKind.BOX)


# --- gradients ---------------------------------------------------------------

def test_boundary_gradient_example():
    _, grad = dissim_gradient("boundary", ball((0, 0), 1), ball((3, 4), 1))
    np.testing.assert_allclose(grad[3:5], [0.6, 0.8], rtol=1e-15)


def test_depth_gradient_zero_at_identical_balls():
    a = ball((0.3, -0.2), 1.5)
    value, grad = dissim_gradient("depth", a, a)
    assert value == 0.0
    np.testing.assert_array_equal(grad, np.zeros(6))


def _region_fn(which, kind, dim, cfg):
    def fn(x):
        n = x.size // 2
        a = BallRegion(x[:dim], x[dim]) if kind == "ball" else BoxRegion(x[:dim], x[dim:n])
        b = BallRegion(x[n:n + dim], x[n + dim]) if kind == "ball" else BoxRegion(x[n:n + dim], x[n + dim:])
        return dissim_gradient(which, a, b, cfg)[0]
    return fn


@pytest.mark.parametrize("which, kind, cfg", [
    ("depth", "ball", DepthConfig()),
    ("depth", "box", DepthConfig(p=1)),
    ("depth", "ball", DepthConfig.hyperbolic()),
    ("boundary", "ball", None),
    ("boundary", "box", None),
    ("volume", "box", None),
    ("cone", "ball", None),
])
def test_gradients_match_finite_differences(which, kind, cfg):
    rng = np.random.default_rng(11)
    dim = 3
    width = 1 if kind == "ball" else dim
    for _ in range(20):
        a = region_from_raw(kind, rng.normal(size=dim), rng.uniform(0.5, 1.5, width))
        b = region_from_raw(kind, a.center + rng.normal(scale=0.5, size=dim), rng.uniform(0.5, 1.5, width))
        x = np.concatenate([log_param_vector(a), log_param_vector(b)])
        _, grad = dissim_gradient(which, a, b, cfg)
        numeric = finite_difference(_region_fn(which, kind, dim, cfg), x)
        np.testing.assert_allclose(grad, numeric, rtol=1e-4, atol=1e-6)


def test_unknown_selector():
    with pytest.raises(ValueError):
        dissim_gradient("nope", ball((0,), 1), ball((0,), 1))

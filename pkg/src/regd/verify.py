"""Numerical checks of the geometric guarantees: isometry with the half-space
model, order preservation, containment sign, nesting, size/separation
behaviour of the depth term, and analytic gradients against finite
differences.

Every check returns a :class:`CheckResult`; ``run_all`` runs the suite.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from .dissim import (
    VOLUME_FLOOR,
    DepthConfig,
    GKind,
    boundary_dissim,
    boundary_kernel,
    cone_kernel,
    depth_dissim,
    depth_kernel,
    halfspace_distance,
    volume_kernel,
)
from .model import EmbeddingTable, EnergyConfig, batch_loss, energy_kernel
from .optim import finite_difference
from .regions import RegionKind, ball, box, contains_region

KINK_MARGIN = 1e-4
FD_STEP = 1e-6
GRAD_TOL = 1e-4


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    max_error: float
    seconds: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"{status}  {self.name:<28} cases={self.cases:<6} max_err={self.max_error:.3e}  {self.seconds:.2f}s{extra}"


def _timed(fn: Callable[[], tuple[bool, int, float, str]], name: str) -> CheckResult:
    start = time.perf_counter()
    passed, cases, err, detail = fn()
    return CheckResult(name, passed, cases, err, time.perf_counter() - start, detail)


def _log_uniform(rng, low, high, size):
    return np.exp(rng.uniform(math.log(low), math.log(high), size))


# ---------------------------------------------------------------------------
# isometry and monotonicity


def _random_ball_pairs(rng, count, max_dim=10, r_low=1e-3, r_high=1e3):
    """Groups of pairs keyed by dimension: {n: (c1, r1, c2, r2)}."""
    dims = rng.integers(1, max_dim + 1, count)
    out = {}
    for n in np.unique(dims):
        m = int(np.sum(dims == n))
        out[int(n)] = (
            rng.normal(0.0, 10.0, (m, n)), _log_uniform(rng, r_low, r_high, (m, 1)),
            rng.normal(0.0, 10.0, (m, n)), _log_uniform(rng, r_low, r_high, (m, 1)),
        )
    return out


def check_isometry(rng: np.random.Generator, count: int = 10_000, tol: float = 1e-12) -> CheckResult:
    """Depth in the hyperbolic configuration equals the half-space distance of (c, r)."""

    def run():
        worst = 0.0
        cfg = DepthConfig.hyperbolic()
        for c1, r1, c2, r2 in _random_ball_pairs(rng, count).values():
            got, _ = depth_kernel(c1, r1, c2, r2, cfg, grad=False)
            x, y = np.hstack([c1, r1]), np.hstack([c2, r2])
            want = halfspace_distance(x, y)
            # second, algebraically different form of the same distance
            alt = 2.0 * np.arcsinh(np.linalg.norm(x - y, axis=1) / (2.0 * np.sqrt(r1[:, 0] * r2[:, 0])))
            err = np.abs(got - want) / np.maximum(1.0, want)
            err_alt = np.abs(got - alt) / np.maximum(1.0, alt)
            worst = max(worst, float(err.max()), float(err_alt.max()))
        return worst <= tol, count, worst, ""

    return _timed(run, "isometry")


def check_monotonicity(rng: np.random.Generator, count: int = 10_000) -> CheckResult:
    """Linear-g depth orders pairs exactly as the half-space distance does."""

    def run():
        cfg = DepthConfig(p=2, g=GKind.LINEAR, f_scale=math.sqrt(2.0))
        disagree = 0
        for n, (c1, r1, c2, r2) in _random_ball_pairs(rng, count).items():
            m = c1.shape[0]
            c3, c4 = rng.normal(0.0, 10.0, (2, m, n))
            r3, r4 = _log_uniform(rng, 1e-3, 1e3, (2, m, 1))
            lin_ab, _ = depth_kernel(c1, r1, c2, r2, cfg, grad=False)
            lin_cd, _ = depth_kernel(c3, r3, c4, r4, cfg, grad=False)
            hyp_ab = halfspace_distance(np.hstack([c1, r1]), np.hstack([c2, r2]))
            hyp_cd = halfspace_distance(np.hstack([c3, r3]), np.hstack([c4, r4]))
            disagree += int(np.sum(np.sign(lin_ab - lin_cd) != np.sign(hyp_ab - hyp_cd)))
        return disagree == 0, count, float(disagree), f"disagreements={disagree}"

    return _timed(run, "monotonicity")


# ---------------------------------------------------------------------------
# boundary dissimilarity: containment sign, tangency, nesting


def _random_pair(rng, kind: RegionKind, n: int):
    """A parent and a child that is contained about half of the time."""
    if kind is RegionKind.BALL:
        r1 = float(_log_uniform(rng, 0.1, 10.0, 1)[0])
        c1 = rng.normal(0.0, 1.0, n)
        r2 = r1 * rng.uniform(0.05, 1.2)
        c2 = c1 + rng.normal(0.0, 1.0, n) * rng.uniform(0.0, r1) / math.sqrt(n)
        return ball(c1, r1), ball(c2, r2)
    o1 = _log_uniform(rng, 0.1, 10.0, n)
    c1 = rng.normal(0.0, 1.0, n)
    o2 = o1 * rng.uniform(0.05, 1.05, n)
    c2 = c1 + rng.uniform(-1.0, 1.0, n) * (o1 - o2 + 0.1 * o1 * rng.uniform(0, 1))
    return box(c1, o1), box(c2, o2)


def check_containment_sign(rng: np.random.Generator, count: int = 10_000, tangent: int = 1_000,
                           tol: float = 1e-12) -> CheckResult:
    def run():
        mismatches, contained = 0, 0
        for kind in (RegionKind.BALL, RegionKind.BOX):
            for _ in range(count):
                parent, child = _random_pair(rng, kind, int(rng.integers(1, 11)))
                inside = contains_region(parent, child)
                contained += inside
                mismatches += (boundary_dissim(parent, child) <= 0) != inside
        worst = 0.0
        for kind in (RegionKind.BALL, RegionKind.BOX):
            for _ in range(tangent):
                parent, child = _tangent_pair(rng, kind, int(rng.integers(1, 11)))
                worst = max(worst, abs(boundary_dissim(parent, child)))
        ok = mismatches == 0 and worst <= tol
        detail = f"sign_mismatches={mismatches} contained={contained}/{2 * count} tangent_max={worst:.2e}"
        return ok, 2 * (count + tangent), worst, detail

    return _timed(run, "containment-sign")


def _tangent_pair(rng, kind: RegionKind, n: int):
    """Child inside the parent and touching its boundary."""
    if kind is RegionKind.BALL:
        r1 = float(rng.uniform(0.5, 5.0))
        r2 = r1 * float(rng.uniform(0.05, 0.95))
        u = rng.normal(size=n)
        u /= np.linalg.norm(u)
        c1 = rng.normal(0.0, 1.0, n)
        return ball(c1, r1), ball(c1 + (r1 - r2) * u, r2)
    o1 = rng.uniform(0.5, 5.0, n)
    o2 = o1 * rng.uniform(0.05, 0.95, n)
    c1 = rng.normal(0.0, 1.0, n)
    shift = rng.uniform(-1.0, 1.0, n) * (o1 - o2)
    touch = int(rng.integers(n))
    shift[touch] = (o1 - o2)[touch] * rng.choice([-1.0, 1.0])
    return box(c1, o1), box(c1 + shift, o2)


def _nested(rng, outer, kind: RegionKind):
    """A region strictly inside ``outer``."""
    n = outer.dim
    if kind is RegionKind.BALL:
        room = outer.radius * rng.uniform(0.1, 0.9)
        u = rng.normal(size=n)
        u /= np.linalg.norm(u)
        return ball(outer.center + u * room * rng.uniform(0.0, 0.9), (outer.radius - room) * rng.uniform(0.1, 0.9))
    o = outer.offset * rng.uniform(0.1, 0.9, n)
    c = outer.center + rng.uniform(-0.9, 0.9, n) * (outer.offset - o)
    return box(c, o)


def check_nesting(rng: np.random.Generator, count: int = 1_000) -> CheckResult:
    """reg3 ⊆ reg2 ⊆ reg1 implies bd(reg1, reg3) ≤ bd(reg1, reg2)."""

    def run():
        violations, built = 0, 0
        for kind in (RegionKind.BALL, RegionKind.BOX):
            for _ in range(count):
                n = int(rng.integers(1, 11))
                c = rng.normal(0.0, 1.0, n)
                r1 = ball(c, float(rng.uniform(0.5, 5.0))) if kind is RegionKind.BALL else box(c, rng.uniform(0.5, 5.0, n))
                r2 = _nested(rng, r1, kind)
                r3 = _nested(rng, r2, kind)
                if not (contains_region(r1, r2) and contains_region(r2, r3)):
                    raise AssertionError("nested-region construction failed")
                built += 1
                violations += boundary_dissim(r1, r3) > boundary_dissim(r1, r2)
        return violations == 0, built, float(violations), f"violations={violations}"

    return _timed(run, "nesting")


# ---------------------------------------------------------------------------
# size and separation behaviour of the depth term


def check_shrinkage(gap: float = 100.0, max_halvings: int = 40) -> CheckResult:
    """Halving a nested ball's radius pushes its depth past a reference plus ``gap``."""

    def run():
        first, second = ball((0.0, 0.0), 1.0), ball((3.0, 0.0), 1.0)
        target = depth_dissim(first, second) + gap
        radius, steps = 1.0, 0
        while steps < max_halvings:
            radius /= 2.0
            steps += 1
            inner = ball((3.0, 0.0), radius)
            if not contains_region(second, inner):
                raise AssertionError("shrunken ball left its container")
            if depth_dissim(first, inner) > target:
                return True, steps, 0.0, f"halvings={steps}"
        return False, steps, float("inf"), f"not reached after {steps} halvings"

    return _timed(run, "shrinkage")


def check_separation(count: int = 100, bound: float = 1e6) -> CheckResult:
    """``count`` disjoint small balls inside the unit ball with pairwise depth above ``bound``."""

    def run():
        angles = 2.0 * math.pi * np.arange(count) / count
        centers = 0.25 * np.column_stack([np.cos(angles), np.sin(angles)])
        diffs = centers[:, None, :] - centers[None, :, :]
        sq = np.sum(diffs * diffs, axis=-1)
        delta = 0.99 * float(sq[~np.eye(count, dtype=bool)].min())
        radius = 0.5 * math.sqrt(delta / bound)
        unit = ball((0.0, 0.0), 1.0)
        balls = [ball(c, radius) for c in centers]
        low, disjoint = math.inf, True
        for i, j in combinations(range(count), 2):
            low = min(low, depth_dissim(balls[i], balls[j]))
            disjoint &= bool(np.linalg.norm(centers[i] - centers[j]) > 2.0 * radius)
        inside = all(contains_region(unit, b) for b in balls)
        ok = low > bound and disjoint and inside
        return ok, count * (count - 1) // 2, 0.0, f"min_depth={low:.3e} radius={radius:.3e}"

    return _timed(run, "separation")


# ---------------------------------------------------------------------------
# gradients


def kink_distance(name: str, c1, s1, c2, s2, cfg: DepthConfig | None = None) -> np.ndarray:
    """Per-row distance to the nearest point where the function is not differentiable."""
    dc = c1 - c2
    big = np.full(c1.shape[0], np.inf)
    if name == "depth":
        if cfg.p == 1:
            big = np.minimum(np.abs(dc).min(axis=1), np.abs(s1 - s2).min(axis=1))
        if cfg.g is GKind.ARCOSH:
            big = np.minimum(big, np.sum(dc * dc, axis=1))
        return big
    if name in ("ball-boundary", "cone"):
        return np.linalg.norm(dc, axis=1)
    if name == "box-boundary":
        delta = np.abs(dc) + s2 - s1
        out = np.minimum(np.abs(dc).min(axis=1), np.abs(delta).min(axis=1))
        if delta.shape[1] > 1:
            top2 = -np.sort(-delta, axis=1)[:, :2]
            inside = np.all(delta <= 0, axis=1)
            out = np.where(inside, np.minimum(out, top2[:, 0] - top2[:, 1]), out)
        return out
    if name == "volume":
        lo1, hi1, lo2, hi2 = c1 - s1, c1 + s1, c2 - s2, c2 + s2
        lo, hi = np.maximum(lo1, lo2), np.minimum(hi1, hi2)
        ratio = np.prod(np.clip(hi - lo, 0, None) / (2 * s2), axis=1)
        floor_gap = np.abs(np.log(np.maximum(ratio, 1e-300)) - math.log(VOLUME_FLOOR))
        return np.minimum.reduce([np.abs(lo1 - lo2).min(axis=1), np.abs(hi1 - hi2).min(axis=1),
                                  (hi - lo).min(axis=1), floor_gap])
    raise ValueError(name)


def _kernel_fd(fn, c1, l1, c2, l2, h: float = FD_STEP) -> np.ndarray:
    """Row-wise central differences of a batched scalar function over all four blocks."""
    blocks = [c1, l1, c2, l2]
    cols = []
    for b, block in enumerate(blocks):
        for j in range(block.shape[1]):
            up = [x.copy() for x in blocks]
            down = [x.copy() for x in blocks]
            up[b][:, j] += h
            down[b][:, j] -= h
            cols.append((fn(*up) - fn(*down)) / (2.0 * h))
    return np.column_stack(cols)


def relative_errors(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-8) -> np.ndarray:
    """Row-wise ‖a − n‖ / max(‖a‖, ‖n‖); rows where both are below ``floor`` count as exact."""
    diff = np.linalg.norm(analytic - numeric, axis=-1)
    scale = np.maximum(np.linalg.norm(analytic, axis=-1), np.linalg.norm(numeric, axis=-1))
    return np.where(scale < floor, 0.0, diff / np.where(scale < floor, 1.0, scale))


def _sample_rows(rng, kind: RegionKind, n: int, count: int):
    width = 1 if kind is RegionKind.BALL else n
    c1 = rng.normal(0.0, 1.0, (count, n))
    c2 = c1 + rng.normal(0.0, 0.7, (count, n))
    l1 = rng.uniform(math.log(0.3), math.log(3.0), (count, width))
    l2 = rng.uniform(math.log(0.3), math.log(3.0), (count, width))
    return c1, l1, c2, l2


def _gradient_cases():
    lin2, lin1 = DepthConfig(p=2), DepthConfig(p=1)
    hyp = DepthConfig.hyperbolic()
    ecfg = EnergyConfig(lam=0.5)
    cases = []
    for kind in (RegionKind.BALL, RegionKind.BOX):
        for label, cfg in (("p2", lin2), ("p1", lin1), ("arcosh", hyp)):
            cases.append((f"depth-{kind.value}-{label}", kind, "depth", cfg,
                          lambda c1, s1, c2, s2, g, cfg=cfg: depth_kernel(c1, s1, c2, s2, cfg, g)))
        cases.append((f"boundary-{kind.value}", kind, f"{kind.value}-boundary", None,
                      lambda c1, s1, c2, s2, g, kind=kind: boundary_kernel(kind, c1, s1, c2, s2, g)))
        cases.append((f"energy-{kind.value}", kind, f"{kind.value}-boundary", None,
                      lambda c1, s1, c2, s2, g, kind=kind: energy_kernel(kind, c1, s1, c2, s2, ecfg, g)))
    cases.append(("volume-box", RegionKind.BOX, "volume", None,
                  lambda c1, s1, c2, s2, g: volume_kernel(c1, s1, c2, s2, g)))
    cases.append(("cone-ball", RegionKind.BALL, "cone", None,
                  lambda c1, s1, c2, s2, g: cone_kernel(c1, s1, c2, s2, g)))
    return cases


def check_dissim_gradients(rng: np.random.Generator, points: int = 1_000, tol: float = GRAD_TOL) -> list[CheckResult]:
    results = []
    for name, kind, kink, cfg, kernel in _gradient_cases():
        def run(kind=kind, kink=kink, cfg=cfg, kernel=kernel):
            worst, done = 0.0, 0
            per_dim = points // 5
            for n in range(1, 6):
                need = per_dim + (points - 5 * per_dim if n == 5 else 0)
                rows = []
                while sum(r[0].shape[0] for r in rows) < need:
                    c1, l1, c2, l2 = _sample_rows(rng, kind, n, 2 * need)
                    keep = kink_distance(kink, c1, np.exp(l1), c2, np.exp(l2), cfg) > KINK_MARGIN
                    rows.append(tuple(x[keep] for x in (c1, l1, c2, l2)))
                c1, l1, c2, l2 = (np.concatenate([r[i] for r in rows])[:need] for i in range(4))
                s1, s2 = np.exp(l1), np.exp(l2)
                _, (gc1, gs1, gc2, gs2) = kernel(c1, s1, c2, s2, True)
                analytic = np.hstack([gc1, gs1 * s1, gc2, gs2 * s2])
                numeric = _kernel_fd(lambda a, b, c, d: kernel(a, np.exp(b), c, np.exp(d), False)[0], c1, l1, c2, l2)
                worst = max(worst, float(relative_errors(analytic, numeric).max()))
                done += need
            return worst <= tol, done, worst, ""

        results.append(_timed(run, f"grad:{name}"))
    return results


def check_loss_gradients(rng: np.random.Generator, points: int = 1_000, tol: float = GRAD_TOL) -> list[CheckResult]:
    """batch_loss against central differences over the whole table."""
    results = []
    for kind in (RegionKind.BALL, RegionKind.BOX):
        def run(kind=kind):
            cfg = EnergyConfig(lam=0.5, gamma1=0.001, gamma2=0.5)
            worst, done, nodes, dim = 0.0, 0, 6, 2
            while done < points:
                ids = [f"n{i}" for i in range(nodes)]
                table = EmbeddingTable.initialize(ids, kind, dim, rng)
                table.params[:, dim:] += rng.normal(0.0, 0.3, table.params[:, dim:].shape)
                parents = rng.integers(0, nodes, 3)
                children = (parents + rng.integers(1, nodes, 3)) % nodes
                neg = (parents[:, None] + rng.integers(1, nodes, (3, 2))) % nodes
                if _loss_kink(table, parents, children, neg, cfg) <= KINK_MARGIN:
                    continue
                _, grad = batch_loss(table, parents, children, neg, cfg)

                def loss_at(p):
                    saved = table.params.copy()
                    table.params[:] = p
                    try:
                        return batch_loss(table, parents, children, neg, cfg, grad=False)[0]
                    finally:
                        table.params[:] = saved

                numeric = finite_difference(loss_at, table.params, FD_STEP)
                worst = max(worst, float(relative_errors(grad.reshape(1, -1), numeric.reshape(1, -1))[0]))
                done += 1
            return worst <= tol, done, worst, ""

        results.append(_timed(run, f"grad:batch_loss-{kind.value}"))
    return results


def _loss_kink(table, parents, children, neg, cfg: EnergyConfig) -> float:
    kind = table.kind
    bname = f"{kind.value}-boundary"
    p, c = table.centers(parents), table.sizes(parents)
    q, d = table.centers(children), table.sizes(children)
    e_pos, _ = energy_kernel(kind, p, c, q, d, cfg, False)
    k = neg.shape[1]
    pr, ps = p.repeat(k, axis=0), c.repeat(k, axis=0)
    nq, nd = table.centers(neg.reshape(-1)), table.sizes(neg.reshape(-1))
    bd_neg, _ = boundary_kernel(kind, pr, ps, nq, nd, False)
    return float(min(
        kink_distance(bname, p, c, q, d).min(),
        kink_distance(bname, pr, ps, nq, nd).min(),
        np.abs(e_pos - cfg.gamma1).min(),
        np.abs(cfg.gamma2 - bd_neg).min(),
    ))


def run_all(seed: int = 0, gradient_points: int = 1_000) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    results = [
        check_isometry(rng),
        check_monotonicity(rng),
        check_containment_sign(rng),
        check_nesting(rng),
        check_shrinkage(),
        check_separation(),
    ]
    results += check_dissim_gradients(rng, gradient_points)
    results += check_loss_gradients(rng, gradient_points)
    return results

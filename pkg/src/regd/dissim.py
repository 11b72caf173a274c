"""Dissimilarities between regions and their analytic gradients.

Every dissimilarity has a batched kernel working on raw parameters: centers
``c`` of shape (B, n) and sizes ``s`` of shape (B, 1) for balls (the radius)
or (B, n) for boxes (the offsets).  Kernels return ``(value, grads)`` where
``grads = (d/dc1, d/ds1, d/dc2, d/ds2)`` or ``None`` when ``grad=False``.
Region 1 is always the parent (first argument), region 2 the child.

Subgradient conventions at kinks: d|x|/dx = 0 and d max(x, 0)/dx = 0 at
x = 0; ties in a max over dimensions go to the lowest index; ties between
the two boxes' faces in an intersection go to the parent.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .regions import Region, RegionKind, check_compatible

# incremented by depth_kernel; lets callers assert a code path was never taken
EVAL_COUNTS: Counter = Counter()

VOLUME_FLOOR = 1e-10
_LOG_VOLUME_FLOOR = math.log(VOLUME_FLOOR)
_ASINH_ONE = math.asinh(1.0)


class GKind(str, enum.Enum):
    LINEAR = "linear"
    ARCOSH = "arcosh1p"


class BoundaryVariant(str, enum.Enum):
    GEOMETRIC = "geometric"
    VOLUME = "volume"
    CONE = "cone"

    def check_kind(self, kind: RegionKind) -> None:
        kind = RegionKind(kind)
        if self is BoundaryVariant.VOLUME and kind is not RegionKind.BOX:
            raise ValueError("volume boundary dissimilarity requires boxes")
        if self is BoundaryVariant.CONE and kind is not RegionKind.BALL:
            raise ValueError("cone boundary dissimilarity requires balls")


@dataclass(frozen=True)
class DepthConfig:
    """Depth dissimilarity g(||P1 - P2||_p^p / (f(reg1) f(reg2))).

    The size f is ``f_scale`` times the radius (balls) or times the Euclidean
    norm of the offset vector (boxes).  ``g`` is ``g_slope * x + g_intercept``
    or ``arcosh(x + 1)``.
    """

    p: int = 2
    g: GKind = GKind.LINEAR
    g_slope: float = 1.0
    g_intercept: float = 0.0
    f_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "g", GKind(self.g))
        if self.p not in (1, 2):
            raise ValueError(f"p must be 1 or 2, got {self.p}")
        if self.g is GKind.LINEAR and self.g_slope <= 0:
            raise ValueError("linear g needs a positive slope")
        if self.f_scale <= 0:
            raise ValueError("f_scale must be positive")

    @classmethod
    def hyperbolic(cls) -> "DepthConfig":
        """The configuration under which balls are isometric to the half-space model."""
        return cls(p=2, g=GKind.ARCOSH, f_scale=math.sqrt(2.0))


def _arcosh1p(x):
    # arcosh(1 + x) without forming 1 + x
    return np.log1p(x + np.sqrt(x * (x + 2.0)))


def depth_kernel(c1, s1, c2, s2, cfg: DepthConfig, grad: bool = True):
    EVAL_COUNTS["depth"] += c1.shape[0]
    dc = c1 - c2
    ds = s1 - s2
    if cfg.p == 2:
        num = np.sum(dc * dc, axis=1) + np.sum(ds * ds, axis=1)
        dnum_dc, dnum_ds = 2.0 * dc, 2.0 * ds
    else:
        num = np.sum(np.abs(dc), axis=1) + np.sum(np.abs(ds), axis=1)
        dnum_dc, dnum_ds = np.sign(dc), np.sign(ds)
    n1 = np.linalg.norm(s1, axis=1)
    n2 = np.linalg.norm(s2, axis=1)
    denom = cfg.f_scale * n1 * cfg.f_scale * n2
    x = num / denom
    if cfg.g is GKind.LINEAR:
        value = cfg.g_slope * x + cfg.g_intercept
        gprime = np.full_like(x, cfg.g_slope)
    else:
        value = _arcosh1p(x)
        with np.errstate(divide="ignore"):
            gprime = np.where(x > 0, 1.0 / np.sqrt(x * (x + 2.0)), 0.0)
    if not grad:
        return value, None
    scale = (gprime / denom)[:, None]
    gx = (gprime * x)[:, None]
    gc1 = scale * dnum_dc
    gs1 = scale * dnum_ds - gx * s1 / (n1 * n1)[:, None]
    gs2 = -scale * dnum_ds - gx * s2 / (n2 * n2)[:, None]
    return value, (gc1, gs1, -gc1, gs2)


def _unit(diff):
    dist = np.linalg.norm(diff, axis=1)
    safe = np.where(dist > 0, dist, 1.0)
    return dist, np.where((dist > 0)[:, None], diff / safe[:, None], 0.0)


def boundary_kernel(kind: RegionKind, c1, s1, c2, s2, grad: bool = True):
    if kind is RegionKind.BALL:
        dist, u = _unit(c1 - c2)
        value = dist + s2[:, 0] - s1[:, 0]
        if not grad:
            return value, None
        ones = np.ones_like(s1)
        return value, (u, -ones, -u, ones)

    dc = c1 - c2
    reach = np.abs(dc) + s2
    delta = reach - s1
    contained = np.all(reach <= s1, axis=1)
    pos = np.maximum(delta, 0.0)
    outside = np.linalg.norm(pos, axis=1)
    top = np.argmax(delta, axis=1)
    rows = np.arange(delta.shape[0])
    value = np.where(contained, delta[rows, top], outside)
    if not grad:
        return value, None
    weight = np.where(
        contained[:, None],
        np.eye(delta.shape[1])[top],
        pos / np.where(outside > 0, outside, 1.0)[:, None],
    )
    sgn = np.sign(dc)
    return value, (weight * sgn, -weight, -weight * sgn, weight)


def volume_kernel(c1, o1, c2, o2, grad: bool = True):
    lo1, hi1 = c1 - o1, c1 + o1
    lo2, hi2 = c2 - o2, c2 + o2
    lo_first = lo1 >= lo2
    hi_first = hi1 <= hi2
    length = np.where(hi_first, hi1, hi2) - np.where(lo_first, lo1, lo2)
    overlap = np.all(length > 0, axis=1)
    safe = np.where(length > 0, length, 1.0)
    log_ratio = np.sum(np.log(safe) - np.log(2.0 * o2), axis=1)
    floored = ~overlap | (log_ratio < _LOG_VOLUME_FLOOR)
    value = np.where(floored, -_LOG_VOLUME_FLOOR, -log_ratio)
    if not grad:
        return value, None
    live = (~floored)[:, None]
    inv = np.where(live, -1.0 / safe, 0.0)
    hf = hi_first.astype(float)
    lf = lo_first.astype(float)
    gc1 = inv * (hf - lf)
    go1 = inv * (hf + lf)
    gc2 = inv * ((1.0 - hf) - (1.0 - lf))
    go2 = inv * ((1.0 - hf) + (1.0 - lf)) + np.where(live, 1.0 / o2, 0.0)
    return value, (gc1, go1, gc2, go2)


def cone_kernel(c1, r1, c2, r2, grad: bool = True):
    dist, u = _unit(c1 - c2)
    rr1, rr2 = r1[:, 0], r2[:, 0]
    z = (dist - rr1) / rr2
    value = np.arcsinh(z) + _ASINH_ONE
    if not grad:
        return value, None
    a = 1.0 / np.sqrt(1.0 + z * z)
    gc1 = (a / rr2)[:, None] * u
    gr1 = (-a / rr2)[:, None]
    gr2 = (-a * z / rr2)[:, None]
    return value, (gc1, gr1, -gc1, gr2)


def bd_kernel(variant: BoundaryVariant, kind: RegionKind, c1, s1, c2, s2, grad: bool = True):
    """Dispatch to the configured boundary dissimilarity."""
    if variant is BoundaryVariant.GEOMETRIC:
        return boundary_kernel(kind, c1, s1, c2, s2, grad)
    if variant is BoundaryVariant.VOLUME:
        return volume_kernel(c1, s1, c2, s2, grad)
    return cone_kernel(c1, s1, c2, s2, grad)


# ---------------------------------------------------------------------------
# scalar API on region objects


def _rows(region: Region):
    return region.center[None, :], region.size[None, :]


def depth_dissim(a: Region, b: Region, cfg: DepthConfig | None = None) -> float:
    check_compatible(a, b)
    value, _ = depth_kernel(*_rows(a), *_rows(b), cfg or DepthConfig(), grad=False)
    return float(value[0])


def depth_dissim_hyperbolic_config(a: Region, b: Region) -> float:
    check_compatible(a, b)
    if a.kind is not RegionKind.BALL:
        raise TypeError("the hyperbolic configuration is defined for balls only")
    return depth_dissim(a, b, DepthConfig.hyperbolic())


def halfspace_distance(x, y) -> float | np.ndarray:
    """Distance in the upper half-space model of curvature -1.

    Accepts single points or stacks of points (last axis is the coordinate
    axis, whose final entry must be positive).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x[..., -1] <= 0) or np.any(y[..., -1] <= 0):
        raise ValueError("half-space points need a positive last coordinate")
    sq = np.sum((x - y) ** 2, axis=-1)
    out = np.arccosh(1.0 + sq / (2.0 * x[..., -1] * y[..., -1]))
    return float(out) if np.ndim(out) == 0 else out


def boundary_dissim(parent: Region, child: Region) -> float:
    check_compatible(parent, child)
    value, _ = boundary_kernel(parent.kind, *_rows(parent), *_rows(child), grad=False)
    return float(value[0])


def volume_dissim(parent: Region, child: Region) -> float:
    check_compatible(parent, child)
    if parent.kind is not RegionKind.BOX:
        raise TypeError("volume dissimilarity is defined for boxes only")
    value, _ = volume_kernel(*_rows(parent), *_rows(child), grad=False)
    return float(value[0])


def cone_boundary_dissim(parent: Region, child: Region) -> float:
    check_compatible(parent, child)
    if parent.kind is not RegionKind.BALL:
        raise TypeError("cone dissimilarity is defined for balls only")
    value, _ = cone_kernel(*_rows(parent), *_rows(child), grad=False)
    return float(value[0])


_SELECTORS = ("depth", "boundary", "volume", "cone")


def dissim_gradient(which: str, a: Region, b: Region, cfg: DepthConfig | None = None):
    """Value and gradient over the trainable parameters of both regions.

    The gradient is laid out as ``[c_a, log_size_a, c_b, log_size_b]``, i.e.
    with respect to the log-radius / log-offsets, not the raw sizes.
    """
    check_compatible(a, b)
    rows = (*_rows(a), *_rows(b))
    if which == "depth":
        value, g = depth_kernel(*rows, cfg or DepthConfig())
    elif which == "boundary":
        value, g = boundary_kernel(a.kind, *rows)
    elif which == "volume":
        if a.kind is not RegionKind.BOX:
            raise TypeError("volume dissimilarity is defined for boxes only")
        value, g = volume_kernel(*rows)
    elif which == "cone":
        if a.kind is not RegionKind.BALL:
            raise TypeError("cone dissimilarity is defined for balls only")
        value, g = cone_kernel(*rows)
    else:
        raise ValueError(f"unknown dissimilarity {which!r}; expected one of {_SELECTORS}")
    gc1, gs1, gc2, gs2 = (part[0] for part in g)
    grad = np.concatenate([gc1, gs1 * a.size, gc2, gs2 * b.size])
    return float(value[0]), grad

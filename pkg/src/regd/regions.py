"""Axis-aligned boxes and Euclidean balls with log-parameterized sizes.

A region is stored by its center and the logarithm of its size (radius for a
ball, per-dimension offset for a box), so any real-valued update keeps the
size strictly positive.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np


class RegionKind(str, enum.Enum):
    BALL = "ball"
    BOX = "box"

    def params_per_node(self, dim: int) -> int:
        return dim + 1 if self is RegionKind.BALL else 2 * dim

    def size_width(self, dim: int) -> int:
        """Number of size slots (1 radius or `dim` offsets)."""
        return 1 if self is RegionKind.BALL else dim


@dataclass(frozen=True)
class BallRegion:
    center: np.ndarray
    log_radius: float

    kind = RegionKind.BALL

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        object.__setattr__(self, "log_radius", float(np.asarray(self.log_radius).reshape(())))

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def radius(self) -> float:
        return float(np.exp(self.log_radius))

    @property
    def size(self) -> np.ndarray:
        return np.array([self.radius])

    @property
    def log_size(self) -> np.ndarray:
        return np.array([self.log_radius])


@dataclass(frozen=True)
class BoxRegion:
    center: np.ndarray
    log_offset: np.ndarray

    kind = RegionKind.BOX

    def __post_init__(self):
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        log_offset = np.atleast_1d(np.asarray(self.log_offset, dtype=float))
        if center.shape != log_offset.shape:
            raise ValueError(f"center {center.shape} and offset {log_offset.shape} differ in shape")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "log_offset", log_offset)

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    @property
    def offset(self) -> np.ndarray:
        return np.exp(self.log_offset)

    @property
    def size(self) -> np.ndarray:
        return self.offset

    @property
    def log_size(self) -> np.ndarray:
        return self.log_offset

    @property
    def lower(self) -> np.ndarray:
        return self.center - self.offset

    @property
    def upper(self) -> np.ndarray:
        return self.center + self.offset


Region = Union[BallRegion, BoxRegion]


def ball(center, radius: float) -> BallRegion:
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    return BallRegion(center, np.log(radius))


def box(center, offset) -> BoxRegion:
    offset = np.atleast_1d(np.asarray(offset, dtype=float))
    if np.any(offset <= 0):
        raise ValueError("box offsets must be positive")
    return BoxRegion(center, np.log(offset))


def region_from_raw(kind: RegionKind, center, size) -> Region:
    if RegionKind(kind) is RegionKind.BALL:
        return ball(center, float(np.asarray(size).reshape(-1)[0]))
    return box(center, size)


def param_vector(region: Region) -> np.ndarray:
    """Raw parameter vector: (center, radius) or (center, offsets)."""
    return np.concatenate([region.center, region.size])


def log_param_vector(region: Region) -> np.ndarray:
    """Trainable parameter vector: (center, log radius) or (center, log offsets)."""
    return np.concatenate([region.center, region.log_size])


def region_from_log_params(kind: RegionKind, params: np.ndarray, dim: int) -> Region:
    params = np.asarray(params, dtype=float)
    if RegionKind(kind) is RegionKind.BALL:
        return BallRegion(params[:dim], params[dim])
    return BoxRegion(params[:dim], params[dim:])


def check_compatible(a: Region, b: Region) -> None:
    if a.kind is not b.kind:
        raise TypeError(f"region kinds differ: {a.kind.value} vs {b.kind.value}")
    if a.dim != b.dim:
        raise ValueError(f"region dimensions differ: {a.dim} vs {b.dim}")


def contains_region(outer: Region, inner: Region) -> bool:
    check_compatible(outer, inner)
    if outer.kind is RegionKind.BALL:
        gap = np.linalg.norm(outer.center - inner.center)
        return bool(gap + inner.radius <= outer.radius)
    slack = np.abs(outer.center - inner.center) + inner.offset
    return bool(np.all(slack <= outer.offset))


def contains_point(region: Region, points: np.ndarray) -> np.ndarray:
    """Membership of each row of `points` in the closed region."""
    points = np.atleast_2d(points)
    if region.kind is RegionKind.BALL:
        return np.linalg.norm(points - region.center, axis=1) <= region.radius
    return np.all(np.abs(points - region.center) <= region.offset, axis=1)


def box_volume(b: BoxRegion) -> float:
    return float(np.prod(2.0 * b.offset))


@dataclass(frozen=True)
class BoxIntersection:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def empty(self) -> bool:
        return bool(np.any(self.lower > self.upper))

    @property
    def volume(self) -> float:
        return float(np.prod(np.maximum(self.upper - self.lower, 0.0)))


def box_intersection(a: BoxRegion, b: BoxRegion) -> BoxIntersection:
    check_compatible(a, b)
    return BoxIntersection(np.maximum(a.lower, b.lower), np.minimum(a.upper, b.upper))


def sample_points(region: Region, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the region (closed ball or box)."""
    n = region.dim
    if region.kind is RegionKind.BALL:
        direction = rng.standard_normal((count, n))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = region.radius * rng.random(count) ** (1.0 / n)
        return region.center + direction * radius[:, None]
    return region.center + rng.uniform(-1.0, 1.0, (count, n)) * region.offset

"""Energy of a (parent, child) pair, the contrastive training loss, and the
trainable table of region parameters."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dissim import BoundaryVariant, DepthConfig, bd_kernel, depth_kernel
from .regions import Region, RegionKind, region_from_log_params

FORMAT_TAG = "#regd v1"
LOG_SIZE_FLOOR = -30.0
INIT_LOG_OFFSET = math.log(0.4)
ROLE_INIT_SCALE = 0.1


@dataclass(frozen=True)
class EnergyConfig:
    lam: float = 0.5
    depth: DepthConfig = field(default_factory=DepthConfig)
    boundary: BoundaryVariant = BoundaryVariant.GEOMETRIC
    gamma1: float = 0.001
    gamma2: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "boundary", BoundaryVariant(self.boundary))
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")

    @classmethod
    def for_ontology(cls, **kwargs) -> "EnergyConfig":
        return cls(**{"gamma1": 0.0, "gamma2": 0.0, **kwargs})

    def with_lambda(self, lam: float) -> "EnergyConfig":
        return replace(self, lam=lam)


class UnknownIdError(KeyError):
    def __init__(self, missing: Sequence[str], what: str = "node"):
        self.missing = list(missing)
        shown = ", ".join(self.missing[:20]) + (" ..." if len(self.missing) > 20 else "")
        super().__init__(f"{len(self.missing)} unknown {what} id(s): {shown}")


class EmbeddingTable:
    """Region parameters for every node, plus optional role translation vectors.

    ``params`` has one row per node holding ``[center, log_size]``; sizes are
    exponentiated on use.  ``roles`` holds one translation vector per role.
    """

    def __init__(self, ids: Sequence[str], kind: RegionKind, dim: int, params: np.ndarray,
                 role_ids: Sequence[str] = (), roles: np.ndarray | None = None):
        self.kind = RegionKind(kind)
        self.dim = int(dim)
        self.ids = list(ids)
        self.index = {name: i for i, name in enumerate(self.ids)}
        if len(self.index) != len(self.ids):
            raise ValueError("duplicate node ids")
        self.params = np.ascontiguousarray(params, dtype=float)
        if self.params.shape != (len(self.ids), self.kind.params_per_node(self.dim)):
            raise ValueError(f"parameter array has shape {self.params.shape}")
        self.role_ids = list(role_ids)
        self.role_index = {name: i for i, name in enumerate(self.role_ids)}
        self.roles = np.zeros((len(self.role_ids), self.dim)) if roles is None else np.asarray(roles, dtype=float)
        if self.roles.shape != (len(self.role_ids), self.dim):
            raise ValueError(f"role array has shape {self.roles.shape}")

    @classmethod
    def initialize(cls, ids: Sequence[str], kind: RegionKind, dim: int, rng: np.random.Generator,
                   role_ids: Sequence[str] = ()) -> "EmbeddingTable":
        kind = RegionKind(kind)
        centers = rng.uniform(-1.0, 1.0, (len(ids), dim))
        if kind is RegionKind.BALL:
            sizes = np.zeros((len(ids), 1))
        else:
            sizes = np.full((len(ids), dim), INIT_LOG_OFFSET)
        roles = rng.uniform(-ROLE_INIT_SCALE, ROLE_INIT_SCALE, (len(role_ids), dim))
        return cls(ids, kind, dim, np.hstack([centers, sizes]), role_ids, roles)

    def __len__(self) -> int:
        return len(self.ids)

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.ids, self.kind, self.dim, self.params.copy(), self.role_ids, self.roles.copy())

    def lookup(self, names: Iterable[str]) -> np.ndarray:
        names = list(names)
        missing = sorted({n for n in names if n not in self.index})
        if missing:
            raise UnknownIdError(missing)
        return np.fromiter((self.index[n] for n in names), dtype=np.intp, count=len(names))

    def lookup_roles(self, names: Iterable[str]) -> np.ndarray:
        names = list(names)
        missing = sorted({n for n in names if n not in self.role_index})
        if missing:
            raise UnknownIdError(missing, "role")
        return np.fromiter((self.role_index[n] for n in names), dtype=np.intp, count=len(names))

    def centers(self, idx) -> np.ndarray:
        return self.params[idx, : self.dim]

    def sizes(self, idx) -> np.ndarray:
        return np.exp(self.params[idx, self.dim:])

    def region(self, name: str) -> Region:
        return region_from_log_params(self.kind, self.params[self.lookup([name])[0]], self.dim)

    def clamp_sizes(self) -> None:
        np.maximum(self.params[:, self.dim:], LOG_SIZE_FLOOR, out=self.params[:, self.dim:])

    def canonicalize(self) -> None:
        """Replace each log size by log(exp(.)) so the table equals its reloaded copy bit for bit."""
        self.params[:, self.dim:] = np.log(np.exp(self.params[:, self.dim:]))

    def save(self, path) -> None:
        lines = [f"{FORMAT_TAG} kind={self.kind.value} dim={self.dim} roles={len(self.role_ids)}"]
        centers = self.params[:, : self.dim]
        sizes = np.exp(self.params[:, self.dim:])
        for name, c, s in zip(self.ids, centers, sizes):
            lines.append(f"{name}\t{_fmt(c)}\t{_fmt(s)}")
        for name, v in zip(self.role_ids, self.roles):
            lines.append(f"@{name}\t{_fmt(v)}")
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EmbeddingTable":
        text = Path(path).read_text(encoding="utf-8").splitlines()
        if not text or not text[0].startswith(FORMAT_TAG):
            raise ValueError(f"{path}: missing '{FORMAT_TAG}' header")
        header = dict(tok.split("=", 1) for tok in text[0][len(FORMAT_TAG):].split())
        kind, dim, n_roles = RegionKind(header["kind"]), int(header["dim"]), int(header["roles"])
        body = [line for line in text[1:] if line.strip()]
        node_lines = body[: len(body) - n_roles]
        role_lines = body[len(body) - n_roles:]
        ids, rows = [], []
        width = kind.size_width(dim)
        for lineno, line in enumerate(node_lines, start=2):
            parts = line.split("\t")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 3 tab-separated fields")
            center = np.array(parts[1].split(), dtype=float)
            size = np.array(parts[2].split(), dtype=float)
            if center.size != dim or size.size != width or np.any(size <= 0):
                raise ValueError(f"{path}:{lineno}: malformed region")
            ids.append(parts[0])
            rows.append(np.concatenate([center, np.log(size)]))
        role_ids, roles = [], []
        for line in role_lines:
            name, vec = line.split("\t")
            if not name.startswith("@"):
                raise ValueError(f"{path}: role line must start with '@': {line!r}")
            role_ids.append(name[1:])
            roles.append(np.array(vec.split(), dtype=float))
        params = np.array(rows).reshape(len(ids), kind.params_per_node(dim))
        return cls(ids, kind, dim, params, role_ids, np.array(roles).reshape(len(role_ids), dim))


def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in values)


# ---------------------------------------------------------------------------
# energy and loss over raw region parameters


def energy_kernel(kind: RegionKind, c1, s1, c2, s2, cfg: EnergyConfig, grad: bool = True):
    """E = d_bd + lam * d_dep for parent rows (c1, s1) and child rows (c2, s2)."""
    value, g = bd_kernel(cfg.boundary, kind, c1, s1, c2, s2, grad)
    if cfg.lam == 0:
        return value, g
    dep, gd = depth_kernel(c1, s1, c2, s2, cfg.depth, grad)
    value = value + cfg.lam * dep
    if grad:
        g = tuple(a + cfg.lam * b for a, b in zip(g, gd))
    return value, g


def contrastive_terms(pos_energy: np.ndarray, neg_bd: np.ndarray, gamma1: float, gamma2: float):
    """Per-positive loss terms and their derivatives.

    Returns ``(terms, d_terms/d_pos_energy, d_terms/d_neg_bd)`` where
    ``neg_bd`` has shape (P, k): the boundary dissimilarities of the k
    corruptions that share the positive's parent.
    """
    if pos_energy.size == 0:
        raise ValueError("empty batch")
    if neg_bd.ndim != 2 or neg_bd.shape[0] != pos_energy.shape[0] or neg_bd.shape[1] == 0:
        raise ValueError("every positive needs at least one negative")
    pos_term = np.maximum(pos_energy, gamma1)
    d_pos = (pos_energy > gamma1).astype(float)
    margin = gamma2 - neg_bd
    hinge = np.maximum(margin, 0.0)
    top = hinge.max(axis=1, keepdims=True)
    expd = np.exp(hinge - top)
    total = expd.sum(axis=1, keepdims=True)
    lse = top[:, 0] + np.log(total[:, 0])
    d_neg = -(expd / total) * (margin > 0)
    return pos_term + lse, d_pos, d_neg


def _gather(table: EmbeddingTable, idx):
    return table.centers(idx), table.sizes(idx)


def _scatter(grad: np.ndarray, table: EmbeddingTable, idx, gc, gs, sizes) -> None:
    np.add.at(grad[:, : table.dim], idx, gc)
    np.add.at(grad[:, table.dim:], idx, gs * sizes)


def _as_index(table: EmbeddingTable, nodes) -> np.ndarray:
    arr = np.asarray(nodes)
    if arr.dtype.kind in "iu":
        return arr.astype(np.intp)
    return table.lookup(arr.reshape(-1).tolist()).reshape(arr.shape)


def energy(parent, child, table: EmbeddingTable, cfg: EnergyConfig) -> float:
    p = _as_index(table, [parent])
    c = _as_index(table, [child])
    value, _ = energy_kernel(table.kind, *_gather(table, p), *_gather(table, c), cfg, grad=False)
    return float(value[0])


def energies(table: EmbeddingTable, parents, children, cfg: EnergyConfig) -> np.ndarray:
    p = _as_index(table, parents)
    c = _as_index(table, children)
    if p.size == 0:
        return np.zeros(0)
    value, _ = energy_kernel(table.kind, *_gather(table, p), *_gather(table, c), cfg, grad=False)
    return value


def predict(parent, child, table: EmbeddingTable, cfg: EnergyConfig, threshold: float) -> bool:
    return energy(parent, child, table, cfg) <= threshold


def batch_loss(table: EmbeddingTable, parents, children, neg_children, cfg: EnergyConfig, grad: bool = True):
    """Contrastive loss summed over positives, with its gradient over ``table.params``.

    ``neg_children`` has shape (P, k): the corrupted children for each
    positive, all paired with that positive's parent.
    """
    p = _as_index(table, parents)
    c = _as_index(table, children)
    neg = _as_index(table, neg_children)
    if p.size == 0:
        raise ValueError("empty batch")
    if neg.ndim != 2 or neg.shape[0] != p.size:
        raise ValueError(f"negatives must have shape ({p.size}, k), got {neg.shape}")
    k = neg.shape[1]
    pc, ps = _gather(table, p)
    cc, cs = _gather(table, c)
    e_pos, g_pos = energy_kernel(table.kind, pc, ps, cc, cs, cfg, grad)

    neg_flat = neg.reshape(-1)
    pr = np.repeat(p, k)
    nc, ns = _gather(table, neg_flat)
    npc, nps = pc.repeat(k, axis=0), ps.repeat(k, axis=0)
    bd_neg, g_neg = bd_kernel(cfg.boundary, table.kind, npc, nps, nc, ns, grad)

    terms, d_pos, d_neg = contrastive_terms(e_pos, bd_neg.reshape(-1, k), cfg.gamma1, cfg.gamma2)
    loss = float(np.sum(terms))
    if not grad:
        return loss, None

    out = np.zeros_like(table.params)
    w = d_pos[:, None]
    _scatter(out, table, p, w * g_pos[0], w * g_pos[1], ps)
    _scatter(out, table, c, w * g_pos[2], w * g_pos[3], cs)
    wn = d_neg.reshape(-1)[:, None]
    _scatter(out, table, pr, wn * g_neg[0], wn * g_neg[1], nps)
    _scatter(out, table, neg_flat, wn * g_neg[2], wn * g_neg[3], ns)
    return loss, out

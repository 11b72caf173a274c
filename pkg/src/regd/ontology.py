"""Normalized EL axioms embedded with ELBE (boxes) or ELEM (balls), optionally
scored with the RegD energy and contrastive loss.

Axiom file syntax, one per line (``#`` starts a comment)::

    nf1 A B        A ⊑ B
    nf2 A B C      A ⊓ B ⊑ C
    nf3 A r B      A ⊑ ∃r.B
    nf4 r B A      ∃r.B ⊑ A

A subsumption C ⊑ D is scored as the pair (parent = D, child = C).
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dissim import bd_kernel
from .evaluation import RankResult, pessimistic_rank
from .graph import NegativeSampler
from .model import EmbeddingTable, EnergyConfig, energy_kernel
from .regions import Region, RegionKind

FORMS = ("nf1", "nf2", "nf3", "nf4")
_ARITY = {"nf1": 2, "nf2": 3, "nf3": 3, "nf4": 3}
# column holding the role name, per form
_ROLE_COL = {"nf3": 1, "nf4": 0}
# concept columns per form
_SLOTS = {"nf1": (0, 1), "nf2": (0, 1, 2), "nf3": (0, 2), "nf4": (1, 2)}

EPS_OFFSET = 1e-8
EPS_RADIUS = 1e-8


@dataclass(frozen=True)
class NormalizedAxiom:
    form: str
    args: tuple[str, ...]

    def __post_init__(self):
        if self.form not in _ARITY:
            raise ValueError(f"unknown normal form {self.form!r}")
        if len(self.args) != _ARITY[self.form]:
            raise ValueError(f"{self.form} takes {_ARITY[self.form]} names, got {len(self.args)}")

    @property
    def role(self) -> str | None:
        col = _ROLE_COL.get(self.form)
        return None if col is None else self.args[col]

    @property
    def concepts(self) -> tuple[str, ...]:
        col = _ROLE_COL.get(self.form)
        return tuple(a for i, a in enumerate(self.args) if i != col)

    def __str__(self) -> str:
        return " ".join((self.form, *self.args))


def nf1(sub: str, sup: str) -> NormalizedAxiom:
    return NormalizedAxiom("nf1", (sub, sup))


def parse_axiom(line: str) -> NormalizedAxiom:
    parts = line.split()
    return NormalizedAxiom(parts[0].lower(), tuple(parts[1:]))


def read_axioms(path) -> list[NormalizedAxiom]:
    out = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(parse_axiom(line))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
    return out


def write_axioms(path, axioms: Iterable[NormalizedAxiom]) -> None:
    Path(path).write_text("".join(f"{a}\n" for a in axioms), encoding="utf-8")


def signature(axioms: Iterable[NormalizedAxiom]) -> tuple[list[str], list[str]]:
    """Concept and role names in first-appearance order."""
    concepts: dict[str, None] = {}
    roles: dict[str, None] = {}
    for ax in axioms:
        concepts.update(dict.fromkeys(ax.concepts))
        if ax.role is not None:
            roles.setdefault(ax.role)
    return list(concepts), list(roles)


def entailed_subsumptions(axioms: Iterable[NormalizedAxiom]) -> set[tuple[str, str]]:
    """Named subsumptions A ⊑ B (A != B) entailed by the axioms.

    Standard EL completion over the four normal forms (no ⊥, no role
    inclusions), run to saturation with a worklist.
    """
    told = defaultdict(list)          # A -> [B]              for A ⊑ B
    conj = defaultdict(list)          # A -> [(B, C)]         for A ⊓ B ⊑ C (both orders)
    exists_rhs = defaultdict(list)    # A -> [(r, B)]         for A ⊑ ∃r.B
    exists_lhs = defaultdict(list)    # (r, B) -> [A]         for ∃r.B ⊑ A
    names: dict[str, None] = {}
    for ax in axioms:
        names.update(dict.fromkeys(ax.concepts))
        a = ax.args
        if ax.form == "nf1":
            told[a[0]].append(a[1])
        elif ax.form == "nf2":
            conj[a[0]].append((a[1], a[2]))
            conj[a[1]].append((a[0], a[2]))
        elif ax.form == "nf3":
            exists_rhs[a[0]].append((a[1], a[2]))
        else:
            exists_lhs[(a[0], a[1])].append(a[2])

    subs: dict[str, set[str]] = {n: {n} for n in names}
    links: set[tuple[str, str, str]] = set()          # (C, r, D): C ⊑ ∃r.D
    preds: dict[tuple[str, str], set[str]] = defaultdict(set)  # (D, r) -> {C}
    stack: list[tuple] = [("sub", n, n) for n in names]

    def add(c, x):
        if x not in subs[c]:
            subs[c].add(x)
            stack.append(("sub", c, x))

    while stack:
        task = stack.pop()
        if task[0] == "sub":
            _, c, x = task
            for d in told[x]:
                add(c, d)
            for y, d in conj[x]:
                if y in subs[c]:
                    add(c, d)
            for r, d in exists_rhs[x]:
                if (c, r, d) not in links:
                    links.add((c, r, d))
                    preds[(d, r)].add(c)
                    stack.append(("link", c, r, d))
            # c gained x: every e with e ⊑ ∃r.c now gets the ∃r.x consequences
            for (d, r), cs in list(preds.items()):
                if d != c:
                    continue
                for e in list(cs):
                    for a in exists_lhs[(r, x)]:
                        add(e, a)
        else:
            _, c, r, d = task
            for x in list(subs[d]):
                for a in exists_lhs[(r, x)]:
                    add(c, a)
    return {(c, x) for c, xs in subs.items() for x in xs if x != c}


class BaseModel(str, enum.Enum):
    ELBE = "elbe"
    ELEM = "elem"

    @property
    def kind(self) -> RegionKind:
        return RegionKind.BOX if self is BaseModel.ELBE else RegionKind.BALL


@dataclass(frozen=True)
class OntologyConfig:
    base: BaseModel = BaseModel.ELBE
    use_regd: bool = True
    elem_center_regularizer: bool = True
    rho: float = 0.1
    ball_conjunction: bool = True
    base_margin: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "base", BaseModel(self.base))


def translated_region(region: Region, vector, direction: str = "forward") -> Region:
    """Region for ∃r.B from B: centers move by -v_r (forward) or +v_r (inverse)."""
    vector = np.asarray(vector, dtype=float)
    if direction == "forward":
        center = region.center - vector
    elif direction == "inverse":
        center = region.center + vector
    else:
        raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")
    return type(region)(center, region.log_size)


@dataclass
class CompiledAxioms:
    """Axioms as integer arrays; role slots index the role table."""

    forms: np.ndarray   # (N,) index into FORMS
    args: np.ndarray    # (N, 3), unused slots are -1

    def __len__(self) -> int:
        return self.forms.size

    def subset(self, rows) -> "CompiledAxioms":
        return CompiledAxioms(self.forms[rows], self.args[rows])


def compile_axioms(axioms: Sequence[NormalizedAxiom], table: EmbeddingTable) -> CompiledAxioms:
    forms = np.empty(len(axioms), dtype=np.intp)
    args = np.full((len(axioms), 3), -1, dtype=np.intp)
    for i, ax in enumerate(axioms):
        forms[i] = FORMS.index(ax.form)
        role_col = _ROLE_COL.get(ax.form)
        for j, name in enumerate(ax.args):
            args[i, j] = table.lookup_roles([name])[0] if j == role_col else table.lookup([name])[0]
    return CompiledAxioms(forms, args)


# ---------------------------------------------------------------------------
# per-form parent/child regions with backward passes


class _Grads:
    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.params = np.zeros_like(table.params)
        self.roles = np.zeros_like(table.roles)

    def concept(self, idx, gc, gs, sizes):
        n = self.table.dim
        np.add.at(self.params[:, :n], idx, gc)
        np.add.at(self.params[:, n:], idx, gs * sizes)

    def role(self, idx, g):
        np.add.at(self.roles, idx, g)


class _Pairs:
    """Parent rows (c1, s1), child rows (c2, s2) and an additive penalty for a set of axioms."""

    def __init__(self, table: EmbeddingTable, form: str, args: np.ndarray, cfg: OntologyConfig):
        self.table, self.form, self.args = table, form, args
        self.kind = table.kind
        a, b, c = args[:, 0], args[:, 1], args[:, 2]
        self.penalty = np.zeros(args.shape[0])
        if form == "nf1":
            self.c1, self.s1 = table.centers(b), table.sizes(b)
            self.c2, self.s2 = table.centers(a), table.sizes(a)
        elif form == "nf3":
            self.c1, self.s1 = table.centers(c) - table.roles[b], table.sizes(c)
            self.c2, self.s2 = table.centers(a), table.sizes(a)
        elif form == "nf4":
            self.c1, self.s1 = table.centers(c), table.sizes(c)
            self.c2, self.s2 = table.centers(b) - table.roles[a], table.sizes(b)
        else:
            self.c1, self.s1 = table.centers(c), table.sizes(c)
            if self.kind is RegionKind.BOX:
                self._box_conjunction(a, b)
            elif cfg.ball_conjunction:
                self._ball_conjunction(a, b)
            else:
                raise ValueError("nf2 axioms with balls need ball_conjunction enabled")

    def _box_conjunction(self, a, b):
        t = self.table
        ca, oa, cb, ob = t.centers(a), t.sizes(a), t.centers(b), t.sizes(b)
        self._lo_a = (ca - oa) >= (cb - ob)
        self._hi_a = (ca + oa) <= (cb + ob)
        lo = np.where(self._lo_a, ca - oa, cb - ob)
        hi = np.where(self._hi_a, ca + oa, cb + ob)
        half = (hi - lo) / 2.0
        self._half_live = half > EPS_OFFSET
        self.c2 = (lo + hi) / 2.0
        self.s2 = np.where(self._half_live, half, EPS_OFFSET)
        self._gap = np.maximum(lo - hi, 0.0)
        self.penalty = np.linalg.norm(self._gap, axis=1)
        self._sizes_ab = (oa, ob)

    def _ball_conjunction(self, a, b):
        t = self.table
        ca, ra, cb, rb = t.centers(a), t.sizes(a)[:, 0], t.centers(b), t.sizes(b)[:, 0]
        diff = ca - cb
        dist = np.linalg.norm(diff, axis=1)
        self._u = np.where((dist > 0)[:, None], diff / np.where(dist > 0, dist, 1.0)[:, None], 0.0)
        raw = (ra + rb - dist) / 2.0
        self._rad_live = raw > EPS_RADIUS
        self.c2 = (ca + cb) / 2.0
        self.s2 = np.where(self._rad_live, raw, EPS_RADIUS)[:, None]
        sep = dist - ra - rb
        self._sep_live = sep > 0
        self.penalty = np.maximum(sep, 0.0)
        self._sizes_ab = (ra[:, None], rb[:, None])

    def backward(self, out: _Grads, gc1, gs1, gc2, gs2, gpen):
        t, (a, b, c) = self.table, self.args.T
        if self.form == "nf1":
            out.concept(b, gc1, gs1, self.s1)
            out.concept(a, gc2, gs2, self.s2)
        elif self.form == "nf3":
            out.concept(c, gc1, gs1, self.s1)
            out.role(b, -gc1)
            out.concept(a, gc2, gs2, self.s2)
        elif self.form == "nf4":
            out.concept(c, gc1, gs1, self.s1)
            out.concept(b, gc2, gs2, self.s2)
            out.role(a, -gc2)
        else:
            out.concept(c, gc1, gs1, self.s1)
            if self.kind is RegionKind.BOX:
                self._box_backward(out, a, b, gc2, gs2, gpen)
            else:
                self._ball_backward(out, a, b, gc2, gs2, gpen)

    def _box_backward(self, out, a, b, gc2, gs2, gpen):
        live = self._half_live
        d_lo = gc2 / 2.0 - np.where(live, gs2 / 2.0, 0.0)
        d_hi = gc2 / 2.0 + np.where(live, gs2 / 2.0, 0.0)
        pen = self.penalty[:, None]
        unit_gap = np.where(pen > 0, self._gap / np.where(pen > 0, pen, 1.0), 0.0)
        d_lo = d_lo + gpen[:, None] * unit_gap
        d_hi = d_hi - gpen[:, None] * unit_gap
        oa, ob = self._sizes_ab
        # lo = c - o and hi = c + o of whichever box is active
        gca = np.where(self._lo_a, d_lo, 0.0) + np.where(self._hi_a, d_hi, 0.0)
        goa = -np.where(self._lo_a, d_lo, 0.0) + np.where(self._hi_a, d_hi, 0.0)
        gcb = np.where(self._lo_a, 0.0, d_lo) + np.where(self._hi_a, 0.0, d_hi)
        gob = -np.where(self._lo_a, 0.0, d_lo) + np.where(self._hi_a, 0.0, d_hi)
        out.concept(a, gca, goa, oa)
        out.concept(b, gcb, gob, ob)

    def _ball_backward(self, out, a, b, gc2, gs2, gpen):
        ra, rb = self._sizes_ab
        g_rad = np.where(self._rad_live[:, None], gs2 / 2.0, 0.0)
        g_pen = np.where(self._sep_live, gpen, 0.0)[:, None]
        g_dist = -g_rad + g_pen
        g_r = g_rad - g_pen
        out.concept(a, gc2 / 2.0 + g_dist * self._u, g_r, ra)
        out.concept(b, gc2 / 2.0 - g_dist * self._u, g_r, rb)


def base_kernel(kind: RegionKind, c1, s1, c2, s2, grad: bool = True):
    """Plain ELBE / ELEM inclusion energy (zero whenever the child is inside)."""
    dc = c1 - c2
    if kind is RegionKind.BOX:
        delta = np.abs(dc) + s2 - s1
        pos = np.maximum(delta, 0.0)
        value = np.linalg.norm(pos, axis=1)
        if not grad:
            return value, None
        w = pos / np.where(value > 0, value, 1.0)[:, None]
        sgn = np.sign(dc)
        return value, (w * sgn, -w, -w * sgn, w)
    dist = np.linalg.norm(dc, axis=1)
    u = np.where((dist > 0)[:, None], dc / np.where(dist > 0, dist, 1.0)[:, None], 0.0)
    raw = dist + s2[:, 0] - s1[:, 0]
    value = np.maximum(raw, 0.0)
    if not grad:
        return value, None
    w = (raw > 0).astype(float)[:, None]
    return value, (w * u, -w, -w * u, w)


def _check_kind(table: EmbeddingTable, cfg: OntologyConfig) -> None:
    if table.kind is not cfg.base.kind:
        raise ValueError(f"{cfg.base.value} needs {cfg.base.kind.value} regions, table has {table.kind.value}")


def _positive_energy(pairs: _Pairs, cfg: OntologyConfig, ecfg: EnergyConfig, grad: bool):
    rows = (pairs.c1, pairs.s1, pairs.c2, pairs.s2)
    if cfg.use_regd:
        value, g = energy_kernel(pairs.kind, *rows, ecfg, grad)
    else:
        value, g = base_kernel(pairs.kind, *rows, grad)
    return value + pairs.penalty, g


def _negative_score(pairs: _Pairs, cfg: OntologyConfig, ecfg: EnergyConfig, grad: bool):
    rows = (pairs.c1, pairs.s1, pairs.c2, pairs.s2)
    if cfg.use_regd:
        return bd_kernel(ecfg.boundary, pairs.kind, *rows, grad)
    return base_kernel(pairs.kind, *rows, grad)


def axiom_energies(table: EmbeddingTable, axioms: CompiledAxioms, cfg: OntologyConfig,
                   ecfg: EnergyConfig) -> np.ndarray:
    _check_kind(table, cfg)
    out = np.empty(len(axioms))
    for f, form in enumerate(FORMS):
        rows = np.nonzero(axioms.forms == f)[0]
        if rows.size:
            out[rows], _ = _positive_energy(_Pairs(table, form, axioms.args[rows], cfg), cfg, ecfg, False)
    return out


def axiom_energy(axiom: NormalizedAxiom, table: EmbeddingTable, cfg: OntologyConfig,
                 ecfg: EnergyConfig) -> float:
    return float(axiom_energies(table, compile_axioms([axiom], table), cfg, ecfg)[0])


def corrupt_args(axioms: CompiledAxioms, negatives: np.ndarray, slots: np.ndarray) -> CompiledAxioms:
    """Axioms repeated k times, slot ``slots[i, j]`` replaced by ``negatives[i, j]``."""
    k = negatives.shape[1]
    forms = np.repeat(axioms.forms, k)
    args = np.repeat(axioms.args, k, axis=0)
    args[np.arange(args.shape[0]), slots.reshape(-1)] = negatives.reshape(-1)
    return CompiledAxioms(forms, args)


def default_slots(axioms: CompiledAxioms, k: int) -> np.ndarray:
    """Slot of the first subsumee concept, repeated k times."""
    first = np.array([_SLOTS[FORMS[f]][0] for f in axioms.forms], dtype=np.intp)
    return np.repeat(first[:, None], k, axis=1)


def ontology_batch_loss(table: EmbeddingTable, axioms: CompiledAxioms, negatives: np.ndarray,
                        cfg: OntologyConfig, ecfg: EnergyConfig, grad: bool = True,
                        slots: np.ndarray | None = None):
    """Loss over a batch of axioms and their (N, k) corrupted concepts.

    ``slots`` gives the argument column each negative replaces; by default
    the first concept of the subsumee.

    Returns ``(loss, {"params": ..., "roles": ...})`` (gradient ``None`` when
    ``grad`` is false).
    """
    from .model import contrastive_terms

    _check_kind(table, cfg)
    if len(axioms) == 0:
        raise ValueError("empty batch")
    negatives = np.asarray(negatives, dtype=np.intp)
    if negatives.ndim != 2 or negatives.shape[0] != len(axioms) or negatives.shape[1] == 0:
        raise ValueError("every axiom needs at least one negative")
    k = negatives.shape[1]
    slots = default_slots(axioms, k) if slots is None else np.asarray(slots, dtype=np.intp)
    out = _Grads(table) if grad else None
    loss = 0.0
    for f, form in enumerate(FORMS):
        rows = np.nonzero(axioms.forms == f)[0]
        if not rows.size:
            continue
        pos = _Pairs(table, form, axioms.args[rows], cfg)
        neg_ax = corrupt_args(axioms.subset(rows), negatives[rows], slots[rows])
        neg = _Pairs(table, form, neg_ax.args, cfg)
        e_pos, g_pos = _positive_energy(pos, cfg, ecfg, grad)
        s_neg, g_neg = _negative_score(neg, cfg, ecfg, grad)
        s_neg = s_neg.reshape(-1, k)
        if cfg.use_regd:
            terms, d_pos, d_neg = contrastive_terms(e_pos, s_neg, ecfg.gamma1, ecfg.gamma2)
        else:
            hinge = cfg.base_margin - s_neg
            terms = e_pos + np.maximum(hinge, 0.0).sum(axis=1)
            d_pos = np.ones_like(e_pos)
            d_neg = -(hinge > 0).astype(float)
        loss += float(np.sum(terms))
        if grad:
            w = d_pos[:, None]
            pos.backward(out, *(w * g for g in g_pos), d_pos)
            wn = d_neg.reshape(-1)[:, None]
            neg.backward(out, *(wn * g for g in g_neg), np.zeros(wn.shape[0]))

    if cfg.base is BaseModel.ELEM and cfg.elem_center_regularizer and cfg.rho > 0:
        touched = _touched_concepts(axioms, negatives)
        centers = table.centers(touched)
        norms = np.linalg.norm(centers, axis=1)
        loss += float(cfg.rho * np.sum(np.abs(norms - 1.0)))
        if grad:
            unit = centers / np.where(norms > 0, norms, 1.0)[:, None]
            gc = cfg.rho * np.sign(norms - 1.0)[:, None] * unit
            out.concept(touched, gc, np.zeros((touched.size, 1)), np.ones((touched.size, 1)))
    if not grad:
        return loss, None
    return loss, {"params": out.params, "roles": out.roles}


def _touched_concepts(axioms: CompiledAxioms, negatives: np.ndarray) -> np.ndarray:
    parts = [negatives.reshape(-1)]
    for f, form in enumerate(FORMS):
        rows = axioms.forms == f
        cols = [j for j in range(_ARITY[form]) if j != _ROLE_COL.get(form)]
        parts.append(axioms.args[rows][:, cols].reshape(-1))
    return np.unique(np.concatenate(parts))


class AxiomCorrupter:
    """Corrupts one concept slot per negative, either side of the axiom.

    A corrupted axiom is rejected when it is a training axiom or follows from
    the training axioms by monotonicity: a subsumee slot may not take a
    subclass of the original or of the subsumer, a subsumer slot may not take
    a superclass of the original or of the subsumee.
    """

    def __init__(self, axioms: Sequence[NormalizedAxiom], table: EmbeddingTable):
        self.table = table
        entailed = entailed_subsumptions(axioms)
        n = len(table)
        self._subs = [{i} for i in range(n)]
        self._sups = [{i} for i in range(n)]
        for a, b in entailed:
            if a in table.index and b in table.index:
                ia, ib = table.index[a], table.index[b]
                self._subs[ib].add(ia)
                self._sups[ia].add(ib)
        self._train = compile_axioms(axioms, table)
        self._told: dict[tuple, set[int]] = defaultdict(set)
        for f, args in zip(self._train.forms, self._train.args):
            for slot in _SLOTS[FORMS[f]]:
                self._told[self._fixed(f, args, slot)].add(int(args[slot]))
        self._groups: dict[tuple, int] = {}
        self._forbidden: list[tuple[int, int]] = []
        self._room: list[int] = []
        self._sampler: NegativeSampler | None = None

    @staticmethod
    def _fixed(f, args, slot) -> tuple:
        return int(f), int(slot), tuple(int(x) if j != slot else -1 for j, x in enumerate(args))

    def _blocked(self, f, args, slot) -> set[int]:
        form = FORMS[f]
        a = [int(x) for x in args]
        out = set(self._told[self._fixed(f, args, slot)])
        if form == "nf1":
            out |= self._subs[a[0]] | self._subs[a[1]] if slot == 0 else self._sups[a[0]] | self._sups[a[1]]
        elif form == "nf2":
            if slot == 2:
                out |= self._sups[a[0]] | self._sups[a[1]] | self._sups[a[2]]
            else:
                out |= self._subs[a[slot]] | self._subs[a[2]]
        elif form == "nf3":
            out |= self._subs[a[0]] if slot == 0 else self._sups[a[2]]
        else:
            out |= self._subs[a[1]] if slot == 1 else self._sups[a[2]]
        return out

    def _group(self, f, args, slot, plain: bool = False) -> int:
        key = (*self._fixed(f, args, slot), plain)
        g = self._groups.get(key)
        if g is None:
            g = self._groups[key] = len(self._groups)
            blocked = {int(args[slot])} if plain else self._blocked(f, args, slot)
            self._forbidden.extend((g, v) for v in sorted(blocked))
            self._room.append(len(self.table) - len(blocked))
            self._sampler = None
        return g

    def corrupt(self, axioms: CompiledAxioms, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Returns ``(concepts, slots)``, both (N, k).

        Slots are drawn among those with at least one admissible concept.  An
        axiom with none falls back to replacing its first concept by any
        other concept.
        """
        n = len(axioms)
        choice = rng.integers(0, 6, (n, k))
        slots = np.empty((n, k), dtype=np.intp)
        groups = np.empty((n, k), dtype=np.intp)
        for i in range(n):
            f, args = axioms.forms[i], axioms.args[i]
            options = [s for s in _SLOTS[FORMS[f]] if self._room[self._group(f, args, s)] > 0]
            if not options:
                slot = _SLOTS[FORMS[f]][0]
                slots[i], groups[i] = slot, self._group(f, args, slot, plain=True)
                continue
            slots[i] = np.array(options)[choice[i] % len(options)]
            for slot in options:
                groups[i, slots[i] == slot] = self._group(f, args, slot)
        if self._sampler is None:
            self._sampler = NegativeSampler(len(self.table), self._forbidden,
                                            num_groups=len(self._groups), exclude_self=False)
        concepts = self._sampler.corrupt(groups.reshape(-1), 1, rng).reshape(n, k)
        return concepts, slots


def existential_scores(table: EmbeddingTable, role: str, filler: str, cfg: OntologyConfig,
                       ecfg: EnergyConfig) -> np.ndarray:
    """Energy of ``∃role.filler ⊑ A`` for every concept A in table order."""
    n = len(table)
    args = np.empty((n, 3), dtype=np.intp)
    args[:, 0] = table.lookup_roles([role])[0]
    args[:, 1] = table.lookup([filler])[0]
    args[:, 2] = np.arange(n)
    return axiom_energies(table, CompiledAxioms(np.full(n, FORMS.index("nf4")), args), cfg, ecfg)


def rank_existential_queries(table: EmbeddingTable, queries: Sequence[NormalizedAxiom], cfg: OntologyConfig,
                             ecfg: EnergyConfig) -> list[tuple[NormalizedAxiom, np.ndarray, RankResult]]:
    """Ranks the true answer A of each ``∃r.B ⊑ A`` query among all concepts."""
    out = []
    for q in queries:
        if q.form != "nf4":
            raise ValueError(f"prediction queries must be nf4 axioms, got {q}")
        role, filler, answer = q.args
        scores = existential_scores(table, role, filler, cfg, ecfg)
        rank = pessimistic_rank(scores, int(table.lookup([answer])[0]))
        out.append((q, scores, RankResult(rank, scores.size)))
    return out


def write_predictions(path, table: EmbeddingTable, ranked, top: int = 10) -> None:
    """TSV: query, then the ``top`` best candidates and their energies."""
    lines = ["query\trank\tcandidates\tscores"]
    for q, scores, result in ranked:
        best = np.argsort(scores, kind="stable")[:top]
        names = ",".join(table.ids[i] for i in best)
        vals = ",".join(f"{scores[i]:.6g}" for i in best)
        lines.append(f"∃{q.args[0]}.{q.args[1]}\t{result.rank}\t{names}\t{vals}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")

"""DAG ingestion, transitive closure and reduction, held-out splits, and
negative sampling by child corruption."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

Edge = tuple[str, str]


class CycleError(ValueError):
    def __init__(self, cycle: Sequence[str]):
        self.cycle = list(cycle)
        super().__init__("graph has a cycle: " + " -> ".join(self.cycle))


class Dag:
    """Directed acyclic graph; an edge (u, v) means u is a parent of v."""

    def __init__(self, edges: Iterable[Edge], nodes: Iterable[str] = ()):
        order: dict[str, None] = dict.fromkeys(nodes)
        self.edges: set[Edge] = set()
        for u, v in edges:
            if u == v:
                raise CycleError([u, u])
            order.setdefault(u)
            order.setdefault(v)
            self.edges.add((u, v))
        self.nodes = list(order)
        self.children: dict[str, list[str]] = {n: [] for n in self.nodes}
        for u, v in sorted(self.edges):
            self.children[u].append(v)
        self._topo = self._toposort()

    def _toposort(self) -> list[str]:
        # iterative DFS; grey nodes on the stack expose a cycle
        state: dict[str, int] = {}
        out: list[str] = []
        for root in self.nodes:
            if root in state:
                continue
            stack = [(root, iter(self.children[root]))]
            state[root] = 1
            path = [root]
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    path.pop()
                    state[node] = 2
                    out.append(node)
                elif state.get(nxt) == 1:
                    raise CycleError(path[path.index(nxt):] + [nxt])
                elif nxt not in state:
                    state[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(self.children[nxt])))
        out.reverse()
        return out

    def topological_order(self) -> list[str]:
        return list(self._topo)

    def descendants(self) -> dict[str, set[str]]:
        desc: dict[str, set[str]] = {}
        for node in reversed(self._topo):
            acc: set[str] = set()
            for child in self.children[node]:
                acc.add(child)
                acc |= desc[child]
            desc[node] = acc
        return desc


def transitive_closure(dag: Dag) -> set[Edge]:
    return {(u, v) for u, vs in dag.descendants().items() for v in vs}


def basic_edges(dag: Dag) -> set[Edge]:
    """Transitive reduction: edges not implied by a longer path."""
    desc = dag.descendants()
    out: set[Edge] = set()
    for u in dag.nodes:
        kids = set(dag.children[u])
        implied: set[str] = set()
        for w in kids:
            implied |= desc[w]
        out.update((u, v) for v in kids - implied)
    return out


def read_edges(path) -> list[Edge]:
    edges = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise ValueError(f"{path}:{lineno}: expected 'parent<TAB>child', got {raw!r}")
        edges.append((parts[0], parts[1]))
    return edges


def load_dag(path) -> Dag:
    return Dag(read_edges(path))


def write_edges(path, edges: Iterable[Edge]) -> None:
    Path(path).write_text("".join(f"{u}\t{v}\n" for u, v in sorted(edges)), encoding="utf-8")


@dataclass(frozen=True)
class SplitSpec:
    valid: float = 0.05
    test: float = 0.05
    seed: int = 0
    train_nonbasic: float = 0.0

    def __post_init__(self):
        for name in ("valid", "test", "train_nonbasic"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} fraction must be in [0, 1]")
        if self.valid + self.test > 1.0:
            raise ValueError("valid + test fractions exceed 1")


@dataclass
class Split:
    train: list[Edge]
    valid: list[Edge]
    test: list[Edge]
    closure: set[Edge]
    basic: set[Edge]


def split(dag: Dag, spec: SplitSpec = SplitSpec()) -> Split:
    """Train on basic edges; hold out uniform samples of non-basic edges.

    ``spec.train_nonbasic`` adds that fraction of the remaining non-basic
    edges to the training set.
    """
    closure = transitive_closure(dag)
    basic = basic_edges(dag)
    nonbasic = sorted(closure - basic)
    n_valid = int(round(spec.valid * len(nonbasic)))
    n_test = int(round(spec.test * len(nonbasic)))
    if n_valid + n_test > len(nonbasic):
        raise ValueError(f"not enough non-basic edges ({len(nonbasic)}) for the requested split")
    rng = np.random.default_rng(spec.seed)
    order = rng.permutation(len(nonbasic))
    valid = [nonbasic[i] for i in order[:n_valid]]
    test = [nonbasic[i] for i in order[n_valid:n_valid + n_test]]
    rest = order[n_valid + n_test:]
    extra = [nonbasic[i] for i in rest[: int(round(spec.train_nonbasic * len(rest)))]]
    return Split(sorted(basic) + sorted(extra), valid, test, closure, basic)


def write_split(outdir, result: Split, spec: SplitSpec, source: str = "") -> None:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_edges(out / "basic.tsv", result.train)
    write_edges(out / "closure.tsv", result.closure)
    write_edges(out / "valid.tsv", result.valid)
    write_edges(out / "test.tsv", result.test)
    manifest = {
        "source": source,
        **asdict(spec),
        "counts": {
            "closure": len(result.closure),
            "basic": len(result.basic),
            "train": len(result.train),
            "valid": len(result.valid),
            "test": len(result.test),
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


class NegativeSampler:
    """Replaces the child of a pair with a uniformly drawn node.

    A draw ``(u, v')`` is rejected while ``v' == u`` or ``(u, v')`` is one of
    the ``forbidden`` pairs; rejected slots are redrawn.  Duplicates among
    the k corruptions of one positive are allowed.

    With ``exclude_self=False`` the first element of a pair is an arbitrary
    group id (``num_groups`` of them) rather than a node.
    """

    def __init__(self, num_nodes: int, forbidden: Iterable[tuple[int, int]],
                 num_groups: int | None = None, exclude_self: bool = True):
        self.num_nodes = int(num_nodes)
        self.exclude_self = exclude_self
        groups = self.num_nodes if num_groups is None else int(num_groups)
        pairs = np.array(list(forbidden), dtype=np.int64).reshape(-1, 2)
        self._codes = np.unique(pairs[:, 0] * self.num_nodes + pairs[:, 1])
        # counted over unique codes so duplicate pairs are not double-counted
        self._blocked = np.bincount(self._codes // self.num_nodes, minlength=groups)
        self._self_blocked = np.zeros(groups, dtype=np.int64)
        if exclude_self:
            self_codes = np.arange(groups, dtype=np.int64) * (self.num_nodes + 1)
            self._self_blocked += 1 - np.isin(self_codes, self._codes)

    def _invalid(self, parents: np.ndarray, draws: np.ndarray) -> np.ndarray:
        codes = parents[:, None].astype(np.int64) * self.num_nodes + draws
        bad = draws == parents[:, None] if self.exclude_self else np.zeros(draws.shape, dtype=bool)
        if self._codes.size:
            bad |= np.isin(codes, self._codes)
        return bad

    def available(self, parents) -> np.ndarray:
        """Number of valid corruptions for each parent."""
        parents = np.asarray(parents, dtype=np.intp)
        return self.num_nodes - self._blocked[parents] - self._self_blocked[parents]

    def corrupt(self, parents, k: int, rng: np.random.Generator) -> np.ndarray:
        parents = np.asarray(parents, dtype=np.intp)
        available = self.available(parents)
        if np.any(available <= 0):
            u = int(parents[np.argmax(available <= 0)])
            raise ValueError(f"node index {u} has no valid corruption")
        draws = rng.integers(0, self.num_nodes, (parents.size, k))
        bad = self._invalid(parents, draws)
        while bad.any():
            rows, cols = np.nonzero(bad)
            draws[rows, cols] = rng.integers(0, self.num_nodes, rows.size)
            bad[rows, cols] = self._invalid(parents[rows], draws[rows, cols][:, None])[:, 0]
        return draws


def sample_negatives(positive: Edge, k: int, nodes: Sequence[str], train_edges: Iterable[Edge],
                     rng: np.random.Generator) -> list[Edge]:
    """k corruptions ``(u, v')`` of ``positive = (u, v)`` avoiding training positives."""
    index = {n: i for i, n in enumerate(nodes)}
    forbidden = [(index[a], index[b]) for a, b in train_edges if a in index and b in index]
    sampler = NegativeSampler(len(nodes), forbidden)
    draws = sampler.corrupt([index[positive[0]]], k, rng)[0]
    return [(positive[0], nodes[j]) for j in draws]

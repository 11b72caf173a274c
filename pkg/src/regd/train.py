"""Training loops for DAG and ontology embeddings, and labeled evaluation pairs."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .evaluation import best_threshold_f1
from .graph import Edge, NegativeSampler
from .model import EmbeddingTable, EnergyConfig, batch_loss, energies
from .ontology import (
    AxiomCorrupter,
    CompiledAxioms,
    NormalizedAxiom,
    OntologyConfig,
    axiom_energies,
    compile_axioms,
    ontology_batch_loss,
)
from .optim import Adam

log = logging.getLogger(__name__)

# independent RNG streams derived from one seed
STREAMS = {"init": 0, "train": 1, "eval": 2, "test": 3}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],)))


@dataclass(frozen=True)
class TrainSettings:
    epochs: int = 400
    batch_size: int = 32
    lr: float = 0.01
    negatives: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.negatives < 1 or self.lr <= 0:
            raise ValueError(f"invalid training settings: {self}")


@dataclass
class LabeledPairs:
    parents: np.ndarray
    children: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return self.labels.size


def labeled_pairs(table: EmbeddingTable, positives: Sequence[Edge], known: Iterable[Edge], k: int,
                  rng: np.random.Generator) -> LabeledPairs:
    """Positives plus k corruptions each, avoiding every known true pair.

    The child is corrupted.  A parent related to every other node (a root)
    has no such corruption, so its positives get parent corruptions
    ``(u', v)`` instead; a positive with neither kind keeps no negatives.
    """
    p = table.lookup(u for u, _ in positives)
    c = table.lookup(v for _, v in positives)
    known = [(u, v) for u, v in known if u in table.index and v in table.index]
    ku, kv = table.lookup(u for u, _ in known), table.lookup(v for _, v in known)
    by_child = NegativeSampler(len(table), zip(ku, kv))
    by_parent = NegativeSampler(len(table), zip(kv, ku))
    use_child = by_child.available(p) > 0
    use_parent = ~use_child & (by_parent.available(c) > 0)
    neg_c = by_child.corrupt(p[use_child], k, rng)
    neg_p = by_parent.corrupt(c[use_parent], k, rng)
    parents = np.concatenate([p, np.repeat(p[use_child], k), neg_p.reshape(-1)])
    children = np.concatenate([c, neg_c.reshape(-1), np.repeat(c[use_parent], k)])
    labels = np.zeros(parents.size, bool)
    labels[: p.size] = True
    return LabeledPairs(parents, children, labels)


def _emit(sink: Callable[[str], None] | None, record: dict) -> None:
    if sink is not None:
        sink(json.dumps(record, sort_keys=True))


def train_dag(table: EmbeddingTable, train_edges: Sequence[Edge], cfg: EnergyConfig, settings: TrainSettings,
              valid: LabeledPairs | None = None, sink: Callable[[str], None] | None = None) -> list[dict]:
    """Optimize ``table`` in place on the training edges; returns the per-epoch log."""
    parents = table.lookup(u for u, _ in train_edges)
    children = table.lookup(v for _, v in train_edges)
    if parents.size == 0:
        raise ValueError("no training edges")
    sampler = NegativeSampler(len(table), zip(parents, children))
    rng = rng_stream(settings.seed, "train")
    opt = Adam(settings.lr)
    history = []
    for epoch in range(1, settings.epochs + 1):
        order = rng.permutation(parents.size)
        total = 0.0
        for start in range(0, order.size, settings.batch_size):
            rows = order[start:start + settings.batch_size]
            neg = sampler.corrupt(parents[rows], settings.negatives, rng)
            loss, grad = batch_loss(table, parents[rows], children[rows], neg, cfg)
            opt.step({"params": table.params}, {"params": grad})
            table.clamp_sizes()
            total += loss
        record = {"epoch": epoch, "loss": total}
        if valid is not None:
            record["valid_f1"] = best_threshold_f1(energies(table, valid.parents, valid.children, cfg), valid.labels)[1]
        history.append(record)
        _emit(sink, record)
    table.canonicalize()
    return history


def subsumption_energies(table: EmbeddingTable, pairs: LabeledPairs, cfg: OntologyConfig,
                         ecfg: EnergyConfig) -> np.ndarray:
    """Energies of ``child ⊑ parent`` scored as NF1 axioms."""
    args = np.full((len(pairs), 3), -1, dtype=np.intp)
    args[:, 0], args[:, 1] = pairs.children, pairs.parents
    return axiom_energies(table, CompiledAxioms(np.zeros(len(pairs), dtype=np.intp), args), cfg, ecfg)


def train_ontology(table: EmbeddingTable, axioms: Sequence[NormalizedAxiom], cfg: OntologyConfig, ecfg: EnergyConfig,
                   settings: TrainSettings, valid: LabeledPairs | None = None,
                   sink: Callable[[str], None] | None = None) -> list[dict]:
    if len(axioms) == 0:
        raise ValueError("no training axioms")
    corrupter = AxiomCorrupter(axioms, table)
    compiled = compile_axioms(axioms, table)
    rng = rng_stream(settings.seed, "train")
    opt = Adam(settings.lr)
    params = {"params": table.params, "roles": table.roles}
    history = []
    for epoch in range(1, settings.epochs + 1):
        order = rng.permutation(len(compiled))
        total = 0.0
        for start in range(0, order.size, settings.batch_size):
            batch = compiled.subset(order[start:start + settings.batch_size])
            neg, slots = corrupter.corrupt(batch, settings.negatives, rng)
            loss, grad = ontology_batch_loss(table, batch, neg, cfg, ecfg, slots=slots)
            opt.step(params, grad)
            table.clamp_sizes()
            total += loss
        record = {"epoch": epoch, "loss": total}
        if valid is not None:
            record["valid_f1"] = best_threshold_f1(subsumption_energies(table, valid, cfg, ecfg), valid.labels)[1]
        history.append(record)
        _emit(sink, record)
    table.canonicalize()
    return history

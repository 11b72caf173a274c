"""``regd`` command line: closure, train, eval, verify.

Exit codes: 0 success, 1 usage error, 2 data error, 3 verification failure.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, add_config_arguments, config_from_args
from .dissim import EVAL_COUNTS, DepthConfig
from .evaluation import best_threshold_f1, f1_at_threshold, format_table, ranking_metrics
from .graph import CycleError, Dag, SplitSpec, read_edges, split, write_split
from .model import EmbeddingTable, EnergyConfig, UnknownIdError, energies
from .ontology import (
    OntologyConfig,
    entailed_subsumptions,
    rank_existential_queries,
    read_axioms,
    signature,
    write_predictions,
)
from .train import LabeledPairs, TrainSettings, labeled_pairs, rng_stream, subsumption_energies, train_dag, train_ontology
from .verify import run_all

log = logging.getLogger("regd")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_VERIFY = 0, 1, 2, 3
EMBEDDINGS = "embeddings.regd"
TRAIN_LOG = "train_log.jsonl"
MANIFEST = "manifest.json"
SUMMARY = "summary.json"


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# shared pieces


def energy_config(cfg: RunConfig) -> EnergyConfig:
    return EnergyConfig(lam=cfg.lam, depth=DepthConfig(p=cfg.p, g=cfg.g), boundary=cfg.boundary,
                        gamma1=cfg.gamma1, gamma2=cfg.gamma2)


def ontology_config(cfg: RunConfig) -> OntologyConfig:
    return OntologyConfig(base=cfg.base, use_regd=cfg.use_regd, elem_center_regularizer=cfg.elem_center_regularizer,
                          rho=cfg.rho, base_margin=cfg.base_margin)


def _require(path: str, what: str) -> Path:
    if not path:
        raise UsageError(f"missing --{what}")
    p = Path(path)
    if not p.is_file():
        raise DataError(f"{what} file not found: {path}")
    return p


def _optional_edges(path: str) -> list:
    return read_edges(_require(path, "file")) if path else []


class DagData:
    def __init__(self, cfg: RunConfig):
        self.train = read_edges(_require(cfg.train, "train"))
        self.valid = _optional_edges(cfg.valid)
        self.test = _optional_edges(cfg.test)
        closure = _optional_edges(cfg.closure)
        self.known = set(closure) | set(self.train) | set(self.valid) | set(self.test)
        Dag(self.known)  # rejects cycles
        nodes: dict[str, None] = {}
        for u, v in itertools.chain(self.train, self.valid, self.test, closure):
            nodes.setdefault(u)
            nodes.setdefault(v)
        self.nodes = list(nodes)

    def pairs(self, table: EmbeddingTable, edges, cfg: RunConfig, stream: str) -> LabeledPairs | None:
        if not edges:
            return None
        return labeled_pairs(table, edges, self.known, cfg.eval_negatives, rng_stream(cfg.seed, stream))


class OntologyData:
    def __init__(self, cfg: RunConfig):
        self.train = read_axioms(_require(cfg.train, "train"))
        self.valid = read_axioms(_require(cfg.valid, "valid")) if cfg.valid else []
        self.test = read_axioms(_require(cfg.test, "test")) if cfg.test else []
        wanted = "nf4" if cfg.task == "ontology-prediction" else "nf1"
        for name, axioms in (("valid", self.valid), ("test", self.test)):
            bad = [str(a) for a in axioms if a.form != wanted]
            if bad:
                raise DataError(f"{cfg.task} expects {wanted} axioms in {name}, got {bad[0]!r}")
        everything = self.train + self.valid + self.test
        self.concepts, self.roles = signature(everything)
        self.known = entailed_subsumptions(everything)

    def pairs(self, table: EmbeddingTable, axioms, cfg: RunConfig, stream: str) -> LabeledPairs | None:
        if not axioms or cfg.task != "ontology-inference":
            return None
        # subsumption A ⊑ B is the (parent B, child A) pair
        edges = [(a.args[1], a.args[0]) for a in axioms]
        known = {(b, a) for a, b in self.known}
        return labeled_pairs(table, edges, known, cfg.eval_negatives, rng_stream(cfg.seed, stream))


def load_data(cfg: RunConfig):
    return OntologyData(cfg) if cfg.is_ontology else DagData(cfg)


def score(table: EmbeddingTable, pairs: LabeledPairs, cfg: RunConfig) -> np.ndarray:
    if cfg.is_ontology:
        return subsumption_energies(table, pairs, ontology_config(cfg), energy_config(cfg))
    return energies(table, pairs.parents, pairs.children, energy_config(cfg))


# ---------------------------------------------------------------------------
# commands


def cmd_closure(args) -> int:
    spec = SplitSpec(valid=args.valid, test=args.test, seed=args.seed, train_nonbasic=args.train_nonbasic)
    dag = Dag(read_edges(_require(args.edges, "edges")))
    result = split(dag, spec)
    write_split(args.out, result, spec, source=str(args.edges))
    print(f"closure={len(result.closure)} basic={len(result.basic)} train={len(result.train)} "
          f"valid={len(result.valid)} test={len(result.test)} -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = config_from_args(args).resolved()
    data = load_data(cfg)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"version": __version__, "command": "train", "config": json.loads(cfg.to_json())}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    init = rng_stream(cfg.seed, "init")
    settings = TrainSettings(epochs=cfg.epochs, batch_size=cfg.batch_size, lr=cfg.lr,
                             negatives=cfg.negatives, seed=cfg.seed)
    depth_before = EVAL_COUNTS["depth"]
    with open(out / TRAIN_LOG, "w", encoding="utf-8") as fh:
        def sink(line):
            fh.write(line + "\n")

        if cfg.is_ontology:
            table = EmbeddingTable.initialize(data.concepts, cfg.kind, cfg.dim, init, data.roles)
            valid = data.pairs(table, data.valid, cfg, "eval")
            history = train_ontology(table, data.train, ontology_config(cfg), energy_config(cfg), settings, valid, sink)
        else:
            table = EmbeddingTable.initialize(data.nodes, cfg.kind, cfg.dim, init)
            valid = data.pairs(table, data.valid, cfg, "eval")
            history = train_dag(table, data.train, energy_config(cfg), settings, valid, sink)
    table.save(out / EMBEDDINGS)
    summary = {"epochs": cfg.epochs, "final_loss": history[-1]["loss"] if history else None,
               "depth_evaluations": EVAL_COUNTS["depth"] - depth_before}
    if valid is not None:
        t, f1 = best_threshold_f1(score(table, valid, cfg), valid.labels)
        summary.update(threshold=t, valid_f1=f1)
    (out / SUMMARY).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_eval(args) -> int:
    run = Path(args.run)
    manifest = run / MANIFEST
    if not manifest.is_file():
        raise DataError(f"no {MANIFEST} in {run}")
    base = RunConfig.from_json(json.dumps(json.loads(manifest.read_text(encoding="utf-8"))["config"]))
    cfg = config_from_args(args, base).resolved()
    table = EmbeddingTable.load(Path(args.embeddings) if args.embeddings else run / EMBEDDINGS)
    data = load_data(cfg)

    if cfg.task == "ontology-prediction":
        if not data.test:
            raise UsageError("ontology-prediction evaluation needs --test")
        ranked = rank_existential_queries(table, data.test, ontology_config(cfg), energy_config(cfg))
        metrics = ranking_metrics([r for _, _, r in ranked]).as_dict()
        if args.predictions:
            write_predictions(args.predictions, table, ranked)
    else:
        valid = data.pairs(table, data.valid, cfg, "eval")
        test = data.pairs(table, data.test, cfg, "test")
        if valid is None or test is None:
            raise UsageError("evaluation needs --valid and --test")
        t, valid_f1 = best_threshold_f1(score(table, valid, cfg), valid.labels)
        test_energy = score(table, test, cfg)
        scores = f1_at_threshold(test_energy, test.labels, t)
        metrics = {"t": t, "precision": scores.precision, "recall": scores.recall, "f1": scores.f1,
                   "valid_f1": valid_f1}
        if args.scores:
            lines = ["parent\tchild\tenergy\tlabel"]
            lines += [f"{table.ids[p]}\t{table.ids[c]}\t{e:.17g}\t{int(lab)}"
                      for p, c, e, lab in zip(test.parents, test.children, test_energy, test.labels)]
            Path(args.scores).write_text("\n".join(lines) + "\n", encoding="utf-8")
    text = json.dumps(metrics, indent=2, sort_keys=True) + "\n"
    Path(args.metrics or run / "metrics.json").write_text(text, encoding="utf-8")
    print(format_table(metrics))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_all(seed=args.seed, gradient_points=args.points)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="regd", description="Region embeddings for DAGs and EL ontologies.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("closure", help="transitive closure, basic edges and held-out splits")
    p.add_argument("edges", help="parent<TAB>child edge list")
    p.add_argument("--out", required=True)
    p.add_argument("--valid", type=float, default=0.05)
    p.add_argument("--test", type=float, default=0.05)
    p.add_argument("--train-nonbasic", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_closure)

    p = sub.add_parser("train", help="train region embeddings")
    add_config_arguments(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="threshold on valid, score test (or rank prediction queries)")
    p.add_argument("run", help="output directory of a train run")
    p.add_argument("--embeddings", help="embedding file (default: <run>/embeddings.regd)")
    p.add_argument("--metrics", help="metrics JSON path (default: <run>/metrics.json)")
    p.add_argument("--scores", help="write per-pair test energies as TSV")
    p.add_argument("--predictions", help="write ranked candidates for prediction queries as TSV")
    add_config_arguments(p, skip=("out",))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="run the numerical verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int, default=1000, help="random points per gradient check")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CycleError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UnknownIdError as exc:
        print(f"data error: {exc.args[0]}", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

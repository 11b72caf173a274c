"""Run configuration: dataclass defaults, a flat ``key = value`` file, and
command-line overrides generated from the same fields."""

import argparse
import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, get_type_hints

TASKS = ("dag", "ontology-inference", "ontology-prediction")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "dag"
    train: str = ""
    valid: str = ""
    test: str = ""
    closure: str = ""
    out: str = "run"
    kind: Optional[str] = None
    dim: int = 5
    lam: float = 0.5
    p: int = 2
    g: str = "linear"
    boundary: str = "geometric"
    base: str = "elbe"
    use_regd: bool = True
    elem_center_regularizer: bool = True
    rho: float = 0.1
    base_margin: float = 0.1
    lr: float = 0.01
    batch_size: Optional[int] = None
    epochs: Optional[int] = None
    negatives: int = 10
    eval_negatives: int = 10
    gamma1: Optional[float] = None
    gamma2: Optional[float] = None
    seed: int = 0

    @property
    def is_ontology(self) -> bool:
        return self.task != "dag"

    def resolved(self) -> "RunConfig":
        """Fill task-dependent defaults and validate."""
        if self.task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}, got {self.task!r}")
        out = dataclasses.replace(self)
        onto = self.is_ontology
        if out.epochs is None:
            out.epochs = 5000 if onto else 400
        if out.batch_size is None:
            out.batch_size = 1024 if onto else 32
        if out.gamma1 is None:
            out.gamma1 = 0.0 if onto else 0.001
        if out.gamma2 is None:
            out.gamma2 = 0.0
        base_kind = {"elbe": "box", "elem": "ball"}.get(out.base)
        if base_kind is None:
            raise ConfigError(f"base must be elbe or elem, got {out.base!r}")
        if out.kind is None:
            out.kind = base_kind if onto else "box"
        if out.kind not in ("ball", "box"):
            raise ConfigError(f"kind must be ball or box, got {out.kind!r}")
        if onto and out.kind != base_kind:
            raise ConfigError(f"base {out.base} requires {base_kind} regions, got kind={out.kind}")
        if out.dim < 1 or out.epochs < 0 or out.batch_size < 1 or out.negatives < 1 or out.eval_negatives < 1:
            raise ConfigError("dim, batch_size, negatives and eval_negatives must be positive; epochs non-negative")
        if out.lr <= 0 or out.lam < 0:
            raise ConfigError("lr must be positive and lam non-negative")
        if out.p not in (1, 2):
            raise ConfigError(f"p must be 1 or 2, got {out.p}")
        if out.g not in ("linear", "arcosh1p"):
            raise ConfigError(f"g must be linear or arcosh1p, got {out.g!r}")
        needs = {"geometric": out.kind, "volume": "box", "cone": "ball"}.get(out.boundary)
        if needs is None:
            raise ConfigError(f"boundary must be geometric, volume or cone, got {out.boundary!r}")
        if needs != out.kind:
            raise ConfigError(f"boundary {out.boundary} requires {needs} regions, got kind={out.kind}")
        return out

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        data = json.loads(text)
        return cls(**{f.name: data[f.name] for f in fields(cls) if f.name in data})


def _base_type(hint):
    args = getattr(hint, "__args__", None)
    if args:  # Optional[X]
        return next(a for a in args if a is not type(None))
    return hint


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def convert(name: str, text: str):
    hints = get_type_hints(RunConfig)
    if name not in hints:
        raise ConfigError(f"unknown config key {name!r}")
    kind = _base_type(hints[name])
    if text.strip().lower() in ("none", "") and hints[name] is not kind:
        return None
    try:
        return _parse_bool(text) if kind is bool else kind(text.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def read_config_file(path) -> dict:
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        values[key] = convert(key, value)
    return values


def add_config_arguments(parser: argparse.ArgumentParser, skip: tuple[str, ...] = ()) -> None:
    parser.add_argument("--config", help="flat key = value file; flags override it")
    for f in fields(RunConfig):
        if f.name in skip:
            continue
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None, metavar=f.name.upper(),
                            help=f"(default: {f.default})")


def config_from_args(args: argparse.Namespace, base: Optional[RunConfig] = None) -> RunConfig:
    values = dataclasses.asdict(base) if base is not None else {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config))
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is not None:
            values[f.name] = convert(f.name, raw)
    return RunConfig(**values)

"""Experiment configuration: JSON loading, defaults, validation and hashing.

A config file is a JSON object with optional sections::

    {
      "generator": {"seed": 7, "n_features": 4, "y_size": 3, "kind": "equiv"},
      "solver":    {"learning_rate": 1.0, "max_iters": 500000, ...},
      "me_solver": {"learning_rate": 2.0, ...},
      "net":       {"hidden": [2, 2], "task": "xor", "mode": "backprop", ...},
      "estimator": {"bins": 30, "n_samples": 10000, "seed": 0},
      "suite":     {"seed": 0, "theorem_tv_tol": 0.001, ...},
      "output":    {"dir": "out"}
    }

Missing keys take their defaults, unknown keys are rejected.
"""
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from typing import List, Optional

from maxent_lab.errors import ParseError, RangeError, UnknownKey, ValidationError

GENERATOR_KINDS = ("equiv", "violate_c1", "violate_c2", "xor")
NET_TASKS = ("xor", "bits")
CHECK_IDS = ("C01", "C02", "C03", "C04", "C05", "C06", "C07", "C08", "C09", "C10")


def _need(cond, msg):
    if not cond:
        raise RangeError(msg)


@dataclass
class GeneratorConfig:
    seed: int = 7
    n_features: int = 4
    y_size: int = 3
    kind: str = "equiv"

    def validate(self):
        _need(self.seed >= 0, "generator.seed must be >= 0")
        _need(1 <= self.n_features <= 6, "generator.n_features must be in 1..6")
        _need(1 <= self.y_size <= 4, "generator.y_size must be in 1..4")
        _need(self.kind in GENERATOR_KINDS, f"generator.kind must be one of {GENERATOR_KINDS}")


@dataclass
class SolverConfig:
    learning_rate: float = 1.0
    max_iters: int = 500_000
    grad_tol: float = 1e-6
    seed: int = 0
    l2: float = 0.0

    def validate(self):
        self.train_config()

    def train_config(self):
        from maxent_lab.maxent_core import TrainConfig

        return TrainConfig(**asdict(self))


@dataclass
class MESolverConfig(SolverConfig):
    learning_rate: float = 2.0
    max_iters: int = 200_000
    grad_tol: float = 1e-8


@dataclass
class NetConfig:
    hidden: List[int] = field(default_factory=lambda: [2, 2])
    task: str = "xor"
    seed: int = 0
    learning_rate: float = 2.0
    max_iters: int = 60_000
    grad_tol: float = 1e-10
    l2: float = 1e-5
    beta: float = 0.0
    beta_per_layer: Optional[List[float]] = None
    mode: str = "backprop"
    sweeps: int = 200
    inner_iters: int = 100
    order: str = "top_down"

    def validate(self):
        _need(isinstance(self.hidden, list), "net.hidden must be a list")
        _need(all(isinstance(h, int) and h >= 1 for h in self.hidden), "net.hidden entries must be >= 1")
        _need(self.task in NET_TASKS, f"net.task must be one of {NET_TASKS}")
        _need(self.seed >= 0, "net.seed must be >= 0")
        self.train_config()

    def train_config(self):
        from maxent_lab.recursive_net import NetTrainConfig

        kw = asdict(self)
        for k in ("hidden", "task"):
            kw.pop(k)
        return NetTrainConfig(**kw)


@dataclass
class EstimatorConfig:
    bins: int = 30
    n_samples: int = 10_000
    seed: int = 0

    def validate(self):
        _need(self.bins >= 2, "estimator.bins must be >= 2")
        _need(self.n_samples >= 1, "estimator.n_samples must be >= 1")
        _need(self.seed >= 0, "estimator.seed must be >= 0")


@dataclass
class SuiteConfig:
    seed: int = 0
    checks: List[str] = field(default_factory=lambda: list(CHECK_IDS))
    me_instances: int = 100
    equiv_instances: int = 100
    violate_instances: int = 50
    grad_points: int = 10
    dpi_instances: int = 1000
    xor_seeds: int = 10
    ib_instances: int = 100
    bits_iters: int = 1500
    me_tv_tol: float = 1e-6
    condition_tol: float = 1e-9
    theorem_tv_tol: float = 1e-3
    negative_tv_min: float = 0.05
    grad_rel_tol: float = 1e-4
    reduction_tv_tol: float = 1e-4
    ib_gap_tol: float = 1e-9
    fano_slack: float = 0.15

    def validate(self):
        _need(self.seed >= 0, "suite.seed must be >= 0")
        _need(isinstance(self.checks, list), "suite.checks must be a list")
        bad = [c for c in self.checks if c not in CHECK_IDS]
        _need(not bad, f"suite.checks has unknown ids {bad}")
        for name in (
            "me_instances", "equiv_instances", "violate_instances", "grad_points",
            "dpi_instances", "xor_seeds", "ib_instances", "bits_iters",
        ):
            _need(getattr(self, name) >= 1, f"suite.{name} must be >= 1")
        for name in (
            "me_tv_tol", "condition_tol", "theorem_tv_tol", "negative_tv_min",
            "grad_rel_tol", "reduction_tv_tol", "ib_gap_tol", "fano_slack",
        ):
            _need(getattr(self, name) >= 0, f"suite.{name} must be >= 0")


@dataclass
class OutputConfig:
    dir: str = "out"

    def validate(self):
        _need(isinstance(self.dir, str) and self.dir != "", "output.dir must be a non-empty string")


_SECTIONS = {
    "generator": GeneratorConfig,
    "solver": SolverConfig,
    "me_solver": MESolverConfig,
    "net": NetConfig,
    "estimator": EstimatorConfig,
    "suite": SuiteConfig,
    "output": OutputConfig,
}


@dataclass
class ExperimentConfig:
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    me_solver: MESolverConfig = field(default_factory=MESolverConfig)
    net: NetConfig = field(default_factory=NetConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    suite: SuiteConfig = field(default_factory=SuiteConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self):
        for name in _SECTIONS:
            getattr(self, name).validate()
        return self

    def to_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def config_hash(self):
        return config_hash(self.to_dict())


def config_hash(obj):
    """sha256 of the canonical (sorted-key, compact) JSON encoding."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _coerce(name, value, default):
    """Type-check one field against its default's type."""
    if isinstance(default, bool) or isinstance(value, bool):
        if type(value) is not type(default):
            raise ValidationError(f"{name} has the wrong type")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ValidationError(f"{name} must be a number")
        return float(value)
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ValidationError(f"{name} must be an integer")
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ValidationError(f"{name} must be a string")
        return value
    if isinstance(default, list) or default is None:
        if value is None:
            return None
        if not isinstance(value, list):
            raise ValidationError(f"{name} must be a list")
        return list(value)
    return value


def _section(cls, name, obj):
    if not isinstance(obj, dict):
        raise ValidationError(f"section {name!r} must be an object")
    known = {f.name for f in fields(cls)}
    for key in obj:
        if key not in known:
            raise UnknownKey(f"unknown key {name}.{key}")
    inst = cls()
    for key, value in obj.items():
        setattr(inst, key, _coerce(f"{name}.{key}", value, getattr(inst, key)))
    if name == "net" and inst.beta_per_layer is not None:
        inst.beta_per_layer = [_coerce("net.beta_per_layer", b, 0.0) for b in inst.beta_per_layer]
    return inst


def from_dict(obj):
    if not isinstance(obj, dict):
        raise ValidationError("config must be a JSON object")
    for key in obj:
        if key not in _SECTIONS:
            raise UnknownKey(f"unknown key {key}")
    parts = {name: _section(cls, name, obj[name]) for name, cls in _SECTIONS.items() if name in obj}
    return ExperimentConfig(**parts).validate()


def parse_config(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    return from_dict(obj)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    return parse_config(text)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(cfg.to_json())
    return path

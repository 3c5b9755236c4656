"""Declarative experiment configuration.

A config is a YAML mapping. Every key is optional; unspecified values default
to the federated hyperparameters of the reference setup (Adam, lr 0.001,
batch 32, 5 local epochs; fitness coefficients 0.5/0.3/0.2, mutation rate
0.01, two elites). Validation happens before any compute, and errors point at
the offending line of the source file.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional, Union

import yaml

from .errors import ConfigError
from .evolution import EvolutionConfig, FitnessWeights, HealthMode
from .metrics import MetricConfig
from .strategies import StrategyConfig, StrategyKind


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _unit(x):
    return 0 <= x <= 1


def _open_unit(x):
    return 0 < x <= 1


@dataclass
class FederationSpec:
    clients: int = 10
    samples_per_client: int = 128
    dim: int = 16
    classes: int = 3
    skew: float = 0.3
    holdout: int = 600
    class_sep: float = 1.0
    spread: float = 1.0


@dataclass
class ModelSpec:
    hidden: list = field(default_factory=lambda: [32])


@dataclass
class TrainingSpec:
    lr: float = 0.001
    batch_size: int = 32
    epochs: int = 5
    # FedSGD clients: None = full shard, otherwise one random batch of this size
    gradient_batch: Optional[int] = None


@dataclass
class StrategySpec:
    participation: float = 1.0
    server_lr: float = 1.0


@dataclass
class EvolutionSpec:
    epsilon: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2
    health_mode: str = "bounded"
    elite: Union[int, float] = 2
    mutation_rate: float = 0.01
    mutation_scale: float = 0.01
    generations: int = 1


@dataclass
class MetricSpec:
    sigma_target: float = 0.1
    zero_tolerance: float = 1e-8


@dataclass
class OutputSpec:
    dir: str = "runs/default"
    wall_clock_in_csv: bool = False


@dataclass
class ExperimentConfig:
    seed: int = 0
    rounds: int = 30
    strategies: list = field(default_factory=lambda: ["fedavg", "fedsgd", "fedavgen"])
    accuracy_threshold: float = 0.85
    federation: FederationSpec = field(default_factory=FederationSpec)
    model: ModelSpec = field(default_factory=ModelSpec)
    training: TrainingSpec = field(default_factory=TrainingSpec)
    strategy: StrategySpec = field(default_factory=StrategySpec)
    evolution: EvolutionSpec = field(default_factory=EvolutionSpec)
    metrics: MetricSpec = field(default_factory=MetricSpec)
    output: OutputSpec = field(default_factory=OutputSpec)

    @property
    def layer_dims(self) -> list[int]:
        return [self.federation.dim, *self.model.hidden, self.federation.classes]

    def metric_config(self) -> MetricConfig:
        return MetricConfig(self.metrics.sigma_target, self.metrics.zero_tolerance)

    def fitness_weights(self) -> FitnessWeights:
        e = self.evolution
        return FitnessWeights(e.epsilon, e.beta, e.gamma, HealthMode(e.health_mode))

    def evolution_config(self) -> EvolutionConfig:
        e = self.evolution
        return EvolutionConfig(e.elite, e.mutation_rate, e.mutation_scale, e.generations, self.seed)

    def strategy_config(self, kind) -> StrategyConfig:
        kind = StrategyKind(kind)
        gen = kind is StrategyKind.FEDAVGEN
        return StrategyConfig(
            kind=kind,
            participation_fraction=self.strategy.participation,
            server_learning_rate=self.strategy.server_lr,
            evolution=self.evolution_config() if gen else None,
            fitness_weights=self.fitness_weights() if gen else None,
        )

    def to_dict(self) -> dict:
        return asdict(self)


# (section, key) -> (predicate, requirement text); absent entries only get type checks
_RULES = {
    (None, "seed"): (lambda x: 0 <= x < 2**64, "an unsigned 64-bit integer"),
    (None, "rounds"): (_nonneg, ">= 0"),
    (None, "accuracy_threshold"): (_unit, "in [0, 1]"),
    (None, "strategies"): (
        lambda xs: len(xs) > 0 and all(s in {k.value for k in StrategyKind} for s in xs) and len(set(xs)) == len(xs),
        "a non-empty list of distinct names from fedavg, fedsgd, fedavgen",
    ),
    ("federation", "clients"): (lambda x: x >= 1, ">= 1"),
    ("federation", "samples_per_client"): (lambda x: x >= 1, ">= 1"),
    ("federation", "dim"): (lambda x: x >= 1, ">= 1"),
    ("federation", "classes"): (lambda x: x >= 2, ">= 2"),
    ("federation", "skew"): (_unit, "in [0, 1]"),
    ("federation", "holdout"): (lambda x: x >= 1, ">= 1"),
    ("federation", "class_sep"): (_pos, "> 0"),
    ("federation", "spread"): (_pos, "> 0"),
    ("model", "hidden"): (lambda xs: all(isinstance(h, int) and not isinstance(h, bool) and h >= 1 for h in xs),
                          "a list of positive integers"),
    ("training", "lr"): (_pos, "> 0"),
    ("training", "batch_size"): (lambda x: x >= 1, ">= 1"),
    ("training", "epochs"): (_nonneg, ">= 0"),
    ("training", "gradient_batch"): (
        lambda x: x is None or (isinstance(x, int) and not isinstance(x, bool) and x >= 1),
        "null or an integer >= 1",
    ),
    ("strategy", "participation"): (_open_unit, "in (0, 1]"),
    ("strategy", "server_lr"): (_pos, "> 0"),
    ("evolution", "epsilon"): (_nonneg, ">= 0"),
    ("evolution", "beta"): (_nonneg, ">= 0"),
    ("evolution", "gamma"): (_nonneg, ">= 0"),
    ("evolution", "health_mode"): (lambda x: x in ("bounded", "literal"), "'bounded' or 'literal'"),
    ("evolution", "elite"): (lambda x: (isinstance(x, int) and x >= 1) or 0 < x <= 1,
                             "an integer count >= 1 or a fraction in (0, 1]"),
    ("evolution", "mutation_rate"): (_unit, "in [0, 1]"),
    ("evolution", "mutation_scale"): (_pos, "> 0"),
    ("evolution", "generations"): (lambda x: x >= 1, ">= 1"),
    ("metrics", "sigma_target"): (_pos, "> 0"),
    ("metrics", "zero_tolerance"): (_nonneg, ">= 0"),
}

_SECTIONS = {
    "federation": FederationSpec,
    "model": ModelSpec,
    "training": TrainingSpec,
    "strategy": StrategySpec,
    "evolution": EvolutionSpec,
    "metrics": MetricSpec,
    "output": OutputSpec,
}


def _line_map(node, prefix=(), out=None) -> dict:
    """Map key paths to 1-based source lines from a composed YAML node."""
    out = {} if out is None else out
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            _line_map(v, path, out)
    return out


def _coerce(value, default, where: str, line):
    """Check ``value`` against the type of ``default``."""
    if value is None:
        if default is None:
            return None
        raise ConfigError(f"{where} must not be null", line)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false, got {value!r}", line)
        return value
    if isinstance(default, int) and not isinstance(default, bool) and where.split(".")[-1] != "elite":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer, got {value!r}", line)
        return value
    if isinstance(default, (int, float)) or default is None:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number, got {value!r}", line)
        if isinstance(value, float) and not math.isfinite(value):
            raise ConfigError(f"{where} must be finite", line)
        return value
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}", line)
        return value
    if isinstance(default, list):
        if not isinstance(value, list):
            raise ConfigError(f"{where} must be a list, got {value!r}", line)
        return list(value)
    return value


def _fill(obj, data: Mapping, section: Optional[str], lines: dict, source: str):
    names = {f.name for f in fields(obj)}
    prefix = (section,) if section else ()
    for key, value in data.items():
        line = lines.get(prefix + (key,))
        where = ".".join(prefix + (str(key),))
        if key not in names:
            raise ConfigError(f"unknown key {where!r}", line, source)
        if section is None and key in _SECTIONS:
            if value is None:
                continue
            if not isinstance(value, Mapping):
                raise ConfigError(f"{where} must be a mapping", line, source)
            _fill(getattr(obj, key), value, key, lines, source)
            continue
        try:
            value = _coerce(value, getattr(obj, key), where, line)
            rule = _RULES.get((section, key))
            if rule is not None and not rule[0](value):
                raise ConfigError(f"{where} must be {rule[1]}, got {value!r}", line)
        except ConfigError as exc:
            raise ConfigError(exc.message, exc.line, source) from None
        setattr(obj, key, value)


def _cross_check(cfg: ExperimentConfig, lines: dict, source: str) -> None:
    try:
        cfg.fitness_weights()
        cfg.evolution_config()
        cfg.metric_config()
    except ConfigError as exc:
        line = lines.get(("evolution", "epsilon")) or lines.get(("evolution",))
        raise ConfigError(exc.message, line, source) from None


def config_from_mapping(data: Optional[Mapping], lines: Optional[dict] = None,
                        source: str = "<config>") -> ExperimentConfig:
    cfg = ExperimentConfig()
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError("top level must be a mapping", 1, source)
    _fill(cfg, data, None, lines or {}, source)
    _cross_check(cfg, lines or {}, source)
    return cfg


def load_config(path, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    """Parse and validate a YAML config file.

    ``overrides`` maps dotted keys (``"rounds"``, ``"evolution.health_mode"``)
    to values applied on top of the file.
    """
    path = Path(path)
    source = str(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror or exc}", None, source) from None
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", line, source) from None
    lines = _line_map(node) if node is not None else {}
    data = dict(data or {}) if isinstance(data, Mapping) or data is None else data
    if overrides and isinstance(data, dict):
        for dotted, value in overrides.items():
            parts = dotted.split(".")
            target = data
            for p in parts[:-1]:
                if not isinstance(target.get(p), dict):
                    target[p] = dict(target.get(p) or {})
                target = target[p]
            target[parts[-1]] = value
    return config_from_mapping(data, lines, source)

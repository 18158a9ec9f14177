"""Experiment configuration: a single JSON document with every default resolved.

Validation collects every problem before reporting, each as
``<field path>: <constraint>``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields
from typing import Any, Optional

from ..data.split import DEFAULT_SPLIT, STRATEGIES
from ..federated import AGGREGATIONS, FedConfig, OptimConfig
from ..model import ModelConfig
from ..model.bigat import POOLINGS

FORMAT_VERSION = 1
ENV_SEED = "FEDGAT_SEED"
ENV_OUTPUT_DIR = "FEDGAT_OUTPUT_DIR"
FEATURE_MODES = ("tfidf", "tf")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class SourceConfig:
    """One dataset. Exactly one of: ``jsonl``; ``tree_dir`` + ``label_file``; ``synthetic_events``."""

    name: str = ""
    jsonl: Optional[str] = None
    tree_dir: Optional[str] = None
    label_file: Optional[str] = None
    source_text: Optional[str] = None
    synthetic_events: Optional[int] = None
    synthetic_seed: int = 0


@dataclass
class DataSection:
    sources: list[SourceConfig] = field(default_factory=list)
    vocab_size: int = 5000
    feature_mode: str = "tfidf"
    split: list[float] = field(default_factory=lambda: list(DEFAULT_SPLIT))
    partition: str = "by-dataset"


@dataclass
class FederationSection:
    m: int = 2
    k: int = 2
    lam: float = 0.2
    local_epochs: int = 2
    global_rounds: int = 15
    aggregation: str = "uniform"


@dataclass
class ModelSection:
    heads: int = 5
    hidden_dim: int = 64
    pooling: str = "mean"
    leaky_slope: float = 0.2


@dataclass
class OptimizerSection:
    lr: float = 5e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 1


@dataclass
class ExperimentConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    data: DataSection = field(default_factory=DataSection)
    federation: FederationSection = field(default_factory=FederationSection)
    model: ModelSection = field(default_factory=ModelSection)
    optimizer: OptimizerSection = field(default_factory=OptimizerSection)
    format_version: int = FORMAT_VERSION

    def fed_config(self) -> FedConfig:
        f = self.federation
        return FedConfig(f.m, f.k, f.lam, f.local_epochs, f.global_rounds, f.aggregation, self.seed)

    def model_config(self) -> ModelConfig:
        m = self.model
        return ModelConfig(in_dim=self.data.vocab_size, hidden_dim=m.hidden_dim, heads=m.heads,
                           pooling=m.pooling, leaky_slope=m.leaky_slope)

    def optim_config(self) -> OptimConfig:
        o = self.optimizer
        return OptimConfig(o.lr, o.beta1, o.beta2, o.eps, o.batch_size)

    def to_dict(self) -> dict:
        return _to_dict(self)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


# JSON key -> attribute name, where they differ
_RENAMES = {"lambda": "lam"}
_JSON_NAMES = {v: k for k, v in _RENAMES.items()}
_NESTED = {"data": DataSection, "federation": FederationSection, "model": ModelSection,
           "optimizer": OptimizerSection}


def _to_dict(obj) -> Any:
    if isinstance(obj, list):
        return [_to_dict(x) for x in obj]
    if hasattr(obj, "__dataclass_fields__"):
        out = {}
        for f in fields(obj):
            value = getattr(obj, f.name)
            if isinstance(obj, SourceConfig) and value is None:
                continue
            out[_JSON_NAMES.get(f.name, f.name)] = _to_dict(value)
        return out
    return obj


def _check_type(value, default, path: str, errors: list[str], optional_kind: Optional[type] = None) -> bool:
    kind = optional_kind or type(default)
    if value is None and optional_kind is not None:
        return True
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    elif kind is str:
        ok = isinstance(value, str)
    elif kind is list:
        ok = isinstance(value, list)
    else:
        ok = True
    if not ok:
        errors.append(f"{path}: expected {kind.__name__}, got {type(value).__name__}")
    return ok


_OPTIONAL_KINDS = {"jsonl": str, "tree_dir": str, "label_file": str, "source_text": str, "synthetic_events": int}


def _fill(cls, obj, path: str, errors: list[str]):
    inst = cls()
    if not isinstance(obj, dict):
        errors.append(f"{path or '<root>'}: expected an object")
        return inst
    known = {f.name for f in fields(cls)}
    for key, value in obj.items():
        attr = _RENAMES.get(key, key)
        where = f"{path}.{key}" if path else key
        if attr not in known:
            errors.append(f"{where}: unknown field")
            continue
        if cls is ExperimentConfig and attr in _NESTED:
            setattr(inst, attr, _fill(_NESTED[attr], value, where, errors))
        elif cls is DataSection and attr == "sources":
            if _check_type(value, [], where, errors):
                inst.sources = [_fill(SourceConfig, s, f"{where}[{i}]", errors) for i, s in enumerate(value)]
        elif cls is SourceConfig and attr in _OPTIONAL_KINDS:
            if _check_type(value, None, where, errors, _OPTIONAL_KINDS[attr]):
                setattr(inst, attr, value)
        else:
            default = getattr(inst, attr)
            if _check_type(value, default, where, errors):
                setattr(inst, attr, float(value) if isinstance(default, float) else value)
    return inst


def _validate(cfg: ExperimentConfig, errors: list[str]) -> None:
    def need(cond: bool, msg: str) -> None:
        if not cond:
            errors.append(msg)

    need(cfg.format_version == FORMAT_VERSION, f"format_version: must be {FORMAT_VERSION}")
    need(cfg.seed >= 0, "seed: must be >= 0")
    need(bool(cfg.output_dir), "output_dir: must be non-empty")

    d = cfg.data
    need(len(d.sources) >= 1, "data.sources: at least one source is required")
    names = [s.name for s in d.sources]
    need(len(set(names)) == len(names), "data.sources: source names must be unique")
    for i, s in enumerate(d.sources):
        p = f"data.sources[{i}]"
        need(bool(s.name), f"{p}.name: must be non-empty")
        kinds = [s.jsonl is not None, s.tree_dir is not None or s.label_file is not None,
                 s.synthetic_events is not None]
        need(sum(kinds) == 1, f"{p}: give exactly one of jsonl, tree_dir+label_file, synthetic_events")
        if kinds[1]:
            need(s.tree_dir is not None and s.label_file is not None,
                 f"{p}: tree_dir and label_file must be given together")
        if s.synthetic_events is not None:
            need(s.synthetic_events >= 4, f"{p}.synthetic_events: must be >= 4")
    need(1 <= d.vocab_size, "data.vocab_size: must be >= 1")
    need(d.feature_mode in FEATURE_MODES, f"data.feature_mode: must be one of {FEATURE_MODES}")
    if len(d.split) != 3 or not all(isinstance(r, (int, float)) and not isinstance(r, bool) for r in d.split):
        errors.append("data.split: must be three numbers (train, val, test)")
    else:
        need(all(r >= 0 for r in d.split) and d.split[0] > 0 and abs(sum(d.split) - 1.0) <= 1e-9,
             "data.split: ratios must be nonnegative, train > 0, summing to 1")
    need(d.partition in STRATEGIES, f"data.partition: must be one of {STRATEGIES}")

    f = cfg.federation
    need(f.m >= 1, "federation.m: must be >= 1")
    need(f.k >= 1, "federation.k: must be >= 1")
    if f.k > f.m:
        errors.append(f"federation.k, federation.m: k ({f.k}) must not exceed m ({f.m})")
    need(0.0 <= f.lam <= 1.0, f"federation.lambda: must lie in [0, 1], got {f.lam}")
    need(f.local_epochs >= 1, "federation.local_epochs: must be >= 1")
    need(f.global_rounds >= 1, "federation.global_rounds: must be >= 1")
    need(f.aggregation in AGGREGATIONS, f"federation.aggregation: must be one of {AGGREGATIONS}")
    if d.partition == "by-dataset" and d.sources:
        need(f.m == len(d.sources),
             f"federation.m, data.sources: by-dataset partitioning needs m == number of sources ({len(d.sources)})")

    mo = cfg.model
    need(mo.heads >= 1, "model.heads: must be >= 1")
    need(mo.hidden_dim >= 1, "model.hidden_dim: must be >= 1")
    need(mo.pooling in POOLINGS, f"model.pooling: must be one of {POOLINGS}")
    need(0.0 < mo.leaky_slope < 1.0, "model.leaky_slope: must lie in (0, 1)")

    o = cfg.optimizer
    need(o.lr >= 0, "optimizer.lr: must be >= 0")
    need(0.0 <= o.beta1 < 1.0, "optimizer.beta1: must lie in [0, 1)")
    need(0.0 <= o.beta2 < 1.0, "optimizer.beta2: must lie in [0, 1)")
    need(o.eps > 0, "optimizer.eps: must be > 0")
    need(o.batch_size >= 1, "optimizer.batch_size: must be >= 1")


def config_from_dict(obj: Any, base_dir: Optional[str] = None, env: Optional[dict] = None) -> ExperimentConfig:
    """Build and validate; raises :class:`ConfigError` listing every violation.

    Relative dataset paths are resolved against ``base_dir``. ``env``
    (default ``os.environ``) may override the seed and output directory.
    """
    errors: list[str] = []
    cfg = _fill(ExperimentConfig, obj, "", errors)
    env = os.environ if env is None else env
    if env.get(ENV_SEED):
        try:
            cfg.seed = int(env[ENV_SEED])
        except ValueError:
            errors.append(f"{ENV_SEED}: expected an integer, got {env[ENV_SEED]!r}")
    if env.get(ENV_OUTPUT_DIR):
        cfg.output_dir = env[ENV_OUTPUT_DIR]
    if base_dir:
        for s in cfg.data.sources:
            for attr in ("jsonl", "tree_dir", "label_file", "source_text"):
                value = getattr(s, attr)
                if isinstance(value, str) and not os.path.isabs(value):
                    setattr(s, attr, os.path.join(base_dir, value))
    _validate(cfg, errors)
    if errors:
        raise ConfigError(errors)
    return cfg


def parse_json_text(text: str, origin: str = "<config>") -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{origin}:{exc.lineno}:{exc.colno}: JSON syntax error: {exc.msg}"]) from None


def load_config(path: str | os.PathLike, env: Optional[dict] = None, resolve_paths: bool = True) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from None
    base = os.path.dirname(os.path.abspath(path)) if resolve_paths else None
    return config_from_dict(parse_json_text(text, str(path)), base, env)


def validate_config(path: str | os.PathLike) -> tuple[Optional[ExperimentConfig], list[str]]:
    """Parsed config and an empty list, or ``None`` and every violation found."""
    try:
        return load_config(path, env={}, resolve_paths=False), []
    except ConfigError as exc:
        return None, exc.errors

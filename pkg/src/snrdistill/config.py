"""Run configuration: flat, line-oriented `section.key = value` text.

Every field has a default, unknown keys are rejected, and
parse -> serialize -> parse is a fixed point, so configs diff cleanly and a
run directory always carries the fully resolved settings it actually used.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .util import fmt_float
from .weighting import STRATEGY_NAMES


@dataclass
class DatasetSection:
    num_classes: int = 8
    latent_dim: int = 2
    radius: float = 2.0
    stddev: float = 0.15
    seed: int = 0


@dataclass
class ModelSection:
    hidden: tuple[int, ...] = (128, 128)
    embed_dim: int = 16
    num_frequencies: int = 8


@dataclass
class ScheduleSection:
    kind: str = "cosine"
    t_min: float = 1e-4
    # discrete table used only by the ancestral sampler
    n_train: int = 1000
    beta_start: float = 1e-4
    beta_end: float = 2e-2


@dataclass
class TrainSection:
    updates: int = 16000
    batch_size: int = 128
    lr: float = 1e-3
    parameterization: str = "epsilon"
    strategy: str = "eps-snr"


@dataclass
class DistillSection:
    iterations: int = 3
    n_start: int = 64
    steps_per_round: int = 4000
    batch_size: int = 256
    lr: float = 1e-3
    strategy: str = "bsa"
    gamma: float = 5.0


@dataclass
class EvalSection:
    num_samples: int = 4096
    reference_samples: int = 16384
    repetitions: int = 5
    seed: int = 500


@dataclass
class RunSection:
    seeds: tuple[int, ...] = (1, 2, 3)
    strategies: tuple[str, ...] = ("trunc-snr", "min-snr", "bsa")
    output_dir: str = "runs"


@dataclass
class RunConfig:
    dataset: DatasetSection = field(default_factory=DatasetSection)
    model: ModelSection = field(default_factory=ModelSection)
    schedule: ScheduleSection = field(default_factory=ScheduleSection)
    train: TrainSection = field(default_factory=TrainSection)
    distill: DistillSection = field(default_factory=DistillSection)
    eval: EvalSection = field(default_factory=EvalSection)
    run: RunSection = field(default_factory=RunSection)


def default_config() -> RunConfig:
    return RunConfig()


def _parse_value(raw: str, current, key: str):
    kind = type(current)
    try:
        if kind is bool:
            if raw not in ("true", "false"):
                raise ValueError(raw)
            return raw == "true"
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind is tuple:
            if raw == "":
                return ()
            element = type(current[0]) if current else str
            return tuple(element(part.strip()) for part in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"unsupported field type for {key}")  # pragma: no cover


def parse_config(text: str) -> RunConfig:
    """Parse config text; unknown sections or keys raise ConfigError."""
    cfg = default_config()
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {line!r}")
        dotted, _, raw_value = line.partition("=")
        dotted = dotted.strip()
        raw_value = raw_value.strip()
        if "." not in dotted:
            raise ConfigError(f"line {lineno}: key {dotted!r} is missing its section")
        section_name, _, key = dotted.partition(".")
        if not hasattr(cfg, section_name) or section_name.startswith("_"):
            raise ConfigError(f"line {lineno}: unknown section {section_name!r}")
        section = getattr(cfg, section_name)
        field_names = {f.name for f in dataclasses.fields(section)}
        if key not in field_names:
            raise ConfigError(f"line {lineno}: unknown key {dotted!r}")
        current = getattr(section, key)
        setattr(section, key, _parse_value(raw_value, current, dotted))
    validate_config(cfg)
    return cfg


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return fmt_float(value)
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text with every field stated explicitly."""
    lines = []
    for section_field in dataclasses.fields(cfg):
        section = getattr(cfg, section_field.name)
        for f in dataclasses.fields(section):
            value = getattr(section, f.name)
            lines.append(f"{section_field.name}.{f.name} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return default_config()
    return parse_config(Path(path).read_text(encoding="utf-8"))


def validate_config(cfg: RunConfig) -> None:
    if cfg.schedule.kind != "cosine":
        raise ConfigError(f"unknown schedule kind {cfg.schedule.kind!r}")
    if cfg.train.parameterization not in ("epsilon", "x"):
        raise ConfigError(f"unknown parameterization {cfg.train.parameterization!r}")
    for name in (cfg.train.strategy, cfg.distill.strategy, *cfg.run.strategies):
        if name not in STRATEGY_NAMES:
            raise ConfigError(f"unknown weight strategy {name!r}; choose from {STRATEGY_NAMES}")
    if cfg.distill.n_start % (2 ** cfg.distill.iterations) != 0:
        raise ConfigError(
            f"distill.n_start={cfg.distill.n_start} must be divisible by "
            f"2^iterations={2 ** cfg.distill.iterations}"
        )
    if cfg.eval.repetitions < 1:
        raise ConfigError("eval.repetitions must be >= 1")
    if not cfg.run.seeds:
        raise ConfigError("run.seeds must not be empty")

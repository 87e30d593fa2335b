"""Experiment configuration: JSON file, flag overrides, resolved echo."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .cell import ParisParams
from .errors import ConfigError
from .fleet import INSPECTION_STRATEGIES
from .training import TrainingConfig

__all__ = ["InspectionConfig", "ExperimentConfig", "load_config"]


@dataclass
class InspectionConfig:
    n: int = 60
    strategy: str = "representative"
    year: int = 5


@dataclass
class ExperimentConfig:
    seed: int = 1729
    years: int = 5
    flights_per_day: int = 4
    paris_c: float = 1.5e-11
    paris_m: float = 3.8
    paris_f: float = 1.0
    a0_m: float = 0.005
    a_max_m: float = 0.05
    inspection: InspectionConfig = field(default_factory=InspectionConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)

    def __post_init__(self) -> None:
        positives = {
            "years": self.years,
            "flights_per_day": self.flights_per_day,
            "paris_c": self.paris_c,
            "paris_m": self.paris_m,
            "paris_f": self.paris_f,
            "a0_m": self.a0_m,
            "a_max_m": self.a_max_m,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.a0_m >= self.a_max_m:
            raise ConfigError(f"a0_m must be below a_max_m, got {self.a0_m} >= {self.a_max_m}")
        if self.inspection.year > self.years:
            raise ConfigError(f"inspection year {self.inspection.year} exceeds "
                              f"simulated years {self.years}")
        if self.inspection.strategy not in INSPECTION_STRATEGIES:
            raise ConfigError(f"unknown inspection strategy {self.inspection.strategy!r}")
        if not 1 <= self.inspection.n <= 300:
            raise ConfigError(f"inspection n must be in [1, 300], got {self.inspection.n}")

    def paris(self) -> ParisParams:
        return ParisParams(c=self.paris_c, m=self.paris_m, f=self.paris_f)

    def to_json_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True, indent=1))


def _build(data: dict) -> ExperimentConfig:
    data = dict(data)
    try:
        insp = InspectionConfig(**data.pop("inspection", {}))
        train = TrainingConfig(**data.pop("training", {}))
        return ExperimentConfig(inspection=insp, training=train, **data)
    except TypeError as e:
        raise ConfigError(f"unknown or missing config field: {e}") from e
    except ValueError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Resolve a config from an optional JSON file plus flag overrides.

    Overrides use dotted keys for sub-sections, e.g. ``training.epochs``.
    """
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON in {p}: line {e.lineno}: {e.msg}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be a JSON object: {p}")
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, name = key.split(".", 1)
            data.setdefault(section, {})[name] = value
        else:
            data[key] = value
    return _build(data)

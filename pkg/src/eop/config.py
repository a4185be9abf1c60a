"""Run configuration: defaults, an INI-style config file, then command-line flags.

Config files hold ``key = value`` pairs under an ``[eop]`` section::

    [eop]
    minutes_per_year = 128520
    j_star = 4
    calibration_bounds = 0.1:3.0
    holidays = 2005-12-26, 2005-12-27

The path comes from ``--config`` or the ``EOP_CONFIG`` environment variable.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import asdict, dataclass, field, fields, replace
from datetime import date
from pathlib import Path

ENV_VAR = "EOP_CONFIG"
SECTION = "eop"


@dataclass(frozen=True)
class RunConfig:
    minutes_per_day: int = 510
    minutes_per_year: int = 128520
    outlier_sigma: float = 10.0
    drift_window_minutes: int = 2550
    J: int = 11
    j_star: int = 4
    ensemble_stride: int = 60
    rate_annual: float = 0.045
    calibration_bounds: tuple[float, float] = (0.1, 3.0)
    seed: int = 0
    hist_bins: int = 61
    exclude_floor: float = 0.05
    holidays: tuple[date, ...] = field(default=())

    def __post_init__(self):
        for name in ("minutes_per_day", "minutes_per_year", "outlier_sigma",
                     "drift_window_minutes", "j_star", "ensemble_stride", "hist_bins"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.J < 0:
            raise ValueError("J must be non-negative")
        if self.j_star > self.J + 1:
            raise ValueError(f"j_star={self.j_star} exceeds J+1={self.J + 1}")
        lo, hi = self.calibration_bounds
        if not 0 < lo < hi:
            raise ValueError("calibration_bounds must satisfy 0 < lower < upper")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["calibration_bounds"] = list(self.calibration_bounds)
        d["holidays"] = [h.isoformat() for h in self.holidays]
        return d

    def updated(self, **overrides) -> "RunConfig":
        clean = {k: _coerce(k, v) for k, v in overrides.items() if v is not None}
        return replace(self, **clean)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}
# configparser folds keys to lower case
_KEYS = {name.lower(): name for name in _FIELD_TYPES}


def parse_bounds(text: str) -> tuple[float, float]:
    lo, _, hi = str(text).partition(":")
    if not hi:
        raise ValueError(f"bounds must look like LOW:HIGH, got {text!r}")
    return float(lo), float(hi)


def _coerce(key: str, value):
    if key not in _FIELD_TYPES:
        raise KeyError(f"unknown config key {key!r}")
    kind = _FIELD_TYPES[key]
    if key == "calibration_bounds":
        if isinstance(value, str):
            return parse_bounds(value)
        lo, hi = value
        return float(lo), float(hi)
    if key == "holidays":
        if isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        return tuple(v if isinstance(v, date) else date.fromisoformat(v) for v in value)
    if kind == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"{key} must be an integer")
        return int(value)
    if kind == "float":
        return float(value)
    return value


def load_config(path: str | Path | None = None) -> RunConfig:
    """Defaults overlaid with the config file, if any."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return RunConfig()
    parser = configparser.ConfigParser()
    with open(path) as fh:
        parser.read_file(fh)
    if not parser.has_section(SECTION):
        raise ValueError(f"{path}: missing [{SECTION}] section")
    items = {_KEYS.get(k.lower(), k): v for k, v in parser.items(SECTION)}
    return RunConfig().updated(**items)


def write_config(cfg: RunConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    d = cfg.to_dict()
    d["calibration_bounds"] = "{}:{}".format(*cfg.calibration_bounds)
    d["holidays"] = ", ".join(d["holidays"])
    parser[SECTION] = {k: str(v) for k, v in d.items()}
    with open(path, "w") as fh:
        parser.write(fh)

"""Declarative run configuration.

One JSON file drives a whole run; every field has a default, unknown keys
are rejected, and command-line flags override file values. Dates are
ISO-8601 strings.
"""

from __future__ import annotations

import datetime
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError

ALL_KINDS = ("AMEM", "XMAP", "MAP", "LMAP", "PMAP")


@dataclass
class InputConfig:
    path: str | None = None
    delimiter: str = ","
    columns: dict = field(default_factory=lambda: {
        "date": "date", "rv": "rv", "ret": "ret", "x": "x", "delta": "delta"})


@dataclass
class WindowConfig:
    start: str | None = None   # first date of the estimation window (inclusive)
    stop: str | None = None    # last date of the estimation window (inclusive)


@dataclass
class EstimationConfig:
    starts: int = 5
    max_iter: int = 400
    lb_lags: list = field(default_factory=lambda: [1, 5, 10])
    min_window: int = 50
    constrain_psi: bool = True


@dataclass
class ForecastConfig:
    horizon: int = 250
    max_horizon: int = 750
    origin: str | None = None      # date; default: last day of the estimation window
    x_rule: str = "hold"
    delta_rule: str = "mean"
    tolerance: float = 0.01        # one basis point of annualized volatility
    mc_draws: int = 0


@dataclass
class IrfConfig:
    shock: float | None = None     # default: std of x over the estimation window
    horizon: int = 250


@dataclass
class McsConfig:
    level: float = 0.10
    replications: int = 5000
    block_length: float = 22.0     # mean block, about one trading month
    min_eval_days: int = 250
    losses: list = field(default_factory=lambda: ["MSE", "QLike"])


@dataclass
class SimulateConfig:
    kind: str = "MAP"
    T: int = 2500
    params: dict | None = None
    x_mode: str = "walk"
    x0: float = 0.10
    x_sigma: float = 0.002
    x_drift: float = 0.0
    announce_every: int = 21


@dataclass
class StylizedConfig:
    window: int = 5


@dataclass
class OutputConfig:
    dir: str = "out"
    formats: list = field(default_factory=lambda: ["json", "csv", "txt", "svg"])


@dataclass
class RunConfig:
    input: InputConfig = field(default_factory=InputConfig)
    models: list = field(default_factory=lambda: list(ALL_KINDS))
    window: WindowConfig = field(default_factory=WindowConfig)
    splits: list = field(default_factory=list)   # estimation-window end dates
    estimation: EstimationConfig = field(default_factory=EstimationConfig)
    forecast: ForecastConfig = field(default_factory=ForecastConfig)
    irf: IrfConfig = field(default_factory=IrfConfig)
    mcs: McsConfig = field(default_factory=McsConfig)
    simulate: SimulateConfig = field(default_factory=SimulateConfig)
    stylized: StylizedConfig = field(default_factory=StylizedConfig)
    seed: int = 0
    threads: int | None = None     # default: MAPVOL_THREADS or 1
    output: OutputConfig = field(default_factory=OutputConfig)

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get("MAPVOL_THREADS", "")
        return max(1, int(env)) if env.strip() else 1


_SECTIONS = {
    "input": InputConfig, "window": WindowConfig, "estimation": EstimationConfig,
    "forecast": ForecastConfig, "irf": IrfConfig, "mcs": McsConfig,
    "simulate": SimulateConfig, "stylized": StylizedConfig, "output": OutputConfig,
}
_DICT_FIELDS = {"columns", "params"}


def _build(cls, data: dict, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name not in data:
            continue
        value = data[f.name]
        if f.name in _SECTIONS and isinstance(value, dict):
            value = _build(_SECTIONS[f.name], value, f"{where}.{f.name}")
        elif isinstance(value, dict) and f.name not in _DICT_FIELDS:
            raise ConfigError(f"{where}.{f.name} does not take a mapping")
        kwargs[f.name] = value
    return cls(**kwargs)


def load_config(path: str | None) -> RunConfig:
    """Parse a JSON config file; None yields the defaults."""
    if path is None:
        return RunConfig()
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    cfg = _build(RunConfig, raw, "config")
    validate_config(cfg)
    return cfg


def validate_config(cfg: RunConfig) -> None:
    for kind in cfg.models:
        if kind not in ALL_KINDS:
            raise ConfigError(f"unknown model kind {kind!r}; choose from {ALL_KINDS}")
    if cfg.simulate.kind not in ALL_KINDS:
        raise ConfigError(f"unknown simulate.kind {cfg.simulate.kind!r}")
    for name in ("start", "stop"):
        parse_date(getattr(cfg.window, name), f"window.{name}")
    for s in cfg.splits:
        parse_date(s, "splits")
    parse_date(cfg.forecast.origin, "forecast.origin")
    for loss in cfg.mcs.losses:
        if loss not in ("MSE", "QLike"):
            raise ConfigError(f"unknown loss {loss!r} in mcs.losses")
    if not 0 < cfg.mcs.level < 1:
        raise ConfigError("mcs.level must be inside (0, 1)")


def parse_date(value: str | None, where: str) -> datetime.date | None:
    if value is None:
        return None
    try:
        return datetime.date.fromisoformat(value)
    except ValueError:
        raise ConfigError(f"{where}: {value!r} is not an ISO date") from None


def default_config_dict() -> dict:
    return asdict(RunConfig())

"""Line-oriented ``key = value`` experiment configs.

``#`` starts a comment, list values are comma separated, and a repeated key
keeps its last value (with a warning in the run log).
"""

from __future__ import annotations

import dataclasses
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from rfood.errors import ConfigError
from rfood.risk import METRICS

log = logging.getLogger("rfood")

REQUIRED = ("n", "p", "m_values", "sigma", "spectrum", "ground_truth", "master_seed")
ACTIVATIONS = ("relu", "identity")
GROUND_TRUTHS = ("linear", "softplus")
BETA_MODES = ("uniform", "e1", "random")
ETA_DISTS = ("gaussian", "rademacher")

_SHIFT_RE = re.compile(r"^(none|isotropic|assumption2_default)\s*(?:\(\s*([^)]*?)\s*\))?$")


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    p: int
    m_values: tuple
    sigma: float
    spectrum: str
    ground_truth: str
    master_seed: int
    setting_name: str = "experiment"
    K: int = 2
    shift: str = "none"
    n_test: int = 1000
    trials: int = 500
    b: float = 1.0
    xi: float = 0.5
    activation: str = "relu"
    metrics: tuple = ("id_mse", "ood_mse")
    beta: str = "uniform"
    eta_dist: str = "gaussian"
    warnings: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        _validate(self)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def shift_kind(self) -> tuple:
        """(construction, parameter) parsed from ``shift``."""
        return parse_shift(self.shift)


def parse_shift(text):
    match = _SHIFT_RE.match(text.strip())
    if not match:
        raise ConfigError(f"cannot parse shift {text!r}", key="shift")
    kind, arg = match.groups()
    if kind == "none":
        return kind, None
    if not arg:
        raise ConfigError(f"{kind} shift needs a numeric argument", key="shift")
    try:
        value = float(arg)
    except ValueError:
        raise ConfigError(f"bad shift argument {arg!r}", key="shift") from None
    if value < 0:
        raise ConfigError("shift argument must be >= 0", key="shift")
    return kind, value


def _validate(cfg):
    def bad(key, msg):
        raise ConfigError(msg, key=key)

    for key in ("n", "p", "K", "n_test", "trials"):
        if getattr(cfg, key) < 1:
            bad(key, f"{key} must be >= 1")
    if not cfg.m_values:
        bad("m_values", "m_values must be nonempty")
    if any(m < 1 for m in cfg.m_values):
        bad("m_values", "every m must be >= 1")
    if cfg.sigma < 0:
        bad("sigma", "sigma must be >= 0")
    if cfg.b <= 0:
        bad("b", "b must be > 0")
    if cfg.xi <= 0:
        bad("xi", "xi must be > 0")
    if cfg.activation not in ACTIVATIONS:
        bad("activation", f"activation must be one of {ACTIVATIONS}")
    if cfg.ground_truth not in GROUND_TRUTHS:
        bad("ground_truth", f"ground_truth must be one of {GROUND_TRUTHS}")
    if cfg.beta not in BETA_MODES:
        bad("beta", f"beta must be one of {BETA_MODES}")
    if cfg.eta_dist not in ETA_DISTS:
        bad("eta_dist", f"eta_dist must be one of {ETA_DISTS}")
    if not cfg.metrics:
        bad("metrics", "metrics must be nonempty")
    for metric in cfg.metrics:
        if metric not in METRICS:
            bad("metrics", f"unknown metric {metric!r}")
    if not cfg.spectrum.strip():
        bad("spectrum", "spectrum must be nonempty")
    parse_shift(cfg.shift)


def _as_int(key, raw):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"expected an integer, got {raw!r}", key=key) from None


def _as_float(key, raw):
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"expected a number, got {raw!r}", key=key) from None


def _as_list(key, raw, conv):
    items = [s.strip() for s in raw.split(",")]
    if not raw.strip() or any(not s for s in items):
        raise ConfigError("empty list entry", key=key)
    return tuple(conv(key, s) for s in items)


_CONVERTERS = {
    "n": _as_int,
    "p": _as_int,
    "K": _as_int,
    "n_test": _as_int,
    "trials": _as_int,
    "master_seed": _as_int,
    "sigma": _as_float,
    "b": _as_float,
    "xi": _as_float,
    "m_values": lambda k, r: _as_list(k, r, _as_int),
    "metrics": lambda k, r: _as_list(k, r, lambda _k, s: s),
}
KEYS = tuple(f.name for f in dataclasses.fields(ExperimentConfig) if f.name != "warnings")


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {}
    lines = {}
    notes = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected 'key = value'", line=lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}: unknown key", key=key, line=lineno)
        if key in values:
            msg = f"{source}:{lineno}: duplicate key {key!r}; using the last value (first on line {lines[key]})"
            log.warning(msg)
            notes.append(msg)
        conv = _CONVERTERS.get(key)
        try:
            values[key] = conv(key, value) if conv else value
        except ConfigError as err:
            raise ConfigError(f"{source}: {err.message}", key=key, line=lineno) from None
        lines[key] = lineno
    for key in REQUIRED:
        if key not in values:
            last = len(text.splitlines())
            raise ConfigError(f"{source}: missing required key (not found through end of file)", key=key, line=last)
    try:
        return ExperimentConfig(**values, warnings=tuple(notes))
    except ConfigError as err:
        if err.key in lines and err.line is None:
            raise ConfigError(f"{source}: {err.message}", key=err.key, line=lines[err.key]) from None
        raise


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    return parse_config_text(path.read_text(encoding="utf-8"), source=str(path))


def format_config(cfg: ExperimentConfig) -> str:
    out = []
    for key in KEYS:
        value = getattr(cfg, key)
        if isinstance(value, tuple):
            value = ", ".join(str(v) for v in value)
        elif isinstance(value, float):
            value = repr(value)
        out.append(f"{key} = {value}")
    return "\n".join(out) + "\n"

"""Flat ``key = value`` config files.

Recognised keys (case-insensitive)::

    m, policy                      required
    rho, q                         process correlation and variance
    k_w, k_t, k_rp, f_c, f_sbd     slot counts; frame lengths default to 10x
    tau_ms, w_a_mw                 slot length [ms], active power [mW]
    b, omega                       SBD transmit-probability parameters
    energy_mode                    tx-only | full-wait
    total_slots, seed, estimator   run length, RNG seed, path | bridge

``#`` starts a comment. Overrides given as ``key=value`` strings take
precedence over the file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Mapping

from .engine import ESTIMATORS, POLICIES, SimConfig
from .errors import ConfigError, ConfigParseError
from .mac import ENERGY_MODES, EnergyModel, FrameConfig
from .policies import SbdParams


def _int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        v = float(text)
        if not v.is_integer():
            raise ValueError(f"expected an integer, got {text!r}") from None
        return int(v)


def _policy(text: str) -> str:
    p = text.strip().upper()
    if p not in POLICIES:
        raise ValueError(f"unknown policy {text!r}; valid policies: {', '.join(POLICIES)}")
    return p


def _choice(options):
    def parse(text: str) -> str:
        v = text.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {text!r}")
        return v
    return parse


KEYS = {
    "m": _int,
    "policy": _policy,
    "rho": float,
    "q": float,
    "k_w": _int,
    "k_t": _int,
    "k_rp": _int,
    "f_c": _int,
    "f_sbd": _int,
    "tau_ms": float,
    "w_a_mw": float,
    "b": float,
    "omega": float,
    "energy_mode": _choice(ENERGY_MODES),
    "total_slots": _int,
    "seed": _int,
    "estimator": _choice(ESTIMATORS),
}
REQUIRED = ("m", "policy")
DISPLAY = {"m": "M"}


def parse_value(key: str, text: str, line: int | None = None):
    key = key.strip().lower()
    if key not in KEYS:
        raise ConfigParseError(f"unknown key; valid keys: {', '.join(KEYS)}", key=key, line=line)
    try:
        return KEYS[key](text.strip())
    except ValueError as exc:
        raise ConfigParseError(str(exc), key=DISPLAY.get(key, key), line=line) from None


def parse_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigParseError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, _, value = line.partition("=")
        values[key.strip().lower()] = parse_value(key, value, lineno)
    return values


def parse_overrides(items: Iterable[str]) -> dict:
    values = {}
    for item in items:
        if "=" not in item:
            raise ConfigParseError(f"override must be key=value, got {item!r}")
        key, _, value = item.partition("=")
        values[key.strip().lower()] = parse_value(key, value)
    return values


def load(path: str | Path | None, overrides: Iterable[str] = ()) -> dict:
    """Read a config file (optional) and apply overrides; returns typed values."""
    values = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigParseError(f"cannot read config {path}: {exc.strerror}") from None
        values = parse_text(text)
    values.update(parse_overrides(overrides))
    return values


def to_sim_config(values: Mapping) -> SimConfig:
    """Build a SimConfig from typed values. Missing optional keys take the reference defaults (k_rp 25, b 35, 630 000 slots, ...)."""
    for key in REQUIRED:
        if key not in values:
            raise ConfigParseError("missing required key", key=DISPLAY.get(key, key))
    v = dict(values)
    try:
        frame = FrameConfig(
            k_w=v.get("k_w", 5),
            k_t=v.get("k_t", 1),
            k_rp=v.get("k_rp", 25),
            f_c=v.get("f_c"),
            f_sbd=v.get("f_sbd"),
            tau=v.get("tau_ms", 0.25) * 1e-3,
        )
        return SimConfig(
            m=v["m"],
            rho=v.get("rho", 0.0),
            q=v.get("q", 1.0),
            policy=v["policy"],
            frame=frame,
            sbd=SbdParams(b=v.get("b", 35.0), omega=v.get("omega", 1e5)),
            energy=EnergyModel(w_a=v.get("w_a_mw", 50.0) * 1e-3, mode=v.get("energy_mode", "tx-only")),
            total_slots=v.get("total_slots", 630_000),
            seed=v.get("seed", 0),
            estimator=v.get("estimator", "path"),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None

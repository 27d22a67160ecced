"""Sensor selection (MEE, MWA, genie) and the SBD transmit decision."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import ConfigError
from .model import CovarianceMatrix


@dataclass(frozen=True)
class SbdParams:
    b: float = 35.0
    omega: float = 1e5

    def __post_init__(self):
        if not self.omega > 0:
            raise ConfigError(f"omega must be > 0, got {self.omega}")
        if not self.b >= 0:
            raise ConfigError(f"b must be >= 0, got {self.b}")


@dataclass
class SensorLocalState:
    """What a sensor remembers: the value it last got acknowledged."""

    x_l: float
    q: float


def _q_diag(q) -> np.ndarray:
    if isinstance(q, CovarianceMatrix):
        return q.diag
    return np.asarray(q, dtype=float)


def mee_select(P, q) -> int:
    """argmax of P_ii / sqrt(q_ii). ``P`` may be the full matrix or its diagonal."""
    P = np.asarray(P)
    p = np.diagonal(P) if P.ndim == 2 else P
    # np.argmax returns the first maximum: lowest index wins ties
    return int(np.argmax(p / np.sqrt(_q_diag(q))))


def mwa_select(aoi, q) -> int:
    """argmax of sqrt(q_ii) * h_i."""
    return int(np.argmax(np.sqrt(_q_diag(q)) * np.asarray(aoi)))


def genie_select(x_current, x_last, q) -> int:
    """Centralized selector that sees every instantaneous error.

    Infeasible in practice; the simulator uses it as a test baseline only.
    """
    return int(np.argmax(normalized_error(x_current, x_last, _q_diag(q))))


def aoi_update(aoi, scheduled: int) -> np.ndarray:
    h = np.asarray(aoi) + 1
    h[scheduled] = 0
    return h


def normalized_error(x_current, x_last, q):
    """|x_c - x_l| / sqrt(q). Works elementwise on arrays."""
    return np.abs(np.asarray(x_current) - x_last) / np.sqrt(q)


def tx_probability(x_d, params: SbdParams):
    """(1 - exp(-w x)) / (1 + exp(-w (x - b))), evaluated without overflow.

    The denominator is rewritten as a logistic function, which stays finite
    for any ``omega * b``.
    """
    x = np.asarray(x_d, dtype=float)
    w = params.omega
    p = -np.expm1(-w * x) * expit(w * (x - params.b))
    return float(p) if p.ndim == 0 else p


def sbd_decide(x_d, params: SbdParams, rng: np.random.Generator):
    """Bernoulli(tx_probability) draw; vectorized over an array of ``x_d``."""
    p = tx_probability(x_d, params)
    u = rng.random(np.shape(p))
    out = u < p
    return bool(out) if np.ndim(out) == 0 else out

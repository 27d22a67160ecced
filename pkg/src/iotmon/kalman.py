"""Base-station Kalman filter for noiseless single-sensor samples.

The process is a random walk, so prediction leaves the estimate unchanged
and inflates the covariance by ``Q``. A sample is the exact value of one
coordinate, which pins that coordinate's posterior variance to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, SingularGain, TimeMismatch
from .model import CovarianceMatrix, ProcessState

GAIN_TOL = 1e-12
DIAG_TOL = 1e-9


@dataclass
class EstimatorState:
    x_hat: np.ndarray
    P: np.ndarray
    t: int = 0

    @classmethod
    def exact(cls, truth: ProcessState) -> "EstimatorState":
        """Estimator that starts from perfect knowledge of ``truth``."""
        m = np.shape(truth.x)[-1]
        return cls(np.array(truth.x, dtype=float), np.zeros((m, m)), truth.t)


@dataclass(frozen=True)
class Observation:
    sensor: int
    y: float
    slot: int


def symmetrize(P: np.ndarray) -> np.ndarray:
    """Average with the transpose and clamp tiny negative diagonals to zero."""
    P = P + P.T
    P *= 0.5
    d = P.diagonal()
    lo = d.min()
    if lo < 0:
        if lo < -DIAG_TOL:
            raise NumericalError(f"negative variance {lo:.3g} in error covariance")
        np.fill_diagonal(P, np.maximum(d, 0.0))
    return P


def predict(est: EstimatorState, cov: CovarianceMatrix, slots: int = 1) -> EstimatorState:
    """Prior for the next slot; ``slots > 1`` applies that many predictions at once."""
    return EstimatorState(est.x_hat.copy(), est.P + slots * cov.Q, est.t + slots)


def gain(P_minus: np.ndarray, j: int) -> np.ndarray:
    pjj = P_minus[j, j]
    if not pjj > GAIN_TOL:
        raise SingularGain(f"sensor {j} has prior variance {pjj:.3g}")
    return P_minus[:, j] / pjj


def update_arrays(x_minus: np.ndarray, P_minus: np.ndarray, j: int, y: float) -> tuple[np.ndarray, np.ndarray]:
    """Filtering step on raw arrays, returning new ``(x_hat, P)``."""
    g = gain(P_minus, j)
    x = x_minus + g * (y - x_minus[j])
    # (I - g e_j^T) P- == P- - g * (row j of P-)
    P = P_minus - g[:, None] * P_minus[j]
    return x, symmetrize(P)


def filter_update(est: EstimatorState, obs: Observation) -> EstimatorState:
    if obs.slot != est.t:
        raise TimeMismatch(f"observation for slot {obs.slot} applied at slot {est.t}")
    x, P = update_arrays(est.x_hat, est.P, obs.sensor, obs.y)
    return EstimatorState(x, P, est.t)


def squared_error(est: EstimatorState, truth: ProcessState) -> float:
    if est.t != truth.t:
        raise TimeMismatch(f"estimate at slot {est.t}, truth at slot {truth.t}")
    d = np.asarray(truth.x) - est.x_hat
    return float(d @ d)

"""Correlated Gaussian random-walk process observed by the sensors.

Every sensor observes one coordinate of ``x(t)``. The coordinates move
together through a process-noise covariance with a per-sensor variance on
the diagonal and a single shared covariance ``rho`` everywhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigError, NotPositiveDefinite


class Stream(IntEnum):
    """Independent random streams used by one simulation."""

    NOISE = 0
    DECISION = 1
    ACCESS = 2


@dataclass(frozen=True)
class RandomSource:
    """Seed plus stream id; each pair maps to one PCG64 generator."""

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class CovarianceSpec:
    num_sensors: int
    q: float | tuple[float, ...] = 1.0
    rho: float = 0.0

    def __post_init__(self):
        if int(self.num_sensors) != self.num_sensors or self.num_sensors < 1:
            raise ConfigError(f"num_sensors must be a positive integer, got {self.num_sensors}")
        diag = self.diag
        if diag.shape != (self.num_sensors,):
            raise ConfigError(f"expected {self.num_sensors} variances, got {diag.size}")
        if not np.all(diag > 0):
            raise ConfigError("all per-sensor variances must be > 0")
        if not np.isfinite(self.rho):
            raise ConfigError("rho must be finite")

    @property
    def diag(self) -> np.ndarray:
        q = np.asarray(self.q, dtype=float)
        if q.ndim == 0:
            return np.full(self.num_sensors, float(q))
        return q.copy()


@dataclass(frozen=True, eq=False)
class CovarianceMatrix:
    Q: np.ndarray
    chol: np.ndarray
    rho: float = 0.0
    diag: np.ndarray = field(init=False, repr=False)
    is_diagonal: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "diag", np.diag(self.Q).copy())
        off = self.Q - np.diag(self.diag)
        object.__setattr__(self, "is_diagonal", not np.any(off))

    @property
    def size(self) -> int:
        return self.Q.shape[0]

    @property
    def trace(self) -> float:
        return float(self.diag.sum())


@dataclass
class ProcessState:
    x: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, num_sensors: int) -> "ProcessState":
        return cls(np.zeros(num_sensors), 0)


def build_covariance(spec: CovarianceSpec) -> CovarianceMatrix:
    """Build ``Q`` (q on the diagonal, rho elsewhere) and its Cholesky factor.

    Raises NotPositiveDefinite when the factorization fails, e.g. for
    ``rho < -1/(M-1)`` with unit variances.
    """
    m = spec.num_sensors
    Q = np.full((m, m), float(spec.rho))
    np.fill_diagonal(Q, spec.diag)
    Q = 0.5 * (Q + Q.T)
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(
            f"covariance with M={m}, rho={spec.rho} is not positive definite"
        ) from exc
    return CovarianceMatrix(Q, L, float(spec.rho))


def sample_noise(cov: CovarianceMatrix, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw ``w = L z``; ``size`` stacks independent draws along axis 0."""
    if size is None:
        z = rng.standard_normal(cov.size)
        return cov.chol @ z
    z = rng.standard_normal((size, cov.size))
    return z @ cov.chol.T


def step_process(state: ProcessState, cov: CovarianceMatrix, rng: np.random.Generator) -> ProcessState:
    """Advance the random walk by one slot.

    ``state.x`` may also hold a batch of independent walks with shape
    ``(n, M)``; each row gets its own noise draw.
    """
    x = np.asarray(state.x, dtype=float)
    w = sample_noise(cov, rng, None if x.ndim == 1 else x.shape[0])
    return ProcessState(x + w, state.t + 1)

"""Slot-level simulation loop.

Slots are numbered ``1..total_slots``. Frame ``k`` covers slots
``k*f + 1 .. (k+1)*f``; its frame-relative slot ``r`` is global slot
``k*f + 1 + r``. In every slot the process moves, the filter predicts,
frame boundaries trigger the policy, receptions are fused, and the squared
error is sampled after any fusion in that slot.

Two estimators of the error sum are available:

``path``
    realizes the random walk in every slot and sums the realized squared
    errors (the reference).
``bridge``
    realizes the walk only at slots the protocol looks at (wake-up,
    receptions, frame end) and adds, for the slots in between, the exact
    conditional expectation of the squared error given those samples. Same
    mean, lower variance, and far cheaper for long frames.

Filter predictions between events are applied in one step (``P + n*Q``).
With ``rho == 0`` the covariance stays diagonal and is tracked as a vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kalman
from .errors import ConfigError, NoSamples, SingularGain
from .mac import EnergyModel, FrameConfig, run_oblivious_frame, run_sbd_frame
from .model import CovarianceMatrix, CovarianceSpec, RandomSource, Stream, build_covariance
from .policies import SbdParams, aoi_update, genie_select, mee_select, mwa_select, normalized_error, tx_probability

POLICIES = ("MEE", "MWA", "SBD", "GENIE")
ESTIMATORS = ("path", "bridge")
DEFAULT_SLOTS = 630_000


@dataclass(frozen=True)
class SimConfig:
    m: int = 10
    rho: float = 0.0
    q: float = 1.0
    policy: str = "MEE"
    frame: FrameConfig = field(default_factory=FrameConfig)
    sbd: SbdParams = field(default_factory=SbdParams)
    energy: EnergyModel = field(default_factory=EnergyModel)
    total_slots: int = DEFAULT_SLOTS
    seed: int = 0
    estimator: str = "path"

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ConfigError(f"unknown policy {self.policy!r}; valid policies: {', '.join(POLICIES)}")
        if self.estimator not in ESTIMATORS:
            raise ConfigError(f"unknown estimator {self.estimator!r}; valid: {', '.join(ESTIMATORS)}")
        if int(self.m) != self.m or self.m < 1:
            raise ConfigError(f"M must be a positive integer, got {self.m}")
        if self.total_slots < 0 or int(self.total_slots) != self.total_slots:
            raise ConfigError("total_slots must be a non-negative integer")
        if self.total_slots % self.frame_length:
            raise ConfigError(
                f"total_slots={self.total_slots} is not a multiple of the frame length {self.frame_length}")
        if self.policy == "SBD" and self.frame.k_t > self.frame.k_rp:
            raise ConfigError(f"k_t={self.frame.k_t} exceeds k_rp={self.frame.k_rp}")

    @property
    def frame_length(self) -> int:
        return self.frame.f_sbd if self.policy == "SBD" else self.frame.f_c

    @property
    def covariance_spec(self) -> CovarianceSpec:
        return CovarianceSpec(self.m, self.q, self.rho)

    def with_(self, **changes) -> "SimConfig":
        """Copy with changes; frame/sbd/energy fields may be given flat."""
        frame = {k: changes.pop(k) for k in ("k_w", "k_t", "k_rp", "f_c", "f_sbd", "tau") if k in changes}
        sbd = {k: changes.pop(k) for k in ("b", "omega") if k in changes}
        energy = {k: changes.pop(k) for k in ("w_a", "mode") if k in changes}
        if frame:
            # a changed slot count re-derives frame lengths unless they are given too
            base = {"k_w": self.frame.k_w, "k_t": self.frame.k_t, "k_rp": self.frame.k_rp,
                    "tau": self.frame.tau, "f_c": None, "f_sbd": None}
            derived_c = 10 * (self.frame.k_w + self.frame.k_t)
            derived_sbd = 10 * (self.frame.k_w + self.frame.k_rp)
            if self.frame.f_c != derived_c:
                base["f_c"] = self.frame.f_c
            if self.frame.f_sbd != derived_sbd:
                base["f_sbd"] = self.frame.f_sbd
            base.update(frame)
            changes["frame"] = FrameConfig(**base)
        if sbd:
            changes["sbd"] = replace(self.sbd, **sbd)
        if energy:
            changes["energy"] = replace(self.energy, **energy)
        return replace(self, **changes)


@dataclass
class SimResult:
    slots: int
    m: int
    sq_error_sum: float
    energy_j: float
    frames: int
    tx_attempts: int
    successes: int
    collisions: int
    schedule: tuple | None = None

    @property
    def normalized_mse(self) -> float:
        if self.slots == 0:
            raise NoSamples("run has no slots; normalized MSE undefined")
        return self.sq_error_sum / self.slots / self.m

    @property
    def mean_deciders_per_frame(self) -> float:
        return self.tx_attempts / self.frames if self.frames else 0.0


def bridge_error_sum(x_start: np.ndarray, x_end: np.ndarray, gap: int, x_hat: np.ndarray, trace_q: float) -> float:
    """Expected sum of ``|x(s) - x_hat|^2`` over the ``gap - 1`` slots strictly
    between two realized samples ``gap`` slots apart."""
    if gap <= 1:
        return 0.0
    u = x_start - x_hat
    v = x_end - x_start
    n = gap - 1
    mean_part = n * (u @ u) + n * (u @ v) + (v @ v) * n * (2 * gap - 1) / (6 * gap)
    return float(mean_part + trace_q * (gap * gap - 1) / 6.0)


def bridge_error_sums(u: np.ndarray, v: np.ndarray, gaps: np.ndarray, trace_q: float) -> float:
    """Row-wise :func:`bridge_error_sum`, totalled; ``u = x_start - x_hat``, ``v = x_end - x_start``."""
    gaps = np.asarray(gaps, dtype=float)
    n = gaps - 1
    uu = np.einsum("ij,ij->i", u, u)
    uv = np.einsum("ij,ij->i", u, v)
    vv = np.einsum("ij,ij->i", v, v)
    total = n * (uu + uv) + vv * n * (2 * gaps - 1) / (6 * gaps) + trace_q * (gaps * gaps - 1) / 6.0
    return float(total.sum())


class _Filter:
    """Lazily predicted estimator: holds the posterior at ``slot``."""

    def __init__(self, cov: CovarianceMatrix, diagonal: bool):
        m = cov.size
        self.cov = cov
        self.diagonal = diagonal
        self.x_hat = np.zeros(m)
        self.P = np.zeros(m) if diagonal else np.zeros((m, m))
        self.slot = 0

    def prior(self, slot: int) -> np.ndarray:
        n = slot - self.slot
        if self.diagonal:
            return self.P + n * self.cov.diag
        return self.P + n * self.cov.Q

    def prior_diag(self, slot: int) -> np.ndarray:
        n = slot - self.slot
        d = self.P if self.diagonal else np.diagonal(self.P)
        return d + n * self.cov.diag

    def update(self, slot: int, j: int, y: float) -> None:
        P_minus = self.prior(slot)
        if self.diagonal:
            if not P_minus[j] > kalman.GAIN_TOL:
                raise SingularGain(f"sensor {j} has prior variance {P_minus[j]:.3g}")
            self.x_hat = self.x_hat.copy()
            self.x_hat[j] = y
            P_minus[j] = 0.0
            self.P = P_minus
        else:
            self.x_hat, self.P = kalman.update_arrays(self.x_hat, P_minus, j, y)
        self.slot = slot


def run_simulation(cfg: SimConfig, *, record_schedule: bool = False, dense: bool | None = None) -> SimResult:
    """Run one simulation. Deterministic given ``cfg`` (seed included).

    ``dense=True`` forces the full-matrix filter even when ``rho == 0``.
    """
    cov = build_covariance(cfg.covariance_spec)
    fc = cfg.frame
    f = cfg.frame_length
    m = cfg.m
    n_frames = cfg.total_slots // f
    diagonal = cov.is_diagonal if dense is None else not dense

    noise = RandomSource(cfg.seed, Stream.NOISE).generator()
    decide_rng = RandomSource(cfg.seed, Stream.DECISION).generator()
    access_rng = RandomSource(cfg.seed, Stream.ACCESS).generator()

    L_T = cov.chol.T
    sqrt_q = np.sqrt(cov.diag)
    trace_q = cov.trace
    kf = _Filter(cov, diagonal)
    x = np.zeros(m)            # true state at the end of the previous frame
    x_last = np.zeros(m)       # each sensor's last acknowledged value
    aoi = np.zeros(m, dtype=np.int64)
    path = cfg.estimator == "path"

    err = 0.0
    active = 0
    attempts = successes = collisions = 0
    schedule = [] if record_schedule else None

    def draw(gaps):
        # independent increments over the given slot gaps, shape (len(gaps), m)
        z = noise.standard_normal((len(gaps), m))
        if not cov.is_diagonal:
            z = z @ L_T
        else:
            z = z * sqrt_q
        return z * np.sqrt(np.asarray(gaps, dtype=float))[:, None]

    for k in range(n_frames):
        t0 = k * f + 1  # global slot of frame-relative slot 0
        if path:
            X = x + np.cumsum(draw(np.ones(f)), axis=0)
            x0 = X[0]
        else:
            x0 = x + draw([1])[0]

        if cfg.policy == "SBD":
            xd = normalized_error(x0, x_last, cov.diag)
            u = decide_rng.random(m)
            deciders = np.flatnonzero(u < tx_probability(xd, cfg.sbd))
            out = run_sbd_frame(deciders, X if path else None, fc, access_rng, cfg.energy.mode)
            if schedule is not None:
                schedule.append(tuple(int(d) for d in deciders))
        else:
            if cfg.policy == "MEE":
                j = mee_select(kf.prior_diag(t0), cov.diag)
            elif cfg.policy == "MWA":
                j = mwa_select(aoi, cov.diag)
            else:
                j = genie_select(x0, x_last, cov.diag)
            aoi = aoi_update(aoi, j)
            out = run_oblivious_frame(j, X if path else None, fc, m)
            if schedule is not None:
                schedule.append(j)

        attempts += out.attempts
        successes += len(out.successes)
        collisions += out.collided
        active += out.active_slots

        if path:
            cur = 0
            for j, y, r in out.successes:
                d = X[cur:r] - kf.x_hat
                err += float(np.einsum("ij,ij->", d, d))
                kf.update(t0 + r, j, y)
                x_last[j] = y
                cur = r
            d = X[cur:] - kf.x_hat
            err += float(np.einsum("ij,ij->", d, d))
            x = X[-1]
        else:
            # successes are ordered by slot and never share one
            events = [r for _, _, r in out.successes]
            if events[-1:] != [f - 1]:
                events.append(f - 1)
            gaps = np.diff([0] + events)
            V = np.empty((len(events) + 1, m))
            V[0] = x0
            np.cumsum(draw(gaps), axis=0, out=V[1:])
            V[1:] += x0
            XH = np.empty_like(V)
            XH[0] = kf.x_hat
            for i, (j, _, r) in enumerate(out.successes, start=1):
                y = float(V[i, j])
                kf.update(t0 + r, j, y)
                x_last[j] = y
                XH[i] = kf.x_hat
            XH[len(out.successes) + 1:] = kf.x_hat
            err += bridge_error_sums(V[:-1] - XH[:-1], V[1:] - V[:-1], gaps, trace_q)
            d = V - XH
            err += float(np.einsum("ij,ij->", d, d))
            x = V[-1]

    return SimResult(
        slots=n_frames * f,
        m=m,
        sq_error_sum=err,
        energy_j=active * cfg.energy.w_a * fc.tau,
        frames=n_frames,
        tx_attempts=attempts,
        successes=successes,
        collisions=collisions,
        schedule=tuple(schedule) if schedule is not None else None,
    )


def run_genie(cfg: SimConfig, **kwargs) -> SimResult:
    if cfg.policy != "GENIE":
        raise ConfigError("run_genie requires policy GENIE")
    return run_simulation(cfg, **kwargs)


def oblivious_energy(cfg: SimConfig) -> float:
    """Energy of an MEE/MWA run with this config's frame and energy model.

    Every frame polls exactly one sensor, so it does not depend on the seed.
    """
    fc = cfg.frame
    return (cfg.total_slots // fc.f_c) * fc.k_t * cfg.energy.w_a * fc.tau

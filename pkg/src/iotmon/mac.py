"""Slotted channel: monitoring-frame timing, polling, framed random access.

Frame-relative slot 0 is the first wake-up slot. The wake-up signal uses
slots ``[0, k_w)``; data transmissions start at ``k_w``. The remainder of
each frame belongs to background traffic and is not modelled.

A transmission is identified by its start slot. The payload is the
sensor's true value at that slot and the base station fuses it at that
same slot; ``k_t`` only sets how long the channel and the main radio are
busy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError

DUTY_FACTOR = 10
ENERGY_MODES = ("tx-only", "full-wait")


@dataclass(frozen=True)
class FrameConfig:
    """Slot counts of the monitoring frame.

    ``f_c`` / ``f_sbd`` default to ten times the monitoring part, so the
    monitoring frame takes 10% of the channel.
    """

    k_w: int = 5
    k_t: int = 1
    k_rp: int = 25
    f_c: int | None = None
    f_sbd: int | None = None
    tau: float = 0.25e-3

    def __post_init__(self):
        for name in ("k_w", "k_t", "k_rp"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"{name} must be an integer >= 1, got {v}")
        if self.f_c is None:
            object.__setattr__(self, "f_c", DUTY_FACTOR * (self.k_w + self.k_t))
        if self.f_sbd is None:
            object.__setattr__(self, "f_sbd", DUTY_FACTOR * (self.k_w + self.k_rp))
        if self.f_c < self.k_w + self.k_t:
            raise ConfigError(f"f_c={self.f_c} shorter than k_w + k_t")
        if self.f_sbd < self.k_w + self.k_rp:
            raise ConfigError(f"f_sbd={self.f_sbd} shorter than k_w + k_rp")
        if not self.tau > 0:
            raise ConfigError("tau must be > 0")


@dataclass(frozen=True)
class EnergyModel:
    w_a: float = 0.05
    mode: str = "tx-only"

    def __post_init__(self):
        if self.mode not in ENERGY_MODES:
            raise ConfigError(f"energy mode must be one of {ENERGY_MODES}, got {self.mode!r}")
        if self.w_a < 0:
            raise ConfigError("w_a must be >= 0")


@dataclass
class FrameOutcome:
    # (sensor, payload, frame-relative reception slot), ordered by slot
    successes: list = field(default_factory=list)
    collided: int = 0
    active_slots: int = 0
    attempts: int = 0


def _payload(truth, slot: int, sensor: int):
    if truth is None:
        return None
    return float(truth[slot, sensor])


def run_oblivious_frame(scheduled: int, truth, cfg: FrameConfig, num_sensors: int | None = None) -> FrameOutcome:
    """Unicast poll of one sensor. It cannot collide.

    ``truth`` is indexed ``truth[slot, sensor]`` with frame-relative slots,
    or None to leave the payload unset.
    """
    if scheduled < 0 or (num_sensors is not None and scheduled >= num_sensors):
        raise ConfigError(f"scheduled sensor {scheduled} out of range")
    slot = cfg.k_w
    return FrameOutcome([(scheduled, _payload(truth, slot, scheduled), slot)], 0, cfg.k_t, 1)


def draw_start_slots(n: int, cfg: FrameConfig, rng: np.random.Generator) -> np.ndarray:
    """Uniform start offsets inside the random-access period.

    Offsets run over ``0..k_rp - k_t`` so every transmission ends inside
    the period; with ``k_t == 1`` this is all ``k_rp`` slots.
    """
    if cfg.k_t > cfg.k_rp:
        raise ConfigError(f"k_t={cfg.k_t} does not fit in k_rp={cfg.k_rp}")
    return rng.integers(0, cfg.k_rp - cfg.k_t + 1, size=n)


def collision_free(starts, k_t: int) -> np.ndarray:
    """Mask of transmissions whose ``k_t``-slot window overlaps no other."""
    s = list(starts)
    n = len(s)
    ok = np.ones(n, dtype=bool)
    order = sorted(range(n), key=s.__getitem__)
    for a, b in zip(order, order[1:]):
        if s[b] - s[a] < k_t:
            ok[a] = ok[b] = False
    return ok


def run_sbd_frame(deciders: Sequence[int], truth, cfg: FrameConfig, rng: np.random.Generator,
                  mode: str = "tx-only") -> FrameOutcome:
    """Random access among the sensors that decided to transmit.

    Lost packets are not retransmitted. In ``tx-only`` mode each
    transmitter is charged ``k_t`` active slots; ``full-wait`` also charges
    the slots spent waiting from the start of the random-access period.
    """
    if mode not in ENERGY_MODES:
        raise ConfigError(f"unknown energy mode {mode!r}")
    deciders = [int(d) for d in deciders]
    n = len(deciders)
    starts = draw_start_slots(n, cfg, rng).tolist()
    ok = collision_free(starts, cfg.k_t)
    active = n * cfg.k_t
    if mode == "full-wait":
        active += sum(starts)
    won = sorted((starts[i], deciders[i]) for i in range(n) if ok[i])
    successes = [(sensor, _payload(truth, cfg.k_w + start, sensor), cfg.k_w + start) for start, sensor in won]
    return FrameOutcome(successes, n - len(won), active, n)


def accumulate_energy(outcomes: Iterable[FrameOutcome], model: EnergyModel, tau: float) -> float:
    """Main-radio energy in joules. The wake-up receiver draws nothing."""
    return sum(o.active_slots for o in outcomes) * model.w_a * tau

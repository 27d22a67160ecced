"""Slot-level simulator for Kalman-filter IoT monitoring over a shared slotted channel."""

from .engine import SimConfig, SimResult, oblivious_energy, run_genie, run_simulation
from .mac import EnergyModel, FrameConfig
from .policies import SbdParams

__all__ = [
    "EnergyModel",
    "FrameConfig",
    "SbdParams",
    "SimConfig",
    "SimResult",
    "oblivious_energy",
    "run_genie",
    "run_simulation",
]

"""Drone uplink buffer: Poisson application traffic plus handover control bursts.

All quantities are integer bits. After a handover the buffer receives
``ho_packet_count`` control packets spread evenly over the next
``ho_window_Th`` TTIs; a second handover restarts the window.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from numba import njit

from .config import TrafficConfig

__all__ = [
    "TrafficConfig", "BufferState", "arrivals", "on_handover", "advance_queue",
    "expected_delay", "INFINITE_DELAY",
]

INFINITE_DELAY = math.inf


@dataclass(frozen=True)
class BufferState:
    q_bits: int = 0
    dropped_bits_cum: int = 0
    ho_window_remaining: int = 0


@njit(cache=True)
def _control_packets(window_remaining, window_len, count):
    """Control packets due in the current TTI of a handover window."""
    if window_remaining <= 0:
        return 0
    elapsed = window_len - window_remaining
    # packet k is released at TTI floor(k * window_len / count)
    hi = -((-(elapsed + 1) * count) // window_len)
    lo = -((-elapsed * count) // window_len)
    return hi - lo


@njit(cache=True)
def _arrival_bits(rng, mean_packets, packet_size, window_remaining, window_len,
                  ho_count, ho_size):
    n = rng.poisson(mean_packets) if mean_packets > 0.0 else 0
    return n * packet_size + _control_packets(window_remaining, window_len, ho_count) * ho_size


def arrivals(cfg: TrafficConfig, state: BufferState, dt: float, rng: np.random.Generator) -> int:
    """Bits arriving at the buffer during one interval of ``dt`` seconds."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    return int(_arrival_bits(rng, cfg.lambda0 * dt, cfg.packet_size, state.ho_window_remaining,
                             cfg.ho_window_Th, cfg.ho_packet_count, cfg.ho_packet_size))


def on_handover(state: BufferState, cfg: TrafficConfig) -> BufferState:
    return replace(state, ho_window_remaining=cfg.ho_window_Th)


def advance_queue(state: BufferState, u_bits: int, served_bits: int,
                  cfg: TrafficConfig) -> BufferState:
    assert 0 <= served_bits <= state.q_bits + u_bits, "served more bits than were queued"
    q = state.q_bits + u_bits - served_bits
    dropped = state.dropped_bits_cum
    if q > cfg.q_max:
        dropped += q - cfg.q_max
        q = cfg.q_max
    return BufferState(q, dropped, max(0, state.ho_window_remaining - 1))


def expected_delay(state: BufferState, rate_bps: float) -> float:
    """Queueing delay estimate q/R in seconds (``INFINITE_DELAY`` when starved)."""
    if rate_bps < 0:
        raise ValueError("rate must be nonnegative")
    if state.q_bits == 0:
        return 0.0
    if rate_bps == 0:
        return INFINITE_DELAY
    return state.q_bits / rate_bps

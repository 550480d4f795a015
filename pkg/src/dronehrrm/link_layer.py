"""SC-FDMA uplink rate and the drone's interference footprint on other BSs."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit

from .a2g_channel import ChannelRealization

THERMAL_NOISE_DBM_PER_HZ = -174.0


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


def watts_to_dbm(w: float) -> float:
    return 10.0 * math.log10(w * 1e3)


def noise_per_subcarrier_w(subcarrier_bw_hz: float = 15e3, noise_figure_db: float = 0.0,
                           density_dbm_per_hz: float = THERMAL_NOISE_DBM_PER_HZ) -> float:
    dbm = density_dbm_per_hz + 10.0 * math.log10(subcarrier_bw_hz) + noise_figure_db
    return 10.0 ** (dbm / 10.0) * 1e-3


@dataclass(frozen=True)
class Allocation:
    serving_bs: int
    rrb_count: int
    tx_power_p: float  # watts
    subcarriers_per_rrb: int = 12
    subcarrier_bw_Ws: float = 15e3

    @property
    def n_subcarriers(self) -> int:
        return self.rrb_count * self.subcarriers_per_rrb


@dataclass(frozen=True)
class LinkBudget:
    noise_n0: float = noise_per_subcarrier_w()  # W per subcarrier
    ext_interference_Is: float = 0.0  # W/Hz
    gtx_db: float = 0.0
    grx_db: float = 0.0

    def __post_init__(self):
        if self.noise_n0 < 0 or self.ext_interference_Is < 0:
            raise ValueError("noise and interference must be nonnegative")


@njit(cache=True)
def _effective_snr(p_w, small_scale, large_scale_gain, n0_w, ws_hz, is_w_hz):
    """Harmonic-combined SNR: P / sum_s (1 / alpha_s)."""
    if p_w <= 0.0:
        return 0.0
    denom = n0_w + ws_hz * is_w_hz
    inv = 0.0
    for s in range(small_scale.shape[0]):
        alpha = small_scale[s] * large_scale_gain / denom
        if alpha <= 0.0:
            return 0.0
        inv += 1.0 / alpha
    return p_w / inv


@njit(cache=True)
def _rate_bps(p_w, small_scale, large_scale_gain, n0_w, ws_hz, is_w_hz):
    gamma = _effective_snr(p_w, small_scale, large_scale_gain, n0_w, ws_hz, is_w_hz)
    return ws_hz * small_scale.shape[0] * math.log2(1.0 + gamma)


def uplink_rate(alloc: Allocation, chan: ChannelRealization, budget: LinkBudget) -> float:
    """Achievable uplink rate in bit/s over the allocated subcarriers."""
    gains = np.asarray(chan.small_scale_power_gain, dtype=float)
    if gains.shape[0] != alloc.n_subcarriers:
        raise ValueError(f"expected {alloc.n_subcarriers} subcarrier gains, got {gains.shape[0]}")
    if alloc.rrb_count < 1:
        return 0.0
    g = 10.0 ** ((budget.gtx_db + budget.grx_db - chan.large_scale_db) / 10.0)
    return float(_rate_bps(alloc.tx_power_p, gains, g, budget.noise_n0,
                           alloc.subcarrier_bw_Ws, budget.ext_interference_Is))


def interference_to_bs(p_dbm: float, pl_x_db: float, gtx_db: float = 0.0,
                       grx_db: float = 0.0) -> float:
    """Received interference (dBm) at a non-serving BS."""
    return p_dbm - pl_x_db + gtx_db + grx_db


def total_interference_mw(per_bs_dbm: Sequence[float]) -> float:
    """Sum of per-BS interference, accumulated in milliwatts."""
    if len(per_bs_dbm) == 0:
        return 0.0
    return float(np.sum(dbm_to_mw(per_bs_dbm)))

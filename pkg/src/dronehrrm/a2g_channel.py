"""Air-to-ground channel between a drone and terrestrial base stations.

Urban-macro aerial-UE model: altitude-dependent LoS probability, LoS/NLoS
path loss, log-normal shadowing and Rayleigh block fading. The scalar
kernels (``*_db`` / ``_los_probability``) are numba-compiled so the
simulation engine can call them per TTI.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

H_MIN = 22.5
H_MAX = 300.0
H_ALWAYS_LOS = 100.0
SIGMA_NLOS_DB = 6.0


class ChannelDomainError(ValueError):
    pass


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float


@dataclass(frozen=True)
class LinkGeometry:
    d2d: float
    d3d: float
    drone_altitude_h: float

    def __post_init__(self):
        if self.d2d < 0 or self.d3d < self.d2d * (1 - 1e-12):
            raise ChannelDomainError(f"inconsistent geometry d2d={self.d2d}, d3d={self.d3d}")

    @classmethod
    def between(cls, drone: Position3D, bs: Position3D) -> "LinkGeometry":
        d2d = math.hypot(drone.x - bs.x, drone.y - bs.y)
        d3d = math.sqrt(d2d * d2d + (drone.z - bs.z) ** 2)
        return cls(d2d, d3d, drone.z)


@dataclass(frozen=True)
class ChannelRealization:
    los: bool
    path_loss_db: float
    shadow_db: float
    small_scale_power_gain: np.ndarray

    @property
    def large_scale_db(self) -> float:
        return self.path_loss_db + self.shadow_db


@njit(cache=True)
def los_breakpoints(h):
    """Return ``(d1, p1)`` in metres for altitude ``h``."""
    lh = math.log10(h)
    d1 = max(460.0 * lh - 700.0, 18.0)
    p1 = 4300.0 * lh - 3800.0
    return d1, p1


@njit(cache=True)
def _los_probability(h, d2d):
    if h > H_ALWAYS_LOS:
        return 1.0
    d1, p1 = los_breakpoints(h)
    if d2d <= d1:
        return 1.0
    p = d1 / d2d + math.exp(-d2d / p1) * (1.0 - d1 / d2d)
    return min(1.0, max(0.0, p))


@njit(cache=True)
def path_loss_los_db(d3d, fc_ghz):
    return 28.0 + 22.0 * math.log10(d3d) + 20.0 * math.log10(fc_ghz)


@njit(cache=True)
def path_loss_nlos_db(d3d, h, fc_ghz):
    return 15.0 + (46.0 - 7.0 * math.log10(h)) * math.log10(d3d) + 20.0 * math.log10(fc_ghz)


@njit(cache=True)
def shadow_sigma_db(h, los):
    if los:
        return 4.64 * math.exp(-0.00066 * h)
    return SIGMA_NLOS_DB


@njit(cache=True)
def _draw_large_scale(h, d2d, d3d, fc_ghz, rng):
    """Draw (los, path loss, shadow) for one link; two draws from ``rng``."""
    los = rng.random() < _los_probability(h, d2d)
    if los:
        pl = path_loss_los_db(d3d, fc_ghz)
    else:
        pl = path_loss_nlos_db(d3d, h, fc_ghz)
    shadow = rng.normal(0.0, shadow_sigma_db(h, los))
    return los, pl, shadow


@njit(cache=True)
def _draw_small_scale(out, rng):
    for i in range(out.shape[0]):
        out[i] = rng.exponential(1.0)


def _check_altitude(h: float) -> None:
    if not (H_MIN < h <= H_MAX):
        raise ChannelDomainError(f"altitude {h} m outside ({H_MIN}, {H_MAX}]")


def _check_distance(geom: LinkGeometry) -> None:
    if geom.d3d <= 0:
        raise ChannelDomainError("3-D distance must be positive")


def los_probability(geom: LinkGeometry) -> float:
    _check_altitude(geom.drone_altitude_h)
    return float(_los_probability(geom.drone_altitude_h, geom.d2d))


def path_loss_los(geom: LinkGeometry, fc_ghz: float) -> float:
    """LoS path loss in dB. Also used above 100 m where every link is LoS."""
    _check_altitude(geom.drone_altitude_h)
    _check_distance(geom)
    return float(path_loss_los_db(geom.d3d, fc_ghz))


def path_loss_nlos(geom: LinkGeometry, fc_ghz: float) -> float:
    _check_altitude(geom.drone_altitude_h)
    _check_distance(geom)
    return float(path_loss_nlos_db(geom.d3d, geom.drone_altitude_h, fc_ghz))


def shadow_sigma(h: float, los: bool) -> float:
    _check_altitude(h)
    return float(shadow_sigma_db(h, los))


def realize_channel(geom: LinkGeometry, fc_ghz: float, n_subcarriers: int,
                    rng: np.random.Generator) -> ChannelRealization:
    """Draw one block of the drone-BS channel.

    LoS state, path loss and shadowing come first (two draws), then one
    unit-mean exponential power gain per subcarrier.
    """
    _check_altitude(geom.drone_altitude_h)
    _check_distance(geom)
    if n_subcarriers < 1:
        raise ValueError("n_subcarriers must be >= 1")
    los, pl, shadow = _draw_large_scale(geom.drone_altitude_h, geom.d2d, geom.d3d, fc_ghz, rng)
    gains = np.empty(n_subcarriers)
    _draw_small_scale(gains, rng)
    return ChannelRealization(bool(los), float(pl), float(shadow), gains)


class BlockFadingLink:
    """One drone-BS link with block-constant fading.

    Queries inside the same coherence block return the cached realization;
    a new block index triggers a fresh draw.
    """

    def __init__(self, fc_ghz: float, n_subcarriers: int, rng: np.random.Generator):
        self.fc_ghz = fc_ghz
        self.n_subcarriers = n_subcarriers
        self.rng = rng
        self._block = None
        self._current = None

    def realization(self, geom: LinkGeometry, block: int) -> ChannelRealization:
        if block != self._block:
            self._current = realize_channel(geom, self.fc_ghz, self.n_subcarriers, self.rng)
            self._block = block
        return self._current

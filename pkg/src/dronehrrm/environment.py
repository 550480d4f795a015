"""Uplink H-RRM environment: one drone crossing the service area.

Per TTI the controller picks the serving BS, an RRB count and a transmit
power level. Handover-changing actions are only feasible on radio-frame
boundaries once the minimum handover interval has elapsed.

The physical state lives in small numpy arrays and is advanced by the
compiled ``env_step`` kernel; :class:`UavUplinkEnv` is a thin Python view
over the same kernels that the fused training/evaluation loops use.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numba import njit

from ._rng import randbelow
from .a2g_channel import (
    _draw_large_scale, _draw_small_scale, path_loss_los_db, path_loss_nlos_db,
)
from .config import QuantizerConfig, RewardWeights, ScenarioConfig, TopologyConfig
from .kpi import TtiRecord
from .link_layer import _rate_bps, noise_per_subcarrier_w, watts_to_dbm
from .traffic import _arrival_bits

N_Q_BINS = 4

# integer state slots
TTI, SERVING, HO_TIMER, Q, DROPPED, HO_WIN, ARRIVED, SERVED, CLAMPS, N_HO, LAST_HO = range(11)
N_ISTATE = 11

# step output slots
(O_RATE, O_INT, O_RES, O_DELAY, O_INTF, O_REGRET, O_TOTAL, O_PW, O_RRBS, O_SERVED,
 O_ARR, O_QBEFORE, O_HO, O_QAFTER, O_X, O_Y, O_SERVING) = range(17)
N_OUT = 17


class ContractError(RuntimeError):
    """An operation was called outside its contract (e.g. infeasible action)."""


class EnvParams(NamedTuple):
    n_bs: int
    area_w: float
    area_h: float
    fc: float
    h: float
    v: float
    h_bs: float
    tti_s: float
    frame: int
    ho_interval: int
    n_rrb: int
    n_pow: int
    sc_per_rrb: int
    ws: float
    n0_w: float
    is_w_hz: float
    ant_db: float
    p_max_w: float
    lam_dt: float
    packet_bits: int
    ho_pkt_bits: int
    ho_pkt_count: int
    ho_window: int
    q_max: int
    pl_min: float
    pl_max: float
    pl_step: float
    n_pl: int
    q_edge1: int
    q_edge2: int
    h_bin: int
    v_bin: int
    n_h: int
    n_v: int
    a_s: float
    a_d: float
    a_f: float
    a_h: float
    q_norm: float
    int_norm_mw: float
    margin_db: float
    n_actions: int
    max_steps: int


# ---------------------------------------------------------------------------
# domain types

@dataclass(frozen=True)
class NetworkTopology:
    bs_positions: np.ndarray  # (L, 3) metres, z = antenna height
    fc_ghz: float
    rrbs_total_Nb: int
    area: tuple

    @classmethod
    def from_config(cls, cfg: TopologyConfig) -> "NetworkTopology":
        pos = np.array([[x, y, cfg.bs_height] for x, y in cfg.bs_positions], dtype=float)
        return cls(pos, cfg.fc_ghz, cfg.rrbs_total, tuple(cfg.area))

    @property
    def n_bs(self) -> int:
        return self.bs_positions.shape[0]

    def bottom_left_bs(self) -> int:
        return int(np.argmin(np.hypot(self.bs_positions[:, 0], self.bs_positions[:, 1])))


@dataclass(frozen=True)
class DroneKinematics:
    altitude_h: float
    speed_v: float
    position: tuple  # (x, y, z)
    heading: tuple = (1.0, 0.0)


@dataclass(frozen=True)
class EnvState:
    h_bin: int
    v_bin: int
    serving_bs: int
    q_bin: int
    pl_bins: tuple


@dataclass(frozen=True)
class RawObservation:
    h: float
    v: float
    serving: int
    q_bits: int
    pl_db: tuple


@dataclass(frozen=True)
class Action:
    target_bs: int
    rrb_count: int  # 0 marks the no-transmit action
    power_level: int  # index into the power set, -1 for no-transmit

    @property
    def is_no_transmit(self) -> bool:
        return self.rrb_count == 0


@dataclass(frozen=True)
class RewardBreakdown:
    resource_term: float
    delay_term: float
    interference_term: float
    handover_regret: int
    total: float


@dataclass(frozen=True)
class Outcome:
    q_next: int
    interference_mw: float
    rrbs_used: int
    handover: bool


@dataclass(frozen=True)
class RewardNorms:
    rrbs_total: int
    q_norm_bits: float
    int_norm_mw: float


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def pl_bin(pl, pl_min, pl_max, step, n_bins):
    """Return (bin, clamped) for a path loss in dB."""
    if pl < pl_min:
        return 0, True
    if pl > pl_max:
        return n_bins - 1, True
    b = int(math.floor((pl - pl_min) / step))
    if b > n_bins - 1:
        b = n_bins - 1
    return b, False


@njit(cache=True)
def q_bin(q, e1, e2):
    if q <= 0:
        return 0
    if q <= e1:
        return 1
    if q <= e2:
        return 2
    return 3


@njit(cache=True)
def state_key(p, st, pl):
    key = (p.h_bin * p.n_v + p.v_bin) * p.n_bs + st[SERVING]
    key = key * N_Q_BINS + q_bin(st[Q], p.q_edge1, p.q_edge2)
    for b in range(p.n_bs):
        k, clamped = pl_bin(pl[b], p.pl_min, p.pl_max, p.pl_step, p.n_pl)
        if clamped:
            st[CLAMPS] += 1
        key = key * p.n_pl + k
    return key


@njit(cache=True)
def decode_action(key, serving, n_bs, n_rrb, n_pow):
    """Return (target_bs, rrb_count, power_index); rrb_count 0 = no-transmit."""
    if key == n_bs * n_rrb * n_pow:
        return serving, 0, -1
    p = key % n_pow
    rest = key // n_pow
    r = rest % n_rrb + 1
    rel = rest // n_rrb
    return (serving + rel) % n_bs, r, p


@njit(cache=True)
def encode_action(target, r, p, serving, n_bs, n_rrb, n_pow):
    if r == 0:
        return n_bs * n_rrb * n_pow
    rel = (target - serving) % n_bs
    return (rel * n_rrb + (r - 1)) * n_pow + p


@njit(cache=True)
def feasible_mask_kernel(serving, free, ho_allowed, n_bs, n_rrb, n_pow, mask):
    mask[:] = False
    for rel in range(n_bs):
        if rel > 0 and not ho_allowed:
            continue
        b = (serving + rel) % n_bs
        for r in range(1, min(free[b], n_rrb) + 1):
            base = (rel * n_rrb + (r - 1)) * n_pow
            for p in range(n_pow):
                mask[base + p] = True
    if free[serving] <= 0:
        mask[n_bs * n_rrb * n_pow] = True


@njit(cache=True)
def handover_allowed(p, st):
    return st[HO_TIMER] == 0 and st[TTI] % p.frame == 0


@njit(cache=True)
def feasible_mask(p, st, free, mask):
    feasible_mask_kernel(st[SERVING], free, handover_allowed(p, st), p.n_bs, p.n_rrb,
                         p.n_pow, mask)


@njit(cache=True)
def reward_terms(rrbs, q_next, int_mw, handover, n_rrb, q_norm, int_norm, a_s, a_d, a_f, a_h):
    res = 1.0 / (1.0 + rrbs / n_rrb)
    dly = 1.0 / (1.0 + q_next / q_norm)
    intf = 1.0 / (1.0 + int_mw / int_norm)
    regret = 1.0 if handover else 0.0
    return res, dly, intf, regret, a_s * res + a_d * dly + a_f * intf - a_h * regret


@njit(cache=True)
def drone_xy(p, st, fs):
    return st[TTI] * p.v * p.tti_s, fs[0]


@njit(cache=True)
def refresh_large_scale(p, bs, st, fs, los, shadow, rng):
    x, y = drone_xy(p, st, fs)
    for b in range(p.n_bs):
        d2d = math.hypot(x - bs[b, 0], y - bs[b, 1])
        d3d = math.sqrt(d2d * d2d + (p.h - bs[b, 2]) ** 2)
        l, _, s = _draw_large_scale(p.h, d2d, d3d, p.fc, rng)
        los[b] = l
        shadow[b] = s


@njit(cache=True)
def update_path_loss(p, bs, st, fs, los, shadow, pl):
    x, y = drone_xy(p, st, fs)
    for b in range(p.n_bs):
        d2d = math.hypot(x - bs[b, 0], y - bs[b, 1])
        d3d = max(math.sqrt(d2d * d2d + (p.h - bs[b, 2]) ** 2), 1.0)
        if los[b]:
            pl[b] = path_loss_los_db(d3d, p.fc) + shadow[b]
        else:
            pl[b] = path_loss_nlos_db(d3d, p.h, p.fc) + shadow[b]


@njit(cache=True)
def draw_occupancy(p, free, rng):
    for b in range(p.n_bs):
        free[b] = randbelow(rng, p.n_rrb + 1)


@njit(cache=True)
def env_reset(p, bs, start_bs, st, fs, los, shadow, pl, free, rng_world):
    st[:] = 0
    st[SERVING] = start_bs
    st[LAST_HO] = -1
    fs[0] = rng_world.random() * p.area_h
    refresh_large_scale(p, bs, st, fs, los, shadow, rng_world)
    update_path_loss(p, bs, st, fs, los, shadow, pl)
    draw_occupancy(p, free, rng_world)


@njit(cache=True)
def env_step(p, bs, p_levels, st, fs, los, shadow, pl, free, action, rng_world, rng_fade,
             gains_buf, out):
    """Advance one TTI under ``action``; fills ``out`` and returns ``done``.

    Effects in order: handover bookkeeping, fading draw on the serving
    link, rate, arrivals and queue update, interference on the other BSs,
    reward, then kinematics and the next TTI's large-scale/occupancy draws.
    """
    serving = st[SERVING]
    target, r, pidx = decode_action(action, serving, p.n_bs, p.n_rrb, p.n_pow)
    x, y = drone_xy(p, st, fs)
    handover = target != serving
    if handover:
        st[SERVING] = target
        st[HO_TIMER] = p.ho_interval
        st[HO_WIN] = p.ho_window
        st[N_HO] += 1
        st[LAST_HO] = st[TTI]
        serving = target

    p_w = 0.0
    rate = 0.0
    if r > 0:
        p_w = p_levels[pidx]
        g = gains_buf[: r * p.sc_per_rrb]
        _draw_small_scale(g, rng_fade)
        lsg = 10.0 ** ((p.ant_db - pl[serving]) / 10.0)
        rate = _rate_bps(p_w, g, lsg, p.n0_w, p.ws, p.is_w_hz)

    q = st[Q]
    u = _arrival_bits(rng_world, p.lam_dt, p.packet_bits, st[HO_WIN], p.ho_window,
                      p.ho_pkt_count, p.ho_pkt_bits)
    cap = int(math.floor(rate * p.tti_s))
    served = min(q + u, cap)
    q_next = q + u - served
    if q_next > p.q_max:
        st[DROPPED] += q_next - p.q_max
        q_next = p.q_max
    st[Q] = q_next
    st[ARRIVED] += u
    st[SERVED] += served
    if st[HO_WIN] > 0:
        st[HO_WIN] -= 1

    int_mw = 0.0
    if r > 0:
        p_dbm = 10.0 * math.log10(p_w * 1e3)
        for b in range(p.n_bs):
            if b != serving:
                int_mw += 10.0 ** ((p_dbm - pl[b] + p.ant_db) / 10.0)

    res, dly, intf, regret, total = reward_terms(r, q_next, int_mw, handover, p.n_rrb, p.q_norm,
                                                 p.int_norm_mw, p.a_s, p.a_d, p.a_f, p.a_h)
    out[O_RATE] = rate
    out[O_INT] = int_mw
    out[O_RES] = res
    out[O_DELAY] = dly
    out[O_INTF] = intf
    out[O_REGRET] = regret
    out[O_TOTAL] = total
    out[O_PW] = p_w
    out[O_RRBS] = r
    out[O_SERVED] = served
    out[O_ARR] = u
    out[O_QBEFORE] = q
    out[O_HO] = 1.0 if handover else 0.0
    out[O_QAFTER] = q_next
    out[O_X] = x
    out[O_Y] = y
    out[O_SERVING] = serving

    st[TTI] += 1
    if st[HO_TIMER] > 0:
        st[HO_TIMER] -= 1
    nx, _ = drone_xy(p, st, fs)
    done = nx >= p.area_w
    if not done:
        if st[TTI] % p.frame == 0:
            refresh_large_scale(p, bs, st, fs, los, shadow, rng_world)
        update_path_loss(p, bs, st, fs, los, shadow, pl)
        draw_occupancy(p, free, rng_world)
    return done


# ---------------------------------------------------------------------------
# Python-level helpers

class ActionSpace:
    """Action keys are relative to the serving BS: the BS component of a key
    is ``(target - serving) mod L``, so low keys always mean "stay"."""

    def __init__(self, n_bs: int, n_rrb: int, power_levels_w: Sequence[float]):
        self.n_bs = n_bs
        self.n_rrb = n_rrb
        self.power_levels_w = np.asarray(power_levels_w, dtype=float)
        self.n_pow = len(self.power_levels_w)
        self.n_actions = n_bs * n_rrb * self.n_pow + 1
        self.no_transmit_key = self.n_actions - 1

    def key(self, action: Action, serving: int) -> int:
        if action.is_no_transmit:
            return self.no_transmit_key
        return int(encode_action(action.target_bs, action.rrb_count, action.power_level,
                                 serving, self.n_bs, self.n_rrb, self.n_pow))

    def action(self, key: int, serving: int) -> Action:
        if not 0 <= key < self.n_actions:
            raise ContractError(f"action key {key} out of range")
        t, r, p = decode_action(key, serving, self.n_bs, self.n_rrb, self.n_pow)
        return Action(int(t), int(r), int(p))

    def power_w(self, action: Action) -> float:
        return 0.0 if action.is_no_transmit else float(self.power_levels_w[action.power_level])


def power_levels(p_max_w: float, n: int) -> np.ndarray:
    """Geometric power set P_max, P_max/2, ..., P_max/2^(n-1)."""
    return p_max_w / 2.0 ** np.arange(n)


def feasible_actions(state: EnvState, occupancy: Sequence[int], ho_timer: int,
                     space: ActionSpace, frame_boundary: bool = True) -> list[Action]:
    mask = np.zeros(space.n_actions, dtype=np.bool_)
    feasible_mask_kernel(state.serving_bs, np.asarray(occupancy, dtype=np.int64),
                         ho_timer == 0 and frame_boundary, space.n_bs, space.n_rrb,
                         space.n_pow, mask)
    return [space.action(int(k), state.serving_bs) for k in np.flatnonzero(mask)]


def reward(prev: EnvState, action: Action, outcome: Outcome, weights: RewardWeights,
           norms: RewardNorms) -> RewardBreakdown:
    res, dly, intf, regret, total = reward_terms(
        outcome.rrbs_used, outcome.q_next, outcome.interference_mw, outcome.handover,
        norms.rrbs_total, norms.q_norm_bits, norms.int_norm_mw,
        weights.alpha_s, weights.alpha_d, weights.alpha_f, weights.alpha_h)
    return RewardBreakdown(res, dly, intf, int(regret), total)


class Quantizer:
    def __init__(self, cfg: QuantizerConfig, n_bs: int, packet_size: int):
        self.cfg = cfg
        self.n_bs = n_bs
        self.packet_size = packet_size
        self.n_pl_bins = int(math.ceil((cfg.pl_max_db - cfg.pl_min_db) / cfg.pl_step_db))
        self.q_edges = (int(cfg.q_edges_packets[0] * packet_size),
                        int(cfg.q_edges_packets[1] * packet_size))
        self.altitudes = tuple(float(a) for a in cfg.altitudes)
        self.speeds = tuple(float(s) for s in cfg.speeds)
        self.clamp_count = 0

    @property
    def n_states(self) -> int:
        return (len(self.altitudes) * len(self.speeds) * self.n_bs * N_Q_BINS
                * self.n_pl_bins ** self.n_bs)

    def _nearest(self, grid, value) -> int:
        if value < min(grid) or value > max(grid):
            self.clamp_count += 1
        return int(np.argmin([abs(g - value) for g in grid]))

    def pl_bin(self, pl_db: float) -> int:
        b, clamped = pl_bin(pl_db, self.cfg.pl_min_db, self.cfg.pl_max_db, self.cfg.pl_step_db,
                            self.n_pl_bins)
        self.clamp_count += int(clamped)
        return int(b)

    def quantize(self, raw: RawObservation) -> EnvState:
        return EnvState(self._nearest(self.altitudes, raw.h), self._nearest(self.speeds, raw.v),
                        int(raw.serving), int(q_bin(raw.q_bits, *self.q_edges)),
                        tuple(self.pl_bin(pl) for pl in raw.pl_db))

    def dequantize(self, state: EnvState) -> RawObservation:
        qrep = (0, self.q_edges[0], self.q_edges[1], self.q_edges[1] + self.packet_size)
        pls = tuple(self.cfg.pl_min_db + (b + 0.5) * self.cfg.pl_step_db for b in state.pl_bins)
        return RawObservation(self.altitudes[state.h_bin], self.speeds[state.v_bin],
                              state.serving_bs, qrep[state.q_bin], pls)

    def key(self, state: EnvState) -> int:
        key = (state.h_bin * len(self.speeds) + state.v_bin) * self.n_bs + state.serving_bs
        key = key * N_Q_BINS + state.q_bin
        for b in state.pl_bins:
            key = key * self.n_pl_bins + b
        return key

    def state_from_key(self, key: int) -> EnvState:
        pls = []
        for _ in range(self.n_bs):
            key, b = divmod(key, self.n_pl_bins)
            pls.append(b)
        key, qb = divmod(key, N_Q_BINS)
        key, serving = divmod(key, self.n_bs)
        hb, vb = divmod(key, len(self.speeds))
        return EnvState(hb, vb, serving, qb, tuple(reversed(pls)))


def min_path_loss_db(cfg: ScenarioConfig) -> float:
    """Smallest deterministic path loss the drone can see (directly above a BS)."""
    h = cfg.drone.altitude
    d3d = max(abs(h - cfg.topology.bs_height), 1.0)
    pl = path_loss_los_db(d3d, cfg.topology.fc_ghz)
    if h <= 100.0:
        pl = min(pl, path_loss_nlos_db(d3d, h, cfg.topology.fc_ghz))
    return float(pl)


def reward_norms(cfg: ScenarioConfig) -> RewardNorms:
    ant = cfg.channel.gtx_db + cfg.channel.grx_db
    int_norm = cfg.radio.p_max_w * 1e3 * 10.0 ** ((ant - min_path_loss_db(cfg)) / 10.0)
    return RewardNorms(cfg.topology.rrbs_total, 10.0 * cfg.traffic.packet_size, int_norm)


def build_params(cfg: ScenarioConfig, quantizer: Quantizer, space: ActionSpace) -> EnvParams:
    t, ch, tr, rd, w = cfg.topology, cfg.channel, cfg.traffic, cfg.radio, cfg.weights
    norms = reward_norms(cfg)
    h_bin = int(np.argmin([abs(a - cfg.drone.altitude) for a in quantizer.altitudes]))
    v_bin = int(np.argmin([abs(s - cfg.drone.speed) for s in quantizer.speeds]))
    max_steps = int(math.ceil(t.area[0] / (cfg.drone.speed * ch.tti_s))) + 1
    return EnvParams(
        n_bs=len(t.bs_positions), area_w=float(t.area[0]), area_h=float(t.area[1]),
        fc=t.fc_ghz, h=cfg.drone.altitude, v=cfg.drone.speed, h_bs=t.bs_height,
        tti_s=ch.tti_s, frame=ch.frame_ttis, ho_interval=rd.min_ho_interval_ttis,
        n_rrb=t.rrbs_total, n_pow=space.n_pow, sc_per_rrb=ch.subcarriers_per_rrb,
        ws=ch.subcarrier_bw_hz,
        n0_w=noise_per_subcarrier_w(ch.subcarrier_bw_hz, ch.noise_figure_db, ch.noise_dbm_per_hz),
        is_w_hz=ch.ext_interference_w_per_hz, ant_db=ch.gtx_db + ch.grx_db, p_max_w=rd.p_max_w,
        lam_dt=tr.lambda0 * ch.tti_s, packet_bits=tr.packet_size, ho_pkt_bits=tr.ho_packet_size,
        ho_pkt_count=tr.ho_packet_count, ho_window=tr.ho_window_Th, q_max=tr.q_max,
        pl_min=quantizer.cfg.pl_min_db, pl_max=quantizer.cfg.pl_max_db,
        pl_step=quantizer.cfg.pl_step_db, n_pl=quantizer.n_pl_bins,
        q_edge1=quantizer.q_edges[0], q_edge2=quantizer.q_edges[1],
        h_bin=h_bin, v_bin=v_bin, n_h=len(quantizer.altitudes), n_v=len(quantizer.speeds),
        a_s=w.alpha_s, a_d=w.alpha_d, a_f=w.alpha_f, a_h=w.alpha_h,
        q_norm=norms.q_norm_bits, int_norm_mw=norms.int_norm_mw,
        margin_db=rd.baseline_margin_db, n_actions=space.n_actions, max_steps=max_steps,
    )


class UavUplinkEnv:
    """Single-drone uplink H-RRM environment.

    ``reset(rng)`` spawns two child streams from ``rng``: a world stream
    (start position, shadowing, traffic, terrestrial RRB occupancy) whose
    draw count per TTI does not depend on the actions, and a fading stream
    for the serving link's small-scale gains.
    """

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.topology = NetworkTopology.from_config(config.topology)
        self.space = ActionSpace(self.topology.n_bs, config.topology.rrbs_total,
                                 power_levels(config.radio.p_max_w, config.radio.power_levels))
        self.quantizer = Quantizer(config.quantizer, self.topology.n_bs, config.traffic.packet_size)
        self.params = build_params(config, self.quantizer, self.space)
        self.norms = reward_norms(config)
        self.start_bs = self.topology.bottom_left_bs()
        n = self.topology.n_bs
        self.st = np.zeros(N_ISTATE, dtype=np.int64)
        self.fs = np.zeros(1)
        self.los = np.zeros(n, dtype=np.bool_)
        self.shadow = np.zeros(n)
        self.pl = np.zeros(n)
        self.free = np.zeros(n, dtype=np.int64)
        self._gains = np.zeros(config.topology.rrbs_total * config.channel.subcarriers_per_rrb)
        self._out = np.zeros(N_OUT)
        self._mask = np.zeros(self.space.n_actions, dtype=np.bool_)
        self.rng_world = None
        self.rng_fade = None
        self.done = True
        self.last_record: TtiRecord | None = None

    @property
    def n_states(self) -> int:
        return self.quantizer.n_states

    @property
    def n_actions(self) -> int:
        return self.space.n_actions

    @property
    def max_abs_reward(self) -> float:
        return self.config.weights.max_abs_reward

    @property
    def tti(self) -> int:
        return int(self.st[TTI])

    @property
    def ho_timer(self) -> int:
        return int(self.st[HO_TIMER])

    @property
    def occupancy(self) -> np.ndarray:
        return self.free.copy()

    @property
    def kinematics(self) -> DroneKinematics:
        x, y = drone_xy(self.params, self.st, self.fs)
        return DroneKinematics(self.params.h, self.params.v, (x, y, self.params.h))

    def streams_from(self, rng: np.random.Generator):
        world, fade = rng.spawn(2)
        return world, fade

    def reset(self, rng: np.random.Generator) -> EnvState:
        self.rng_world, self.rng_fade = self.streams_from(rng)
        env_reset(self.params, self.topology.bs_positions, self.start_bs, self.st, self.fs,
                  self.los, self.shadow, self.pl, self.free, self.rng_world)
        self.done = False
        self.last_record = None
        return self.state

    def raw_observation(self) -> RawObservation:
        return RawObservation(self.params.h, self.params.v, int(self.st[SERVING]),
                              int(self.st[Q]), tuple(float(x) for x in self.pl))

    @property
    def state(self) -> EnvState:
        return self.quantizer.state_from_key(self.current_key())

    def current_key(self) -> int:
        return int(state_key(self.params, self.st, self.pl))

    def state_key(self, state: EnvState) -> int:
        return self.quantizer.key(state)

    def action_mask(self) -> np.ndarray:
        feasible_mask(self.params, self.st, self.free, self._mask)
        return self._mask.copy()

    def feasible_actions(self) -> list[Action]:
        serving = int(self.st[SERVING])
        return [self.space.action(int(k), serving) for k in np.flatnonzero(self.action_mask())]

    def rss_dbm(self) -> np.ndarray:
        """Received power per BS at P_max through the realized path loss."""
        return watts_to_dbm(self.params.p_max_w) - self.pl + self.params.ant_db

    def step(self, action: Action) -> tuple[EnvState, RewardBreakdown, bool]:
        key = self.space.key(action, int(self.st[SERVING]))
        state, _, done = self.step_key(key)
        return state, self._breakdown(), done

    def step_key(self, key: int) -> tuple[EnvState, float, bool]:
        if self.done:
            raise ContractError("step() on a finished episode; call reset()")
        if not self.action_mask()[key]:
            raise ContractError(f"infeasible action key {key} at TTI {self.tti}")
        out = self._out
        self.done = bool(env_step(self.params, self.topology.bs_positions,
                                  self.space.power_levels_w, self.st, self.fs, self.los,
                                  self.shadow, self.pl, self.free, key, self.rng_world,
                                  self.rng_fade, self._gains, out))
        self.last_record = TtiRecord(
            tti=self.tti - 1, position=(float(out[O_X]), float(out[O_Y])),
            serving_bs=int(out[O_SERVING]), handover=bool(out[O_HO]),
            q_bits=int(out[O_QAFTER]), q_before_bits=int(out[O_QBEFORE]),
            rate_bps=float(out[O_RATE]), interference_mw=float(out[O_INT]),
            rrbs_used=int(out[O_RRBS]), tx_power_w=float(out[O_PW]),
            reward=self._breakdown())
        return self.state, float(out[O_TOTAL]), self.done

    def _breakdown(self) -> RewardBreakdown:
        out = self._out
        return RewardBreakdown(float(out[O_RES]), float(out[O_DELAY]), float(out[O_INTF]),
                               int(out[O_REGRET]), float(out[O_TOTAL]))

    def quantize(self, raw: RawObservation) -> EnvState:
        return self.quantizer.quantize(raw)

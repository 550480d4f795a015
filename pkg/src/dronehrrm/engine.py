"""Compiled episode loops for the UAV uplink environment.

One kernel drives the environment under a learned table (optionally
learning from replay as it goes) or under the RSS baseline. It consumes
the world, fading and agent streams in the same order as the step-by-step
Python path in :func:`dronehrrm.agent.train`.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from . import environment as E
from .agent import (
    AGENT_STREAM, EVAL_STREAM, TRAIN_STREAM, QTable, ReplayLearner, TrainLogRow, push_kernel,
    replay_round, select_kernel, stream,
)
from .baseline import baseline_key
from .config import TrainConfig
from .kpi import EpisodeSummary, TtiRecord

MODE_POLICY, MODE_TRAIN, MODE_BASELINE = 0, 1, 2

(K_NTTI, K_HO, K_INT, K_RRB, K_DELAY, K_DELAYN, K_STARVED, K_REWARD, K_PMAX, K_C1, K_SPACING,
 K_LASTHO, K_NHOXY) = range(13)
N_KPI = 13

(T_TTI, T_X, T_Y, T_SERVING, T_HO, T_Q, T_RATE, T_INT, T_RRBS, T_PW, T_RES, T_DELAY, T_INTF,
 T_REGRET, T_TOTAL, T_QBEFORE) = range(16)
N_TRACE = 16


@njit(cache=True)
def _accumulate(p, out, tti, kpi, ho_xy, trace):
    kpi[K_NTTI] += 1
    kpi[K_INT] += out[E.O_INT]
    kpi[K_RRB] += out[E.O_RRBS]
    kpi[K_REWARD] += out[E.O_TOTAL]
    if out[E.O_PW] > kpi[K_PMAX]:
        kpi[K_PMAX] = out[E.O_PW]
    if out[E.O_PW] > p.p_max_w * (1.0 + 1e-12):
        kpi[K_C1] += 1
    if out[E.O_RRBS] > 0:
        if out[E.O_RATE] > 0:
            kpi[K_DELAY] += out[E.O_QBEFORE] / out[E.O_RATE]
            kpi[K_DELAYN] += 1
        elif out[E.O_QBEFORE] > 0:
            kpi[K_STARVED] += 1
    if out[E.O_HO] > 0:
        kpi[K_HO] += 1
        if kpi[K_LASTHO] >= 0 and tti - kpi[K_LASTHO] < p.ho_interval:
            kpi[K_SPACING] += 1
        kpi[K_LASTHO] = tti
        n = int(kpi[K_NHOXY])
        if n < ho_xy.shape[0]:
            ho_xy[n, 0] = out[E.O_X]
            ho_xy[n, 1] = out[E.O_Y]
            kpi[K_NHOXY] += 1
    if trace.shape[0] > 0:
        row = int(kpi[K_NTTI]) - 1
        trace[row, T_TTI] = tti
        trace[row, T_X] = out[E.O_X]
        trace[row, T_Y] = out[E.O_Y]
        trace[row, T_SERVING] = out[E.O_SERVING]
        trace[row, T_HO] = out[E.O_HO]
        trace[row, T_Q] = out[E.O_QAFTER]
        trace[row, T_RATE] = out[E.O_RATE]
        trace[row, T_INT] = out[E.O_INT]
        trace[row, T_RRBS] = out[E.O_RRBS]
        trace[row, T_PW] = out[E.O_PW]
        trace[row, T_RES] = out[E.O_RES]
        trace[row, T_DELAY] = out[E.O_DELAY]
        trace[row, T_INTF] = out[E.O_INTF]
        trace[row, T_REGRET] = out[E.O_REGRET]
        trace[row, T_TOTAL] = out[E.O_TOTAL]
        trace[row, T_QBEFORE] = out[E.O_QBEFORE]


@njit(cache=True)
def run_episode(mode, p, bs, p_levels, start_bs, st, fs, los, shadow, pl, free,
                rng_world, rng_fade, rng_agent, values, eps,
                visits, snap, row_epoch, ctr, mem_i, mem_w, meta, idx, beta, batch, snapshot_c,
                bound, kpi, ho_xy, trace):
    E.env_reset(p, bs, start_bs, st, fs, los, shadow, pl, free, rng_world)
    gains = np.empty(p.n_rrb * p.sc_per_rrb)
    out = np.zeros(E.N_OUT)
    mask = np.zeros(p.n_actions, dtype=np.bool_)
    mask2 = np.zeros(p.n_actions, dtype=np.bool_)
    kpi[:] = 0.0
    kpi[K_LASTHO] = -1.0
    p_max_dbm = 10.0 * np.log10(p.p_max_w * 1e3)
    rss = np.empty(p.n_bs)
    s = E.state_key(p, st, pl)
    E.feasible_mask(p, st, free, mask)
    done = False
    while not done:
        tti = st[E.TTI]
        if mode == MODE_BASELINE:
            for b in range(p.n_bs):
                rss[b] = p_max_dbm - pl[b] + p.ant_db
            a = baseline_key(rss, free, st[E.SERVING], E.handover_allowed(p, st), p.margin_db,
                             p.n_bs, p.n_rrb, p.n_pow)
        else:
            a = select_kernel(values, s, mask, eps, rng_agent)
        done = E.env_step(p, bs, p_levels, st, fs, los, shadow, pl, free, a, rng_world,
                          rng_fade, gains, out)
        s2 = E.state_key(p, st, pl)
        if done:
            mask2[:] = False
        else:
            E.feasible_mask(p, st, free, mask2)
        if mode == MODE_TRAIN:
            push_kernel(mem_i, mem_w, meta, s, a, out[E.O_TOTAL], s2, done, mask2)
            replay_round(rng_agent, mem_i, mem_w, meta, idx, values, visits, snap, row_epoch,
                         ctr, beta, batch, snapshot_c, bound)
        _accumulate(p, out, tti, kpi, ho_xy, trace)
        s = s2
        mask, mask2 = mask2, mask
    return st[E.DROPPED]


class EpisodeRunner:
    """Holds the per-environment buffers for :func:`run_episode`."""

    def __init__(self, env: E.UavUplinkEnv):
        self.env = env
        p = env.params
        self.kpi = np.zeros(N_KPI)
        self.ho_xy = np.zeros((p.max_steps // max(p.frame, 1) + 2, 2))
        self._no_trace = np.zeros((0, N_TRACE))
        self._dummy_vals = np.zeros((1, p.n_actions))
        self._dummy_learner = ReplayLearner(QTable(1, p.n_actions),
                                            TrainConfig(replay_capacity=1, batch_M=1), 1.0)

    def run(self, mode: int, rng: np.random.Generator, table: QTable | None = None,
            eps: float = 0.0, agent_rng: np.random.Generator | None = None,
            learner: ReplayLearner | None = None, trace: bool = False):
        env = self.env
        p = env.params
        world, fade = env.streams_from(rng)
        env.rng_world, env.rng_fade = world, fade
        values = table.values if table is not None else self._dummy_vals
        lr = learner if learner is not None else self._dummy_learner
        m = lr.memory
        tbuf = np.zeros((p.max_steps, N_TRACE)) if trace else self._no_trace
        agent_rng = agent_rng if agent_rng is not None else np.random.default_rng(0)
        beta = lr.cfg.beta
        dropped = run_episode(mode, p, env.topology.bs_positions, env.space.power_levels_w,
                              env.start_bs, env.st, env.fs, env.los, env.shadow, env.pl, env.free,
                              world, fade, agent_rng, values, float(eps),
                              lr.table.visits, lr.snap, lr.row_epoch, lr.ctr, m.records,
                              m.rewards, m.meta, lr.idx, beta, lr.cfg.batch_M,
                              lr.cfg.snapshot_C, lr.bound, self.kpi, self.ho_xy, tbuf)
        env.done = True
        summary = self._summary(int(dropped))
        if not trace:
            return summary, None
        return summary, _records(tbuf[: int(self.kpi[K_NTTI])])

    def _summary(self, dropped: int) -> EpisodeSummary:
        k = self.kpi
        st = self.env.st
        return EpisodeSummary(
            n_tti=int(k[K_NTTI]), handovers=int(k[K_HO]), interference_mw_sum=float(k[K_INT]),
            rrbs_sum=float(k[K_RRB]), delay_s_sum=float(k[K_DELAY]), delay_n=int(k[K_DELAYN]),
            starved_ttis=int(k[K_STARVED]), reward_sum=float(k[K_REWARD]), dropped_bits=dropped,
            arrived_bits=int(st[E.ARRIVED]), served_bits=int(st[E.SERVED]),
            final_q_bits=int(st[E.Q]), max_tx_power_w=float(k[K_PMAX]),
            power_violations=int(k[K_C1]), spacing_violations=int(k[K_SPACING]),
            handover_xy=self.ho_xy[: int(k[K_NHOXY])].copy(),
        )


def _records(tr: np.ndarray) -> list[TtiRecord]:
    recs = []
    for row in tr:
        rb = E.RewardBreakdown(float(row[T_RES]), float(row[T_DELAY]), float(row[T_INTF]),
                               int(row[T_REGRET]), float(row[T_TOTAL]))
        recs.append(TtiRecord(
            tti=int(row[T_TTI]), position=(float(row[T_X]), float(row[T_Y])),
            serving_bs=int(row[T_SERVING]), handover=bool(row[T_HO]), q_bits=int(row[T_Q]),
            rate_bps=float(row[T_RATE]), interference_mw=float(row[T_INT]),
            rrbs_used=int(row[T_RRBS]), reward=rb, tx_power_w=float(row[T_PW]),
            q_before_bits=int(row[T_QBEFORE])))
    return recs


def train_uav(env: E.UavUplinkEnv, cfg: TrainConfig, table: QTable | None = None,
              progress=None) -> tuple[QTable, list[TrainLogRow]]:
    """Compiled counterpart of :func:`dronehrrm.agent.train` for the UAV environment."""
    table = table or QTable(env.n_states, env.n_actions)
    w_max = env.config.weights.max_abs_reward
    learner = ReplayLearner(table, cfg, w_max)
    runner = EpisodeRunner(env)
    agent_rng = stream(cfg.seed, AGENT_STREAM)
    log = []
    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        summary, _ = runner.run(MODE_TRAIN, stream(cfg.seed, TRAIN_STREAM, ep), table, eps,
                                agent_rng, learner)
        log.append(TrainLogRow(ep, eps, summary))
        if progress is not None:
            progress(ep, summary)
    return table, log


def evaluate(env: E.UavUplinkEnv, episodes: int, seed: int, table: QTable | None = None,
             scheme: str = "learned", eps: float = 0.0, trace: bool = False):
    """Run ``episodes`` evaluation episodes; returns (summaries, traces or None).

    Episode ``i`` uses the world/fading streams of ``(seed, eval, i)`` for
    every scheme, so learned and baseline runs see the same start positions,
    shadowing, traffic and terrestrial occupancy.
    """
    if scheme == "learned":
        if table is None:
            raise ValueError("learned evaluation needs a Q-table")
        if table.n_states != env.n_states or table.n_actions != env.n_actions:
            raise ValueError("Q-table shape does not match the environment")
        mode = MODE_POLICY
    elif scheme == "baseline":
        mode = MODE_BASELINE
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    runner = EpisodeRunner(env)
    agent_rng = stream(seed, AGENT_STREAM, 1)
    summaries, traces = [], []
    for ep in range(episodes):
        s, tr = runner.run(mode, stream(seed, EVAL_STREAM, ep), table, eps, agent_rng,
                           trace=trace)
        summaries.append(s)
        if trace:
            traces.append(tr)
    return summaries, (traces if trace else None)

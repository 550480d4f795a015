"""Tabular Q-learning with experience replay and a periodically refreshed target table.

The learning rate for an update of Q(s, a) is ``1 / (1 + n/5)`` where ``n``
counts earlier updates of state ``s``. Bootstrap targets read a snapshot of
the table that is refreshed every ``snapshot_C`` updates; the snapshot is
kept copy-on-write per row so a refresh is O(1).
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np
from numba import njit

from ._rng import randbelow
from .config import TrainConfig
from .kpi import EpisodeSummary

POLICY_MAGIC = b"DRONEHRRM-QTABLE\n"
POLICY_VERSION = 1

# stream purposes for seeding
TRAIN_STREAM, EVAL_STREAM, AGENT_STREAM = 0, 1, 2

EPOCH, UPDATES = 0, 1
SIZE, HEAD = 0, 1
# replay record columns; mask words follow
R_S, R_A, R_S2, R_TERM, R_MASK = range(5)


class PolicyFormatError(ValueError):
    pass


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, key...)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


class QTable:
    """Dense Q-table; unvisited entries read as zero."""

    def __init__(self, n_states: int, n_actions: int, values=None, visits=None):
        self.n_states = int(n_states)
        self.n_actions = int(n_actions)
        self.values = (np.zeros((n_states, n_actions)) if values is None
                       else np.ascontiguousarray(values, dtype=np.float64))
        self.visits = (np.zeros(n_states, dtype=np.int64) if visits is None
                       else np.ascontiguousarray(visits, dtype=np.int64))
        self.meta: dict = {}

    def __getitem__(self, sa):
        s, a = sa
        return float(self.values[s, a])

    def copy(self) -> "QTable":
        t = QTable(self.n_states, self.n_actions, self.values.copy(), self.visits.copy())
        t.meta = dict(self.meta)
        return t

    def visited_states(self) -> np.ndarray:
        return np.flatnonzero((self.visits > 0) | np.any(self.values != 0.0, axis=1))

    def greedy(self, s: int, mask: np.ndarray) -> int:
        return int(select_kernel(self.values, s, mask, 0.0, np.random.default_rng(0)))


class Experience(NamedTuple):
    s: int
    a: int
    w: float
    s_next: int
    terminal: bool
    next_mask: np.ndarray | None = None  # feasible actions at s_next (None = all)


# ---------------------------------------------------------------------------
# kernels

@njit(cache=True)
def select_kernel(values, s, mask, eps, rng):
    """Epsilon-greedy over feasible actions; ties go to the lowest key."""
    n_a = mask.shape[0]
    if eps > 0.0 and rng.random() < eps:
        n = 0
        for a in range(n_a):
            if mask[a]:
                n += 1
        k = randbelow(rng, n)
        for a in range(n_a):
            if mask[a]:
                if k == 0:
                    return a
                k -= 1
    best = -1
    bv = 0.0
    for a in range(n_a):
        if mask[a] and (best < 0 or values[s, a] > bv):
            best = a
            bv = values[s, a]
    return best


@njit(cache=True)
def learning_rate(n):
    return 1.0 / (1.0 + n / 5.0)


@njit(cache=True)
def target_max(values, snap, row_epoch, ctr, s, mem_i, i):
    """Max of snapshot row ``s`` over the actions flagged in record ``i``'s mask words.

    Scalar indexing only: row views cost refcount traffic inside the hot loop.
    """
    use_snap = row_epoch[s] == ctr[EPOCH]
    m = -np.inf
    for k in range(mem_i.shape[1] - R_MASK):
        w = mem_i[i, R_MASK + k]
        a = k * 64
        while w != 0:
            if w & 1:
                v = snap[s, a] if use_snap else values[s, a]
                if v > m:
                    m = v
            w = (w >> 1) & 0x7FFFFFFFFFFFFFFF
            a += 1
    if m == -np.inf:
        return 0.0
    return m


@njit(cache=True)
def apply_update(values, visits, snap, row_epoch, ctr, s, a, y, snapshot_c, bound):
    if row_epoch[s] != ctr[EPOCH]:
        # explicit loop: slice assignment is several times slower in numba
        for j in range(values.shape[1]):
            snap[s, j] = values[s, j]
        row_epoch[s] = ctr[EPOCH]
    alpha = learning_rate(visits[s])
    q = (1.0 - alpha) * values[s, a] + alpha * y
    if abs(q) > bound:
        raise FloatingPointError("Q-value left its theoretical bound")
    values[s, a] = q
    visits[s] += 1
    ctr[UPDATES] += 1
    if ctr[UPDATES] % snapshot_c == 0:
        ctr[EPOCH] += 1


@njit(cache=True)
def push_kernel(mem_i, mem_w, meta, s, a, w, s2, term, mask2):
    """Store one experience; the next-state mask is packed into 64-bit words."""
    cap = mem_i.shape[0]
    i = meta[HEAD]
    mem_i[i, R_S] = s
    mem_i[i, R_A] = a
    mem_i[i, R_S2] = s2
    mem_i[i, R_TERM] = 1 if term else 0
    for k in range(R_MASK, mem_i.shape[1]):
        mem_i[i, k] = 0
    for k in range(mask2.shape[0]):
        if mask2[k]:
            mem_i[i, R_MASK + (k >> 6)] |= np.int64(1) << np.int64(k & 63)
    mem_w[i] = w
    meta[HEAD] = (i + 1) % cap
    if meta[SIZE] < cap:
        meta[SIZE] += 1


@njit(cache=True)
def sample_kernel(rng, size, m, out):
    """Draw ``min(m, size)`` distinct slots; all slots in order if size <= m."""
    if size <= m:
        for i in range(size):
            out[i] = i
        return size
    for i in range(m):
        while True:
            j = randbelow(rng, size)
            dup = False
            for k in range(i):
                if out[k] == j:
                    dup = True
                    break
            if not dup:
                break
        out[i] = j
    return m


@njit(cache=True)
def replay_round(rng, mem_i, mem_w, meta, idx, values, visits, snap, row_epoch, ctr, beta,
                 batch, snapshot_c, bound):
    n = sample_kernel(rng, meta[SIZE], batch, idx)
    for k in range(n):
        i = idx[k]
        y = mem_w[i]
        if mem_i[i, R_TERM] == 0:
            y += beta * target_max(values, snap, row_epoch, ctr, mem_i[i, R_S2], mem_i, i)
        apply_update(values, visits, snap, row_epoch, ctr, mem_i[i, R_S], mem_i[i, R_A], y,
                     snapshot_c, bound)


# ---------------------------------------------------------------------------
# Python API

def q_update(table: QTable, target: QTable, exp: Experience, beta: float) -> QTable:
    """One Q-learning update of ``table`` in place, bootstrapping from ``target``."""
    if exp.terminal:
        y = exp.w
    else:
        row = target.values[exp.s_next]
        if exp.next_mask is not None:
            row = row[np.asarray(exp.next_mask, dtype=bool)]
        y = exp.w + beta * (float(row.max()) if row.size else 0.0)
    alpha = learning_rate(table.visits[exp.s])
    table.values[exp.s, exp.a] = (1.0 - alpha) * table.values[exp.s, exp.a] + alpha * y
    table.visits[exp.s] += 1
    return table


def select_action(table: QTable, state: int, feasible, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Pick an action key from ``feasible`` (iterable of keys or a bool mask)."""
    mask = np.asarray(feasible)
    if mask.dtype != np.bool_:
        keys = mask.astype(np.int64).ravel()
        mask = np.zeros(table.n_actions, dtype=np.bool_)
        mask[keys] = True
    if not mask.any():
        raise ValueError("select_action needs at least one feasible action")
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    return int(select_kernel(table.values, int(state), mask, float(epsilon), rng))


class ReplayMemory:
    """Fixed-capacity ring buffer of experiences (one int64 record per slot)."""

    def __init__(self, capacity: int, n_actions: int):
        self.capacity = int(capacity)
        self.n_actions = int(n_actions)
        n_words = (n_actions + 63) // 64
        self.records = np.zeros((capacity, R_MASK + n_words), dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.meta = np.zeros(2, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.meta[SIZE])

    def push(self, exp: Experience) -> None:
        mask = (np.ones(self.n_actions, dtype=np.bool_) if exp.next_mask is None
                else np.asarray(exp.next_mask, dtype=np.bool_))
        push_kernel(self.records, self.rewards, self.meta, exp.s, exp.a, exp.w, exp.s_next,
                    exp.terminal, mask)

    def _mask(self, i: int) -> np.ndarray:
        words = self.records[i, R_MASK:].astype(np.uint64)
        bits = np.unpackbits(words.view(np.uint8), bitorder="little")
        return bits[: self.n_actions].astype(np.bool_)

    def sample(self, m: int, rng: np.random.Generator) -> list[Experience]:
        idx = np.zeros(max(m, 1), dtype=np.int64)
        n = sample_kernel(rng, len(self), m, idx)
        out = []
        for i in idx[:n]:
            r = self.records[i]
            out.append(Experience(int(r[R_S]), int(r[R_A]), float(self.rewards[i]),
                                  int(r[R_S2]), bool(r[R_TERM]), self._mask(i)))
        return out


class ReplayLearner:
    """Replay memory plus the target snapshot bookkeeping for one table."""

    def __init__(self, table: QTable, cfg: TrainConfig, w_max: float):
        self.table = table
        self.cfg = cfg
        self.memory = ReplayMemory(cfg.replay_capacity, table.n_actions)
        self.snap = np.zeros_like(table.values)
        self.row_epoch = np.full(table.n_states, -1, dtype=np.int64)
        self.ctr = np.zeros(2, dtype=np.int64)
        self.idx = np.zeros(cfg.batch_M, dtype=np.int64)
        self.bound = w_max / (1.0 - cfg.beta) * (1.0 + 1e-9) + 1e-12

    @property
    def updates(self) -> int:
        return int(self.ctr[UPDATES])

    def observe(self, exp: Experience, rng: np.random.Generator) -> None:
        self.memory.push(exp)
        m, t = self.memory, self.table
        replay_round(rng, m.records, m.rewards, m.meta, self.idx, t.values, t.visits,
                     self.snap, self.row_epoch, self.ctr, self.cfg.beta, self.cfg.batch_M,
                     self.cfg.snapshot_C, self.bound)

    def target_table(self) -> QTable:
        """Materialize the current snapshot."""
        vals = self.table.values.copy()
        rows = self.row_epoch == self.ctr[EPOCH]
        vals[rows] = self.snap[rows]
        return QTable(self.table.n_states, self.table.n_actions, vals, self.table.visits.copy())


@dataclass
class TrainLogRow:
    episode: int
    epsilon: float
    summary: EpisodeSummary


def train(env_factory: Callable, cfg: TrainConfig, w_max: float | None = None,
          table: QTable | None = None, compiled: bool = True) -> tuple[QTable, list[TrainLogRow]]:
    """Train a Q-table on environments produced by ``env_factory``.

    The environment must expose ``n_states``, ``n_actions``, ``reset(rng)``,
    ``state_key(state)``, ``action_mask()`` and ``step_key(a) -> (state, w, done)``.
    UAV uplink environments are dispatched to the compiled episode loop, which
    consumes the random streams in exactly the same order.
    """
    env = env_factory()
    from .environment import UavUplinkEnv
    if compiled and isinstance(env, UavUplinkEnv):
        from .engine import train_uav
        return train_uav(env, cfg, table=table)

    if w_max is None:
        w_max = float(getattr(env, "max_abs_reward", 1.0))
    table = table or QTable(env.n_states, env.n_actions)
    learner = ReplayLearner(table, cfg, w_max)
    agent_rng = stream(cfg.seed, AGENT_STREAM)
    log = []
    for ep in range(cfg.episodes):
        eps = cfg.epsilon(ep)
        state = env.reset(stream(cfg.seed, TRAIN_STREAM, ep))
        s = env.state_key(state)
        summary = EpisodeSummary()
        done = False
        while not done:
            a = int(select_kernel(table.values, s, env.action_mask(), eps, agent_rng))
            state, w, done = env.step_key(a)
            s2 = env.state_key(state)
            mask2 = env.action_mask() if not done else np.zeros(table.n_actions, dtype=np.bool_)
            learner.observe(Experience(s, a, float(w), s2, bool(done), mask2), agent_rng)
            summary.n_tti += 1
            summary.reward_sum += w
            s = s2
        log.append(TrainLogRow(ep, eps, summary))
    return table, log


def save_policy(table: QTable, path: str | Path, meta: dict | None = None) -> Path:
    """Write the table as magic line + JSON header line + little-endian arrays."""
    rows = table.visited_states().astype("<i8")
    payload = (rows.tobytes() + table.visits[rows].astype("<i8").tobytes()
               + table.values[rows].astype("<f8").tobytes())
    header = {
        "version": POLICY_VERSION,
        "n_states": table.n_states,
        "n_actions": table.n_actions,
        "n_rows": int(rows.size),
        "crc32": zlib.crc32(payload),
        "meta": meta if meta is not None else table.meta,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(POLICY_MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        fh.write(payload)
    return path


def load_policy(path: str | Path) -> QTable:
    blob = Path(path).read_bytes()
    if not blob.startswith(POLICY_MAGIC):
        raise PolicyFormatError(f"{path}: not a policy file")
    rest = blob[len(POLICY_MAGIC):]
    nl = rest.find(b"\n")
    if nl < 0:
        raise PolicyFormatError(f"{path}: truncated header")
    try:
        header = json.loads(rest[:nl])
    except json.JSONDecodeError as exc:
        raise PolicyFormatError(f"{path}: corrupt header") from exc
    if header.get("version") != POLICY_VERSION:
        raise PolicyFormatError(f"{path}: unsupported version {header.get('version')}")
    payload = rest[nl + 1:]
    n_s, n_a, k = header["n_states"], header["n_actions"], header["n_rows"]
    if len(payload) != 8 * (2 * k + k * n_a) or zlib.crc32(payload) != header["crc32"]:
        raise PolicyFormatError(f"{path}: corrupt payload")
    rows = np.frombuffer(payload, dtype="<i8", count=k)
    visits = np.frombuffer(payload, dtype="<i8", count=k, offset=8 * k)
    values = np.frombuffer(payload, dtype="<f8", count=k * n_a, offset=16 * k).reshape(k, n_a)
    if k and (rows.min() < 0 or rows.max() >= n_s):
        raise PolicyFormatError(f"{path}: row index out of range")
    table = QTable(n_s, n_a)
    table.values[rows] = values
    table.visits[rows] = visits
    table.meta = header.get("meta") or {}
    return table

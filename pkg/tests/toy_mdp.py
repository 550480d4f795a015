"""Small hand-built MDPs with a brute-force value-iteration oracle."""
from __future__ import annotations

import numpy as np


class ToyMDP:
    """Finite episodic MDP with per-state feasible actions.

    ``P[s, a, s']`` are transition probabilities, ``R[s, a]`` the mean
    reward and ``term[s, a]`` the probability that the episode ends after
    taking ``a`` in ``s``. Rewards get uniform noise of half-width ``noise``.
    """

    def __init__(self, P, R, term, feasible, noise=0.0, start=0):
        self.P = np.asarray(P, dtype=float)
        self.R = np.asarray(R, dtype=float)
        self.term = np.asarray(term, dtype=float)
        self.feasible = np.asarray(feasible, dtype=bool)
        self.noise = noise
        self.start = start
        self.n_states, self.n_actions = self.R.shape
        self.max_abs_reward = float(np.abs(self.R).max() + noise)
        self._s = start
        self._rng = None

    def reset(self, rng):
        self._rng = rng
        self._s = self.start if self.start is not None else int(rng.integers(self.n_states))
        return self._s

    def state_key(self, state):
        return int(state)

    def action_mask(self):
        return self.feasible[self._s].copy()

    def step_key(self, a):
        assert self.feasible[self._s, a]
        s, rng = self._s, self._rng
        w = self.R[s, a] + (rng.uniform(-self.noise, self.noise) if self.noise else 0.0)
        done = rng.random() < self.term[s, a]
        self._s = int(rng.choice(self.n_states, p=self.P[s, a]))
        return self._s, float(w), bool(done)


def value_iteration(mdp: ToyMDP, beta: float, tol: float = 1e-13) -> np.ndarray:
    """Optimal Q for the episodic MDP (termination zeroes the continuation)."""
    q = np.zeros((mdp.n_states, mdp.n_actions))
    while True:
        v = np.where(mdp.feasible, q, -np.inf).max(axis=1)
        cont = (1.0 - mdp.term) * (mdp.P @ v)
        q_new = np.where(mdp.feasible, mdp.R + beta * cont, 0.0)
        if np.max(np.abs(q_new - q)) < tol:
            return q_new
        q = q_new


def greedy(q: np.ndarray, feasible: np.ndarray) -> np.ndarray:
    """Greedy action per state with ties to the lowest key."""
    return np.array([int(np.flatnonzero(feasible[s])[np.argmax(q[s, feasible[s]])])
                     for s in range(q.shape[0])])


def random_mdp(seed: int, n_states: int = 8, n_actions: int = 4, term_p: float = 0.15):
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.full(n_states, 0.5), size=(n_states, n_actions))
    R = rng.uniform(-1.0, 1.0, size=(n_states, n_actions))
    term = np.full((n_states, n_actions), term_p)
    feasible = rng.random((n_states, n_actions)) < 0.8
    feasible[np.arange(n_states), rng.integers(0, n_actions, n_states)] = True
    return ToyMDP(P, R, term, feasible, start=None)


def min_gap(q: np.ndarray, feasible: np.ndarray) -> float:
    """Smallest best-vs-second-best Q gap over states with >1 feasible action."""
    gaps = []
    for s in range(q.shape[0]):
        vals = np.sort(q[s, feasible[s]])[::-1]
        if vals.size > 1:
            gaps.append(vals[0] - vals[1])
    return min(gaps) if gaps else np.inf


def two_state_chain() -> ToyMDP:
    """2 states x 2 actions, deterministic: 'stay' pays 0.2, 'move' pays 0 in s0 and 1 in s1."""
    P = np.zeros((2, 2, 2))
    P[0, 0, 0] = P[0, 1, 1] = 1.0
    P[1, 0, 1] = P[1, 1, 0] = 1.0
    R = np.array([[0.2, 0.0], [0.2, 1.0]])
    term = np.full((2, 2), 0.1)
    return ToyMDP(P, R, term, np.ones((2, 2), bool), start=0)

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronehrrm.agent import (
    Experience, PolicyFormatError, QTable, ReplayLearner, ReplayMemory, load_policy, q_update,
    save_policy, select_action, stream, train,
)
from dronehrrm.config import ScenarioConfig, TrainConfig
from dronehrrm.environment import UavUplinkEnv

from toy_mdp import greedy, min_gap, random_mdp, two_state_chain, value_iteration


# --- q_update ----------------------------------------------------------------

def test_first_visit_overwrites():
    t = QTable(3, 2)
    q_update(t, t.copy(), Experience(0, 1, 0.7, 1, True), beta=0.8)
    assert t[0, 1] == 0.7 and t.visits[0] == 1


def test_update_half_step():
    t = QTable(3, 2)
    t.values[0, 0] = 1.0
    t.visits[0] = 5
    q_update(t, t.copy(), Experience(0, 0, 1.0, 1, True), beta=0.8)
    assert t[0, 0] == pytest.approx(1.0)


def test_update_bootstrap():
    t = QTable(3, 2)
    target = t.copy()
    target.values[2] = [2.0, -1.0]
    q_update(t, target, Experience(0, 0, 1.0, 2, False), beta=0.8)
    assert t[0, 0] == pytest.approx(2.6)


def test_update_respects_next_mask():
    t = QTable(3, 2)
    target = t.copy()
    target.values[2] = [5.0, 2.0]
    q_update(t, target, Experience(0, 0, 1.0, 2, False, np.array([False, True])), beta=0.8)
    assert t[0, 0] == pytest.approx(2.6)


# --- select_action -------------------------------------------------------------

def test_select_uniform_when_eps_one():
    t = QTable(1, 6)
    t.values[0] = [9, 0, 0, 0, 0, 0]
    rng = np.random.default_rng(0)
    feas = [0, 2, 3, 5]
    n = 100_000
    counts = np.bincount([select_action(t, 0, feas, 1.0, rng) for _ in range(n)], minlength=6)
    assert counts[[1, 4]].sum() == 0
    assert np.allclose(counts[feas] / n, 0.25, atol=0.02 * 0.25)


def test_select_single_feasible():
    t = QTable(1, 4)
    assert select_action(t, 0, [2], 0.0, np.random.default_rng(0)) == 2


def test_select_tie_goes_to_lower_key():
    t = QTable(1, 4)
    t.values[0] = [0.0, 0.5, 0.5, 0.1]
    assert select_action(t, 0, [1, 2, 3], 0.0, np.random.default_rng(0)) == 1
    assert select_action(t, 0, [2, 1], 0.0, np.random.default_rng(0)) == 1


def test_select_rejects_empty_and_bad_eps():
    t = QTable(1, 3)
    with pytest.raises(ValueError):
        select_action(t, 0, [], 0.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        select_action(t, 0, [0], 1.5, np.random.default_rng(0))


@settings(max_examples=100, deadline=None)
@given(vals=st.lists(st.floats(-5, 5), min_size=5, max_size=5),
       mask=st.lists(st.booleans(), min_size=5, max_size=5).filter(any),
       s1=st.integers(0, 99), s2=st.integers(0, 99))
def test_prop_greedy_is_pure(vals, mask, s1, s2):
    t = QTable(1, 5)
    t.values[0] = vals
    m = np.array(mask)
    a = select_action(t, 0, m, 0.0, np.random.default_rng(s1))
    assert a == select_action(t, 0, m, 0.0, np.random.default_rng(s2))
    assert m[a] and t[0, a] == max(v for v, ok in zip(vals, mask) if ok)


# --- replay memory / learner -----------------------------------------------------

def test_replay_ring_and_sampling():
    mem = ReplayMemory(4, 70)  # two mask words
    mask = np.zeros(70, bool)
    mask[[0, 63, 64, 69]] = True
    for i in range(6):
        mem.push(Experience(i, i % 3, float(i), i + 1, i == 5, mask))
    assert len(mem) == 4
    got = mem.sample(4, np.random.default_rng(0))
    assert sorted(e.s for e in got) == [2, 3, 4, 5]  # oldest two overwritten
    for e in got:
        assert np.array_equal(e.next_mask, mask)
        assert e.w == float(e.s) and e.terminal == (e.s == 5)
    sub = mem.sample(3, np.random.default_rng(1))
    assert len({e.s for e in sub}) == 3  # without replacement


def test_snapshot_refresh_every_C_updates():
    cfg = TrainConfig(batch_M=1, snapshot_C=3, replay_capacity=10)
    table = QTable(2, 1)
    lr = ReplayLearner(table, cfg, w_max=1.0)
    rng = np.random.default_rng(0)
    for _ in range(2):
        lr.memory.meta[:] = 0
        lr.observe(Experience(0, 0, 1.0, 0, False, np.ones(1, bool)), rng)
    # two updates, no refresh yet: snapshot still sees the initial zeros
    assert lr.target_table()[0, 0] == 0.0
    lr.memory.meta[:] = 0
    lr.observe(Experience(0, 0, 1.0, 0, False, np.ones(1, bool)), rng)
    assert lr.target_table()[0, 0] == table[0, 0]
    assert table.visits.sum() == lr.updates == 3


def test_bound_violation_raises():
    cfg = TrainConfig(batch_M=1, replay_capacity=4, beta=0.5)
    lr = ReplayLearner(QTable(1, 1), cfg, w_max=1.0)  # |Q| <= 2
    with pytest.raises(FloatingPointError):
        lr.observe(Experience(0, 0, 3.0, 0, True, np.ones(1, bool)), np.random.default_rng(0))


def test_visits_sum_equals_updates():
    mdp = random_mdp(3)
    cfg = TrainConfig(episodes=1, batch_M=4, replay_capacity=100, seed=1)
    lr = ReplayLearner(QTable(mdp.n_states, mdp.n_actions), cfg, mdp.max_abs_reward)
    rng = np.random.default_rng(0)
    s = mdp.reset(rng)
    for _ in range(300):
        a = int(np.flatnonzero(mdp.action_mask())[0])
        s2, w, done = mdp.step_key(a)
        lr.observe(Experience(s, a, w, s2, done, mdp.action_mask()), rng)
        s = mdp.reset(rng) if done else s2
    assert lr.table.visits.sum() == lr.updates
    assert np.all(np.abs(lr.table.values) <= mdp.max_abs_reward / (1 - cfg.beta))


# --- training against oracles -------------------------------------------------------

def test_two_state_chain_matches_value_iteration():
    mdp = two_state_chain()
    cfg = TrainConfig(episodes=400, batch_M=8, replay_capacity=5000, behavior="random", seed=0)
    table, log = train(lambda: mdp, cfg)
    oracle = value_iteration(mdp, cfg.beta)
    assert np.array_equal(greedy(table.values, mdp.feasible), greedy(oracle, mdp.feasible))
    assert len(log) == 400


def test_myopic_limit_matches_mean_reward():
    mdp = random_mdp(7, n_states=4, n_actions=3)
    mdp.noise = 0.05
    mdp.R = np.abs(mdp.R) + 0.5  # keep means away from 0 for a relative check
    mdp.max_abs_reward = float(mdp.R.max() + mdp.noise)
    sums = np.zeros_like(mdp.R)
    counts = np.zeros_like(mdp.R)
    step = mdp.step_key

    def logged(a):
        s = mdp._s
        out = step(a)
        sums[s, a] += out[1]
        counts[s, a] += 1
        return out

    mdp.step_key = logged
    cfg = TrainConfig(episodes=1500, batch_M=8, replay_capacity=50_000, behavior="random",
                      beta=0.0, seed=3)
    table, _ = train(lambda: mdp, cfg)
    f = mdp.feasible
    assert counts.sum() < cfg.replay_capacity  # every experience stays in memory
    assert np.allclose(table.values[f], sums[f] / counts[f], rtol=0.01)


def test_training_is_deterministic():
    mdp = random_mdp(2)
    cfg = TrainConfig(episodes=50, batch_M=4, replay_capacity=500, seed=9)
    t1, _ = train(lambda: mdp, cfg)
    t2, _ = train(lambda: mdp, cfg)
    assert np.array_equal(t1.values, t2.values) and np.array_equal(t1.visits, t2.visits)


def test_generic_loop_matches_compiled_loop():
    cfg = ScenarioConfig().with_value("drone.speed", 60.0)
    tc = replace(cfg.train, episodes=2, batch_M=4, replay_capacity=3000, seed=5)
    fast, log_fast = train(lambda: UavUplinkEnv(cfg), tc, compiled=True)
    slow, log_slow = train(lambda: UavUplinkEnv(cfg), tc, compiled=False)
    assert np.array_equal(fast.values, slow.values)
    assert np.array_equal(fast.visits, slow.visits)
    assert [r.summary.n_tti for r in log_fast] == [r.summary.n_tti for r in log_slow]
    assert log_fast[0].summary.reward_sum == pytest.approx(log_slow[0].summary.reward_sum)


def test_streams_independent():
    a = stream(0, 1, 2).random(4)
    assert np.array_equal(a, stream(0, 1, 2).random(4))
    assert not np.array_equal(a, stream(0, 1, 3).random(4))
    assert not np.array_equal(a, stream(1, 1, 2).random(4))


def test_epsilon_schedule():
    tc = TrainConfig()
    assert tc.epsilon(0) == 1.0
    assert tc.epsilon(1) == pytest.approx(0.995)
    assert tc.epsilon(10_000) == tc.epsilon_floor
    assert replace(tc, behavior="random").epsilon(500) == 1.0


# --- policy persistence ---------------------------------------------------------------

def test_policy_roundtrip(tmp_path):
    t = QTable(10, 3)
    t.values[[1, 7]] = [[0.1, -2.0, 3.0], [0.0, 0.0, 1e-300]]
    t.visits[[1, 7, 8]] = [4, 9, 2]
    back = load_policy(save_policy(t, tmp_path / "p.qtable", meta={"k": 1}))
    assert np.array_equal(back.values, t.values) and np.array_equal(back.visits, t.visits)
    assert back.meta == {"k": 1}


def test_empty_policy_roundtrip(tmp_path):
    t = QTable(5, 2)
    back = load_policy(save_policy(t, tmp_path / "e.qtable"))
    assert back.n_states == 5 and back.n_actions == 2 and not back.values.any()


def test_large_policy_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(0)
    t = QTable(20_000, 49)
    rows = rng.choice(20_000, 2041, replace=False)  # 2041 * 49 ~ 1e5 entries
    t.values[rows] = rng.normal(size=(rows.size, 49))
    t.visits[rows] = rng.integers(1, 1000, rows.size)
    back = load_policy(save_policy(t, tmp_path / "big.qtable"))
    assert back.values.tobytes() == t.values.tobytes()
    assert np.array_equal(back.visits, t.visits)


def test_corrupt_and_version_errors(tmp_path):
    t = QTable(4, 2)
    t.values[1, 1] = 1.5
    t.visits[1] = 1
    p = save_policy(t, tmp_path / "c.qtable")
    blob = bytearray(p.read_bytes())
    blob[-3] ^= 0xFF
    bad = tmp_path / "bad.qtable"
    bad.write_bytes(bytes(blob))
    with pytest.raises(PolicyFormatError):
        load_policy(bad)
    v2 = tmp_path / "v2.qtable"
    v2.write_bytes(p.read_bytes().replace(b'"version": 1', b'"version": 2'))
    with pytest.raises(PolicyFormatError):
        load_policy(v2)
    junk = tmp_path / "junk.qtable"
    junk.write_bytes(b"hello")
    with pytest.raises(PolicyFormatError):
        load_policy(junk)

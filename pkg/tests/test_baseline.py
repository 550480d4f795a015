import numpy as np
import pytest

from dronehrrm import engine
from dronehrrm.baseline import BaselineState, baseline_action
from dronehrrm.config import ScenarioConfig
from dronehrrm.environment import Action, ActionSpace, UavUplinkEnv, power_levels

SPACE = ActionSpace(3, 4, power_levels(0.2, 4))


def act(rss, free=(4, 4, 4), serving=0, timer=0, frame=True):
    return baseline_action(BaselineState(serving, timer), rss, free, SPACE, 7.0, frame)


def test_below_margin_stays():
    assert act([-70.0, -64.0, -90.0]) == Action(0, 4, 0)


def test_above_margin_hands_over():
    assert act([-70.0, -62.9, -90.0]) == Action(1, 4, 0)


def test_equal_rss_stays():
    assert act([-70.0, -70.0, -70.0]).target_bs == 0


def test_timer_or_frame_blocks_handover():
    assert act([-90.0, -60.0, -90.0], timer=4).target_bs == 0
    assert act([-90.0, -60.0, -90.0], frame=False).target_bs == 0


def test_target_without_free_rrb_is_skipped():
    assert act([-90.0, -60.0, -95.0], free=(2, 0, 4)) == Action(0, 2, 0)


def test_uses_every_free_rrb_at_pmax():
    a = act([-80.0, -85.0, -90.0], free=(3, 1, 0))
    assert a == Action(0, 3, 0) and SPACE.power_w(a) == 0.2


def test_no_free_rrb_means_no_transmit():
    assert act([-80.0, -85.0, -90.0], free=(0, 1, 1), timer=3).is_no_transmit


def test_rss_vector_length_checked():
    with pytest.raises(ValueError):
        act([-70.0, -60.0])


def test_baseline_trace_invariants():
    cfg = ScenarioConfig()
    env = UavUplinkEnv(cfg)
    summaries, traces = engine.evaluate(env, 2, seed=3, scheme="baseline", trace=True)
    for tr in traces:
        ho = [r.tti for r in tr if r.handover]
        assert all(b - a >= cfg.radio.min_ho_interval_ttis for a, b in zip(ho, ho[1:]))
        for r in tr:
            if r.rrbs_used:
                assert r.tx_power_w == cfg.radio.p_max_w
    assert all(s.handovers > 0 for s in summaries)


def test_compiled_baseline_matches_python_policy():
    """The fused loop's baseline equals baseline_action driven through the Python env."""
    cfg = ScenarioConfig().with_value("drone.speed", 60.0)
    env = UavUplinkEnv(cfg)
    (fast,), (trace,) = engine.evaluate(env, 1, seed=4, scheme="baseline", trace=True)
    from dronehrrm.agent import EVAL_STREAM, stream
    env.reset(stream(4, EVAL_STREAM, 0))
    done, i = False, 0
    while not done:
        a = baseline_action(BaselineState(int(env.st[1]), env.ho_timer), env.rss_dbm(),
                            env.occupancy, env.space, cfg.radio.baseline_margin_db,
                            env.tti % cfg.channel.frame_ttis == 0)
        _, _, done = env.step(a)
        assert env.last_record == trace[i]
        i += 1
    assert i == fast.n_tti

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronehrrm.a2g_channel import ChannelRealization
from dronehrrm.link_layer import (
    Allocation, LinkBudget, _effective_snr, dbm_to_mw, interference_to_bs, mw_to_dbm,
    noise_per_subcarrier_w, total_interference_mw, uplink_rate,
)


def chan(gains, large_db=0.0):
    return ChannelRealization(True, large_db, 0.0, np.asarray(gains, dtype=float))


def test_noise_per_subcarrier():
    # -174 dBm/Hz over 15 kHz
    want_dbm = -174 + 10 * math.log10(15e3)
    assert noise_per_subcarrier_w() == pytest.approx(10 ** (want_dbm / 10) * 1e-3, rel=1e-12)


def test_zero_power_zero_rate():
    alloc = Allocation(0, 1, 0.0)
    assert uplink_rate(alloc, chan(np.ones(12)), LinkBudget()) == 0.0


def test_homogeneous_180kbps():
    # 12 subcarriers with alpha_s = alpha and P*alpha = 12 -> gamma = 1
    budget = LinkBudget(noise_n0=1.0)
    alloc = Allocation(0, 1, 12.0)
    r = uplink_rate(alloc, chan(np.ones(12)), budget)
    assert r == pytest.approx(180_000.0, rel=1e-12)


def test_weak_subcarrier_dominates():
    g = np.ones(12)
    g[3] = 1e-300
    r = uplink_rate(Allocation(0, 1, 0.2), chan(g, 80.0), LinkBudget())
    assert r < 1e-200
    g[3] = 0.0
    assert uplink_rate(Allocation(0, 1, 0.2), chan(g, 80.0), LinkBudget()) == 0.0


def test_gain_count_must_match_allocation():
    with pytest.raises(ValueError):
        uplink_rate(Allocation(0, 2, 0.2), chan(np.ones(12)), LinkBudget())


def test_interference_examples():
    assert interference_to_bs(23.0, 78.02) == pytest.approx(-55.02)
    assert interference_to_bs(0.0, 0.0) == 0.0
    assert interference_to_bs(10.0, 70.0, 3.0, 3.0) - interference_to_bs(10.0, 70.0) == \
        pytest.approx(6.0)


def test_total_interference_examples():
    assert total_interference_mw([-55.02]) == pytest.approx(3.148e-6, rel=1e-3)
    assert total_interference_mw([]) == 0.0
    assert total_interference_mw([-60.0, -60.0]) == pytest.approx(2e-6, rel=1e-12)


def oracle_gamma(p, gains, g, n0, ws, is_):
    alphas = [x * g / (n0 + ws * is_) for x in gains]
    return p / sum(1.0 / a for a in alphas)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1e-4, 1.0), gains=st.lists(st.floats(1e-3, 20.0), min_size=1, max_size=48),
       large=st.floats(40.0, 140.0))
def test_prop_snr_matches_bruteforce(p, gains, large):
    g = 10 ** (-large / 10)
    n0 = noise_per_subcarrier_w()
    got = _effective_snr(p, np.array(gains), g, n0, 15e3, 0.0)
    assert got == pytest.approx(oracle_gamma(p, gains, g, n0, 15e3, 0.0), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(p=st.floats(1e-4, 0.2), dp=st.floats(0.0, 0.2),
       gains=st.lists(st.floats(1e-3, 20.0), min_size=12, max_size=12),
       i=st.integers(0, 11), dg=st.floats(0.0, 5.0))
def test_prop_rate_monotone(p, dp, gains, i, dg):
    b = LinkBudget()
    base = uplink_rate(Allocation(0, 1, p), chan(gains, 90.0), b)
    assert uplink_rate(Allocation(0, 1, p + dp), chan(gains, 90.0), b) >= base
    g2 = list(gains)
    g2[i] += dg
    assert uplink_rate(Allocation(0, 1, p), chan(g2, 90.0), b) >= base * (1 - 1e-12)


@settings(max_examples=200, deadline=None)
@given(dbm=st.lists(st.floats(-150.0, 30.0), max_size=5))
def test_prop_db_linear_roundtrip(dbm):
    for v in dbm:
        assert float(mw_to_dbm(dbm_to_mw(v))) == pytest.approx(v, rel=1e-9, abs=1e-9)
    tot = total_interference_mw(dbm)
    if dbm:
        assert float(dbm_to_mw(mw_to_dbm(tot))) == pytest.approx(tot, rel=1e-9)

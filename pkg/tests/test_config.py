import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronehrrm.config import ConfigError, ScenarioConfig, load_config, parse_text


def test_defaults():
    c = ScenarioConfig()
    assert c.topology.bs_positions[0] == (50.0, 100.0)
    assert c.weights.alpha_h == 0.5 and c.train.beta == 0.8
    assert c.episodes == 850 and c.drone.speed == 15.0


def test_to_lines_roundtrip():
    c = ScenarioConfig().with_value("weights.alpha_h", 0.25).with_value("drone.altitude", 250)
    assert parse_text("\n".join(c.to_lines())) == c
    assert c.drone.altitude == 250.0 and isinstance(c.drone.altitude, float)


def test_comments_and_blank_lines():
    c = parse_text("# hi\n\nseed = 7\ntrain.behavior = 'random'\n")
    assert c.seed == 7 and c.train.behavior == "random"


@pytest.mark.parametrize("text", [
    "nosuch = 1", "weights.alpha_x = 1", "bogus.alpha_h = 1", "a.b.c = 1",
    "seed = 1\nseed = 2", "seed", "seed = [", "seed = 1.5", "weights.alpha_h = 'x'",
    "weights.alpha_h = -1", "drone.altitude = 10", "train.beta = 1.0",
    "topology.bs_positions = ((600.0, 0.0), (1.0, 1.0))", "weights = 1",
])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.cfg")
    assert load_config(None) == ScenarioConfig()


@settings(max_examples=50, deadline=None)
@given(h=st.floats(0.0, 5.0), seed=st.integers(0, 2**31), speed=st.floats(0.1, 100.0))
def test_prop_roundtrip(h, seed, speed):
    c = ScenarioConfig().with_value("weights.alpha_h", h).with_value("seed", seed) \
        .with_value("drone.speed", speed)
    assert parse_text("\n".join(c.to_lines())) == c

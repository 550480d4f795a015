"""Scenario configuration.

The on-disk format is flat ``section.key = value`` text. Values are Python
literals (numbers, quoted strings, lists/tuples). Lines starting with ``#``
are comments. Unknown sections or keys are rejected.

Defaults follow the evaluation setup: a 500 x 500 m area, three BSs at
25 m, 2 GHz carrier, 4 RRBs of 180 kHz, a drone at 50 m flying at 15 m/s.
"""
from __future__ import annotations

import ast
import dataclasses
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised for malformed, unknown, or out-of-range configuration."""


@dataclass(frozen=True)
class TopologyConfig:
    bs_positions: tuple = ((50.0, 100.0), (200.0, 400.0), (450.0, 50.0))
    bs_height: float = 25.0
    fc_ghz: float = 2.0
    rrbs_total: int = 4
    area: tuple = (500.0, 500.0)


@dataclass(frozen=True)
class ChannelConfig:
    gtx_db: float = 0.0
    grx_db: float = 0.0
    noise_dbm_per_hz: float = -174.0
    noise_figure_db: float = 0.0
    ext_interference_w_per_hz: float = 0.0
    subcarriers_per_rrb: int = 12
    subcarrier_bw_hz: float = 15e3
    tti_s: float = 1e-3
    frame_ttis: int = 10


@dataclass(frozen=True)
class TrafficConfig:
    """Uplink traffic at the drone. Sizes in bits, ``lambda0`` in packets/s."""

    lambda0: float = 0.3
    packet_size: int = 2000
    ho_packet_size: int = 1000
    ho_packet_count: int = 4
    ho_window_Th: int = 10
    q_max: int = 200_000


@dataclass(frozen=True)
class RadioConfig:
    p_max_w: float = 0.2
    power_levels: int = 4
    circuit_power_w: float = 0.05  # listed with the setup; no KPI consumes it
    min_ho_interval_ttis: int = 10
    baseline_margin_db: float = 7.0


@dataclass(frozen=True)
class QuantizerConfig:
    pl_min_db: float = 60.0
    pl_max_db: float = 130.0
    pl_step_db: float = 5.0
    # queue bin edges in packets: {0}, (0, 2], (2, 10], > 10
    q_edges_packets: tuple = (2, 10)
    altitudes: tuple = (50.0, 250.0)
    speeds: tuple = (15.0, 60.0)


@dataclass(frozen=True)
class RewardWeights:
    alpha_s: float = 0.01
    alpha_d: float = 0.5
    alpha_f: float = 0.5
    alpha_h: float = 0.5

    @property
    def max_abs_reward(self) -> float:
        return self.alpha_s + self.alpha_d + self.alpha_f + self.alpha_h


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 0.8
    batch_M: int = 32
    snapshot_C: int = 100
    replay_capacity: int = 50_000
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.05
    epsilon_decay: float = 0.995
    behavior: str = "epsilon"  # or "random"
    episodes: int = 5000
    seed: int = 0

    def epsilon(self, episode: int) -> float:
        if self.behavior == "random":
            return 1.0
        eps = self.epsilon_start * self.epsilon_decay ** episode
        return min(1.0, max(self.epsilon_floor, eps))


@dataclass(frozen=True)
class DroneConfig:
    altitude: float = 50.0
    speed: float = 15.0


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    channel: ChannelConfig = field(default_factory=ChannelConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    quantizer: QuantizerConfig = field(default_factory=QuantizerConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    train: TrainConfig = field(default_factory=TrainConfig)
    drone: DroneConfig = field(default_factory=DroneConfig)
    episodes: int = 850
    eval_epsilon: float = 0.0
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        validate(self)

    def with_value(self, dotted: str, value: Any) -> "ScenarioConfig":
        """Return a copy with one ``section.key`` (or top-level key) replaced."""
        return apply_overrides(self, {dotted: value})

    def to_lines(self) -> list[str]:
        """Resolved config as ``key = value`` lines (round-trips via ``parse_text``)."""
        out = []
        for f in fields(self):
            val = getattr(self, f.name)
            if dataclasses.is_dataclass(val):
                for sf in fields(val):
                    out.append(f"{f.name}.{sf.name} = {_fmt(getattr(val, sf.name))}")
            else:
                out.append(f"{f.name} = {_fmt(val)}")
        return out


_SECTIONS = {f.name: f for f in fields(ScenarioConfig)}


def _fmt(val) -> str:
    if isinstance(val, float):
        return repr(val)
    if isinstance(val, tuple):
        return "(" + ", ".join(_fmt(v) for v in val) + ("," if len(val) == 1 else "") + ")"
    return repr(val)


def _coerce(template, value, key: str):
    if isinstance(template, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected bool, got {value!r}")
        return value
    if isinstance(template, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{key}: expected integer, got {value!r}")
        return int(value)
    if isinstance(template, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected number, got {value!r}")
        return float(value)
    if isinstance(template, str):
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected string, got {value!r}")
        return value
    if isinstance(template, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a sequence, got {value!r}")
        return _deep_tuple(value)
    raise ConfigError(f"{key}: unsupported type")


def _deep_tuple(value):
    if isinstance(value, (list, tuple)):
        return tuple(_deep_tuple(v) for v in value)
    if isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def apply_overrides(cfg: ScenarioConfig, overrides: dict[str, Any]) -> ScenarioConfig:
    sections: dict[str, dict[str, Any]] = {}
    top: dict[str, Any] = {}
    for key, value in overrides.items():
        parts = key.split(".")
        if len(parts) == 1:
            name = parts[0]
            if name not in _SECTIONS or dataclasses.is_dataclass(getattr(cfg, name)):
                raise ConfigError(f"unknown key {key!r}")
            top[name] = _coerce(getattr(cfg, name), value, key)
        elif len(parts) == 2:
            sec, name = parts
            if sec not in _SECTIONS or not dataclasses.is_dataclass(getattr(cfg, sec)):
                raise ConfigError(f"unknown section {sec!r}")
            sub = getattr(cfg, sec)
            if name not in {f.name for f in fields(sub)}:
                raise ConfigError(f"unknown key {key!r}")
            sections.setdefault(sec, {})[name] = _coerce(getattr(sub, name), value, key)
        else:
            raise ConfigError(f"bad key {key!r}")
    for sec, vals in sections.items():
        top[sec] = replace(getattr(cfg, sec), **vals)
    return replace(cfg, **top)


def parse_text(text: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    overrides: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        try:
            value = ast.literal_eval(val.strip())
        except (ValueError, SyntaxError) as exc:
            raise ConfigError(f"line {lineno}: cannot parse value {val.strip()!r}") from exc
        if key in overrides:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        overrides[key] = value
    return apply_overrides(base or ScenarioConfig(), overrides)


def load_config(path: str | Path | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_text(text)


def validate(cfg: ScenarioConfig) -> None:
    t = cfg.topology
    if len(t.bs_positions) < 2:
        raise ConfigError("topology.bs_positions: need at least two BSs")
    w, h = t.area
    if w <= 0 or h <= 0:
        raise ConfigError("topology.area must be positive")
    for pos in t.bs_positions:
        if len(pos) != 2 or not (0 <= pos[0] <= w and 0 <= pos[1] <= h):
            raise ConfigError(f"topology.bs_positions: {pos} outside the service area")
    if t.fc_ghz <= 0 or t.rrbs_total < 1 or t.bs_height <= 0:
        raise ConfigError("topology: fc_ghz, rrbs_total and bs_height must be positive")

    d = cfg.drone
    if not (22.5 < d.altitude <= 300.0):
        raise ConfigError("drone.altitude must lie in (22.5, 300] m")
    if d.speed <= 0:
        raise ConfigError("drone.speed must be positive")

    tr = cfg.traffic
    if tr.lambda0 < 0:
        raise ConfigError("traffic.lambda0 must be nonnegative")
    for name in ("packet_size", "ho_packet_size", "ho_packet_count", "ho_window_Th", "q_max"):
        if getattr(tr, name) <= 0:
            raise ConfigError(f"traffic.{name} must be positive")

    ch = cfg.channel
    if ch.subcarriers_per_rrb < 1 or ch.subcarrier_bw_hz <= 0 or ch.tti_s <= 0 or ch.frame_ttis < 1:
        raise ConfigError("channel: grid parameters must be positive")
    if ch.ext_interference_w_per_hz < 0:
        raise ConfigError("channel.ext_interference_w_per_hz must be nonnegative")

    r = cfg.radio
    if r.p_max_w <= 0 or r.power_levels < 1 or r.min_ho_interval_ttis < 0:
        raise ConfigError("radio: p_max_w and power_levels must be positive")

    q = cfg.quantizer
    if q.pl_step_db <= 0 or q.pl_max_db <= q.pl_min_db:
        raise ConfigError("quantizer: bad path-loss range")
    if len(q.q_edges_packets) != 2 or not (0 < q.q_edges_packets[0] < q.q_edges_packets[1]):
        raise ConfigError("quantizer.q_edges_packets must be two increasing positive values")
    if not q.altitudes or not q.speeds:
        raise ConfigError("quantizer: altitudes and speeds must be nonempty")

    wts = cfg.weights
    for name in ("alpha_s", "alpha_d", "alpha_f", "alpha_h"):
        if getattr(wts, name) < 0:
            raise ConfigError(f"weights.{name} must be nonnegative")

    tc = cfg.train
    if not (0.0 <= tc.beta < 1.0):
        raise ConfigError("train.beta must lie in [0, 1)")
    if tc.batch_M < 1 or tc.snapshot_C < 1 or tc.replay_capacity < 1 or tc.episodes < 0:
        raise ConfigError("train: batch_M, snapshot_C, replay_capacity must be >= 1")
    for name in ("epsilon_start", "epsilon_floor"):
        if not (0.0 <= getattr(tc, name) <= 1.0):
            raise ConfigError(f"train.{name} must lie in [0, 1]")
    if not (0.0 < tc.epsilon_decay <= 1.0):
        raise ConfigError("train.epsilon_decay must lie in (0, 1]")
    if tc.behavior not in ("epsilon", "random"):
        raise ConfigError("train.behavior must be 'epsilon' or 'random'")

    if cfg.episodes < 1:
        raise ConfigError("episodes must be >= 1")
    if not (0.0 <= cfg.eval_epsilon <= 1.0):
        raise ConfigError("eval_epsilon must lie in [0, 1]")

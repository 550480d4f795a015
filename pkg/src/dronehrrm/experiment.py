"""Experiment helpers shared by the command line and the acceptance suite.

Every run is fully determined by a :class:`ScenarioConfig`; the scenario
seed drives training (``train.seed`` is overwritten with it) and the
evaluation streams.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

from . import engine
from .agent import QTable, TrainLogRow
from .config import ScenarioConfig
from .environment import UavUplinkEnv
from .kpi import EpisodeSummary, KpiSummary, TtiRecord, aggregate, normalize_to_max

SCHEMES = ("learned", "baseline")


def make_env(cfg: ScenarioConfig) -> UavUplinkEnv:
    return UavUplinkEnv(cfg)


def train_policy(cfg: ScenarioConfig, episodes: int | None = None,
                 progress: Callable | None = None) -> tuple[QTable, list[TrainLogRow]]:
    """Train a Q-table under ``cfg``; ``episodes`` overrides ``train.episodes``."""
    tc = replace(cfg.train, seed=cfg.seed,
                 episodes=cfg.train.episodes if episodes is None else int(episodes))
    table, log = engine.train_uav(make_env(cfg), tc, progress=progress)
    table.meta = {"seed": cfg.seed, "episodes": tc.episodes, "config": cfg.to_lines()}
    return table, log


@dataclass
class EvalResult:
    scheme: str
    episodes: list[EpisodeSummary]
    traces: list[list[TtiRecord]] | None = None

    @property
    def kpis(self) -> KpiSummary:
        return aggregate(self.episodes)


def evaluate(cfg: ScenarioConfig, scheme: str = "learned", table: QTable | None = None,
             episodes: int | None = None, trace: bool = False) -> EvalResult:
    """Evaluate the learned policy or the RSS baseline on the evaluation streams."""
    n = cfg.episodes if episodes is None else int(episodes)
    summaries, traces = engine.evaluate(make_env(cfg), n, cfg.seed, table=table, scheme=scheme,
                                        eps=cfg.eval_epsilon, trace=trace)
    return EvalResult(scheme, summaries, traces)


def parse_sweep(spec: str) -> tuple[str, list]:
    """``"weights.alpha_h=0,0.25,0.5"`` -> ("weights.alpha_h", [0.0, 0.25, 0.5])."""
    import ast

    if "=" not in spec:
        raise ValueError(f"sweep spec {spec!r} must look like name=v1,v2,...")
    name, rhs = spec.split("=", 1)
    name = name.strip()
    vals = []
    for tok in rhs.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            vals.append(ast.literal_eval(tok))
        except (ValueError, SyntaxError) as exc:
            raise ValueError(f"bad sweep value {tok!r}") from exc
    if not name or not vals:
        raise ValueError(f"sweep spec {spec!r} has no name or no values")
    return name, vals


@dataclass
class SweepPoint:
    name: str
    value: object
    kpis: KpiSummary


SWEEP_KPIS = ("handovers", "interference_mw", "delay_s", "rrbs")


def sweep(cfg: ScenarioConfig, name: str, values: Sequence, train_episodes: int | None = None,
          eval_episodes: int | None = None, progress: Callable | None = None) -> list[SweepPoint]:
    """Train and evaluate one policy per sweep value."""
    points = []
    for v in values:
        point_cfg = cfg.with_value(name, v)
        table, _ = train_policy(point_cfg, train_episodes)
        res = evaluate(point_cfg, "learned", table, eval_episodes)
        points.append(SweepPoint(name, v, res.kpis))
        if progress is not None:
            progress(points[-1])
    return points


def sweep_table(points: Sequence[SweepPoint]) -> tuple[list[str], list[list]]:
    """Columns and rows of the sweep summary, raw KPIs plus max-normalized copies."""
    cols = ["parameter", "value"] + list(SWEEP_KPIS) + [f"{k}_norm" for k in SWEEP_KPIS]
    norm = {k: normalize_to_max([getattr(p.kpis, k) for p in points]) for k in SWEEP_KPIS}
    rows = []
    for i, p in enumerate(points):
        rows.append([p.name, p.value] + [getattr(p.kpis, k) for k in SWEEP_KPIS]
                    + [norm[k][i] for k in SWEEP_KPIS])
    return cols, rows

"""KPI traces, aggregation, handover heatmaps and CSV output."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:
    from .environment import RewardBreakdown


@dataclass(frozen=True)
class TtiRecord:
    tti: int
    position: tuple
    serving_bs: int
    handover: bool
    q_bits: int
    rate_bps: float
    interference_mw: float
    rrbs_used: int
    reward: "RewardBreakdown"
    tx_power_w: float = 0.0
    q_before_bits: int = 0


@dataclass
class EpisodeSummary:
    """Per-episode totals; ``means`` below divide these by the right counts."""

    n_tti: int = 0
    handovers: int = 0
    interference_mw_sum: float = 0.0
    rrbs_sum: float = 0.0
    delay_s_sum: float = 0.0
    delay_n: int = 0
    starved_ttis: int = 0
    reward_sum: float = 0.0
    dropped_bits: int = 0
    arrived_bits: int = 0
    served_bits: int = 0
    final_q_bits: int = 0
    max_tx_power_w: float = 0.0
    power_violations: int = 0
    spacing_violations: int = 0
    serving_violations: int = 0
    handover_xy: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    @property
    def mean_interference_mw(self) -> float:
        return self.interference_mw_sum / self.n_tti if self.n_tti else 0.0

    @property
    def mean_delay_s(self) -> float:
        return self.delay_s_sum / self.delay_n if self.delay_n else 0.0

    @property
    def mean_rrbs(self) -> float:
        return self.rrbs_sum / self.n_tti if self.n_tti else 0.0

    @property
    def mean_reward(self) -> float:
        return self.reward_sum / self.n_tti if self.n_tti else 0.0


def summarize_trace(records: Sequence[TtiRecord], p_max_w: float = 0.2,
                    min_spacing: int = 10) -> EpisodeSummary:
    """Build an :class:`EpisodeSummary` from per-TTI records."""
    s = EpisodeSummary()
    last_ho = None
    ho_xy = []
    for rec in records:
        s.n_tti += 1
        s.interference_mw_sum += rec.interference_mw
        s.rrbs_sum += rec.rrbs_used
        s.reward_sum += rec.reward.total
        s.max_tx_power_w = max(s.max_tx_power_w, rec.tx_power_w)
        if rec.tx_power_w > p_max_w * (1 + 1e-12):
            s.power_violations += 1
        if rec.rrbs_used > 0:
            if rec.rate_bps > 0:
                s.delay_s_sum += rec.q_before_bits / rec.rate_bps
                s.delay_n += 1
            elif rec.q_before_bits > 0:
                s.starved_ttis += 1
        if rec.handover:
            s.handovers += 1
            ho_xy.append(rec.position)
            if last_ho is not None and rec.tti - last_ho < min_spacing:
                s.spacing_violations += 1
            last_ho = rec.tti
    if records:
        s.final_q_bits = records[-1].q_bits
    s.handover_xy = np.asarray(ho_xy, dtype=float).reshape(-1, 2)
    return s


KPI_NAMES = ("handovers", "interference_mw", "delay_s", "rrbs", "dropped_bits", "reward")


@dataclass
class KpiAggregate:
    """Associative, commutative accumulator over episodes."""

    episodes: int = 0
    handovers: float = 0.0
    handovers_sq: float = 0.0
    n_tti: int = 0
    interference_mw_sum: float = 0.0
    rrbs_sum: float = 0.0
    delay_s_sum: float = 0.0
    delay_n: int = 0
    reward_sum: float = 0.0
    dropped_bits: int = 0
    starved_ttis: int = 0
    violations: int = 0

    def add(self, ep: EpisodeSummary) -> "KpiAggregate":
        self.episodes += 1
        self.handovers += ep.handovers
        self.handovers_sq += ep.handovers ** 2
        self.n_tti += ep.n_tti
        self.interference_mw_sum += ep.interference_mw_sum
        self.rrbs_sum += ep.rrbs_sum
        self.delay_s_sum += ep.delay_s_sum
        self.delay_n += ep.delay_n
        self.reward_sum += ep.reward_sum
        self.dropped_bits += ep.dropped_bits
        self.starved_ttis += ep.starved_ttis
        self.violations += ep.power_violations + ep.spacing_violations + ep.serving_violations
        return self

    def merge(self, other: "KpiAggregate") -> "KpiAggregate":
        out = KpiAggregate()
        for f in fields(self):
            setattr(out, f.name, getattr(self, f.name) + getattr(other, f.name))
        return out

    def summary(self) -> "KpiSummary":
        if self.episodes == 0:
            raise ValueError("no episodes aggregated")
        n = max(self.n_tti, 1)
        return KpiSummary(
            episodes=self.episodes,
            handovers=self.handovers / self.episodes,
            interference_mw=self.interference_mw_sum / n,
            delay_s=self.delay_s_sum / self.delay_n if self.delay_n else 0.0,
            rrbs=self.rrbs_sum / n,
            dropped_bits=self.dropped_bits / self.episodes,
            reward=self.reward_sum / n,
            total_handovers=int(round(self.handovers)),
            starved_ttis=self.starved_ttis,
            violations=self.violations,
        )


@dataclass(frozen=True)
class KpiSummary:
    """Per-episode handover/drop means and per-TTI means of the other KPIs."""

    episodes: int
    handovers: float
    interference_mw: float
    delay_s: float
    rrbs: float
    dropped_bits: float
    reward: float
    total_handovers: int
    starved_ttis: int
    violations: int

    def as_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def aggregate(episodes: Iterable[EpisodeSummary]) -> KpiSummary:
    acc = KpiAggregate()
    for ep in episodes:
        acc.add(ep)
    if acc.episodes == 0:
        raise ValueError("aggregate() needs at least one episode")
    return acc.summary()


def normalize_to_max(values: Sequence[float]) -> list[float]:
    """Scale a sweep of nonnegative KPI values so the largest becomes 1."""
    vals = [float(v) for v in values]
    top = max(vals) if vals else 0.0
    if top <= 0:
        return [0.0 for _ in vals]
    return [v / top for v in vals]


@dataclass
class HeatmapGrid:
    cell_size: float
    area: tuple
    counts: np.ndarray  # (ny, nx), row index = y cell

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def heatmap(episodes: Iterable[EpisodeSummary], cell_size: float,
            area: tuple = (500.0, 500.0)) -> HeatmapGrid:
    w, h = area
    nx, ny = w / cell_size, h / cell_size
    if abs(nx - round(nx)) > 1e-9 or abs(ny - round(ny)) > 1e-9:
        raise ValueError("cell_size must divide the area dimensions")
    nx, ny = int(round(nx)), int(round(ny))
    counts = np.zeros((ny, nx), dtype=np.int64)
    for ep in episodes:
        if len(ep.handover_xy) == 0:
            continue
        ix = np.clip(np.floor(ep.handover_xy[:, 0] / cell_size).astype(int), 0, nx - 1)
        iy = np.clip(np.floor(ep.handover_xy[:, 1] / cell_size).astype(int), 0, ny - 1)
        np.add.at(counts, (iy, ix), 1)
    return HeatmapGrid(cell_size, (w, h), counts)


def audit_constraints(records: Sequence[TtiRecord], p_max_w: float, n_bs: int,
                      min_spacing: int = 10) -> dict:
    """Count C1 (power), C3 (single serving cell) and handover-spacing violations."""
    c1 = sum(1 for r in records if r.tx_power_w > p_max_w * (1 + 1e-12))
    c3 = sum(1 for r in records if not (0 <= r.serving_bs < n_bs))
    spacing = 0
    last = None
    for r in records:
        if r.handover:
            if last is not None and r.tti - last < min_spacing:
                spacing += 1
            last = r.tti
    return {"C1": c1, "C3": c3, "spacing": spacing}


# ---------------------------------------------------------------------------
# CSV output

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf"
        return repr(v)
    return str(v)


def write_csv(path: str | Path, header_lines: Sequence[str], columns: Sequence[str],
              rows: Iterable[Sequence]) -> Path:
    """Write ``rows`` as CSV preceded by ``# ``-prefixed header lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())
    return path


EPISODE_COLUMNS = ("episode", "n_tti", "handovers", "mean_interference_mw", "mean_delay_s",
                   "mean_rrbs", "dropped_bits", "mean_reward", "max_tx_power_w", "violations")


def episode_rows(episodes: Sequence[EpisodeSummary]):
    for i, ep in enumerate(episodes):
        yield (i, ep.n_tti, ep.handovers, ep.mean_interference_mw, ep.mean_delay_s, ep.mean_rrbs,
               ep.dropped_bits, ep.mean_reward, ep.max_tx_power_w,
               ep.power_violations + ep.spacing_violations + ep.serving_violations)


TRACE_COLUMNS = ("tti", "x", "y", "serving_bs", "handover", "q_bits", "rate_bps",
                 "interference_mw", "rrbs_used", "tx_power_w", "resource_term", "delay_term",
                 "interference_term", "handover_regret", "reward")


def trace_rows(records: Sequence[TtiRecord]):
    for r in records:
        yield (r.tti, r.position[0], r.position[1], r.serving_bs, r.handover, r.q_bits,
               r.rate_bps, r.interference_mw, r.rrbs_used, r.tx_power_w, r.reward.resource_term,
               r.reward.delay_term, r.reward.interference_term, r.reward.handover_regret,
               r.reward.total)


def write_heatmap_csv(path: str | Path, grid: HeatmapGrid, header_lines: Sequence[str]) -> Path:
    head = list(header_lines) + [
        f"cell_size = {grid.cell_size!r}",
        f"area = {tuple(grid.area)!r}",
        "rows run from y = 0 upward; columns from x = 0 rightward",
    ]
    ny, nx = grid.counts.shape
    cols = ["y_cell"] + [f"x{j}" for j in range(nx)]
    rows = ([i] + [int(c) for c in grid.counts[i]] for i in range(ny))
    return write_csv(path, head, cols, rows)


def read_heatmap_csv(path: str | Path) -> HeatmapGrid:
    cell = area = None
    data = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("# cell_size = "):
            cell = float(line.split("=", 1)[1])
        elif line.startswith("# area = "):
            area = tuple(float(v) for v in line.split("=", 1)[1].strip(" ()").split(","))
        elif line and not line.startswith("#") and not line.startswith("y_cell"):
            data.append([int(v) for v in line.split(",")[1:]])
    return HeatmapGrid(cell, area, np.array(data, dtype=np.int64))

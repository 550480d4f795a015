"""Command-line driver: train, eval, baseline, compare, sweep and heatmap.

Every CSV starts with ``#`` comment lines holding the command, the seed and
the fully resolved configuration, so each output file describes its own run.
Exit codes: 0 ok, 1 configuration or input error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import sys
import zlib
from pathlib import Path

from . import __version__, experiment, kpi
from .agent import PolicyFormatError, QTable, load_policy, save_policy
from .config import ConfigError, ScenarioConfig, apply_overrides, load_config

log = logging.getLogger("dronehrrm")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class InputError(Exception):
    """Bad command-line input (exit code 1)."""


def _parse_set(items: list[str]) -> dict:
    import ast

    out = {}
    for item in items or []:
        if "=" not in item:
            raise InputError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = ast.literal_eval(v.strip())
        except (ValueError, SyntaxError) as exc:
            raise InputError(f"--set {k}: cannot parse {v!r}") from exc
    return out


def resolve_config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    overrides = _parse_set(args.set)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def header(cfg: ScenarioConfig, command: str, extra: list[str] | None = None) -> list[str]:
    lines = [f"dronehrrm {__version__} {command}", f"seed = {cfg.seed}"]
    lines += list(extra or [])
    lines += ["config:"] + cfg.to_lines()
    return lines


def _out(cfg: ScenarioConfig) -> Path:
    p = Path(cfg.output_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _policy(path: str | None) -> tuple[QTable, list[str]]:
    if not path:
        raise InputError("this command needs --policy")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"policy file {path} not found")
    table = load_policy(p)
    return table, [f"policy = {p.name} crc32={zlib.crc32(p.read_bytes()):08x}"]


def _write_eval(cfg: ScenarioConfig, res: experiment.EvalResult, prefix: str, head: list[str],
                figures: bool, cell: float, trace: bool) -> list[Path]:
    out = _out(cfg)
    written = [
        kpi.write_csv(out / f"{prefix}_episodes.csv", head, kpi.EPISODE_COLUMNS,
                      kpi.episode_rows(res.episodes)),
        _write_summary(out / f"{prefix}_summary.csv", head, [(res.scheme, res.kpis)]),
    ]
    grid = kpi.heatmap(res.episodes, cell, cfg.topology.area)
    written.append(kpi.write_heatmap_csv(out / f"{prefix}_heatmap.csv", grid, head))
    if trace and res.traces:
        written.append(kpi.write_csv(out / f"{prefix}_trace.csv", head, ("episode",) + kpi.TRACE_COLUMNS,
                                     ((i,) + row for i, tr in enumerate(res.traces)
                                      for row in kpi.trace_rows(tr))))
    if figures:
        from .report import heatmap_figure
        written.append(heatmap_figure(grid, out / f"{prefix}_heatmap.png",
                                      bs_positions=cfg.topology.bs_positions))
    return written


SUMMARY_COLUMNS = ("scheme",) + tuple(f.name for f in kpi.KpiSummary.__dataclass_fields__.values())


def _write_summary(path: Path, head: list[str], items) -> Path:
    rows = ([name] + list(s.as_row().values()) for name, s in items)
    return kpi.write_csv(path, head, SUMMARY_COLUMNS, rows)


def _progress(every: int):
    def cb(ep, summary):
        if every and (ep + 1) % every == 0:
            log.info("episode %d: handovers=%d mean reward=%.4f", ep + 1, summary.handovers,
                     summary.mean_reward)
    return cb


# ---------------------------------------------------------------------------
# subcommands

def cmd_train(args) -> list[Path]:
    cfg = resolve_config(args)
    episodes = args.episodes if args.episodes is not None else cfg.train.episodes
    table, train_log = experiment.train_policy(cfg, episodes, progress=_progress(args.log_every))
    out = _out(cfg)
    head = header(cfg, "train", [f"train episodes = {episodes}"])
    policy = save_policy(table, out / "policy.qtable")
    rows = ((r.episode, r.epsilon, r.summary.n_tti, r.summary.handovers, r.summary.mean_reward,
             r.summary.mean_interference_mw, r.summary.mean_delay_s, r.summary.mean_rrbs)
            for r in train_log)
    cols = ("episode", "epsilon", "n_tti", "handovers", "mean_reward", "mean_interference_mw",
            "mean_delay_s", "mean_rrbs")
    written = [policy, kpi.write_csv(out / "train_log.csv", head, cols, rows)]
    if args.figures:
        from .report import training_figure
        written.append(training_figure([r.summary.mean_reward for r in train_log],
                                       [r.summary.handovers for r in train_log],
                                       out / "train_log.png"))
    return written


def cmd_eval(args) -> list[Path]:
    cfg = resolve_config(args)
    table, extra = _policy(args.policy)
    res = experiment.evaluate(cfg, "learned", table, args.episodes, trace=args.trace)
    head = header(cfg, "eval", extra + [f"episodes = {len(res.episodes)}"])
    return _write_eval(cfg, res, "eval", head, args.figures, args.cell, args.trace)


def cmd_baseline(args) -> list[Path]:
    cfg = resolve_config(args)
    res = experiment.evaluate(cfg, "baseline", None, args.episodes, trace=args.trace)
    head = header(cfg, "baseline", [f"episodes = {len(res.episodes)}"])
    return _write_eval(cfg, res, "baseline", head, args.figures, args.cell, args.trace)


def cmd_compare(args) -> list[Path]:
    cfg = resolve_config(args)
    table, extra = _policy(args.policy)
    learned = experiment.evaluate(cfg, "learned", table, args.episodes)
    base = experiment.evaluate(cfg, "baseline", None, args.episodes)
    head = header(cfg, "compare", extra + [f"episodes = {len(learned.episodes)}"])
    return [_write_summary(_out(cfg) / "compare.csv", head,
                           [("learned", learned.kpis), ("baseline", base.kpis)])]


def cmd_heatmap(args) -> list[Path]:
    cfg = resolve_config(args)
    if args.scheme == "learned":
        table, extra = _policy(args.policy)
    else:
        table, extra = None, []
    res = experiment.evaluate(cfg, args.scheme, table, args.episodes)
    grid = kpi.heatmap(res.episodes, args.cell, cfg.topology.area)
    head = header(cfg, f"heatmap {args.scheme}", extra + [f"episodes = {len(res.episodes)}"])
    out = _out(cfg)
    written = [kpi.write_heatmap_csv(out / f"heatmap_{args.scheme}.csv", grid, head)]
    if args.figures:
        from .report import heatmap_figure
        written.append(heatmap_figure(grid, out / f"heatmap_{args.scheme}.png",
                                      bs_positions=cfg.topology.bs_positions))
    return written


def cmd_sweep(args) -> list[Path]:
    cfg = resolve_config(args)
    if not args.sweep:
        raise InputError("sweep needs --sweep name=v1,v2,...")
    try:
        name, values = experiment.parse_sweep(args.sweep)
        for v in values:
            cfg.with_value(name, v)  # validate every point before training anything
    except ValueError as exc:
        raise InputError(str(exc)) from exc

    def progress(pt):
        log.info("%s=%r: handovers=%.2f", pt.name, pt.value, pt.kpis.handovers)

    points = experiment.sweep(cfg, name, values, args.train_episodes, args.episodes, progress)
    cols, rows = experiment.sweep_table(points)
    head = header(cfg, "sweep", [f"sweep = {name} {values!r}",
                                 f"train episodes = {args.train_episodes or cfg.train.episodes}",
                                 f"eval episodes = {args.episodes or cfg.episodes}"])
    out = _out(cfg)
    written = [kpi.write_csv(out / "sweep.csv", head, cols, rows)]
    if args.figures:
        from .report import sweep_figure
        written.append(sweep_figure(cols, rows, out / "sweep.png"))
    return written


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file (defaults if omitted)")
    common.add_argument("--seed", type=int, help="scenario seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides output_dir)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key, e.g. weights.alpha_h=0 (repeatable)")
    common.add_argument("--episodes", type=int, help="episode count for this command")
    common.add_argument("--figures", action="store_true", help="also render PNG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    evalopts = argparse.ArgumentParser(add_help=False)
    evalopts.add_argument("--cell", type=float, default=50.0, help="heatmap cell size [m]")
    evalopts.add_argument("--trace", action="store_true", help="write per-TTI traces (large)")

    ap = argparse.ArgumentParser(prog="dronehrrm", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="train a Q-table policy")
    p.add_argument("--log-every", type=int, default=0, help="log progress every N episodes")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common, evalopts], help="evaluate a trained policy")
    p.add_argument("--policy", help="policy file written by train")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", parents=[common, evalopts], help="evaluate the RSS scheme")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("compare", parents=[common], help="learned policy vs the RSS scheme")
    p.add_argument("--policy", help="policy file written by train")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("heatmap", parents=[common], help="handover position grid")
    p.add_argument("--policy", help="policy file (scheme 'learned')")
    p.add_argument("--scheme", choices=experiment.SCHEMES, default="learned")
    p.add_argument("--cell", type=float, default=50.0, help="cell size [m]")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("sweep", parents=[common], help="train+eval over one parameter")
    p.add_argument("--sweep", help='"name=v1,v2,...", e.g. "weights.alpha_h=0,0.25,0.5"')
    p.add_argument("--train-episodes", type=int, help="training episodes per point")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        written = args.func(args)
    except (ConfigError, InputError, PolicyFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        log.debug("runtime failure", exc_info=True)
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in written:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point.

    koopfxt simulate --regime robust --noise off --out runs/
    koopfxt paper --out runs/
    koopfxt plot --in runs/*.csv --out figs/
    koopfxt id-demo

Log verbosity comes from ``KOOPFXT_LOG_LEVEL`` (default WARNING).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ..control import REGIMES, normalize_regime
from ..errors import ConfigurationError, KoopFxtError
from . import config as config_mod
from .id_demo import run_id_demo
from .io import emit_csv, emit_summary, read_csv
from .plots import emit_plots
from .runner import run_scenario

LOG_ENV = "KOOPFXT_LOG_LEVEL"
EXIT_ERROR = 1
EXIT_CONFIG = 2

log = logging.getLogger("koopfxt")


def _setup_logging() -> None:
    level = os.environ.get(LOG_ENV, "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _load_config(args):
    cfg = config_mod.load(args.config) if args.config else config_mod.load_paper_config()
    if args.dt is not None:
        cfg.integration.dt = args.dt
    if args.horizon is not None:
        cfg.integration.horizon = args.horizon
    if args.decimation is not None:
        cfg.integration.decimation = args.decimation
    return cfg.validate()


def _run_name(regime: str, noise: bool, seed: int) -> str:
    return f"{regime.replace('_', '-')}_{'noisy' if noise else 'clean'}_seed{seed}"


def _simulate_one(cfg, regime, seed, noise, out: Path):
    run = run_scenario(cfg, regime, seed=seed, noise=noise)
    name = _run_name(run.regime, noise, seed)
    emit_csv(run, out / f"{name}.csv", cfg.integration.decimation)
    emit_summary(run, out / f"{name}.summary.json")
    return run, name


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    run, name = _simulate_one(cfg, normalize_regime(args.regime), args.seed, args.noise, out)
    summary = run.summary()
    print(json.dumps(summary, indent=2))
    if not summary["safe"]:
        log.warning("%s left the safe set (min h = %.4g)", name, summary["min_h"])
    return 0


def cmd_paper(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    runs = []
    for noise in (False, True):
        for regime in REGIMES:
            run, name = _simulate_one(cfg, regime, args.seed, noise, out)
            runs.append(run)
            s = run.summary()
            print(
                f"{name:36s} safe={str(s['safe']):5s} min_h={s['min_h']:+.4f} "
                f"err_after_T={s['max_d_err_after_T'] if s['max_d_err_after_T'] is not None else float('nan'):.3g} "
                f"wall={s['wall_clock_ms'] / 1e3:.2f}s"
            )
    clean = [r for r in runs if not r.noise]
    for p in emit_plots(clean, out / "figures"):
        print(p)
    for p in emit_plots([r for r in runs if r.noise], out / "figures_noisy"):
        print(p)
    return 0


def cmd_plot(args) -> int:
    cfg = config_mod.load(args.config) if args.config else config_mod.load_paper_config()
    logs = [read_csv(p) for p in args.inputs]
    obstacles = [(tuple(o.center), o.radius) for o in cfg.safety.obstacles]
    ref = cfg.controller.reference
    for p in emit_plots(logs, args.out, obstacles, (ref.amplitude, ref.omega)):
        print(p)
    return 0


def cmd_id_demo(args) -> int:
    report, _ = run_id_demo(T=args.T, a=args.a, b=args.b, w=args.w, dt=args.dt, seed=args.seed)
    print(json.dumps(report.to_dict(), indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="koopfxt", description="Fixed-time Koopman identification with robust CBF-QP safety")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_opts(sp):
        sp.add_argument("--config", help="scenario JSON (default: shipped case study)")
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--out", default="runs")
        sp.add_argument("--dt", type=float)
        sp.add_argument("--horizon", type=float)
        sp.add_argument("--decimation", type=int)

    sim = sub.add_parser("simulate", help="run one regime and write CSV + summary JSON")
    scenario_opts(sim)
    sim.add_argument("--regime", required=True, choices=[r.replace("_", "-") for r in REGIMES] + list(REGIMES))
    sim.add_argument("--noise", type=_on_off, default=False, metavar="on|off")
    sim.set_defaults(func=cmd_simulate)

    paper = sub.add_parser("paper", help="all regimes with and without noise, plus figures")
    scenario_opts(paper)
    paper.set_defaults(func=cmd_paper)

    plot = sub.add_parser("plot", help="render the four SVG figures from CSV logs")
    plot.add_argument("--in", dest="inputs", nargs="+", required=True)
    plot.add_argument("--out", default="figures")
    plot.add_argument("--config", help="scenario JSON providing obstacles and reference")
    plot.set_defaults(func=cmd_plot)

    demo = sub.add_parser("id-demo", help="fixed-time identification on xdot = -2x")
    demo.add_argument("--T", type=float, default=0.12)
    demo.add_argument("--a", type=float, default=1e-3)
    demo.add_argument("--b", type=float, default=1e3)
    demo.add_argument("--w", type=float, default=4.0)
    demo.add_argument("--dt", type=float, default=1e-4)
    demo.add_argument("--seed", type=int, default=0)
    demo.set_defaults(func=cmd_id_demo)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"koopfxt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KoopFxtError as exc:
        print(f"koopfxt: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

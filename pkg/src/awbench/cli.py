"""Command-line benchmark driver.

Subcommands:

* ``compare`` - run every configured controller, write per-controller
  CSV logs, a combined ``metrics.json`` and tracking/control SVG plots.
* ``run`` - same pipeline for a single controller.
* ``margins`` - estimate gain/delay margins for one controller.
* ``metrics`` - recompute tracking metrics from a stored CSV log.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .analysis import (
    BenchmarkSetup,
    Metrics,
    MetricsUnavailableError,
    NominalUnstableError,
    compute_metrics,
    estimate_delay_margin,
    estimate_gain_margin,
    run_setup,
)
from .benchmark import make_controller, remus_yaw_plant
from .config import ConfigError, RunConfig, parse_config
from .output import metrics_record, read_csv, write_csv, write_metrics_json, write_svg_plot

__all__ = ["main", "build_parser", "run_benchmark"]


def _setup_for(rc: RunConfig, name: str) -> BenchmarkSetup:
    plant = remus_yaw_plant()

    def factory():
        return make_controller(
            name,
            plant=plant,
            actuator=rc.actuator,
            ts=rc.sim.ts,
            pd_params=rc.pd_aw,
            lqi_weights=rc.lqi_aw.weights(),
            lqi_kaw=rc.lqi_aw.kaw,
            classic_params=rc.classic_pid,
            mpc_params=rc.mpc,
            mpc_preview=rc.mpc_preview,
        )

    return BenchmarkSetup(
        plant=plant,
        controller_factory=factory,
        actuator=rc.actuator,
        scenario=rc.scenario,
        config=rc.sim,
    )


def _estimate_margins(rc: RunConfig, setup: BenchmarkSetup, metrics: Metrics) -> Metrics:
    gm, gm_cap = estimate_gain_margin(setup, cap=rc.gm_cap)
    dm, dm_cap = estimate_delay_margin(setup, cap=rc.dm_cap)
    return replace(metrics, gm=gm, gm_exceeds_cap=gm_cap, dm=dm, dm_exceeds_cap=dm_cap)


def run_benchmark(
    rc: RunConfig,
    out_dir: str | Path,
    controllers: tuple[str, ...] | None = None,
    with_margins: bool = True,
    with_plots: bool = True,
) -> list[Path]:
    """Simulate the selected controllers and write all artifacts.

    Returns the list of files written.  A diverged nominal run is
    reported with null metrics instead of aborting the benchmark.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = controllers or rc.controllers

    written: list[Path] = []
    records = []
    logs = {}
    for name in names:
        setup = _setup_for(rc, name)
        log = run_setup(setup)
        logs[name] = log
        csv_path = out / f"{name}.csv"
        write_csv(log, csv_path)
        written.append(csv_path)

        try:
            metrics = compute_metrics(log)
        except MetricsUnavailableError:
            print(f"warning: nominal run of '{name}' diverged; metrics unavailable", file=sys.stderr)
            records.append(metrics_record(name, None))
            continue
        if with_margins:
            try:
                metrics = _estimate_margins(rc, setup, metrics)
            except NominalUnstableError:
                print(f"warning: nominal run of '{name}' does not settle; margins skipped", file=sys.stderr)
        records.append(metrics_record(name, metrics))

    metrics_path = out / "metrics.json"
    write_metrics_json(records, metrics_path)
    written.append(metrics_path)

    if with_plots:
        tracking = [("setpoint", logs[names[0]].t, logs[names[0]].r)]
        tracking += [(name, logs[name].t, logs[name].y) for name in names]
        control = [(name, logs[name].t, logs[name].u_ac) for name in names]
        tracking_path = out / "tracking.svg"
        control_path = out / "control.svg"
        write_svg_plot(tracking, tracking_path, title="Setpoint tracking", ylabel="heading (deg)")
        write_svg_plot(control, control_path, title="Actuated control signal", ylabel="deflection (deg)")
        written += [tracking_path, control_path]
    return written


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awbench",
        description="Closed-loop anti-windup and MPC benchmark on a saturated yaw-control loop.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="run all configured controllers and write artifacts")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--no-margins", action="store_true", help="skip margin estimation")
    p.add_argument("--no-plots", action="store_true", help="skip SVG plots")

    p = sub.add_parser("run", help="run a single controller")
    p.add_argument("--controller", required=True, help="pd_aw | lqi_aw | classic_pid | mpc")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--out", default="results", help="output directory (default: results)")
    p.add_argument("--no-margins", action="store_true")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("margins", help="estimate gain and delay margins for one controller")
    p.add_argument("--controller", required=True)
    p.add_argument("--config", help="YAML configuration file")

    p = sub.add_parser("metrics", help="compute tracking metrics from a CSV log")
    p.add_argument("--log", required=True, help="CSV file written by compare/run")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("compare", "run"):
            rc = _load_config(args.config)
            names = (args.controller,) if args.command == "run" else None
            if names and names[0] not in ("pd_aw", "lqi_aw", "classic_pid", "mpc"):
                raise ConfigError(f"unknown controller '{names[0]}'")
            files = run_benchmark(
                rc, args.out, controllers=names,
                with_margins=not args.no_margins,
                with_plots=not args.no_plots,
            )
            for path in files:
                print(path)
            return 0
        if args.command == "margins":
            rc = _load_config(args.config)
            if args.controller not in ("pd_aw", "lqi_aw", "classic_pid", "mpc"):
                raise ConfigError(f"unknown controller '{args.controller}'")
            setup = _setup_for(rc, args.controller)
            gm, gm_cap = estimate_gain_margin(setup, cap=rc.gm_cap)
            dm, dm_cap = estimate_delay_margin(setup, cap=rc.dm_cap)
            print(json.dumps({
                "controller": args.controller,
                "gm": gm, "gm_exceeds_cap": gm_cap,
                "dm": dm, "dm_exceeds_cap": dm_cap,
            }, indent=2))
            return 0
        if args.command == "metrics":
            log = read_csv(args.log)
            m = compute_metrics(log)
            print(json.dumps({"ise": m.ise, "iace": m.iace, "iacer": m.iacer}, indent=2))
            return 0
    except (ConfigError, NominalUnstableError, MetricsUnavailableError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())

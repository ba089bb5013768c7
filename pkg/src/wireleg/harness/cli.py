"""Command-line entry point: run an experiment, write traces, a summary and figures."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from ..stability import (certify_schedule, default_grid, joint_space_gain,
                         popov_coeffs, popov_point)
from . import plots
from .config import Config, ConfigError, builtin_config, load_config
from .experiments import (run_impact_experiment, run_pi_bench, run_spring_characterization,
                          run_swing_experiment, run_tracking_experiment)
from .trace import emit_trace


def slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _metadata(cfg: Config, command: str, **extra) -> dict:
    meta = {
        "command": command,
        "source": cfg.source,
        "scenario": cfg.scenario.to_dict(),
        "settings": {name: getattr(cfg, name) for name in
                     ("pi_bench", "characterization", "tracking", "impact", "swing",
                      "stability")},
    }
    meta.update(extra)
    return _jsonable(meta)


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_table(path, header, rows) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                             for v in row])
    return path


# -- subcommands ---------------------------------------------------------------

def cmd_pi_bench(cfg: Config, out: Path, figures: bool) -> dict:
    s = cfg.pi_bench
    res = run_pi_bench(cfg.scenario, s.amplitude, s.freq, s.offset, s.duration)
    emit_trace(res.trace, out / "pi_bench.csv", _metadata(cfg, "pi-bench"))
    if figures:
        plots.plot_pi_bench(res, out / "pi_bench.png")
    return {"amplitude_ratio": res.amplitude_ratio, "phase_lag_deg": res.phase_lag_deg,
            "dc_error": res.dc_error, "saturated": res.saturated}


def cmd_characterize(cfg: Config, out: Path, figures: bool) -> dict:
    s = cfg.characterization
    tables, rows, summary = [], [], {}
    for sched in cfg.scenario.schedules:
        table = run_spring_characterization(cfg.scenario, sched, s.deflections, s.speed,
                                            s.margin, s.settle)
        tables.append(table)
        name = slug(sched.label)
        emit_trace(table.trace, out / f"characterize_{name}.csv",
                   _metadata(cfg, "characterize", schedule=sched))
        for p in table.points:
            rel = abs(p.force - p.expected) / abs(p.expected) if p.expected else float("nan")
            rows.append((sched.label, p.deflection, p.force, p.expected, rel))
        summary[sched.label] = {"slope": table.slope,
                                "max_relative_error": table.max_relative_error,
                                "skipped": table.skipped}
    write_table(out / "spring_table.csv",
                ("schedule", "deflection", "force", "expected", "relative_error"), rows)
    if figures:
        plots.plot_spring_tables(tables, out / "characterize.png")
    return summary


def cmd_track(cfg: Config, out: Path, figures: bool) -> dict:
    s = cfg.tracking
    results = run_tracking_experiment(cfg.scenario, s.amplitude, s.freq, s.center, s.settle)
    summary = {}
    for res in results:
        emit_trace(res.trace, out / f"track_{slug(res.schedule.label)}.csv",
                   _metadata(cfg, "track", schedule=res.schedule))
        summary[res.schedule.label] = {"peak_error": res.peak_error, "rms_error": res.rms_error}
    if figures:
        plots.plot_tracking(results, out / "track.png")
    return summary


def cmd_impact(cfg: Config, out: Path, figures: bool) -> dict:
    scen = cfg.scenario
    reports, traces = run_impact_experiment(scen, cfg.impact)
    rows = []
    for rep in reports:
        emit_trace(traces[(rep.impulse, rep.schedule)],
                   out / f"impact_{rep.impulse:g}N_{slug(rep.schedule)}.csv",
                   _metadata(cfg, "impact", impulse=rep.impulse, schedule=rep.schedule))
        rows.append(dataclasses.astuple(rep))
    write_table(out / "impact_reports.csv", [f.name for f in dataclasses.fields(reports[0])],
                rows)
    if figures:
        z_nominal = scen.ground.ground_height + scen.stance_radius
        for impulse in sorted({rep.impulse for rep in reports}):
            plots.plot_impact(reports, traces, impulse, out / f"impact_{impulse:g}N.png",
                              z_nominal)
    return {"reports": [dataclasses.asdict(rep) for rep in reports]}


def cmd_stability(cfg: Config, out: Path, figures: bool) -> dict:
    s = cfg.stability
    knee = cfg.scenario.knee
    geom = cfg.scenario.geometry
    summary = {}
    for sched in cfg.scenario.schedules:
        rep = certify_schedule(sched, knee, geom, s.margin, s.bound, s.n_kd)
        name = slug(sched.label)
        coeffs = popov_coeffs(knee, rep.worst_K_d)
        w = default_grid(coeffs.omega_0, decades=3, points=601)
        x, y = popov_point(coeffs, knee.K_w, w)
        write_table(out / f"popov_{name}.csv", ("omega", "re", "omega_im"), zip(w, x, y))
        if figures:
            plots.plot_popov(knee, rep.worst_K_d, out / f"popov_{name}.png")
        entry = dataclasses.asdict(rep)
        entry["relative_gap"] = rep.relative_gap
        entry["damping_range_joint"] = [joint_space_gain(v, geom) for v in sched.damping_range]
        summary[sched.label] = entry
    return summary


def cmd_swing(cfg: Config, out: Path, figures: bool) -> dict:
    trace = run_swing_experiment(cfg.scenario, cfg.swing)
    emit_trace(trace, out / "swing.csv", _metadata(cfg, "swing"))
    if figures:
        plots.plot_swing(trace, out / "swing.png")
    w = trace["omega_l_knee"]
    err = trace["omega_l_hat"] - w
    return {"estimator_rms_ratio": float(np.sqrt(np.mean(err**2)) / np.sqrt(np.mean(w**2))),
            "max_ground_force": float(np.max(trace["ground_force"]))}


COMMANDS = {
    "pi-bench": cmd_pi_bench,
    "characterize": cmd_characterize,
    "track": cmd_track,
    "impact": cmd_impact,
    "stability": cmd_stability,
    "swing": cmd_swing,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wireleg",
                                     description="Wire-driven leg experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "pi-bench": "torque loop on the locked knee",
        "characterize": "quasi-static force-deflection sweep of the virtual spring",
        "track": "suspended radial tracking under each schedule",
        "impact": "push-off, landing and recovery under each schedule",
        "stability": "Popov certification of each schedule",
        "swing": "load-velocity estimator on a contact-free swing",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", help="scenario TOML file (default: the built-in one)")
        p.add_argument("--out", default="out", help="output directory (default: ./out)")
        p.add_argument("--dt", type=float, help="override the plant integration step (s)")
        p.add_argument("--duration", type=float, help="override the simulated duration (s)")
        p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
        if name == "stability":
            p.add_argument("--strict", action="store_true",
                           help="exit non-zero when a schedule is not certified")
    return parser


def _apply_overrides(cfg: Config, args) -> Config:
    scen = cfg.scenario
    if args.dt is not None:
        scen = dataclasses.replace(scen, dt=args.dt)
    if args.duration is not None:
        scen = dataclasses.replace(scen, duration=args.duration)
        cfg = dataclasses.replace(cfg, pi_bench=dataclasses.replace(cfg.pi_bench,
                                                                    duration=args.duration))
    return dataclasses.replace(cfg, scenario=scen)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else builtin_config(args.command)
        cfg = _apply_overrides(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    figures = not args.no_figures
    command = COMMANDS[args.command]
    try:
        results = command(cfg, out, figures)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    summary = {"command": args.command, "config": cfg.source, "results": results}
    path = write_summary(out / f"{args.command.replace('-', '_')}_summary.json", summary)
    print(f"wrote {path}")
    if args.command == "stability" and args.strict:
        failed = [label for label, rep in results.items() if not rep["certified"]]
        if failed:
            print(f"not certified: {', '.join(failed)}", file=sys.stderr)
            return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``pulsejet <command> [options]``.

Exit codes: 0 success, 1 domain/configuration/usage error (or a failed
criterion under ``scenarios``), 2 file I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import analysis, scenarios
from .calibrate import CALIBRATED, FitResult, fit, write_fit_log, write_fit_report
from .config import RunConfig, load_config
from .cycle import Scenario, glide_for_gpf, run_scenario, sweep, write_sweep_csv
from .dynamics import simulate_fall
from .errors import PulsejetError
from .hydro import FallExperiment, cda_at, identify_cda_from_fall

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_DOMAIN)


def parse_grid(text: str):
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            a, b, h = (float(p) for p in text.split(":"))
            if h <= 0 or b < a:
                raise ValueError
            n = int(np.floor((b - a) / h + 1e-9))
            return [round(a + k * h, 12) for k in range(n + 1)]
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}; use start:stop:step or a,b,c") from None


def _common(p, schedule=True):
    p.add_argument("--config", type=Path, help="INI configuration file")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--dt", type=float, help="integration step [s]")
    if schedule:
        p.add_argument("--evr", type=float, help="ejected volume ratio [%%]")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--glide", type=float, help="glide duration [s]")
        g.add_argument("--gpf", type=float, help="glide phase fraction [%%]; sets the glide duration")
        p.add_argument("--cycles", type=int, help="number of cycles")
        p.add_argument("--valves", action=argparse.BooleanOptionalAction, default=None,
                       help="refill through the valves (default) or the nozzle only")
        p.add_argument("--distance", type=float, help="stop after this distance [m]")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="pulsejet", description="Cycle-resolved pulsed-jet swimmer simulator.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _common(sub.add_parser("simulate", help="simulate cycles and write trajectory and energy ledger"))

    p = sub.add_parser("fall", help="virtual terminal-velocity test and CdA identification")
    _common(p, schedule=False)
    p.add_argument("--evr", type=float, action="append",
                   help="contraction as EVR [%%]; repeatable (default: every table knot)")

    p = sub.add_parser("fit", help="calibrate free parameters to the configured targets")
    _common(p, schedule=False)
    p.add_argument("--budget", type=int, help="maximum model evaluations")

    p = sub.add_parser("sweep", help="sweep GPF, EVR or glide duration")
    _common(p)
    p.add_argument("--var", required=True, choices=("gpf", "evr", "glide"))
    p.add_argument("--grid", required=True, type=parse_grid)

    p = sub.add_parser("analyze", help="metrics of a tracked position trace")
    _common(p)
    p.add_argument("trace", type=Path)
    p.add_argument("--window", type=int, default=5, help="odd moving-average width [samples]")
    p.add_argument("--phases", action="store_true", help="segment by the configured schedule")

    p = sub.add_parser("compare", help="compare a simulated and an experimental trace")
    _common(p, schedule=False)
    p.add_argument("sim", type=Path)
    p.add_argument("exp", type=Path)
    p.add_argument("--window", type=int, default=5)

    p = sub.add_parser("scenarios", help="run the published reproduction checks")
    _common(p, schedule=False)
    p.add_argument("--paper", action="store_true", required=True)
    p.add_argument("--budget", type=int, default=5000)
    p.add_argument("--frozen", action="store_true",
                   help="skip the fit and use the stored calibrated values")
    return ap


def effective_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    sched = cfg["schedule"]
    if args.dt is not None:
        cfg.set("integrator", "dt", args.dt)
    if getattr(args, "evr", None) is not None and not isinstance(args.evr, list):
        cfg.set("schedule", "evr_pct", args.evr)
    if getattr(args, "valves", None) is not None:
        cfg.set("schedule", "valves", args.valves)
        if args.valves != sched["valves"]:
            cfg.set("schedule", "t_refill", None)
    if getattr(args, "glide", None) is not None:
        cfg.set("schedule", "t_glide", args.glide)
    if getattr(args, "cycles", None) is not None:
        cfg.set("integrator", "cycles", args.cycles)
    if getattr(args, "distance", None) is not None:
        cfg.set("integrator", "distance", args.distance)
    if getattr(args, "budget", None) is not None:
        cfg.set("targets", "budget", args.budget)
    if getattr(args, "gpf", None) is not None:
        s = cfg.schedule()
        tg = glide_for_gpf(args.gpf, s.t_expulsion, s.t_refill, cfg["integrator"]["dt"])
        cfg.set("schedule", "t_glide", tg)
    return cfg.validate()


def _write_kv(path, items):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in items:
            fh.write(f"{k}={v!r}\n" if not isinstance(v, str) else f"{k}={v}\n")


def _scenario(cfg: RunConfig) -> Scenario:
    it = cfg["integrator"]
    return Scenario(schedule=cfg.schedule(), params=cfg.params(), energy=cfg.energy(),
                    n_cycles=it["cycles"], dt=it["dt"], distance=it["distance"])


def cmd_simulate(args, cfg, out):
    sc = _scenario(cfg)
    ledger, traj = run_scenario(sc.schedule, sc.params, sc.energy, n_cycles=sc.n_cycles, dt=sc.dt,
                                distance=sc.distance)
    traj.write_csv(out / "trajectory.csv")
    _write_kv(out / "ledger.txt", dataclasses.asdict(ledger).items())
    print(f"distance={ledger.distance:.4f} m avg_speed={ledger.avg_speed:.4f} m/s "
          f"peak={ledger.peak_speed:.4f} m/s E={ledger.E_total:.3f} J "
          f"COT={ledger.cot_specific:.3f} J/m status={ledger.status}")
    return EXIT_OK


def cmd_fall(args, cfg, out):
    params, f = cfg.params(), cfg["fall"]
    levels = [e / 100.0 for e in args.evr] if args.evr else [s for s, _ in params.hydro.cda_table]
    rows = []
    for s in levels:
        traj = simulate_fall(params, f["F_net"], dt=cfg["integrator"]["dt"], duration=f["duration"], s=s)
        traj.write_csv(out / f"fall_evr{100 * s:g}.csv")
        ident = identify_cda_from_fall(FallExperiment(f["F_net"], traj.t, traj.x), params.hydro.rho,
                                       window=f["window"], rel_tol=f["rel_tol"])
        true = cda_at(s, params.hydro)
        rows.append((s, true, ident.cda, ident.U_t, ident.U_t_std, (ident.cda - true) / true))
        print(f"EVR {100 * s:g}%: U_t={ident.U_t:.5f} m/s CdA={ident.cda * 1e4:.3f} cm^2 "
              f"(configured {true * 1e4:.3f}, error {100 * rows[-1][-1]:+.3f}%)")
    with open(out / "fall_table.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "cda_configured_m2", "cda_identified_m2", "U_t_mps", "U_t_std_mps", "rel_error"])
        w.writerows([[repr(float(v)) for v in r] for r in rows])
    return EXIT_OK


def cmd_fit(args, cfg, out):
    result = fit(cfg.targets(), cfg.calibration_base(), budget=cfg["targets"]["budget"], jobs=args.jobs)
    write_fit_report(result, out / "fit_report.csv")
    write_fit_log(result, out / "fit_log.csv")
    cfg.apply_fit(result)
    cfg.write(out / "fitted.cfg")
    print(f"loss={result.loss:.6g} evaluations={result.evaluations} converged={result.converged}")
    for k, v in result.params.items():
        print(f"  {k} = {v:.6g}")
    for k, v in result.residuals.items():
        print(f"  residual {k}: {100 * v:+.2f}%")
    return EXIT_OK


def cmd_sweep(args, cfg, out):
    rows = sweep(args.var, args.grid, _scenario(cfg), jobs=args.jobs)
    write_sweep_csv(rows, out / "sweep.csv")
    for r in rows:
        L = r.ledger
        if L is None:
            print(f"{args.var}={r.value:g}: {r.status}")
        else:
            print(f"{args.var}={r.value:g}: avg {L.avg_speed:.4f} m/s COT {L.cot_specific:.3f} J/m "
                  f"[{r.status}]")
    return EXIT_OK


def cmd_analyze(args, cfg, out):
    trace = analysis.ingest(args.trace)
    rep = analysis.metrics(trace, cfg.schedule() if args.phases else None,
                           cfg["integrator"]["distance"], window=args.window)
    analysis.write_velocity_csv(trace, analysis.velocity(trace, args.window), out / "velocity.csv")
    text = rep.to_text()
    (out / "metrics.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args, cfg, out):
    res = analysis.compare(analysis.ingest(args.sim), analysis.ingest(args.exp), window=args.window)
    text = res.to_text()
    (out / "comparison.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def cmd_scenarios(args, cfg, out):
    frozen = None
    if args.frozen:
        frozen = FitResult(params=dict(CALIBRATED), residuals={}, loss=float("nan"), evaluations=0,
                           converged=True, history=[])
    lines = []

    def log(line):
        print(line, flush=True)
        lines.append(line)

    results = scenarios.run_all(budget=cfg["targets"]["budget"], jobs=args.jobs,
                                  fit_result=frozen, log=log)
    (out / "scenarios.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK if all(c.passed for c in results) else EXIT_DOMAIN


COMMANDS = {"simulate": cmd_simulate, "fall": cmd_fall, "fit": cmd_fit, "sweep": cmd_sweep,
            "analyze": cmd_analyze, "compare": cmd_compare, "scenarios": cmd_scenarios}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = effective_config(args)
        args.out.mkdir(parents=True, exist_ok=True)
        cfg.write(args.out / "config.cfg")
        return COMMANDS[args.command](args, cfg, args.out)
    except (PulsejetError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

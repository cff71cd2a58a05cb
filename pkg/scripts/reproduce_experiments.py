"""Re-run the swimming, glide, valve and multi-cycle experiments with the calibrated model.

Writes one CSV per experiment into --out and prints the acceptance checks.
Pass --refit to calibrate from scratch (a few minutes) instead of using the
stored values.
"""

import argparse
import csv
from pathlib import Path

from pulsejet import scenarios
from pulsejet.calibrate import CALIBRATED, CalibrationBase, FitResult, apply_params, fit, write_fit_report
from pulsejet.cycle import EnergyModel, Scenario, run_scenario, sweep, write_sweep_csv
from pulsejet.schedule import CycleSchedule


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--refit", action="store_true")
    ap.add_argument("--budget", type=int, default=5000)
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)

    base = CalibrationBase()
    if args.refit:
        result = fit(scenarios.published_targets(), base, budget=args.budget, jobs=args.jobs)
    else:
        result = FitResult(dict(CALIBRATED), {}, float("nan"), 0, True, [])
    write_fit_report(result, args.out / "parameters.csv")
    params = apply_params(result.params, CalibrationBase(dt=1e-3))
    sc = Scenario(schedule=CycleSchedule(), params=params)

    write_sweep_csv(sweep("evr", [25, 50, 75], sc, jobs=args.jobs), args.out / "evr_sweep.csv")
    for valves, tag in ((True, "wv"), (False, "nv")):
        s = Scenario(schedule=CycleSchedule(valves=valves), params=params)
        rows = sweep("glide", scenarios.REF_GLIDES, s, jobs=args.jobs)
        write_sweep_csv(rows, args.out / f"glide_sweep_{tag}.csv")
    write_sweep_csv(sweep("glide", [round(0.1 * k, 10) for k in range(101)], sc, jobs=args.jobs),
                    args.out / "cot_vs_glide.csv")

    with open(args.out / "multicycle_2m.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case", "avg_speed_mps", "duration_s", "E_total_J", "cot_J_per_m"])
        for name, tg, valves in (("WV-0", 0.0, True), ("WV-1.10", 1.10, True), ("NV-1.10", 1.10, False)):
            L, traj = run_scenario(CycleSchedule(t_glide=tg, valves=valves), params, EnergyModel(),
                                   n_cycles=60, distance=scenarios.COURSE)
            traj.write_csv(args.out / f"trajectory_{name}.csv")
            w.writerow([name, L.avg_speed, L.duration, L.E_total, L.cot_specific])

    results = scenarios.run_all(fit_result=result, budget=args.budget, base=base)
    (args.out / "criteria.txt").write_text("\n".join(c.line() for c in results) + "\n")
    return 0 if all(c.passed for c in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Reproduction scenarios for the published experiments, one check per criterion.

Each ``check_*`` function returns a :class:`Criterion`; ``run_all`` runs
them all. Tolerances are fixed here and mirrored by the acceptance tests.
"""

from __future__ import annotations

import io
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import analysis
from .calibrate import CalibrationBase, CalibrationTargets, FitResult, apply_params, fit
from .cycle import EnergyModel, Scenario, evr, find_optimum, gpf, run_scenario
from .dynamics import RigidBodyParams, simulate, simulate_fall
from .geometry import MantleGeometry
from .hydro import FallExperiment, cda_at, identify_cda_from_fall
from .schedule import CycleSchedule

# glide durations of the four with-valve GPF conditions
REF_GLIDES = (0.0, 0.37, 1.10, 3.30)
REF_GPF = (0.0, 25.2, 50.0, 75.0)
REF_PEAKS = ((25, 0.21), (50, 0.33), (75, 0.39))
REF_TRANSIT = ((25, 0.5, 2.9), (50, 0.5, 2.2), (75, 0.5, 2.1))
EVR_SWIM = 0.75
F_NET_FALL = 0.01
COURSE = 2.0


@dataclass
class Criterion:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0
    data: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.number:2d}. {self.name}: {self.detail} ({self.seconds:.1f} s)"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        c = fn(*args, **kwargs)
        c.seconds = time.perf_counter() - t0
        return c
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def check_formulas() -> Criterion:
    ok = evr(375.0, 500.0) == 75.0 and evr(0.0, 1.0) == 0.0 and evr(2.0, 2.0) == 100.0
    errs = []
    for tg, expected in zip(REF_GLIDES, REF_GPF):
        g = gpf(CycleSchedule(t_glide=tg))
        exact = 100.0 * tg / (0.55 + tg + 0.55)
        ok &= math.isclose(g, exact, rel_tol=1e-14, abs_tol=1e-14)
        errs.append(abs(g - expected))
    ok &= max(errs) <= 0.5
    return Criterion(1, "formula exactness", ok,
                     f"max |GPF - published| = {max(errs):.3f} pp (tol 0.5)", data={"errors": errs})


@_timed
def check_geometry() -> Criterion:
    g = MantleGeometry()
    red, ratio = g.area_reduction, g.expansion_ratio
    ok = abs(red - 0.757) <= 0.001 and abs(ratio - 4.11) <= 0.02
    return Criterion(2, "geometry endpoints", ok,
                     f"area reduction {100 * red:.2f}% (75.7 +/- 0.1), ratio {ratio:.3f} (4.11 +/- 0.02)")


@_timed
def check_fall_closure(params: RigidBodyParams, dt: float = 1e-3, duration: float = 60.0) -> Criterion:
    errs = {}
    for s in (0.0, 0.25, 0.5, 0.75):
        traj = simulate_fall(params, F_NET_FALL, dt=dt, duration=duration, s=s)
        ident = identify_cda_from_fall(FallExperiment(F_NET_FALL, traj.t, traj.x), params.hydro.rho)
        true = cda_at(s, params.hydro)
        errs[s] = abs(ident.cda - true) / true
    worst = max(errs.values())
    return Criterion(3, "terminal-fall closure", worst < 0.005,
                     f"max CdA error {100 * worst:.3f}% (tol 0.5%)", data={"errors": errs})


def published_targets() -> CalibrationTargets:
    return CalibrationTargets(peak_speeds=REF_PEAKS, transit=REF_TRANSIT)


def swim_metrics(params: RigidBodyParams, evr_pct: float, dt: float = 1e-3, distance: float = 0.5):
    """First-cycle peak speed and no-glide transit time for one EVR."""
    sched = CycleSchedule(evr_target=evr_pct / 100.0)
    traj = simulate(sched, params, n_cycles=30, dt=dt, stop_at_distance=distance)
    n1 = int(round(sched.period / dt)) + 1
    peak = float(np.max(traj.v[:n1]))
    try:
        transit = analysis.time_to_distance(traj.t, traj.x, distance)
    except analysis.RangeError:
        transit = math.inf
    return peak, transit


@_timed
def check_evr_sweep(fit_result: FitResult, base: CalibrationBase, budget: int) -> Criterion:
    params = apply_params(fit_result.params, base)
    peaks, transits, ok = [], [], budget <= 5000
    parts = []
    for (e, v_ref), (_, d, t_ref) in zip(REF_PEAKS, REF_TRANSIT):
        peak, transit = swim_metrics(params, e, distance=d)
        peaks.append(peak)
        transits.append(transit)
        rp = (peak - v_ref) / v_ref
        rt = (transit - t_ref) / t_ref
        ok &= abs(rp) <= 0.15 and abs(rt) <= 0.20
        parts.append(f"EVR{e}: peak {peak:.3f} ({100 * rp:+.1f}%), transit {transit:.2f} s ({100 * rt:+.1f}%)")
    ok &= all(a < b for a, b in zip(peaks, peaks[1:]))
    source = f"{fit_result.evaluations} evals" if fit_result.evaluations else "stored calibration"
    return Criterion(4, "calibrated EVR sweep", ok, "; ".join(parts) + f"; {source}",
                     data={"peaks": peaks, "transits": transits})


def _ledgers(params, glides, valves=True, em=None, **kw):
    em = em or EnergyModel()
    out = []
    for tg in glides:
        sched = CycleSchedule(t_glide=tg, evr_target=EVR_SWIM, valves=valves)
        out.append(run_scenario(sched, params, em, **kw)[0])
    return out


@_timed
def check_gpf_tradeoff(params: RigidBodyParams) -> Criterion:
    L = _ledgers(params, REF_GLIDES)
    c = [x.cot_specific for x in L]
    v = [x.avg_speed for x in L]
    onset = [x.refill_onset_speed for x in L]
    plateau = sum(v[:3]) / 3
    ok = c[0] >= c[1] >= c[2]
    ok &= (c[2] - c[3]) < (c[1] - c[2])
    ok &= v[3] <= 0.75 * plateau
    ok &= all(a > b for a, b in zip(onset, onset[1:]))
    detail = (f"COT J/m {', '.join(f'{x:.2f}' for x in c)}; avg m/s {', '.join(f'{x:.3f}' for x in v)}; "
              f"GPF75 {100 * (1 - v[3] / plateau):.0f}% below plateau; onset "
              f"{', '.join(f'{x:.3f}' for x in onset)}")
    return Criterion(5, "GPF trade-off trends", ok, detail, data={"cot": c, "avg": v, "onset": onset})


@_timed
def check_valves(params: RigidBodyParams) -> Criterion:
    wv = _ledgers(params, REF_GLIDES, valves=True)
    nv = _ledgers(params, REF_GLIDES, valves=False)
    ok = True
    parts = []
    for k in range(3):
        same_onset = math.isclose(wv[k].refill_onset_speed, nv[k].refill_onset_speed, rel_tol=1e-12)
        ok &= same_onset and nv[k].refill_drop < wv[k].refill_drop and nv[k].avg_speed < wv[k].avg_speed
        parts.append(f"glide {REF_GLIDES[k]}: drop NV {nv[k].refill_drop:.3f} < WV {wv[k].refill_drop:.3f}, "
                     f"avg NV {nv[k].avg_speed:.3f} < WV {wv[k].avg_speed:.3f}")
    short = [math.copysign(1, nv[k].cot_specific - wv[k].cot_specific) for k in range(3)]
    long = math.copysign(1, nv[3].cot_specific - wv[3].cot_specific)
    ok &= len(set(short)) == 1 and long == -short[0]
    parts.append(f"COT NV-WV: {', '.join(f'{nv[k].cot_specific - wv[k].cot_specific:+.2f}' for k in range(4))}")
    return Criterion(6, "valve comparison", ok, "; ".join(parts))


@_timed
def check_multicycle(params: RigidBodyParams) -> Criterion:
    em = EnergyModel()
    cases = {"WV-0": (0.0, True), "WV-1.10": (1.10, True), "NV-1.10": (1.10, False)}
    L = {}
    for name, (tg, valves) in cases.items():
        sched = CycleSchedule(t_glide=tg, evr_target=EVR_SWIM, valves=valves)
        L[name] = run_scenario(sched, params, em, n_cycles=60, distance=COURSE)[0]
    ok = L["WV-0"].avg_speed > L["WV-1.10"].avg_speed
    ok &= L["NV-1.10"].cot_specific < L["WV-1.10"].cot_specific < L["WV-0"].cot_specific
    detail = "; ".join(f"{k}: avg {x.avg_speed:.3f} m/s, COT {x.cot_specific:.2f} J/m" for k, x in L.items())
    return Criterion(7, "multi-cycle ordering", ok, detail,
                     data={k: (x.avg_speed, x.cot_specific) for k, x in L.items()})


@_timed
def check_asymptotic_cot(params: RigidBodyParams, grid_step: float = 0.1) -> Criterion:
    c10, c30 = (x.cot_specific for x in _ledgers(params, (10.0, 30.0)))
    base = Scenario(schedule=CycleSchedule(evr_target=EVR_SWIM), params=params)
    opt = find_optimum("min_cot", "glide", (0.0, 10.0), base)
    grid = np.round(np.arange(0.0, 10.0 + 1e-9, grid_step), 10)
    cots = [x.cot_specific for x in _ledgers(params, grid)]
    k = int(np.argmin(cots))
    ok = c30 > c10 and not opt.boundary and 0 < k < len(grid) - 1
    ok &= abs(opt.value - grid[k]) <= 2 * grid_step and opt.objective <= cots[k] * (1 + 1e-3)
    detail = (f"COT(30 s) {c30:.2f} > COT(10 s) {c10:.2f}; golden-section min at {opt.value:.2f} s "
              f"({opt.objective:.3f} J/m), grid min at {grid[k]:.1f} s ({cots[k]:.3f} J/m)")
    return Criterion(8, "asymptotic COT", ok, detail)


def glide_energy_closure(params: RigidBodyParams, dt: float = 1e-3, t_glide: float = 1.10):
    """Relative mismatch between kinetic-energy loss and drag work over the glide."""
    sched = CycleSchedule(t_glide=t_glide, evr_target=EVR_SWIM)
    traj = simulate(sched, params, dt=dt)
    i0 = int(round(sched.t_expulsion / dt))
    i1 = i0 + int(round(t_glide / dt))
    s = traj.s[i0]
    m = params.m_struct + params.hydro.rho * params.geometry.V_tot * (1 - s + params.hydro.c_added)
    v = traj.v[i0:i1 + 1]
    ke_loss = 0.5 * m * (v[0] ** 2 - v[-1] ** 2)
    power = 0.5 * params.hydro.rho * cda_at(s, params.hydro) * np.abs(v) ** 3
    work = simpson(power, x=traj.t[i0:i1 + 1])
    return abs(ke_loss - work) / work


@_timed
def check_numerics(params: RigidBodyParams) -> Criterion:
    sched = CycleSchedule(t_glide=1.10, evr_target=EVR_SWIM)
    x1 = simulate(sched, params, n_cycles=3, dt=1e-3)
    x2 = simulate(sched, params, n_cycles=3, dt=5e-4)
    conv = abs(x1.x[-1] - x2.x[-1]) / abs(x2.x[-1])
    closure = glide_energy_closure(params)
    again = simulate(sched, params, n_cycles=3, dt=1e-3)
    same = all(np.array_equal(getattr(x1, c), getattr(again, c)) for c in ("t", "x", "v", "s", "V"))
    same &= x1.phase == again.phase
    ok = conv < 1e-4 and closure < 1e-3 and same
    return Criterion(9, "numerical hygiene", ok,
                     f"dt-halving change {conv:.2e} (tol 1e-4); glide energy closure {closure:.2e} "
                     f"(tol 1e-3); deterministic={same}")


@_timed
def check_analysis() -> Criterion:
    t = np.linspace(0.0, 2.9, 88)
    tr = analysis.Trace(t, 0.5 / 2.9 * t)
    rep = analysis.metrics(tr, query_distance=0.5)
    exact = math.isclose(rep.peak_speed, rep.avg_speed, rel_tol=1e-12)
    three_sf = f"{rep.avg_speed:.3g}" == "0.172"
    buf = io.StringIO()
    analysis.emit(tr, buf)
    back = analysis.ingest(io.StringIO(buf.getvalue()))
    identity = np.array_equal(back.t, tr.t) and np.array_equal(back.x, tr.x)
    ok = exact and three_sf and identity and math.isclose(rep.time_to_distance, 2.9, rel_tol=1e-12)
    return Criterion(10, "analysis oracle", ok,
                     f"peak=avg {exact}; 0.5 m / 2.9 s = {rep.avg_speed:.3g} m/s; round trip {identity}")


def run_all(budget: int = 5000, jobs: int = 1, fit_result: FitResult | None = None,
              base: CalibrationBase | None = None, log=print):
    """Run every criterion; fits the published targets unless ``fit_result`` is given."""
    base = base or CalibrationBase()
    results = [check_formulas(), check_geometry()]
    for c in results:
        log(c.line())
    if fit_result is None:
        fit_result = fit(published_targets(), base, budget=budget, jobs=jobs)
    params = apply_params(fit_result.params, base)
    steps = [
        lambda: check_fall_closure(params),
        lambda: check_evr_sweep(fit_result, base, budget),
        lambda: check_gpf_tradeoff(params),
        lambda: check_valves(params),
        lambda: check_multicycle(params),
        lambda: check_asymptotic_cot(params),
        lambda: check_numerics(params),
        check_analysis,
    ]
    for step in steps:
        c = step()
        log(c.line())
        results.append(c)
    return results

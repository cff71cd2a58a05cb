"""Fit the physically unreported parameters to measured speed targets.

The fitted vector is (V_tot, A_nozzle, c_suction, cda_scale,
cda_mantle_fraction). Observables are the first-cycle peak speed and the
multi-cycle time to cover a fixed distance for each expelled volume ratio,
plus optional refill onset/end speeds. Fitting is a coarse grid over the
normalised box followed by bounded Nelder-Mead from the best grid point.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .cycle import glide_for_gpf
from .dynamics import RigidBodyParams, simulate
from .errors import DomainError, PulsejetError
from .hydro import default_cda_table
from .schedule import CycleSchedule

FAULT_LOSS = 1e6
# residual charged when a transit distance is never reached
UNREACHED_RESIDUAL = 10.0
MAX_TRANSIT_CYCLES = 30


@dataclass(frozen=True)
class ParamSpec:
    name: str
    lower: float
    upper: float
    log: bool = False

    def to_unit(self, value):
        if self.log:
            return math.log(value / self.lower) / math.log(self.upper / self.lower)
        return (value - self.lower) / (self.upper - self.lower)

    def from_unit(self, u):
        u = min(1.0, max(0.0, float(u)))
        if self.log:
            return self.lower * (self.upper / self.lower) ** u
        return self.lower + u * (self.upper - self.lower)


PARAMS = (
    ParamSpec("V_tot", 0.1e-3, 1.5e-3, log=True),
    ParamSpec("A_nozzle", 0.2e-4, 5e-4, log=True),
    ParamSpec("c_suction", 0.0, 5.0),
    ParamSpec("cda_scale", 0.3, 3.0, log=True),
    ParamSpec("cda_mantle_fraction", 0.3, 1.0),
)
PARAM_NAMES = tuple(p.name for p in PARAMS)

# output of fit(CalibrationTargets(), CalibrationBase()) with the default budget
CALIBRATED = {
    "V_tot": 0.10000e-3,
    "A_nozzle": 0.25209e-4,
    "c_suction": 0.00039,
    "cda_scale": 1.6334,
    "cda_mantle_fraction": 0.30001,
}


@dataclass(frozen=True)
class CalibrationTargets:
    """Published-style targets: peak speeds, transit times and refill speeds.

    ``peak_speeds`` holds (EVR %, m/s); ``transit`` holds (EVR %, distance m,
    time s); ``refill_speeds`` holds (GPF %, onset m/s or None, end m/s or None).
    """

    peak_speeds: tuple = ((25, 0.21), (50, 0.33), (75, 0.39))
    transit: tuple = ((25, 0.5, 2.9), (50, 0.5, 2.2), (75, 0.5, 2.1))
    refill_speeds: tuple = ()
    weights: dict = field(default_factory=lambda: {"peak": 1.0, "transit": 1.0, "refill": 1.0})

    def __post_init__(self):
        for evr, v in self.peak_speeds:
            if not v > 0:
                raise DomainError(f"peak speed target must be positive, got {v} at EVR {evr}")
        for evr, d, t in self.transit:
            if not (d > 0 and t > 0):
                raise DomainError(f"transit target needs positive distance and time, got {d}, {t}")
        for g, onset, end in self.refill_speeds:
            for v in (onset, end):
                if v is not None and not v > 0:
                    raise DomainError(f"refill speed target must be positive, got {v}")


@dataclass(frozen=True)
class CalibrationBase:
    """Fixed parts of the model while fitting."""

    params: RigidBodyParams = field(default_factory=RigidBodyParams)
    schedule: CycleSchedule = field(default_factory=CycleSchedule)
    cd: float = 1.0
    dt: float = 2e-3


@dataclass
class FitResult:
    params: dict
    residuals: dict
    loss: float
    evaluations: int
    converged: bool
    history: list
    fault: bool = False

    @property
    def vector(self):
        return np.array([self.params[n] for n in PARAM_NAMES])


def apply_params(values: dict, base: CalibrationBase) -> RigidBodyParams:
    """Rigid-body parameters with the fitted quantities substituted in."""
    p = base.params
    geom = p.geometry
    g_changes = {k: values[k] for k in ("V_tot", "A_nozzle") if k in values}
    if g_changes:
        geom = replace(geom, **g_changes)
    hydro = p.hydro
    if "cda_scale" in values or "cda_mantle_fraction" in values:
        table = default_cda_table(geom, base.cd, values.get("cda_scale", 1.0),
                                  values.get("cda_mantle_fraction", 1.0))
        hydro = replace(hydro, cda_table=table)
    if "c_suction" in values:
        hydro = replace(hydro, c_suction=values["c_suction"])
    return replace(p, geometry=geom, hydro=hydro)


def calibrated_params(base: CalibrationBase | None = None) -> RigidBodyParams:
    return apply_params(CALIBRATED, base or CalibrationBase())


def _check_bounds(values: dict):
    for spec in PARAMS:
        if spec.name in values:
            v = values[spec.name]
            if not spec.lower <= v <= spec.upper:
                raise DomainError(f"{spec.name}={v!r} outside [{spec.lower}, {spec.upper}]")


def _time_to(traj, distance):
    x = traj.x
    k = int(np.searchsorted(x, distance))
    if k >= len(x):
        return None
    if k == 0:
        return 0.0
    return float(traj.t[k - 1] + (distance - x[k - 1]) / (x[k] - x[k - 1]) * traj.dt)


def observables(p: RigidBodyParams, targets: CalibrationTargets, base: CalibrationBase):
    """Simulated counterparts of every target, keyed by residual label."""
    out = {}
    sched = base.schedule
    evrs = sorted({e for e, _ in targets.peak_speeds} | {e for e, _, _ in targets.transit})
    for e in evrs:
        dists = [d for ee, d, _ in targets.transit if ee == e]
        sc = sched.with_(evr_target=e / 100.0, t_glide=0.0)
        if dists:
            traj = simulate(sc, p, n_cycles=MAX_TRANSIT_CYCLES, dt=base.dt,
                            stop_at_distance=max(dists))
        else:
            traj = simulate(sc, p, n_cycles=1, dt=base.dt)
        n1 = int(round(sc.period / base.dt)) + 1
        out[f"peak@{e:g}"] = float(np.max(traj.v[:n1]))
        for d in dists:
            out[f"transit@{e:g}:{d:g}"] = _time_to(traj, d)
    for g, onset, end in targets.refill_speeds:
        tg = glide_for_gpf(g, sched.t_expulsion, sched.t_refill, base.dt)
        traj = simulate(sched.with_(t_glide=tg), p, n_cycles=1, dt=base.dt)
        i_ref = int(round((sched.t_expulsion + tg) / base.dt))
        if onset is not None:
            out[f"onset@{g:g}"] = float(traj.v[i_ref])
        if end is not None:
            out[f"end@{g:g}"] = float(traj.v[-1])
    return out


def _target_items(targets: CalibrationTargets):
    w = targets.weights
    for e, v in targets.peak_speeds:
        yield f"peak@{e:g}", v, w.get("peak", 1.0)
    for e, d, t in targets.transit:
        yield f"transit@{e:g}:{d:g}", t, w.get("transit", 1.0)
    for g, onset, end in targets.refill_speeds:
        if onset is not None:
            yield f"onset@{g:g}", onset, w.get("refill", 1.0)
        if end is not None:
            yield f"end@{g:g}", end, w.get("refill", 1.0)


def evaluate(values: dict, targets: CalibrationTargets, base: CalibrationBase):
    """``(loss, residuals, fault)`` for a full parameter dict."""
    _check_bounds(values)
    try:
        obs = observables(apply_params(values, base), targets, base)
    except PulsejetError:
        return FAULT_LOSS, {}, True
    residuals = {}
    terms = []
    for label, target, weight in _target_items(targets):
        sim = obs.get(label)
        r = UNREACHED_RESIDUAL if sim is None else (sim - target) / target
        residuals[label] = r
        terms.append(weight * r * r)
    # fsum keeps the loss independent of target order
    return math.fsum(terms), residuals, False


def loss(values, targets: CalibrationTargets | None = None, base: CalibrationBase | None = None) -> float:
    """Weighted sum of squared relative residuals.

    ``values`` is a dict keyed by parameter name or a vector in
    ``PARAM_NAMES`` order.
    """
    if not isinstance(values, dict):
        values = dict(zip(PARAM_NAMES, map(float, values)))
    return evaluate(values, targets or CalibrationTargets(), base or CalibrationBase())[0]


class _BudgetExhausted(Exception):
    pass


def _grid_points(n_per: int, dim: int):
    axis = np.linspace(0.0, 1.0, n_per)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _grid_eval(args):
    values, targets, base = args
    return evaluate(values, targets, base)[0]


def fit(targets: CalibrationTargets | None = None, base: CalibrationBase | None = None,
        budget: int = 5000, free=PARAM_NAMES, fixed: dict | None = None,
        grid_per_dim: int = 5, jobs: int = 1, rel_tol: float = 1e-6) -> FitResult:
    """Grid-seeded bounded Nelder-Mead over the ``free`` parameters.

    Parameters not in ``free`` take their value from ``fixed`` (default: the
    calibrated set). The grid shrinks below ``grid_per_dim`` points per axis
    when it would use more than three quarters of ``budget``. Running out of
    budget is reported through ``converged=False``, never raised.
    """
    targets = targets or CalibrationTargets()
    base = base or CalibrationBase()
    if budget < 100:
        raise DomainError(f"budget must be at least 100 evaluations, got {budget}")
    specs = [s for s in PARAMS if s.name in free]
    if len(specs) != len(free):
        raise DomainError(f"unknown parameter in {free}; expected names from {PARAM_NAMES}")
    fixed_values = dict(CALIBRATED)
    fixed_values.update(fixed or {})
    dim = len(specs)

    def to_values(u):
        vals = dict(fixed_values)
        vals.update({s.name: s.from_unit(ui) for s, ui in zip(specs, u)})
        return vals

    state = {"n": 0, "best": (math.inf, None)}
    history = []

    def record(u, f):
        state["n"] += 1
        if f < state["best"][0]:
            state["best"] = (f, np.array(u, dtype=float))
        history.append((state["n"], f))

    n_per = grid_per_dim
    while n_per > 2 and n_per ** dim > 0.75 * budget:
        n_per -= 1
    grid = _grid_points(n_per, dim)[: budget]
    tasks = [(to_values(u), targets, base) for u in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            values = list(pool.map(_grid_eval, tasks, chunksize=16))
    else:
        values = [_grid_eval(t) for t in tasks]
    for u, f in zip(grid, values):
        record(u, f)

    def objective(u):
        if state["n"] >= budget:
            raise _BudgetExhausted
        f = evaluate(to_values(u), targets, base)[0]
        record(u, f)
        # log turns the absolute simplex tolerance into a relative one
        return math.log(f + 1e-12)

    converged = False
    try:
        res = minimize(objective, state["best"][1], method="Nelder-Mead",
                       bounds=[(0.0, 1.0)] * dim,
                       options={"xatol": 1e-4, "fatol": rel_tol, "maxfev": 10 ** 9,
                                "adaptive": dim > 2})
        converged = bool(res.success)
    except _BudgetExhausted:
        converged = False

    u_best = state["best"][1]
    best_values = to_values(u_best)
    f, residuals, fault = evaluate(best_values, targets, base)
    return FitResult(params=best_values, residuals=residuals, loss=f, evaluations=state["n"],
                     converged=converged, history=history, fault=fault)


def write_fit_report(result: FitResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["parameter", "value", "lower", "upper"])
        for spec in PARAMS:
            w.writerow([spec.name, repr(result.params[spec.name]), repr(spec.lower), repr(spec.upper)])


def write_fit_log(result: FitResult, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "loss"])
        for i, f in result.history:
            w.writerow([i, repr(f)])

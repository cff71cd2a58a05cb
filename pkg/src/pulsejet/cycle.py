"""Cycle bookkeeping: EVR/GPF, phase energies, cost of transport and sweeps."""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import Phase, RigidBodyParams, Trajectory, simulate
from .errors import DomainError, PulsejetError
from .schedule import T_PHASE_DEFAULT, CycleSchedule

G = 9.81

__all__ = [
    "CycleSchedule", "EnergyModel", "EnergyLedger", "Scenario", "SweepRow", "OptimumResult",
    "evr", "gpf", "glide_for_gpf", "phase_energies", "cycle_energy", "cot", "run_scenario",
    "sweep", "write_sweep_csv", "golden_section", "find_optimum",
]


@dataclass(frozen=True)
class EnergyModel:
    """Measured phase energies of the servo-driven mantle.

    ``m_ref=None`` normalises the dimensionless COT by the effective
    expanded mass of the body being simulated.
    """

    E_expulsion: float = 2.2
    E_refill: float = 0.4
    P_hold: float = 0.364
    m_ref: float | None = None
    g: float = G
    t_refill_ref: float = T_PHASE_DEFAULT

    def __post_init__(self):
        for name in ("E_expulsion", "E_refill", "P_hold", "g", "t_refill_ref"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")
        if self.m_ref is not None and self.m_ref <= 0:
            raise DomainError("m_ref must be positive")


@dataclass
class EnergyLedger:
    E_expulsion: float
    E_glide: float
    E_refill: float
    E_total: float
    distance: float
    duration: float
    avg_speed: float
    peak_speed: float
    refill_onset_speed: float
    refill_drop: float
    end_speed: float
    cot_specific: float
    cot_dimensionless: float
    gpf_pct: float
    evr_pct: float
    n_cycles: int
    status: str = "ok"


def evr(V_exp: float, V_tot: float) -> float:
    """Expelled volume ratio in percent."""
    if not V_tot > 0:
        raise DomainError(f"V_tot must be positive, got {V_tot}")
    if not 0 <= V_exp <= V_tot:
        raise DomainError(f"V_exp={V_exp} outside [0, V_tot={V_tot}]")
    return 100.0 * V_exp / V_tot


def gpf(sched: CycleSchedule) -> float:
    """Glide-phase fraction in percent."""
    if not (sched.t_expulsion > 0 and sched.t_refill > 0):
        raise DomainError("expulsion and refill durations must be positive")
    return 100.0 * sched.t_glide / (sched.t_expulsion + sched.t_glide + sched.t_refill)


def glide_for_gpf(gpf_pct: float, t_expulsion: float, t_refill: float, dt: float | None = None):
    """Glide duration giving ``gpf_pct``, optionally snapped to the ``dt`` grid."""
    if not 0 <= gpf_pct < 100:
        raise DomainError(f"GPF must be in [0, 100), got {gpf_pct}")
    t = gpf_pct / (100.0 - gpf_pct) * (t_expulsion + t_refill)
    if dt is not None:
        t = round(t / dt) * dt
    return t


def phase_energies(sched: CycleSchedule, em: EnergyModel):
    """(expulsion, glide, refill) energy of one cycle.

    Refill longer than the reference duration is charged at the hold power
    for the extra time.
    """
    extra = max(0.0, sched.t_refill - em.t_refill_ref)
    return em.E_expulsion, em.P_hold * sched.t_glide, em.E_refill + em.P_hold * extra


def cycle_energy(sched: CycleSchedule, em: EnergyModel) -> float:
    return sum(phase_energies(sched, em))


def cot(energy: float, distance: float, m_ref: float, g: float = G):
    """Cost of transport as ``(dimensionless, J/m)``."""
    if not distance > 0:
        raise DomainError(f"distance must be positive, got {distance}")
    specific = energy / distance
    return specific / (m_ref * g), specific


def _energy_until(sched: CycleSchedule, em: EnergyModel, T: float):
    """Phase energies accrued by time T, spread uniformly over each phase."""
    per = phase_energies(sched, em)
    durs = (sched.t_expulsion, sched.t_glide, sched.t_refill)
    n_full = int(math.floor(T / sched.period + 1e-12))
    rem = T - n_full * sched.period
    out = [n_full * e for e in per]
    for k, (e, d) in enumerate(zip(per, durs)):
        if d <= 0 or rem <= 0:
            continue
        used = min(rem, d)
        out[k] += e * used / d
        rem -= d
    return out


def _time_to_distance(traj: Trajectory, distance: float):
    x, t = traj.x, traj.t
    k = int(np.searchsorted(x, distance, side="left"))
    if k == 0:
        return float(t[0])
    if k >= len(x):
        return None
    return float(t[k - 1] + (distance - x[k - 1]) / (x[k] - x[k - 1]) * (t[k] - t[k - 1]))


@dataclass(frozen=True)
class Scenario:
    """Everything needed for one evaluated point."""

    schedule: CycleSchedule = field(default_factory=CycleSchedule)
    params: RigidBodyParams = field(default_factory=RigidBodyParams)
    energy: EnergyModel = field(default_factory=EnergyModel)
    n_cycles: int = 1
    dt: float = 1e-3
    distance: float | None = None


def run_scenario(sched: CycleSchedule, params: RigidBodyParams, em: EnergyModel | None = None,
                 n_cycles: int = 1, dt: float = 1e-3, distance: float | None = None):
    """Simulate and build the energy ledger.

    With ``distance`` the run is a course: cycles repeat (at most
    ``n_cycles``) until the body covers ``distance``, and energy and time
    are counted up to the interpolated crossing instant.
    Returns ``(ledger, trajectory)``.
    """
    em = em or EnergyModel()
    traj = simulate(sched, params, n_cycles=n_cycles, dt=dt, stop_at_distance=distance)
    if distance is not None:
        T = _time_to_distance(traj, distance)
        if T is None:
            raise DomainError(f"course of {distance} m not completed within {n_cycles} cycles")
        d = float(distance)
        cycles = int(math.ceil(T / sched.period - 1e-9))
    else:
        T = float(traj.t[-1])
        d = float(traj.x[-1] - traj.x[0])
        cycles = n_cycles
    e_exp, e_gl, e_ref = _energy_until(sched, em, T)
    E = e_exp + e_gl + e_ref

    onset = drop = float("nan")
    for idx, _, _, to in traj.transitions:
        if to == Phase.REFILL:
            onset = float(traj.v[idx])
            j = min(idx + int(round(T_PHASE_DEFAULT / dt)), len(traj) - 1)
            drop = onset - float(traj.v[j])
            break

    m_ref = em.m_ref
    if m_ref is None:
        p = params
        m_ref = p.m_struct + p.hydro.rho * p.geometry.V_tot * (1 + p.hydro.c_added)
    status = "ok"
    if d > 0:
        cot_dim, cot_spec = cot(E, d, m_ref, em.g)
        avg = d / T
    else:
        cot_dim = cot_spec = float("nan")
        avg = d / T if T > 0 else float("nan")
        status = "zero_distance"
    ledger = EnergyLedger(
        E_expulsion=e_exp, E_glide=e_gl, E_refill=e_ref, E_total=E,
        distance=d, duration=T, avg_speed=avg,
        peak_speed=float(np.max(traj.v)), refill_onset_speed=onset, refill_drop=drop,
        end_speed=float(traj.v[-1]), cot_specific=cot_spec, cot_dimensionless=cot_dim,
        gpf_pct=gpf(sched), evr_pct=100.0 * sched.evr_target, n_cycles=cycles, status=status,
    )
    return ledger, traj


SWEEP_VARIABLES = ("gpf", "evr", "glide")


def _apply(variable: str, value: float, base: Scenario) -> Scenario:
    s = base.schedule
    if variable == "gpf":
        tg = glide_for_gpf(value, s.t_expulsion, s.t_refill, base.dt)
        return replace(base, schedule=s.with_(t_glide=tg))
    if variable == "evr":
        return replace(base, schedule=s.with_(evr_target=value / 100.0))
    if variable == "glide":
        return replace(base, schedule=s.with_(t_glide=round(value / base.dt) * base.dt))
    raise DomainError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")


@dataclass
class SweepRow:
    value: float
    ledger: EnergyLedger | None
    status: str


def _eval_point(args):
    variable, value, base = args
    try:
        sc = _apply(variable, value, base)
        ledger, _ = run_scenario(sc.schedule, sc.params, sc.energy, sc.n_cycles, sc.dt, sc.distance)
        return SweepRow(value, ledger, ledger.status)
    except PulsejetError as exc:
        return SweepRow(value, None, f"error: {exc}")


def sweep(variable: str, grid, base: Scenario, jobs: int = 1):
    """One ledger per grid value, in grid order. Per-point errors land in ``status``."""
    grid = list(grid)
    if not grid:
        raise DomainError("sweep grid is empty")
    variable = variable.lower()
    if variable not in SWEEP_VARIABLES:
        raise DomainError(f"unknown sweep variable {variable!r}; expected one of {SWEEP_VARIABLES}")
    tasks = [(variable, float(v), base) for v in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_eval_point, tasks))
    return [_eval_point(t) for t in tasks]


SWEEP_COLUMNS = ["variable_value", "gpf_pct", "evr_pct", "distance_m", "duration_s", "avg_speed_mps",
                 "peak_speed_mps", "refill_onset_mps", "E_total_J", "cot_J_per_m",
                 "cot_dimensionless", "status"]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            L = r.ledger
            if L is None:
                w.writerow([repr(r.value)] + [""] * 10 + [r.status])
                continue
            w.writerow([repr(r.value)] + [repr(float(v)) for v in (
                L.gpf_pct, L.evr_pct, L.distance, L.duration, L.avg_speed, L.peak_speed,
                L.refill_onset_speed, L.E_total, L.cot_specific, L.cot_dimensionless)] + [r.status])


INV_PHI = (math.sqrt(5) - 1) / 2


def golden_section(f, a: float, b: float, tol: float = 0.01):
    """Minimise ``f`` on [a, b]; ``tol`` is relative to the bracket width.

    Returns ``(x_best, f_best, evaluations, flat)`` where ``flat`` marks an
    objective that never varied (the midpoint is then returned).
    """
    width = b - a
    a0, b0 = a, b
    if width < 0:
        raise DomainError(f"invalid bracket [{a}, {b}]")
    seen = []

    def fe(x):
        y = f(x)
        seen.append((x, y))
        return y

    if width == 0:
        return a, fe(a), seen, False
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = fe(c), fe(d)
    while (b - a) > tol * width:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = fe(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = fe(d)
    ys = [y for _, y in seen]
    if max(ys) - min(ys) <= 1e-12 * max(1.0, abs(max(ys))):
        mid = 0.5 * (a0 + b0)
        return mid, ys[0], seen, True
    x_best, y_best = min(seen, key=lambda p: p[1])
    return x_best, y_best, seen, False


@dataclass
class OptimumResult:
    value: float
    ledger: EnergyLedger | None
    objective: float
    boundary: bool
    flat: bool
    evaluations: list


OBJECTIVES = ("min_cot", "max_avg_speed")


def find_optimum(objective: str, variable: str, bracket, base: Scenario, tol: float = 0.01):
    """Golden-section search of a scalar schedule variable."""
    objective = objective.lower()
    if objective not in OBJECTIVES:
        raise DomainError(f"unknown objective {objective!r}; expected one of {OBJECTIVES}")
    lo, hi = map(float, bracket)
    if hi < lo:
        raise DomainError(f"invalid bracket {bracket}")
    cache = {}

    def f(x):
        if x not in cache:
            row = _eval_point((variable, x, base))
            L = row.ledger
            if L is None or L.status != "ok":
                cache[x] = (math.inf, L)
            else:
                y = L.cot_specific if objective == "min_cot" else -L.avg_speed
                cache[x] = (y, L)
        return cache[x][0]

    x, y, seen, flat = golden_section(f, lo, hi, tol)
    if flat:
        y = f(x)
    else:
        # a monotone objective drives the search to an end of the bracket
        for end in (lo, hi):
            if f(end) < y:
                x, y = end, f(end)
    boundary = flat or min(abs(x - lo), abs(x - hi)) <= tol * (hi - lo)
    sign = 1.0 if objective == "min_cot" else -1.0
    return OptimumResult(x, cache[x][1], sign * y, boundary, flat,
                         sorted((k, sign * v[0]) for k, v in cache.items()))

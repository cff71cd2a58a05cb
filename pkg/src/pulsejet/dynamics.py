"""One-degree-of-freedom variable-mass surge dynamics.

The body carries the water in its cavity, so its mass follows the cavity
volume. Jet thrust is the quasi-steady momentum flux through the nozzle;
during refill the body pays the momentum given to the entrained water plus
an inlet-restriction loss. Integration is classical RK4 on a fixed grid.
Every known kink of the actuation profile is resolved by sub-stepping, so
the trajectory is still reported on the ``dt`` grid.
"""

from __future__ import annotations

import csv
import enum
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, IntegrationFault
from .geometry import MantleGeometry, cavity_volume
from .hydro import HydroParams, cda_at, drag_force
from .schedule import CycleSchedule

# speed scale for the smooth sign of the suction loss
SUCTION_SIGN_EPS = 0.005


class Phase(str, enum.Enum):
    EXPULSION = "Expulsion"
    GLIDE = "Glide"
    REFILL = "Refill"
    HOLD = "Hold"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class BodyState:
    t: float
    x: float
    v: float
    s: float
    V: float
    phase: Phase


@dataclass(frozen=True)
class RigidBodyParams:
    m_struct: float = 0.55
    geometry: MantleGeometry = field(default_factory=MantleGeometry)
    hydro: HydroParams = field(default_factory=HydroParams)

    def __post_init__(self):
        if not self.m_struct > 0:
            raise ConfigurationError(f"m_struct must be positive, got {self.m_struct}")

    @property
    def inlet_area_valves(self) -> float:
        return self.geometry.A_nozzle + self.geometry.A_valve

    def inlet_area(self, valves: bool) -> float:
        return self.inlet_area_valves if valves else self.geometry.A_nozzle


@dataclass
class Trajectory:
    """Sampled states on the ``dt`` grid.

    Columns are numpy arrays; ``phase[i]`` is the commanded phase of the
    interval starting at sample ``i``. ``transitions`` holds
    ``(index, t, from_phase, to_phase)`` for every commanded phase change.
    """

    t: np.ndarray
    x: np.ndarray
    v: np.ndarray
    s: np.ndarray
    V: np.ndarray
    phase: list
    transitions: list
    dt: float
    cycle_starts: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def __getitem__(self, i) -> BodyState:
        return BodyState(float(self.t[i]), float(self.x[i]), float(self.v[i]),
                         float(self.s[i]), float(self.V[i]), self.phase[i])

    def states(self):
        return (self[i] for i in range(len(self)))

    @property
    def final(self) -> BodyState:
        return self[len(self) - 1]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t_s", "x_m", "v_mps", "s", "V_m3", "phase"])
            for i in range(len(self)):
                w.writerow([repr(float(self.t[i])), repr(float(self.x[i])), repr(float(self.v[i])),
                            repr(float(self.s[i])), repr(float(self.V[i])), self.phase[i].value])


def effective_mass(state: BodyState, p: RigidBodyParams) -> float:
    rho = p.hydro.rho
    return p.m_struct + rho * state.V + p.hydro.c_added * rho * p.geometry.V_tot


def expulsion_force(state: BodyState, Q: float, p: RigidBodyParams) -> float:
    """Jet thrust ``rho Q^2 / A_nozzle`` less drag at the current contraction."""
    if Q < 0:
        raise DomainError(f"expulsion flow must be non-negative, got {Q}")
    if p.geometry.A_nozzle <= 0:
        raise ConfigurationError("A_nozzle must be positive")
    rho = p.hydro.rho
    thrust = rho * Q * Q / p.geometry.A_nozzle
    return thrust - drag_force(rho, cda_at(state.s, p.hydro), state.v)


def glide_force(state: BodyState, p: RigidBodyParams) -> float:
    return -drag_force(p.hydro.rho, cda_at(state.s, p.hydro), state.v)


def _smooth_sign(v):
    return v / math.sqrt(v * v + SUCTION_SIGN_EPS * SUCTION_SIGN_EPS)


def refill_force(state: BodyState, Q_in: float, A_in: float, p: RigidBodyParams) -> float:
    """Momentum transfer to the entrained water, inlet loss and drag.

    The momentum term ``rho Q_in v`` and the loss ``c_suction rho Q_in^2 / A_in``
    both oppose motion; the loss uses a smoothed sign so it cannot reverse
    a body that is at rest.
    """
    if Q_in < 0:
        raise DomainError(f"refill flow must be non-negative, got {Q_in}")
    if not A_in > 0:
        raise ConfigurationError(f"inlet area must be positive, got {A_in}")
    rho = p.hydro.rho
    v = state.v
    momentum = rho * Q_in * v
    suction = p.hydro.c_suction * rho * Q_in * Q_in / A_in * _smooth_sign(v)
    return -momentum - suction - drag_force(rho, cda_at(state.s, p.hydro), v)


@dataclass(frozen=True)
class _Window:
    """One commanded phase: stroke from s0 to s1 over ``stroke`` seconds, then hold."""

    phase: Phase
    t0: float
    t1: float
    s0: float
    s1: float
    stroke: float
    smooth: bool

    def s_rate(self, t):
        """(s, ds/dt) at time t inside the window."""
        if self.stroke <= 0 or self.s0 == self.s1:
            return self.s1, 0.0
        u = (t - self.t0) / self.stroke
        if u >= 1.0:
            return self.s1, 0.0
        if u < 0.0:
            u = 0.0
        ds = self.s1 - self.s0
        if self.smooth:
            return self.s0 + ds * u * u * (3 - 2 * u), ds * 6 * u * (1 - u) / self.stroke
        return self.s0 + ds * u, ds / self.stroke


def _stroke_time(profile, evr, s_max, duration):
    if profile == "rate_limited":
        stroke = duration * evr / s_max
        # a vanishing stroke would overflow the normalised time
        return stroke if stroke > 1e-12 else 0.0
    return duration


def _cycle_windows(schedule: CycleSchedule, geom: MantleGeometry, steps, i_start: int, dt: float):
    """Windows of one cycle; ``steps`` are the phase lengths in grid steps."""
    evr = schedule.evr_target
    smooth = schedule.profile == "smoothstep"
    durations = (schedule.t_expulsion, schedule.t_glide, schedule.t_refill)
    plan = ((Phase.EXPULSION, 0.0, evr), (Phase.GLIDE, evr, evr), (Phase.REFILL, evr, 0.0))
    out = []
    i = i_start
    for (phase, s0, s1), n, dur in zip(plan, steps, durations):
        if n == 0:
            continue
        stroke = 0.0 if phase == Phase.GLIDE else _stroke_time(schedule.profile, evr, geom.s_max, dur)
        out.append((i, i + n, _Window(phase, i * dt, (i + n) * dt, s0, s1, stroke, smooth)))
        i += n
    return out


def _check_grid(duration, dt, name):
    n = round(duration / dt)
    if abs(n * dt - duration) > 1e-9:
        raise ConfigurationError(f"{name}={duration} s is not a multiple of dt={dt} s")
    return n


def simulate(schedule: CycleSchedule, p: RigidBodyParams, n_cycles: int = 1, dt: float = 1e-3,
             v0: float = 0.0, stop_at_distance: float | None = None) -> Trajectory:
    """Integrate ``n_cycles`` consecutive cycles starting at x=0.

    With ``stop_at_distance`` integration ends at the first grid sample
    where x reaches that distance, or after ``n_cycles``, whichever is first.
    """
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if n_cycles < 1:
        raise ConfigurationError(f"n_cycles must be >= 1, got {n_cycles}")
    geom = p.geometry
    if schedule.evr_target > geom.s_max:
        raise ConfigurationError(f"evr_target {schedule.evr_target} exceeds s_max {geom.s_max}")
    steps = (_check_grid(schedule.t_expulsion, dt, "t_expulsion"),
             _check_grid(schedule.t_glide, dt, "t_glide"),
             _check_grid(schedule.t_refill, dt, "t_refill"))
    steps_cycle = sum(steps)
    windows = []
    for k in range(n_cycles):
        windows.extend(_cycle_windows(schedule, geom, steps, k * steps_cycle, dt))
    per_cycle = len(windows) // n_cycles
    n_steps = n_cycles * steps_cycle

    rho = p.hydro.rho
    V_tot = geom.V_tot
    m_fixed = p.m_struct + p.hydro.c_added * rho * V_tot
    A_noz = geom.A_nozzle
    A_in = p.inlet_area(schedule.valves)
    c_suc = p.hydro.c_suction
    eps2 = SUCTION_SIGN_EPS * SUCTION_SIGN_EPS
    knots = [k for k, _ in p.hydro.cda_table]
    half_rho_cda = [0.5 * rho * c for _, c in p.hydro.cda_table]

    def drag_coef(s):
        # 0.5 rho CdA(s), piecewise linear and clamped
        if s <= knots[0]:
            return half_rho_cda[0]
        if s >= knots[-1]:
            return half_rho_cda[-1]
        j = bisect_right(knots, s)
        w = (s - knots[j - 1]) / (knots[j] - knots[j - 1])
        return half_rho_cda[j - 1] + w * (half_rho_cda[j] - half_rho_cda[j - 1])

    def make_accel(w):
        if w.stroke <= 0 or w.s0 == w.s1:
            k = drag_coef(w.s1)
            m = m_fixed + rho * V_tot * (1.0 - w.s1)

            def accel(t, v):
                return -k * v * abs(v) / m
            return accel

        def accel(t, v):
            s, rate = w.s_rate(t)
            m = m_fixed + rho * V_tot * (1.0 - s)
            f = -drag_coef(s) * v * abs(v)
            if rate > 0.0:  # expulsion: volume leaves the cavity
                q = V_tot * rate
                f += rho * q * q / A_noz
            elif rate < 0.0:  # refill
                q = -V_tot * rate
                f -= rho * q * v + c_suc * rho * q * q / A_in * v / math.sqrt(v * v + eps2)
            return f / m
        return accel

    def rk4(accel, t, x, v, h):
        a1 = accel(t, v)
        v2 = v + 0.5 * h * a1
        a2 = accel(t + 0.5 * h, v2)
        v3 = v + 0.5 * h * a2
        a3 = accel(t + 0.5 * h, v3)
        v4 = v + h * a3
        a4 = accel(t + h, v4)
        return (x + h / 6.0 * (v + 2 * v2 + 2 * v3 + v4),
                v + h / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4))

    ts = np.arange(n_steps + 1) * dt
    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    ss = np.empty(n_steps + 1)
    phases = []
    transitions = []
    cycle_starts = []

    x, v = 0.0, float(v0)
    xs[0], vs[0], ss[0] = x, v, 0.0
    done = 0
    stopped = False
    for wi, (i0, i1, w) in enumerate(windows):
        if wi % per_cycle == 0:
            cycle_starts.append(i0)
        if wi > 0:
            transitions.append((i0, float(ts[i0]), windows[wi - 1][2].phase, w.phase))
        kink = w.t0 + w.stroke if 0 < w.stroke < w.t1 - w.t0 - 1e-12 else None
        accel = make_accel(w)
        for i in range(i0, i1):
            t, t_next = ts[i], ts[i + 1]
            if kink is not None and t >= kink - 1e-12 and w.phase != Phase.GLIDE:
                phases.append(Phase.HOLD)
            else:
                phases.append(w.phase)
            if kink is not None and t + 1e-12 < kink < t_next - 1e-12:
                x, v = rk4(accel, t, x, v, kink - t)
                x, v = rk4(accel, kink, x, v, t_next - kink)
            else:
                x, v = rk4(accel, t, x, v, dt)
            if not (math.isfinite(x) and math.isfinite(v)):
                raise IntegrationFault(f"non-finite state at t={t_next:.6f} s", float(t_next))
            xs[i + 1] = x
            vs[i + 1] = v
            ss[i + 1] = w.s_rate(t_next)[0]
            done = i + 1
            if stop_at_distance is not None and x >= stop_at_distance:
                stopped = True
                break
        if stopped:
            break
    n = done + 1
    phases.append(phases[-1])
    ts, xs, vs, ss = ts[:n], xs[:n], vs[:n], ss[:n]
    return Trajectory(t=ts, x=xs, v=vs, s=ss, V=V_tot * (1.0 - ss), phase=phases[:n],
                      transitions=transitions, dt=dt, cycle_starts=cycle_starts)


def simulate_fall(p: RigidBodyParams, F_net: float, dt: float = 1e-3, duration: float = 60.0,
                  s: float = 0.0) -> Trajectory:
    """Vertical release from rest at fixed contraction ``s``; x and v positive downward."""
    if F_net < 0:
        raise DomainError(f"F_net must be non-negative, got {F_net}")
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    n_steps = _check_grid(duration, dt, "duration")
    V = cavity_volume(s, p.geometry)
    rho = p.hydro.rho
    m = p.m_struct + rho * V + p.hydro.c_added * rho * p.geometry.V_tot
    k = 0.5 * rho * cda_at(s, p.hydro)

    def accel(v):
        return (F_net - k * v * abs(v)) / m

    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    x = v = 0.0
    xs[0] = vs[0] = 0.0
    for i in range(n_steps):
        a1 = accel(v)
        v2 = v + 0.5 * dt * a1
        a2 = accel(v2)
        v3 = v + 0.5 * dt * a2
        a3 = accel(v3)
        v4 = v + dt * a3
        a4 = accel(v4)
        x += dt / 6.0 * (v + 2 * v2 + 2 * v3 + v4)
        v += dt / 6.0 * (a1 + 2 * a2 + 2 * a3 + a4)
        if not (math.isfinite(x) and math.isfinite(v)):
            raise IntegrationFault(f"non-finite state at t={(i + 1) * dt:.6f} s", (i + 1) * dt)
        xs[i + 1] = x
        vs[i + 1] = v
    ts = np.arange(n_steps + 1) * dt
    return Trajectory(t=ts, x=xs, v=vs, s=np.full(n_steps + 1, s), V=np.full(n_steps + 1, V),
                      phase=[Phase.HOLD] * (n_steps + 1), transitions=[], dt=dt, cycle_starts=[0])

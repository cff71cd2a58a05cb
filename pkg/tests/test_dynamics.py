import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pulsejet.dynamics import (BodyState, Phase, RigidBodyParams, effective_mass, expulsion_force,
                               glide_force, refill_force, simulate, simulate_fall)
from pulsejet.errors import ConfigurationError, DomainError, IntegrationFault
from pulsejet.hydro import HydroParams, terminal_velocity
from pulsejet.schedule import CycleSchedule

P = RigidBodyParams()
Q = 375e-6 / 0.55


def state(v=0.0, s=0.0):
    return BodyState(0.0, 0.0, v, s, P.geometry.V_tot * (1 - s), Phase.GLIDE)


def test_effective_mass_examples():
    assert effective_mass(state(s=0.0), P) == pytest.approx(1.05, rel=1e-12)
    assert effective_mass(state(s=0.75), P) == pytest.approx(0.675, rel=1e-12)
    empty = BodyState(0, 0, 0, 0, 0.0, Phase.GLIDE)
    assert effective_mass(empty, P) == P.m_struct


def test_expulsion_force_examples():
    assert expulsion_force(state(), 0.0, P) == 0.0
    assert Q == pytest.approx(6.818e-4, rel=1e-4)
    # 4.648 N is quoted from the rounded flow 6.818e-4 m^3/s
    assert expulsion_force(state(), Q, P) == pytest.approx(4.648, abs=1e-3)
    assert expulsion_force(state(), 6.818e-4, P) == pytest.approx(4.6485, abs=1e-4)


def test_glide_force_examples():
    assert glide_force(state(0.0), P) == 0.0
    assert glide_force(state(0.39), P) == pytest.approx(-0.3628, abs=5e-5)
    assert abs(glide_force(state(0.39, 0.75), P)) < abs(glide_force(state(0.39, 0.0), P))


def test_refill_force_examples():
    no_drag = RigidBodyParams(hydro=HydroParams(cda_table=((0.0, 1e-12),)))
    assert refill_force(state(0.0), 0.0, 5e-4, P) == 0.0
    f = refill_force(state(0.3), Q, 5e-4, no_drag)
    assert f == pytest.approx(-0.2045, abs=5e-5)
    with pytest.raises(ConfigurationError):
        refill_force(state(0.3), Q, 0.0, P)


def test_suction_term_cannot_reverse_a_resting_body():
    p = RigidBodyParams(hydro=HydroParams(c_suction=2.0))
    assert refill_force(state(0.0), Q, 5e-4, p) == 0.0
    assert refill_force(state(0.1), Q, 5e-4, p) < refill_force(state(0.1), Q, 5e-4, P)


def test_zero_evr_stays_at_rest():
    traj = simulate(CycleSchedule(evr_target=0.0), P, n_cycles=2)
    assert not np.any(traj.v) and not np.any(traj.x)


def test_phase_labels_and_grid():
    sched = CycleSchedule(t_glide=0.5, evr_target=0.25)
    traj = simulate(sched, P, dt=1e-3)
    assert len(traj) == 1601
    assert np.allclose(traj.t, np.arange(1601) * 1e-3, rtol=0, atol=1e-15)
    assert [tr[3] for tr in traj.transitions] == [Phase.GLIDE, Phase.REFILL]
    runs = [(k, len(list(g))) for k, g in itertools.groupby(traj.phase)]
    assert runs == [(Phase.EXPULSION, 184), (Phase.HOLD, 366), (Phase.GLIDE, 500),
                    (Phase.REFILL, 184), (Phase.HOLD, 367)]
    # rate-limited stroke: a quarter of the expulsion window at EVR 25 of s_max 75
    assert traj.s[183] == pytest.approx(0.25, abs=2e-3) and traj.s[550] == pytest.approx(0.25)
    assert traj.V[-1] == pytest.approx(P.geometry.V_tot, rel=1e-12)
    assert traj.phase[0] is Phase.EXPULSION


def test_volume_follows_contraction():
    traj = simulate(CycleSchedule(t_glide=0.2), P)
    assert np.allclose(traj.V, P.geometry.V_tot * (1 - traj.s), rtol=1e-12)


@pytest.mark.parametrize("profile", ["constant", "rate_limited", "smoothstep"])
def test_profiles_reach_target(profile):
    traj = simulate(CycleSchedule(evr_target=0.5, profile=profile), P)
    assert traj.s.max() == pytest.approx(0.5, rel=1e-9)
    assert traj.s[-1] == pytest.approx(0.0, abs=1e-12)


def test_calibrated_peak_near_published(calibrated):
    traj = simulate(CycleSchedule(evr_target=0.75), calibrated)
    assert abs(traj.v.max() - 0.39) / 0.39 <= 0.15


def test_dt_halving_convergence(calibrated):
    sched = CycleSchedule(t_glide=1.1)
    a = simulate(sched, calibrated, n_cycles=2, dt=1e-3).x[-1]
    b = simulate(sched, calibrated, n_cycles=2, dt=5e-4).x[-1]
    assert abs(a - b) / abs(b) < 1e-4


def test_stop_at_distance():
    traj = simulate(CycleSchedule(), P, n_cycles=50, stop_at_distance=0.3)
    assert traj.x[-1] >= 0.3 > traj.x[-2]


@pytest.mark.parametrize("kw", [{"dt": 0.0}, {"dt": 3e-4}, {"n_cycles": 0}])
def test_bad_integration_settings(kw):
    args = {"dt": 1e-3, "n_cycles": 1, **kw}
    with pytest.raises(ConfigurationError):
        simulate(CycleSchedule(), P, **args)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_state_faults():
    with pytest.raises(IntegrationFault) as exc:
        simulate(CycleSchedule(), P, v0=math.inf)
    assert exc.value.t is not None


def test_fall_examples():
    at_rest = simulate_fall(P, 0.0, duration=2.0)
    assert not np.any(at_rest.v)
    traj = simulate_fall(P, 0.01, duration=60.0)
    assert traj.v[-1] == pytest.approx(terminal_velocity(0.01, 1000, 47.7e-4), rel=1e-6)
    with pytest.raises(DomainError):
        simulate_fall(P, 0.01, s=0.9)


@given(st.floats(0.0, 0.75), st.sampled_from([0.0, 0.37, 1.1]), st.booleans())
def test_simulation_is_deterministic_and_bounded(e, tg, valves):
    sched = CycleSchedule(evr_target=e, t_glide=round(tg / 1e-3) * 1e-3, valves=valves)
    a = simulate(sched, P, dt=2e-3 if tg != 0.37 else 1e-3)
    b = simulate(sched, P, dt=a.dt)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.v, b.v)
    assert np.all(np.isfinite(a.v)) and np.all(a.v >= -1e-12)
    assert np.all(np.diff(a.x) >= -1e-15)


def test_trajectory_csv(tmp_path):
    traj = simulate(CycleSchedule(t_glide=0.1), P)
    traj.write_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "t_s,x_m,v_mps,s,V_m3,phase"
    assert len(lines) == len(traj) + 1
    assert traj[3].phase == Phase.EXPULSION and traj.final.t == traj.t[-1]

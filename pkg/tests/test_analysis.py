import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pulsejet import analysis
from pulsejet.analysis import Trace, compare, emit, ingest, metrics, velocity
from pulsejet.dynamics import simulate
from pulsejet.errors import DomainError, RangeError, TraceParseError
from pulsejet.schedule import CycleSchedule


def test_ingest_three_rows_without_header():
    tr = ingest(io.StringIO("0,0\n0.1,0.01\n0.2,0.02\n"))
    assert len(tr) == 3 and tr.y is None


def test_ingest_header_comments_and_y():
    tr = ingest(io.StringIO("# tracked\nt,x,y\n0,0,1\n1,2,1\n2,4,1\n"))
    assert list(tr.x) == [0, 2, 4] and list(tr.y) == [1, 1, 1]


def test_duplicate_timestamp_names_line():
    with pytest.raises(TraceParseError, match="line 3"):
        ingest(io.StringIO("t,x\n0,0\n0,1\n1,2\n"))


def test_malformed_row_names_line():
    with pytest.raises(TraceParseError, match="line 4"):
        ingest(io.StringIO("t,x\n0,0\n1,1\n2,abc\n"))


def test_too_few_samples():
    with pytest.raises(DomainError):
        ingest(io.StringIO("0,0\n1,1\n"))


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(st.lists(st.tuples(st.floats(1e-6, 10), finite), min_size=3, max_size=40))
def test_emit_ingest_round_trip(rows):
    t = np.cumsum([r[0] for r in rows])
    x = np.array([r[1] for r in rows])
    buf = io.StringIO()
    emit(Trace(t, x), buf)
    back = ingest(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.t, t) and np.array_equal(back.x, x)


def test_simulator_csv_round_trip(tmp_path, calibrated):
    traj = simulate(CycleSchedule(t_glide=0.37), calibrated)
    traj.write_csv(tmp_path / "sim.csv")
    tr = ingest(tmp_path / "sim.csv")
    assert np.array_equal(tr.t, traj.t) and np.array_equal(tr.x, traj.x)


def test_linear_trace_velocity_exact():
    t = np.linspace(0, 3, 31)
    v = velocity(Trace(t, 0.2 * t), 5)
    assert np.allclose(v, 0.2, rtol=0, atol=1e-12)


def test_quadratic_interior_exact():
    t = np.linspace(0, 2, 41)
    v = velocity(Trace(t, 0.5 * 1.3 * t * t), 1)
    assert np.allclose(v[1:-1], 1.3 * t[1:-1], rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("w", [0, 2, -1, 1000, 2.0])
def test_invalid_window(w):
    t = np.linspace(0, 1, 11)
    with pytest.raises(DomainError):
        velocity(Trace(t, t), w)


def test_simulated_peak_recovered(calibrated):
    traj = simulate(CycleSchedule(evr_target=0.75), calibrated)
    v = velocity(Trace.from_trajectory(traj), 5)
    assert abs(v.max() - traj.v.max()) / traj.v.max() < 0.01


@pytest.mark.parametrize("d,T,avg", [(0.5, 2.9, 0.172), (2.0, 7.14, 0.28)])
def test_average_speed_examples(d, T, avg):
    t = np.linspace(0, T, 200)
    rep = metrics(Trace(t, d / T * t), query_distance=d)
    assert f"{rep.avg_speed:.3g}" == f"{avg:.3g}"
    assert rep.peak_speed == pytest.approx(rep.avg_speed, rel=1e-12)
    assert rep.time_to_distance == pytest.approx(T, rel=1e-12)


def test_query_beyond_extent():
    t = np.linspace(0, 1, 11)
    with pytest.raises(RangeError):
        metrics(Trace(t, t), query_distance=2.0)


def test_phase_segmentation_matches_simulator(calibrated):
    sched = CycleSchedule(t_glide=1.1)
    traj = simulate(sched, calibrated, n_cycles=2)
    rep = metrics(Trace.from_trajectory(traj), sched, window=1)
    assert [p for p, _, _ in rep.phase_deltas] == ["Expulsion", "Glide", "Refill"] * 2
    assert rep.refill_onset_speed == pytest.approx(traj.v[1650], rel=0.01)
    assert "phase_delta.0=Expulsion" in rep.to_text()


def test_compare_identity_and_shifted_ramp():
    t = np.linspace(0, 1, 101)
    a = Trace(t, 0.3 * t)
    c = compare(a, a)
    assert c.rmse_x == 0 and c.max_err_v == 0
    dt = t[1] - t[0]
    shifted = Trace(t + dt, 0.3 * t)
    c = compare(shifted, a)
    assert c.rmse_x == pytest.approx(0.3 * dt, rel=1e-9)
    assert c.rmse_v == pytest.approx(0.0, abs=1e-12)
    assert len(c.t) == 100


def test_compare_disjoint():
    t = np.linspace(0, 1, 5)
    with pytest.raises(DomainError):
        compare(Trace(t, t), Trace(t + 5, t))


def test_compare_accepts_trajectory(calibrated):
    traj = simulate(CycleSchedule(), calibrated)
    c = compare(traj, Trace.from_trajectory(traj), window=1)
    assert c.rmse_x == 0 and math.isfinite(c.rmse_v)
    assert analysis.time_to_distance(traj.t, traj.x, 0.0) == 0.0

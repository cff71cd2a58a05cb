"""Tracked position traces: ingestion, velocity estimation, metrics, comparison."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RangeError, TraceParseError
from .schedule import CycleSchedule

T_COLUMNS = ("t", "t_s", "time", "time_s")
X_COLUMNS = ("x", "x_m")
Y_COLUMNS = ("y", "y_m")


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray | None = None
    source: str = ""

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", x)
        if self.y is not None:
            object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if t.shape != x.shape or t.ndim != 1:
            raise DomainError("t and x must be 1-D arrays of equal length")
        if len(t) < 3:
            raise DomainError(f"a trace needs at least 3 samples, got {len(t)}")
        if np.any(np.diff(t) <= 0):
            raise DomainError("trace timestamps must be strictly increasing")

    def __len__(self):
        return len(self.t)

    @property
    def sample_rate(self) -> float:
        return (len(self.t) - 1) / (self.t[-1] - self.t[0])

    @classmethod
    def from_trajectory(cls, traj, source="simulation"):
        return cls(traj.t.copy(), traj.x.copy(), source=source)


@dataclass
class MetricsReport:
    peak_speed: float
    avg_speed: float
    distance: float
    duration: float
    refill_onset_speed: float | None = None
    time_to_distance: float | None = None
    query_distance: float | None = None
    phase_deltas: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"{k}={v!r}" for k, v in (
            ("peak_speed", self.peak_speed), ("avg_speed", self.avg_speed),
            ("distance", self.distance), ("duration", self.duration),
            ("refill_onset_speed", self.refill_onset_speed),
            ("query_distance", self.query_distance), ("time_to_distance", self.time_to_distance),
        )]
        for k, (phase, t0, dv) in enumerate(self.phase_deltas):
            lines.append(f"phase_delta.{k}={phase}@{t0!r}:{dv!r}")
        return "\n".join(lines) + "\n"


def _open(src):
    if isinstance(src, (str, bytes)) or hasattr(src, "__fspath__"):
        return open(src, newline="", encoding="utf-8"), True
    return src, False


def ingest(src, delimiter: str = ",", source: str | None = None) -> Trace:
    """Read a ``t, x[, y]`` CSV into a Trace.

    A header row is optional; when present the time and position columns
    are located by name (``t``/``t_s``, ``x``/``x_m``), so simulator
    trajectory files load directly. Lines starting with ``#`` are ignored.
    """
    fh, close = _open(src)
    try:
        text = fh.read()
    finally:
        if close:
            fh.close()
    cols = (0, 1, None)
    ts, xs, ys = [], [], []
    header_seen = False
    for lineno, row in enumerate(csv.reader(io.StringIO(text), delimiter=delimiter), start=1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        cells = [c.strip() for c in row]
        if not header_seen and not ts:
            try:
                float(cells[0])
            except ValueError:
                names = [c.lower() for c in cells]
                ti = next((names.index(n) for n in T_COLUMNS if n in names), None)
                xi = next((names.index(n) for n in X_COLUMNS if n in names), None)
                yi = next((names.index(n) for n in Y_COLUMNS if n in names), None)
                if ti is None or xi is None:
                    raise TraceParseError(f"header lacks time/position columns: {row}", lineno)
                cols = (ti, xi, yi)
                header_seen = True
                continue
        ti, xi, yi = cols
        try:
            t = float(cells[ti])
            x = float(cells[xi])
            y = float(cells[yi]) if yi is not None and yi < len(cells) and cells[yi] else None
        except (ValueError, IndexError):
            raise TraceParseError(f"malformed row {row}", lineno) from None
        if not (math.isfinite(t) and math.isfinite(x)):
            raise TraceParseError(f"non-finite value in row {row}", lineno)
        if ts and t <= ts[-1]:
            raise TraceParseError(f"timestamp {t} does not increase (previous {ts[-1]})", lineno)
        ts.append(t)
        xs.append(x)
        ys.append(y)
    if len(ts) < 3:
        raise DomainError(f"a trace needs at least 3 samples, got {len(ts)}")
    y = np.array(ys, dtype=float) if all(v is not None for v in ys) and cols[2] is not None else None
    name = source if source is not None else (str(src) if close else "stream")
    return Trace(np.array(ts), np.array(xs), y, name)


def emit(trace: Trace, dst):
    """Write a trace as ``t,x[,y]`` CSV with a header."""
    fh, close = (open(dst, "w", newline="", encoding="utf-8"), True) if not hasattr(dst, "write") \
        else (dst, False)
    try:
        w = csv.writer(fh)
        w.writerow(["t", "x"] if trace.y is None else ["t", "x", "y"])
        for i in range(len(trace)):
            row = [repr(float(trace.t[i])), repr(float(trace.x[i]))]
            if trace.y is not None:
                row.append(repr(float(trace.y[i])))
            w.writerow(row)
    finally:
        if close:
            fh.close()


def central_velocity(t, x):
    """Second-order central differences inside, one-sided at the ends."""
    return np.gradient(np.asarray(x, dtype=float), np.asarray(t, dtype=float), edge_order=1)


def moving_average(y, window: int):
    """Centered moving average; the window shrinks symmetrically at the ends."""
    y = np.asarray(y, dtype=float)
    n = len(y)
    if window == 1:
        return y.copy()
    h = window // 2
    c = np.concatenate(([0.0], np.cumsum(y)))
    i = np.arange(n)
    half = np.minimum(h, np.minimum(i, n - 1 - i))
    return (c[i + half + 1] - c[i - half]) / (2 * half + 1)


def velocity(trace: Trace, window: int = 5):
    if not isinstance(window, (int, np.integer)) or window < 1 or window % 2 == 0 \
            or window > len(trace):
        raise DomainError(f"window must be an odd integer in [1, {len(trace)}], got {window!r}")
    return moving_average(central_velocity(trace.t, trace.x), int(window))


def time_to_distance(t, x, distance: float):
    """First time the displacement from x[0] reaches ``distance``, linearly interpolated."""
    d = np.asarray(x, dtype=float) - x[0]
    hit = np.nonzero(d >= distance)[0]
    if distance < 0 or not hit.size:
        raise RangeError(f"distance {distance} m beyond trace extent {d.max():.6g} m")
    k = int(hit[0])
    if k == 0:
        return float(t[0])
    return float(t[k - 1] + (distance - d[k - 1]) / (d[k] - d[k - 1]) * (t[k] - t[k - 1]))


def _phase_windows(schedule: CycleSchedule, t_end: float):
    out = []
    t = 0.0
    while t < t_end:
        for name, dur in (("Expulsion", schedule.t_expulsion), ("Glide", schedule.t_glide),
                          ("Refill", schedule.t_refill)):
            if dur > 0:
                out.append((name, t, t + dur))
                t += dur
    return out


def metrics(trace: Trace, schedule: CycleSchedule | None = None,
            query_distance: float | None = None, window: int = 5) -> MetricsReport:
    """Speed and distance metrics; the schedule (commanded timing) segments phases."""
    v = velocity(trace, min(window, len(trace) if len(trace) % 2 else len(trace) - 1))
    t = trace.t
    distance = float(trace.x[-1] - trace.x[0])
    duration = float(t[-1] - t[0])
    rep = MetricsReport(peak_speed=float(np.max(v)), avg_speed=distance / duration,
                        distance=distance, duration=duration)
    if query_distance is not None:
        rep.query_distance = float(query_distance)
        rep.time_to_distance = time_to_distance(t, trace.x, query_distance) - float(t[0])
    if schedule is not None:
        rel = t - t[0]
        for name, a, b in _phase_windows(schedule, rel[-1]):
            if b > rel[-1] + 1e-9:
                break
            va = float(np.interp(a, rel, v))
            vb = float(np.interp(b, rel, v))
            rep.phase_deltas.append((name, a, vb - va))
            if name == "Refill" and rep.refill_onset_speed is None:
                rep.refill_onset_speed = va
    return rep


@dataclass
class Comparison:
    t: np.ndarray
    rmse_x: float
    max_err_x: float
    rmse_v: float
    max_err_v: float
    rel_diff: dict

    def to_text(self) -> str:
        lines = [f"{k}={getattr(self, k)!r}" for k in ("rmse_x", "max_err_x", "rmse_v", "max_err_v")]
        lines += [f"rel_diff.{k}={v!r}" for k, v in self.rel_diff.items()]
        return "\n".join(lines) + "\n"


def _as_series(obj, window):
    if isinstance(obj, Trace):
        return obj.t, obj.x, velocity(obj, window)
    # a simulated Trajectory carries its own velocity
    return np.asarray(obj.t), np.asarray(obj.x), np.asarray(obj.v)


def compare(sim, exp: Trace, window: int = 5) -> Comparison:
    """Resample ``sim`` onto the experiment's timestamps inside the common range."""
    ts, xs, vs = _as_series(sim, window)
    te, xe, ve = _as_series(exp, window)
    lo, hi = max(ts[0], te[0]), min(ts[-1], te[-1])
    if hi <= lo:
        raise DomainError(f"time ranges do not overlap: [{ts[0]}, {ts[-1]}] vs [{te[0]}, {te[-1]}]")
    mask = (te >= lo) & (te <= hi)
    tc = te[mask]
    dx = np.interp(tc, ts, xs) - xe[mask]
    dv = np.interp(tc, ts, vs) - ve[mask]

    def rel(a, b):
        return float((a - b) / b) if b != 0 else float("nan")

    sim_peak, exp_peak = float(np.max(np.interp(tc, ts, vs))), float(np.max(ve[mask]))
    sim_d = float(np.interp(hi, ts, xs) - np.interp(lo, ts, xs))
    exp_d = float(np.interp(hi, te, xe) - np.interp(lo, te, xe))
    return Comparison(
        t=tc,
        rmse_x=float(np.sqrt(np.mean(dx * dx))), max_err_x=float(np.max(np.abs(dx))),
        rmse_v=float(np.sqrt(np.mean(dv * dv))), max_err_v=float(np.max(np.abs(dv))),
        rel_diff={"peak_speed": rel(sim_peak, exp_peak),
                  "avg_speed": rel(sim_d / (hi - lo), exp_d / (hi - lo)),
                  "distance": rel(sim_d, exp_d)},
    )


def write_velocity_csv(trace: Trace, v, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "v"])
        for ti, vi in zip(trace.t, v):
            w.writerow([repr(float(ti)), repr(float(vi))])

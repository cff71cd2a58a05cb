"""Quadratic form drag, drag-area tables and terminal-fall identification."""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DomainError, IdentificationError
from .geometry import MantleGeometry, frontal_area

DEFAULT_KNOTS = (0.0, 0.25, 0.5, 0.75)


def default_cda_table(geom: MantleGeometry | None = None, cd: float = 1.0, scale: float = 1.0,
                      mantle_fraction: float = 1.0):
    """Drag-area knots at the default contraction levels, clamped to ``s_max``.

    A share ``mantle_fraction`` of the expanded drag area folds with the
    mantle; the rest (servo, foam, cable) keeps its area. With the default
    of 1 the table is ``scale * cd * A(s)``.
    """
    geom = geom or MantleGeometry()
    if not 0 <= mantle_fraction <= 1:
        raise ConfigurationError(f"mantle_fraction must be in [0, 1], got {mantle_fraction}")
    knots = sorted({min(s, geom.s_max) for s in DEFAULT_KNOTS})
    fixed = (1.0 - mantle_fraction) * geom.A_expanded
    return tuple((s, scale * cd * (fixed + mantle_fraction * frontal_area(s, geom))) for s in knots)


@dataclass(frozen=True)
class HydroParams:
    rho: float = 1000.0
    cda_table: tuple = field(default_factory=default_cda_table)
    c_added: float = 0.0
    c_suction: float = 0.0

    def __post_init__(self):
        table = tuple((float(s), float(c)) for s, c in self.cda_table)
        object.__setattr__(self, "cda_table", table)
        if not table:
            raise ConfigurationError("empty cda_table")
        if self.rho <= 0:
            raise ConfigurationError(f"rho must be positive, got {self.rho}")
        if self.c_added < 0 or self.c_suction < 0:
            raise ConfigurationError("c_added and c_suction must be non-negative")
        for (s0, c0), (s1, c1) in zip(table, table[1:]):
            if s1 <= s0:
                raise ConfigurationError(f"cda_table knots not strictly increasing at s={s1}")
            if c1 > c0:
                raise ConfigurationError(f"cda_table values increase between s={s0} and s={s1}")
        if any(c <= 0 for _, c in table):
            raise ConfigurationError("cda_table values must be positive")

    def scaled(self, factor: float) -> "HydroParams":
        """Copy with every drag-area knot multiplied by ``factor``."""
        table = tuple((s, c * factor) for s, c in self.cda_table)
        return HydroParams(self.rho, table, self.c_added, self.c_suction)


@dataclass(frozen=True)
class FallExperiment:
    """Net downward force and the recorded (t, x) fall trace, x positive down."""

    F_net: float
    t: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        if not self.F_net > 0:
            raise DomainError(f"F_net must be positive, got {self.F_net}")


@dataclass(frozen=True)
class FallIdentification:
    cda: float
    U_t: float
    U_t_std: float
    window: tuple[float, float]


def drag_force(rho: float, CdA: float, U: float) -> float:
    """Signed drag magnitude ``0.5 rho CdA U |U|``; subtract it from the body force."""
    if CdA < 0:
        raise DomainError(f"CdA must be non-negative, got {CdA}")
    return 0.5 * rho * CdA * U * abs(U)


def terminal_velocity(F_net: float, rho: float, CdA: float) -> float:
    for name, val in (("F_net", F_net), ("rho", rho), ("CdA", CdA)):
        if not val > 0:
            raise DomainError(f"{name} must be positive, got {val}")
    return math.sqrt(2.0 * F_net / (rho * CdA))


def cda_from_terminal_velocity(F_net: float, rho: float, U_t: float) -> float:
    if not (F_net > 0 and rho > 0 and U_t > 0):
        raise DomainError("F_net, rho and U_t must be positive")
    return 2.0 * F_net / (rho * U_t * U_t)


def cda_at(s: float, params: HydroParams) -> float:
    """Piecewise-linear drag area, clamped at the end knots."""
    table = params.cda_table
    if not table:
        raise ConfigurationError("empty cda_table")
    if s <= table[0][0]:
        return table[0][1]
    if s >= table[-1][0]:
        return table[-1][1]
    i = bisect_right([k for k, _ in table], s)
    (s0, c0), (s1, c1) = table[i - 1], table[i]
    w = (s - s0) / (s1 - s0)
    return c0 + w * (c1 - c0)


def find_plateau(t, v, window: float = 0.5, rel_tol: float = 0.01):
    """Index where the terminal regime starts.

    The regime begins at the first sample after which the relative velocity
    change over every trailing ``window`` stays below ``rel_tol``. Returns
    ``(start_index, final_relative_slope)``; ``start_index`` is None when the
    trace ends outside the regime.
    """
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    j = np.searchsorted(t, t - window, side="left")
    ok = t - t[0] >= window - 1e-12
    scale = np.maximum(np.abs(v), 1e-300)
    rel = np.where(ok, np.abs(v - v[j]) / scale, np.inf)
    final = float(rel[-1])
    if not final < rel_tol:
        return None, final
    bad = np.nonzero(~(rel < rel_tol))[0]
    return (int(bad[-1]) + 1 if bad.size else 0), final


def identify_cda_from_fall(exp: FallExperiment, rho: float, window: float = 0.5,
                           rel_tol: float = 0.01, tail: float = 0.5) -> FallIdentification:
    """Terminal velocity from the last ``tail`` fraction of the detected plateau.

    Averaging only the tail keeps slow approaches, still inside ``rel_tol``
    at the plateau start, from biasing U_t low.
    """
    if not 0 < tail <= 1:
        raise DomainError(f"tail must be in (0, 1], got {tail}")
    from .analysis import central_velocity

    t = np.asarray(exp.t, dtype=float)
    v = central_velocity(t, np.asarray(exp.x, dtype=float))
    if t[-1] - t[0] < window:
        raise IdentificationError("trace shorter than the plateau window", None)
    start, slope = find_plateau(t, v, window, rel_tol)
    if start is None:
        raise IdentificationError(
            f"no terminal plateau: relative change {slope:.3g} over final {window} s", slope
        )
    start += int((len(v) - start) * (1 - tail))
    plateau = v[start:]
    U_t = float(np.mean(plateau))
    return FallIdentification(
        cda=cda_from_terminal_velocity(exp.F_net, rho, U_t),
        U_t=U_t,
        U_t_std=float(np.std(plateau)),
        window=(float(t[start]), float(t[-1])),
    )

"""Mantle geometry: contraction coordinate to volume and frontal area."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, DomainError


@dataclass(frozen=True)
class MantleGeometry:
    """Static geometry of the origami mantle, SI units.

    ``s`` is the contraction coordinate. The cavity volume is linear in
    ``s`` so the expelled volume ratio at the end of a stroke equals the
    stroke end value.
    """

    body_length: float = 0.133
    V_tot: float = 0.5e-3
    A_expanded: float = 47.7e-4
    A_contracted: float = 11.6e-4
    s_max: float = 0.75
    A_nozzle: float = 1.0e-4
    A_valve: float = 4.0e-4

    def __post_init__(self):
        if not 0 < self.A_contracted < self.A_expanded:
            raise ConfigurationError(
                f"need 0 < A_contracted < A_expanded, got {self.A_contracted}, {self.A_expanded}"
            )
        if not 0 < self.s_max <= 1:
            raise ConfigurationError(f"s_max must be in (0, 1], got {self.s_max}")
        if self.V_tot <= 0:
            raise ConfigurationError(f"V_tot must be positive, got {self.V_tot}")
        if self.A_nozzle <= 0:
            raise ConfigurationError(f"A_nozzle must be positive, got {self.A_nozzle}")
        if self.A_valve < 0:
            raise ConfigurationError(f"A_valve must be non-negative, got {self.A_valve}")
        if self.body_length <= 0:
            raise ConfigurationError(f"body_length must be positive, got {self.body_length}")

    @property
    def area_reduction(self) -> float:
        return (self.A_expanded - self.A_contracted) / self.A_expanded

    @property
    def expansion_ratio(self) -> float:
        return self.A_expanded / self.A_contracted


def _check_s(s, geom):
    if not 0.0 <= s <= geom.s_max:
        raise DomainError(f"contraction s={s!r} outside [0, {geom.s_max}]")


def cavity_volume(s: float, geom: MantleGeometry) -> float:
    """Cavity fluid volume at contraction ``s``."""
    _check_s(s, geom)
    return geom.V_tot * (1.0 - s)


def frontal_area(s: float, geom: MantleGeometry) -> float:
    """Projected frontal area, linear between the measured endpoints."""
    _check_s(s, geom)
    return geom.A_expanded + (s / geom.s_max) * (geom.A_contracted - geom.A_expanded)


def expelled_volume(s_end: float, geom: MantleGeometry) -> float:
    _check_s(s_end, geom)
    return geom.V_tot * s_end

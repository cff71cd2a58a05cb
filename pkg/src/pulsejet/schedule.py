"""Commanded phase timing for one expulsion-glide-refill cycle."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError

T_PHASE_DEFAULT = 0.55
PROFILES = ("constant", "rate_limited", "smoothstep")


@dataclass(frozen=True)
class CycleSchedule:
    """Phase durations in seconds and the stroke target.

    ``t_refill=None`` resolves to 0.55 s with inlet valves and to twice
    that without them. ``evr_target`` is a fraction of the cavity volume.

    ``profile`` selects the contraction law inside a commanded phase:
    ``constant`` spreads the stroke uniformly over the phase,
    ``rate_limited`` moves at the actuator's full-stroke rate
    (``s_max`` per phase) and then holds, ``smoothstep`` eases in and out.
    """

    t_expulsion: float = T_PHASE_DEFAULT
    t_glide: float = 0.0
    t_refill: float | None = None
    evr_target: float = 0.75
    valves: bool = True
    profile: str = "rate_limited"

    def __post_init__(self):
        if self.t_refill is None:
            t_ref = T_PHASE_DEFAULT if self.valves else 2 * T_PHASE_DEFAULT
            object.__setattr__(self, "t_refill", t_ref)
        if not self.t_expulsion > 0:
            raise ConfigurationError(f"t_expulsion must be positive, got {self.t_expulsion}")
        if not self.t_refill > 0:
            raise ConfigurationError(f"t_refill must be positive, got {self.t_refill}")
        if not self.t_glide >= 0:
            raise ConfigurationError(f"t_glide must be non-negative, got {self.t_glide}")
        if not 0 <= self.evr_target <= 1:
            raise ConfigurationError(f"evr_target must be in [0, 1], got {self.evr_target}")
        if self.profile not in PROFILES:
            raise ConfigurationError(f"unknown profile {self.profile!r}; expected one of {PROFILES}")

    @property
    def period(self) -> float:
        return self.t_expulsion + self.t_glide + self.t_refill

    def with_(self, **changes) -> "CycleSchedule":
        from dataclasses import asdict

        fields = asdict(self)
        if "valves" in changes and "t_refill" not in changes:
            fields["t_refill"] = None
        fields.update(changes)
        return CycleSchedule(**fields)

"""Cycle-resolved simulator and calibration harness for pulsed-jet swimmers."""

from .geometry import MantleGeometry, cavity_volume, expelled_volume, frontal_area
from .hydro import (FallExperiment, HydroParams, cda_at, default_cda_table, drag_force,
                    identify_cda_from_fall, terminal_velocity)
from .schedule import CycleSchedule
from .dynamics import (BodyState, Phase, RigidBodyParams, Trajectory, effective_mass,
                       expulsion_force, glide_force, refill_force, simulate, simulate_fall)
from .cycle import (EnergyLedger, EnergyModel, Scenario, cot, cycle_energy, evr, find_optimum,
                    gpf, run_scenario, sweep)
from .calibrate import CalibrationBase, CalibrationTargets, FitResult, calibrated_params, fit
from .analysis import Trace, compare, ingest, metrics, velocity
from .config import RunConfig, load_config

__version__ = "0.1.0"

__all__ = [
    "MantleGeometry", "cavity_volume", "expelled_volume", "frontal_area",
    "FallExperiment", "HydroParams", "cda_at", "default_cda_table", "drag_force",
    "identify_cda_from_fall", "terminal_velocity", "CycleSchedule",
    "BodyState", "Phase", "RigidBodyParams", "Trajectory", "effective_mass", "expulsion_force",
    "glide_force", "refill_force", "simulate", "simulate_fall",
    "EnergyLedger", "EnergyModel", "Scenario", "cot", "cycle_energy", "evr", "find_optimum", "gpf",
    "run_scenario", "sweep", "CalibrationBase", "CalibrationTargets", "FitResult",
    "calibrated_params", "fit", "Trace", "compare", "ingest", "metrics", "velocity",
    "RunConfig", "load_config",
]

"""INI-style run configuration in laboratory units (cm, cm^2, mL, s, %).

Every key has a default; values are converted to SI and re-validated by
the owning dataclass when the model objects are built.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field

from .calibrate import CALIBRATED, CalibrationBase, CalibrationTargets, FitResult
from .cycle import EnergyModel
from .dynamics import RigidBodyParams
from .errors import ConfigurationError
from .geometry import MantleGeometry
from .hydro import HydroParams, default_cda_table
from .schedule import CycleSchedule

CM = 1e-2
CM2 = 1e-4
ML = 1e-6

# section -> key -> default; None marks "derived when left empty"
DEFAULTS = {
    "geometry": {
        "body_length_cm": 13.3,
        "V_tot_mL": CALIBRATED["V_tot"] / ML,
        "A_expanded_cm2": 47.7,
        "A_contracted_cm2": 11.6,
        "s_max": 0.75,
        "A_nozzle_cm2": CALIBRATED["A_nozzle"] / CM2,
        "A_valve_cm2": 4.0,
    },
    "hydro": {
        "rho": 1000.0,
        "cd": 1.0,
        "cda_scale": CALIBRATED["cda_scale"],
        "cda_mantle_fraction": CALIBRATED["cda_mantle_fraction"],
        "cda_table_cm2": "",
        "c_added": 0.0,
        "c_suction": CALIBRATED["c_suction"],
    },
    "body": {"m_struct": 0.55},
    "schedule": {
        "t_expulsion": 0.55,
        "t_glide": 0.0,
        "t_refill": None,
        "evr_pct": 75.0,
        "valves": True,
        "profile": "rate_limited",
    },
    "energy": {
        "E_expulsion": 2.2,
        "E_refill": 0.4,
        "P_hold": 0.364,
        "m_ref": None,
        "g": 9.81,
    },
    "integrator": {"dt": 1e-3, "cycles": 1, "distance": None, "fit_dt": 2e-3},
    "fall": {"F_net": 0.01, "duration": 60.0, "window": 0.5, "rel_tol": 0.01},
    "targets": {
        "peak_speeds": "25:0.21, 50:0.33, 75:0.39",
        "transit": "25:0.5:2.9, 50:0.5:2.2, 75:0.5:2.1",
        "refill_speeds": "",
        "weight_peak": 1.0,
        "weight_transit": 1.0,
        "weight_refill": 1.0,
        "budget": 5000,
    },
}

_BOOL = {"true": True, "yes": True, "1": True, "on": True,
         "false": False, "no": False, "0": False, "off": False}
_OPTIONAL_FLOAT = {("schedule", "t_refill"), ("energy", "m_ref"), ("integrator", "distance")}


def _parse(section, key, raw: str):
    default = DEFAULTS[section][key]
    raw = raw.strip()
    try:
        if (section, key) in _OPTIONAL_FLOAT:
            return None if raw == "" or raw.lower() == "none" else float(raw)
        if isinstance(default, bool):
            return _BOOL[raw.lower()]
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (ValueError, KeyError):
        raise ConfigurationError(f"[{section}] {key}: cannot parse {raw!r}") from None
    return raw


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _tuples(text: str, arity: int, section="targets"):
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) != arity:
            raise ConfigurationError(f"[{section}] entry {item!r} needs {arity} ':'-separated fields")
        try:
            out.append(tuple(None if p.strip() in ("", "-") else float(p) for p in parts))
        except ValueError:
            raise ConfigurationError(f"[{section}] cannot parse entry {item!r}") from None
    return tuple(out)


@dataclass
class RunConfig:
    values: dict = field(default_factory=lambda: {s: dict(k) for s, k in DEFAULTS.items()})

    def __getitem__(self, section):
        return self.values[section]

    def set(self, section, key, value):
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise ConfigurationError(f"unknown key [{section}] {key}")
        self.values[section][key] = value

    # model objects

    def geometry(self) -> MantleGeometry:
        g = self.values["geometry"]
        return MantleGeometry(
            body_length=g["body_length_cm"] * CM, V_tot=g["V_tot_mL"] * ML,
            A_expanded=g["A_expanded_cm2"] * CM2, A_contracted=g["A_contracted_cm2"] * CM2,
            s_max=g["s_max"], A_nozzle=g["A_nozzle_cm2"] * CM2, A_valve=g["A_valve_cm2"] * CM2,
        )

    def hydro(self, geom: MantleGeometry | None = None) -> HydroParams:
        h = self.values["hydro"]
        geom = geom or self.geometry()
        if h["cda_table_cm2"].strip():
            table = tuple((s, c * CM2) for s, c in _tuples(h["cda_table_cm2"], 2, "hydro"))
        else:
            table = default_cda_table(geom, h["cd"], h["cda_scale"], h["cda_mantle_fraction"])
        return HydroParams(rho=h["rho"], cda_table=table, c_added=h["c_added"],
                           c_suction=h["c_suction"])

    def params(self) -> RigidBodyParams:
        geom = self.geometry()
        return RigidBodyParams(m_struct=self.values["body"]["m_struct"], geometry=geom,
                               hydro=self.hydro(geom))

    def schedule(self) -> CycleSchedule:
        s = self.values["schedule"]
        return CycleSchedule(t_expulsion=s["t_expulsion"], t_glide=s["t_glide"],
                             t_refill=s["t_refill"], evr_target=s["evr_pct"] / 100.0,
                             valves=s["valves"], profile=s["profile"])

    def energy(self) -> EnergyModel:
        e = self.values["energy"]
        return EnergyModel(E_expulsion=e["E_expulsion"], E_refill=e["E_refill"],
                           P_hold=e["P_hold"], m_ref=e["m_ref"], g=e["g"])

    def targets(self) -> CalibrationTargets:
        t = self.values["targets"]
        return CalibrationTargets(
            peak_speeds=_tuples(t["peak_speeds"], 2),
            transit=_tuples(t["transit"], 3),
            refill_speeds=_tuples(t["refill_speeds"], 3),
            weights={"peak": t["weight_peak"], "transit": t["weight_transit"],
                     "refill": t["weight_refill"]},
        )

    def calibration_base(self) -> CalibrationBase:
        return CalibrationBase(params=self.params(), schedule=self.schedule(),
                               cd=self.values["hydro"]["cd"], dt=self.values["integrator"]["fit_dt"])

    def apply_fit(self, result: FitResult):
        p = result.params
        self.set("geometry", "V_tot_mL", p["V_tot"] / ML)
        self.set("geometry", "A_nozzle_cm2", p["A_nozzle"] / CM2)
        self.set("hydro", "c_suction", p["c_suction"])
        self.set("hydro", "cda_scale", p["cda_scale"])
        self.set("hydro", "cda_mantle_fraction", p["cda_mantle_fraction"])
        self.set("hydro", "cda_table_cm2", "")

    def validate(self):
        """Build every model object once so invalid values fail early."""
        self.params()
        self.schedule()
        self.energy()
        self.targets()
        if not self.values["integrator"]["dt"] > 0:
            raise ConfigurationError("[integrator] dt must be positive")
        return self

    def to_text(self) -> str:
        lines = []
        for section, keys in self.values.items():
            lines.append(f"[{section}]")
            lines += [f"{k} = {_fmt(v)}" for k, v in keys.items()]
            lines.append("")
        return "\n".join(lines)

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())


def parse_config(text: str) -> RunConfig:
    cp = configparser.ConfigParser(comment_prefixes=("#", ";"), inline_comment_prefixes=("#",),
                                   interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    cfg = RunConfig()
    for section in cp.sections():
        if section not in DEFAULTS:
            raise ConfigurationError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in DEFAULTS[section]:
                raise ConfigurationError(f"unknown key [{section}] {key}")
            cfg.values[section][key] = _parse(section, key, raw)
    return cfg.validate()


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

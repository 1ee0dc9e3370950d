"""Run configuration: YAML loading, validation and plant assembly.

A configuration file is a nested YAML mapping with one block per
subsystem: atmosphere, tether, kite, winch, controller, solver and
scenario. Every key is optional; omitted keys take the documented
defaults, so an empty file is a complete configuration. Unknown keys
are rejected by their dotted path rather than silently ignored, and a
fully resolved echo of the configuration can be written next to run
outputs so any result can be reproduced from its artifacts alone.
"""

import dataclasses
import math
import typing
from dataclasses import dataclass, field

import yaml

from .atmosphere import AirDensityModel, WindField, WindProfile
from .controller import ActuatorParams, AutoPilot, ControllerParams, \
    DepowerSchedule, FlightPhase, FlightPlanParams, HeadingGains, \
    ParkingGains, WinchGains, WinchSetpoints
from .errors import ConfigError
from .kite_four_point import FourPointGeometry
from .kite_one_point import AeroTable, KiteParams
from .simulator import PlantModel, SolverSettings
from .tether import TetherParams
from .winch import WinchParams

#: Run modes understood by the command-line entry point.
RUN_MODES = ("batch", "parking", "calibrate", "realtime")

_PHASES = {p.value: p for p in FlightPhase}


@dataclass(frozen=True)
class ScenarioConfig:
    """What to run, for how long, and from which initial condition.

    Attributes:
        mode: One of batch, parking, calibrate, realtime.
        duration: Simulated length of a batch or realtime run (s).
        seed: Gust generator seed.
        port: TCP port of the realtime telemetry server.
        l_t: Initial unreeled tether length (m).
        elevation_deg: Elevation of the initial straight-line layout.
        azimuth_deg: Azimuth of the initial layout.
        pitch_back_deg: Initial nose-up wing attitude; None selects a
            per-model default.
        phase: Initial flight phase name.
        equilibrium_start: Start from the static force balance instead
            of the straight-line guess.
    """

    mode: str = "batch"
    duration: float = 600.0
    seed: int = 0
    port: int = 8700
    l_t: float = 392.0
    elevation_deg: float = 70.0
    azimuth_deg: float = 0.0
    pitch_back_deg: float | None = None
    phase: str = FlightPhase.PARKING.value
    equilibrium_start: bool = True

    def __post_init__(self):
        if self.mode not in RUN_MODES:
            raise ConfigError("unknown run mode", mode=self.mode,
                              known=RUN_MODES)
        if self.duration <= 0.0:
            raise ConfigError("duration must be positive",
                              duration=self.duration)
        if self.phase not in _PHASES:
            raise ConfigError("unknown flight phase", phase=self.phase,
                              known=tuple(_PHASES))
        if not 0 <= self.port < 65536:
            # Port zero asks the OS for any free port.
            raise ConfigError("port out of range", port=self.port)

    @property
    def initial_phase(self) -> FlightPhase:
        return _PHASES[self.phase]


@dataclass(frozen=True)
class AtmosphereConfig:
    """Wind profile, gusts and air density."""

    v_w_ref: float = 8.0
    z_ref: float = 6.0
    z0: float = 2e-4
    k: float = 1.0
    alpha_exp: float | None = None
    fit_height: float = 100.0
    law: str = "blended"
    turbulence_intensity: float = 0.0
    rho0: float = 1.225
    scale_height: float = 8550.0


@dataclass(frozen=True)
class KiteConfig:
    """Kite model selector plus wing parameters.

    The aero table is a list of [angle deg, C_L, C_D] control points;
    geometry applies to the four-point model only.
    """

    model: str = "4p"
    params: KiteParams = field(default_factory=KiteParams)
    geometry: FourPointGeometry = field(default_factory=FourPointGeometry)

    def __post_init__(self):
        if self.model not in ("1p", "4p"):
            raise ConfigError("kite model must be '1p' or '4p'",
                              model=self.model)


@dataclass(frozen=True)
class SimConfig:
    """Fully resolved run configuration."""

    atmosphere: AtmosphereConfig = field(default_factory=AtmosphereConfig)
    tether: TetherParams = field(default_factory=TetherParams)
    kite: KiteConfig = field(default_factory=KiteConfig)
    winch: WinchParams = field(default_factory=WinchParams)
    controller: ControllerParams = field(default_factory=ControllerParams)
    solver: SolverSettings = field(default_factory=SolverSettings)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)

    @property
    def pitch_back_deg(self) -> float:
        """Initial wing pitch; per-model default unless configured."""
        if self.scenario.pitch_back_deg is not None:
            return self.scenario.pitch_back_deg
        return -7.5 if self.kite.model == "4p" else 0.0


# ----------------------------------------------------------------------
# schema-checked construction

# Nested dataclasses inside the controller block.
_NESTED = {ControllerParams: {"plan": FlightPlanParams,
                              "heading": HeadingGains,
                              "parking": ParkingGains,
                              "steering_actuator": ActuatorParams,
                              "depower_actuator": ActuatorParams,
                              "setpoints": WinchSetpoints,
                              "winch_gains_out": WinchGains,
                              "winch_gains_in": WinchGains,
                              "depower": DepowerSchedule}}


def _build(cls, data, path):
    """Construct a dataclass from a mapping, rejecting unknown keys."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", key=path,
                          got=type(data).__name__)
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    nested = _NESTED.get(cls, {})
    for key, value in data.items():
        if key not in names:
            raise ConfigError("unknown configuration key",
                              key=f"{path}.{key}" if path else key,
                              block=cls.__name__)
        sub = f"{path}.{key}" if path else key
        if key in nested:
            kwargs[key] = _build(nested[key], value, sub)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError("invalid configuration block", key=path,
                          detail=str(exc)) from exc


def _build_kite(data, path="kite"):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", key=path,
                          got=type(data).__name__)
    extra = set(data) - {"model", "params", "geometry"}
    if extra:
        raise ConfigError("unknown configuration key",
                          key=f"{path}.{sorted(extra)[0]}")
    params_data = dict(data.get("params") or {})
    table_rows = params_data.pop("table", None)
    params = _build(KiteParams, params_data, f"{path}.params")
    if table_rows is not None:
        try:
            points = tuple((float(a), float(cl), float(cd))
                           for a, cl, cd in table_rows)
        except (TypeError, ValueError) as exc:
            raise ConfigError("aero table rows must be "
                              "[angle_deg, c_l, c_d] triples",
                              key=f"{path}.params.table") from exc
        params = dataclasses.replace(params, table=AeroTable(points))
    geometry = _build(FourPointGeometry, data.get("geometry"),
                      f"{path}.geometry")
    return KiteConfig(model=data.get("model", "4p"), params=params,
                      geometry=geometry)


_BLOCKS = {"atmosphere": AtmosphereConfig, "tether": TetherParams,
           "winch": WinchParams, "controller": ControllerParams,
           "solver": SolverSettings, "scenario": ScenarioConfig}


def config_from_dict(data: dict | None) -> SimConfig:
    """Build a validated configuration from nested plain mappings."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a mapping",
                          got=type(data).__name__)
    known = set(_BLOCKS) | {"kite"}
    extra = set(data) - known
    if extra:
        raise ConfigError("unknown configuration key",
                          key=sorted(extra)[0], known=tuple(sorted(known)))
    kwargs = {name: _build(cls, data.get(name), name)
              for name, cls in _BLOCKS.items()}
    kwargs["kite"] = _build_kite(data.get("kite"))
    return SimConfig(**kwargs)


def load_config(path: str) -> SimConfig:
    """Load and validate a YAML configuration file.

    An empty file yields the all-defaults configuration.

    Raises:
        ConfigError: Unreadable file, malformed YAML, unknown keys or
            out-of-range values, with the offending key in the context.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("cannot read configuration file", path=path,
                          detail=str(exc)) from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("malformed YAML", path=path,
                          detail=str(exc)) from exc
    return config_from_dict(data)


# ----------------------------------------------------------------------
# resolved echo


def _as_dict(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out = {}
        for f in dataclasses.fields(obj):
            out[f.name] = _as_dict(getattr(obj, f.name))
        return out
    if isinstance(obj, AeroTable):
        return [list(row) for row in obj.points()]
    return obj


def config_to_dict(config: SimConfig) -> dict:
    """Plain nested mapping with every resolved value."""
    out = {}
    for f in dataclasses.fields(SimConfig):
        out[f.name] = _as_dict(getattr(config, f.name))
    return out


def resolved_yaml(config: SimConfig) -> str:
    """YAML echo of the fully resolved configuration.

    Loading the echo reproduces the configuration exactly, which makes
    any run reproducible from its output directory alone.
    """
    return yaml.safe_dump(config_to_dict(config), sort_keys=True,
                          default_flow_style=None)


# ----------------------------------------------------------------------
# assembly


def build_wind(config: SimConfig, seed: int | None = None) -> WindField:
    """Wind field with gust generator from the atmosphere block."""
    a = config.atmosphere
    profile = WindProfile(v_w_ref=a.v_w_ref, z_ref=a.z_ref, z0=a.z0,
                          K=a.k, alpha_exp=a.alpha_exp,
                          fit_height=a.fit_height, law=a.law,
                          turbulence_intensity=a.turbulence_intensity)
    density = AirDensityModel(rho0=a.rho0, scale_height=a.scale_height)
    return WindField(profile, density=density,
                     seed=config.scenario.seed if seed is None else seed)


def build_plant(config: SimConfig, seed: int | None = None) -> PlantModel:
    """Assembled plant for the configured kite model."""
    return PlantModel(config.tether, config.kite.params, config.winch,
                      build_wind(config, seed), model=config.kite.model,
                      geometry=config.kite.geometry)


def build_pilot(config: SimConfig) -> AutoPilot:
    """Automatic control stack starting in the configured phase."""
    return AutoPilot(config.controller, dt=config.solver.control_dt,
                     initial_phase=config.scenario.initial_phase)

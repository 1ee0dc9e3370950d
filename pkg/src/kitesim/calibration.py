"""Model calibration and post-processing over recorded flights.

Three workflows live here. Parking studies run the closed-loop simulator
with the winch locked and reduce the settled window to a mean tether
force and elevation; a simplex search then adjusts model parameters
until simulated parking matches a set of measured cases. The turn-rate
workflow regresses the steering response law from flight samples and
reports its Pearson correlation. Cycle metrics reduce a pumping-cycle
log to phase-averaged forces, speeds, power and efficiencies.

Everything here is pure post-processing over immutable inputs; nothing
mutates the simulator state it is given.
"""

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .atmosphere import WindField, WindProfile
from .controller import AutoPilot, ControllerParams, DepowerSchedule, \
    FlightPhase
from .cyclelog import CycleLog
from .errors import ConfigError, InsufficientDataError, KiteSimError, \
    SolverFailure, UnidentifiableError
from .kite_one_point import KiteParams
from .simulator import PlantControls, PlantModel, Simulator, \
    equilibrium_state
from .tether import ReelState, TetherParams
from .winch import WinchParams

#: Apparent wind speed (m/s) below which turn-rate samples are unusable.
TURN_RATE_MIN_SPEED = 0.5

#: Minimum sample count for a turn-rate regression.
TURN_RATE_MIN_SAMPLES = 100

#: Smoothing window (s) applied to flight series before regression.
SMOOTHING_WINDOW = 2.0

#: Steering slope magnitude below which the offset cannot be recovered.
C1_FLOOR = 1e-6

_REEL_OUT_PHASES = (FlightPhase.REEL_OUT_RIGHT.value,
                    FlightPhase.REEL_OUT_LEFT.value)

#: Names accepted by :func:`fit_parking_params` and what they touch.
PARKING_FIT_PARAMS = ("u_d0", "alpha_d_max", "z0", "K", "c_d_t")

# Step sizes that put every fitted parameter on a comparable scale for
# the simplex; chosen near a few percent of each nominal value.
_PARKING_FIT_SCALES = {"u_d0": 0.01, "alpha_d_max": 1.0, "z0": 5e-5,
                       "K": 0.05, "c_d_t": 0.05}

_PENALTY = 1e6


# ----------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class ParkingCase:
    """One parked-flight measurement used as a calibration target.

    Attributes:
        v_w_ref: Ground wind speed at reference height (m/s).
        l_t: Tether length while parked (m).
        u_d: Depower setting while parked (fraction).
        force: Mean tether force at the ground station (N).
        force_std: Standard deviation of the tether force (N).
        elevation_deg: Mean elevation of the kite (deg).
        elevation_std_deg: Standard deviation of the elevation (deg).
    """

    v_w_ref: float
    l_t: float
    u_d: float
    force: float
    force_std: float
    elevation_deg: float
    elevation_std_deg: float

    def __post_init__(self):
        if self.force_std < 0.0 or self.elevation_std_deg < 0.0:
            raise ConfigError("standard deviations must be non-negative",
                              force_std=self.force_std,
                              elevation_std_deg=self.elevation_std_deg)


@dataclass(frozen=True)
class TurnRateFit:
    """Fitted steering-response law and its goodness of fit.

    The law is turn_rate = c1*v_a*(u_s - c0) + (c2/v_a)*sin(psi)*cos(beta)
    with psi the course angle and beta the elevation.

    Attributes:
        c0: Steering offset that produces zero commanded turn.
        c1: Turn-rate gain per unit steering and airspeed (rad/m).
        c2: Gravity-induced turn coefficient (rad*m/s^2).
        rho_pcc: Pearson correlation between fitted and input turn rate.
        sigma: Residual standard deviation (rad/s).
    """

    c0: float
    c1: float
    c2: float
    rho_pcc: float
    sigma: float

    def __post_init__(self):
        if abs(self.rho_pcc) > 1.0 + 1e-12:
            raise ConfigError("correlation must lie in [-1, 1]",
                              rho_pcc=self.rho_pcc)
        if self.sigma < 0.0:
            raise ConfigError("residual std must be non-negative",
                              sigma=self.sigma)

    def report(self) -> str:
        """Machine-readable key=value report, one pair per line."""
        lines = [f"c0={self.c0:.6g}", f"c1={self.c1:.6g}",
                 f"c2={self.c2:.6g}", f"rho_pcc={self.rho_pcc:.6f}",
                 f"sigma={self.sigma:.6g}"]
        return "\n".join(lines)


@dataclass(frozen=True)
class CycleMetrics:
    """Phase-averaged summary of one or more complete pumping cycles.

    Attributes:
        f_t_o: Mean tether force during reel-out (N).
        f_t_i: Mean tether force during reel-in (N); NaN without reel-in.
        v_t_o: Mean reel speed during reel-out (m/s).
        v_t_i: Mean reel speed during reel-in (m/s); NaN without reel-in.
        p_av: Net mechanical power averaged over the full cycle (W).
        eta_p: Pumping efficiency (E_out - E_in) / E_out.
        duty: Fraction of the cycle spent reeling out.
        eta_cyc: Cycle efficiency, the product eta_p * duty.
        n_cycles: Number of complete cycles the averages cover.
        duration: Averaged cycle duration (s).
    """

    f_t_o: float
    f_t_i: float
    v_t_o: float
    v_t_i: float
    p_av: float
    eta_p: float
    duty: float
    eta_cyc: float
    n_cycles: int
    duration: float

    def __post_init__(self):
        if not 0.0 < self.duty <= 1.0:
            raise ConfigError("duty cycle must lie in (0, 1]",
                              duty=self.duty)

    def report(self) -> str:
        """Machine-readable key=value report, one pair per line."""
        pairs = (("f_t_o", self.f_t_o), ("f_t_i", self.f_t_i),
                 ("v_t_o", self.v_t_o), ("v_t_i", self.v_t_i),
                 ("p_av", self.p_av), ("eta_p", self.eta_p),
                 ("duty", self.duty), ("eta_cyc", self.eta_cyc),
                 ("n_cycles", self.n_cycles), ("duration", self.duration))
        return "\n".join(f"{k}={v:.6g}" for k, v in pairs)


# ----------------------------------------------------------------------
# series utilities


def moving_average(values: np.ndarray, window: int) -> np.ndarray:
    """Centered moving average with symmetric truncation at the ends.

    Near the series ends the window shrinks symmetrically so the output
    stays unbiased (the first and last samples pass through unchanged).

    Args:
        values: One-dimensional sample series.
        window: Nominal window width in samples; even widths are treated
            as the next smaller odd width.

    Returns:
        Smoothed series of the same length.
    """
    x = np.asarray(values, dtype=float)
    if x.ndim != 1:
        raise ConfigError("moving_average expects a 1-d series",
                          ndim=x.ndim)
    if window < 1:
        raise ConfigError("window must be at least one sample",
                          window=window)
    n = x.size
    if n == 0:
        return x.copy()
    half = (window - 1) // 2
    idx = np.arange(n)
    k = np.minimum(half, np.minimum(idx, n - 1 - idx))
    cs = np.concatenate(([0.0], np.cumsum(x)))
    lo = idx - k
    hi = idx + k + 1
    return (cs[hi] - cs[lo]) / (hi - lo)


def pearson(a: np.ndarray, b: np.ndarray) -> float:
    """Pearson product-moment correlation of two equal-length series.

    Raises:
        ConfigError: Series lengths differ or fewer than two samples.
        UnidentifiableError: Either series is constant, leaving the
            correlation undefined.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("pearson expects two 1-d series of equal length",
                          shape_a=x.shape, shape_b=y.shape)
    if x.size < 2:
        raise ConfigError("pearson needs at least two samples", n=x.size)
    dx = x - x.mean()
    dy = y - y.mean()
    sx = math.sqrt(float(dx @ dx))
    sy = math.sqrt(float(dy @ dy))
    if sx == 0.0 or sy == 0.0:
        raise UnidentifiableError(
            "correlation undefined for a constant series")
    return float(np.clip(float(dx @ dy) / (sx * sy), -1.0, 1.0))


# ----------------------------------------------------------------------
# turn-rate regression


def turn_rate_samples(log: CycleLog, smooth_window: float = SMOOTHING_WINDOW,
                      min_speed: float = TURN_RATE_MIN_SPEED,
                      phases: Sequence[str] = _REEL_OUT_PHASES) -> np.ndarray:
    """Extract regression samples for :func:`fit_turn_rate` from a log.

    The course angle is unwrapped and differentiated on the log's time
    grid, then turn rate, airspeed and steering are smoothed with a
    centered moving average before the requested phases are selected.

    Args:
        log: Flight log with uniform sampling.
        smooth_window: Moving-average window (s).
        min_speed: Minimum apparent wind speed to keep a sample (m/s).
        phases: Phase names whose records enter the regression.

    Returns:
        Array of shape (n, 5) with columns turn rate (rad/s), apparent
        wind speed (m/s), steering setting, course angle (rad) and
        elevation (rad).

    Raises:
        InsufficientDataError: The log is too short to differentiate.
    """
    if len(log) < 3:
        raise InsufficientDataError("log too short for turn-rate sampling",
                                    n=len(log))
    t = np.asarray(log.column("t"), dtype=float)
    psi = np.unwrap(np.asarray(log.column("heading_rad"), dtype=float))
    v_a = np.asarray(log.column("v_a"), dtype=float)
    u_s = np.asarray(log.column("u_s"), dtype=float)
    beta = np.radians(np.asarray(log.column("elevation_deg"), dtype=float))
    dt = float(np.median(np.diff(t)))
    if dt <= 0.0:
        raise InsufficientDataError("log time stamps are not increasing")
    window = max(1, int(round(smooth_window / dt)))
    psi_dot = moving_average(np.gradient(psi, t), window)
    v_a_s = moving_average(v_a, window)
    u_s_s = moving_average(u_s, window)
    wanted = set(phases)
    mask = np.array([p in wanted for p in log.phases()], dtype=bool)
    mask &= v_a_s > min_speed
    return np.column_stack((psi_dot, v_a_s, u_s_s, psi, beta))[mask]


def fit_turn_rate(series: np.ndarray) -> TurnRateFit:
    """Least-squares fit of the steering response law.

    The model is turn_rate = c1*v_a*(u_s - c0) + (c2/v_a)*sin(psi)*
    cos(beta). The fit solves for the three linear unknowns c1, the
    intercept c1*c0 folded onto v_a, and c2; c0 is then recovered by
    division.

    Args:
        series: Array of shape (n, 5) with columns turn rate (rad/s),
            apparent wind speed (m/s), steering setting, course angle
            (rad) and elevation (rad), pre-smoothed as produced by
            :func:`turn_rate_samples`.

    Returns:
        The fitted law with its Pearson correlation and residual std.

    Raises:
        InsufficientDataError: Fewer than the minimum sample count.
        ConfigError: Airspeed at or below the usable floor.
        UnidentifiableError: A regressor never varies, naming the
            parameter that cannot be recovered.
    """
    data = np.asarray(series, dtype=float)
    if data.ndim != 2 or data.shape[1] != 5:
        raise ConfigError("turn-rate series must have 5 columns",
                          shape=data.shape)
    n = data.shape[0]
    if n < TURN_RATE_MIN_SAMPLES:
        raise InsufficientDataError(
            "turn-rate fit needs more samples",
            n=n, required=TURN_RATE_MIN_SAMPLES)
    psi_dot, v_a, u_s, psi, beta = data.T
    if float(v_a.min()) <= TURN_RATE_MIN_SPEED:
        raise ConfigError("apparent wind too slow for turn-rate fitting",
                          v_a_min=float(v_a.min()),
                          floor=TURN_RATE_MIN_SPEED)
    x1 = v_a * u_s
    x2 = v_a
    x3 = np.sin(psi) * np.cos(beta) / v_a
    if float(np.ptp(u_s)) < 1e-12:
        raise UnidentifiableError(
            "steering never varies; offset not recoverable",
            parameter="c0")
    if float(np.ptp(x3)) < 1e-12 and float(np.abs(x3).max()) < 1e-12:
        raise UnidentifiableError(
            "course stays aligned with the zenith; gravity coefficient "
            "not recoverable", parameter="c2")
    regressors = np.column_stack((x1, x2, x3))
    coef, _, rank, _ = np.linalg.lstsq(regressors, psi_dot, rcond=None)
    if rank < 3:
        raise UnidentifiableError("turn-rate regressors are collinear",
                                  parameter="c1", rank=int(rank))
    c1 = float(coef[0])
    if abs(c1) < C1_FLOOR:
        raise UnidentifiableError(
            "steering gain vanishes; offset not recoverable",
            parameter="c0", c1=c1)
    c0 = -float(coef[1]) / c1
    c2 = float(coef[2])
    fitted = regressors @ coef
    residual = psi_dot - fitted
    rho = pearson(fitted, psi_dot)
    sigma = float(np.std(residual))
    return TurnRateFit(c0=c0, c1=c1, c2=c2, rho_pcc=rho, sigma=sigma)


def turn_rate_model(fit: TurnRateFit, v_a: np.ndarray, u_s: np.ndarray,
                    psi: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Turn rate predicted by a fitted steering response law (rad/s)."""
    v = np.asarray(v_a, dtype=float)
    return (fit.c1 * v * (np.asarray(u_s, dtype=float) - fit.c0) +
            (fit.c2 / v) * np.sin(psi) * np.cos(beta))


# ----------------------------------------------------------------------
# parking studies


@dataclass(frozen=True)
class ParkingSetup:
    """Plant description shared by a series of parking runs.

    Wind speed, tether length and depower vary per case; everything
    else about the plant is fixed here.

    Attributes:
        model: Kite model selector, "1p" or "4p".
        kite: Wing and control pod properties.
        tether: Tether discretization and material properties.
        winch: Drum and generator properties.
        z_ref: Reference height of the wind measurement (m).
        z0: Surface roughness length of the wind profile (m).
        k_profile: Blending factor between log and exponential profiles.
        law: Wind profile law selector.
        turbulence_intensity: Relative gust intensity.
        seed: Gust generator seed.
        pitch_back_deg: Initial nose-up attitude used to seed the
            equilibrium search.
    """

    model: str = "4p"
    kite: KiteParams = field(default_factory=KiteParams)
    tether: TetherParams = field(default_factory=TetherParams)
    winch: WinchParams = field(default_factory=WinchParams)
    z_ref: float = 6.0
    z0: float = 2e-4
    k_profile: float = 1.0
    law: str = "blended"
    turbulence_intensity: float = 0.0
    seed: int = 0
    pitch_back_deg: float = -7.5

    def build(self, v_w_ref: float) -> PlantModel:
        """Assemble the plant for one reference wind speed."""
        profile = WindProfile(
            v_w_ref=v_w_ref, z_ref=self.z_ref, z0=self.z0,
            K=self.k_profile, law=self.law,
            turbulence_intensity=self.turbulence_intensity)
        wind = WindField(profile, seed=self.seed)
        return PlantModel(self.tether, self.kite, self.winch, wind,
                          model=self.model)


@dataclass(frozen=True)
class ParkingReport:
    """Outcome of one closed-loop parking run.

    Attributes:
        case: Window statistics in calibration-target form.
        azimuth_deg: Mean azimuth over the window (deg).
        settled: Whether the run reached a usable equilibrium.
        detail: Human-readable reason when not settled.
    """

    case: ParkingCase
    azimuth_deg: float
    settled: bool
    detail: str = ""

    def report(self) -> str:
        """Machine-readable key=value report, one pair per line."""
        c = self.case
        pairs = (("v_w_ref", c.v_w_ref), ("l_t", c.l_t), ("u_d", c.u_d),
                 ("force", c.force), ("force_std", c.force_std),
                 ("elevation_deg", c.elevation_deg),
                 ("elevation_std_deg", c.elevation_std_deg),
                 ("azimuth_deg", self.azimuth_deg))
        lines = [f"{k}={v:.6g}" for k, v in pairs]
        lines.append(f"settled={'true' if self.settled else 'false'}")
        if self.detail:
            lines.append(f"detail={self.detail}")
        return "\n".join(lines)


def _parking_pilot(u_d: float) -> AutoPilot:
    """Autopilot locked into station keeping at a fixed depower."""
    params = ControllerParams(
        depower=DepowerSchedule(parking=float(np.clip(u_d, 0.0, 1.0))))
    return AutoPilot(params, initial_phase=FlightPhase.PARKING)


def parking_equilibrium(setup: ParkingSetup, v_w_ref: float, l_t: float,
                        u_d: float, settle: float = 60.0,
                        window: float = 60.0,
                        elevation0_deg: float = 70.0) -> ParkingReport:
    """Run the closed-loop simulator parked and average the window.

    The winch stays locked throughout. The run starts from the static
    force balance of the parked system, settles for `settle` seconds
    under the station-keeping controller, then collects statistics over
    `window` seconds.

    Args:
        setup: Fixed plant description.
        v_w_ref: Ground wind speed at the reference height (m/s).
        l_t: Parked tether length (m).
        u_d: Depower setting held during the run.
        settle: Transient length discarded before averaging (s).
        window: Averaging window length (s).
        elevation0_deg: Elevation of the initial straight-line guess.

    Returns:
        A report whose `settled` flag is False when the kite cannot
        hold position: without wind, when the integration fails, or
        when the force fluctuation exceeds half its mean.
    """
    nan_case = ParkingCase(v_w_ref=v_w_ref, l_t=l_t, u_d=u_d,
                           force=math.nan, force_std=math.nan,
                           elevation_deg=math.nan,
                           elevation_std_deg=math.nan)
    if v_w_ref <= 0.0:
        return ParkingReport(case=nan_case, azimuth_deg=math.nan,
                             settled=False,
                             detail="no wind; the kite cannot produce lift")
    plant = setup.build(v_w_ref)
    pilot = _parking_pilot(u_d)
    controls = PlantControls(u_d=float(np.clip(u_d, 0.0, 1.0)),
                             winch_locked=True)
    try:
        y = equilibrium_state(plant, elevation0_deg, 0.0, l_t,
                              controls=controls,
                              pitch_back_deg=setup.pitch_back_deg)
    except KiteSimError:
        # No static balance is not fatal; fall back to the straight
        # taut-line guess and let the transient die out dynamically.
        y = plant.initial_state(elevation0_deg, 0.0, l_t,
                                pitch_back_deg=setup.pitch_back_deg)
    sim = Simulator(plant, pilot)
    try:
        _, y = sim.run_batch(y, settle)
        log, _ = sim.run_batch(y, window, t0=settle)
    except (SolverFailure, KiteSimError) as exc:
        return ParkingReport(case=nan_case, azimuth_deg=math.nan,
                             settled=False, detail=str(exc))
    force = np.asarray(log.column("force"), dtype=float)
    elev = np.asarray(log.column("elevation_deg"), dtype=float)
    azim = np.asarray(log.column("azimuth_deg"), dtype=float)
    case = ParkingCase(v_w_ref=v_w_ref, l_t=l_t, u_d=u_d,
                       force=float(force.mean()),
                       force_std=float(force.std()),
                       elevation_deg=float(elev.mean()),
                       elevation_std_deg=float(elev.std()))
    detail = ""
    settled = True
    if not case.force > 0.0:
        settled = False
        detail = "tether slack or force not positive"
    elif case.force_std > 0.5 * case.force:
        settled = False
        detail = "force fluctuation above half the mean; not an equilibrium"
    elif case.elevation_deg < 10.0:
        settled = False
        detail = "kite near the ground; not a parked equilibrium"
    return ParkingReport(case=case, azimuth_deg=float(azim.mean()),
                         settled=settled, detail=detail)


def static_parking_case(setup: ParkingSetup, v_w_ref: float, l_t: float,
                        u_d: float,
                        elevation0_deg: float = 70.0) -> ParkingCase:
    """Parked force and elevation from the static force balance.

    A fast, deterministic stand-in for :func:`parking_equilibrium` used
    by the parameter fit: no controller, no transient, zero stds.
    """
    plant = setup.build(v_w_ref)
    controls = PlantControls(u_d=float(np.clip(u_d, 0.0, 1.0)),
                             winch_locked=True)
    y = equilibrium_state(plant, elevation0_deg, 0.0, l_t,
                          controls=controls,
                          pitch_back_deg=setup.pitch_back_deg)
    reel = ReelState(l_t_i=l_t, t_i=0.0, v_t_o=0.0)
    diag = plant.diagnostics(0.0, y, controls, reel)
    return ParkingCase(v_w_ref=v_w_ref, l_t=l_t, u_d=u_d,
                       force=diag.ground_force, force_std=0.0,
                       elevation_deg=math.degrees(diag.elevation),
                       elevation_std_deg=0.0)


# ----------------------------------------------------------------------
# parking parameter fit


@dataclass(frozen=True)
class ParkingFitResult:
    """Outcome of the parking parameter search.

    Attributes:
        params: Fitted value per free parameter name.
        residuals_sigma: Per-case (force, elevation) errors in units of
            the case standard deviations.
        objective: Largest normalized residual at the optimum.
        success: True when every residual is below one sigma.
        iterations: Simplex iterations spent.
        message: Optimizer status line.
    """

    params: dict[str, float]
    residuals_sigma: tuple[tuple[float, float], ...]
    objective: float
    success: bool
    iterations: int
    message: str = ""

    def report(self) -> str:
        """Machine-readable key=value report, one pair per line."""
        lines = [f"{k}={v:.6g}" for k, v in self.params.items()]
        for i, (df, de) in enumerate(self.residuals_sigma):
            lines.append(f"case{i}_force_sigma={df:.4f}")
            lines.append(f"case{i}_elevation_sigma={de:.4f}")
        lines.append(f"objective={self.objective:.4f}")
        lines.append(f"success={'true' if self.success else 'false'}")
        lines.append(f"iterations={self.iterations}")
        if self.message:
            lines.append(f"message={self.message}")
        return "\n".join(lines)


def _apply_parking_params(setup: ParkingSetup,
                          values: Mapping[str, float]) -> ParkingSetup:
    """Return a setup with the named free parameters replaced."""
    kite = setup.kite
    tether = setup.tether
    out = setup
    if "u_d0" in values:
        kite = replace(kite, depower_offset=float(values["u_d0"]))
    if "alpha_d_max" in values:
        kite = replace(kite, alpha_d_max_deg=float(values["alpha_d_max"]))
    if "c_d_t" in values:
        tether = replace(tether, drag_coefficient=float(values["c_d_t"]))
    out = replace(out, kite=kite, tether=tether)
    if "z0" in values:
        out = replace(out, z0=float(values["z0"]))
    if "K" in values:
        out = replace(out, k_profile=float(values["K"]))
    return out


def _case_residuals(setup: ParkingSetup, cases: Sequence[ParkingCase],
                    evaluate: Callable[[ParkingSetup, ParkingCase],
                                       ParkingCase]
                    ) -> tuple[tuple[float, float], ...]:
    """Normalized (force, elevation) error of each case under a setup."""
    out = []
    for case in cases:
        sim = evaluate(setup, case)
        df = abs(sim.force - case.force) / case.force_std
        de = abs(sim.elevation_deg - case.elevation_deg) / \
            case.elevation_std_deg
        out.append((df, de))
    return tuple(out)


def fit_parking_params(cases: Sequence[ParkingCase],
                       free: Sequence[str],
                       setup: ParkingSetup | None = None,
                       initial: Mapping[str, float] | None = None,
                       max_iter: int = 200,
                       evaluate: Callable[[ParkingSetup, ParkingCase],
                                          ParkingCase] | None = None
                       ) -> ParkingFitResult:
    """Fit model parameters so simulated parking matches measured cases.

    A derivative-free simplex search adjusts the chosen free parameters
    to minimize the largest force or elevation error across the cases,
    each normalized by the case standard deviation. The fit succeeds
    when every residual drops below one sigma; otherwise the best point
    found within the iteration budget is reported.

    Args:
        cases: Measured parking equilibria; three distinct cases
            determine the usual free-parameter choices.
        free: Parameter names to adjust, from u_d0 (depower offset),
            alpha_d_max (full-depower angle, deg), z0 (roughness
            length, m), K (profile blending) and c_d_t (tether drag
            coefficient).
        setup: Plant description holding everything not fitted.
        initial: Starting value per free parameter; defaults to the
            values already in the setup.
        max_iter: Simplex iteration budget.
        evaluate: Parking evaluator mapping (setup, case) to a
            simulated case; defaults to the static force balance.

    Returns:
        Fitted values, per-case residuals in sigma units and a success
        flag.

    Raises:
        ConfigError: Unknown free parameter name, no cases, or a case
            std of zero (the normalization is undefined).
    """
    if not cases:
        raise ConfigError("parking fit needs at least one case")
    if not free:
        raise ConfigError("parking fit needs at least one free parameter")
    for name in free:
        if name not in PARKING_FIT_PARAMS:
            raise ConfigError("unknown parking fit parameter", name=name,
                              known=PARKING_FIT_PARAMS)
    for case in cases:
        if case.force_std <= 0.0 or case.elevation_std_deg <= 0.0:
            raise ConfigError(
                "parking fit needs positive case stds",
                force_std=case.force_std,
                elevation_std_deg=case.elevation_std_deg)
    keys = {(round(c.l_t, 9), round(c.u_d, 9)) for c in cases}
    if len(keys) < len(cases):
        warnings.warn("duplicated (l_t, u_d) case leaves the parking fit "
                      "under-determined", stacklevel=2)
    if setup is None:
        setup = ParkingSetup()
    if evaluate is None:
        evaluate = _static_evaluate
    defaults = {"u_d0": setup.kite.depower_offset,
                "alpha_d_max": setup.kite.alpha_d_max_deg,
                "z0": setup.z0, "K": setup.k_profile,
                "c_d_t": setup.tether.drag_coefficient}
    start = dict(defaults)
    if initial:
        start.update({k: float(v) for k, v in initial.items()})
    names = list(free)
    x0 = np.array([start[name] / _PARKING_FIT_SCALES[name]
                   for name in names])

    def objective(x: np.ndarray) -> float:
        values = {name: float(xi) * _PARKING_FIT_SCALES[name]
                  for name, xi in zip(names, x)}
        if "u_d0" in values and not \
                0.0 <= values["u_d0"] < setup.kite.depower_max:
            return _PENALTY
        if "alpha_d_max" in values and values["alpha_d_max"] <= 0.0:
            return _PENALTY
        if "z0" in values and not 0.0 < values["z0"] < 1.0:
            return _PENALTY
        if "c_d_t" in values and values["c_d_t"] < 0.0:
            return _PENALTY
        try:
            trial = _apply_parking_params(setup, values)
            residuals = _case_residuals(trial, cases, evaluate)
        except KiteSimError:
            return _PENALTY
        return max(max(pair) for pair in residuals)

    result = minimize(objective, x0, method="Nelder-Mead",
                      options={"maxiter": max_iter, "xatol": 1e-4,
                               "fatol": 1e-4})
    fitted = {name: float(xi) * _PARKING_FIT_SCALES[name]
              for name, xi in zip(names, result.x)}
    try:
        final = _apply_parking_params(setup, fitted)
        residuals = _case_residuals(final, cases, evaluate)
        worst = max(max(pair) for pair in residuals)
    except KiteSimError as exc:
        residuals = tuple((math.inf, math.inf) for _ in cases)
        worst = math.inf
        result.message = f"{result.message}; final evaluation failed: {exc}"
    return ParkingFitResult(params=fitted, residuals_sigma=residuals,
                            objective=worst, success=worst < 1.0,
                            iterations=int(result.nit),
                            message=str(result.message))


def _static_evaluate(setup: ParkingSetup, case: ParkingCase) -> ParkingCase:
    """Default parking evaluator: the static force balance."""
    return static_parking_case(setup, case.v_w_ref, case.l_t, case.u_d)


# ----------------------------------------------------------------------
# pumping-cycle metrics


def cycle_metrics(log: CycleLog) -> CycleMetrics:
    """Reduce a flight log to pumping-cycle figures of merit.

    A cycle runs from one reel-out start to the next; with several
    complete cycles in the log the figures average over all of them.
    A log that opens in reel-out counts its first record as a cycle
    start. Phases other than reel-out and reel-in (e.g. short parking
    transitions) count toward duration and net energy but not toward
    the phase means.

    Args:
        log: Flight log with monotonic time stamps.

    Returns:
        Phase means, net average power, pumping efficiency, duty cycle
        and their product. Reel-in means are NaN when the cycles
        contain no reel-in records, in which case eta_p is one.

    Raises:
        InsufficientDataError: No complete cycle in the log, or the
            reel-out phase produced no positive energy.
    """
    n = len(log)
    if n < 2:
        raise InsufficientDataError("log too short for cycle metrics", n=n)
    t = np.asarray(log.column("t"), dtype=float)
    power = np.asarray(log.column("power"), dtype=float)
    force = np.asarray(log.column("force"), dtype=float)
    v_t_o = np.asarray(log.column("v_t_o"), dtype=float)
    phases = log.phases()
    out = np.array([p in _REEL_OUT_PHASES for p in phases], dtype=bool)
    inn = np.array([p == FlightPhase.REEL_IN.value for p in phases],
                   dtype=bool)
    starts = np.flatnonzero(out & np.concatenate(([True], ~out[:-1])))
    if starts.size < 2:
        raise InsufficientDataError(
            "log contains no complete pumping cycle",
            reel_out_starts=int(starts.size))
    s0, s1 = int(starts[0]), int(starts[-1])
    # Left-Riemann energy per record over the covered cycles.
    dt = np.diff(t[s0:s1 + 1])
    if np.any(dt <= 0.0):
        raise InsufficientDataError("log time stamps are not increasing")
    span = slice(s0, s1)
    e = power[span] * dt
    out_s = out[span]
    in_s = inn[span]
    e_out = float(e[out_s].sum())
    e_in = -float(e[in_s].sum())
    duration = float(t[s1] - t[s0])
    t_out = float(dt[out_s].sum())
    if e_out <= 0.0:
        raise InsufficientDataError(
            "reel-out produced no positive energy", e_out=e_out)
    eta_p = (e_out - e_in) / e_out
    duty = t_out / duration
    n_cycles = int(starts.size - 1)
    if np.any(in_s):
        f_t_i = float(force[span][in_s].mean())
        v_t_i = float(v_t_o[span][in_s].mean())
    else:
        f_t_i = math.nan
        v_t_i = math.nan
    return CycleMetrics(
        f_t_o=float(force[span][out_s].mean()),
        f_t_i=f_t_i,
        v_t_o=float(v_t_o[span][out_s].mean()),
        v_t_i=v_t_i,
        p_av=float(e.sum()) / duration,
        eta_p=eta_p,
        duty=duty,
        eta_cyc=eta_p * duty,
        n_cycles=n_cycles,
        duration=duration / n_cycles)

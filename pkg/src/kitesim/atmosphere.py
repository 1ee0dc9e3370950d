"""Wind profile and air density models of the lower atmosphere.

The ground frame used everywhere in this package has the x-axis pointing
downwind (east), the y-axis north and the z-axis up, with the origin at the
ground station. The mean wind is horizontal along +x; height dependence
follows either a power law, a log law, or a blended profile that linearly
combines the two so that a measured three-point profile can be matched.
"""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, FitFailureError

#: Height at which the reference wind speed is measured (m).
Z_REF_DEFAULT = 6.0

#: Default calibration sample heights for three-point profile fits (m).
FIT_HEIGHTS_DEFAULT = (100.0, 300.0)


@dataclass
class WindProfile:
    """Mean horizontal wind speed as a function of height.

    Args:
        v_w_ref: Ground wind speed at the reference height (m/s).
        z_ref: Reference measurement height (m).
        z0: Surface roughness length of the log law (m).
        K: Blending gain between log and power law; 0 reduces the blended
            profile to the pure log law.
        alpha_exp: Power-law exponent. When None it is derived so that the
            power law agrees with the log law at height ``fit_height``.
        fit_height: Height z1 used to anchor the derived exponent (m).
        law: One of "power", "log" or "blended"; default law used by
            :func:`wind_speed` when no explicit law is requested.
        turbulence_intensity: Target ratio of wind speed standard deviation
            to mean; 0 disables turbulence.
    """

    v_w_ref: float
    z_ref: float = Z_REF_DEFAULT
    z0: float = 2.0e-4
    K: float = 1.0
    alpha_exp: float | None = None
    fit_height: float = FIT_HEIGHTS_DEFAULT[0]
    law: str = "blended"
    turbulence_intensity: float = 0.0

    def __post_init__(self):
        if not (self.v_w_ref >= 0.0 and math.isfinite(self.v_w_ref)):
            raise ConfigError("reference wind speed must be finite and >= 0",
                              v_w_ref=self.v_w_ref)
        if self.z_ref <= 0.0:
            raise ConfigError("reference height must be positive", z_ref=self.z_ref)
        if not (1e-6 <= self.z0 <= 1.0):
            raise ConfigError("roughness length out of range [1e-6, 1]", z0=self.z0)
        if self.law not in ("power", "log", "blended"):
            raise ConfigError("unknown wind law", law=self.law)
        if self.turbulence_intensity < 0.0:
            raise ConfigError("turbulence intensity must be >= 0",
                              turbulence_intensity=self.turbulence_intensity)

    def exponent(self) -> float:
        """Power-law exponent, deriving it from the log law if not set."""
        if self.alpha_exp is not None:
            return self.alpha_exp
        if self.v_w_ref <= 0.0:
            return 0.0
        cached = self.__dict__.get("_alpha_derived")
        if cached is None:
            v1 = self._v_log(self.fit_height)
            cached = fit_exponent(self.v_w_ref, self.z_ref, v1, self.fit_height)
            self.__dict__["_alpha_derived"] = cached
        return cached

    def _clamped_height(self, z: float) -> float:
        # Below-ground heights happen transiently when a kite crashes;
        # clamping to the roughness length keeps such runs integrable.
        if not math.isfinite(z):
            raise ConfigError("height must be finite", z=z)
        return max(z, self.z0)

    def _v_power(self, z: float) -> float:
        z = self._clamped_height(z)
        return self.v_w_ref * (z / self.z_ref) ** self.exponent()

    def _v_log(self, z: float) -> float:
        z = self._clamped_height(z)
        return self.v_w_ref * math.log(z / self.z0) / math.log(self.z_ref / self.z0)


def wind_speed(profile: WindProfile, z: float, law: str | None = None) -> float:
    """Mean wind speed at height z under the requested profile law.

    Args:
        profile: Wind profile parameters.
        z: Height above ground (m); heights below the roughness length are
            clamped to it.
        law: Override of ``profile.law`` ("power", "log" or "blended").

    Returns:
        Wind speed in m/s.
    """
    law = profile.law if law is None else law
    if law == "power":
        return profile._v_power(z)
    if law == "log":
        return profile._v_log(z)
    if law == "blended":
        v_log = profile._v_log(z)
        v_exp = profile._v_power(z)
        return v_log + profile.K * (v_log - v_exp)
    raise ConfigError("unknown wind law", law=law)


def fit_exponent(v_ref: float, z_ref: float, v1: float, z1: float) -> float:
    """Power-law exponent from two (height, speed) points.

    The speed at z1 comes from the log law during profile fits, which keeps
    the expression well defined (the exponent cannot appear on both sides).
    """
    if z1 <= 0.0 or z_ref <= 0.0 or z1 == z_ref:
        raise ConfigError("need two distinct positive heights", z_ref=z_ref, z1=z1)
    if v1 <= 0.0 or v_ref <= 0.0:
        raise ConfigError("need positive speeds to fit an exponent",
                          v_ref=v_ref, v1=v1)
    return math.log(v1 / v_ref) / math.log(z1 / z_ref)


def fit_profile(samples, z_ref: float = Z_REF_DEFAULT) -> WindProfile:
    """Fit a blended profile to three measured (height, speed) samples.

    The first sample must sit at the reference height and pins v_w_ref. The
    sample at z1 only depends on the roughness length (the blend vanishes
    there because the power-law exponent is anchored at z1), so z0 follows
    from a one-dimensional root solve and K in closed form from the z2
    sample.

    Args:
        samples: Sequence of three (height m, speed m/s) pairs with strictly
            increasing heights.
        z_ref: Expected reference height of the first sample (m).

    Returns:
        Fitted WindProfile with law="blended".

    Raises:
        ConfigError: Malformed samples.
        FitFailureError: Residual above 1e-6 m/s at any sample; the error
            context carries the per-sample residuals.
    """
    pts = [(float(z), float(v)) for z, v in samples]
    if len(pts) != 3:
        raise ConfigError("profile fit needs exactly three samples", n=len(pts))
    heights = [z for z, _ in pts]
    if not (heights[0] < heights[1] < heights[2]):
        raise ConfigError("sample heights must be strictly increasing",
                          heights=tuple(heights))
    if not math.isclose(heights[0], z_ref, rel_tol=0.0, abs_tol=1e-9):
        raise ConfigError("first sample must sit at the reference height",
                          z=heights[0], z_ref=z_ref)
    v_ref = pts[0][1]
    if v_ref <= 0.0:
        raise ConfigError("reference wind speed must be positive", v_w_ref=v_ref)
    (z1, v1), (z2, v2) = pts[1], pts[2]

    def log_residual(z0):
        prof = WindProfile(v_w_ref=v_ref, z_ref=z_ref, z0=z0, K=0.0,
                           fit_height=z1, law="log")
        return wind_speed(prof, z1, law="log") - v1

    from scipy.optimize import brentq

    lo, hi = 1e-6, 1.0
    r_lo, r_hi = log_residual(lo), log_residual(hi)
    if r_lo == 0.0:
        z0 = lo
    elif r_hi == 0.0:
        z0 = hi
    elif r_lo * r_hi > 0.0:
        # No sign change: take the better bracket end and let the residual
        # check below report the failure.
        z0 = lo if abs(r_lo) < abs(r_hi) else hi
    else:
        z0 = brentq(log_residual, lo, hi, xtol=1e-12, rtol=8.9e-16)

    base = WindProfile(v_w_ref=v_ref, z_ref=z_ref, z0=z0, K=0.0,
                       fit_height=z1, law="blended")
    v_log_2 = base._v_log(z2)
    v_exp_2 = base._v_power(z2)
    denom = v_log_2 - v_exp_2
    K = 0.0 if abs(denom) < 1e-12 else (v2 - v_log_2) / denom
    if not (-5.0 <= K <= 5.0):
        raise FitFailureError("blend gain outside the trusted range", K=K)

    fitted = WindProfile(v_w_ref=v_ref, z_ref=z_ref, z0=z0, K=K,
                         fit_height=z1, law="blended")
    residuals = tuple(wind_speed(fitted, z) - v for z, v in pts)
    if max(abs(r) for r in residuals) > 1e-6:
        raise FitFailureError("wind profile fit residual above 1e-6 m/s",
                              residuals=residuals, z0=z0, K=K)
    return fitted


@dataclass
class AirDensityModel:
    """Exponential barometric density decay rho0 * exp(-z / scale_height)."""

    rho0: float = 1.225
    scale_height: float = 8550.0

    def __post_init__(self):
        if self.rho0 <= 0.0 or self.scale_height <= 0.0:
            raise ConfigError("density parameters must be positive",
                              rho0=self.rho0, scale_height=self.scale_height)


def air_density(model: AirDensityModel, z: float) -> float:
    """Air density at height z (kg/m^3); z below 0 is clamped to 0."""
    if not math.isfinite(z):
        raise ConfigError("height must be finite", z=z)
    return model.rho0 * math.exp(-max(z, 0.0) / model.scale_height)


class WindField:
    """Wind vector source combining a mean profile with slow turbulence.

    Turbulence is a single first-order low-pass filtered Gaussian gust
    factor (time constant 2 s) applied to the whole column, scaled so the
    stationary standard deviation over mean equals the configured
    intensity. State advances once per control interval from a seeded
    generator, which keeps runs reproducible.
    """

    #: Gust low-pass time constant (s).
    TAU = 2.0

    def __init__(self, profile: WindProfile, density: AirDensityModel | None = None,
                 seed: int = 0):
        self.profile = profile
        self.density = density if density is not None else AirDensityModel()
        self._rng = np.random.default_rng(seed)
        self._gust = 0.0

    def advance(self, dt: float) -> None:
        """Advance the gust state by dt seconds (call once per interval)."""
        sigma = self.profile.turbulence_intensity
        if sigma <= 0.0:
            self._gust = 0.0
            return
        a = math.exp(-dt / self.TAU)
        self._gust = a * self._gust + math.sqrt(1.0 - a * a) * sigma * \
            self._rng.standard_normal()

    def gust_factor(self) -> float:
        return self._gust

    def speed(self, z: float) -> float:
        """Instantaneous wind speed at height z including the active gust."""
        return wind_speed(self.profile, z) * (1.0 + self._gust)

    def vector(self, z: float) -> np.ndarray:
        """Instantaneous wind vector (downwind +x) at height z."""
        return np.array([self.speed(z), 0.0, 0.0])

    def speeds_at(self, z: np.ndarray) -> np.ndarray:
        """Instantaneous wind speeds for an array of heights."""
        p = self.profile
        zc = np.maximum(np.asarray(z, dtype=float), p.z0)
        v_log = p.v_w_ref * np.log(zc / p.z0) / math.log(p.z_ref / p.z0)
        if p.law == "log":
            v = v_log
        else:
            v_exp = p.v_w_ref * (zc / p.z_ref) ** p.exponent()
            if p.law == "power":
                v = v_exp
            else:
                v = v_log + p.K * (v_log - v_exp)
        return v * (1.0 + self._gust)

    def vector_at(self, z: np.ndarray) -> np.ndarray:
        """Wind vectors for an array of heights, shape (n, 3)."""
        z = np.asarray(z, dtype=float)
        out = np.zeros((z.size, 3))
        out[:, 0] = self.speeds_at(z)
        return out

    def rho(self, z: float) -> float:
        return air_density(self.density, z)

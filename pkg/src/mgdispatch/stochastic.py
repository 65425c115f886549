"""Random-input models and device conversion curves.

Wind speed is Weibull, the normalised irradiance is Beta and bus load is
Gaussian.  Wind turbines follow a piecewise power curve with a quadratic
partial-load region; PV output is linear in irradiance with a temperature
correction.
"""

from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleMomentsError, InvalidInputError, InvalidParameterError


def _finite(*values):
    return all(math.isfinite(v) for v in values)


def fit_wt_quadratic(v_ci, v_r):
    """Quadratic through (v_ci, 0), (v_r, 1) and the cubic-law midpoint.

    The third anchor sits at v_m = (v_ci + v_r) / 2 with value (v_m / v_r)**3.
    Returns ``(a, b, c)`` such that the partial-load fraction is a*v**2 + b*v + c.
    """
    if not _finite(v_ci, v_r) or not 0 < v_ci < v_r:
        raise InvalidParameterError(f"need 0 < v_ci < v_r, got v_ci={v_ci}, v_r={v_r}")
    v_m = 0.5 * (v_ci + v_r)
    speeds = np.array([v_ci, v_r, v_m], dtype=float)
    lhs = np.vander(speeds, 3)
    rhs = np.array([0.0, 1.0, (v_m / v_r) ** 3])
    a, b, c = np.linalg.solve(lhs, rhs)
    return float(a), float(b), float(c)


@dataclass(frozen=True)
class WtParams:
    p_rate: float = 250.0
    v_ci: float = 2.0
    v_r: float = 14.0
    v_co: float = 25.0
    quad_a: float | None = None
    quad_b: float | None = None
    quad_c: float | None = None

    def __post_init__(self):
        if not _finite(self.p_rate, self.v_ci, self.v_r, self.v_co):
            raise InvalidParameterError("wind turbine parameters must be finite")
        if not 0 < self.v_ci < self.v_r < self.v_co:
            raise InvalidParameterError("need 0 < v_ci < v_r < v_co")
        if self.p_rate <= 0:
            raise InvalidParameterError("p_rate must be positive")
        if self.quad_a is None or self.quad_b is None or self.quad_c is None:
            a, b, c = fit_wt_quadratic(self.v_ci, self.v_r)
            object.__setattr__(self, "quad_a", a)
            object.__setattr__(self, "quad_b", b)
            object.__setattr__(self, "quad_c", c)
        for v, target in ((self.v_ci, 0.0), (self.v_r, 1.0)):
            if abs(self._quad(v) - target) > 1e-9:
                raise InvalidParameterError(
                    f"partial-load quadratic must equal {target} at v={v}"
                )

    def _quad(self, v):
        return self.quad_a * v * v + self.quad_b * v + self.quad_c

    def _partial(self, v):
        # expanded about v_ci, where the quadratic vanishes, so the curve
        # starts from exactly zero
        w = v - self.v_ci
        return w * (self.quad_a * w + 2 * self.quad_a * self.v_ci + self.quad_b)


def wt_power(v, p: WtParams):
    """Turbine output in kW at hub wind speed ``v`` (m/s).  Accepts arrays."""
    v_arr = np.asarray(v, dtype=float)
    if np.any(v_arr < 0) or not np.all(np.isfinite(v_arr)):
        raise InvalidInputError("wind speed must be finite and non-negative")
    partial = np.clip(p._partial(v_arr), 0.0, 1.0) * p.p_rate
    out = np.where(
        v_arr < p.v_ci,
        0.0,
        np.where(v_arr < p.v_r, partial, np.where(v_arr <= p.v_co, p.p_rate, 0.0)),
    )
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeibullDist:
    shape: float
    scale: float

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidParameterError("Weibull shape and scale must be positive")

    def mean(self):
        return self.scale * math.gamma(1.0 + 1.0 / self.shape)


def weibull_inverse_cdf(u, d: WeibullDist):
    u = np.asarray(u, dtype=float)
    return d.scale * (-np.log1p(-u)) ** (1.0 / d.shape)


def sample_wind_speed(d: WeibullDist, rng: np.random.Generator, size=None):
    """Inverse-CDF Weibull draw; ``u`` is uniform on [0, 1)."""
    out = weibull_inverse_cdf(rng.random(size), d)
    return float(out) if size is None else out


@dataclass(frozen=True)
class BetaDist:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise InvalidParameterError("Beta parameters must be positive")

    def mean(self):
        return self.alpha / (self.alpha + self.beta)

    def std(self):
        s = self.alpha + self.beta
        return math.sqrt(self.alpha * self.beta / (s * s * (s + 1.0)))


def beta_params_from_moments(mean, std, variant="printed"):
    """Beta parameters from a mean and standard deviation of the fraction.

    ``variant="printed"`` uses beta = (1 - m) * (m * (1 + m) / s**2 - 1), the
    form the model was published with.  ``variant="standard"`` uses the
    moment-exact m * (1 - m).  Either way alpha = m * beta / (1 - m), so the
    Beta mean always equals ``mean``; only the standard variant reproduces
    ``std`` as well.
    """
    if not (0 < mean < 1) or not std > 0 or not _finite(std):
        raise InvalidParameterError(f"need 0 < mean < 1 and std > 0, got {mean}, {std}")
    # Exact rational arithmetic on the shortest decimal form of the inputs, so
    # decimal moments such as (0.5, 0.1) give integral parameters exactly.
    m, sd = Fraction(repr(float(mean))), Fraction(repr(float(std)))
    if variant == "printed":
        spread = m * (1 + m)
    elif variant == "standard":
        spread = m * (1 - m)
    else:
        raise InvalidParameterError(f"unknown Beta moment variant {variant!r}")
    b = (1 - m) * (spread / (sd * sd) - 1)
    alpha, beta = float(m * b / (1 - m)), float(b)
    if alpha <= 0 or beta <= 0:
        raise InfeasibleMomentsError(
            f"moments mean={mean}, std={std} give alpha={alpha}, beta={beta}"
        )
    return BetaDist(alpha, beta)


def sample_irradiance_fraction(d: BetaDist, rng: np.random.Generator, size=None):
    out = rng.beta(d.alpha, d.beta, size)
    return float(out) if size is None else out


@dataclass(frozen=True)
class PvParams:
    p_stc: float = 250.0
    g_stc: float = 1000.0
    k: float = 0.001
    t_ref: float = 25.0
    t_cell: float = 25.0

    def __post_init__(self):
        if not (self.p_stc > 0 and self.g_stc > 0):
            raise InvalidParameterError("p_stc and g_stc must be positive")


def pv_power(g, p: PvParams, t_cell=None):
    """PV output (kW) at irradiance ``g`` (W/m²), clamped at zero.

    ``t_cell`` overrides ``p.t_cell`` and may be an array matching ``g``.
    """
    g_arr = np.asarray(g, dtype=float)
    if np.any(g_arr < 0) or not np.all(np.isfinite(g_arr)):
        raise InvalidInputError("irradiance must be finite and non-negative")
    tc = p.t_cell if t_cell is None else np.asarray(t_cell, dtype=float)
    out = p.p_stc * (g_arr / p.g_stc) * (1.0 + p.k * (tc - p.t_ref))
    out = np.maximum(out, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class NormalDist:
    mean: float
    std: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and self.std >= 0):
            raise InvalidParameterError("normal std must be non-negative")


def sample_load(d: NormalDist, rng: np.random.Generator, size=None):
    """Gaussian load draw, negative values clamped to 0."""
    out = np.maximum(rng.normal(d.mean, d.std, size), 0.0)
    return float(out) if size is None else out

"""Closed forms for the nested exponential integrals of the expansion.

Every integral has a coefficient function ``c(t) = c0 + cd e^{k_d t} +
cf e^{k_f t}`` and exponential kernels in the variance mean-reversion speed
``k_v``:

    I1(c)     = int_0^T dt e^{k_v t}  int_t^T du e^{-k_v u} c(u)
    I1_2k(c)  = int_0^T dt e^{2k_v t} int_t^T du e^{-2k_v u} c(u)
    I2(c)     = int_0^T dt e^{k_v t}  int_t^T du int_u^T ds e^{-k_v s} c(s)
    I3(c1,c2) = int_0^T dt e^{2k_v t} int_t^T du e^{-k_v u} c1(u) int_u^T ds e^{-k_v s} c2(s)
    I4(c)     = int_0^T dt e^{k_v t}  int_t^T du e^{k_v u} int_u^T ds e^{-2k_v s} c(s)

The closed forms divide by ``k - k_v`` and ``k - 2 k_v``; when such a gap
times ``T`` drops below :data:`SINGULAR_TOL` (for a non-zero coefficient)
the integral is evaluated by nested quadrature instead, which is exact at
the removable singularity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import quad_oracle
from .model import ModelParams

SINGULAR_TOL = 1e-2
em = math.expm1


@dataclass(frozen=True)
class ExpCoeffs:
    """``c(t) = c0 + cd e^{k_d t} + cf e^{k_f t}`` on ``[0, T]`` with kernel speed ``k_v``."""

    c0: float
    cd: float
    cf: float
    k_d: float
    k_f: float
    k_v: float
    T: float
    x_d: float = field(init=False, repr=False)
    x_f: float = field(init=False, repr=False)
    x_v: float = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "x_d", math.exp(self.k_d * self.T))
        object.__setattr__(self, "x_f", math.exp(self.k_f * self.T))
        object.__setattr__(self, "x_v", math.exp(self.k_v * self.T))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.c0 + self.cd * np.exp(self.k_d * t) + self.cf * np.exp(self.k_f * t)

    def _same_grid(self, other: "ExpCoeffs"):
        if (self.k_d, self.k_f, self.k_v, self.T) != (other.k_d, other.k_f, other.k_v, other.T):
            raise ValueError("coefficient functions live on different exponents")

    def __add__(self, other: "ExpCoeffs") -> "ExpCoeffs":
        self._same_grid(other)
        return ExpCoeffs(self.c0 + other.c0, self.cd + other.cd, self.cf + other.cf,
                         self.k_d, self.k_f, self.k_v, self.T)

    def __sub__(self, other: "ExpCoeffs") -> "ExpCoeffs":
        self._same_grid(other)
        return ExpCoeffs(self.c0 - other.c0, self.cd - other.cd, self.cf - other.cf,
                         self.k_d, self.k_f, self.k_v, self.T)

    def plus_one(self) -> "ExpCoeffs":
        return ExpCoeffs(self.c0 + 1.0, self.cd, self.cf, self.k_d, self.k_f, self.k_v, self.T)

    @property
    def is_zero(self) -> bool:
        return self.c0 == 0.0 and self.cd == 0.0 and self.cf == 0.0


def constant(value: float, k_v: float, T: float, k_d: float = 1.0, k_f: float = 1.0) -> ExpCoeffs:
    return ExpCoeffs(value, 0.0, 0.0, k_d, k_f, k_v, T)


@dataclass(frozen=True)
class RateAdjustment:
    """The rate-adjustment function alpha(t) and its shifted form 1 + alpha(t)."""

    alpha: ExpCoeffs

    @property
    def one_plus_alpha(self) -> ExpCoeffs:
        return self.alpha.plus_one()

    def at_maturity(self) -> float:
        a = self.alpha
        return a.c0 + a.cd * a.x_d + a.cf * a.x_f


def alpha_coeffs(params: ModelParams, T: float) -> RateAdjustment:
    """Exponential-sum coefficients of

    ``alpha(t) = rho_sd eta_d (1 - e^{-k_d (T-t)}) / (k_d sqrt v0)
               - rho_sf eta_f (1 - e^{-k_f (T-t)}) / (k_f sqrt v0)``.
    """
    sv0 = params.sqrt_v0
    k_d, k_f = params.hw_dom.k, params.hw_for.k
    a_d = params.corr.sd * params.hw_dom.eta / (k_d * sv0)
    a_f = params.corr.sf * params.hw_for.eta / (k_f * sv0)
    c0 = a_d - a_f
    cd = -a_d * math.exp(-k_d * T)
    cf = a_f * math.exp(-k_f * T)
    return RateAdjustment(ExpCoeffs(c0, cd, cf, k_d, k_f, params.heston.k_v, T))


def _near(gap: float, T: float) -> bool:
    return abs(gap) * T < SINGULAR_TOL


def _singular(c: ExpCoeffs, *multiples: float) -> bool:
    """True if a non-zero exponential term sits near ``k = m * k_v``."""
    if c.k_v * c.T < SINGULAR_TOL:
        return True
    for coef, k in ((c.cd, c.k_d), (c.cf, c.k_f)):
        if coef != 0.0 and any(_near(k - m * c.k_v, c.T) for m in multiples):
            return True
    return False


def _i1_closed(c0, cd, cf, kd, kf, kv, T):
    return (c0 * T / kv + cd * em(kd * T) / (kv * kd) + cf * em(kf * T) / (kv * kf)
            + c0 * em(-kv * T) / kv**2
            - (cd * em((kd - kv) * T) / (kv * (kd - kv)) if cd else 0.0)
            - (cf * em((kf - kv) * T) / (kv * (kf - kv)) if cf else 0.0))


def I1(c: ExpCoeffs, force: str | None = None) -> float:
    """``int_0^T dt e^{k_v t} int_t^T du e^{-k_v u} c(u)``.

    ``force`` = "closed" or "quad" bypasses the singular-point switch.
    """
    if c.is_zero:
        return 0.0
    if force == "quad" or (force is None and _singular(c, 1.0)):
        return quad_oracle.kernel_integral("I1", c.k_v, c.T, c)
    return _i1_closed(c.c0, c.cd, c.cf, c.k_d, c.k_f, c.k_v, c.T)


def I1_2k(c: ExpCoeffs, force: str | None = None) -> float:
    """I1 with ``k_v -> 2 k_v`` in both kernels."""
    if c.is_zero:
        return 0.0
    if force == "quad" or (force is None and _singular(c, 2.0)):
        return quad_oracle.kernel_integral("I1_2k", c.k_v, c.T, c)
    return _i1_closed(c.c0, c.cd, c.cf, c.k_d, c.k_f, 2.0 * c.k_v, c.T)


def I2(c: ExpCoeffs, force: str | None = None) -> float:
    """``int_0^T dt e^{k_v t} int_t^T du int_u^T ds e^{-k_v s} c(s)``."""
    if c.is_zero:
        return 0.0
    if force == "quad" or (force is None and _singular(c, 1.0)):
        return quad_oracle.kernel_integral("I2", c.k_v, c.T, c)
    kv, T = c.k_v, c.T
    e1 = em(-kv * T)
    # 1 - (1 + kv T)/x_v = -(expm1(-kv T) + kv T e^{-kv T})
    out = c.c0 * (T / kv**2 + e1 / kv**3 + (e1 + kv * T * math.exp(-kv * T)) / kv**3)
    for coef, k in ((c.cd, c.k_d), (c.cf, c.k_f)):
        if coef == 0.0:
            continue
        g = k - kv
        eg = em(g * T)
        # 1 - (1 - g T) x/x_v = -(expm1(g T) - g T e^{g T})
        out += coef * (em(k * T) / (kv**2 * k) - eg / (kv**2 * g)
                       + (eg - g * T * math.exp(g * T)) / (kv * g * g))
    return out


def _i3_quadratic(c: ExpCoeffs) -> float:
    kv, T = c.k_v, c.T
    out = c.c0**2 * (T / (2.0 * kv**2) + em(-kv * T) / kv**3 - em(-2.0 * kv * T) / (4.0 * kv**3))
    for coef, k in ((c.cd, c.k_d), (c.cf, c.k_f)):
        if coef == 0.0:
            continue
        g = k - kv
        out += coef**2 * (em(g * T) / ((k + kv) * g * g)
                          + em(2.0 * k * T) / (4.0 * k * kv * (k + kv))
                          - em(2.0 * g * T) / (4.0 * kv * g * g))
        out += c.c0 * coef * ((k + 2.0 * kv) * em(k * T) / (2.0 * kv**2 * (k + kv) * k)
                              + em((k - 2.0 * kv) * T) / (2.0 * kv**2 * g)
                              - em(-kv * T) / (kv * (k + kv) * g)
                              - em(g * T) / (kv**2 * g))
    if c.cd != 0.0 and c.cf != 0.0:
        kd, kf = c.k_d, c.k_f
        gd, gf = kd - kv, kf - kv
        out += c.cd * c.cf * (
            em(gd * T) / (gd * (kf * kf - kv * kv))
            + em(gf * T) / (gf * (kd * kd - kv * kv))
            - em((gd + gf) * T) / (2.0 * kv * gd * gf)
            + (1.0 / (kd + kv) + 1.0 / (kf + kv)) * em((kd + kf) * T) / (2.0 * kv * (kd + kf)))
    return out


def I3(c1: ExpCoeffs, c2: ExpCoeffs | None = None, force: str | None = None) -> float:
    """``int_0^T dt e^{2k_v t} int_t^T du e^{-k_v u} c1(u) int_u^T ds e^{-k_v s} c2(s)``.

    The closed form is the quadratic form ``Q(c) = I3(c, c)``; for distinct
    arguments this returns the symmetrised value
    ``(I3(c1, c2) + I3(c2, c1)) / 2 = (Q(c1 + c2) - Q(c1 - c2)) / 4``.
    """
    if c2 is None or c2 == c1:
        if c1.is_zero:
            return 0.0
        if force == "quad" or (force is None and _singular(c1, 1.0)):
            return quad_oracle.kernel_integral("I3", c1.k_v, c1.T, c1)
        return _i3_quadratic(c1)
    return 0.25 * (I3(c1 + c2, force=force) - I3(c1 - c2, force=force))


def I4(c: ExpCoeffs, force: str | None = None) -> float:
    """``int_0^T dt e^{k_v t} int_t^T du e^{k_v u} int_u^T ds e^{-2k_v s} c(s)``."""
    if c.is_zero:
        return 0.0
    if force == "quad" or (force is None and _singular(c, 1.0, 2.0)):
        return quad_oracle.kernel_integral("I4", c.k_v, c.T, c)
    kv, T = c.k_v, c.T
    out = c.c0 * (T / (2.0 * kv**2) + em(-kv * T) / kv**3 - em(-2.0 * kv * T) / (4.0 * kv**3))
    for coef, k in ((c.cd, c.k_d), (c.cf, c.k_f)):
        if coef == 0.0:
            continue
        g, h = k - kv, k - 2.0 * kv
        out += coef * (em(k * T) / (2.0 * kv**2 * k) - em(g * T) / (kv**2 * g)
                       + em(h * T) / (2.0 * kv**2 * h))
    return out


def _phi2(a: float) -> float:
    """(e^a - 1 - a) / a^2, accurate near zero."""
    if abs(a) < 1e-3:
        return 0.5 + a / 6.0 + a * a / 24.0 + a**3 / 120.0
    return (em(a) - a) / (a * a)


def _b_integral(k: float, T: float) -> float:
    """int_0^T B(t, T) dt with B = (e^{-k(T-t)} - 1)/k, i.e. -T/k + (1 - e^{-kT})/k^2."""
    return -T * T * _phi2(-k * T)


BB_SMALL_KT = 0.1
_GL_X, _GL_W = np.polynomial.legendre.leggauss(32)


def _bb_integral(k1: float, k2: float, T: float) -> float:
    """int_0^T B1(t, T) B2(t, T) dt."""
    if min(k1, k2) * T < BB_SMALL_KT:
        # the closed form cancels to ~1/(k T) relative digits; the integrand
        # tau^2 phi1(-k1 tau) phi1(-k2 tau) itself is smooth and positive
        def f(tau):
            return np.expm1(-k1 * tau) * np.expm1(-k2 * tau) / (k1 * k2)
        if max(k1, k2) * T <= 20.0:
            # entire integrand of exponential type <= 20: 32 nodes are exact to roundoff
            return 0.5 * T * float(_GL_W @ f(0.5 * T * (_GL_X + 1.0)))
        return quad_oracle.quad(f, 0.0, T, tol_rel=1e-14, tol_abs=0.0)

    # with m(k) = T - (1 - e^{-kT})/k = k T^2 phi2(-kT):
    # (m(k1) + m(k2) - m(k1 + k2)) / (k1 k2)
    def m(k):
        return k * T * T * _phi2(-k * T)
    return (m(k1) + m(k2) - m(k1 + k2)) / (k1 * k2)


def y0_hhw(params: ModelParams, T: float) -> float:
    """Total variance ``int_0^T sigma_F(t, v0)^2 dt`` of the T-forward FX rate."""
    if T <= 0.0:
        return 0.0
    v0 = params.heston.v0
    sv0 = params.sqrt_v0
    c = params.corr
    kd, ed = params.hw_dom.k, params.hw_dom.eta
    kf, ef = params.hw_for.k, params.hw_for.eta
    out = v0 * T
    if ed != 0.0:
        out += ed * ed * _bb_integral(kd, kd, T) - 2.0 * sv0 * c.sd * ed * _b_integral(kd, T)
    if ef != 0.0:
        out += ef * ef * _bb_integral(kf, kf, T) + 2.0 * sv0 * c.sf * ef * _b_integral(kf, T)
    if ed != 0.0 and ef != 0.0:
        out -= 2.0 * c.df * ed * ef * _bb_integral(kd, kf, T)
    return out

"""Heston put prices from the characteristic function (deterministic rates)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import ModelParams, OptionSpec
from .quad_oracle import QuadratureError, quad

ENVELOPE_TOL = 1e-14


class ChfIntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ChfParams:
    k_v: float
    theta_v: float
    gamma: float
    rho_sv: float
    v0: float
    F0: float
    T: float
    Dd: float = 1.0

    def __post_init__(self):
        if not (self.k_v > 0 and self.theta_v > 0 and self.v0 > 0 and self.gamma >= 0):
            raise ValueError("Heston parameters must be positive (gamma >= 0)")
        if not abs(self.rho_sv) < 1.0:
            raise ValueError("|rho_sv| must be below 1")
        if not (self.F0 > 0 and self.T > 0 and 0 < self.Dd <= 1.0 + 1e-15):
            raise ValueError("invalid forward, maturity or discount factor")

    @classmethod
    def from_model(cls, params: ModelParams, opt: OptionSpec) -> "ChfParams":
        h = params.heston
        return cls(h.k_v, h.theta_v, h.gamma, params.corr.sv, h.v0, opt.F0, opt.maturity,
                   params.hw_dom.zero_curve.discount(opt.maturity))


def _log1p_over(w):
    """log(1 + w) / w for complex w, exact as w -> 0."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < 1e-5
    safe = np.where(small, 1.0, w)
    big = np.log1p(safe) / safe
    series = 1.0 - w / 2.0 + w * w / 3.0 - w**3 / 4.0
    return np.where(small, series, big)


def charfn(u, p: ChfParams):
    """E[exp(i u log(F_T / F_0))] under the Heston dynamics dF/F = sqrt(v) dW.

    Uses the rotation-free form with ``g = (xi - d) / (xi + d)`` (|g| < 1) and
    rewrites every ``1 / gamma^2`` factor through ``xi - d = -gamma^2 (u^2 + iu) / (xi + d)``,
    so the formula stays exact as vol-of-vol goes to zero.
    """
    u = np.asarray(u, dtype=complex)
    k, th, sig, rho, T = p.k_v, p.theta_v, p.gamma, p.rho_sv, p.T
    q = u * u + 1j * u
    xi = k - rho * sig * 1j * u
    d = np.sqrt(xi * xi + sig * sig * q)
    # xi + d vanishes only at q = 0 with Re(xi) <= 0; every term carries q there
    s = np.where(q == 0, 1.0, xi + d)
    g = -sig * sig * q / (s * s)
    e = np.exp(-d * T)
    one_minus_e = -np.expm1(-d * T)
    D = -q / s * one_minus_e / (1.0 - g * e)
    # log((1 - g e) / (1 - g)) / sig^2 = log1p(w)/w * w/sig^2
    w_over = -q / (s * s) * one_minus_e / (1.0 - g)
    w = sig * sig * w_over
    log_term = _log1p_over(w) * w_over
    C = k * th * (-q * T / s - 2.0 * log_term)
    return np.exp(C + D * p.v0)


def _truncation(p: ChfParams, K: float) -> float:
    """Upper limit where the Lewis integrand envelope is below ENVELOPE_TOL."""
    scale = math.sqrt(p.F0 * K)
    u = 10.0
    while u < 1e6:
        env = scale * abs(charfn(u - 0.5j, p)) / (u * u + 0.25)
        if env < ENVELOPE_TOL:
            return u
        u *= 1.5
    return u


def _lewis_integral(p: ChfParams, K: float, upper: float | None = None) -> float:
    k = math.log(p.F0 / K)

    def f(u):
        return np.real(np.exp(1j * u * k) * charfn(u - 0.5j, p)) / (u * u + 0.25)

    U = _truncation(p, K) if upper is None else upper
    try:
        return quad(f, 0.0, U, tol_rel=1e-12, tol_abs=1e-15)
    except QuadratureError as exc:
        raise ChfIntegrationError(f"ChF integral did not converge: {exc}") from None


def price_put_chf(p: ChfParams, K: float, upper: float | None = None) -> float:
    """Put price via the Lewis single-integral representation.

    ``C = Dd (F - sqrt(F K)/pi * int_0^inf Re[e^{iuk} phi(u - i/2)] / (u^2 + 1/4) du)``
    with ``k = log(F/K)``; the put uses the same integral,
    ``P = Dd (K - sqrt(F K)/pi * int ...)``.
    """
    if not K > 0.0:
        raise ValueError("strike must be positive")
    integral = _lewis_integral(p, K, upper)
    return p.Dd * (K - math.sqrt(p.F0 * K) / math.pi * integral)


def price_call_chf(p: ChfParams, K: float, upper: float | None = None) -> float:
    integral = _lewis_integral(p, K, upper)
    return p.Dd * (p.F0 - math.sqrt(p.F0 * K) / math.pi * integral)


def price_heston_chf(params: ModelParams, opt: OptionSpec) -> float:
    p = ChfParams.from_model(params, opt)
    if opt.kind == "put":
        return price_put_chf(p, opt.strike)
    return price_call_chf(p, opt.strike)

"""Second-order vol-of-vol expansion prices for FX puts.

Three pricers share one evaluation core:

* :func:`price_heston_exp` - deterministic rates, total variance ``v0 T``;
* :func:`price_hhw_exp`    - Hull-White rates in both currencies, entering
  through the forward variance ``y0`` and the adjustment ``alpha(t)``;
* :func:`price_hybrid_expchf` - the exact Heston ChF price corrected by the
  rate effect ``price_hhw_exp - price_heston_exp``.

Calls are obtained by put-call parity on the forward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import integrals
from .black_scholes import BsPoint, ImpliedVolError, bs_partials, implied_vol
from .heston_chf import ChfParams, price_put_chf
from .integrals import ExpCoeffs, RateAdjustment
from .model import ModelParams, OptionSpec, PriceResult, validate


@dataclass(frozen=True)
class ExpansionBreakdown:
    """Term-by-term contributions; ``total`` is their sum."""

    x0: float
    y0: float
    bs: float
    xy: float        # rho v0 gamma d_xy BS * I1(1+a)
    xxy: float       # rho^2 v0 gamma^2 d_xxy BS * I2(1+a)
    xxy_rate: float  # -1/2 rho^2 v0 gamma^2 d_xxy BS * I4(a)
    yy: float        # v0 gamma^2 d_yy BS * I3(1+a, 1+a)
    xxyy: float      # 1/2 rho^2 v0^2 gamma^2 d_xxyy BS * I1(1+a)^2
    y_rate: float    # -1/4 gamma^2 d_y BS * I1_2k(a)

    @property
    def terms(self) -> tuple[float, ...]:
        return (self.bs, self.xy, self.xxy, self.xxy_rate, self.yy, self.xxyy, self.y_rate)

    @property
    def total(self) -> float:
        return math.fsum(self.terms)


@dataclass(frozen=True)
class KernelValues:
    """Integrals entering the price; they depend on T and the model only."""

    i1: float
    i2: float
    i3: float
    i4: float
    i1_2k: float

    @classmethod
    def compute(cls, ra: RateAdjustment) -> "KernelValues":
        one_plus = ra.one_plus_alpha
        a = ra.alpha
        return cls(integrals.I1(one_plus), integrals.I2(one_plus), integrals.I3(one_plus),
                   integrals.I4(a), integrals.I1_2k(a))


def _zero_adjustment(params: ModelParams, T: float) -> RateAdjustment:
    return RateAdjustment(ExpCoeffs(0.0, 0.0, 0.0, params.hw_dom.k, params.hw_for.k,
                                    params.heston.k_v, T))


def expansion_terms(params: ModelParams, x0: float, y0: float, K: float, Dd: float,
                    kernels: KernelValues) -> ExpansionBreakdown:
    h = params.heston
    rho, v0, gam = params.corr.sv, h.v0, h.gamma
    d = bs_partials(BsPoint(x0, y0, K, Dd))
    g2 = gam * gam
    r2 = rho * rho
    dxxy = d[(2, 1)]
    return ExpansionBreakdown(
        x0=x0, y0=y0,
        bs=d[(0, 0)],
        xy=rho * v0 * gam * d[(1, 1)] * kernels.i1,
        xxy=r2 * v0 * g2 * dxxy * kernels.i2,
        xxy_rate=-0.5 * r2 * v0 * g2 * dxxy * kernels.i4,
        yy=v0 * g2 * d[(0, 2)] * kernels.i3,
        xxyy=0.5 * r2 * v0 * v0 * g2 * d[(2, 2)] * kernels.i1 * kernels.i1,
        y_rate=-0.25 * g2 * d[(0, 1)] * kernels.i1_2k,
    )


def _discount(params: ModelParams, T: float) -> float:
    return params.hw_dom.zero_curve.discount(T)


def _result(price: float, opt: OptionSpec, Dd: float, method: str, **diag) -> PriceResult:
    if opt.kind == "call":
        put = price
        price = put + Dd * (opt.F0 - opt.strike)
        diag["put_price"] = put
    else:
        put = price
    try:
        iv = implied_vol(put, opt.F0, opt.strike, opt.maturity, Dd)
    except ImpliedVolError:
        iv = None
    return PriceResult(price, iv, method, diag)


def heston_breakdown(params: ModelParams, opt: OptionSpec,
                     kernels: KernelValues | None = None) -> ExpansionBreakdown:
    validate(params, expansion=True)
    T = opt.maturity
    if kernels is None:
        kernels = KernelValues.compute(_zero_adjustment(params, T))
    return expansion_terms(params, math.log(opt.F0), params.heston.v0 * T,
                           opt.strike, _discount(params, T), kernels)


def hhw_breakdown(params: ModelParams, opt: OptionSpec,
                  kernels: KernelValues | None = None,
                  y0: float | None = None) -> ExpansionBreakdown:
    """Breakdown of the stochastic-rate expansion.

    ``y0`` overrides the forward variance (default: :func:`integrals.y0_hhw`).
    """
    validate(params, expansion=True)
    T = opt.maturity
    if kernels is None:
        kernels = KernelValues.compute(integrals.alpha_coeffs(params, T))
    if y0 is None:
        y0 = integrals.y0_hhw(params, T)
    return expansion_terms(params, math.log(opt.F0), y0, opt.strike,
                           _discount(params, T), kernels)


def price_heston_exp(params: ModelParams, opt: OptionSpec) -> PriceResult:
    """Deterministic-rate expansion around ``BS(log F0, v0 T)``."""
    b = heston_breakdown(params, opt)
    return _result(b.total, opt, _discount(params, opt.maturity), "Exp-Heston", breakdown=b)


def price_hhw_exp(params: ModelParams, opt: OptionSpec) -> PriceResult:
    b = hhw_breakdown(params, opt)
    return _result(b.total, opt, _discount(params, opt.maturity), "Exp", breakdown=b)


def delta_stochastic_rates(params: ModelParams, opt: OptionSpec) -> float:
    """Pure stochastic-rate effect: HHW expansion minus Heston expansion (put)."""
    return hhw_breakdown(params, opt).total - heston_breakdown(params, opt).total


def price_hybrid_expchf(params: ModelParams, opt: OptionSpec) -> PriceResult:
    """Heston ChF price plus the expansion's stochastic-rate increment."""
    hhw = hhw_breakdown(params, opt)
    hes = heston_breakdown(params, opt)
    chf = price_put_chf(ChfParams.from_model(params, opt), opt.strike)
    price = chf + (hhw.total - hes.total)
    return _result(price, opt, _discount(params, opt.maturity), "ExpChF",
                   chf_price=chf, hhw_breakdown=hhw, heston_breakdown=hes)

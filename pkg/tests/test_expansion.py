import logging
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from hhwexp.black_scholes import BsPoint, bs_put
from hhwexp.expansion import (KernelValues, delta_stochastic_rates, heston_breakdown,
                              hhw_breakdown, price_heston_exp, price_hhw_exp,
                              price_hybrid_expchf)
from hhwexp.heston_chf import price_heston_chf
from hhwexp.integrals import y0_hhw
from hhwexp.model import (ExpansionAssumptionError, UnsupportedCorrelationError,
                          make_option)
from helpers import random_params

seeds = st.integers(0, 2**32 - 1)
maturities = st.sampled_from([0.5, 1.0, 3.0, 5.0, 10.0])
deltas = st.sampled_from([-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5])


def grid_option(p, T, delta, kind="put"):
    F0 = p.forward(T)
    return make_option(p, F0 * math.exp(0.1 * delta * math.sqrt(T)), T, kind=kind)


def bs_at(p, opt, y):
    return bs_put(BsPoint(math.log(opt.F0), y, opt.strike,
                          p.hw_dom.zero_curve.discount(opt.maturity)))


def test_no_vol_of_vol_is_black_scholes(base):
    p = base.with_changes(gamma=0.0)
    opt = make_option(p, 110.0, 3.0)
    assert price_heston_exp(p, opt).price == bs_at(p, opt, 0.05 * 3.0)
    assert price_hhw_exp(p, opt).price == bs_at(p, opt, y0_hhw(p, 3.0))


def test_uncorrelated_keeps_only_variance_term(base):
    b = heston_breakdown(base.with_changes(rho_sv=0.0), make_option(base, 95.0, 2.0))
    assert b.yy != 0.0
    assert (b.xy, b.xxy, b.xxy_rate, b.xxyy, b.y_rate) == (0.0,) * 5


def test_base_heston_close_to_chf(base):
    opt = make_option(base, 100.0, 1.0)
    exp = price_heston_exp(base, opt)
    chf = price_heston_chf(base, opt)
    assert exp.price == pytest.approx(8.713294837082087, rel=1e-12)
    from hhwexp.black_scholes import implied_vol
    assert abs(exp.implied_vol - implied_vol(chf, 100.0, 100.0, 1.0)) < 10e-4


def test_base_hhw_frozen(base):
    r = price_hhw_exp(base, make_option(base, 100.0, 1.0))
    assert r.method == "Exp"
    assert r.implied_vol == pytest.approx(0.21931642413885327, rel=1e-12)
    assert r.diagnostics["breakdown"].y0 == y0_hhw(base, 1.0)


def test_deterministic_rates_reduce_to_heston(base):
    p = base.with_changes(eta_d=0.0, eta_f=0.0)
    for T in (1.0, 10.0):
        opt = make_option(p, 90.0, T)
        assert price_hhw_exp(p, opt).price == pytest.approx(
            price_heston_exp(p, opt).price, abs=1e-12)
        assert delta_stochastic_rates(p, opt) == 0.0


def test_delta_is_difference_of_pricers(base):
    opt = make_option(base, 100.0, 10.0)
    diff = price_hhw_exp(base, opt).price - price_heston_exp(base, opt).price
    assert delta_stochastic_rates(base, opt) == pytest.approx(diff, abs=1e-13)
    assert delta_stochastic_rates(base, opt) != 0.0


def test_hybrid_reductions(base):
    p = base.with_changes(eta_d=0.0, eta_f=0.0)
    opt = make_option(p, 105.0, 5.0)
    assert price_hybrid_expchf(p, opt).price == pytest.approx(
        price_heston_chf(p, opt), abs=1e-12)
    q = base.with_changes(gamma=0.0)
    opt = make_option(q, 105.0, 5.0)
    assert price_hybrid_expchf(q, opt).price == pytest.approx(
        bs_at(q, opt, y0_hhw(q, 5.0)), abs=1e-9)


def test_assumption_errors(base):
    opt = make_option(base, 100.0, 1.0)
    with pytest.raises(ExpansionAssumptionError):
        price_hhw_exp(base.with_changes(theta_v=0.04), opt)
    with pytest.raises(UnsupportedCorrelationError):
        price_hhw_exp(base.with_changes(rho_vf=0.1), opt)


def test_call_by_parity(base):
    put = price_hhw_exp(base, make_option(base, 95.0, 2.0))
    call = price_hhw_exp(base, make_option(base, 95.0, 2.0, kind="call"))
    assert call.price - put.price == pytest.approx(100.0 - 95.0, abs=1e-12)
    assert call.implied_vol == put.implied_vol


@given(seed=seeds, T=maturities, delta=deltas)
def test_reduction_identity_random(seed, T, delta):
    p = random_params(np.random.default_rng(seed)).with_changes(eta_d=0.0, eta_f=0.0)
    opt = grid_option(p, T, delta)
    hhw = hhw_breakdown(p, opt, y0=p.heston.v0 * T).total
    assert abs(hhw - price_heston_exp(p, opt).price) <= 1e-12 * opt.strike


@given(seed=seeds, T=maturities, delta=deltas)
def test_breakdown_additive(seed, T, delta):
    p = random_params(np.random.default_rng(seed))
    b = hhw_breakdown(p, grid_option(p, T, delta))
    assert b.total == pytest.approx(sum(b.terms), rel=1e-13, abs=1e-13 * max(map(abs, b.terms)))


# The expansion is a truncated series around v0 and is not arbitrage-free by
# construction. The bound is asserted where the Feller ratio 2 k theta / gamma^2
# is at least that of the harshest reference case (gamma=0.6, k=3, theta=0.05).
FELLER_REGIME = 0.8
log = logging.getLogger(__name__)


def feller_ratio(p):
    h = p.heston
    return 2.0 * h.k_v * h.theta_v / h.gamma**2 if h.gamma > 0 else math.inf


def lower_bound_gap(p, T, delta):
    opt = grid_option(p, T, delta)
    Dd = p.hw_dom.zero_curve.discount(T)
    return price_hhw_exp(p, opt).price - Dd * max(opt.strike - opt.F0, 0.0)


@given(seed=seeds, T=maturities, delta=deltas)
def test_put_lower_bound(seed, T, delta):
    p = random_params(np.random.default_rng(seed), gamma_max=0.6)
    assume(feller_ratio(p) >= FELLER_REGIME)
    assert lower_bound_gap(p, T, delta) >= -1e-9


def test_put_lower_bound_violations_only_outside_regime():
    violations = []
    for seed in range(300):
        p = random_params(np.random.default_rng(seed), gamma_max=0.6)
        for T in (0.5, 1.0, 5.0):
            for delta in (-1.5, -0.5, 0.0, 1.5):
                gap = lower_bound_gap(p, T, delta)
                if gap < -1e-9:
                    violations.append((feller_ratio(p), T, delta, gap))
    for ratio, T, delta, gap in violations:
        log.warning("put below intrinsic by %.3g (Feller ratio %.3f, T=%g, delta=%g)",
                    -gap, ratio, T, delta)
    assert all(v[0] < FELLER_REGIME for v in violations)


@given(seed=seeds, T=maturities)
def test_atm_price_increases_with_variance(seed, T):
    p = random_params(np.random.default_rng(seed), gamma_max=0.6)
    opt = grid_option(p, T, 0.0)
    bumped = p.with_changes(v0=p.heston.v0 + 1e-4)
    assert price_hhw_exp(bumped, grid_option(bumped, T, 0.0)).price > price_hhw_exp(p, opt).price


def test_kernels_reused_across_strikes(base):
    from hhwexp.integrals import alpha_coeffs
    k = KernelValues.compute(alpha_coeffs(base, 3.0))
    for K in (90.0, 110.0):
        opt = make_option(base, K, 3.0)
        assert hhw_breakdown(base, opt, kernels=k).total == price_hhw_exp(base, opt).price

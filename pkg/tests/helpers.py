"""Shared random draws and brute-force references for the tests."""
import math

import numpy as np

from hhwexp.integrals import ExpCoeffs
from hhwexp.model import CorrMatrix, HestonParams, HullWhiteParams, ModelParams, ZeroCurve
from hhwexp.quad_oracle import quad

MATURITIES = (1.0, 3.0, 5.0, 7.0, 10.0)


def random_coeffs(rng, k_d=None, k_f=None, k_v=None, T=None) -> ExpCoeffs:
    k_v = rng.uniform(0.1, 5.0) if k_v is None else k_v
    k_d = rng.uniform(0.005, 2.0) if k_d is None else k_d
    k_f = rng.uniform(0.005, 2.0) if k_f is None else k_f
    T = float(rng.choice(MATURITIES)) if T is None else T
    c0, cd, cf = rng.uniform(-2.0, 2.0, 3)
    return ExpCoeffs(c0, cd, cf, k_d, k_f, k_v, T)


def random_corr(rng) -> CorrMatrix:
    while True:
        sv, sd, sf, df = rng.uniform(-0.9, 0.9, 4)
        c = CorrMatrix(sv=sv, sd=sd, sf=sf, df=df)
        if np.linalg.eigvalsh(c.matrix()).min() > 1e-3:
            return c


def random_params(rng, gamma_max=0.6, eta_max=0.05) -> ModelParams:
    v0 = rng.uniform(0.01, 0.2)
    heston = HestonParams(v0, v0, rng.uniform(0.1, 5.0), rng.uniform(0.0, gamma_max))
    dom = HullWhiteParams(rng.uniform(0.005, 2.0), rng.uniform(0.0, eta_max),
                          ZeroCurve.flat(rng.uniform(0.0, 0.05)))
    fgn = HullWhiteParams(rng.uniform(0.005, 2.0), rng.uniform(0.0, eta_max),
                          ZeroCurve.flat(rng.uniform(0.0, 0.05)))
    return ModelParams(heston, dom, fgn, random_corr(rng), 100.0)


def y0_by_quadrature(params: ModelParams, T: float) -> float:
    """int_0^T sigma_F(t, v0)^2 dt, written out term by term from the SDEs."""
    v0 = params.heston.v0
    c = params.corr
    kd, ed = params.hw_dom.k, params.hw_dom.eta
    kf, ef = params.hw_for.k, params.hw_for.eta

    def f(t):
        bd = np.expm1(-kd * (T - t)) / kd
        bf = np.expm1(-kf * (T - t)) / kf
        return (v0 + ed**2 * bd**2 + ef**2 * bf**2 - 2 * c.sd * ed * bd * math.sqrt(v0)
                + 2 * c.sf * ef * bf * math.sqrt(v0) - 2 * c.df * ed * ef * bd * bf)
    return quad(f, 0.0, T, tol_rel=1e-13, tol_abs=1e-16)


def rel_err(a, b, floor=1e-12):
    return abs(a - b) / max(abs(b), floor)


# --- high-precision Black-Scholes reference for finite differences ---------

import mpmath as mp  # noqa: E402

MP_DPS = 40
_SQRT2 = None


def mp_put(x, y, K, Dd=1):
    """Put on the forward in (log-forward, total variance) coordinates, in mpmath."""
    global _SQRT2
    if _SQRT2 is None:
        _SQRT2 = mp.sqrt(2)
    sy = mp.sqrt(y)
    d1 = (x - mp.log(K) + y / 2) / sy
    d2 = d1 - sy
    return Dd * (K * mp.erfc(d2 / _SQRT2) - mp.exp(x) * mp.erfc(d1 / _SQRT2)) / 2


def fd_x_derivatives(x, y, K, Dd=1.0, h=1e-5):
    """(d/dx, d2/dx2) of the put by 5-point central differences with step h."""
    with mp.workdps(MP_DPS):
        x, y, K, h = mp.mpf(x), mp.mpf(y), mp.mpf(K), mp.mpf(h)
        f = [mp_put(x + i * h, y, K, Dd) for i in (-2, -1, 0, 1, 2)]
        d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * h)
        d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h)
        return float(d1), float(d2)


def _fd_partials_at(x, y, K, Dd, hx, hy):
    f = {(i, j): mp_put(x + i * hx, y + j * hy, K, Dd)
         for i in (-2, -1, 0, 1, 2) for j in (-1, 0, 1)}

    def dx(j, order):
        g = [f[(i, j)] for i in (-2, -1, 0, 1, 2)]
        if order == 0:
            return g[2]
        if order == 1:
            return (g[3] - g[1]) / (2 * hx)
        if order == 2:
            return (g[3] - 2 * g[2] + g[1]) / hx**2
        if order == 3:
            return (g[4] - 2 * g[3] + 2 * g[1] - g[0]) / (2 * hx**3)
        return (g[4] - 4 * g[3] + 6 * g[2] - 4 * g[1] + g[0]) / hx**4

    out = {}
    for i in range(5):
        up, mid, dn = dx(1, i), dx(0, i), dx(-1, i)
        out[(i, 0)] = mid
        out[(i, 1)] = (up - dn) / (2 * hy)
        out[(i, 2)] = (up - 2 * mid + dn) / hy**2
    return out


def fd_partials(x, y, K, Dd=1.0, rel_step=1e-4):
    """Every partial the expansion uses, by central differences in mpmath.

    The stencils are second order; one Richardson step (h and h/2) removes
    the h^2 error term, leaving O(h^4) truncation.
    """
    with mp.workdps(MP_DPS):
        x, y, K = mp.mpf(x), mp.mpf(y), mp.mpf(K)
        hx = mp.mpf(rel_step) * mp.sqrt(y)
        hy = mp.mpf(rel_step) * y
        coarse = _fd_partials_at(x, y, K, Dd, hx, hy)
        fine = _fd_partials_at(x, y, K, Dd, hx / 2, hy / 2)
        return {k: float((4 * fine[k] - coarse[k]) / 3) for k in coarse}

"""Black-Scholes put in log-forward / total-variance coordinates.

``BS(x, y) = Dd * (K * Phi(-d2) - exp(x) * Phi(-d1))`` with
``d1 = (x - log K + y/2) / sqrt(y)`` and ``d2 = d1 - sqrt(y)``. The partial
derivatives the expansion needs are closed forms in ``phi(d2)``; pure
x-derivatives follow from the heat-equation identity
``dBS/dy = (d2BS/dx2 - dBS/dx) / 2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import ndtr

SQRT_2PI = math.sqrt(2.0 * math.pi)
D2_CUTOFF = 37.0
IV_LOWER = 1e-6
IV_UPPER = 5.0


class DegenerateVarianceError(ValueError):
    pass


class ImpliedVolError(ValueError):
    pass


@dataclass(frozen=True)
class BsPoint:
    x: float
    y: float
    K: float
    Dd: float = 1.0

    def __post_init__(self):
        if not self.y > 0.0:
            raise DegenerateVarianceError(f"total variance must be positive, got {self.y}")
        if not self.K > 0.0:
            raise ValueError("strike must be positive")
        if not 0.0 < self.Dd <= 1.0 + 1e-15:
            raise ValueError("discount factor must lie in (0, 1]")

    @property
    def d1(self) -> float:
        return (self.x - math.log(self.K) + 0.5 * self.y) / math.sqrt(self.y)

    @property
    def d2(self) -> float:
        return self.d1 - math.sqrt(self.y)


def norm_cdf(z: float) -> float:
    # ndtr evaluates the lower tail through erfc, so Phi(-8) keeps full
    # relative precision
    return float(ndtr(z))


def norm_pdf(z: float) -> float:
    return math.exp(-0.5 * z * z) / SQRT_2PI


def bs_put(p: BsPoint) -> float:
    d1 = p.d1
    d2 = d1 - math.sqrt(p.y)
    return p.Dd * (p.K * norm_cdf(-d2) - math.exp(p.x) * norm_cdf(-d1))


def bs_put_price(F0: float, K: float, T: float, sigma: float, Dd: float = 1.0) -> float:
    """Put on the forward with volatility ``sigma``; intrinsic value at sigma*sqrt(T)=0."""
    y = sigma * sigma * T
    if y <= 0.0:
        return Dd * max(K - F0, 0.0)
    return bs_put(BsPoint(math.log(F0), y, K, Dd))


def bs_call_price(F0: float, K: float, T: float, sigma: float, Dd: float = 1.0) -> float:
    return bs_put_price(F0, K, T, sigma, Dd) + Dd * (F0 - K)


def _partials(p: BsPoint) -> dict:
    """All supported partials at one point, sharing phi(d2)."""
    sy = math.sqrt(p.y)
    d1 = p.d1
    d2 = d1 - sy
    if abs(d2) > D2_CUTOFF:
        dx = -p.Dd * math.exp(p.x) * norm_cdf(-d1)
        out = dict.fromkeys([(0, 1), (1, 1), (0, 2), (2, 1), (2, 2)], 0.0)
        out[(1, 0)] = dx
        out[(2, 0)] = dx
        out[(3, 0)] = dx
        out[(4, 0)] = dx
        return out
    a = p.Dd * p.K * norm_pdf(d2)
    y = p.y
    dy = a / (2.0 * sy)
    dxy = -a * d2 / (2.0 * y)
    dyy = a * (d1 * d2 - 1.0) / (4.0 * y * sy)
    dxxy = a * (d2 * d2 - 1.0) / (2.0 * y * sy)
    dxxyy = a * (d1 * d2**3 - 3.0 * (d1 * d2 + d2 * d2 - 1.0)) / (4.0 * y * y * sy)
    dx = -p.Dd * math.exp(p.x) * norm_cdf(-d1)
    dxx = 2.0 * dy + dx
    dxxx = 2.0 * dxy + dxx
    dxxxx = 2.0 * dxxy + dxxx
    return {(0, 1): dy, (1, 1): dxy, (0, 2): dyy, (2, 1): dxxy, (2, 2): dxxyy,
            (1, 0): dx, (2, 0): dxx, (3, 0): dxxx, (4, 0): dxxxx}


SUPPORTED_PARTIALS = frozenset(
    [(0, 1), (1, 1), (0, 2), (2, 1), (2, 2), (1, 0), (2, 0), (3, 0), (4, 0)])


def bs_partial(p: BsPoint, i: int, j: int) -> float:
    """``d^{i+j} BS / dx^i dy^j`` at ``p``.

    Raises ValueError for orders outside :data:`SUPPORTED_PARTIALS`.
    """
    if (i, j) == (0, 0):
        return bs_put(p)
    if (i, j) not in SUPPORTED_PARTIALS:
        raise ValueError(f"unsupported partial order (x^{i}, y^{j})")
    return _partials(p)[(i, j)]


def bs_partials(p: BsPoint) -> dict:
    """Every supported partial in one pass, keyed by ``(i, j)``; includes (0, 0)."""
    out = _partials(p)
    out[(0, 0)] = bs_put(p)
    return out


def implied_vol(price: float, F0: float, K: float, T: float, Dd: float = 1.0,
                tol: float = 1e-12, max_iter: int = 100) -> float:
    """Black volatility of a put on the forward.

    Safeguarded Newton inside the bracket ``[1e-6, 5]``: a Newton step that
    leaves the current bracket is replaced by bisection. Convergence is on the
    volatility step (``tol``), since a price residual says little where vega
    is tiny.
    """
    lower_bound = Dd * max(K - F0, 0.0)
    upper_bound = Dd * K
    if not (lower_bound < price < upper_bound):
        raise ImpliedVolError(
            f"put price {price} outside no-arbitrage band ({lower_bound}, {upper_bound})")
    x = math.log(F0)
    sqrt_t = math.sqrt(T)

    def f(sig):
        return bs_put(BsPoint(x, sig * sig * T, K, Dd)) - price

    lo, hi = IV_LOWER, IV_UPPER
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0.0:
        return lo
    if f_hi < 0.0:
        raise ImpliedVolError(f"price {price} needs volatility above {IV_UPPER}")

    # Brenner-Subrahmanyam style start, clipped into the bracket
    sig = min(max(math.sqrt(2.0 * math.pi / T) * price / (Dd * F0), 0.05), 1.0)
    for _ in range(max_iter):
        val = f(sig)
        if val > 0.0:
            hi = sig
        else:
            lo = sig
        if val == 0.0 or hi - lo < 1e-15:
            return sig
        d1 = (x - math.log(K) + 0.5 * sig * sig * T) / (sig * sqrt_t)
        vega = Dd * F0 * norm_pdf(d1) * sqrt_t
        step_ok = vega > 0.0
        if step_ok:
            nxt = sig - val / vega
            step_ok = lo < nxt < hi
            if step_ok and abs(nxt - sig) <= tol * sig:
                return nxt
        sig = nxt if step_ok else 0.5 * (lo + hi)
    raise ImpliedVolError(f"implied vol did not converge in {max_iter} iterations")

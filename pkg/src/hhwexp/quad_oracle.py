"""Adaptive Gauss-Kronrod quadrature used as a brute-force oracle.

Everything here is vectorised over a *batch* of integrands sharing one
subdivision of the integration interval, which is what makes the nested
(2-, 3- and 4-fold) iterated integrals affordable: the inner integrals for
all outer nodes are evaluated in a single numpy call per refinement step.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

# Gauss-Kronrod 7/15 abscissae on [0, 1] (symmetric half) and weights.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

# Full 15-point rule on [-1, 1].
NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_WEIGHTS = np.zeros(15)
GAUSS_WEIGHTS[[1, 3, 5]] = _WG[:3]
GAUSS_WEIGHTS[[13, 11, 9]] = _WG[:3]
GAUSS_WEIGHTS[7] = _WG[3]

MAX_INTERVALS = 10_000


class QuadratureError(RuntimeError):
    """Raised when the subdivision limit is hit; carries the best estimate."""

    def __init__(self, message: str, estimate, error):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def _rule(f, a, b):
    """Apply the 15-point pair on intervals ``[a_j, b_j]``.

    ``f`` maps a flat array of abscissae to an array of shape ``(m, n)``.
    Returns Kronrod estimates, error estimates and a flag marking intervals
    whose error is above the roundoff floor (worth splitting), all
    ``(m, n_int)``.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = (mid[:, None] + half[:, None] * NODES[None, :]).ravel()
    fx = f(x).reshape(-1, a.size, NODES.size)
    kron = (fx @ KRONROD_WEIGHTS) * half
    gauss = (fx @ GAUSS_WEIGHTS) * half
    # QUADPACK qk15 error scaling: |K - G| sharpened by the integrand's
    # spread about its mean, with a floor from roundoff in the sum
    mean = (kron / np.where(half == 0.0, 1.0, 2.0 * half))[..., None]
    resasc = (np.abs(fx - mean) @ KRONROD_WEIGHTS) * np.abs(half)
    resabs = (np.abs(fx) @ KRONROD_WEIGHTS) * np.abs(half)
    diff = np.abs(kron - gauss)
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = np.where(resasc > 0.0,
                          resasc * np.minimum(1.0, (200.0 * diff / resasc) ** 1.5),
                          diff)
    floor = 50.0 * np.finfo(float).eps * resabs
    return kron, np.maximum(scaled, floor), scaled > floor


def quad_batch(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
               tol_rel: float = 1e-11, tol_abs: float = 1e-13,
               limit: int = MAX_INTERVALS):
    """Integrate a batch of integrands over ``[a, b]`` on a shared mesh.

    Args:
        f: maps a 1-D array of abscissae (length n) to values of shape (m, n).
        a, b: integration bounds, ``a <= b``.
        tol_rel, tol_abs: per-integrand target
            ``error <= max(tol_abs, tol_rel * |value|)``.
        limit: maximum number of subintervals.

    Returns:
        (values, errors), each of shape (m,).
    """
    if b < a:
        raise ValueError(f"quad requires a <= b, got a={a}, b={b}")
    if a == b:
        probe = np.asarray(f(np.array([a])))
        m = probe.reshape(-1, 1).shape[0]
        return np.zeros(m), np.zeros(m)

    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    vals, errs, live = _rule(f, lo, hi)
    while True:
        total = vals.sum(axis=1)
        err = errs.sum(axis=1)
        target = np.maximum(tol_abs, tol_rel * np.abs(total))
        bad = err > target
        # intervals whose error is pure roundoff cannot be improved
        bad &= live.any(axis=1)
        if not bad.any():
            return total, err
        n = lo.size
        if n >= limit:
            raise QuadratureError(
                f"subdivision limit {limit} reached", total, err)
        # split every interval carrying more than its fair share of the
        # budget for some unconverged integrand; always split the worst one
        ratio = np.where(live[bad], errs[bad] / target[bad][:, None], 0.0)
        split = (ratio > 1.0 / n).any(axis=0)
        split[np.argmax(ratio.max(axis=0))] = True
        if n + split.sum() > limit:
            idx = np.argsort(-ratio.max(axis=0))
            split[:] = False
            split[idx[: limit - n]] = True
        mids = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mids])
        new_hi = np.concatenate([mids, hi[split]])
        new_vals, new_errs, new_live = _rule(f, new_lo, new_hi)
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        vals = np.concatenate([vals[:, keep], new_vals], axis=1)
        errs = np.concatenate([errs[:, keep], new_errs], axis=1)
        live = np.concatenate([live[:, keep], new_live], axis=1)


def quad(f: Callable[[np.ndarray], np.ndarray], a: float, b: float,
         tol_rel: float = 1e-11, tol_abs: float = 1e-13,
         return_error: bool = False, limit: int = MAX_INTERVALS):
    """Adaptive Gauss-Kronrod integral of a vectorised scalar function.

    >>> round(quad(np.exp, 0.0, 1.0), 12) == round(np.e - 1.0, 12)
    True
    """
    def g(x):
        return np.asarray(f(x), dtype=float).reshape(1, -1)

    try:
        val, err = quad_batch(g, a, b, tol_rel, tol_abs, limit)
    except QuadratureError as exc:
        raise QuadratureError(str(exc), float(exc.estimate[0]),
                              float(exc.error[0])) from None
    if return_error:
        return float(val[0]), float(err[0])
    return float(val[0])


def quad_segments(f: Callable[[np.ndarray], np.ndarray], a: np.ndarray,
                  b: np.ndarray, tol_rel: float = 1e-11, tol_abs: float = 1e-13,
                  limit: int = 50 * MAX_INTERVALS):
    """Integrate one vectorised function over many disjoint intervals.

    Each interval ``[a_i, b_i]`` is refined independently until its own
    error estimate is below ``max(tol_abs, tol_rel * |value_i|)``.

    Returns:
        (values, errors), each of shape ``a.shape``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n_seg = a.size
    owner = np.arange(n_seg)
    lo, hi = a.copy(), b.copy()

    def g(x):
        return np.asarray(f(x), dtype=float).reshape(1, -1)

    vals, errs, live = (v[0] for v in _rule(g, lo, hi))
    while True:
        total = np.bincount(owner, vals, minlength=n_seg)
        err = np.bincount(owner, errs, minlength=n_seg)
        count = np.bincount(owner, minlength=n_seg)
        target = np.maximum(tol_abs, tol_rel * np.abs(total))
        has_live = np.bincount(owner, live, minlength=n_seg) > 0
        bad = (err > target) & has_live
        if not bad.any():
            return total, err
        if lo.size >= limit:
            raise QuadratureError(
                f"subdivision limit {limit} reached", total, err)
        split = bad[owner] & live & (errs >= target[owner] / count[owner])
        if not split.any():
            split = bad[owner] & live
        mids = 0.5 * (lo[split] + hi[split])
        new_lo = np.concatenate([lo[split], mids])
        new_hi = np.concatenate([mids, hi[split]])
        new_owner = np.concatenate([owner[split], owner[split]])
        nv, ne, nl = (v[0] for v in _rule(g, new_lo, new_hi))
        keep = ~split
        lo = np.concatenate([lo[keep], new_lo])
        hi = np.concatenate([hi[keep], new_hi])
        owner = np.concatenate([owner[keep], new_owner])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        live = np.concatenate([live[keep], nl])


def tail_integral(f: Callable[[np.ndarray], np.ndarray], lower: np.ndarray,
                  T: float, tol_rel: float = 1e-12, tol_abs: float = 1e-14):
    """``int_{x}^{T} f(s) ds`` for every ``x`` in ``lower``.

    The distinct lower limits cut ``[min(lower), T]`` into consecutive
    segments; each is integrated adaptively and the results are summed from
    the right, so the cost scales with the number of lower limits rather than
    with their product with an inner mesh.
    """
    lower = np.asarray(lower, dtype=float)
    knots, inverse = np.unique(lower, return_inverse=True)
    if knots[-1] < T:
        edges = np.append(knots, T)
    else:
        edges = knots
    pieces, _ = quad_segments(f, edges[:-1], edges[1:], tol_rel, tol_abs)
    acc = np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
    return acc[inverse].reshape(lower.shape)


def nested_quad(weights: Sequence[Callable[[np.ndarray], np.ndarray]], T: float,
                tol_rel: float = 1e-11, tol_abs: float = 1e-13,
                return_error: bool = False):
    """Iterated integral over the ordered simplex ``0 <= t1 <= ... <= tn <= T``.

    Computes ``int_0^T dt1 w1(t1) int_{t1}^T dt2 w2(t2) ... int dtn wn(tn)``
    by nested adaptive quadrature: the outer level is an adaptive
    Gauss-Kronrod integral and every inner level is a tail integral
    evaluated at all abscissae of the level above, with tolerances tightened
    by 10x per level.
    """
    depth = len(weights)
    if depth < 1:
        raise ValueError("need at least one weight function")
    if T == 0.0:
        return (0.0, 0.0) if return_error else 0.0

    def inner(level: int, rtol: float, atol: float):
        w = weights[level]
        if level + 1 == depth:
            return lambda s: np.asarray(w(s), dtype=float)
        deeper = inner(level + 1, rtol * 0.1, atol * 0.1)
        return lambda s: np.asarray(w(s), dtype=float) * tail_integral(
            deeper, s, T, rtol * 0.1, atol * 0.1)

    body = inner(0, tol_rel, tol_abs)
    return quad(body, 0.0, T, tol_rel, tol_abs, return_error=return_error)


def kernel_integral(shape: str, k_v: float, T: float, c1, c2=None,
                    tol_rel: float = 1e-12, tol_abs: float = 1e-15) -> float:
    """Brute-force value of one of the expansion's kernel integrals.

    ``shape`` is one of "I1", "I1_2k", "I2", "I3", "I4"; ``c1`` (and ``c2``
    for "I3") are vectorised callables. For "I3" with distinct ``c1`` and
    ``c2`` the symmetrised value ``(I3(c1, c2) + I3(c2, c1)) / 2`` is returned.
    """
    def e(rate):
        return lambda t: np.exp(rate * t)

    def ec(rate, c):
        return lambda t: np.exp(rate * t) * c(t)

    def one(t):
        return np.ones_like(t)

    if shape == "I1":
        w = [e(k_v), ec(-k_v, c1)]
    elif shape == "I1_2k":
        w = [e(2 * k_v), ec(-2 * k_v, c1)]
    elif shape == "I2":
        w = [e(k_v), one, ec(-k_v, c1)]
    elif shape == "I3":
        if c2 is not None and c2 is not c1:
            a = nested_quad([e(2 * k_v), ec(-k_v, c1), ec(-k_v, c2)], T, tol_rel, tol_abs)
            b = nested_quad([e(2 * k_v), ec(-k_v, c2), ec(-k_v, c1)], T, tol_rel, tol_abs)
            return 0.5 * (a + b)
        w = [e(2 * k_v), ec(-k_v, c1), ec(-k_v, c1)]
    elif shape == "I4":
        w = [e(k_v), e(k_v), ec(-2 * k_v, c1)]
    else:
        raise ValueError(f"unknown kernel shape {shape!r}")
    return nested_quad(w, T, tol_rel, tol_abs)

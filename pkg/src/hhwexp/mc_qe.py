"""Monte-Carlo benchmark for the Heston-Hull-White FX model.

Dynamics under the domestic risk-neutral measure::

    dS/S = (r_d - r_f) dt + sqrt(v) dW_S
    dv   = k_v (theta_v - v) dt + gamma sqrt(v) dW_v
    r_d  = x_d + phi_d(t),  dx_d = -k_d x_d dt + eta_d dW_d
    r_f  = x_f + phi_f(t),  dx_f = (-k_f x_f - eta_f rho_sf sqrt(v)) dt + eta_f dW_f

``phi`` fits each Hull-White model to its initial zero curve. The variance
uses Andersen's QE step with the martingale-corrected log-asset scheme,
the short-rate states move by exact Ornstein-Uhlenbeck transitions and the
discount integral is a trapezoid on the time grid.

Every batch draws from its own Philox stream spawned from the seed, and the
batch statistics are merged in batch order, so a run is reproducible from
``(seed, n_batches, dt, n_paths)``.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .heston_chf import ChfParams, price_put_chf
from .model import (HullWhiteParams, ModelParams, OptionSpec, UnsupportedCorrelationError,
                    psd_cholesky, validate)

PSI_CRIT = 1.5
_HALF_ULP = 2.0 ** -54


class InvalidGridError(ValueError):
    pass


class NegativeVarianceError(RuntimeError):
    pass


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 100_000
    dt: float = 0.05
    seed: int = 2024
    n_batches: int = 8
    antithetic: bool = False
    n_workers: int = 1
    keep_path_stats: bool = False
    # subtract the same paths with frozen rates, whose mean is the Heston ChF price
    control_variate: bool = False

    def __post_init__(self):
        if int(self.n_paths) != self.n_paths or self.n_paths < 1:
            raise ValueError("n_paths must be a positive integer")
        if not (self.dt > 0.0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if int(self.n_batches) != self.n_batches or not 1 <= self.n_batches <= self.n_paths:
            raise ValueError("n_batches must lie in [1, n_paths]")
        if self.antithetic and self.n_paths < 2 * self.n_batches:
            raise ValueError("antithetic sampling needs at least two paths per batch")
        if self.n_workers < 1:
            raise ValueError("n_workers must be positive")

    def n_steps(self, T: float) -> int:
        """Number of grid steps; ``T / dt`` must be an integer to within one ulp."""
        ratio = T / self.dt
        n = round(ratio)
        if n < 1 or abs(ratio - n) > math.ulp(n):
            raise InvalidGridError(f"maturity {T} is not a multiple of dt={self.dt}")
        return n

    def batch_sizes(self) -> list[int]:
        q, r = divmod(self.n_paths, self.n_batches)
        return [q + (1 if b < r else 0) for b in range(self.n_batches)]


@dataclass(frozen=True)
class McEstimate:
    price: float
    std_error: float
    n_paths: int
    seed: int
    strike: float = float("nan")
    control_variate: bool = False
    elapsed: float = field(default=0.0, compare=False)
    # rows (t, mean v, mean r_d, mean r_f); only with keep_path_stats
    path_stats: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass
class _Moments:
    """Running count / mean / sum of squared deviations per strike."""

    n: int
    mean: np.ndarray
    m2: np.ndarray

    def merge(self, other: "_Moments") -> "_Moments":
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.n / n)
        m2 = self.m2 + other.m2 + delta * delta * (self.n * other.n / n)
        return _Moments(n, mean, m2)


@dataclass(frozen=True)
class _Grid:
    n_steps: int
    h: float
    phi_d: np.ndarray
    phi_f: np.ndarray


def _hw_shift(hw: HullWhiteParams, t: np.ndarray) -> np.ndarray:
    """phi(t) = f(0, t) + eta^2 / (2 k^2) (1 - e^{-k t})^2."""
    b = -np.expm1(-hw.k * t) / hw.k
    return hw.zero_curve.inst_forward(t) + 0.5 * hw.eta**2 * b * b


def _grid(params: ModelParams, T: float, cfg: McConfig) -> _Grid:
    n = cfg.n_steps(T)
    t = np.linspace(0.0, T, n + 1)
    return _Grid(n, T / n, _hw_shift(params.hw_dom, t), _hw_shift(params.hw_for, t))


def _factor_loadings(params: ModelParams) -> np.ndarray:
    """Cholesky factor over the ordering (v, S, d, f).

    With v first, the second column is the part of dW_S orthogonal to dW_v,
    which is what the log-asset QE step needs.
    """
    c = params.corr
    if c.vd != 0.0 or c.vf != 0.0:
        raise UnsupportedCorrelationError("simulation assumes rho_vd = rho_vf = 0")
    m = np.array([
        [1.0, c.sv, 0.0, 0.0],
        [c.sv, 1.0, c.sd, c.sf],
        [0.0, c.sd, 1.0, c.df],
        [0.0, c.sf, c.df, 1.0],
    ])
    return psd_cholesky(m)


def _normals(rng: np.random.Generator, n: int, antithetic: bool) -> np.ndarray:
    """(4, n) standard normals by inverse CDF of open-interval uniforms."""
    if antithetic:
        half = ndtri(rng.random((4, n // 2)) + _HALF_ULP)
        return np.concatenate([half, -half], axis=1)
    return ndtri(rng.random((4, n)) + _HALF_ULP)


def _qe_step(v, z_v, k, theta, gamma, h):
    """Andersen QE variance step; also returns the pieces for the drift correction."""
    e = math.exp(-k * h)
    one_e = -math.expm1(-k * h)
    m = theta + (v - theta) * e
    s2 = v * (gamma * gamma * e * one_e / k) + theta * gamma * gamma * one_e * one_e / (2.0 * k)
    psi = s2 / (m * m)
    quad = psi <= PSI_CRIT

    inv = 2.0 / np.where(quad, psi, 1.0)
    b2 = np.where(quad, inv - 1.0 + np.sqrt(inv) * np.sqrt(np.maximum(inv - 1.0, 0.0)), 0.0)
    a = m / (1.0 + b2)
    b = np.sqrt(b2)

    psi_e = np.where(quad, 2.0, psi)
    p = (psi_e - 1.0) / (psi_e + 1.0)
    beta = (1.0 - p) / m
    u = ndtr(z_v)
    v_exp = np.where(u <= p, 0.0, np.log((1.0 - p) / np.maximum(1.0 - u, 1e-300)) / beta)

    v_new = np.where(quad, a * (b + z_v) ** 2, v_exp)
    return v_new, quad, a, b2, p, beta


def _log_increment(v, v_new, z_perp, qe, rho, k, theta, gamma, h):
    """Heston part of d log S over one step, martingale corrected (gamma_1 = gamma_2 = 1/2)."""
    if gamma == 0.0:
        # deterministic variance: exact integrated variance, z_perp is the full shock
        var = theta * h + (v - theta) * (-math.expm1(-k * h)) / k
        return -0.5 * var + np.sqrt(var) * z_perp
    quad, a, b2, p, beta = qe
    k1 = 0.5 * h * (k * rho / gamma - 0.5) - rho / gamma
    k2 = 0.5 * h * (k * rho / gamma - 0.5) + rho / gamma
    k3 = 0.5 * h * (1.0 - rho * rho)
    k4 = k3
    A = k2 + 0.5 * k4
    k0_plain = -rho * k * theta * h / gamma

    # K0 chosen so that E[exp(K0 + K1 v + K2 v' + (K3 v + K4 v') / 2)] = 1 given v;
    # falls back to the uncorrected K0 where the moment of v' does not exist
    ok_q = quad & (2.0 * A * a < 1.0)
    one_m = np.where(ok_q, 1.0 - 2.0 * A * a, 1.0)
    log_mgf_q = A * b2 * a / one_m - 0.5 * np.log(one_m)
    ok_e = ~quad & (A < beta)
    denom = np.where(ok_e, beta - A, 1.0)
    log_mgf_e = np.log(np.where(ok_e, p + beta * (1.0 - p) / denom, 1.0))
    log_mgf = np.where(quad, log_mgf_q, log_mgf_e)
    k0 = np.where(ok_q | ok_e, -log_mgf - (k1 + 0.5 * k3) * v, k0_plain)
    return k0 + k1 * v + k2 * v_new + np.sqrt(k3 * v + k4 * v_new) * z_perp


def _ou_step(x, hw: HullWhiteParams, h: float, z, drift=None):
    e = math.exp(-hw.k * h)
    sd = hw.eta * math.sqrt(-math.expm1(-2.0 * hw.k * h) / (2.0 * hw.k))
    out = x * e + sd * z
    if drift is not None:
        out += drift * (-math.expm1(-hw.k * h) / hw.k)
    return out


def _run_batch(params: ModelParams, T: float, strikes: np.ndarray, n: int,
               rng: np.random.Generator, grid: _Grid, load: np.ndarray,
               antithetic: bool, keep_stats: bool, control: bool = False):
    h = params.heston
    k, theta, gamma = h.k_v, h.theta_v, h.gamma
    rho = params.corr.sv
    hd, hf = params.hw_dom, params.hw_for
    quanto = -hf.eta * params.corr.sf
    step = grid.h

    log_s = np.full(n, math.log(params.spot))
    v = np.full(n, h.v0)
    x_d = np.zeros(n)
    x_f = np.zeros(n)
    int_d = np.zeros(n)
    int_f = np.zeros(n)
    cv = None
    if control:
        # frozen-rate twin: same Heston increments, deterministic curve drift
        t = np.linspace(0.0, T, grid.n_steps + 1)
        log_pd = np.log(hd.zero_curve.discount(t))
        log_pf = np.log(hf.zero_curve.discount(t))
        log_s_h = log_s.copy()
    stats = np.zeros((grid.n_steps + 1, 3)) if keep_stats else None
    if keep_stats:
        stats[0] = (v.sum(), n * grid.phi_d[0], n * grid.phi_f[0])

    for i in range(grid.n_steps):
        eps = _normals(rng, n, antithetic)
        z = load @ eps
        z_v, z_d, z_f = z[0], z[2], z[3]
        z_perp = eps[1] if gamma != 0.0 else z[1]

        if gamma == 0.0:
            v_new = theta + (v - theta) * math.exp(-k * step)
            qe = None
        else:
            v_new, *qe = _qe_step(v, z_v, k, theta, gamma, step)
        dlog = _log_increment(v, v_new, z_perp, qe, rho, k, theta, gamma, step)

        vol_mid = 0.5 * (np.sqrt(v) + np.sqrt(v_new))
        xd_new = _ou_step(x_d, hd, step, z_d)
        xf_new = _ou_step(x_f, hf, step, z_f, drift=quanto * vol_mid)

        rd0 = x_d + grid.phi_d[i]
        rf0 = x_f + grid.phi_f[i]
        rd1 = xd_new + grid.phi_d[i + 1]
        rf1 = xf_new + grid.phi_f[i + 1]
        d_int_d = 0.5 * step * (rd0 + rd1)
        d_int_f = 0.5 * step * (rf0 + rf1)
        int_d += d_int_d
        int_f += d_int_f
        log_s += d_int_d - d_int_f + dlog
        if control:
            log_s_h += (log_pd[i] - log_pd[i + 1]) - (log_pf[i] - log_pf[i + 1]) + dlog

        if not np.all(v_new >= 0.0):
            raise NegativeVarianceError(f"negative variance at step {i + 1}")
        v, x_d, x_f = v_new, xd_new, xf_new
        if keep_stats:
            stats[i + 1] = (v.sum(), rd1.sum(), rf1.sum())

    disc = np.exp(-int_d)
    s_t = np.exp(log_s)
    payoff = disc[:, None] * np.maximum(strikes[None, :] - s_t[:, None], 0.0)
    if control:
        s_h = np.exp(log_s_h)
        payoff -= math.exp(log_pd[-1]) * np.maximum(strikes[None, :] - s_h[:, None], 0.0)
    if antithetic:
        half = n // 2
        payoff = 0.5 * (payoff[:half] + payoff[half:2 * half])
    mean = payoff.mean(axis=0)
    m2 = ((payoff - mean) ** 2).sum(axis=0)
    return _Moments(payoff.shape[0], mean, m2), stats


def _simulate(params: ModelParams, T: float, strikes, cfg: McConfig) -> list[McEstimate]:
    validate(params)
    strikes = np.atleast_1d(np.asarray(strikes, dtype=float))
    if np.any(strikes <= 0.0):
        raise ValueError("strikes must be positive")
    start = time.perf_counter()
    grid = _grid(params, T, cfg)
    load = _factor_loadings(params)
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_batches)
    sizes = cfg.batch_sizes()

    def task(b):
        rng = np.random.Generator(np.random.Philox(children[b]))
        return _run_batch(params, T, strikes, sizes[b], rng, grid, load,
                          cfg.antithetic, cfg.keep_path_stats, cfg.control_variate)

    if cfg.n_workers > 1:
        with ThreadPoolExecutor(cfg.n_workers) as pool:
            results = list(pool.map(task, range(cfg.n_batches)))
    else:
        results = [task(b) for b in range(cfg.n_batches)]

    total = results[0][0]
    for mom, _ in results[1:]:
        total = total.merge(mom)
    var = total.m2 / max(total.n - 1, 1)
    se = np.sqrt(var / total.n)
    price = total.mean
    if cfg.control_variate:
        price = price + _control_means(params, T, strikes)

    stats = None
    if cfg.keep_path_stats:
        sums = results[0][1].copy()
        for _, s in results[1:]:
            sums += s
        t = np.linspace(0.0, T, grid.n_steps + 1)
        stats = np.column_stack([t, sums / cfg.n_paths])
    elapsed = time.perf_counter() - start
    return [McEstimate(float(p), float(e), cfg.n_paths, cfg.seed, float(K),
                       cfg.control_variate, elapsed, stats)
            for p, e, K in zip(price, se, strikes)]


def _control_means(params: ModelParams, T: float, strikes) -> np.ndarray:
    F0 = params.forward(T)
    p = ChfParams(params.heston.k_v, params.heston.theta_v, params.heston.gamma,
                  params.corr.sv, params.heston.v0, F0, T,
                  params.hw_dom.zero_curve.discount(T))
    return np.array([price_put_chf(p, K) for K in strikes])


def simulate_hhw_strikes(params: ModelParams, T: float, strikes,
                         cfg: McConfig) -> list[McEstimate]:
    """Put prices for several strikes of one maturity from a single set of paths."""
    return _simulate(params, T, strikes, cfg)


def simulate_hhw(params: ModelParams, opt: OptionSpec, cfg: McConfig) -> McEstimate:
    """Discounted put payoff ``E[exp(-int r_d) (K - S_T)^+]`` under the full dynamics."""
    if opt.kind != "put":
        raise ValueError("the simulation prices puts; use parity for calls")
    return _simulate(params, opt.maturity, [opt.strike], cfg)[0]


def heston_only(params: ModelParams) -> ModelParams:
    """Same model with frozen short rates (eta_d = eta_f = 0)."""
    return params.with_changes(eta_d=0.0, eta_f=0.0)


def simulate_heston(params: ModelParams, opt: OptionSpec, cfg: McConfig) -> McEstimate:
    """Deterministic-rate run through the same engine, so draws match simulate_hhw."""
    return simulate_hhw(heston_only(params), opt, cfg)


def write_path_stats(path, est: McEstimate) -> None:
    if est.path_stats is None:
        raise ValueError("estimate carries no path statistics (set keep_path_stats)")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "t", "mean_v", "mean_r_d", "mean_r_f"])
        for i, row in enumerate(est.path_stats):
            w.writerow([i] + [repr(float(x)) for x in row])

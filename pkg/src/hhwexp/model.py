"""Model parameters, zero curves and the validation rules shared by all pricers.

Conventions: times in years, continuously compounded rates, unit notional in
foreign currency, prices in domestic currency. The FX rate is quoted as
domestic units per one foreign unit.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CORR_PIVOT_TOL = 1e-12
V0_THETA_RTOL = 1e-12


class InvalidParameterError(ValueError):
    """Base class for every rejected parameter set."""


class NonPositiveParameterError(InvalidParameterError):
    pass


class CorrelationRangeError(InvalidParameterError):
    pass


class CorrelationNotPSDError(InvalidParameterError):
    pass


class CurveError(InvalidParameterError):
    pass


class ExpansionAssumptionError(InvalidParameterError):
    """The expansion formulas need v0 == theta_v."""


class UnsupportedCorrelationError(InvalidParameterError):
    """The expansion formulas need zero vol/rate correlations."""


class OptionSpecError(InvalidParameterError):
    pass


class FellerWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ZeroCurve:
    """Continuously compounded zero curve on a set of pillar tenors.

    Log-discount factors are linear between pillars (flat instantaneous
    forwards), the zero rate is held flat before the first pillar and after
    the last one. A single pillar gives a flat curve.
    """

    tenors: tuple[float, ...] = (1.0,)
    rates: tuple[float, ...] = (0.0,)

    def __post_init__(self):
        t = tuple(float(x) for x in self.tenors)
        r = tuple(float(x) for x in self.rates)
        object.__setattr__(self, "tenors", t)
        object.__setattr__(self, "rates", r)
        if len(t) == 0 or len(t) != len(r):
            raise CurveError("curve needs matching, non-empty tenors and rates")
        if any(x <= 0.0 for x in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise CurveError("curve tenors must be positive and strictly increasing")
        if not all(math.isfinite(x) for x in r):
            raise CurveError("curve rates must be finite")

    @classmethod
    def flat(cls, rate: float) -> "ZeroCurve":
        return cls((1.0,), (rate,))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "ZeroCurve":
        pairs = sorted((float(t), float(r)) for t, r in pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def zero_rate(self, t):
        t = np.asarray(t, dtype=float)
        tn = np.asarray(self.tenors)
        rn = np.asarray(self.rates)
        log_df = np.interp(t, tn, rn * tn)  # -log D(t) at pillars, linear between
        inside = np.where(t > 0.0, log_df / np.where(t > 0.0, t, 1.0), rn[0])
        out = np.where(t <= tn[0], rn[0], np.where(t >= tn[-1], rn[-1], inside))
        return out if out.ndim else float(out)

    def discount(self, t):
        t = np.asarray(t, dtype=float)
        out = np.exp(-np.asarray(self.zero_rate(t)) * t)
        return out if out.ndim else float(out)

    def inst_forward(self, t):
        """Instantaneous forward rate f(0, t) (right-continuous at pillars)."""
        t = np.asarray(t, dtype=float)
        tn = np.asarray(self.tenors)
        rn = np.asarray(self.rates)
        if tn.size == 1:
            out = np.full(t.shape, rn[0])
        else:
            seg_fwd = np.diff(rn * tn) / np.diff(tn)
            idx = np.clip(np.searchsorted(tn, t, side="right") - 1, 0, tn.size - 2)
            out = np.where(t < tn[0], rn[0], np.where(t >= tn[-1], rn[-1], seg_fwd[idx]))
        return out if out.ndim else float(out)

    def to_pairs(self) -> list[list[float]]:
        return [[t, r] for t, r in zip(self.tenors, self.rates)]


@dataclass(frozen=True)
class HestonParams:
    v0: float
    theta_v: float
    k_v: float
    gamma: float


@dataclass(frozen=True)
class HullWhiteParams:
    k: float
    eta: float
    zero_curve: ZeroCurve = field(default_factory=lambda: ZeroCurve.flat(0.0))

    def bond_factor(self, t, T):
        """B(t, T) = (exp(-k (T - t)) - 1) / k, the (negative) bond loading."""
        return np.expm1(-self.k * (np.asarray(T) - np.asarray(t))) / self.k


@dataclass(frozen=True)
class CorrMatrix:
    """Correlations over the ordering (S, v, d, f)."""

    sv: float = 0.0
    sd: float = 0.0
    sf: float = 0.0
    vd: float = 0.0
    vf: float = 0.0
    df: float = 0.0

    def matrix(self) -> np.ndarray:
        return np.array([
            [1.0, self.sv, self.sd, self.sf],
            [self.sv, 1.0, self.vd, self.vf],
            [self.sd, self.vd, 1.0, self.df],
            [self.sf, self.vf, self.df, 1.0],
        ])

    def cholesky(self) -> np.ndarray:
        return psd_cholesky(self.matrix())


def psd_cholesky(a: np.ndarray, tol: float = CORR_PIVOT_TOL) -> np.ndarray:
    """Lower-triangular L with L L^T = a, tolerating zero pivots.

    Raises CorrelationNotPSDError when a pivot falls below ``-tol``.
    """
    n = a.shape[0]
    low = np.zeros_like(a, dtype=float)
    for j in range(n):
        pivot = a[j, j] - low[j, :j] @ low[j, :j]
        if pivot < -tol:
            raise CorrelationNotPSDError(
                f"correlation matrix is not positive semidefinite (pivot {pivot:.3e})")
        if pivot <= tol:
            # semidefinite direction: column must already be reproduced
            resid = a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]
            if np.any(np.abs(resid) > math.sqrt(tol)):
                raise CorrelationNotPSDError(
                    "correlation matrix is not positive semidefinite (zero pivot "
                    "with non-zero off-diagonal remainder)")
            continue
        d = math.sqrt(pivot)
        low[j, j] = d
        low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / d
    return low


@dataclass(frozen=True)
class ModelParams:
    heston: HestonParams
    hw_dom: HullWhiteParams
    hw_for: HullWhiteParams
    corr: CorrMatrix
    spot: float

    @property
    def sqrt_v0(self) -> float:
        return math.sqrt(self.heston.v0)

    def forward(self, T: float) -> float:
        return forward(self.spot, self.hw_dom.zero_curve, self.hw_for.zero_curve, T)

    def with_changes(self, **kw) -> "ModelParams":
        """Copy with flat overrides: gamma, v0 (sets theta_v too), eta_d,
        eta_f, k_d, k_f, k_v, rho_sv, ... ."""
        h, d, f, c = self.heston, self.hw_dom, self.hw_for, self.corr
        for key, val in kw.items():
            if key == "v0":
                h = replace(h, v0=val, theta_v=val)
            elif key in ("theta_v", "k_v", "gamma"):
                h = replace(h, **{key: val})
            elif key in ("eta_d", "k_d"):
                d = replace(d, **{key[:-2]: val})
            elif key in ("eta_f", "k_f"):
                f = replace(f, **{key[:-2]: val})
            elif key.startswith("rho_"):
                c = replace(c, **{key[4:]: val})
            elif key == "spot":
                continue
            else:
                raise KeyError(f"unknown parameter override {key!r}")
        return ModelParams(h, d, f, c, kw.get("spot", self.spot))

    # JSON schema: {heston:{v0,theta_v,k_v,gamma},
    #               hw_dom:{k,eta,curve:[[t,r],...]}, hw_for:{...},
    #               corr:{sv,sd,sf,vd,vf,df}, spot}
    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        def hw(block):
            curve = block.get("curve", [[1.0, 0.0]])
            return HullWhiteParams(float(block["k"]), float(block["eta"]),
                                   ZeroCurve.from_pairs(curve))

        h = d["heston"]
        return cls(
            heston=HestonParams(float(h["v0"]), float(h.get("theta_v", h["v0"])),
                                float(h["k_v"]), float(h["gamma"])),
            hw_dom=hw(d["hw_dom"]),
            hw_for=hw(d["hw_for"]),
            corr=CorrMatrix(**{k: float(v) for k, v in d.get("corr", {}).items()}),
            spot=float(d["spot"]),
        )

    def to_dict(self) -> dict:
        h, c = self.heston, self.corr
        return {
            "heston": {"v0": h.v0, "theta_v": h.theta_v, "k_v": h.k_v, "gamma": h.gamma},
            "hw_dom": {"k": self.hw_dom.k, "eta": self.hw_dom.eta,
                       "curve": self.hw_dom.zero_curve.to_pairs()},
            "hw_for": {"k": self.hw_for.k, "eta": self.hw_for.eta,
                       "curve": self.hw_for.zero_curve.to_pairs()},
            "corr": {"sv": c.sv, "sd": c.sd, "sf": c.sf, "vd": c.vd, "vf": c.vf, "df": c.df},
            "spot": self.spot,
        }


def load_params(path) -> ModelParams:
    with open(Path(path)) as fh:
        return ModelParams.from_dict(json.load(fh))


def base_params() -> ModelParams:
    """The hypothetical FX/rates set used throughout the numerical study."""
    return ModelParams(
        heston=HestonParams(v0=0.05, theta_v=0.05, k_v=3.0, gamma=0.3),
        hw_dom=HullWhiteParams(k=0.01, eta=0.007, zero_curve=ZeroCurve.flat(0.0)),
        hw_for=HullWhiteParams(k=0.05, eta=0.012, zero_curve=ZeroCurve.flat(0.0)),
        corr=CorrMatrix(sv=-0.4, sd=-0.15, sf=-0.15, vd=0.0, vf=0.0, df=0.25),
        spot=100.0,
    )


@dataclass(frozen=True)
class OptionSpec:
    """European option on the FX rate, unit foreign notional.

    ``F0`` and ``S0`` are tied by the curves; build through
    :func:`make_option` unless a forward override is intended.
    """

    kind: str
    strike: float
    maturity: float
    F0: float
    S0: float

    def __post_init__(self):
        if self.kind not in ("put", "call"):
            raise OptionSpecError(f"kind must be 'put' or 'call', got {self.kind!r}")
        if not self.strike > 0.0:
            raise OptionSpecError("strike must be positive")
        if not self.maturity > 0.0:
            raise OptionSpecError("maturity must be positive")
        if not (self.F0 > 0.0 and self.S0 > 0.0):
            raise OptionSpecError("spot and forward must be positive")


def make_option(params: ModelParams, strike: float, maturity: float,
                kind: str = "put", forward_override: float | None = None) -> OptionSpec:
    F0 = params.forward(maturity) if forward_override is None else forward_override
    return OptionSpec(kind, strike, maturity, F0, params.spot)


def forward(S0: float, zero_curve_d: ZeroCurve, zero_curve_f: ZeroCurve, T: float) -> float:
    """FX forward S0 * P_f(0, T) / P_d(0, T)."""
    if T < 0.0:
        raise ValueError("forward maturity must be non-negative")
    if T == 0.0:
        return float(S0)
    return float(S0 * zero_curve_f.discount(T) / zero_curve_d.discount(T))


def forward_variance(params: ModelParams, t, T: float, v=None):
    """sigma_F(t, v)^2, the instantaneous variance of the T-forward FX rate."""
    v = params.heston.v0 if v is None else v
    sv = np.sqrt(v)
    c = params.corr
    ed, ef = params.hw_dom.eta, params.hw_for.eta
    bd = params.hw_dom.bond_factor(t, T)
    bf = params.hw_for.bond_factor(t, T)
    return (v + ed**2 * bd**2 + ef**2 * bf**2
            - 2.0 * c.sd * ed * bd * sv + 2.0 * c.sf * ef * bf * sv
            - 2.0 * c.df * ed * ef * bd * bf)


def validate(params: ModelParams, expansion: bool = False) -> None:
    """Check every parameter invariant; raise a specific error on the first failure.

    With ``expansion=True`` the extra assumptions of the vol-of-vol expansion
    are enforced too (v0 == theta_v, zero vol/rate correlations). A violated
    Feller condition only emits a :class:`FellerWarning`.
    """
    h = params.heston
    for name, val in (("v0", h.v0), ("theta_v", h.theta_v), ("k_v", h.k_v),
                      ("k_d", params.hw_dom.k), ("k_f", params.hw_for.k),
                      ("spot", params.spot)):
        if not (math.isfinite(val) and val > 0.0):
            raise NonPositiveParameterError(f"{name} must be positive, got {val}")
    for name, val in (("gamma", h.gamma), ("eta_d", params.hw_dom.eta),
                      ("eta_f", params.hw_for.eta)):
        if not (math.isfinite(val) and val >= 0.0):
            raise NonPositiveParameterError(f"{name} must be non-negative, got {val}")

    c = params.corr
    for name in ("sv", "sd", "sf", "vd", "vf", "df"):
        val = getattr(c, name)
        if not (math.isfinite(val) and -1.0 <= val <= 1.0):
            raise CorrelationRangeError(f"rho_{name}={val} outside [-1, 1]")
    c.cholesky()

    if 2.0 * h.k_v * h.theta_v < h.gamma**2:
        warnings.warn("Feller condition 2 k_v theta_v >= gamma^2 violated",
                      FellerWarning, stacklevel=2)

    if expansion:
        if abs(h.v0 - h.theta_v) > V0_THETA_RTOL * max(abs(h.v0), abs(h.theta_v)):
            raise ExpansionAssumptionError(
                f"expansion requires v0 == theta_v (got {h.v0} vs {h.theta_v})")
        if c.vd != 0.0 or c.vf != 0.0:
            raise UnsupportedCorrelationError(
                "expansion requires rho_vd = rho_vf = 0")


@dataclass
class PriceResult:
    price: float
    implied_vol: float | None
    method: str
    diagnostics: dict = field(default_factory=dict)

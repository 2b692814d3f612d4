"""Experiment harness: price the maturity x strike grid with each method and write CSV.

Methods:

* ``Exp``    - second-order expansion with stochastic rates;
* ``ExpChF`` - Heston ChF price plus the expansion's stochastic-rate increment;
* ``ChF``    - Heston ChF price with deterministic rates (no rate volatility);
* ``MC``     - QE Monte-Carlo under the full dynamics, the benchmark for ``diff_vs_mc_bp``.

A ChF pricer for the approximated hybrid ChF is not part of this package, so
the table has no column for it.

The main CSV holds no timings, which keeps reruns byte-identical; wall times
go to ``<out stem>.timing.csv``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .black_scholes import ImpliedVolError, implied_vol
from .expansion import price_hhw_exp, price_hybrid_expchf
from .heston_chf import price_heston_chf
from .mc_qe import McConfig, simulate_hhw_strikes, write_path_stats
from .model import ModelParams, base_params, load_params, make_option

DELTAS = (-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5)
MATURITIES = (1.0, 3.0, 5.0, 7.0, 10.0)
METHODS = ("Exp", "ExpChF", "ChF", "MC")
SWEEPS = ("gamma", "eta_d", "eta_f")
COLUMNS = ("sweep", "sweep_value", "maturity", "delta", "strike", "forward", "method",
           "price", "implied_vol", "diff_vs_mc_bp", "mc_std_error", "status")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PARTIAL = 2


def strike_grid(F0: float, T: float, deltas=DELTAS) -> list[float]:
    """K_i = F0 exp(0.1 delta_i sqrt(T))."""
    if not (F0 > 0.0 and T > 0.0):
        raise ValueError("forward and maturity must be positive")
    return [F0 * math.exp(0.1 * d * math.sqrt(T)) for d in deltas]


@dataclass(frozen=True)
class ExperimentSpec:
    maturities: tuple[float, ...] = MATURITIES
    deltas: tuple[float, ...] = DELTAS
    methods: tuple[str, ...] = ("Exp", "ExpChF", "MC")
    sweep: str | None = None
    sweep_values: tuple[float, ...] = ()
    mc: McConfig = field(default_factory=McConfig)
    out: str = "results.csv"
    path_stats_dir: str | None = None
    n_workers: int = 1

    def __post_init__(self):
        for name in ("maturities", "deltas", "methods", "sweep_values"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if not self.maturities or any(t <= 0.0 for t in self.maturities):
            raise ValueError("maturities must be positive")
        if list(self.deltas) != sorted(set(self.deltas)):
            raise ValueError("strike deltas must be strictly increasing")
        if self.sweep is not None:
            if self.sweep not in SWEEPS:
                raise ValueError(f"sweep must be one of {SWEEPS}")
            if not self.sweep_values or any(not x > 0.0 for x in self.sweep_values):
                raise ValueError("sweep values must be positive")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        if "mc" in d:
            d["mc"] = McConfig(**d["mc"])
        return cls(**d)


@dataclass
class Row:
    sweep: str
    sweep_value: float | None
    maturity: float
    delta: float
    strike: float
    forward: float
    method: str
    price: float | None = None
    implied_vol: float | None = None
    diff_vs_mc_bp: float | None = None
    mc_std_error: float | None = None
    status: str = "ok"

    def cells(self) -> list[str]:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return f"{x:.17g}"
            return str(x)
        return [fmt(getattr(self, c)) for c in COLUMNS]


def _put_iv(price, opt, params) -> float | None:
    try:
        return implied_vol(price, opt.F0, opt.strike, opt.maturity,
                           params.hw_dom.zero_curve.discount(opt.maturity))
    except ImpliedVolError:
        return None


def _analytic(method: str, params: ModelParams, opt):
    if method == "Exp":
        return price_hhw_exp(params, opt).price
    if method == "ExpChF":
        return price_hybrid_expchf(params, opt).price
    return price_heston_chf(params, opt)


def _price_maturity(spec: ExperimentSpec, params: ModelParams, T: float,
                    sweep_label: str, sweep_value):
    """Rows and per-method wall times for one maturity."""
    F0 = params.forward(T)
    strikes = strike_grid(F0, T, spec.deltas)
    opts = [make_option(params, K, T) for K in strikes]
    rows: dict[str, list[Row]] = {}
    timing: dict[str, float] = {}
    for method in spec.methods:
        out = []
        start = time.perf_counter()
        if method == "MC":
            try:
                ests = simulate_hhw_strikes(params, T, strikes, spec.mc)
                for d, opt, est in zip(spec.deltas, opts, ests):
                    out.append(Row(sweep_label, sweep_value, T, d, opt.strike, F0, method,
                                   est.price, _put_iv(est.price, opt, params),
                                   mc_std_error=est.std_error))
                if spec.path_stats_dir is not None and ests and ests[0].path_stats is not None:
                    tag = "" if sweep_value is None else f"_{sweep_label}{sweep_value:g}"
                    write_path_stats(Path(spec.path_stats_dir) / f"path_stats{tag}_T{T:g}.csv",
                                     ests[0])
            except Exception as exc:  # noqa: BLE001 - recorded per cell
                out = [Row(sweep_label, sweep_value, T, d, opt.strike, F0, method,
                           status=f"error:{type(exc).__name__}")
                       for d, opt in zip(spec.deltas, opts)]
        else:
            for d, opt in zip(spec.deltas, opts):
                row = Row(sweep_label, sweep_value, T, d, opt.strike, F0, method)
                try:
                    row.price = _analytic(method, params, opt)
                    row.implied_vol = _put_iv(row.price, opt, params)
                except Exception as exc:  # noqa: BLE001 - recorded per cell
                    row.status = f"error:{type(exc).__name__}"
                out.append(row)
        timing[method] = time.perf_counter() - start
        rows[method] = out

    mc_rows = rows.get("MC")
    if mc_rows is not None:
        for method, out in rows.items():
            for row, mc in zip(out, mc_rows):
                row.mc_std_error = mc.mc_std_error
                if row.implied_vol is not None and mc.implied_vol is not None:
                    row.diff_vs_mc_bp = 1e4 * (row.implied_vol - mc.implied_vol)
    ordered = [row for method in spec.methods for row in rows[method]]
    return ordered, timing


def run_experiment(spec: ExperimentSpec, params: ModelParams):
    """Price the full grid, write the CSV and the timing sidecar.

    Returns ``(rows, timing)`` where timing maps ``(sweep_value, method)`` to
    the wall time over all maturities and strikes.
    """
    if spec.sweep is None:
        cases = [("", None, params)]
    else:
        cases = [(spec.sweep, x, params.with_changes(**{spec.sweep: x}))
                 for x in spec.sweep_values]
    jobs = [(label, value, p, T) for label, value, p in cases for T in spec.maturities]
    if spec.path_stats_dir is not None:
        Path(spec.path_stats_dir).mkdir(parents=True, exist_ok=True)
        spec = replace(spec, mc=replace(spec.mc, keep_path_stats=True))

    def task(job):
        label, value, p, T = job
        return _price_maturity(spec, p, T, label, value)

    if spec.n_workers > 1:
        # analytic cells run concurrently; MC cells inside each job keep their own seed
        with ThreadPoolExecutor(spec.n_workers) as pool:
            results = list(pool.map(task, jobs))
    else:
        results = [task(j) for j in jobs]

    rows: list[Row] = []
    timing: dict = {}
    for (label, value, _, _), (r, t) in zip(jobs, results):
        rows.extend(r)
        for method, sec in t.items():
            timing[(value, method)] = timing.get((value, method), 0.0) + sec
    write_rows(spec.out, rows)
    write_timing(timing_path(spec.out), spec, timing)
    return rows, timing


def timing_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".timing.csv")


def write_rows(path, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in rows:
            w.writerow(row.cells())


def write_timing(path, spec: ExperimentSpec, timing: dict) -> None:
    n_options = len(spec.maturities) * len(spec.deltas)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "sweep_value", "method", "n_options", "wall_time_s"])
        for (value, method), sec in timing.items():
            w.writerow([spec.sweep or "", "" if value is None else f"{value:.17g}",
                        method, n_options, f"{sec:.6f}"])


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="hhwexp", description="Price FX put grids under Heston-Hull-White and compare methods.")
    ap.add_argument("--config", help="model parameter JSON (default: built-in base set)")
    ap.add_argument("--experiment", help="experiment JSON; command-line flags override it")
    ap.add_argument("--methods", help=f"comma list from {','.join(METHODS)}")
    ap.add_argument("--maturities", help="comma list of maturities in years")
    ap.add_argument("--deltas", help="comma list of strike deltas")
    ap.add_argument("--paths", type=int, help="Monte-Carlo paths")
    ap.add_argument("--dt", type=float, help="Monte-Carlo time step in years")
    ap.add_argument("--seed", type=int, help="Monte-Carlo seed")
    ap.add_argument("--batches", type=int, help="Monte-Carlo batches (one RNG stream each)")
    ap.add_argument("--antithetic", action="store_true", help="antithetic Monte-Carlo draws")
    ap.add_argument("--control-variate", action="store_true",
                    help="subtract frozen-rate twin paths priced by the Heston ChF")
    ap.add_argument("--sweep", choices=SWEEPS, help="parameter to sweep")
    ap.add_argument("--values", help="comma list of sweep values")
    ap.add_argument("--workers", type=int, help="threads for grid cells")
    ap.add_argument("--out", help="output CSV path")
    ap.add_argument("--path-stats", metavar="DIR",
                    help="debug: dump per-step mean v, r_d, r_f of each MC run into DIR")
    return ap


def spec_from_args(args) -> ExperimentSpec:
    base = {}
    if args.experiment:
        base = json.loads(Path(args.experiment).read_text())
    mc = dict(base.pop("mc", {}))
    for flag, key in (("paths", "n_paths"), ("dt", "dt"), ("seed", "seed"),
                      ("batches", "n_batches")):
        if getattr(args, flag) is not None:
            mc[key] = getattr(args, flag)
    if args.antithetic:
        mc["antithetic"] = True
    if args.control_variate:
        mc["control_variate"] = True
    if "n_batches" not in mc and "n_paths" in mc:
        mc["n_batches"] = min(McConfig.n_batches, mc["n_paths"])
    base["mc"] = mc
    if args.methods:
        base["methods"] = [m.strip() for m in args.methods.split(",") if m.strip()]
    if args.maturities:
        base["maturities"] = _floats(args.maturities)
    if args.deltas:
        base["deltas"] = _floats(args.deltas)
    if args.sweep:
        base["sweep"] = args.sweep
    if args.values:
        base["sweep_values"] = _floats(args.values)
    if args.out:
        base["out"] = args.out
    if args.workers:
        base["n_workers"] = args.workers
    if args.path_stats:
        base["path_stats_dir"] = args.path_stats
    return ExperimentSpec.from_dict(base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = load_params(args.config) if args.config else base_params()
        spec = spec_from_args(args)
    except (ValueError, TypeError, OSError) as exc:
        print(f"hhwexp: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows, timing = run_experiment(spec, params)
    failed = [r for r in rows if r.status != "ok"]
    for (value, method), sec in timing.items():
        tag = "" if value is None else f" {spec.sweep}={value:g}"
        print(f"{method:7s}{tag}: {sec * 1e3:9.1f} ms")
    print(f"wrote {len(rows)} rows to {spec.out}")
    if failed:
        print(f"{len(failed)} cells failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

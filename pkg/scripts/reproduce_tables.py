"""Run the experiment configs and print implied-vol gaps against Monte-Carlo.

    python3 scripts/reproduce_tables.py                      # every config
    python3 scripts/reproduce_tables.py configs/gamma_sweep.json --paths 20000

Each config writes its CSV (and timing sidecar) to the ``out`` path it names,
relative to the repository root.
"""
import argparse
import json
import sys
from collections import defaultdict
from dataclasses import replace
from pathlib import Path

from hhwexp.cli import ExperimentSpec, run_experiment
from hhwexp.model import load_params

ROOT = Path(__file__).resolve().parents[1]
DEFAULT_CONFIGS = ("base_grid", "gamma_sweep", "eta_d_sweep", "eta_f_sweep")


def print_table(name, rows):
    """One block per sweep value: rows are (maturity, delta), columns are methods."""
    methods = [m for m in ("Exp", "ExpChF", "ChF") if any(r.method == m for r in rows)]
    cells = defaultdict(dict)
    for r in rows:
        cells[(r.sweep_value, r.maturity, r.delta)][r.method] = r
    print(f"\n== {name}: implied-vol difference vs MC in bp (MC s.e. in price) ==")
    header = f"{'sweep':>8} {'T':>5} {'delta':>6} " + "".join(f"{m:>10}" for m in methods)
    print(header + f"{'MC iv':>10}{'MC s.e.':>10}")
    for (value, T, delta), by_method in cells.items():
        line = f"{'' if value is None else value:>8} {T:>5g} {delta:>6g} "
        for m in methods:
            d = by_method.get(m)
            line += f"{d.diff_vs_mc_bp:>10.2f}" if d and d.diff_vs_mc_bp is not None else f"{'-':>10}"
        mc = by_method.get("MC")
        if mc and mc.implied_vol is not None:
            line += f"{mc.implied_vol:>10.5f}{mc.mc_std_error:>10.4f}"
        print(line)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", help="experiment JSON files")
    ap.add_argument("--params", default=str(ROOT / "configs" / "base_params.json"))
    ap.add_argument("--paths", type=int, help="override the MC path count (quick runs)")
    args = ap.parse_args(argv)

    params = load_params(args.params)
    configs = args.configs or [str(ROOT / "configs" / f"{c}.json") for c in DEFAULT_CONFIGS]
    for cfg in configs:
        with open(cfg) as fh:
            spec = ExperimentSpec.from_dict(json.load(fh))
        spec = replace(spec, out=str(ROOT / spec.out))
        if args.paths:
            spec = replace(spec, mc=replace(spec.mc, n_paths=args.paths))
        Path(spec.out).parent.mkdir(parents=True, exist_ok=True)
        rows, timing = run_experiment(spec, params)
        print_table(Path(cfg).stem, rows)
        total = defaultdict(float)
        for (_, method), sec in timing.items():
            total[method] += sec
        print("wall time: " + ", ".join(f"{m} {s:.2f}s" for m, s in total.items()))
        print(f"wrote {spec.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

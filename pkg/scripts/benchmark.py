"""Wall-clock cost of each pricer on the 5 maturity x 7 strike grid.

    python3 scripts/benchmark.py [--repeats 5] [--paths 100000]
"""
import argparse
import statistics
import sys
import time
import warnings

from hhwexp.cli import DELTAS, MATURITIES, strike_grid
from hhwexp.expansion import price_heston_exp, price_hhw_exp, price_hybrid_expchf
from hhwexp.heston_chf import price_heston_chf
from hhwexp.mc_qe import McConfig, simulate_hhw_strikes
from hhwexp.model import FellerWarning, base_params, make_option


def time_grid(fn, opts, repeats):
    fn(opts[0])
    runs = []
    for _ in range(repeats):
        start = time.perf_counter()
        for o in opts:
            fn(o)
        runs.append(time.perf_counter() - start)
    return statistics.median(runs)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--paths", type=int, default=100_000)
    args = ap.parse_args(argv)
    warnings.simplefilter("ignore", FellerWarning)

    p = base_params()
    opts = [make_option(p, K, T) for T in MATURITIES for K in strike_grid(p.forward(T), T)]
    pricers = {
        "Exp-Heston": lambda o: price_heston_exp(p, o),
        "Exp": lambda o: price_hhw_exp(p, o),
        "ChF": lambda o: price_heston_chf(p, o),
        "ExpChF": lambda o: price_hybrid_expchf(p, o),
    }
    print(f"{len(opts)} options, median of {args.repeats} runs")
    for name, fn in pricers.items():
        t = time_grid(fn, opts, args.repeats)
        print(f"{name:>10}: {t * 1e3:9.2f} ms total  {t / len(opts) * 1e6:9.1f} us/option")

    cfg = McConfig(n_paths=args.paths)
    print(f"\nMC, {args.paths} paths, dt={cfg.dt}, all {len(DELTAS)} strikes per maturity")
    for T in MATURITIES:
        start = time.perf_counter()
        simulate_hhw_strikes(p, T, strike_grid(p.forward(T), T), cfg)
        print(f"  T={T:>4g}: {time.perf_counter() - start:7.2f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())

import csv
import json
import math

import pytest

from hhwexp.black_scholes import bs_put_price
from hhwexp.cli import (COLUMNS, EXIT_CONFIG, EXIT_OK, EXIT_PARTIAL, ExperimentSpec, main,
                        run_experiment, strike_grid, timing_path)
from hhwexp.mc_qe import McConfig


def read(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_strike_grid_examples():
    assert strike_grid(100.0, 1.0)[3] == 100.0
    assert strike_grid(100.0, 1.0)[6] == pytest.approx(116.1834, abs=1e-4)
    assert strike_grid(100.0, 4.0)[5] == pytest.approx(122.1403, abs=1e-4)
    ks = strike_grid(87.0, 7.0)
    assert len(ks) == 7 and all(a < b for a, b in zip(ks, ks[1:]))
    with pytest.raises(ValueError):
        strike_grid(100.0, 0.0)


def test_exp_grid_has_35_rows_and_timing(base, tmp_path):
    out = tmp_path / "exp.csv"
    rows, timing = run_experiment(ExperimentSpec(methods=("Exp",), out=str(out)), base)
    assert len(rows) == 35 and len(read(out)) == 35
    assert set(timing) == {(None, "Exp")}
    sidecar = read(timing_path(out))
    assert sidecar[0]["method"] == "Exp" and sidecar[0]["n_options"] == "35"


def test_columns_and_round_trip(base, tmp_path):
    out = tmp_path / "all.csv"
    spec = ExperimentSpec(maturities=(1.0, 5.0), methods=("Exp", "ExpChF", "ChF", "MC"),
                          mc=McConfig(5_000, 0.05, 1, n_batches=2), out=str(out))
    run_experiment(spec, base)
    rows = read(out)
    assert tuple(rows[0]) == COLUMNS
    assert len(rows) == 2 * 7 * 4
    for r in rows:
        assert r["status"] == "ok"
        T, K, F = float(r["maturity"]), float(r["strike"]), float(r["forward"])
        price = bs_put_price(F, K, T, float(r["implied_vol"]))
        assert price == pytest.approx(float(r["price"]), abs=1e-8)
        assert r["diff_vs_mc_bp"] != "" and r["mc_std_error"] != ""
    mc = [r for r in rows if r["method"] == "MC"]
    assert all(float(r["diff_vs_mc_bp"]) == 0.0 for r in mc)


def test_standard_error_column_scales_with_paths(base, tmp_path):
    ses = []
    for n in (1_000, 100_000):
        out = tmp_path / f"mc{n}.csv"
        spec = ExperimentSpec(maturities=(1.0,), deltas=(0.0,), methods=("MC",),
                              mc=McConfig(n, 0.05, 9, n_batches=1), out=str(out))
        run_experiment(spec, base)
        ses.append(float(read(out)[0]["mc_std_error"]))
    assert 8.0 <= ses[0] / ses[1] <= 12.0


def test_gamma_sweep_shape(base, tmp_path):
    out = tmp_path / "gamma.csv"
    spec = ExperimentSpec(deltas=(0.0,), methods=("Exp", "ExpChF"), sweep="gamma",
                          sweep_values=(0.3, 0.4, 0.5, 0.6), out=str(out))
    run_experiment(spec, base)
    rows = read(out)
    assert len(rows) == 4 * 5 * 2
    assert [float(r["sweep_value"]) for r in rows[::10]] == [0.3, 0.4, 0.5, 0.6]
    assert {r["sweep"] for r in rows} == {"gamma"}


def test_reruns_are_byte_identical(base, tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.csv"
        spec = ExperimentSpec(maturities=(1.0, 3.0), methods=("Exp", "MC"),
                              mc=McConfig(4_000, 0.05, 5, n_batches=2), out=str(out))
        run_experiment(spec, base)
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_full_precision_cells(base, tmp_path):
    out = tmp_path / "p.csv"
    run_experiment(ExperimentSpec(maturities=(1.0,), methods=("Exp",), out=str(out)), base)
    r = read(out)[0]
    assert float(r["price"]) == float(repr(float(r["price"])))
    assert len(r["price"].replace(".", "").lstrip("0")) >= 15


def test_failed_cells_marked_and_exit_code(base, tmp_path):
    cfg = base.with_changes(theta_v=0.06).to_dict()
    cfg_path = tmp_path / "bad.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / "o.csv"
    code = main(["--config", str(cfg_path), "--methods", "Exp,ChF", "--maturities", "1",
                 "--out", str(out)])
    assert code == EXIT_PARTIAL
    rows = read(out)
    assert {r["status"] for r in rows if r["method"] == "Exp"} == {"error:ExpansionAssumptionError"}
    assert {r["status"] for r in rows if r["method"] == "ChF"} == {"ok"}


def test_main_success_and_config_errors(tmp_path, capsys):
    out = tmp_path / "ok.csv"
    assert main(["--methods", "Exp", "--out", str(out)]) == EXIT_OK
    assert "wrote 35 rows" in capsys.readouterr().out
    assert main(["--methods", "Nope", "--out", str(out)]) == EXIT_CONFIG
    assert main(["--sweep", "gamma", "--values", "-0.1", "--out", str(out)]) == EXIT_CONFIG


def test_experiment_file_and_overrides(tmp_path):
    exp = {"maturities": [1, 3], "deltas": [0.0], "methods": ["Exp", "MC"],
           "mc": {"n_paths": 2000, "dt": 0.05, "seed": 1, "n_batches": 2},
           "out": str(tmp_path / "from_file.csv")}
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(exp))
    stats = tmp_path / "stats"
    assert main(["--experiment", str(path), "--seed", "3", "--path-stats", str(stats)]) == 0
    assert len(read(tmp_path / "from_file.csv")) == 4
    assert sorted(p.name for p in stats.iterdir()) == ["path_stats_T1.csv", "path_stats_T3.csv"]


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec(methods=())
    with pytest.raises(ValueError):
        ExperimentSpec(sweep="eta_d", sweep_values=(0.0,))
    with pytest.raises(ValueError):
        ExperimentSpec(deltas=(1.0, 0.0))
    assert math.isclose(ExperimentSpec(sweep="eta_f", sweep_values=[0.01]).sweep_values[0], 0.01)

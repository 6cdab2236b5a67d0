import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from dvssgt import charts, cli


def small_cfg(tmp_path, **extra):
    cfg = {"paths": 2, "stop": {"max_iters": 25}}
    cfg.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    return str(path)


def test_load_config_preset_and_overrides(tmp_path):
    path = small_cfg(tmp_path, alpha=0.02)
    cfg = cli.load_config("fig1", path)
    assert cfg["alpha"] == 0.02
    assert cfg["paths"] == 2
    assert cfg["stop"] == {"max_iters": 25}
    assert cfg["problem"]["n"] == 10  # untouched preset values survive


def test_validate_config_itemized():
    cfg = cli.load_config("fig1")
    assert cli.validate_config(cfg) == []
    bad = cli.load_config("fig1")
    bad["alpha"] = -1.0
    bad["graph"]["p"] = 2.0
    bad["algorithm"] = "adam"
    bad["schedule"]["ratio"] = 1.5
    bad["stop"] = {"max_iters": 10, "target_eps": 0.1}
    errors = cli.validate_config(bad)
    assert len(errors) == 5
    assert cli.validate_config({}) != []


def test_cmd_run_deterministic_csvs(tmp_path):
    path = small_cfg(tmp_path)
    assert cli.main(["run", "--preset", "fig1", "--config", path,
                     "--out", str(tmp_path / "a")]) == 0
    assert cli.main(["run", "--preset", "fig1", "--config", path,
                     "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "run_dvss-sgt.csv").read_bytes()
    b = (tmp_path / "b" / "run_dvss-sgt.csv").read_bytes()
    assert a == b
    svg = (tmp_path / "a" / "run_dvss-sgt.svg").read_text()
    ET.fromstring(svg)  # well-formed XML


def test_config_echo_reproduces_run(tmp_path):
    path = small_cfg(tmp_path)
    assert cli.main(["run", "--preset", "fig1", "--config", path,
                     "--out", str(tmp_path / "a")]) == 0
    echo = tmp_path / "a" / "config.json"
    assert cli.main(["run", "--config", str(echo),
                     "--out", str(tmp_path / "c")]) == 0
    assert ((tmp_path / "a" / "run_dvss-sgt.csv").read_bytes()
            == (tmp_path / "c" / "run_dvss-sgt.csv").read_bytes())


def test_config_error_exit_code(tmp_path):
    path = small_cfg(tmp_path, alpha=-5.0)
    assert cli.main(["run", "--preset", "fig1", "--config", path,
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG_ERROR
    missing = cli.main(["run", "--config", str(tmp_path / "nope.json"),
                        "--out", str(tmp_path / "o")])
    assert missing == cli.EXIT_CONFIG_ERROR


def test_divergence_exit_and_partial_trace(tmp_path):
    path = small_cfg(tmp_path, alpha=10.0, paths=1)
    out = tmp_path / "div"
    assert cli.main(["run", "--preset", "fig1", "--config", path,
                     "--out", str(out)]) == cli.EXIT_DIVERGENCE
    assert (out / "partial_trace.csv").exists()


def test_compare_outputs(tmp_path):
    path = small_cfg(tmp_path, paths=2, stop={"budget_samples": 300})
    out = tmp_path / "cmp"
    assert cli.main(["compare", "--preset", "fig3", "--config", path,
                     "--out", str(out)]) == 0
    for algorithm in cli.ALGORITHMS:
        assert (out / f"compare_{algorithm}.csv").exists()
    ET.fromstring((out / "compare.svg").read_text())


def test_compare_degenerate_budget(tmp_path):
    path = small_cfg(tmp_path, paths=2, stop={"budget_samples": 5})
    out = tmp_path / "cmp0"
    assert cli.main(["compare", "--preset", "fig3", "--config", path,
                     "--out", str(out)]) == 0
    from dvssgt import metrics
    for algorithm in cli.ALGORITHMS:
        rows = metrics.read_csv(out / f"compare_{algorithm}.csv")
        assert len(rows) == 1  # zero-iteration trace, clean exit


def test_theory_report(tmp_path):
    path = small_cfg(tmp_path)
    out = tmp_path / "th"
    assert cli.main(["theory", "--preset", "fig1", "--config", path,
                     "--out", str(out)]) == 0
    report = json.loads((out / "theory.json").read_text())
    assert report["rho_at_alpha_star"] < 1.0
    assert report["alpha_star"] > 0.0
    assert report["recursion_max_violation"] <= 1e-9
    assert report["regime"] in ("q_dominant", "rho_dominant")
    assert set(report["complexity"]) == {"1e-01", "1e-02", "1e-03", "1e-04"}
    q2 = report["q"] ** 2
    for table in report["complexity"].values():
        assert table["K"] >= 0
        # ceiling-adjusted form of the printed bound (see theory tests)
        assert table["oracle_exact"] <= table["oracle_bound"] / q2 + table["K"] + 1
    assert isinstance(report["rho_at_alpha"]["eta"], float)
    assert isinstance(report["rho_at_alpha"]["L"], float)


def test_theory_noiseless_C_zero(tmp_path):
    cfg = cli.load_config("fig1")
    cfg["paths"] = 2
    cfg["problem"]["noise_sigmas"] = 0.0
    report = cli.theory_report(cfg)
    # observation noise is zero but regressor scatter still contributes;
    # force a true noiseless check through the formula itself
    from dvssgt import theory
    assert theory.noise_constant(0.0, report["table_alpha"], report["q"],
                                 report["lips"], 10) == 0.0
    assert report["C_empirical_nu"] >= 0.0


def test_sweep_singleton_matches_run(tmp_path):
    path = small_cfg(tmp_path)
    out_sweep = tmp_path / "sw"
    assert cli.main(["sweep", "--preset", "fig1", "--config", path,
                     "--param", "ratio", "--grid", "0.98",
                     "--out", str(out_sweep)]) == 0
    out_run = tmp_path / "r"
    assert cli.main(["run", "--preset", "fig1", "--config", path,
                     "--out", str(out_run)]) == 0
    from dvssgt import metrics
    run_rows = metrics.read_csv(out_run / "run_dvss-sgt.csv")
    with open(out_sweep / "sweep_ratio.csv") as fh:
        import csv as csv_mod
        sweep_rows = list(csv_mod.DictReader(fh))
    assert len(sweep_rows) == len(run_rows)
    for srow, rrow in zip(sweep_rows, run_rows):
        assert srow["status"] == "ok"
        assert float(srow["mean_combined"]) == rrow["mean_combined"]


def test_sweep_flags_infeasible_alpha(tmp_path):
    path = small_cfg(tmp_path)
    out = tmp_path / "swa"
    assert cli.main(["sweep", "--preset", "fig1", "--config", path,
                     "--param", "alpha", "--grid", "0.002,0.6",
                     "--out", str(out)]) == 0
    import csv as csv_mod
    with open(out / "sweep_alpha.csv") as fh:
        rows = list(csv_mod.DictReader(fh))
    by_status = {row["status"] for row in rows}
    assert by_status == {"ok", "infeasible"}
    infeasible = [row for row in rows if row["status"] == "infeasible"]
    assert len(infeasible) == 1
    assert float(infeasible[0]["alpha"]) == 0.6


def test_sweep_requires_param_and_grid(tmp_path):
    path = small_cfg(tmp_path)
    assert cli.main(["sweep", "--preset", "fig1", "--config", path,
                     "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG_ERROR


def test_chart_svg_structure():
    ks = np.arange(10, dtype=float)
    svg = charts.line_chart_svg([("alg-a", ks, np.exp(-0.1 * ks)),
                                 ("alg-b", ks, np.exp(-0.2 * ks))],
                                title="demo", xlabel="k", ylabel="err")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "alg-a" in svg and "alg-b" in svg and "demo" in svg

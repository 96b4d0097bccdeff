"""End-to-end CLI contracts: exit codes, file outputs, determinism."""
import json

import numpy as np
import pytest

from robreg.cli import load_csv, main, parse_grid
from robreg import ConfigurationError, PDWReport


@pytest.fixture
def toy_csv(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("x1,x2,y\n1,0,2\n0,1,-1\n1,1,1\n", encoding="utf-8")
    return str(path)


@pytest.fixture
def square_csv(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 4)) + 2 * np.eye(4)
    beta = np.array([1.0, -2.0, 0.5, 3.0])
    y = X @ beta
    lines = ["a,b,c,d,y"]
    for i in range(4):
        lines.append(",".join(repr(float(v)) for v in (*X[i], y[i])))
    path = tmp_path / "square.csv"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path), X, beta


class TestLoadCsv:
    def test_reads_toy(self, toy_csv):
        data = load_csv(toy_csv)
        assert data.n == 3 and data.p == 2
        np.testing.assert_array_equal(data.y, [2.0, -1.0, 1.0])

    def test_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,2\n3,oops\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as err:
            load_csv(str(path))
        assert ":3:" in str(err.value) and "oops" in str(err.value)

    def test_field_count_mismatch(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("x,y\n1,2\n3\n", encoding="utf-8")
        with pytest.raises(ConfigurationError) as err:
            load_csv(str(path))
        assert ":3:" in str(err.value)


class TestParseGrid:
    def test_log_spaced(self):
        g = parse_grid("0.01:100:5")
        np.testing.assert_allclose(g, np.geomspace(0.01, 100, 5))

    def test_rejects_malformed(self):
        with pytest.raises(ConfigurationError):
            parse_grid("1:2")
        with pytest.raises(ConfigurationError):
            parse_grid("0:1:3")


class TestFitCommand:
    def test_huge_lambda_gives_zero(self, toy_csv, tmp_path, capsys):
        out = tmp_path / "fit.json"
        code = main(["fit", toy_csv, "--loss", "squared", "--lambda-init", "1000",
                     "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["final"]["support"] == []
        assert all(v == 0.0 for v in payload["final"]["beta"])
        assert "support (0)" in capsys.readouterr().out

    def test_refit_byte_identical(self, toy_csv, tmp_path):
        out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
        for out in (out1, out2):
            assert main(["fit", toy_csv, "--loss", "pseudo-huber", "--alpha", "0.5",
                         "--lambda-init", "0.1", "--out", str(out)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_zero_lambda_interpolates(self, square_csv, tmp_path):
        path, X, beta = square_csv
        out = tmp_path / "interp.json"
        code = main(["fit", path, "--loss", "squared", "--lambda-init", "0",
                     "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        got = np.asarray(payload["final"]["beta"])
        np.testing.assert_allclose(X @ got, X @ beta, atol=1e-5)

    def test_missing_file_is_config_error(self, tmp_path):
        assert main(["fit", str(tmp_path / "nope.csv"), "--lambda-init", "1"]) == 2

    def test_bad_cell_is_config_error(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x,y\n1,two\n", encoding="utf-8")
        assert main(["fit", str(path), "--lambda-init", "1"]) == 2


def tiny_scenario_file(tmp_path, seed=3):
    from robreg import NormalErrors, Scenario, standard_beta_star

    sc = Scenario(
        n=40, p=12, beta_star=standard_beta_star(12, 3),
        error_family=NormalErrors(1.0), heteroscedastic=False, seed=seed,
    )
    path = tmp_path / "scenario.json"
    path.write_text(sc.to_json(), encoding="utf-8")
    return str(path)


class TestSimulateCommand:
    def test_reps_one_matches_metrics(self, tmp_path, capsys):
        scenario = tiny_scenario_file(tmp_path)
        out = tmp_path / "rep.json"
        code = main(["simulate", "--scenario", scenario, "--estimator", "L",
                     "--lambda", "0.05", "--reps", "1", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["replications"] == 1
        table = (tmp_path / "rep.json.txt").read_text()
        assert f'{payload["mean_l2"]:.2f}' in table

    def test_builtin_scenario_runs(self, tmp_path):
        out = tmp_path / "t1.json"
        code = main(["simulate", "--scenario", "table1", "--estimator", "L",
                     "--reps", "2", "--seed", "9", "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["lambda"] == 0.154  # bundled reference tuning
        assert payload["seed"] == 9

    def test_deterministic_across_runs_and_threads(self, tmp_path):
        scenario = tiny_scenario_file(tmp_path)
        outs = []
        for name, threads in (("r1.json", "1"), ("r2.json", "1"), ("r3.json", "4")):
            out = tmp_path / name
            code = main(["simulate", "--scenario", scenario, "--estimator", "LPH",
                         "--lambda", "0.05", "--alpha", "0.4", "--reps", "6",
                         "--threads", threads, "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]

    def test_per_rep_csv(self, tmp_path):
        scenario = tiny_scenario_file(tmp_path)
        per = tmp_path / "per.csv"
        code = main(["simulate", "--scenario", scenario, "--estimator", "L",
                     "--lambda", "0.05", "--reps", "4", "--per-rep-csv", str(per)])
        assert code == 0
        lines = per.read_text().strip().splitlines()
        assert lines[0] == "rep,l2,linf,fp_pct,fn_pct"
        assert len(lines) == 5

    def test_invalid_scenario_schema_error(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text('{"n": 10}', encoding="utf-8")
        assert main(["simulate", "--scenario", str(path), "--estimator", "L",
                     "--lambda", "0.1"]) == 2

    def test_adaptive_needs_init_on_custom_scenario(self, tmp_path):
        scenario = tiny_scenario_file(tmp_path)
        assert main(["simulate", "--scenario", scenario, "--estimator", "ALPH(LPH)",
                     "--lambda", "0.02", "--alpha", "0.3", "--reps", "1"]) == 2
        assert main(["simulate", "--scenario", scenario, "--estimator", "ALPH(LPH)",
                     "--lambda", "0.02", "--alpha", "0.3", "--reps", "1",
                     "--init-lambda", "0.05", "--init-alpha", "0.3"]) == 0


class TestTuneCommand:
    def test_singleton_grids_echoed(self, tmp_path, capsys):
        scenario = tiny_scenario_file(tmp_path)
        code = main(["tune", "--scenario", scenario, "--estimator", "L",
                     "--reps", "2", "--grid-lambda", "0.07:0.07:1"])
        assert code == 0
        assert "selected lambda=0.07" in capsys.readouterr().out

    def test_surface_has_cartesian_product(self, tmp_path):
        scenario = tiny_scenario_file(tmp_path)
        out = tmp_path / "tune.json"
        code = main(["tune", "--scenario", scenario, "--estimator", "LPH",
                     "--reps", "2", "--grid-lambda", "0.03:0.3:4",
                     "--grid-alpha", "0.1:1:3", "--out", str(out)])
        assert code == 0
        surface = (tmp_path / "tune.json.surface.csv").read_text().strip().splitlines()
        assert len(surface) == 1 + 4 * 3


class TestDiagnoseCommand:
    def test_block_diagonal_zero_incoherence(self, tmp_path, capsys):
        # two orthogonal blocks: signal on the first, nothing crosses over
        rng = np.random.default_rng(5)
        n = 60
        x0 = rng.standard_normal(n)
        x1 = rng.standard_normal(n)
        X = np.zeros((n, 2))
        X[: n // 2, 0] = x0[: n // 2]
        X[n // 2 :, 1] = x1[n // 2 :]
        y = 3.0 * X[:, 0] + 0.1 * rng.standard_normal(n)
        lines = ["a,b,y"] + [",".join(repr(float(v)) for v in (*X[i], y[i])) for i in range(n)]
        path = tmp_path / "block.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        code = main(["diagnose", "--csv", str(path), "--loss", "squared",
                     "--lambda", "0.1", "--support", "0"])
        assert code == 0
        out = capsys.readouterr().out
        assert "incoherence: 0" in out

    def test_after_fit_roundtrip(self, tmp_path, capsys):
        # strong-signal fit, then certify its support from the fit JSON
        rng = np.random.default_rng(8)
        X = rng.standard_normal((80, 6))
        beta = np.array([4.0, -3.0, 0.0, 0.0, 0.0, 0.0])
        y = X @ beta + 0.2 * rng.standard_normal(80)
        lines = ["c0,c1,c2,c3,c4,c5,y"] + [
            ",".join(repr(float(v)) for v in (*X[i], y[i])) for i in range(80)
        ]
        path = tmp_path / "strong.csv"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        fit_out = tmp_path / "fit.json"
        assert main(["fit", str(path), "--loss", "pseudo-huber", "--alpha", "0.5",
                     "--lambda-init", "0.2", "--out", str(fit_out)]) == 0
        diag_out = tmp_path / "pdw.json"
        code = main(["diagnose", "--csv", str(path), "--loss", "pseudo-huber",
                     "--alpha", "0.5", "--lambda", "0.2", "--fit-json", str(fit_out),
                     "--out", str(diag_out)])
        assert code == 0
        report = PDWReport.from_json(diag_out.read_text())
        assert report.full_matches_restricted

    def test_report_roundtrip_byte_identical(self, tmp_path):
        scenario = tiny_scenario_file(tmp_path)
        out = tmp_path / "pdw.json"
        code = main(["diagnose", "--scenario", scenario, "--loss", "squared",
                     "--lambda", "0.4", "--support", "0,1,2", "--out", str(out)])
        assert code == 0
        text = out.read_text()
        assert PDWReport.from_json(text).to_json() + "\n" == text

    def test_needs_support_or_fit(self, tmp_path):
        scenario = tiny_scenario_file(tmp_path)
        assert main(["diagnose", "--scenario", scenario, "--lambda", "0.1"]) == 2


def test_numerical_failure_maps_to_exit_3(tmp_path, monkeypatch):
    from robreg import NumericalError
    import robreg.cli as cli

    scenario = tiny_scenario_file(tmp_path)

    def boom(*a, **k):
        raise NumericalError("synthetic failure")

    monkeypatch.setattr(cli, "run_monte_carlo", boom)
    assert main(["simulate", "--scenario", scenario, "--estimator", "L",
                 "--lambda", "0.05", "--reps", "1"]) == 3


def test_env_var_thread_default(tmp_path, monkeypatch):
    monkeypatch.setenv("ROBREG_THREADS", "3")
    from robreg.cli import _default_threads

    assert _default_threads() == 3
    monkeypatch.setenv("ROBREG_THREADS", "zebra")
    with pytest.raises(ConfigurationError):
        _default_threads()

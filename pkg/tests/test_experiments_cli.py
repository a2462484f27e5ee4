import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nodalwaves import cli, experiments
from nodalwaves.config import ConfigError, ExperimentConfig
from nodalwaves.experiments import (CSV_COLUMNS, OPEN_QUESTION_TAG, ResultRow, compare,
                                    format_rows, read_rows, run_chaos_study,
                                    run_simulation, run_verification_suite, weighted_slope,
                                    write_rows)

SMALL = ["--dim", "3", "--radii", "2", "3", "--replicates", "3"]


def _body(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


# --- config ------------------------------------------------------------------


@pytest.mark.parametrize("kwargs", [
    {"kind": "other"}, {"dim": 4}, {"radii": ()}, {"radii": (3.0, 2.0)}, {"radii": (-1.0,)},
    {"grid_spacing": 1.1}, {"replicates": 1}, {"kind": "scaling", "radii": (2.0, 3.0)},
    {"tolerance": 0.0}, {"seed": -1}, {"n_waves": 0}])
def test_config_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        ExperimentConfig(**kwargs)


def test_config_json_roundtrip(tmp_path):
    cfg = ExperimentConfig(radii=(2.0, 4.0), seed=11, experiment_id="x")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_json(path) == cfg
    path.write_text(json.dumps({"radii": [2.0], "bogus": 1}))
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(path)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_json(tmp_path / "missing.json")


def test_domain_volume():
    assert ExperimentConfig(dim=3).domain_volume(3.0) == pytest.approx(36 * math.pi)
    assert ExperimentConfig(dim=2).domain_volume(3.0) == 36.0


# --- rows and flags ----------------------------------------------------------


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0, 1), st.floats(0, 1))
def test_compare_flag_definition(value, ref, tol, se):
    flag = compare(value, ref, tol, se)
    assert (flag == "mismatch") == (abs(value - ref) > max(tol, 3 * se))


def test_compare_without_reference_and_nan():
    assert compare(1.0, None, 0.1) == "n/a"
    assert compare(math.nan, 1.0, 0.1) == "mismatch"


def test_row_csv_format():
    row = ResultRow("e", "simulate", 3, 4.0, "s", 0.1, None, None, "n/a")
    assert row.as_csv() == ["e", "simulate", "3", "4", "s", "0.10000000000000001", "", "", "n/a"]
    text = format_rows([row])
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)


def test_write_rows_appends(tmp_path):
    path = tmp_path / "r.csv"
    row = ResultRow("e", "simulate", 3, 4.0, "s", 1.0)
    write_rows([row], path, ExperimentConfig())
    write_rows([row], path, ExperimentConfig())
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1].startswith("# config")
    assert _body(path).count(",".join(CSV_COLUMNS)) == 1
    assert len(read_rows(path)) == 2


def test_weighted_slope_recovers_line():
    slope, se = weighted_slope([0, 1, 2, 3], [1, 3, 5, 7], [0.1, 0.1, 0.1, 0.1])
    assert slope == pytest.approx(2.0) and se > 0


# --- runners -----------------------------------------------------------------


@pytest.fixture(scope="module")
def verification():
    return run_verification_suite(mc_samples=20_000)


def test_verification_rows(verification):
    rows, report = verification
    by_name = {r.statistic: r for r in rows}
    for name, *_ in experiments.RADIAL_TABLE:
        assert by_name[f"radial {name}"].flag == "ok"
    for name, *_ in experiments.ANGULAR_TABLE:
        assert by_name[f"angular {name}"].flag == "ok"
        assert by_name[f"angular {name} quadrature"].flag == "ok"
    assert by_name["m5/m3"].flag == by_name["m7/m3"].flag == "ok"
    assert by_name["ledger lower bound positive"].flag == "ok"
    assert report.positive


def test_verification_mismatch_rows_carry_both_values(verification):
    rows, _ = verification
    for r in rows:
        if r.flag == "mismatch":
            assert r.paper_value is not None and math.isfinite(r.value)
        assert r.open_question == r.statistic.endswith(OPEN_QUESTION_TAG)
        if r.open_question:
            assert r.flag == "mismatch"


def test_simulation_rows():
    cfg = ExperimentConfig(kind="simulate", dim=2, radii=(2.0, 3.0, 4.0), replicates=3)
    rows, stats = run_simulation(cfg)
    names = {r.statistic for r in rows}
    assert {"mean_per_volume", "variance_per_volume", "skipped_cell_fraction",
            "t_stat variance_per_area vs log_area"} <= names
    assert len(stats) == 3
    with pytest.raises(ConfigError):
        run_simulation(cfg.with_overrides(kind="chaos"))


def test_chaos_study_rows_and_errors():
    cfg = ExperimentConfig(kind="chaos", dim=3, radii=(2.0,), replicates=3)
    rows, summary = run_chaos_study(cfg)
    names = [r.statistic for r in rows]
    assert names == ["mean_I2", "var_I2_per_volume", "mean_I4", "var_I4_per_volume",
                     "ledger var_I4_per_volume asymptotic"]
    assert summary[0]["I2"].n == 3
    with pytest.raises(ConfigError):
        run_chaos_study(cfg.with_overrides(dim=2))
    with pytest.raises(ConfigError):
        run_chaos_study(ExperimentConfig(kind="chaos", radii=(2.0,), extra={"convention": "x"}))


# --- command line ------------------------------------------------------------


def _exit_matches_flags(code, path):
    rows = read_rows(path)
    regression = any(r["flag"] == "mismatch" and not r["statistic"].endswith(OPEN_QUESTION_TAG)
                     for r in rows)
    return code == (2 if regression else 0)


def test_cli_simulate_is_reproducible(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    code_a = cli.main(["simulate", *SMALL, "--seed", "4", "--out", str(a)])
    code_b = cli.main(["simulate", *SMALL, "--seed", "4", "--out", str(b), "--threads", "2"])
    assert code_a == code_b
    assert _exit_matches_flags(code_a, a)
    assert _body(a) == _body(b)
    assert "rows" in capsys.readouterr().out


def test_cli_verify_writes_ledger_and_exit_reflects_regressions(tmp_path):
    out = tmp_path / "v.csv"
    code = cli.main(["verify", "--mc-samples", "20000", "--out", str(out)])
    assert _exit_matches_flags(code, out)
    data = json.loads(out.with_suffix(".ledger.json").read_text())
    assert "terms" in data and "comparisons" in data


def test_cli_single_replicate_is_usage_error(tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["simulate", "--replicates", "1", "--out", str(out)]) == 1
    assert not out.exists()
    assert cli.main(["scaling", "--radii", "2", "3", "--out", str(out)]) == 1
    assert not out.exists()


def test_cli_bad_arguments(tmp_path):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--dim", "5"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == 1
    assert cli.main(["simulate", "--config", str(tmp_path / "none.json")]) == 1


def test_cli_help_documents_precedence(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--help"])
    assert exc.value.code == 0
    out = capsys.readouterr().out
    assert "precedence" in out and "RWM_THREADS" in out


def test_flags_override_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"seed": 5, "radii": [2.0, 3.0], "replicates": 4}))
    args = cli.build_parser().parse_args(["simulate", "--config", str(path), "--seed", "7"])
    cfg = cli.resolve_config(args)
    assert cfg.seed == 7 and cfg.radii == (2.0, 3.0) and cfg.replicates == 4
    assert cfg.kind == "simulate"


def test_thread_resolution(monkeypatch):
    monkeypatch.delenv("RWM_THREADS", raising=False)
    assert cli.resolve_threads(None) == 1
    monkeypatch.setenv("RWM_THREADS", "3")
    assert cli.resolve_threads(None) == 3
    assert cli.resolve_threads(2) == 2
    monkeypatch.setenv("RWM_THREADS", "many")
    with pytest.raises(cli.UsageError):
        cli.resolve_threads(None)
    assert cli.main(["simulate", *SMALL]) == 1


def test_cli_numeric_failure_exit_code(tmp_path, monkeypatch):
    bad = ResultRow("run", "simulate", 3, 2.0, "mean_length", math.nan)
    monkeypatch.setattr(experiments, "run_simulation", lambda config, threads: ([bad], None))
    out = tmp_path / "n.csv"
    assert cli.main(["simulate", *SMALL, "--out", str(out)]) == 3
    assert not out.exists()

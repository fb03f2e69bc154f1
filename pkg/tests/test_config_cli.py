import json
import subprocess
import sys

import numpy as np
import pytest

from lindcycle.cli import EXIT_NEGATIVE, EXIT_OK, EXIT_USAGE, main, resolve_seed
from lindcycle.config import ConfigError, matrix_from_json, matrix_to_json, parse_run_config
from lindcycle.models import build_driven_qubit
from lindcycle.config import model_to_dict


def run(tmp_path, *argv, capsys=None):
    code = main([*argv, "--out", str(tmp_path)])
    out = capsys.readouterr() if capsys else None
    return code, out


def data_rows(path):
    return [line for line in path.read_text().splitlines() if not line.startswith("#")]


# --- config parsing --------------------------------------------------------------------------


def test_matrix_json_round_trip():
    m = np.array([[1, 2j], [-2j, 0.5]])
    assert np.array_equal(matrix_from_json(matrix_to_json(m)), m)
    with pytest.raises(ValueError):
        matrix_from_json([[[1, 0], [0, 0]], [[1, 0]]])


def test_malformed_json_reports_line():
    with pytest.raises(ConfigError, match=r"line 3, column"):
        parse_run_config('{\n  "samples": 5,\n  "seed": ,\n}')


def test_schema_error_reports_field():
    with pytest.raises(ConfigError, match=r"field tolerances/slack"):
        parse_run_config('{"tolerances": {"slack": -1}}')
    with pytest.raises(ConfigError, match=r"field <root>"):
        parse_run_config('{"bogus": 1}')
    with pytest.raises(ConfigError, match=r"field model"):
        parse_run_config('{"model": {"builtin": "counterexample", "params": {"gamma": -1}}}')


def test_run_config_fields():
    cfg = parse_run_config(json.dumps({
        "model": {"builtin": "driven_qubit"}, "samples": 9, "seed": 4, "rho0": {"level": 2},
        "tolerances": {"unit": 1e-5},
    }))
    assert cfg.model.name == "driven_qubit"
    assert (cfg.samples, cfg.seed, cfg.rho0, cfg.tolerances) == (9, 4, {"level": 2}, {"unit": 1e-5})


# --- seeds -------------------------------------------------------------------------------------------


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("LINDCYCLE_SEED", "11")
    assert resolve_seed(3, 7) == 3
    assert resolve_seed(None, 7) == 7
    assert resolve_seed(None, None) == 11
    monkeypatch.delenv("LINDCYCLE_SEED")
    assert resolve_seed(None, None) == 0


def test_bad_env_seed_is_usage_error(tmp_path, monkeypatch):
    monkeypatch.setenv("LINDCYCLE_SEED", "x")
    assert run(tmp_path, "evolve", "--model", "driven_qubit")[0] == EXIT_USAGE


# --- commands ------------------------------------------------------------------------------------------


def test_check_exit_codes(tmp_path, capsys):
    code, out = run(tmp_path, "check", "--model", "driven_qubit", capsys=capsys)
    assert code == EXIT_OK and "THEOREM2: SATISFIED" in out.out
    code, out = run(tmp_path, "check", "--model", "counterexample", capsys=capsys)
    assert code == EXIT_NEGATIVE and "THEOREM2: NOT-SATISFIED" in out.out
    report = (tmp_path / "report.txt").read_text()
    assert "model: counterexample" in report and "NOT-SATISFIED" in report


def test_cycle_command(tmp_path, capsys):
    code, out = run(tmp_path, "cycle", "--model", "driven_qubit", "--samples", "17", capsys=capsys)
    assert code == EXIT_OK and "classification: UNIQUE_CYCLE" in out.out
    rows = data_rows(tmp_path / "cycle.csv")
    assert rows[0] == "t,p1,p2,re_rho12,im_rho12"
    assert len(rows) == 18
    p = [float(x) for x in rows[1].split(",")[1:3]]
    assert sum(p) == pytest.approx(1, abs=1e-12)
    assert len(data_rows(tmp_path / "spectrum.csv")) == 5


def test_cycle_command_degenerate(tmp_path, capsys):
    code, out = run(tmp_path, "cycle", "--model", "counterexample", capsys=capsys)
    assert code == EXIT_NEGATIVE and "DEGENERATE" in out.out
    assert not (tmp_path / "cycle.csv").exists()


def test_rates_command(tmp_path, capsys):
    code, out = run(tmp_path, "rates", "--model", "driven_qubit", "--samples", "5", capsys=capsys)
    assert code == EXIT_OK
    rows = data_rows(tmp_path / "rates.csv")
    assert rows[0] == "t,lambda" and len(rows) == 6
    assert all(float(r.split(",")[1]) == pytest.approx(0.5, abs=1e-9) for r in rows[1:])


def test_rates_with_horizon(tmp_path, capsys):
    code, out = run(tmp_path, "rates", "--model", "quasiperiodic_convergent", "--horizon", "20", capsys=capsys)
    assert code == EXIT_OK and "relaxing: not certified" in out.out


def test_evolve_command(tmp_path, capsys):
    code, out = run(tmp_path, "evolve", "--model", "driven_qubit", "--seed", "1", capsys=capsys)
    assert code == EXIT_OK and "non_increasing: yes" in out.out
    rows = data_rows(tmp_path / "evolve.csv")
    assert rows[0] == "t,trace_distance,relative_entropy" and len(rows) == 22
    code, out = run(tmp_path, "evolve", "--model", "counterexample", capsys=capsys)
    assert code == EXIT_NEGATIVE


def test_non_periodic_model_rejected_for_cycle(tmp_path):
    assert run(tmp_path, "cycle", "--model", "quasiperiodic_divergent")[0] == EXIT_USAGE


def test_usage_errors(tmp_path):
    assert run(tmp_path, "cycle")[0] == EXIT_USAGE
    assert run(tmp_path, "frobnicate")[0] == EXIT_USAGE
    assert run(tmp_path, "demo")[0] == EXIT_USAGE
    assert run(tmp_path, "check", "--model", "driven_qubit", "--tolerance", "bogus=1")[0] == EXIT_USAGE
    assert run(tmp_path, "check", "--config", str(tmp_path / "missing.json"))[0] == EXIT_USAGE


def test_malformed_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"model": {"builtin": "driven_qubit"},\n "samples": "many"}')
    code, out = run(tmp_path, "check", "--config", str(cfg), capsys=capsys)
    assert code == EXIT_USAGE
    assert "field samples" in out.err
    cfg.write_text('{"model": \n')
    code, out = run(tmp_path, "check", "--config", str(cfg), capsys=capsys)
    assert code == EXIT_USAGE and "line 2" in out.err


def test_inline_model_config(tmp_path, capsys):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"model": model_to_dict(build_driven_qubit(gamma_up=0.5)), "periods": 5}))
    code, out = run(tmp_path, "evolve", "--config", str(cfg), capsys=capsys)
    assert code in (EXIT_OK, EXIT_NEGATIVE)
    assert len(data_rows(tmp_path / "evolve.csv")) == 7


def test_csv_header_and_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        main(["evolve", "--model", "driven_qubit", "--seed", "5", "--tolerance", "slack=1e-7", "--out", str(d)])
    text = (a / "evolve.csv").read_text()
    assert text == (b / "evolve.csv").read_text()
    assert "# seed: 5" in text
    assert "slack=9.9999999999999995e-08" in text
    value = data_rows(a / "evolve.csv")[2].split(",")[1]
    assert float(value) == float(repr(float(value)))
    assert len(value.split("e")[0].replace("-", "").replace(".", "")) >= 15


def test_random_rho0_depends_on_seed(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["evolve", "--model", "driven_qubit", "--seed", "1", "--out", str(a)])
    main(["evolve", "--model", "driven_qubit", "--seed", "2", "--out", str(b)])
    assert data_rows(a / "evolve.csv")[1] != data_rows(b / "evolve.csv")[1]


@pytest.mark.parametrize("name", ["counterexample", "repaired"])
def test_demo(tmp_path, capsys, name):
    code, out = run(tmp_path, "demo", name, capsys=capsys)
    assert code == EXIT_OK
    assert f"demo {name}: PASS" in out.out


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "lindcycle", "check", "--model", "driven_qubit", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "SATISFIED" in proc.stdout

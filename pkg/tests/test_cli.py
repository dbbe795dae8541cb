import csv
import json
import math

import pytest
from hypothesis import given, strategies as st

from cvd import __version__
from cvd.cli import main
from cvd.config import diagnostics, parse_config
from cvd.errors import ConfigError


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj, indent=2) if not isinstance(obj, str) else obj)
    return p


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# -- config parsing ---------------------------------------------------------------------

def test_defaults_are_reference_scale():
    cfg = parse_config("")
    assert cfg.squeeze.r == 1.0
    assert cfg.n_bar == pytest.approx(math.sinh(1.0) ** 2)
    assert cfg.cavity_params.chi == pytest.approx(2 * math.pi * 1e5)
    assert cfg.meta() == {"config_hash": cfg.hash(), "seed": 0, "version": __version__}


def test_lambda_out_of_range_reports_line():
    text = '{\n  "protocol": {\n    "m": 2,\n    "lambda": 1.0\n  }\n}'
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert "lambda must be < 1" in str(info.value)
    assert info.value.line == 4
    assert str(info.value).startswith("line 4: ")


@pytest.mark.parametrize("text,fragment", [
    ('{"protocol": {"m": 2, "r": 1, "lambda": 0.5}}', "exactly one"),
    ('{"protocol": {"m": 2}}', "one of r or lambda"),
    ('{"protocol": {"m": 0, "r": 1}}', "protocol.m"),
    ('{"protocol": {"m": 1.5, "r": 1}}', "integer"),
    ('{"loss": {"eta_a": -1}}', "loss.eta_a"),
    ('{"run": {"n_shots": 0}}', "run.n_shots"),
    ('{"cavity": {"gamma_over_2pi_hz": 0}}', "gamma"),
    ('{"bogus": {}}', "unknown section"),
    ('{"run": {"shots": 3}}', "unknown key"),
    ('{"run": {"seed": true}}', "run.seed"),
    ('[1, 2]', "object"),
    ('{"run": ', "invalid JSON"),
])
def test_invalid_configs(text, fragment):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert fragment in str(info.value)


def test_hash_is_canonical_and_seed_sensitive():
    a = parse_config('{"protocol": {"m": 2, "lambda": 0.5}}')
    b = parse_config('{\n "protocol": {"lambda": 0.5, "m": 2}\n}')
    assert a.hash() == b.hash()
    assert parse_config("", seed=5).hash() != a.hash()


@given(st.integers(1, 6), st.floats(0, 0.95), st.integers(0, 2 ** 31))
def test_valid_configs_round_trip(m, lam, seed):
    cfg = parse_config(json.dumps({"protocol": {"m": m, "lambda": lam}, "run": {"seed": seed}}))
    assert cfg.protocol_params.m == m
    assert cfg.squeeze.lam == lam
    assert cfg.seed == seed


def test_diagnostics_warnings():
    cfg = parse_config('{"loss": {"eta_a": 0.5, "eta_b": 0.0, "tau": 1.0}}')
    warns = diagnostics(cfg, "simulate-loss")
    assert any("0.2" in w and "guard" in w for w in warns)
    cfg = parse_config('{"cavity": {"chi_over_2pi_hz": 0}}')
    assert any("zero signal slope" in w for w in diagnostics(cfg, "simulate-qnd"))
    cfg = parse_config('{"cavity": {"chi_over_2pi_hz": 1e7, "n_tot": [5]}}')
    assert any("adiabatic" in w for w in diagnostics(cfg, "simulate-qnd"))
    cfg = parse_config('{"loss": {"eta_a": 0.1, "eta_b": 0.1, "tau": 1.0}}')
    assert any("double-jump" in w for w in diagnostics(cfg, "simulate-loss"))
    cfg = parse_config('{"loss": {"eta_a": 0.01, "eta_b": 1.0, "tau": 1.0}}')
    assert any("asymmetric" in w for w in diagnostics(cfg, "simulate-loss"))
    assert diagnostics(parse_config(""), None) == []


# -- CLI --------------------------------------------------------------------------------

def test_analytic_csv_matches_worked_values(tmp_path):
    cfg = write(tmp_path, {"protocol": {"m": 2, "lambda": 0.5}, "loss": {"eta_a": 0.05,
                                                                          "eta_b": 0.05,
                                                                          "tau": 1.0}})
    assert main(["analytic", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "analytic.csv").read_text()
    assert text.startswith("# config_hash=")
    assert f"# version={__version__}" in text
    rows = read_csv(tmp_path / "o" / "analytic.csv")
    assert list(rows[0]) == ["j", "f_j", "p_j", "E_out_bits", "gamma_j", "p_prime_j"]
    assert float(rows[0]["p_j"]) == pytest.approx(0.5625)
    assert float(rows[1]["p_j"]) == pytest.approx(0.28125)
    assert rows[2]["f_j"] == "3"
    assert float(rows[2]["E_out_bits"]) == pytest.approx(math.log2(3))
    assert float(rows[1]["p_prime_j"]) == pytest.approx(0.25449, abs=1e-5)


def test_feasibility_json(tmp_path):
    assert main(["feasibility", "--format", "json", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "feasibility.json").read_text())
    assert rep["t_min_s"] == pytest.approx(2.49e-9, rel=0.01)
    assert rep["t_max_s"] == pytest.approx(2.88e-8, rel=0.01)
    assert rep["feasible"] is True
    assert set(rep["meta"]) == {"config_hash", "seed", "version"}


def test_config_error_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, '{\n  "protocol": {\n    "m": 2,\n    "lambda": 1.0\n  }\n}')
    assert main(["validate", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "line 4" in err and "lambda must be < 1" in err
    assert main(["analytic", "--config", str(tmp_path / "missing.json")]) == 2


def test_guard_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {"protocol": {"m": 2, "lambda": 0.5, "j_max": 2}})
    assert main(["simulate-protocol", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "TailTooHeavy" in capsys.readouterr().err
    cfg = write(tmp_path, {"cavity": {"kappa_over_2pi_hz": 4e9}}, "k.json")
    assert main(["feasibility", "--config", str(cfg), "--out", str(tmp_path)]) == 1
    assert "WindowEmpty" in capsys.readouterr().err


def test_validate_warnings(tmp_path, capsys):
    cfg = write(tmp_path, {"loss": {"eta_a": 0.5, "eta_b": 0.0, "tau": 1.0}})
    assert main(["validate", "--config", str(cfg), "--for", "simulate-loss"]) == 0
    out = capsys.readouterr().out
    assert "0.2" in out and "warning" in out
    cfg = write(tmp_path, {"cavity": {"chi_over_2pi_hz": 0}}, "c.json")
    assert main(["validate", "--config", str(cfg)]) == 0
    assert "zero signal slope" in capsys.readouterr().out


def test_simulate_protocol_deterministic(tmp_path):
    cfg = write(tmp_path, {"protocol": {"m": 2, "lambda": 0.5}, "run": {"n_shots": 3000}})
    for d in ("a", "b"):
        assert main(["simulate-protocol", "--config", str(cfg), "--seed", "4",
                     "--out", str(tmp_path / d)]) == 0
    for name in ("protocol_histogram.csv", "protocol_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert "# seed=4" in (tmp_path / "a" / "protocol_summary.csv").read_text()


def test_simulate_loss_and_qnd_outputs(tmp_path):
    cfg = write(tmp_path, {"protocol": {"m": 2, "lambda": 0.5},
                           "loss": {"tau_scan": [0.001, 0.01, 0.05]},
                           "cavity": {"n_tot": [0, 3], "sde_trajectories": 50},
                           "run": {"n_shots": 2000}})
    assert main(["simulate-loss", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    scan = read_csv(tmp_path / "loss_scan.csv")
    assert [float(r["tau"]) for r in scan] == [0.001, 0.01, 0.05]
    assert (tmp_path / "posterior_events.csv").exists()
    assert main(["simulate-qnd", "--config", str(cfg), "--format", "json",
                 "--out", str(tmp_path)]) == 0
    hom = json.loads((tmp_path / "homodyne.json").read_text())
    assert hom["columns"] == ["sample_id", "x_t", "n_true", "n_inferred"]
    assert len(hom["rows"]) == 4000
    assert hom["rows"][-1]["sample_id"] == 3999
    sde = json.loads((tmp_path / "sde_validation.json").read_text())
    assert [r["n_tot"] for r in sde["rows"]] == [0, 3]


def test_reproduce_command_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        assert main(["reproduce-paper", "--seed", "2", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "a" / "reference_values.csv").read_bytes()
    assert a == (tmp_path / "b" / "reference_values.csv").read_bytes()
    assert "FAIL" not in capsys.readouterr().out

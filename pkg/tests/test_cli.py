import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from qrepeater import cli
from qrepeater.cli import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, ConfigError, main, parse_config

GOLDEN = Path(__file__).parent / "golden"


def run_cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out=out, err=err)
    return code, out.getvalue(), err.getvalue()


def flat_keys(obj, prefix=""):
    keys = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            p = f"{prefix}.{k}" if prefix else k
            keys.append(p)
            keys += flat_keys(v, p)
    return keys


@pytest.fixture
def golden_keys():
    return json.loads((GOLDEN / "json_keys.json").read_text())


@pytest.fixture(autouse=True)
def no_seed_env(monkeypatch):
    monkeypatch.delenv("QREPEATER_SEED", raising=False)


# ---------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------
def test_file_with_only_eta_keeps_other_defaults(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("eta = 0.8\n")
    cfg = parse_config("analytic", str(path))
    p = cfg.params
    assert p.eta == 0.8
    assert (p.p_s, p.gamma, p.p_cnot, p.p_qnd) == (0.9, 0.5, 0.25, 0.125)
    assert p.zeta == pytest.approx(0.70710678)


def test_empty_file_gives_full_defaults(tmp_path):
    path = tmp_path / "empty.cfg"
    path.write_text("")
    cfg = parse_config("simulate", str(path))
    assert cfg.params.eta == 1.0
    assert cfg.chain == {"n_links": 1, "trials": 10_000, "seed": 0, "table1_convention": False, "placement": "midpoint"}


def test_comments_and_blank_lines(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("# header\n\n  gamma = 0.25   # trailing\n")
    assert parse_config("analytic", str(path)).params.gamma == 0.25


def test_overrides_win_over_file(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text("eta = 0.8\ntrials = 5\n")
    cfg = parse_config("simulate", str(path), ["eta=0.3"])
    assert cfg.params.eta == 0.3 and cfg.chain["trials"] == 5


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("eta = 1.2\n", 1, "outside [0, 1]"),
        ("\nbogus = 1\n", 2, "unknown key"),
        ("eta = 0.5\ntrials = many\n", 2, "cannot parse"),
        ("just words\n", 1, "key = value"),
        ("n_links = 0\n", 1, "n_links"),
        ("placement = moon\n", 1, "placement"),
        ("etas = 0.3, 2\n", 1, "etas"),
        ("gamma = nan\n", 1, "finite"),
    ],
)
def test_config_errors_name_the_line(tmp_path, text, line, fragment):
    path = tmp_path / "bad.cfg"
    path.write_text(text)
    with pytest.raises(ConfigError) as exc:
        parse_config("analytic", str(path))
    assert f"{path}:{line}:" in str(exc.value)
    assert fragment in str(exc.value)
    code, _, err = run_cli("analytic", "--config", str(path))
    assert code == EXIT_CONFIG
    assert f"{path}:{line}:" in err


def test_override_errors_exit_2():
    code, _, err = run_cli("analytic", "--set", "p_s=2")
    assert code == EXIT_CONFIG and "--set:1" in err


def test_missing_config_file_exit_2(tmp_path):
    code, _, err = run_cli("analytic", "--config", str(tmp_path / "nope.cfg"))
    assert code == EXIT_CONFIG and "cannot read" in err


def test_unknown_subcommand_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_CONFIG


def test_seed_from_environment(monkeypatch):
    monkeypatch.setenv("QREPEATER_SEED", "42")
    assert parse_config("simulate").chain["seed"] == 42
    assert parse_config("simulate", overrides=["seed=3"]).chain["seed"] == 3
    monkeypatch.setenv("QREPEATER_SEED", "x")
    with pytest.raises(ConfigError):
        parse_config("simulate")


# ---------------------------------------------------------------------
# Reports (golden files)
# ---------------------------------------------------------------------
def test_table1_csv_golden():
    code, out, err = run_cli("table1")
    assert code == EXIT_OK
    assert out == (GOLDEN / "table1.csv").read_text()
    assert out.splitlines()[0] == "eta,n_pur,n_swap,n_total,convention"
    assert "includes p_qnd" in err


def test_table1_rounded_golden():
    code, out, _ = run_cli("table1", "--round-one-figure")
    assert code == EXIT_OK
    assert out == (GOLDEN / "table1_rounded.csv").read_text()


def test_table1_json_flags_convention(golden_keys):
    code, out, _ = run_cli("table1", "--format", "json")
    payload = json.loads(out)
    keys = sorted(flat_keys(payload) + ["rows[]." + k for k in payload["rows"][0]])
    assert keys == golden_keys["table1_json"]
    with_qnd = [r for r in payload["rows"] if r["convention"] == "with_qnd"]
    assert len(with_qnd) == 3 and all("p_qnd" in r["note"] for r in with_qnd)


def test_analytic_json_schema(golden_keys):
    code, out, _ = run_cli("analytic")
    payload = json.loads(out)
    assert code == EXIT_OK
    assert sorted(flat_keys(payload)) == golden_keys["analytic"]
    assert payload["p_pur"]["with_qnd"] == pytest.approx(5.18985e-4, rel=1e-5)
    assert payload["p_pur"]["without_qnd"] == pytest.approx(4.15188e-3, rel=1e-5)
    assert payload["p_swap"] == 0.5


def test_analytic_csv():
    code, out, _ = run_cli("analytic", "--format", "csv", "--set", "eta=0.8")
    lines = out.splitlines()
    assert lines[0] == "convention,p_pur,p_swap,n_pur,n_swap,n_total"
    assert lines[1].startswith("with_qnd,") and ",0.32," in lines[1]


def test_resources_golden(golden_keys):
    code, out, _ = run_cli("resources")
    assert code == EXIT_OK and out == (GOLDEN / "resources.csv").read_text()
    code, out, _ = run_cli("resources", "--format", "json")
    assert sorted(flat_keys(json.loads(out))) == golden_keys["resources_json"]


def test_simulate_schema_and_determinism(golden_keys, tmp_path):
    code, a, _ = run_cli("simulate", "--trials", "50")
    assert code == EXIT_OK
    assert sorted(flat_keys(json.loads(a))) == golden_keys["simulate"]
    _, b, _ = run_cli("simulate", "--trials", "50", "--workers", "3")
    assert a == b


def test_simulate_seed_seven_twice_is_byte_identical(tmp_path):
    paths = [tmp_path / "a.json", tmp_path / "b.json"]
    for p in paths:
        assert run_cli("simulate", "--seed", "7", "--trials", "300", "--output", str(p))[0] == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_simulate_event_log(tmp_path):
    log = tmp_path / "events.csv"
    code, _, _ = run_cli("simulate", "--trials", "5", "--event-log", str(log))
    assert code == EXIT_OK
    lines = log.read_text().splitlines()
    assert lines[0] == "trial,station,component,outcome,probability"
    assert {line.split(",")[0] for line in lines[1:]} <= {str(i) for i in range(5)}


def test_simulate_check_flag(monkeypatch):
    assert run_cli("simulate", "--trials", "200", "--check")[0] == EXIT_OK

    real = cli.protocol.run_chain

    def biased(*args, **kwargs):
        report = real(*args, **kwargs)
        report.within_3_sigma = False
        return report

    monkeypatch.setattr(cli.protocol, "run_chain", biased)
    assert run_cli("simulate", "--trials", "200", "--check")[0] == EXIT_FAILED


# ---------------------------------------------------------------------
# Verification suites
# ---------------------------------------------------------------------
def test_verify_cnot_golden():
    code, out, _ = run_cli("verify-cnot")
    assert code == EXIT_OK
    assert out == (GOLDEN / "verify_cnot.txt").read_text()
    assert sum("acceptance=0.250000000000" in line for line in out.splitlines()) == 4


@pytest.mark.parametrize("sub", ["verify-pdc", "verify-bell"])
def test_verify_suites_pass(sub):
    code, out, _ = run_cli(sub)
    assert code == EXIT_OK
    assert out.strip().endswith("PASS")


@pytest.mark.parametrize(
    "sub,target",
    [("verify-cnot", "verify_cnot_lines"), ("verify-pdc", "verify_pdc_lines"), ("verify-bell", "verify_bell_lines")],
)
def test_verify_failure_exits_1(monkeypatch, sub, target):
    monkeypatch.setattr(cli, target, lambda: (["broken FAIL"], False))
    code, out, _ = run_cli(sub)
    assert code == EXIT_FAILED and "FAIL" in out


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qrepeater.cli", "verify-bell"], capture_output=True, text=True)
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "qrepeater.cli", "analytic", "--set", "eta=7"], capture_output=True, text=True)
    assert proc.returncode == 2

import csv
import io
import json
import subprocess
import sys

import pytest

from parity_probe.cli import main

AUDIT = [
    "audit", "--group-col", "g", "--outcome-col", "y", "--protected", "f", "--reference", "m",
    "--metric", "dp-difference",
]
NORMATIVE = {"--alpha": "0.01", "--epsilon": "0.05", "--max-beta": "0.1"}


def audit_args(path, drop=(), extra=()):
    args = AUDIT + ["--input", str(path)]
    for flag, value in NORMATIVE.items():
        if flag not in drop:
            args += [flag, value]
    return args + list(extra)


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize(
    "counts, verdict, code",
    [
        ({"m": (1000, 500), "f": (1000, 400)}, "violation_detected", 4),
        ({"m": (20000, 10000), "f": (20000, 10000)}, "compliant_adequate_power", 0),
        ({"m": (30, 15), "f": (30, 12)}, "inconclusive_low_power", 3),
        ({"m": (30, 30), "f": (30, 30)}, "inconclusive_degenerate", 3),
    ],
)
def test_audit_verdict_exit_codes(cohort_csv, capsys, counts, verdict, code):
    rc, out, err = run(audit_args(cohort_csv(counts)), capsys)
    assert rc == code
    assert json.loads(out)["verdict"] == verdict
    assert verdict in err


def test_data_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("g,y\nm,1\nf,0\nm,1\nf,1\nf,2\n")
    rc, out, err = run(audit_args(path), capsys)
    assert rc == 2 and "row 5" in err and out == ""


def test_unknown_protected_group_is_data_error(cohort_csv, capsys):
    path = cohort_csv({"x": (10, 5), "m": (10, 5)})
    assert run(audit_args(path), capsys)[0] == 2


@pytest.mark.parametrize("flag", list(NORMATIVE))
def test_missing_normative_parameter(cohort_csv, capsys, flag):
    rc, out, err = run(audit_args(cohort_csv({"m": (10, 5), "f": (10, 5)}), drop=[flag]), capsys)
    assert rc == 1
    assert flag in err
    assert out == ""


def test_unknown_flag_is_usage_error(capsys):
    rc, _, err = run(["power", "--p-ref", "0.8", "--p-prot", "0.75", "--n-ref", "10", "--n-prot", "10",
                      "--alpha", "0.01", "--bogus"], capsys)
    assert rc == 1 and "--bogus" in err


def test_missing_alpha_for_power(capsys):
    rc, _, err = run(["power", "--p-ref", "0.8", "--p-prot", "0.75", "--n-ref", "10", "--n-prot", "10"], capsys)
    assert rc == 1 and "--alpha" in err


def test_no_subcommand(capsys):
    assert run([], capsys)[0] == 1


def test_report_byte_identical_modulo_timestamp(cohort_csv, capsys):
    path = cohort_csv({"m": (400, 200), "f": (400, 180)})
    extra = ["--monte-carlo", "--replicates", "5000", "--seed", "99"]
    _, first, _ = run(audit_args(path, extra=extra), capsys)
    _, second, _ = run(audit_args(path, extra=extra), capsys)
    a, b = json.loads(first), json.loads(second)
    a.pop("generated_at"), b.pop("generated_at")
    assert json.dumps(a) == json.dumps(b)
    lines = lambda text: [l for l in text.splitlines() if '"generated_at"' not in l]
    assert lines(first) == lines(second)


def test_seed_env_and_flag_precedence(cohort_csv, capsys, monkeypatch):
    path = cohort_csv({"m": (400, 200), "f": (400, 180)})
    extra = ["--monte-carlo", "--replicates", "2000"]
    monkeypatch.setenv("PARITY_PROBE_SEED", "1234")
    _, out, _ = run(audit_args(path, extra=extra), capsys)
    assert json.loads(out)["config"]["seed"] == 1234
    _, out, _ = run(audit_args(path, extra=extra + ["--seed", "5"]), capsys)
    assert json.loads(out)["config"]["seed"] == 5
    monkeypatch.delenv("PARITY_PROBE_SEED")
    _, out, _ = run(audit_args(path, extra=extra), capsys)
    assert json.loads(out)["config"]["seed"] == 0


def test_audit_out_file(cohort_csv, capsys, tmp_path):
    out_path = tmp_path / "report.json"
    rc, out, _ = run(audit_args(cohort_csv({"m": (30, 15), "f": (30, 12)}), extra=["--out", str(out_path)]), capsys)
    assert rc == 3 and out == ""
    assert json.loads(out_path.read_text())["verdict"] == "inconclusive_low_power"


def test_power_command(capsys):
    rc, out, _ = run(["power", "--p-ref", "0.8", "--p-prot", "0.75", "--n-ref", "1250", "--n-prot", "1250",
                      "--alpha", "0.01"], capsys)
    assert rc == 0
    assert json.loads(out)["beta"] == pytest.approx(0.338, abs=5e-4)


def test_power_monte_carlo(capsys):
    rc, out, _ = run(["power", "--p-ref", "0.8", "--p-prot", "0.75", "--n-ref", "1250", "--n-prot", "1250",
                      "--alpha", "0.01", "--method", "monte-carlo", "--replicates", "20000", "--seed", "3"], capsys)
    doc = json.loads(out)
    assert rc == 0 and doc["method"] == "monte-carlo" and doc["seed"] == 3
    assert abs(doc["beta"] - 0.338) < 0.02


def test_sweep_command(capsys, tmp_path):
    out_path = tmp_path / "fig1.csv"
    rc, _, _ = run(["sweep", "--axis", "total-n", "--grid", "500:5000:250", "--p-ref", "0.8", "--p-prot", "0.75",
                    "--alpha", "0.01", "--out", str(out_path)], capsys)
    assert rc == 0
    rows = list(csv.DictReader(out_path.open()))
    assert len(rows) == 19
    assert [int(r["axis_value"]) for r in rows] == list(range(500, 5001, 250))
    betas = [float(r["beta"]) for r in rows]
    assert all(b2 <= b1 for b1, b2 in zip(betas, betas[1:]))


def test_sweep_protected_rate_to_stdout(capsys):
    rc, out, _ = run(["sweep", "--axis", "protected-rate", "--grid", "0.7,0.75", "--p-ref", "0.8",
                      "--total-n", "2500", "--alpha", "0.01"], capsys)
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rc == 0 and len(rows) == 2
    assert float(rows[0]["beta"]) < float(rows[1]["beta"])


def test_sweep_needs_axis_parameters(capsys):
    rc, _, err = run(["sweep", "--axis", "protected-rate", "--grid", "0.7,0.75", "--p-ref", "0.8",
                      "--alpha", "0.01"], capsys)
    assert rc == 1 and "--total-n" in err


def test_samplesize_command(capsys):
    rc, out, _ = run(["samplesize", "--p-ref", "0.8", "--p-prot", "0.75", "--target-beta", "0.05",
                      "--alpha", "0.01"], capsys)
    doc = json.loads(out)
    assert rc == 0 and (doc["n_ref"], doc["n_prot"], doc["total_n"]) == (2482, 2482, 4964)


def test_samplesize_unreachable(capsys):
    rc, _, err = run(["samplesize", "--p-ref", "0.5", "--p-prot", "0.5", "--target-beta", "0.05",
                      "--alpha", "0.01"], capsys)
    assert rc == 1 and "target" in err or "disparity" in err


def test_mde_command(capsys):
    rc, out, _ = run(["mde", "--base-rate", "0.8", "--n-ref", "1250", "--n-prot", "1250", "--target-beta", "0.338",
                      "--alpha", "0.01"], capsys)
    assert rc == 0
    assert json.loads(out)["min_detectable_disparity"] == pytest.approx(0.05, abs=1e-3)


def test_simulate_then_audit(capsys, tmp_path):
    data = tmp_path / "sim.csv"
    rc, _, _ = run(["simulate", "--p-ref", "0.5", "--p-prot", "0.4", "--n-ref", "1000", "--n-prot", "1000",
                    "--reference-label", "m", "--protected-label", "f", "--group-col", "g", "--outcome-col", "y",
                    "--seed", "7", "--out", str(data)], capsys)
    assert rc == 0
    first = data.read_bytes()
    run(["simulate", "--p-ref", "0.5", "--p-prot", "0.4", "--n-ref", "1000", "--n-prot", "1000",
         "--reference-label", "m", "--protected-label", "f", "--group-col", "g", "--outcome-col", "y",
         "--seed", "7", "--out", str(data)], capsys)
    assert data.read_bytes() == first
    rc, out, _ = run(audit_args(data), capsys)
    assert rc == 4 and json.loads(out)["verdict"] == "violation_detected"


def test_console_script_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "parity_probe.cli", "power", "--p-ref", "0.8", "--p-prot", "0.75",
         "--n-ref", "2500", "--n-prot", "2500", "--alpha", "0.01"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["beta"] == pytest.approx(0.0484, abs=5e-4)

import json
import math
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pspline_kernels.cli import main, read_data

DATA = Path(__file__).parent / "data"


def load_csv(path_or_text):
    text = Path(path_or_text).read_text() if isinstance(path_or_text, Path) else path_or_text
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    header = lines[0].split(",")
    return header, np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_fit_golden_file(tmp_path):
    out = tmp_path / "fit.csv"
    code = main(["fit", "--data", str(DATA / "sample_fit.csv"), "--kn", "20", "--p", "3", "--m", "2",
                 "--lambda", "1", "--grid", "51", "--out", str(out)])
    assert code == 0
    assert out.read_text() == (DATA / "sample_fit_expected.csv").read_text()
    coeffs = tmp_path / "fit.coefficients.csv"
    assert coeffs.read_text() == (DATA / "sample_fit_expected.coefficients.csv").read_text()


def test_fit_reports_tuning_quantities(capsys):
    code, out, err = run(capsys, "fit", "--data", str(DATA / "sample_fit.csv"), "--kn", "20", "--lambda", "1")
    assert code == 0
    assert "M_n=10" in err and "alpha=" in err and "beta=" in err
    assert "# table coefficients" in out


def test_fit_constant_column(tmp_path, capsys):
    data = tmp_path / "y.csv"
    data.write_text("\n".join(["1.25"] * 40) + "\n")
    code, out, _ = run(capsys, "fit", "--data", str(data), "--kn", "8", "--lambda", "3", "--grid", "11")
    assert code == 0
    header, rows = load_csv(out.split("# table")[0])
    assert header == ["t", "fitted"]
    assert np.allclose(rows[:, 1], 1.25, atol=1e-10)


def test_fit_interpolates_with_zero_lambda(tmp_path, capsys):
    y = np.random.default_rng(3).standard_normal(6)
    data = tmp_path / "ty.csv"
    data.write_text("t,y\n" + "".join(f"{(i + 1) / 6!r},{float(v)!r}\n" for i, v in enumerate(y)))
    out = tmp_path / "fit.csv"
    code = main(["fit", "--data", str(data), "--kn", "3", "--p", "3", "--m", "2", "--lambda", "0",
                 "--grid", "7", "--out", str(out)])
    assert code == 0
    _, rows = load_csv(out)
    # grid points j/6 coincide with the design points
    assert np.allclose(rows[1:, 1], y, atol=1e-8)


def test_fit_json_output(capsys):
    code, out, _ = run(capsys, "fit", "--data", str(DATA / "sample_fit.csv"), "--kn", "20", "--lambda", "1",
                       "--grid", "5", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["M_n"] == 10 and len(doc["fitted"]) == 5 and len(doc["coefficients"]) == 23


def test_fit_errors(tmp_path, capsys):
    assert run(capsys, "fit", "--data", str(DATA / "sample_fit.csv"), "--kn", "7", "--lambda", "1")[0] == 2
    assert run(capsys, "fit", "--data", str(tmp_path / "missing.csv"), "--kn", "5", "--lambda", "1")[0] == 1
    assert run(capsys, "fit", "--data", str(DATA / "sample_fit.csv"), "--kn", "20", "--lambda", "-1")[0] == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,y\n0.3,1\n0.9,2\n")
    assert run(capsys, "fit", "--data", str(bad), "--kn", "1", "--lambda", "1")[0] == 2
    assert run(capsys, "fit", "--data", str(bad), "--kn", "1", "--lambda", "1", "--out", str(bad))[0] == 2
    assert bad.read_text() == "t,y\n0.3,1\n0.9,2\n"


def test_read_data_rejects_late_header(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1\n2\nfoo\n")
    with pytest.raises(Exception, match="non-numeric"):
        read_data(str(path))


@pytest.mark.parametrize("m", [1, 3])
def test_kernel_table_matches_closed_form(m, capsys):
    code, out, _ = run(capsys, "kernel", "--m", str(m), "--points", "201")
    assert code == 0
    _, rows = load_csv(out)
    tau = np.abs(rows[:, 0])
    if m == 1:
        expected = 0.5 * np.exp(-tau)
    else:
        r3 = math.sqrt(3)
        expected = np.exp(-tau) / 6 + np.exp(-tau / 2) * (np.cos(r3 * tau / 2) / 6 + r3 / 6 * np.sin(r3 * tau / 2))
    assert np.max(np.abs(rows[:, 1] - expected)) < 1e-12


def test_kernel_moments(capsys):
    code, out, _ = run(capsys, "kernel", "--m", "4", "--moments", "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["moments_pass"]
    values = [row["moment"] for row in doc["moments"]]
    assert np.allclose(values, [1] + [0] * 7, atol=1e-8)


def test_kernel_invalid_order(capsys):
    assert run(capsys, "kernel", "--m", "13")[0] == 2
    assert run(capsys, "kernel", "--m", "0")[0] == 2


def test_boundary_reduced_form(capsys):
    code, out, _ = run(capsys, "boundary", "--m", "2", "--beta", "10", "--t", "0")
    assert code == 0
    _, rows = load_csv(out)
    s = rows[:, 0]
    x = 10 / math.sqrt(2)
    assert np.max(np.abs(rows[:, 2] - math.sqrt(2) * 10 * np.exp(-x * s) * np.cos(x * s))) < 1e-11


def test_boundary_finite_sample(capsys):
    code, out, _ = run(capsys, "boundary", "--m", "2", "--beta", "10", "--t", "0.2", "--finite-sample")
    assert code == 0
    header, rows = load_csv(out)
    assert header == ["s", "interior", "boundary", "finite_sample"]
    assert np.max(np.abs(rows[:, 3] - rows[:, 2])) < 0.02 * np.max(np.abs(rows[:, 2]))


def test_boundary_interior_point_within_envelope(capsys):
    code, out, _ = run(capsys, "boundary", "--m", "2", "--beta", "50", "--t", "0.5")
    _, rows = load_csv(out)
    assert code == 0
    assert np.max(np.abs(rows[:, 2] - rows[:, 1])) <= 3 * 50 * math.exp(-50 * 0.5 / math.sqrt(2))


def test_boundary_errors(capsys):
    assert run(capsys, "boundary", "--m", "3", "--beta", "10", "--t", "0.2", "--finite-sample")[0] == 2
    assert run(capsys, "boundary", "--m", "2", "--beta", "10", "--t", "1.2")[0] == 2
    code, _, err = run(capsys, "boundary", "--m", "2", "--beta", "3", "--t", "0.1")
    assert code == 0 and "below" in err


@pytest.mark.parametrize("m", [2, 9])
def test_certify_passes(m, capsys):
    code, out, _ = run(capsys, "certify", "--m", str(m))
    assert code == 0
    assert "FAIL" not in out and out.count("PASS") >= m + 6


def test_certify_failure_exit_code(monkeypatch, capsys):
    import pspline_kernels.cli as cli

    monkeypatch.setattr(cli, "check_mode_equation", lambda m: False)
    code, out, _ = run(capsys, "certify", "--m", "2")
    assert code == 3 and "FAIL mode_equation" in out


def test_simulate_is_deterministic(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("PSPLINE_KERNELS_OUTPUT_DIR", str(tmp_path))
    args = ["simulate", "--name", "rate_m1", "--seed", "5", "--replications", "20"]
    assert main(args + ["--out", "a.json"]) == 0
    assert main(args + ["--out", "b.json", "--workers", "3"]) == 0
    a, b = (tmp_path / "a.json").read_text(), (tmp_path / "b.json").read_text()
    assert a == b
    assert json.loads(a)["scenario"]["seed"] == 5


def test_simulate_csv_and_errors(tmp_path, capsys):
    code, out, _ = run(capsys, "simulate", "--name", "equivalence_quintic", "--seed", "1", "--format", "csv")
    assert code == 0 and out.startswith("# alpha=")
    assert run(capsys, "simulate", "--name", "nope", "--seed", "1")[0] == 2
    assert run(capsys, "simulate", "--scenario", str(tmp_path / "none.json"), "--seed", "1")[0] == 1
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--name", "rate_m1"])
    assert exc.value.code == 2


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "pspline_kernels.cli", "kernel", "--m", "2", "--points", "3"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[1] == "tau,kernel"

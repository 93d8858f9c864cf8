import csv
import math
import shutil
import subprocess

import numpy as np
import pytest

from riccati_lab.cli import FUZZ_HEADER, run


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float) if len(rows) > 1 else np.empty((0, len(rows[0])))


def read_kv(path):
    out = {}
    for line in path.read_text().splitlines():
        key, _, rest = line.partition(" ")
        out.setdefault(key, []).append(rest)
    return out


def stderr_lines(capsys):
    return [ln for ln in capsys.readouterr().err.splitlines() if ln]


# construct ---------------------------------------------------------------------------------

def test_construct_trivial_case(tmp_path):
    code = run(["construct", "--case", "1", "--b", "0", "--c", "1", "--f", "0", "--C1", "0",
                "--interval", "0", "0.9", "--Cs", "2", "--out", str(tmp_path)])
    assert code == 0
    header, data = read_csv(tmp_path / "case.csv")
    assert header[:7] == ["x", "a", "b", "c", "y_p", "condition_lhs", "condition_rhs"]
    assert header[7] == "y_C=2"
    assert data.shape == (257, 8)
    assert np.allclose(data[:, 7], 1 / (2 - data[:, 0]), rtol=1e-14)
    rep = read_kv(tmp_path / "report.txt")
    assert rep["CASE"] == ["1"] and rep["FAMILY_CONSTANT"] == ["C0"] and rep["STATUS"] == ["OK"]
    assert rep["C"][0].endswith("POLES 0")


def test_construct_guard_violation(tmp_path, capsys):
    code = run(["construct", "--case", "3", "--c", "1", "--a", "1", "--f", "1", "--C3", "0",
                "--interval", "0", "1", "--out", str(tmp_path)])
    assert code == 2
    (line,) = stderr_lines(capsys)
    assert line.startswith("ERROR GuardViolation ") and "x=0.0" in line


def test_construct_case7_residuals(tmp_path):
    assert run(["construct", "--case", "7", "--b", "0", "--c", "1", "--f", "2", "--out", str(tmp_path)]) == 0
    rep = read_kv(tmp_path / "report.txt")
    for key in ("CONDITION_RESIDUAL", "SEED_RESIDUAL", "PARTICULAR_RESIDUAL"):
        assert float(rep[key][0]) <= 1e-9


def test_construct_lists_poles(tmp_path):
    assert run(["construct", "--case", "1", "--b", "0", "--c", "1", "--f", "0",
                "--Cs", "0.5", "3", "--out", str(tmp_path)]) == 0
    lines = read_kv(tmp_path / "report.txt")["C"]
    first = lines[0].split()
    assert first[first.index("POLES") + 1] == "1"
    assert float(first[first.index("POLES") + 2]) == pytest.approx(0.5, abs=1e-10)
    assert lines[1].endswith("POLES 0")


@pytest.mark.parametrize("argv", [
    ["construct", "--case", "7", "--a", "1", "--b", "0", "--c", "1", "--f", "2"],   # a is completed
    ["construct", "--case", "7", "--b", "0", "--c", "1"],                          # missing f
    ["construct", "--case", "7", "--b", "0", "--c", "1", "--f", "2 +"],            # syntax
    ["construct", "--case", "7", "--b", "0", "--c", "y", "--f", "2"],              # identifier
    ["construct", "--case", "7", "--b", "0", "--c", "1", "--f", "2", "--bogus"],
    ["construct", "--case", "7", "--b", "0", "--c", "1", "--f", "2", "--branch", "+"],
    ["construct", "--case", "12", "--b", "0", "--c", "1", "--f", "2"],
    ["fuzz", "--case", "eleven"],
    ["star", "--eta", "0"],
])
def test_usage_errors_exit_one(argv, tmp_path, capsys):
    assert run(argv + ["--out", str(tmp_path)]) == 1
    lines = stderr_lines(capsys)
    assert len(lines) == 1 and lines[0].startswith("ERROR ")


def test_syntax_error_detail(tmp_path, capsys):
    run(["construct", "--case", "7", "--b", "0", "--c", "1", "--f", "2 +", "--out", str(tmp_path)])
    (line,) = stderr_lines(capsys)
    assert line.split()[1] == "SyntaxError" and "at byte 3" in line


def test_branch_flag_forms(tmp_path):
    for form in ("+", "-", "+1", "-1"):
        out = tmp_path / form
        assert run(["construct", "--case", "10", "--b", "0", "--c", "1", "--f", "1",
                    f"--branch={form}", "--out", str(out)]) == 0
    _, plus = read_csv(tmp_path / "+" / "case.csv")
    _, minus = read_csv(tmp_path / "-" / "case.csv")
    assert np.allclose(plus[:, 4] - minus[:, 4], 2.0)


# verify ------------------------------------------------------------------------------------

def test_verify_trivial(tmp_path):
    assert run(["verify", "--case", "1", "--b", "0", "--c", "1", "--f", "0", "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "verify.csv")
    assert header == ["x", "closed_form", "rk_oracle", "abs_err", "rel_err"]
    assert np.max(data[:, 4]) <= 1e-10
    s = read_kv(tmp_path / "summary.txt")
    assert s["STATUS"] == ["OK"] and s["POLES"] == ["0"]


def test_verify_gaussian_growth(tmp_path):
    assert run(["verify", "--case", "1", "--b", "0", "--c", "1", "--f", "4", "--interval", "0", "0.4",
                "--y0", "0", "--out", str(tmp_path)]) == 0
    assert float(read_kv(tmp_path / "summary.txt")["SUP_REL_ERR"][0]) <= 1e-6


def test_verify_with_pole_inside(tmp_path):
    assert run(["verify", "--case", "1", "--b", "0", "--c", "1", "--f", "0", "--C", "0.5",
                "--out", str(tmp_path)]) == 0
    s = read_kv(tmp_path / "summary.txt")
    assert s["POLES"] == ["1"]
    pole, _, lo, hi = s["POLE"][0].split()
    assert float(lo) < 0.5 < float(hi)
    assert float(s["ORACLE_BLOWUP"][0].split()[2]) <= 1e-3
    _, data = read_csv(tmp_path / "verify.csv")
    assert np.all(np.abs(data[:, 0] - 0.5) > 1e-2)


def test_verify_reports_tolerance_failure(tmp_path, capsys):
    # an absurd oracle tolerance cannot be met
    code = run(["verify", "--case", "1", "--b", "0", "--c", "1", "--f", "4", "--tol-oracle", "1e-30",
                "--out", str(tmp_path)])
    assert code == 3
    assert read_kv(tmp_path / "summary.txt")["STATUS"] == ["FAIL"]
    assert stderr_lines(capsys)[0].startswith("ERROR ToleranceFailure")


def test_verify_C_and_y0_are_exclusive(tmp_path):
    assert run(["verify", "--case", "1", "--b", "0", "--c", "1", "--f", "0", "--C", "2", "--y0", "1",
                "--out", str(tmp_path)]) == 1


# star --------------------------------------------------------------------------------------

def test_star_vacuum(tmp_path):
    assert run(["star", "--eta", "0", "--delta", "0", "--A0", "1", "--R", "1", "--u", "0",
                "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "profile.csv")
    assert header == ["r", "x", "V", "A", "u", "rho", "p_r", "p_perp", "m"]
    cols = dict(zip(header, data.T))
    for name in ("u", "rho", "p_r", "p_perp", "m"):
        assert np.all(cols[name] == 0)
    assert np.all(cols["V"] == 1) and np.all(cols["A"] == 1)
    assert (tmp_path / "plot.gp").read_text().count("profile.csv") == 3
    assert (tmp_path / "physicality.txt").read_text().splitlines()[0].startswith("(i) NONSTRICT")


def test_star_constant_density_via_case7(tmp_path):
    assert run(["star", "--eta", "0.1", "--case", "7", "--f", "-1", "--out", str(tmp_path)]) == 0
    header, data = read_csv(tmp_path / "profile.csv")
    rho = data[:, header.index("rho")]
    assert np.max(np.abs(rho - 0.6)) <= 1e-8


def test_star_planted_violation(tmp_path):
    assert run(["star", "--eta", "0.1*(1 - x)", "--case", "7", "--f", "-1", "--out", str(tmp_path)]) == 0
    first = (tmp_path / "physicality.txt").read_text().splitlines()[0]
    assert first.startswith("(i) FAIL")
    r_star = float(first.split("r*=")[1].split()[0])
    assert r_star == pytest.approx(math.sqrt(0.6), abs=1e-3)


def test_star_signature_violation_exit_four(tmp_path, capsys):
    assert run(["star", "--eta", "1", "--u", "0", "--out", str(tmp_path)]) == 4
    assert stderr_lines(capsys)[0].startswith("ERROR MetricSignatureViolation")


def test_star_not_a_solution_exit_three(tmp_path):
    assert run(["star", "--eta", "0", "--u", "1", "--out", str(tmp_path)]) == 3


def test_star_rejects_mixed_inputs(tmp_path):
    assert run(["star", "--eta", "0", "--u", "0", "--case", "7", "--f", "1", "--out", str(tmp_path)]) == 1
    assert run(["star", "--eta", "0", "--u", "0", "--C", "1", "--out", str(tmp_path)]) == 1
    assert run(["star", "--eta", "0", "--case", "7", "--out", str(tmp_path)]) == 1


# fuzz and determinism ------------------------------------------------------------------------

def test_fuzz_empty_run(tmp_path):
    assert run(["fuzz", "--case", "all", "--n", "0", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "fuzz.csv").read_text() == ",".join(FUZZ_HEADER) + "\n"


def test_fuzz_is_byte_identical(tmp_path):
    for d in ("one", "two"):
        assert run(["fuzz", "--case", "all", "--n", "1", "--seed", "42", "--out", str(tmp_path / d)]) == 0
    a = (tmp_path / "one" / "fuzz.csv").read_bytes()
    b = (tmp_path / "two" / "fuzz.csv").read_bytes()
    assert a == b and b"\r" not in a
    rows = list(csv.reader(a.decode().splitlines()))
    assert tuple(rows[0]) == FUZZ_HEADER
    assert len(rows) == 11 and all(r[-1] == "1" for r in rows[1:])
    assert all(len(r[2]) == 16 for r in rows[1:])


def test_fuzz_seed_changes_output(tmp_path):
    for s in ("1", "2"):
        run(["fuzz", "--case", "3", "--n", "1", "--seed", s, "--out", str(tmp_path / s)])
    assert (tmp_path / "1" / "fuzz.csv").read_bytes() != (tmp_path / "2" / "fuzz.csv").read_bytes()


def test_construct_and_star_are_byte_identical(tmp_path):
    for d in ("one", "two"):
        run(["construct", "--case", "1", "--b", "sin(x)", "--c", "1 + x", "--f", "4", "--Cs", "2", "-1",
             "--out", str(tmp_path / d)])
        run(["star", "--eta", "0.1 + 0.05*x", "--case", "1", "--f", "0.3", "--out", str(tmp_path / d)])
    for name in ("case.csv", "report.txt", "profile.csv", "physicality.txt"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_csv_uses_seventeen_significant_digits(tmp_path):
    run(["construct", "--case", "1", "--b", "0", "--c", "1", "--f", "4", "--out", str(tmp_path)])
    line = (tmp_path / "case.csv").read_text().splitlines()[2]
    x = line.split(",")[0]
    assert x == format(1 / 256, ".17g")


@pytest.mark.skipif(shutil.which("riccati-lab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["riccati-lab", "construct", "--case", "7", "--b", "0", "--c", "1", "--f", "2",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and (tmp_path / "report.txt").exists()
    proc = subprocess.run(["riccati-lab", "construct", "--case", "7"], capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stderr.startswith("ERROR ")

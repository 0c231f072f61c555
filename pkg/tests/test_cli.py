import csv
import json
import math

import numpy as np
import pytest

from skqaoa import cli, exact
from skqaoa.gmatrix import Angles, write_angles


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def angle_file(path, gamma, beta):
    write_angles(path, Angles(gamma, beta))
    return str(path)


def run(args, capsys):
    code = cli.main(args)
    out, err = capsys.readouterr()
    return code, out, err


def results(path="skqaoa_results.csv"):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_exact_prints_energy(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.7, -0.4], [0.3, 0.9])
    code, out, _ = run(["exact", "--angles", a], capsys)
    assert code == 0
    assert float(out) == pytest.approx(-0.3501824223201502, abs=1e-13)
    row = results()[-1]
    assert row["command"] == "exact" and row["status"] == "ok" and row["p"] == "2"
    assert set(cli.RESULT_COLUMNS) == set(row)
    assert float(row["walltime_ms"]) >= 0


def test_exact_dump_and_cap(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.5, 0.5, 0.5], [0.3, 0.2, 0.1])
    code, _, _ = run(["exact", "--angles", a, "--dump-g", "g.csv"], capsys)
    assert code == 0 and (workdir / "g.csv").exists()
    code, _, err = run(["exact", "--angles", a, "--p-cap", "2"], capsys)
    assert code == 1 and "cap" in err


def test_missing_flag_is_usage_error(workdir, capsys):
    code, _, err = run(["exact"], capsys)
    assert code == 1
    assert "--angles" in err


def test_unknown_subcommand(workdir, capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1 and "frobnicate" in err


def test_malformed_angle_file(workdir, capsys):
    bad = workdir / "bad.json"
    bad.write_text(json.dumps({"p": 2, "gamma": [0.1], "beta": [0.1, 0.2]}))
    code, _, err = run(["energy", "--angles", str(bad)], capsys)
    assert code == 1
    code, _, _ = run(["energy", "--angles", "nope.json"], capsys)
    assert code == 1


def test_energy_matches_exact(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.5], [math.pi / 8])
    code, out, _ = run(["energy", "--angles", a, "--fock-dim", "16", "--svd-cutoff",
                        "1e-12", "--diagnostics", "bonds.csv"], capsys)
    assert code == 0
    assert float(out.splitlines()[0]) == pytest.approx(1 / (2 * math.sqrt(math.e)), abs=1e-10)
    assert "max_bond=" in out
    assert (workdir / "bonds.csv").read_text().startswith("label,bond,dim")


def test_absurd_cutoff_is_numerical_failure(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.4, 0.6], [0.5, 0.3])
    code, _, err = run(["energy", "--angles", a, "--svd-cutoff", "0.9",
                        "--absolute-cutoff"], capsys)
    assert code == 2
    assert "ZeroNormError" in err
    row = results()[-1]
    assert row["status"] == "error: ZeroNormError"


def test_bad_cutoff_and_bond_flags(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.4], [0.5])
    assert run(["energy", "--angles", a, "--svd-cutoff", "1.5"], capsys)[0] == 1
    assert run(["energy", "--angles", a, "--max-bond", "zero"], capsys)[0] == 1
    assert run(["energy", "--angles", a, "--max-bond", "3"], capsys)[0] == 0


def test_results_flag_and_reproducibility(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.4, 0.6], [0.5, 0.3])
    args = ["--results", "mine.csv", "--workers", "2", "energy", "--angles", a]
    first = run(args, capsys)[1].splitlines()[0]
    second = run(args, capsys)[1].splitlines()[0]
    assert first == second
    rows = results("mine.csv")
    assert len(rows) == 2 and rows[0]["config_hash"] == rows[1]["config_hash"]
    assert rows[0]["workers"] == "2"


def test_optimize_writes_angles(workdir, capsys):
    code, out, _ = run(["optimize", "--p", "1", "--max-evals", "40", "--seed", "1",
                        "--fock-dim", "12", "--out", "best.json"], capsys)
    assert code == 0
    nu = float(out.splitlines()[0])
    assert nu == pytest.approx(0.3033, abs=2e-3)
    doc = json.loads((workdir / "best.json").read_text())
    assert doc["p"] == 1 and doc["evals"] <= 40


def test_optimize_init_variants(workdir, capsys):
    src = angle_file(workdir / "p1.json", [0.5], [math.pi / 8])
    assert run(["optimize", "--p", "2", "--init", f"fourier:{src}", "--max-evals", "5"],
               capsys)[0] == 0
    assert run(["optimize", "--p", "2", "--init", src, "--max-evals", "5"], capsys)[0] == 1
    assert run(["optimize", "--p", "1", "--init", f"file:{src}", "--max-evals", "5",
                "--method", "composite-model"], capsys)[0] == 0
    assert run(["optimize", "--p", "2", "--max-evals", "3"], capsys)[0] == 1


def test_fit_report(workdir, capsys):
    code, out, _ = run(["fit", "--p-min", "15", "--p-max", "80", "--out", "rep.json",
                        "--plot-data", "plot.csv"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert 0.82 <= doc["params"]["eta"] <= 0.94
    assert json.loads((workdir / "rep.json").read_text()) == doc
    assert (workdir / "plot.csv").read_text().startswith("p,p_pow_minus_eta,eps")


def test_fit_errors(workdir, capsys):
    (workdir / "d.csv").write_text("p,nu\n1,0.3\n2,0.4\n")
    assert run(["fit", "--data", "d.csv"], capsys)[0] == 1
    assert run(["fit", "--bootstrap", "50"], capsys)[0] == 1
    assert run(["fit", "--data", "missing.csv"], capsys)[0] == 1


def test_finite_grid(workdir, capsys):
    code, out, _ = run(["finite", "--n-list", "4,6", "--p-list", "1,2", "--instances", "5",
                        "--out", "grid.csv"], capsys)
    assert code == 0
    assert out.splitlines()[0].startswith("n,p,mean_ar")
    assert len(out.splitlines()) == 5
    assert run(["finite", "--n-list", "30"], capsys)[0] == 1
    assert run(["finite", "--p-list", "999"], capsys)[0] == 1


def test_truncation_bound(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.3, 0.4], [0.5, 0.2])
    code, out, _ = run(["truncation-bound", "--angles", a, "--L", "worst-case"], capsys)
    assert code == 0
    lines = dict(line.split(" ", 1) for line in out.splitlines())
    assert int(lines["required_d"]) >= math.ceil(float(lines["threshold"]))
    code, out, _ = run(["truncation-bound", "--angles", a], capsys)
    assert code == 0
    np.savetxt(workdir / "L.csv", np.eye(2), delimiter=",")
    assert run(["truncation-bound", "--angles", a, "--L", "L.csv"], capsys)[0] == 0
    np.savetxt(workdir / "L3.csv", np.eye(3), delimiter=",")
    assert run(["truncation-bound", "--angles", a, "--L", "L3.csv"], capsys)[0] == 1
    assert run(["truncation-bound", "--angles", a, "--target", "2"], capsys)[0] == 1


def test_crosscheck_random_p4(workdir, capsys):
    code, out, _ = run(["crosscheck", "--p", "4", "--seed", "3"], capsys)
    assert code == 0
    vals = dict(line.split() for line in out.splitlines())
    assert float(vals["abs_err"]) <= 1e-8


def test_crosscheck_zero_gamma(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.0, 0.0], [0.4, 0.1])
    code, out, _ = run(["crosscheck", "--angles", a], capsys)
    vals = dict(line.split() for line in out.splitlines())
    assert code == 0 and float(vals["nu_exact"]) == 0 and float(vals["nu_mps"]) == 0


def test_crosscheck_grid_monotone_in_d(workdir, capsys):
    a = angle_file(workdir / "a.json", [0.3, 0.45, 0.5], [0.55, 0.4, 0.2])
    code, out, _ = run(["crosscheck", "--angles", a, "--grid", "--delta-list", "1e-10",
                        "--out", "grid.csv"], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(workdir / "grid.csv")))
    errs = [float(r["abs_err"]) for r in rows]
    assert all(b <= 1.05 * a + 1e-14 for a, b in zip(errs, errs[1:]))
    assert run(["crosscheck"], capsys)[0] == 1


def test_load_schedule_bundled():
    a = cli.load_schedule(1)
    assert a.p == 1
    assert exact.nu_exact(a).nu == pytest.approx(0.3033, abs=1e-4)


def test_help_documents_schemas(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == 0
    for name in ["exact", "energy", "optimize", "fit", "finite", "truncation-bound",
                 "crosscheck"]:
        assert name in out
    assert "angle file" in out and "Exit status" in out

import json
import subprocess
import sys

import numpy as np
import pytest

from fredholm_ibp import io, make_grid
from fredholm_ibp.cli import main

HALF_SQUARE = json.dumps({"g": "(* 0.5 (^ z1 2))", "integrands": [{"breakpoints": [0, 0.5, 1], "values": [1, 0]}]})


@pytest.fixture(autouse=True)
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path


def load(path):
    with open(path) as fh:
        return json.load(fh)


def test_factorize_catalog(workdir):
    assert main(["factorize", "--catalog", "bm", "--grid-n", "256", "--out", "k.csv"]) == 0
    summary = load("k.json")
    assert summary["reconstruction_error"] <= 1e-10
    assert summary["trace"] == pytest.approx(0.5, abs=2 / 256)
    assert io.read_kernel_csv("k.csv").grid.n == 256


def test_factorize_martingale_and_csv(workdir):
    assert main(["factorize", "--catalog", "martingale", "--bracket-power", "2", "--grid-n", "32"]) == 0
    assert main(["factorize", "--catalog", "martingale", "--grid-n", "32"]) == 2
    r = np.minimum.outer(np.arange(5), np.arange(5)) / 4.0
    (workdir / "r.csv").write_text(io.matrix_csv(r, 4))
    assert main(["factorize", "--covariance", "r.csv", "--out", "kr.csv"]) == 0


def test_factorize_errors(workdir):
    (workdir / "neg.csv").write_text(io.matrix_csv(np.diag([1.0, -0.1, 0.5]), 2))
    assert main(["factorize", "--covariance", "neg.csv", "--out", "x.csv"]) == 2
    assert main(["factorize", "--covariance", "missing.csv", "--out", "x.csv"]) == 3
    assert main(["factorize", "--catalog", "bm", "--out", "no/such/dir/x.csv"]) == 3
    assert not (workdir / "x.csv").exists() and not (workdir / "x.json").exists()
    assert main(["factorize"]) == 2


def test_simulate_is_byte_identical(workdir):
    args = ["simulate", "--kernel", "bm", "--paths", "1000", "--seed", "42"]
    assert main(args + ["--out", "a.csv"]) == 0
    assert main(args + ["--out", "b.csv", "--threads", "3"]) == 0
    assert (workdir / "a.csv").read_bytes() == (workdir / "b.csv").read_bytes()
    assert load("a.json") == {"generator": "cholesky", "seed": 42, "M": 1000, "n": 128}


def test_simulate_generators(workdir):
    assert main(["simulate", "--kernel", "bm", "--generator", "series", "--n-trunc", "500"]) == 2
    assert main(["simulate", "--kernel", "bm", "--generator", "series", "--n-trunc", "16", "--paths", "10"]) == 0
    assert main(["simulate", "--generator", "poisson", "--intensity", "1", "--paths", "10", "--out", "p.csv"]) == 0
    assert load("p.json")["generator"] == "poisson"
    assert main(["simulate", "--generator", "poisson", "--intensity", "-1"]) == 2
    assert main(["simulate", "--paths", "10"]) == 2  # no law given


def test_ibp_bm(workdir):
    assert main(["simulate", "--law", "bm", "--paths", "100000", "--seed", "1", "--out", "e.csv"]) == 0
    assert main(["ibp", "--ensemble", "e.csv", "--form", "bm", "--functional-json", HALF_SQUARE]) == 0
    rep = load("ibp_report.json")
    tol = 4 * np.hypot(rep["lhs_stderr"], rep["rhs_stderr"]) + 5 / 128
    assert abs(rep["lhs"] - 0.125) <= tol and abs(rep["rhs"] - 0.125) <= tol
    assert list(rep) == ["lhs", "rhs", "lhs_stderr", "rhs_stderr", "residual", "zscore", "M", "form", "t", "functional_id"]


def test_ibp_cases(workdir, capsys):
    assert main(["simulate", "--kernel", "bm", "--paths", "200", "--out", "e.csv"]) == 0
    base = ["ibp", "--ensemble", "e.csv", "--kernel", "bm"]
    assert main(base + ["--form", "strong_at_t", "--t", "0.3", "--functional-json", HALF_SQUARE]) == 2
    assert main(base + ["--form", "strong_at_t", "--functional-json", HALF_SQUARE]) == 2
    assert main(base + ["--form", "strong_at_t", "--t", "0.25", "--functional-json", HALF_SQUARE, "--out", "s.json"]) == 0
    assert load("s.json")["t"] == 0.25
    const = json.dumps({"g": "3", "integrands": [{"breakpoints": [0, 0.5, 1], "values": [1, 0]}]})
    capsys.readouterr()
    assert main(base + ["--functional-json", const, "--out", "c.json"]) == 0
    rep = load("c.json")
    assert rep["lhs"] == 0.0 and rep["rhs"] == 0.0
    assert capsys.readouterr().out.startswith("weak lhs=0 rhs=0 zscore=0")
    assert main(base + ["--functional-json", "{not json"]) == 2
    assert main(base + ["--functional-json", '{"g": "(sin", "integrands": []}']) == 2
    assert main(base + ["--functional-json", '{"g": "z1"}']) == 2
    (workdir / "f.json").write_text(HALF_SQUARE)
    assert main(base + ["--functional", "f.json", "--out", "f_report.json"]) == 0
    assert main(base + ["--functional", "nope.json"]) == 3
    assert main(["ibp", "--ensemble", "e.csv", "--form", "martingale", "--functional-json", HALF_SQUARE]) == 2
    assert main(["ibp", "--ensemble", "e.csv", "--form", "martingale", "--bracket-power", "1",
                 "--functional-json", HALF_SQUARE]) == 0
    assert main(["ibp", "--ensemble", "e.csv", "--kernel", "bm", "--grid-n", "64", "--kernel-csv", "x.csv",
                 "--functional-json", HALF_SQUARE]) == 2


def test_test_command_verdicts(workdir):
    assert main(["test", "--kernel", "bm", "--paths", "100000", "--seed", "3", "--out", "null.json"]) == 0
    verdict = load("null.json")
    assert verdict["reject"] is False and len(verdict["reports"]) == 10
    assert main(["test", "--kernel", "bm", "--generator", "poisson", "--paths", "100000", "--grid-n", "64"]) == 1
    assert main(["test", "--kernel", "bm", "--law", "bridge", "--paths", "100000", "--grid-n", "64"]) == 1


def test_test_command_family(workdir):
    (workdir / "empty.json").write_text("[]")
    assert main(["test", "--kernel", "bm", "--family", "empty.json"]) == 2
    (workdir / "fam.json").write_text("[" + HALF_SQUARE + "]")
    assert main(["test", "--kernel", "bm", "--family", "fam.json", "--paths", "1000", "--alpha", "0.05"]) == 0
    assert load("verdict.json")["alpha"] == 0.05
    assert main(["test", "--kernel", "bm", "--alpha", "1.5", "--paths", "100"]) == 2


def test_stein1d(workdir, capsys):
    assert main(["stein1d", "--f", "z1", "--paths", "100000", "--out", "n.json"]) == 0
    assert abs(load("n.json")["zscore"]) < 4
    assert main(["stein1d", "--source", "exponential", "--f", "(^ z1 2)", "--paths", "100000", "--out", "e.json"]) == 0
    assert abs(load("e.json")["zscore"]) > 5
    assert main(["stein1d", "--f", "2.5", "--out", "c.json"]) == 0
    assert load("c.json")["lhs"] == 0.0
    assert "zscore=" in capsys.readouterr().out
    assert main(["stein1d", "--f", "(tan z1)"]) == 2
    assert not (workdir / "stein1d.json").exists()


def test_stein1d_csv(workdir):
    (workdir / "s.csv").write_text("\n".join(f"{v},{2 * v}" for v in np.linspace(-2, 2, 101)) + "\n")
    assert main(["stein1d", "--source", "csv", "--samples-csv", "s.csv", "--column", "1", "--f", "z1"]) == 0
    assert load("stein1d.json")["M"] == 101
    assert main(["stein1d", "--source", "csv", "--samples-csv", "s.csv", "--column", "2", "--f", "z1"]) == 2
    assert main(["stein1d", "--source", "csv", "--f", "z1"]) == 2


def test_config_file_and_override(workdir):
    (workdir / "cfg.json").write_text(json.dumps({"paths": 50, "seed": 7, "kernel": "bm", "grid-n": 16}))
    assert main(["simulate", "--config", "cfg.json", "--seed", "8", "--out", "c.csv"]) == 0
    assert load("c.json") == {"generator": "cholesky", "seed": 8, "M": 50, "n": 16}
    (workdir / "bad.json").write_text(json.dumps({"colour": 1}))
    assert main(["simulate", "--config", "bad.json"]) == 2
    assert main(["simulate", "--config", "absent.json"]) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["factorize", "--catalog", "bridge", "--grid-n", "32"],
        ["simulate", "--kernel", "bridge_canonical", "--generator", "series", "--paths", "300"],
        ["ibp", "--kernel", "bm", "--paths", "500", "--functional-json", HALF_SQUARE],
        ["test", "--kernel", "martingale", "--bracket-power", "2", "--paths", "500"],
        ["stein1d", "--f", "(sin z1)", "--paths", "500"],
    ],
)
def test_every_command_is_deterministic(workdir, argv):
    outputs = []
    for run in range(2):
        out = f"run{run}" + (".csv" if argv[0] in ("factorize", "simulate") else ".json")
        assert main(argv + ["--out", out]) in (0, 1)
        files = sorted(p for p in workdir.iterdir() if p.stem == f"run{run}")
        outputs.append([p.read_bytes() for p in files])
    assert outputs[0] == outputs[1]


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["simulate", "--generator", "gamma"])
    assert exc.value.code == 2


def test_module_entry_point(workdir):
    proc = subprocess.run(
        [sys.executable, "-m", "fredholm_ibp", "stein1d", "--f", "z1", "--paths", "100"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0 and proc.stdout.startswith("lhs=1 ")

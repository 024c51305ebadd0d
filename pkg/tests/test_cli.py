import numpy as np
import pytest

from cholshrink import io
from cholshrink import cli
from cholshrink.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, OUTPUT_ENV, main
from cholshrink.errors import ChainError, NotPositiveDefiniteError
from cholshrink.data import load_csv


def run(*args):
    return main([str(a) for a in args])


def test_simulate_identity_small(tmp_path):
    assert run("simulate", "--structure", "identity", "--q", 4, "--responses", 1,
               "--subjects", 3, "--output-dir", tmp_path) == 0
    assert np.array_equal(io.read_matrix_csv(tmp_path / "truth.csv"), np.eye(4))
    data = load_csv(tmp_path / "data.csv")
    assert data.N == 12 and data.n == 3


def test_simulate_default_scale(tmp_path):
    assert run("simulate", "--output-dir", tmp_path) == 0
    data = load_csv(tmp_path / "data.csv")
    assert (data.n, data.q, data.H, data.N) == (200, 30, 2, 200 * 30)


def test_simulate_deterministic(tmp_path):
    for d in ("a", "b"):
        run("simulate", "--structure", "random", "--q", 8, "--responses", 2, "--subjects", 5,
            "--sigma2", 0.3, "--seed", 9, "--output-dir", tmp_path / d)
    for f in ("truth.csv", "data.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
    assert run("simulate", "--q", 2, "--responses", 1, "--subjects", 2) == 0
    assert (tmp_path / "env" / "truth.csv").exists()


@pytest.mark.parametrize("prior", ["neg", "mm"])
def test_fit_outputs(tmp_path, prior):
    run("simulate", "--q", 4, "--responses", 2, "--subjects", 10, "--sigma2", 0.1,
        "--output-dir", tmp_path)
    out = tmp_path / prior
    assert run("fit", "--input", tmp_path / "data.csv", "--iters", 300, "--burnin", 100,
               "--thin", 2, "--chains", 2, "--gamma-prior", prior, "--output-dir", out) == 0
    import json
    summ = json.loads((out / "summary.json").read_text())
    assert summ["gamma_prior"] == prior and summ["schema_version"] == 1
    assert len((out / "chain.csv").read_text().splitlines()) == 1 + 2 * 100
    assert "psi_2_1" in (out / "chain.csv").read_text().splitlines()[0] or prior == "mm"
    assert io.read_matrix_csv(out / "omega_mean.csv").shape == (4, 4)
    assert io.read_matrix_csv(out / "rho_cross_1_2.csv").shape == (2, 2)
    assert len(io.read_diagnostics_csv(out / "diagnostics.csv")) > 0


def test_benchmark_one_cell(tmp_path):
    assert run("benchmark", "--structure", "identity", "--gamma-prior", "neg", "--replicates", 1,
               "--q", 3, "--subjects", 10, "--iters", 60, "--burnin", 30,
               "--output-dir", tmp_path) == 0
    lines = (tmp_path / "benchmark.csv").read_text().splitlines()
    assert lines[0] == "structure,prior,replicate,sel" and len(lines) == 2
    assert lines[1].startswith("identity,neg,1,")


def test_benchmark_jobs_match_serial(tmp_path):
    args = ["benchmark", "--structure", "identity,full", "--replicates", 1, "--q", 3,
            "--subjects", 8, "--iters", 40, "--burnin", 20]
    run(*args, "--output-dir", tmp_path / "a")
    run(*args, "--jobs", 2, "--output-dir", tmp_path / "b")
    assert (tmp_path / "a" / "benchmark.csv").read_bytes() == (tmp_path / "b" / "benchmark.csv").read_bytes()


def test_diagnose(tmp_path, rng):
    n = 2000
    header = "chain,iteration,iid,drift\n"
    body = "".join(f"0,{i + 1},{rng.standard_normal()!r},{i / 100 + rng.standard_normal()!r}\n"
                   for i in range(n))
    (tmp_path / "c.csv").write_text(header + body)
    assert run("diagnose", "--input", tmp_path / "c.csv", "--output-dir", tmp_path) == 0
    rows = {r["parameter"]: r for r in io.read_diagnostics_csv(tmp_path / "diagnostics.csv")}
    assert rows["iid"]["flag"] == "0" and rows["drift"]["flag"] == "1"


def test_exit_codes(tmp_path, capsys):
    (tmp_path / "empty.csv").write_text("")
    assert run("diagnose", "--input", tmp_path / "empty.csv", "--output-dir", tmp_path) == EXIT_DATA
    assert run("fit", "--input", tmp_path / "missing.csv", "--output-dir", tmp_path) == EXIT_DATA
    assert run("simulate", "--q", 5, "--responses", 2, "--output-dir", tmp_path) == EXIT_CONFIG
    (tmp_path / "d.csv").write_text("subject,response,visit,y\na,1,1,1.0\n")
    assert run("fit", "--input", tmp_path / "d.csv", "--iters", 10, "--burnin", 20,
               "--output-dir", tmp_path) == EXIT_CONFIG
    assert run("fit", "--input", tmp_path / "d.csv", "--gamma-prior", "mm", "--mm-u", 0.5,
               "--output-dir", tmp_path) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_numeric_failure_exit_code(tmp_path, monkeypatch):
    (tmp_path / "d.csv").write_text("subject,response,visit,y\na,1,1,1.0\nb,1,1,2.0\n")

    def boom(data, config):
        raise ChainError(5, "gamma", NotPositiveDefiniteError("not PD", 2))

    monkeypatch.setattr(cli, "fit", boom)
    assert run("fit", "--input", tmp_path / "d.csv", "--output-dir", tmp_path) == EXIT_NUMERIC

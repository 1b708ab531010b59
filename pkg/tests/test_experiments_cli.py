import numpy as np
import pytest

from covrecon.cli import main
from covrecon.experiments import (
    ConfigError, ExperimentConfig, format_invariants, loglog_fit, reports_to_csv, run_check_invariants,
    run_converge, run_reconstruct,
)

SMALL = dict(n=16, M=128, L=4, L_gen=64, replicates=2)


def test_config_parsing():
    cfg = ExperimentConfig.from_text("""
        # a comment
        [sampling]
        n = 32          # trailing comment
        tau = 8
        exact_bypass = yes
        sweep = 8, 16, 32, 64
    """)
    assert cfg.n == 32 and cfg.tau == "8" and cfg.exact_bypass and cfg.sweep == (8, 16, 32, 64)
    assert cfg.M == ExperimentConfig().M  # untouched keys keep their defaults
    assert ExperimentConfig.from_text("[empty]\n") == ExperimentConfig()


@pytest.mark.parametrize("text,field", [
    ("bogus = 1", "bogus"),
    ("n = ten", "n"),
    ("tau = 3", "tau"),
    ("model = matern", "model"),
    ("d = 2", "d"),
    ("information = pointwise\nbasis_kind = l2-orthonormal", "information"),
    ("just some words", "line 1"),
])
def test_config_errors_name_the_field(text, field):
    with pytest.raises(ConfigError, match=field):
        ExperimentConfig.from_text(text)


def test_reconstruct_is_deterministic(tmp_path):
    cfg = ExperimentConfig(**SMALL, seed=4)
    a = reports_to_csv(run_reconstruct(cfg))
    b = reports_to_csv(run_reconstruct(cfg))
    assert a == b
    c = reports_to_csv(run_reconstruct(cfg.replace(workers=2)))
    assert a == c
    lines = a.strip().splitlines()
    assert len(lines) == 3 and lines[0].startswith("replicate,seed,M")
    rows = [l.split(",") for l in lines[1:]]
    assert rows[0][0] == "0" and rows[1][0] == "1" and rows[0][6:10] != rows[1][6:10]
    out = tmp_path / "r.csv"
    run_reconstruct(cfg.replace(out=str(out)))
    assert out.read_text() == a
    assert (tmp_path / "r.csv.json").exists()


def test_bypass_zeroes_sampling_error():
    reps = run_reconstruct(ExperimentConfig(**{**SMALL, "M": 34}, exact_bypass=True))
    assert all(r.E3 == 0.0 for r in reps)
    assert all(r.total <= r.E1 + r.E2 + 1e-12 for r in reps)


def test_reconstruct_2d_and_pointwise():
    r2 = run_reconstruct(ExperimentConfig(model="brownian-sheet", d=2, n=4, M=64, L=3, L_gen=64, replicates=1))
    assert r2[0].triangle_ok
    rp = run_reconstruct(ExperimentConfig(**SMALL, information="pointwise"))
    assert all(r.triangle_ok for r in rp)


def test_loglog_fit():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    slope, icpt, r2 = loglog_fit(x, 3 * x**-1.5)
    assert slope == pytest.approx(-1.5) and icpt == pytest.approx(np.log(3)) and r2 == pytest.approx(1.0)


def test_converge_axes():
    cfg = ExperimentConfig()
    res = run_converge(cfg, "truncation", [8, 16, 32, 64, 128, 256])
    assert res.slope == pytest.approx(-1.5, abs=0.05) and res.r2 > 0.999
    fem = run_converge(cfg.replace(information="pointwise"), "fem", [16, 32, 64, 128])
    assert np.all((fem.extra["ratios"] > 3.3) & (fem.extra["ratios"] < 4.7))
    samp = run_converge(cfg.replace(n_h=40, replicates=4), "sampling", [32, 128, 512, 2048])
    assert samp.slope < 0
    e2e = run_converge(ExperimentConfig(**{**SMALL, "replicates": 1}), "end2end", [64, 128, 256, 512])
    assert e2e.metrics.shape == (4, 1)
    text = res.to_csv()
    assert text.startswith("# axis=truncation") and len(text.splitlines()) == 2 + 6


@pytest.mark.parametrize("sweep", [[8, 16, 32], [8, 16, 24, 40], [16, 8, 4, 2], [0, 1, 2, 4]])
def test_converge_rejects_degenerate_sweeps(sweep):
    with pytest.raises(ConfigError, match="sweep"):
        run_converge(ExperimentConfig(), "truncation", sweep)


def test_invariant_suite_passes_and_detects_corruption():
    cfg = ExperimentConfig()
    results = run_check_invariants(cfg)
    assert all(r.passed for r in results), [r.name for r in results if not r.passed]
    modules = {r.module for r in results}
    assert modules == {"fem_space", "field_models", "cov_estimators", "spectral_solver", "error_analysis", "planner"}
    bad = run_check_invariants(cfg, corrupt_mass=True)
    failed = {r.name for r in bad if not r.passed}
    assert "mass orthonormality" in failed and "Weyl inequality" in failed
    text = format_invariants(results, cfg)
    assert "#   n = 64" in text and "defaults" in text.splitlines()[0]


def test_cli_exit_codes_and_outputs(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("n = 8\nM = 40\nL = 3\nL_gen = 32\nreplicates = 2\n")
    out = tmp_path / "r.csv"
    assert main(["reconstruct", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    first = out.read_text()
    assert main(["reconstruct", "--config", str(cfg), "--out", str(out), "--seed", "5"]) == 0
    assert out.read_text() == first
    assert main(["spectrum", "--L", "3"]) == 0
    assert "0.40528473456935" in capsys.readouterr().out
    samples = tmp_path / "s.csv"
    assert main(["sample", "--config", str(cfg), "--out", str(samples)]) == 0
    est = tmp_path / "e.csv"
    assert main(["estimate", "--config", str(cfg), "--samples", str(samples), "--out", str(est)]) == 0
    assert est.read_text().startswith("# kind=tapered")
    assert main(["converge", "--axis", "truncation", "--sweep", "8,16,32,64"]) == 0
    assert main(["plan"]) == 0
    assert "brownian" in capsys.readouterr().out
    bad = tmp_path / "bad.cfg"
    bad.write_text("nn = 3\n")
    assert main(["spectrum", "--config", str(bad)]) == 1
    assert "nn" in capsys.readouterr().err
    assert main(["converge", "--sweep", "1,2"]) == 1
    assert main(["spectrum", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_cli_invariant_failure_exit_code(capsys):
    assert main(["check-invariants", "--corrupt-mass"]) == 2
    assert "FAIL" in capsys.readouterr().out


def test_cli_numeric_failure_exit_code(tmp_path, monkeypatch):
    import covrecon.cli as cli

    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("matrix is not positive definite")

    monkeypatch.setattr(cli, "run_reconstruct", boom)
    assert main(["reconstruct"]) == 3

import json

import numpy as np
import pytest

from vmplab.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


FAST_TRAIN = {"iterations": 60, "mc_samples": 4, "psi_batch": 2}


@pytest.fixture(scope="module")
def fitted(tmp_path_factory):
    """A tiny conjugate checkpoint produced through the CLI."""
    d = tmp_path_factory.mktemp("fit")
    cfg = d / "fit.json"
    cfg.write_text(
        json.dumps(
            {"model": {"id": "conjugate_gaussian"}, "train": FAST_TRAIN, "checkpoint": "c.ckpt"}
        )
    )
    assert main(["fit", "--config", str(cfg), "--out", str(d)]) == 0
    return d / "c.ckpt"


def test_missing_config_file_exit_2(tmp_path):
    assert main(["fit", "--config", str(tmp_path / "absent.json")]) == 2


def test_invalid_json_exit_2(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert main(["fit", "--config", str(p)]) == 2


def test_unknown_config_key_exit_2(tmp_path):
    p = write(tmp_path / "cfg.json", {"model": {"id": "conjugate_gaussian"}, "bogus": 1})
    assert main(["fit", "--config", p]) == 2


def test_unknown_subcommand_exit_2():
    assert main(["frobnicate", "--config", "x.json"]) == 2


def test_fit_writes_checkpoint_and_trace(fitted):
    assert fitted.exists()
    assert (fitted.parent / "loss_trace.csv").exists()


def test_fit_seed_repeatability(tmp_path):
    cfg = write(
        tmp_path / "f.json",
        {"model": {"id": "conjugate_gaussian"}, "train": FAST_TRAIN, "checkpoint": "c.ckpt"},
    )
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["fit", "--config", cfg, "--seed", "5", "--out", str(a)]) == 0
    assert main(["fit", "--config", cfg, "--seed", "5", "--out", str(b)]) == 0
    assert (a / "c.ckpt").read_bytes() == (b / "c.ckpt").read_bytes()


def test_fit_missing_data_file_exit_1_names_path(tmp_path, capsys):
    cfg = write(tmp_path / "f.json", {"model": {"id": "hpv", "path": "/nope/data.csv"}})
    assert main(["fit", "--config", cfg, "--out", str(tmp_path)]) == 1
    assert "/nope/data.csv" in capsys.readouterr().err


def test_sample_roundtrip(fitted, tmp_path):
    cfg = write(
        tmp_path / "s.json",
        {"checkpoint": str(fitted), "psi": {"mu0": 0.0, "s0": 1.0}, "n": 25},
    )
    assert main(["sample", "--config", cfg, "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "samples.csv").read_text().strip().splitlines()
    assert lines[0] == "theta"
    assert len(lines) == 26


def test_sample_out_of_bounds_psi_exit_2(fitted, tmp_path, capsys):
    cfg = write(
        tmp_path / "s.json",
        {"checkpoint": str(fitted), "psi": {"mu0": 0.0, "s0": 50.0}, "n": 5},
    )
    assert main(["sample", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "s0" in capsys.readouterr().err


def test_select_writes_report(fitted, tmp_path):
    cfg = write(
        tmp_path / "sel.json",
        {
            "checkpoint": str(fitted),
            "criterion": "elbo",
            "optimize": {"starts": 2, "iterations": 8, "n_mc": 8, "tail": 3},
        },
    )
    assert main(["select", "--config", cfg, "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "psi_hat.json").read_text())
    assert set(report["psi_hat"]) == {"mu0", "s0"}
    assert (tmp_path / "psi_opt_trace.csv").exists()


def test_eval_sweep(fitted, tmp_path):
    cfg = write(
        tmp_path / "e.json",
        {
            "checkpoint": str(fitted),
            "criterion": "elbo",
            "component": "mu0",
            "values": [-1.0, 1.0],
            "psi": {"mu0": 0.0, "s0": 1.0},
            "n_mc": 16,
        },
    )
    assert main(["eval", "--config", cfg, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "sweep.csv").read_text()
    assert "mu0" in text.splitlines()[1]


def test_mcmc_single_block(tmp_path):
    cfg = write(
        tmp_path / "m.json",
        {
            "model": {"id": "conjugate_gaussian"},
            "psi": {"mu0": 0.0, "s0": 1.0},
            "chain": {"n_samples": 200, "burn_in": 100},
        },
    )
    assert main(["mcmc", "--config", cfg, "--out", str(tmp_path)]) == 0
    samples = np.loadtxt(tmp_path / "mcmc_samples.csv", skiprows=1)
    # posterior N(0.5, sqrt(0.5)) in unconstrained space (identity block)
    assert abs(samples.mean() - 0.5) < 0.3


def test_mcmc_requires_exactly_one_source(tmp_path, fitted):
    cfg = write(tmp_path / "m.json", {"psi": {"mu0": 0.0, "s0": 1.0}})
    assert main(["mcmc", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_reproduce_determinism(tmp_path):
    cfg = write(tmp_path / "r.json", {"experiment": "conjugate", "scale": 0.02})
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["reproduce", "--config", cfg, "--seed", "1", "--out", str(a)]) == 0
    assert main(["reproduce", "--config", cfg, "--seed", "1", "--out", str(b)]) == 0
    for name in ("summary.csv", "loss_trace.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_thread_env_rejected_when_malformed(tmp_path, monkeypatch):
    monkeypatch.setenv("VMP_LAB_THREADS", "zero")
    cfg = write(tmp_path / "r.json", {"experiment": "conjugate", "scale": 0.02})
    assert main(["reproduce", "--config", cfg, "--out", str(tmp_path)]) == 2

"""Scripted end-to-end runs behind the ``reproduce`` command. Each experiment
writes a self-contained report directory (manifest + CSV tables) and is
deterministic given (seed, scale): re-running must reproduce the CSVs byte
for byte."""

from __future__ import annotations

import json
from pathlib import Path

import jax
import numpy as np

from . import __version__
from .evalx import save_table_csv, sweep
from .hyperselect import OptimizeConfig, optimize_psi, save_opt_trace_csv
from .targets import (
    conjugate_log_evidence,
    make_conjugate_gaussian_model,
    make_hpv_model,
    make_location_model,
    make_random_effects_model,
    simulate_location_data,
    simulate_random_effects,
)
from .vtrain import (
    RhoSpec,
    TrainConfig,
    elbo,
    save_checkpoint,
    save_trace_csv,
    train_smi_vmp,
    train_vmp,
    train_vp,
)

__all__ = ["EXPERIMENTS", "run_experiment"]


def _scaled(n, scale, floor=50):
    return max(int(round(n * scale)), floor)


def _finish(out: Path, name: str, seed: int, scale: float, files: list):
    manifest = {
        "experiment": name,
        "seed": seed,
        "scale": scale,
        "version": __version__,
        "files": sorted(files),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _exp_conjugate(out: Path, seed: int, scale: float):
    m = make_conjugate_gaussian_model(1.0)
    psi = {"mu0": 0.0, "s0": 1.0}
    cfg = TrainConfig(iterations=_scaled(6000, scale), mc_samples=64, psi_batch=1, seed=seed, lr_decay=0.003)
    fs, trace = train_vp(m, psi, cfg)
    e = elbo(fs, psi, m, 4000, jax.random.PRNGKey(seed))
    rows = [
        {
            "elbo": e,
            "log_evidence": conjugate_log_evidence(1.0, psi["mu0"], psi["s0"]),
            "gap": conjugate_log_evidence(1.0, psi["mu0"], psi["s0"]) - e,
        }
    ]
    save_table_csv(out / "summary.csv", rows, meta={"psi": psi})
    save_trace_csv(out / "loss_trace.csv", [trace], ["loss"])
    return ["summary.csv", "loss_trace.csv"]


def _exp_synth(out: Path, seed: int, scale: float, size: int, train_iters: int, opt_iters: int):
    rng = np.random.default_rng(seed)
    data = simulate_random_effects(rng, size, size)
    m = make_random_effects_model(data)
    rho = RhoSpec.uniform_over_bounds(m)
    cfg = TrainConfig(
        iterations=_scaled(train_iters, scale), mc_samples=16, psi_batch=8, seed=seed, lr_decay=0.02
    )
    fs, trace = train_vmp(m, rho, cfg)
    save_trace_csv(out / "loss_trace.csv", [trace], ["loss"])
    ocfg = OptimizeConfig(starts=4, iterations=_scaled(opt_iters, scale), n_mc=64, seed=seed)
    res = optimize_psi(fs, m, "elbo", ocfg)
    save_opt_trace_csv(out / "psi_opt_trace.csv", res)
    rows = [dict(res.psi_hat, loss=res.loss, best_start=res.best_start)]
    save_table_csv(out / "psi_hat.csv", rows, meta={"criterion": "elbo", "I": size, "J": size})
    save_checkpoint(fs, out / "vmp.ckpt", m, rho=rho, extra={"experiment": f"synth-{size}"})
    return ["loss_trace.csv", "psi_opt_trace.csv", "psi_hat.csv", "vmp.ckpt"]


def _exp_hpv(out: Path, seed: int, scale: float):
    m = make_hpv_model()
    rho = RhoSpec.uniform_over_bounds(m)
    cfg = TrainConfig(
        iterations=_scaled(12000, scale), mc_samples=16, psi_batch=8, seed=seed, lr_decay=0.02
    )
    bfs, (t1, t2) = train_smi_vmp(m, rho, cfg)
    save_trace_csv(out / "loss_trace.csv", [t1, t2], ["stage1_loss", "stage2_loss"])
    save_checkpoint(bfs, out / "vmp.ckpt", m, rho=rho, extra={"experiment": "hpv-smi"})
    files = ["loss_trace.csv", "vmp.ckpt"]
    for crit in ("elpd_z", "elpd_y"):
        res = optimize_psi(
            bfs, m, crit, OptimizeConfig(starts=4, iterations=_scaled(200, scale), n_mc=128, seed=seed)
        )
        save_opt_trace_csv(out / f"psi_opt_{crit}.csv", res)
        save_table_csv(
            out / f"psi_hat_{crit}.csv",
            [dict(res.psi_hat, loss=res.loss)],
            meta={"criterion": crit},
        )
        files += [f"psi_opt_{crit}.csv", f"psi_hat_{crit}.csv"]
    grid = [{"eta": e, "c1": 1.0, "c2": 1.0} for e in np.linspace(0.0, 1.0, 11)]
    rows = sweep(bfs, m, "elpd_y", grid, n_mc=256, seed=seed)
    save_table_csv(out / "eta_sweep.csv", rows, meta={"criterion": "elpd_y"})
    files.append("eta_sweep.csv")
    return files


def _exp_location(out: Path, seed: int, scale: float):
    rows = []
    etas = np.linspace(0.0, 1.0, 6)
    for s in range(3):
        rng = np.random.default_rng(seed + s)
        data = simulate_location_data(rng, float_logit_shift=2.0)
        m = make_location_model(data)
        rho = RhoSpec.uniform_over_bounds(m)
        cfg = TrainConfig(
            iterations=_scaled(4000, scale), mc_samples=16, psi_batch=8, seed=seed + s, lr_decay=0.02
        )
        bfs, _ = train_smi_vmp(m, rho, cfg)
        grid = [{"eta": e, "sa": 3.0} for e in etas]
        for r in sweep(bfs, m, "pmse", grid, n_mc=256, seed=seed):
            r["seed"] = seed + s
            rows.append(r)
    save_table_csv(out / "pmse_grid.csv", rows, meta={"etas": list(map(float, etas))})
    return ["pmse_grid.csv"]


EXPERIMENTS = {
    "conjugate": _exp_conjugate,
    "synth-small": lambda out, seed, scale: _exp_synth(out, seed, scale, 20, 4000, 150),
    "synth-large": lambda out, seed, scale: _exp_synth(out, seed, scale, 50, 12000, 300),
    "hpv-smi": _exp_hpv,
    "location-pmse": _exp_location,
}


def run_experiment(name: str, out_dir, seed: int = 0, scale: float = 1.0) -> Path:
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    if scale <= 0:
        raise ValueError("scale must be positive")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = EXPERIMENTS[name](out, seed, scale)
    _finish(out, name, seed, scale, files)
    return out

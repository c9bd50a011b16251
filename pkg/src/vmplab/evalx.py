"""Evaluation utilities: one-dimensional and sliced Wasserstein distances,
criterion sweeps over a hyperparameter grid, and the amortisation gap between
a shared conditional fit and per-point refits."""

from __future__ import annotations

import csv
import json

import jax
import numpy as np

from .targets.base import TargetModel
from .vtrain import RhoSpec, TrainConfig, elbo, train_vmp, train_smi_vmp, train_vp

__all__ = [
    "wasserstein_1d",
    "sliced_wasserstein",
    "sweep",
    "amortisation_gap",
    "save_table_csv",
]


def wasserstein_1d(a, b) -> float:
    """W1 between two univariate samples of equal size (sorted coupling)."""
    a = np.sort(np.asarray(a, float).ravel())
    b = np.sort(np.asarray(b, float).ravel())
    if a.size != b.size:
        raise ValueError("samples must have equal size")
    if a.size == 0:
        raise ValueError("samples must be non-empty")
    return float(np.mean(np.abs(a - b)))


def sliced_wasserstein(a, b, n_projections: int = 64, seed: int = 0) -> float:
    """Mean W1 over fixed random directions; a and b are (n, d) samples."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[1]:
        raise ValueError("need (n, d) samples with matching d")
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_projections, a.shape[1]))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return float(np.mean([wasserstein_1d(a @ u, b @ u) for u in dirs]))


def sweep(state, m: TargetModel, criterion: str, grid, n_mc: int = 256, seed: int = 0):
    """Evaluate one criterion across a list of psi points with common noise.
    Returns a list of rows {psi components..., criterion, value}."""
    from .hyperselect import make_criterion_fn
    from .vtrain import _as_psi_vec

    key = jax.random.PRNGKey(seed)
    f = jax.jit(make_criterion_fn(state, m, criterion, n_mc, key))
    rows = []
    for psi in grid:
        vec = _as_psi_vec(psi, m)
        val = float(f(np.asarray(vec)))
        row = {n: float(v) for n, v in zip(m.psi_names, vec)}
        row["criterion"] = criterion
        row["value"] = val
        rows.append(row)
    return rows


def amortisation_gap(
    m: TargetModel,
    rho: RhoSpec,
    psis,
    vmp_cfg: TrainConfig,
    vp_cfg: TrainConfig | None = None,
    n_mc: int = 1000,
    eval_seed: int = 0,
):
    """Train one amortised flow under rho and one dedicated flow per psi, then
    report elbo_dedicated - elbo_amortised at each psi with paired evaluation
    noise. Returns (rows, mean gap)."""
    vp_cfg = vp_cfg or vmp_cfg
    if m.is_modular:
        amortised, _ = train_smi_vmp(m, rho, vmp_cfg)
    else:
        amortised, _ = train_vmp(m, rho, vmp_cfg)
    rows = []
    for j, psi in enumerate(psis):
        dedicated, _ = train_vp(m, psi, vp_cfg)
        key = jax.random.PRNGKey(eval_seed + j)
        e_vmp = elbo(amortised, psi, m, n_mc, key)
        e_vp = elbo(dedicated, psi, m, n_mc, key)
        row = dict(psi) if isinstance(psi, dict) else {n: float(v) for n, v in zip(m.psi_names, psi)}
        row.update({"elbo_vp": e_vp, "elbo_vmp": e_vmp, "gap": e_vp - e_vmp})
        rows.append(row)
    return rows, float(np.mean([r["gap"] for r in rows]))


def save_table_csv(path, rows, meta: dict | None = None):
    """Write dict rows as CSV; optional metadata goes in a leading comment
    line as JSON so the file stays self-describing."""
    if not rows:
        raise ValueError("no rows to write")
    cols = list(rows[0].keys())
    for r in rows:
        if list(r.keys()) != cols:
            raise ValueError("rows must share columns")
    with open(path, "w", newline="") as fh:
        if meta is not None:
            fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r.values()])

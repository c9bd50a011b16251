"""HTTP wrapper around a trained checkpoint: metadata, posterior sampling,
criterion evaluation and one-dimensional sweeps. The service is read-only;
training stays offline in the CLI."""

from __future__ import annotations

import hashlib
from typing import Optional

import jax
import jax.numpy as jnp
import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel, ConfigDict, Field

from .flows import BlockFlowState
from .hyperselect import CRITERIA, make_criterion_fn
from .registry import param_names
from .targets.base import TargetModel
from .vtrain import _fs_apply, load_checkpoint, psi_features

__all__ = ["create_app", "MAX_SAMPLE_ROWS", "MAX_SWEEP_POINTS", "MAX_MC"]

MAX_SAMPLE_ROWS = 10_000
MAX_SWEEP_POINTS = 200
MAX_MC = 4096


class SampleRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    psi: dict[str, float]
    n: int = Field(default=1000, ge=1, le=MAX_SAMPLE_ROWS)
    seed: int = 0


class CriterionRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    psi: dict[str, float]
    criterion: str = "elbo"
    n_mc: int = Field(default=256, ge=1, le=MAX_MC)
    seed: int = 0


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    component: str
    values: list[float] = Field(min_length=1, max_length=MAX_SWEEP_POINTS)
    psi: dict[str, float]
    criterion: str = "elbo"
    n_mc: int = Field(default=256, ge=1, le=MAX_MC)
    seed: int = 0


def _check_psi(m: TargetModel, psi: dict) -> np.ndarray:
    missing = set(m.psi_names) - set(psi)
    extra = set(psi) - set(m.psi_names)
    if missing or extra:
        raise HTTPException(
            status_code=400,
            detail=f"psi must have exactly components {list(m.psi_names)}; "
            f"missing {sorted(missing)}, unknown {sorted(extra)}",
        )
    vec = np.array([float(psi[n]) for n in m.psi_names])
    for name, v, (lo, hi) in zip(m.psi_names, vec, m.psi_bounds):
        if not np.isfinite(v) or v < lo or v > hi:
            raise HTTPException(
                status_code=400,
                detail=f"psi component {name!r}={v} outside bounds [{lo}, {hi}]",
            )
    return vec


def _checksum(state) -> str:
    """Short digest of the checkpoint weights, shown in figure footers so a
    plot can be traced back to the exact parameters that produced it."""
    h = hashlib.sha256()
    if isinstance(state, BlockFlowState):
        flows = (state.f1, state.f2, state.f3)
    else:
        flows = (state,)
    for fs in flows:
        for leaf in jax.tree_util.tree_leaves(fs.params):
            h.update(np.asarray(leaf, dtype=np.float64).tobytes())
    return h.hexdigest()[:16]


def _draw_constrained(state, m: TargetModel, psi_vec, n, seed):
    key = jax.random.PRNGKey(seed)
    names = param_names(m)
    if isinstance(state, BlockFlowState):
        k1, k2 = jax.random.split(key)
        eps1 = jax.random.normal(k1, (n, m.delta.dim), dtype=jnp.float64)
        eps2 = jax.random.normal(k2, (n, m.theta.dim), dtype=jnp.float64)
        pv = psi_features(m, jnp.asarray(psi_vec))

        def one(e1, e2):
            du, lq1 = _fs_apply(state.f1, state.f1.params, e1, pv)
            de, jd = m.delta.constrain(du)
            tu, lq2 = _fs_apply(state.f2, state.f2.params, e2, jnp.concatenate([de, pv]))
            th, jt = m.theta.constrain(tu)
            return th, de, lq1 + lq2 - jt - jd

        theta, delta, log_q = jax.vmap(one)(eps1, eps2)
        cols = names["theta"] + names["delta"]
        mat = np.concatenate([np.asarray(theta), np.asarray(delta)], axis=1)
    else:
        dd = m.delta.dim if m.is_modular else 0
        eps = jax.random.normal(key, (n, state.config.dim), dtype=jnp.float64)
        pv = psi_features(m, jnp.asarray(psi_vec))

        def one(e):
            u, lq = _fs_apply(state, state.params, e, pv)
            theta, jt = m.theta.constrain(u[dd:])
            if dd:
                delta, jd = m.delta.constrain(u[:dd])
                return jnp.concatenate([theta, delta]), lq - jt - jd
            return theta, lq - jt

        mat, log_q = jax.vmap(one)(eps)
        mat = np.asarray(mat)
        cols = names["theta"] + (names.get("delta", []) if dd else [])
    return cols, mat, np.asarray(log_q)


def create_app(checkpoint_path=None, *, state=None, model=None, manifest=None) -> FastAPI:
    """Build the app from a checkpoint file, or directly from a loaded
    (state, model) pair in tests."""
    if checkpoint_path is not None:
        state, model, manifest = load_checkpoint(checkpoint_path)
    if state is None or model is None:
        raise ValueError("need a checkpoint path or a (state, model) pair")
    manifest = manifest or {}
    m = model

    app = FastAPI(title="vmplab", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    supported = [c for c in CRITERIA if _criterion_supported(m, c)]
    checksum = _checksum(state)

    @app.get("/meta")
    def meta():
        return {
            "model": m.name,
            "kind": "block_flow" if isinstance(state, BlockFlowState) else "flow",
            "psi": [
                {"name": n, "lower": float(lo), "upper": float(hi)}
                for n, (lo, hi) in zip(m.psi_names, m.psi_bounds)
            ],
            "params": param_names(m),
            "criteria": supported,
            "limits": {
                "max_sample_rows": MAX_SAMPLE_ROWS,
                "max_sweep_points": MAX_SWEEP_POINTS,
                "max_mc": MAX_MC,
            },
            "checkpoint": manifest.get("extra", {}),
            "checksum": checksum,
        }

    @app.post("/sample")
    def sample(req: SampleRequest):
        vec = _check_psi(m, req.psi)
        cols, mat, log_q = _draw_constrained(state, m, vec, req.n, req.seed)
        return {"columns": cols, "rows": mat.tolist(), "log_q": log_q.tolist()}

    @app.post("/criterion")
    def criterion(req: CriterionRequest):
        vec = _check_psi(m, req.psi)
        if req.criterion not in supported:
            raise HTTPException(400, detail=f"criterion must be one of {supported}")
        vecj = jnp.asarray(vec)
        f = make_criterion_fn(state, m, req.criterion, req.n_mc, jax.random.PRNGKey(req.seed))
        v = float(f(vecj))
        if not np.isfinite(v):
            raise HTTPException(500, detail="criterion evaluated non-finite")
        # Monte Carlo noise scale from a few replicate keys; the headline value
        # keeps the request seed so repeated calls agree bit for bit.
        reps = []
        for r in range(1, 5):
            g = make_criterion_fn(
                state, m, req.criterion, req.n_mc, jax.random.fold_in(jax.random.PRNGKey(req.seed), r)
            )
            reps.append(float(g(vecj)))
        stderr = float(np.std(reps, ddof=1) / np.sqrt(len(reps)))
        return {"criterion": req.criterion, "value": v, "stderr": stderr}

    @app.post("/sweep")
    def sweep(req: SweepRequest):
        if req.component not in m.psi_names:
            raise HTTPException(400, detail=f"unknown psi component {req.component!r}")
        if req.criterion not in supported:
            raise HTTPException(400, detail=f"criterion must be one of {supported}")
        base = dict(req.psi)
        base.setdefault(req.component, float(m.psi_bounds[m.psi_names.index(req.component)][0]))
        _check_psi(m, base)
        idx = m.psi_names.index(req.component)
        lo, hi = m.psi_bounds[idx]
        for v in req.values:
            if not np.isfinite(v) or v < lo or v > hi:
                raise HTTPException(
                    400, detail=f"sweep value {v} for {req.component!r} outside [{lo}, {hi}]"
                )
        f = jax.jit(make_criterion_fn(state, m, req.criterion, req.n_mc, jax.random.PRNGKey(req.seed)))
        points = []
        for v in req.values:
            psi = dict(base)
            psi[req.component] = float(v)
            vec = np.array([psi[n] for n in m.psi_names])
            points.append({"value": float(v), "loss": float(f(jnp.asarray(vec)))})
        return {"component": req.component, "criterion": req.criterion, "points": points}

    return app


def _criterion_supported(m: TargetModel, c: str) -> bool:
    if c == "elpd_z":
        return m.loglik_z_terms is not None
    if c == "pmse":
        return m.meta.get("held_out_slice") is not None
    return True

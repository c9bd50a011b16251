"""Variational training: plain ELBO, amortised ELBO over an exogenous
hyperparameter distribution, and the two-stage SMI objective merged into a
single loop via the stop-gradient operator. Optimiser is AdaBelief with an
exponentially decaying learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

from . import flows
from .flows import BlockFlowState, FlowState, init_flow
from .targets.base import TargetModel, gbi_log_joint, smi_analysis_log_target, smi_pow_log_target

__all__ = [
    "RhoSpec",
    "TrainConfig",
    "TrainingDiverged",
    "CheckpointError",
    "elbo",
    "train_vp",
    "train_vmp",
    "train_smi_vmp",
    "build_flow",
    "build_block_flow",
    "psi_standardizer",
    "save_checkpoint",
    "load_checkpoint",
    "save_trace_csv",
]


class TrainingDiverged(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = np.asarray(trace)


# ---------------------------------------------------------------------------
# Exogenous training distribution over hyperparameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RhoSpec:
    """Product of named scalar laws over psi components. Each entry is one of
    ("uniform", a, b), ("gamma", shape, scale), ("beta", a, b),
    ("normal", m, sd) or ("point", v). Unbounded laws are clipped to the
    model's psi bounds at sampling time."""

    components: dict

    @classmethod
    def point(cls, psi: dict) -> "RhoSpec":
        return cls({k: ("point", float(v)) for k, v in psi.items()})

    @classmethod
    def uniform_over_bounds(cls, m: TargetModel) -> "RhoSpec":
        return cls(
            {n: ("uniform", float(lo), float(hi)) for n, (lo, hi) in zip(m.psi_names, m.psi_bounds)}
        )

    def validate(self, m: TargetModel):
        missing = set(m.psi_names) - set(self.components)
        if missing:
            raise ValueError(f"rho spec missing components: {sorted(missing)}")

    def sample(self, key, n: int, m: TargetModel):
        """Draw an (n, d) batch, clipped to psi bounds; traceable under jit."""
        self.validate(m)
        cols = []
        for i, name in enumerate(m.psi_names):
            kind, *args = self.components[name]
            key, sub = jax.random.split(key)
            if kind == "point":
                col = jnp.full(n, args[0])
            elif kind == "uniform":
                col = jax.random.uniform(sub, (n,), minval=args[0], maxval=args[1], dtype=jnp.float64)
            elif kind == "beta":
                col = jax.random.beta(sub, args[0], args[1], (n,), dtype=jnp.float64)
            elif kind == "gamma":
                col = jax.random.gamma(sub, args[0], (n,), dtype=jnp.float64) * args[1]
            elif kind == "normal":
                col = args[0] + args[1] * jax.random.normal(sub, (n,), dtype=jnp.float64)
            else:
                raise ValueError(f"unknown rho component kind {kind!r}")
            lo, hi = m.psi_bounds[i]
            cols.append(jnp.clip(col, lo, hi))
        return jnp.stack(cols, axis=1)

    def clip_rate(self, key, m: TargetModel, n: int = 4096) -> float:
        """Fraction of draws that land outside the declared bounds (diagnostic)."""
        self.validate(m)
        clipped = 0
        for i, name in enumerate(m.psi_names):
            kind, *args = self.components[name]
            key, sub = jax.random.split(key)
            if kind == "point":
                continue
            if kind == "uniform":
                col = jax.random.uniform(sub, (n,), minval=args[0], maxval=args[1], dtype=jnp.float64)
            elif kind == "beta":
                col = jax.random.beta(sub, args[0], args[1], (n,), dtype=jnp.float64)
            elif kind == "gamma":
                col = jax.random.gamma(sub, args[0], (n,), dtype=jnp.float64) * args[1]
            else:
                col = args[0] + args[1] * jax.random.normal(sub, (n,), dtype=jnp.float64)
            lo, hi = m.psi_bounds[i]
            clipped += int(jnp.sum((col < lo) | (col > hi)))
        return clipped / (n * len(m.psi_names))


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 50_000
    mc_samples: int = 32
    psi_batch: int = 16
    lr_peak: float = 3e-3
    lr_decay: float = 0.5
    seed: int = 0
    nan_skip_limit: int = 50
    divergence_window: int = 1000

    def __post_init__(self):
        if min(self.iterations, self.mc_samples, self.psi_batch) < 0:
            raise ValueError("counts must be non-negative")


# ---------------------------------------------------------------------------
# Flow construction helpers
# ---------------------------------------------------------------------------


def psi_features(m: TargetModel, psi_vec):
    """Smooth per-model reparameterisation of the conditioning vector.
    meta["psi_feat"] maps psi_vec to a same-length feature vector (monotone
    per coordinate); targets whose posterior moves steeply in some raw
    hyperparameter can hand the conditioners a scale on which that motion is
    gradual. Identity when absent."""
    f = m.meta.get("psi_feat")
    return psi_vec if f is None else f(psi_vec)


def psi_standardizer(m: TargetModel):
    b = np.asarray(m.psi_bounds, float)
    # standardize in feature space; per-coordinate monotonicity makes the
    # transformed bounds the feature range
    lo = np.asarray(psi_features(m, jnp.asarray(b[:, 0])), float)
    hi = np.asarray(psi_features(m, jnp.asarray(b[:, 1])), float)
    lo, hi = np.minimum(lo, hi), np.maximum(lo, hi)
    return (lo + hi) / 2, np.maximum((hi - lo) / 2, 1e-12)


def _total_dim(m: TargetModel) -> int:
    return m.theta.dim + (m.delta.dim if m.is_modular else 0)


def build_flow(m: TargetModel, seed: int = 0, **flow_kwargs) -> FlowState:
    """Plain flow over all blocks of ``m`` conditioned on psi."""
    iv = flow_kwargs.pop("interval", m.meta.get("flow_interval", 5.0))
    if isinstance(iv, dict):
        # one flow spans every block, so take the widest requested box
        iv = max(iv.values())
    flow_kwargs["interval"] = float(iv)
    flow_kwargs.setdefault("hidden_width", m.meta.get("flow_width", 5))
    shift, scale = psi_standardizer(m)
    return init_flow(
        jax.random.PRNGKey(seed),
        _total_dim(m),
        len(m.psi_names),
        ctx_shift=shift,
        ctx_scale=scale,
        **flow_kwargs,
    )


def build_block_flow(m: TargetModel, seed: int = 0, **flow_kwargs) -> BlockFlowState:
    """SMI triple: q1 over the shared block (context psi), q2/q3 over the
    analysis/auxiliary blocks (context = shared block ++ psi)."""
    if not m.is_modular:
        raise ValueError(f"model {m.name!r} has no shared block")
    iv = flow_kwargs.pop("interval", m.meta.get("flow_interval", 5.0))
    if isinstance(iv, dict):
        # the shared and analysis blocks may live on very different scales;
        # a box sized for the widest one wastes spline resolution on the other
        iv_d = float(iv.get("delta", 5.0))
        iv_t = float(iv.get("theta", 5.0))
    else:
        iv_d = iv_t = float(iv)
    flow_kwargs.setdefault("hidden_width", m.meta.get("flow_width", 5))
    shift, scale = psi_standardizer(m)
    dd = m.delta.dim
    key = jax.random.PRNGKey(seed)
    k1, k2, k3 = jax.random.split(key, 3)
    # the shared block enters q2/q3 as context in constrained space; models
    # whose shared posterior is much tighter than O(1) can provide a
    # standardizer so the conditioners see O(1) variation
    dctx = m.meta.get("delta_ctx")
    if dctx is not None:
        dshift = np.asarray(dctx["shift"], dtype=float)
        dscale = np.asarray(dctx["scale"], dtype=float)
        if dshift.shape != (dd,) or dscale.shape != (dd,):
            raise ValueError("delta_ctx standardizer shape mismatch")
    else:
        dshift, dscale = np.zeros(dd), np.ones(dd)
    cshift = np.concatenate([dshift, shift])
    cscale = np.concatenate([dscale, scale])
    f1 = init_flow(k1, dd, len(m.psi_names), ctx_shift=shift, ctx_scale=scale, interval=iv_d, **flow_kwargs)
    f2 = init_flow(k2, m.theta.dim, dd + len(m.psi_names), ctx_shift=cshift, ctx_scale=cscale, interval=iv_t, **flow_kwargs)
    f3 = init_flow(k3, m.theta.dim, dd + len(m.psi_names), ctx_shift=cshift, ctx_scale=cscale, interval=iv_t, **flow_kwargs)
    return BlockFlowState(f1=f1, f2=f2, f3=f3)


# ---------------------------------------------------------------------------
# ELBO estimators (reparameterised, traceable)
# ---------------------------------------------------------------------------


def _fs_apply(fs: FlowState, params, eps, ctx):
    sctx = flows._soft_clip((ctx - jnp.asarray(fs.ctx_shift)) / jnp.asarray(fs.ctx_scale))
    theta, logdet = flows._forward(params, fs.config, eps, sctx)
    return theta, flows.base_log_prob(eps) - logdet


def make_elbo_fn(fs: FlowState, m: TargetModel) -> Callable:
    """Return f(params, psi_vec, key, n_mc) -> per-sample ELBO terms (n_mc,)."""
    dd = m.delta.dim if m.is_modular else 0

    def per_sample(params, psi_vec, eps):
        u, lq = _fs_apply(fs, params, eps, psi_features(m, psi_vec))
        psi = m.psi_dict(psi_vec)
        blocks = {}
        logjac = 0.0
        if dd:
            delta, lj = m.delta.constrain(u[:dd])
            blocks["delta"] = delta
            logjac = logjac + lj
        theta, lj = m.theta.constrain(u[dd:])
        blocks["theta"] = theta
        logjac = logjac + lj
        return gbi_log_joint(blocks, psi, m) + logjac - lq

    def estimate(params, psi_vec, key, n_mc):
        eps = jax.random.normal(key, (n_mc, fs.config.dim), dtype=jnp.float64)
        return jax.vmap(lambda e: per_sample(params, psi_vec, e))(eps)

    return estimate


def make_smi_elbo_fns(bfs: BlockFlowState, m: TargetModel):
    """Return (stage1, stage2) estimators of per-sample ELBO terms.

    stage1(p1, p3, psi_vec, key, n_mc): power-posterior stage for (q1, q3).
    stage2(p2, p1, psi_vec, key, n_mc): analysis stage for q2, with the shared
    draw passed through stop-gradient so its loss moves neither lambda1 nor
    lambda3.
    """
    dd = m.delta.dim

    def draw_shared(p1, pf, eps1):
        return _fs_apply(bfs.f1, p1, eps1, pf)

    def stage1(p1, p3, psi_vec, key, n_mc):
        k1, k3 = jax.random.split(key)
        eps1 = jax.random.normal(k1, (n_mc, dd), dtype=jnp.float64)
        eps3 = jax.random.normal(k3, (n_mc, m.theta.dim), dtype=jnp.float64)
        psi = m.psi_dict(psi_vec)
        pf = psi_features(m, psi_vec)

        def one(e1, e3):
            du, lq1 = draw_shared(p1, pf, e1)
            delta, lj_d = m.delta.constrain(du)
            # the likelihood sees the constrained shared block, so condition
            # the dependent flows on it directly; the map it must learn is
            # then close to linear
            tu, lq3 = _fs_apply(bfs.f3, p3, e3, jnp.concatenate([delta, pf]))
            ttil, lj_t = m.theta.constrain(tu)
            logp = smi_pow_log_target(delta, ttil, psi, m) + lj_d + lj_t
            return logp - lq1 - lq3

        return jax.vmap(one)(eps1, eps3)

    def stage2(p2, p1, psi_vec, key, n_mc):
        k1, k2 = jax.random.split(key)
        eps1 = jax.random.normal(k1, (n_mc, dd), dtype=jnp.float64)
        eps2 = jax.random.normal(k2, (n_mc, m.theta.dim), dtype=jnp.float64)
        psi = m.psi_dict(psi_vec)
        pf = psi_features(m, psi_vec)

        def one(e1, e2):
            du, _ = draw_shared(p1, pf, e1)
            du = jax.lax.stop_gradient(du)
            delta, _ = m.delta.constrain(du)
            tu, lq2 = _fs_apply(bfs.f2, p2, e2, jnp.concatenate([delta, pf]))
            theta, lj = m.theta.constrain(tu)
            logp = smi_analysis_log_target(theta, delta, psi, m) + lj
            return logp - lq2

        return jax.vmap(one)(eps1, eps2)

    return stage1, stage2


def elbo(fs, psi, m: TargetModel, n_mc: int, rng) -> float:
    """Monte-Carlo ELBO estimate at one psi. For a BlockFlowState this is the
    SMI objective (power stage plus analysis stage)."""
    if n_mc < 1:
        raise ValueError("n_mc must be >= 1")
    key = rng if isinstance(rng, jax.Array) else jax.random.PRNGKey(int(rng))
    psi_vec = jnp.asarray(_as_psi_vec(psi, m))
    if isinstance(fs, BlockFlowState):
        s1, s2 = make_smi_elbo_fns(fs, m)
        k1, k2 = jax.random.split(key)
        terms = s1(fs.f1.params, fs.f3.params, psi_vec, k1, n_mc) + s2(
            fs.f2.params, fs.f1.params, psi_vec, k2, n_mc
        )
    else:
        terms = make_elbo_fn(fs, m)(fs.params, psi_vec, key, n_mc)
    terms = np.asarray(terms)
    bad = int(np.sum(~np.isfinite(terms)))
    if bad:
        raise FloatingPointError(f"{bad} of {n_mc} ELBO sample terms are non-finite")
    return float(terms.mean())


def _as_psi_vec(psi, m: TargetModel):
    from .targets.base import PsiPoint

    if isinstance(psi, PsiPoint):
        return psi.values
    if isinstance(psi, dict):
        return np.array([float(psi[n]) for n in m.psi_names])
    return np.asarray(psi, float)


# ---------------------------------------------------------------------------
# AdaBelief
# ---------------------------------------------------------------------------


def _adabelief_init(params):
    zeros = jax.tree_util.tree_map(jnp.zeros_like, params)
    return {"m": zeros, "s": jax.tree_util.tree_map(jnp.zeros_like, params), "t": jnp.zeros((), jnp.float64)}


def _adabelief_update(params, grads, state, lr, b1=0.9, b2=0.999, eps=1e-16):
    t = state["t"] + 1
    m = jax.tree_util.tree_map(lambda mm, g: b1 * mm + (1 - b1) * g, state["m"], grads)
    s = jax.tree_util.tree_map(
        lambda ss, g, mm: b2 * ss + (1 - b2) * (g - mm) ** 2 + eps, state["s"], grads, m
    )
    mhat = jax.tree_util.tree_map(lambda mm: mm / (1 - b1**t), m)
    shat = jax.tree_util.tree_map(lambda ss: ss / (1 - b2**t), s)
    new_params = jax.tree_util.tree_map(
        lambda p, mh, sh: p - lr * mh / (jnp.sqrt(sh) + eps), params, mhat, shat
    )
    return new_params, {"m": m, "s": s, "t": t}


def _lr_at(cfg: TrainConfig, t):
    return cfg.lr_peak * cfg.lr_decay ** (t / max(cfg.iterations, 1))


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------


def _run_loop(step, params, cfg: TrainConfig, n_traces: int, chunk: int = 250):
    """Drive ``step`` for cfg.iterations via lax.scan chunks. Non-finite steps
    leave parameters untouched; too many in a row, or a sustained blow-up past
    the initial loss, abort with the trace collected so far."""
    base_key = jax.random.PRNGKey(cfg.seed)

    def body(carry, t):
        params, opt, skips = carry
        key = jax.random.fold_in(base_key, t)
        new_params, new_opt, losses = step(params, opt, key, t.astype(jnp.float64))
        ok = jnp.isfinite(sum(losses))
        params = jax.tree_util.tree_map(lambda n, o: jnp.where(ok, n, o), new_params, params)
        opt = jax.tree_util.tree_map(lambda n, o: jnp.where(ok, n, o), new_opt, opt)
        skips = jnp.where(ok, 0, skips + 1)
        return (params, opt, skips), (jnp.stack(losses), skips)

    scan = jax.jit(lambda carry, ts: jax.lax.scan(body, carry, ts))
    carry = (params, _adabelief_init(params), jnp.zeros((), jnp.int64))
    traces = np.empty((cfg.iterations, n_traces))
    initial = None
    divrun = 0
    t = 0
    while t < cfg.iterations:
        c = min(chunk, cfg.iterations - t)
        carry, (losses, skips) = scan(carry, jnp.arange(t, t + c))
        losses = np.asarray(losses)
        traces[t : t + c] = losses
        t += c
        if int(np.max(np.asarray(skips))) >= cfg.nan_skip_limit:
            raise TrainingDiverged(
                f"{cfg.nan_skip_limit} consecutive non-finite training steps", traces[:t, 0]
            )
        totals = losses.sum(axis=1)
        for x in totals:
            if not np.isfinite(x):
                continue
            if initial is None:
                initial = x
            if x > initial + 10 * max(1.0, abs(initial)):
                divrun += 1
                if divrun >= cfg.divergence_window:
                    raise TrainingDiverged(
                        f"loss exceeded its initial value 10-fold for {divrun} consecutive steps",
                        traces[:t, 0],
                    )
            else:
                divrun = 0
    return carry[0], [traces[:, i] for i in range(n_traces)]


def train_vmp(m: TargetModel, rho: RhoSpec, cfg: TrainConfig, **flow_kwargs):
    """Fit a single conditional flow across psi by ascending the amortised
    ELBO. Returns (FlowState, loss trace)."""
    rho.validate(m)
    fs = build_flow(m, seed=cfg.seed, **flow_kwargs)
    elbo_fn = make_elbo_fn(fs, m)

    def loss_fn(params, key):
        kp, ke = jax.random.split(key)
        psis = rho.sample(kp, cfg.psi_batch, m)
        keys = jax.random.split(ke, cfg.psi_batch)
        vals = jax.vmap(lambda pv, k: jnp.mean(elbo_fn(params, pv, k, cfg.mc_samples)))(psis, keys)
        return -jnp.mean(vals)

    def step(params, opt, key, t):
        loss, grads = jax.value_and_grad(loss_fn)(params, key)
        new_params, new_opt = _adabelief_update(params, grads, opt, _lr_at(cfg, t))
        return new_params, new_opt, (loss,)

    params, traces = _run_loop(step, fs.params, cfg, 1)
    return fs.with_params(params), traces[0]


def train_smi_vmp(m: TargetModel, rho: RhoSpec, cfg: TrainConfig, **flow_kwargs):
    """Fit the SMI triple: one merged loop ascending the power-stage objective
    in (lambda1, lambda3) and the analysis-stage objective in lambda2, with
    stop-gradient keeping stage two away from (lambda1, lambda3).

    Returns (BlockFlowState, (stage1 trace, stage2 trace))."""
    rho.validate(m)
    bfs = build_block_flow(m, seed=cfg.seed, **flow_kwargs)
    stage1, stage2 = make_smi_elbo_fns(bfs, m)

    def loss_fn(all_params, key):
        p1, p2, p3 = all_params
        kp, k1, k2 = jax.random.split(key, 3)
        psis = rho.sample(kp, cfg.psi_batch, m)
        keys1 = jax.random.split(k1, cfg.psi_batch)
        keys2 = jax.random.split(k2, cfg.psi_batch)
        l1 = -jnp.mean(
            jax.vmap(lambda pv, k: jnp.mean(stage1(p1, p3, pv, k, cfg.mc_samples)))(psis, keys1)
        )
        l2 = -jnp.mean(
            jax.vmap(lambda pv, k: jnp.mean(stage2(p2, p1, pv, k, cfg.mc_samples)))(psis, keys2)
        )
        return l1 + l2, (l1, l2)

    def step(all_params, opt, key, t):
        (_, (l1, l2)), grads = jax.value_and_grad(loss_fn, has_aux=True)(all_params, key)
        new_params, new_opt = _adabelief_update(all_params, grads, opt, _lr_at(cfg, t))
        return new_params, new_opt, (l1, l2)

    (p1, p2, p3), traces = _run_loop(step, (bfs.f1.params, bfs.f2.params, bfs.f3.params), cfg, 2)
    return bfs.with_params(p1, p2, p3), (traces[0], traces[1])


def train_vp(m: TargetModel, psi, cfg: TrainConfig, **flow_kwargs):
    """Variational fit at one fixed psi: amortised training with a point-mass
    rho, so a degenerate rho and train_vp share traces exactly."""
    psi_vec = _as_psi_vec(psi, m)
    rho = RhoSpec.point({n: v for n, v in zip(m.psi_names, psi_vec)})
    if m.is_modular:
        return train_smi_vmp(m, rho, cfg, **flow_kwargs)
    return train_vmp(m, rho, cfg, **flow_kwargs)


# ---------------------------------------------------------------------------
# Checkpoints: single binary file, magic + JSON manifest + little-endian
# float64 payload, CRC32 per array. Round-trips are bit-exact.
# ---------------------------------------------------------------------------

_CKPT_MAGIC = b"VMPCKPT1"
_CKPT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _state_flows(state):
    if isinstance(state, BlockFlowState):
        return [state.f1, state.f2, state.f3]
    return [state]


def _flow_arrays(fs: FlowState):
    leaves = jax.tree_util.tree_leaves(fs.params)
    return [np.asarray(fs.ctx_shift), np.asarray(fs.ctx_scale)] + [np.asarray(x) for x in leaves]


def save_checkpoint(state, path, m: TargetModel, rho: RhoSpec | None = None, extra: dict | None = None):
    """Write a flow (or SMI triple) plus enough metadata to rebuild the model."""
    import dataclasses
    import json
    import struct
    import zlib

    from .registry import model_payload

    flows_ = _state_flows(state)
    arrays = []
    for fs in flows_:
        arrays.extend(_flow_arrays(fs))
    manifest = {
        "version": _CKPT_VERSION,
        "kind": "block_flow" if isinstance(state, BlockFlowState) else "flow",
        "model": model_payload(m),
        "flow_configs": [dataclasses.asdict(fs.config) for fs in flows_],
        "rho": {k: list(v) for k, v in rho.components.items()} if rho is not None else None,
        "extra": extra or {},
        "arrays": [],
    }
    offset = 0
    blobs = []
    for a in arrays:
        a = np.ascontiguousarray(a, dtype="<f8")
        blob = a.tobytes()
        manifest["arrays"].append(
            {"shape": list(a.shape), "offset": offset, "crc32": zlib.crc32(blob)}
        )
        offset += len(blob)
        blobs.append(blob)
    mbytes = json.dumps(manifest).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_CKPT_MAGIC)
        fh.write(struct.pack("<I", len(mbytes)))
        fh.write(mbytes)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path):
    """Return (state, model, manifest); raises CheckpointError on a bad file."""
    import json
    import struct
    import zlib

    from .registry import build_model

    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _CKPT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    (mlen,) = struct.unpack("<I", raw[8:12])
    try:
        manifest = json.loads(raw[12 : 12 + mlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"corrupt manifest: {e}") from e
    if manifest.get("version") != _CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {manifest.get('version')!r}")
    payload = raw[12 + mlen :]
    arrays = []
    for spec in manifest["arrays"]:
        shape = tuple(spec["shape"])
        nbytes = int(np.prod(shape)) * 8 if shape else 8
        blob = payload[spec["offset"] : spec["offset"] + nbytes]
        if len(blob) != nbytes:
            raise CheckpointError("truncated payload")
        if zlib.crc32(blob) != spec["crc32"]:
            raise CheckpointError("payload checksum mismatch")
        arrays.append(np.frombuffer(blob, dtype="<f8").reshape(shape))
    m = build_model(manifest["model"])
    states = []
    i = 0
    for cdict in manifest["flow_configs"]:
        cfg = flows.FlowConfig(**cdict)
        skel = init_flow(
            jax.random.PRNGKey(0),
            cfg.dim,
            cfg.context_dim,
            num_layers=cfg.num_layers,
            knots=cfg.knots,
            hidden_width=cfg.hidden_width,
            hidden_depth=cfg.hidden_depth,
            interval=cfg.interval,
        )
        ctx_shift, ctx_scale = arrays[i], arrays[i + 1]
        leaves, treedef = jax.tree_util.tree_flatten(skel.params)
        n = len(leaves)
        new_leaves = [jnp.asarray(a) for a in arrays[i + 2 : i + 2 + n]]
        for old, new in zip(leaves, new_leaves):
            if old.shape != new.shape:
                raise CheckpointError("parameter shape mismatch against flow config")
        params = jax.tree_util.tree_unflatten(treedef, new_leaves)
        states.append(
            FlowState(config=cfg, params=params, ctx_shift=ctx_shift, ctx_scale=ctx_scale)
        )
        i += 2 + n
    if manifest["kind"] == "block_flow":
        if len(states) != 3:
            raise CheckpointError("block_flow checkpoint must hold exactly 3 flows")
        state = BlockFlowState(f1=states[0], f2=states[1], f3=states[2])
    elif manifest["kind"] == "flow":
        if len(states) != 1:
            raise CheckpointError("flow checkpoint must hold exactly 1 flow")
        state = states[0]
    else:
        raise CheckpointError(f"unknown checkpoint kind {manifest['kind']!r}")
    return state, m, manifest


def save_trace_csv(path, traces, names):
    """Write per-iteration loss traces with an iteration column."""
    import csv as _csv

    traces = [np.asarray(t) for t in traces]
    if len({len(t) for t in traces}) > 1:
        raise ValueError("traces must share a length")
    with open(path, "w", newline="") as fh:
        w = _csv.writer(fh)
        w.writerow(["iteration", *names])
        for t in range(len(traces[0])):
            w.writerow([t] + [repr(float(tr[t])) for tr in traces])

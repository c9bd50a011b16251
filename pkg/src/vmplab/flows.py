"""Conditional normalising flow: coupling layers with rational-quadratic-spline
transformers whose conditioner MLPs take (passthrough subvector, context) as
input. The context is the hyperparameter vector, optionally preceded by a
conditioning parameter block (for the block-factorised SMI family).

Conventions:
- base distribution is standard normal in the unconstrained space,
- a freshly initialised flow is the identity map (final conditioner layer has
  zero weights and zero biases; raw spline parameters of zero give equal bins
  and unit knot derivatives),
- inter-layer permutation is a fixed reversal of dimension order, with the
  split point alternating between the two halves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import jax
import jax.numpy as jnp
import numpy as np

__all__ = [
    "FlowConfig",
    "FlowState",
    "BlockFlowState",
    "SampleBatch",
    "init_flow",
    "flow_forward",
    "flow_inverse",
    "log_q",
    "sample",
    "spline_apply",
]

# softplus(_DERIV_RAW_SHIFT) == 1, so raw zeros give unit knot derivatives
_DERIV_RAW_SHIFT = math.log(math.e - 1.0)
_MIN_BIN = 1e-4


@dataclass(frozen=True)
class FlowConfig:
    dim: int
    context_dim: int
    num_layers: int = 4
    knots: int = 10
    hidden_width: int = 5
    hidden_depth: int = 3
    interval: float = 5.0


@dataclass(frozen=True)
class FlowState:
    """Immutable flow: architecture, conditioner weights and context scaling.

    ``ctx_shift``/``ctx_scale`` map each context component to roughly [-1, 1]
    before it enters the conditioners (identity scaling for parameter-block
    context components).
    """

    config: FlowConfig
    params: Any  # list per layer of {"w": [...], "b": [...]}
    ctx_shift: np.ndarray
    ctx_scale: np.ndarray

    def with_params(self, params) -> "FlowState":
        return replace(self, params=params)


@dataclass(frozen=True)
class BlockFlowState:
    """SMI triple: q1 for the shared block, q2/q3 for analysis/auxiliary blocks
    conditioned on (shared block, hyperparameters)."""

    f1: FlowState
    f2: FlowState
    f3: FlowState

    def with_params(self, p1, p2, p3) -> "BlockFlowState":
        return BlockFlowState(
            self.f1.with_params(p1), self.f2.with_params(p2), self.f3.with_params(p3)
        )


@dataclass(frozen=True)
class SampleBatch:
    eps: np.ndarray
    theta_unconstrained: np.ndarray
    log_q: np.ndarray


# ---------------------------------------------------------------------------
# Rational-quadratic spline (piecewise monotone, identity outside [-B, B])
# ---------------------------------------------------------------------------


def _spline_knots(raw_w, raw_h, raw_d, interval):
    """Raw conditioner outputs -> knot positions, heights and derivatives."""
    k = raw_w.shape[-1]
    widths = jax.nn.softmax(raw_w, axis=-1)
    widths = _MIN_BIN + (1 - _MIN_BIN * k) * widths
    heights = jax.nn.softmax(raw_h, axis=-1)
    heights = _MIN_BIN + (1 - _MIN_BIN * k) * heights
    widths = widths * (2 * interval)
    heights = heights * (2 * interval)
    xs = jnp.concatenate(
        [jnp.full(raw_w.shape[:-1] + (1,), -interval), -interval + jnp.cumsum(widths, axis=-1)],
        axis=-1,
    )
    ys = jnp.concatenate(
        [jnp.full(raw_h.shape[:-1] + (1,), -interval), -interval + jnp.cumsum(heights, axis=-1)],
        axis=-1,
    )
    derivs = jax.nn.softplus(raw_d + _DERIV_RAW_SHIFT)
    return xs, ys, derivs


def _rqs(x, raw_w, raw_h, raw_d, interval, inverse):
    """Vectorised rational-quadratic spline; returns (y, log|dy/dx|).

    Leading dims of x broadcast against the raw parameter arrays (last axis is
    the knot axis). Outside [-interval, interval] the map is the identity.
    """
    xs, ys, derivs = _spline_knots(raw_w, raw_h, raw_d, interval)
    inside = jnp.abs(x) <= interval
    xq = jnp.where(inside, x, 0.0)

    grid = ys if inverse else xs
    idx = jnp.clip(jnp.sum(xq[..., None] >= grid[..., :-1], axis=-1) - 1, 0, raw_w.shape[-1] - 1)

    def take(a, off=0):
        return jnp.take_along_axis(a, idx[..., None] + off, axis=-1)[..., 0]

    x_k, x_k1 = take(xs), take(xs, 1)
    y_k, y_k1 = take(ys), take(ys, 1)
    d_k, d_k1 = take(derivs), take(derivs, 1)
    w_k = x_k1 - x_k
    h_k = y_k1 - y_k
    s_k = h_k / w_k
    dsum = d_k1 + d_k - 2 * s_k

    if not inverse:
        xi = (xq - x_k) / w_k
        xi = jnp.clip(xi, 0.0, 1.0)
        xi1m = 1 - xi
        denom = s_k + dsum * xi * xi1m
        y = y_k + h_k * (s_k * xi**2 + d_k * xi * xi1m) / denom
        deriv = s_k**2 * (d_k1 * xi**2 + 2 * s_k * xi * xi1m + d_k * xi1m**2) / denom**2
    else:
        yrel = jnp.clip(xq - y_k, 0.0, h_k)
        a = h_k * (s_k - d_k) + yrel * dsum
        b = h_k * d_k - yrel * dsum
        c = -s_k * yrel
        disc = jnp.maximum(b**2 - 4 * a * c, 0.0)
        xi = 2 * c / (-b - jnp.sqrt(disc))
        xi = jnp.clip(xi, 0.0, 1.0)
        xi1m = 1 - xi
        denom = s_k + dsum * xi * xi1m
        y = x_k + xi * w_k
        deriv = s_k**2 * (d_k1 * xi**2 + 2 * s_k * xi * xi1m + d_k * xi1m**2) / denom**2
        deriv = 1.0 / deriv

    y = jnp.where(inside, y, x)
    log_deriv = jnp.where(inside, jnp.log(deriv), 0.0)
    return y, log_deriv


def spline_apply(x, raw_w, raw_h, raw_d, interval=5.0, direction="forward"):
    """Apply one rational-quadratic spline to scalar/array inputs.

    ``raw_*`` are the unconstrained conditioner outputs (softmax / softplus are
    applied internally). Returns (y, log_abs_derivative).
    """
    if direction not in ("forward", "inverse"):
        raise ValueError(f"unknown direction {direction!r}")
    x = jnp.asarray(x, dtype=jnp.float64)
    y, ld = _rqs(x, jnp.asarray(raw_w), jnp.asarray(raw_h), jnp.asarray(raw_d), interval, direction == "inverse")
    return y, ld


# ---------------------------------------------------------------------------
# Conditioner MLP and coupling layers
# ---------------------------------------------------------------------------


def _mlp_init(key, n_in, n_out, cfg: FlowConfig):
    sizes = [n_in] + [cfg.hidden_width] * cfg.hidden_depth + [n_out]
    ws, bs = [], []
    for i in range(len(sizes) - 1):
        key, sub = jax.random.split(key)
        if i == len(sizes) - 2:
            w = jnp.zeros((sizes[i], sizes[i + 1]))  # identity initialisation
        else:
            w = jax.random.normal(sub, (sizes[i], sizes[i + 1])) / np.sqrt(sizes[i])
        ws.append(w)
        bs.append(jnp.zeros(sizes[i + 1]))
    return {"w": ws, "b": bs}


def _mlp_apply(p, x):
    h = x
    for i, (w, b) in enumerate(zip(p["w"], p["b"])):
        h = h @ w + b
        if i < len(p["w"]) - 1:
            h = jnp.tanh(h)
    return h


def _layer_dims(dim: int, layer: int) -> int:
    """Size of the passthrough part for a given layer (alternating halves)."""
    if dim == 1:
        return 0
    half = dim // 2
    return half if layer % 2 == 0 else dim - half


def init_flow(key, dim, context_dim, *, ctx_shift=None, ctx_scale=None, **cfg_kwargs) -> FlowState:
    cfg = FlowConfig(dim=dim, context_dim=context_dim, **cfg_kwargs)
    params = []
    for layer in range(cfg.num_layers):
        d_a = _layer_dims(dim, layer)
        d_b = dim - d_a
        key, sub = jax.random.split(key)
        params.append(_mlp_init(sub, d_a + context_dim, d_b * (3 * cfg.knots + 2), cfg))
    shift = np.zeros(context_dim) if ctx_shift is None else np.asarray(ctx_shift, dtype=float)
    scale = np.ones(context_dim) if ctx_scale is None else np.asarray(ctx_scale, dtype=float)
    if shift.shape != (context_dim,) or scale.shape != (context_dim,):
        raise ValueError("context standardizer shape mismatch")
    return FlowState(config=cfg, params=params, ctx_shift=shift, ctx_scale=scale)


CTX_CLIP = 8.0


def _soft_clip(z):
    # keep standardized context near-linear in its typical range but bounded,
    # so a context far outside the standardizer's regime (early training)
    # cannot saturate the conditioners
    return CTX_CLIP * jnp.tanh(z / CTX_CLIP)


def _std_ctx(fs: FlowState, ctx):
    ctx = jnp.asarray(ctx, dtype=jnp.float64)
    if ctx.shape != (fs.config.context_dim,):
        raise ValueError(
            f"context has shape {ctx.shape}, expected ({fs.config.context_dim},)"
        )
    return _soft_clip((ctx - jnp.asarray(fs.ctx_shift)) / jnp.asarray(fs.ctx_scale))


def _layer_apply(p, layer, x, ctx, cfg: FlowConfig, inverse: bool):
    # each transformed coordinate gets spline parameters plus an additive
    # shift applied after the spline; the shift depends only on (x_a, ctx) so
    # the Jacobian is untouched, and it can carry mass beyond the spline box
    d_a = _layer_dims(cfg.dim, layer)
    xa, xb = x[:d_a], x[d_a:]
    raw = _mlp_apply(p, jnp.concatenate([xa, ctx])).reshape(cfg.dim - d_a, 3 * cfg.knots + 2)
    rw = raw[:, : cfg.knots]
    rh = raw[:, cfg.knots : 2 * cfg.knots]
    rd = raw[:, 2 * cfg.knots : 3 * cfg.knots + 1]
    sh = raw[:, 3 * cfg.knots + 1]
    if inverse:
        yb, ld = _rqs(xb - sh, rw, rh, rd, cfg.interval, True)
    else:
        yb, ld = _rqs(xb, rw, rh, rd, cfg.interval, False)
        yb = yb + sh
    return jnp.concatenate([xa, yb]), jnp.sum(ld)


# A reversal precedes every layer after the first; a final reversal is added
# when that count is odd, so the net permutation is always the identity and a
# freshly initialised flow is the identity map.


def _final_reversal(cfg: FlowConfig) -> bool:
    return (cfg.num_layers - 1) % 2 == 1


def _forward(params, cfg, x, ctx):
    logdet = 0.0
    for layer in range(cfg.num_layers):
        if layer > 0:
            x = x[::-1]
        x, ld = _layer_apply(params[layer], layer, x, ctx, cfg, inverse=False)
        logdet = logdet + ld
    if _final_reversal(cfg):
        x = x[::-1]
    return x, logdet


def _inverse(params, cfg, y, ctx):
    logdet = 0.0
    if _final_reversal(cfg):
        y = y[::-1]
    for layer in reversed(range(cfg.num_layers)):
        y, ld = _layer_apply(params[layer], layer, y, ctx, cfg, inverse=True)
        if layer > 0:
            y = y[::-1]
        logdet = logdet + ld
    return y, logdet


def flow_forward(eps, ctx, fs: FlowState):
    """Push a base-space vector through the flow; returns (theta, log_det)."""
    eps = jnp.asarray(eps, dtype=jnp.float64)
    if eps.shape != (fs.config.dim,):
        raise ValueError(f"eps has shape {eps.shape}, expected ({fs.config.dim},)")
    return _forward(fs.params, fs.config, eps, _std_ctx(fs, ctx))


def flow_inverse(theta, ctx, fs: FlowState):
    """Exact inverse of :func:`flow_forward`; returns (eps, log_det)."""
    theta = jnp.asarray(theta, dtype=jnp.float64)
    if theta.shape != (fs.config.dim,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({fs.config.dim},)")
    return _inverse(fs.params, fs.config, theta, _std_ctx(fs, ctx))


def base_log_prob(eps):
    return jnp.sum(jax.scipy.stats.norm.logpdf(eps))


def log_q(theta, ctx, fs: FlowState):
    """Variational log-density at a point in unconstrained space."""
    eps, logdet_inv = flow_inverse(theta, ctx, fs)
    return base_log_prob(eps) + logdet_inv


def sample(n, ctx, fs: FlowState, key) -> SampleBatch:
    """Draw ``n`` i.i.d. samples with per-row log-density; reproducible from key."""
    if n < 0:
        raise ValueError("n must be >= 0")
    eps = jax.random.normal(key, (n, fs.config.dim), dtype=jnp.float64)
    sctx = _std_ctx(fs, ctx)

    def one(e):
        theta, logdet = _forward(fs.params, fs.config, e, sctx)
        return theta, base_log_prob(e) - logdet

    if n == 0:
        return SampleBatch(
            eps=np.zeros((0, fs.config.dim)),
            theta_unconstrained=np.zeros((0, fs.config.dim)),
            log_q=np.zeros(0),
        )
    theta, lq = jax.vmap(one)(eps)
    return SampleBatch(eps=np.asarray(eps), theta_unconstrained=np.asarray(theta), log_q=np.asarray(lq))

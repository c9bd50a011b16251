"""Pluggable target posteriors: parameter blocks, constraint transforms and
unnormalised log-density terms split per module so training objectives can
weight them independently."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

import jax
import jax.numpy as jnp
import numpy as np

__all__ = [
    "BlockSpec",
    "PsiPoint",
    "TargetModel",
    "identity_block",
    "softplus_block",
    "sigmoid_block",
    "mixed_block",
    "gbi_log_joint",
    "smi_pow_log_target",
    "smi_analysis_log_target",
]


def _check_finite(value, what: str):
    if not isinstance(value, jax.core.Tracer) and not bool(jnp.isfinite(value)):
        raise FloatingPointError(f"non-finite {what}")
    return value


# ---------------------------------------------------------------------------
# Constraint transforms (unconstrained flow space -> model space)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockSpec:
    """One parameter block: dimension plus a bijection from unconstrained space."""

    dim: int
    constrain: Callable  # u -> (x, log_jacobian)
    unconstrain: Callable  # x -> u


def _softplus(u):
    return jax.nn.softplus(u)


def _softplus_inv(x):
    x = jnp.asarray(x, dtype=jnp.float64)
    return x + jnp.log(-jnp.expm1(-x))


def identity_block(dim: int) -> BlockSpec:
    return BlockSpec(dim, lambda u: (u, 0.0), lambda x: x)


def softplus_block(dim: int) -> BlockSpec:
    def constrain(u):
        x = _softplus(u)
        # d softplus / du = sigmoid(u); log sigmoid = -softplus(-u)
        return x, -jnp.sum(jax.nn.softplus(-u))

    return BlockSpec(dim, constrain, _softplus_inv)


def sigmoid_block(dim: int, lo: float = 0.0, hi: float = 1.0) -> BlockSpec:
    width = hi - lo

    def constrain(u):
        s = jax.nn.sigmoid(u)
        x = lo + width * s
        logjac = jnp.sum(jnp.log(width) - jax.nn.softplus(-u) - jax.nn.softplus(u))
        return x, logjac

    def unconstrain(x):
        s = (jnp.asarray(x, dtype=jnp.float64) - lo) / width
        return jnp.log(s) - jnp.log1p(-s)

    return BlockSpec(dim, constrain, unconstrain)


def mixed_block(specs: list[BlockSpec]) -> BlockSpec:
    """Concatenate per-scalar (or per-slice) bijections into one block."""
    dims = [s.dim for s in specs]
    offsets = np.concatenate([[0], np.cumsum(dims)])

    def constrain(u):
        xs, logjac = [], 0.0
        for s, a, b in zip(specs, offsets[:-1], offsets[1:]):
            x, lj = s.constrain(u[a:b])
            xs.append(x)
            logjac = logjac + lj
        return jnp.concatenate(xs), logjac

    def unconstrain(x):
        return jnp.concatenate(
            [s.unconstrain(x[a:b]) for s, a, b in zip(specs, offsets[:-1], offsets[1:])]
        )

    return BlockSpec(int(offsets[-1]), constrain, unconstrain)


# ---------------------------------------------------------------------------
# Hyperparameter points
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiPoint:
    """Named hyperparameter vector with per-component closed bounds."""

    names: tuple
    values: np.ndarray
    bounds: np.ndarray  # (d, 2)

    @classmethod
    def from_dict(cls, values: dict, names, bounds) -> "PsiPoint":
        names = tuple(names)
        missing = set(names) - set(values)
        if missing:
            raise ValueError(f"missing hyperparameter components: {sorted(missing)}")
        extra = set(values) - set(names)
        if extra:
            raise ValueError(f"unknown hyperparameter components: {sorted(extra)}")
        return cls(names, np.array([float(values[n]) for n in names]), np.asarray(bounds, float))

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def in_bounds(self) -> bool:
        return bool(
            np.all(self.values >= self.bounds[:, 0]) and np.all(self.values <= self.bounds[:, 1])
        )

    def component_violations(self) -> list[str]:
        return [
            n
            for n, v, (lo, hi) in zip(self.names, self.values, self.bounds)
            if not (lo <= v <= hi)
        ]


# ---------------------------------------------------------------------------
# Target model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TargetModel:
    """A posterior target: blocks, transforms and per-module log-density terms.

    ``delta`` is the shared/imputation block (None for single-module models);
    ``theta`` is the analysis block (the auxiliary copy shares its spec).
    All log terms take *constrained* values and a psi dict of scalars.
    """

    name: str
    psi_names: tuple
    psi_bounds: np.ndarray
    theta: BlockSpec
    delta: Optional[BlockSpec] = None
    log_prior_shared: Optional[Callable] = None  # (delta, psi) -> scalar
    log_prior_theta: Callable = None  # (theta, delta, psi) -> scalar
    log_lik_z: Optional[Callable] = None  # (delta) -> scalar
    log_lik_y: Callable = None  # (theta, delta) -> scalar
    loglik_y_terms: Optional[Callable] = None  # (theta, delta) -> (n,) vector
    loglik_z_terms: Optional[Callable] = None  # (delta) -> (m,) vector
    data: Any = None
    meta: dict = field(default_factory=dict)

    @property
    def is_modular(self) -> bool:
        return self.delta is not None

    def psi_point(self, values: dict) -> PsiPoint:
        return PsiPoint.from_dict(values, self.psi_names, self.psi_bounds)

    def psi_dict(self, vec) -> dict:
        return {n: vec[i] for i, n in enumerate(self.psi_names)}


def _psi_dict(psi, m: TargetModel) -> dict:
    if isinstance(psi, PsiPoint):
        return psi.as_dict()
    if isinstance(psi, dict):
        return psi
    return m.psi_dict(jnp.asarray(psi))


def gbi_log_joint(blocks: dict, psi, m: TargetModel):
    """Generalised-Bayes log-joint: -eta * loss + log-prior, with the loss the
    negative log-likelihood of all data modules. ``blocks`` holds constrained
    values keyed by block name."""
    p = _psi_dict(psi, m)
    eta = p.get("eta", 1.0)
    delta = blocks.get("delta")
    theta = blocks["theta"]
    ll = m.log_lik_y(theta, delta)
    if m.log_lik_z is not None:
        ll = ll + m.log_lik_z(delta)
    prior = m.log_prior_theta(theta, delta, p)
    if m.log_prior_shared is not None:
        prior = prior + m.log_prior_shared(delta, p)
    return _check_finite(eta * ll + prior, "GBI log-joint")


def smi_pow_log_target(delta, theta_tilde, psi, m: TargetModel):
    """Power posterior log-density: log p(Z|d) + eta*log p(Y|d,t~) + log-prior."""
    if not m.is_modular:
        raise ValueError(f"model {m.name!r} has no shared block")
    p = _psi_dict(psi, m)
    eta = p["eta"]
    val = (
        m.log_lik_z(delta)
        + eta * m.log_lik_y(theta_tilde, delta)
        + m.log_prior_shared(delta, p)
        + m.log_prior_theta(theta_tilde, delta, p)
    )
    return _check_finite(val, "power-posterior log-target")


def smi_analysis_log_target(theta, delta, psi, m: TargetModel):
    """Analysis-stage log-density in theta at fixed delta (unnormalised)."""
    if not m.is_modular:
        raise ValueError(f"model {m.name!r} has no shared block")
    p = _psi_dict(psi, m)
    val = m.log_lik_y(theta, delta) + m.log_prior_theta(theta, delta, p)
    return _check_finite(val, "analysis log-target")

"""Desk-scale anchor/float location model: a planar logistic field alpha
observed through 8 fixed Bernoulli probes per unit. Anchors have known
positions, floats (and held-out anchors) have latent positions in (0,1)^2.
The anchor module is treated as well specified; float observations may be
generated with an injected logit shift to mimic a misspecified float module."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import jax
import jax.numpy as jnp
import numpy as np

from .base import TargetModel, identity_block, sigmoid_block

__all__ = ["LocationData", "simulate_location_data", "make_location_model", "PROBE_SLOPES", "PROBE_OFFSETS"]

PROBE_SLOPES = np.array([1.0, -1.0, 0.5, -0.5, 2.0, -2.0, 1.5, -1.5])
PROBE_OFFSETS = np.array([0.0, 0.5, -0.5, 1.0, -1.0, 0.25, -0.25, 0.75])


@dataclass(frozen=True)
class LocationData:
    x_anchor: np.ndarray  # (nA, 2) known positions
    y_anchor: np.ndarray  # (nA, 8) binary observations
    y_float: np.ndarray  # (nF, 8)
    held_out: np.ndarray  # indices into anchors, treated as missing
    x_float_true: np.ndarray | None = None  # simulation truth, evaluation only
    alpha_true: np.ndarray | None = None
    float_logit_shift: float = 0.0

    def __post_init__(self):
        if self.x_anchor.shape[0] != self.y_anchor.shape[0]:
            raise ValueError("anchor positions / observations length mismatch")
        if len(set(self.held_out.tolist())) != len(self.held_out):
            raise ValueError("held-out indices must be distinct")
        if self.held_out.size and (self.held_out.min() < 0 or self.held_out.max() >= self.n_anchor):
            raise ValueError("held-out indices out of range")

    @property
    def n_anchor(self) -> int:
        return self.x_anchor.shape[0]

    @property
    def n_float(self) -> int:
        return self.y_float.shape[0]

    def to_json(self) -> str:
        def arr(a):
            return None if a is None else np.asarray(a).tolist()

        return json.dumps(
            {
                "x_anchor": arr(self.x_anchor),
                "y_anchor": arr(self.y_anchor),
                "y_float": arr(self.y_float),
                "held_out": arr(self.held_out),
                "x_float_true": arr(self.x_float_true),
                "alpha_true": arr(self.alpha_true),
                "float_logit_shift": self.float_logit_shift,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "LocationData":
        d = json.loads(text)

        def arr(key, dtype=float):
            return None if d[key] is None else np.asarray(d[key], dtype=dtype)

        return cls(
            x_anchor=arr("x_anchor"),
            y_anchor=arr("y_anchor", int),
            y_float=arr("y_float", int),
            held_out=arr("held_out", int),
            x_float_true=arr("x_float_true"),
            alpha_true=arr("alpha_true"),
            float_logit_shift=float(d["float_logit_shift"]),
        )


def _probe_logits(x, alpha):
    t = x @ alpha[:2] + alpha[2]
    return PROBE_SLOPES[None, :] * np.asarray(t)[:, None] + PROBE_OFFSETS[None, :]


def simulate_location_data(
    rng: np.random.Generator,
    n_anchor: int = 30,
    n_float: int = 20,
    alpha: np.ndarray | None = None,
    n_held_out: int = 5,
    float_logit_shift: float = 0.0,
) -> LocationData:
    """Generate anchors from the true model and floats with an optional logit
    shift (the injected float-module misspecification)."""
    alpha = np.array([4.0, -3.0, -0.5]) if alpha is None else np.asarray(alpha, float)
    x_a = rng.uniform(size=(n_anchor, 2))
    x_f = rng.uniform(size=(n_float, 2))
    p_a = 1 / (1 + np.exp(-_probe_logits(x_a, alpha)))
    p_f = 1 / (1 + np.exp(-(_probe_logits(x_f, alpha) + float_logit_shift)))
    y_a = rng.binomial(1, p_a)
    y_f = rng.binomial(1, p_f)
    held = rng.choice(n_anchor, size=n_held_out, replace=False) if n_held_out else np.array([], int)
    return LocationData(
        x_anchor=x_a,
        y_anchor=y_a,
        y_float=y_f,
        held_out=np.sort(held),
        x_float_true=x_f,
        alpha_true=alpha,
        float_logit_shift=float_logit_shift,
    )


def make_location_model(data: LocationData) -> TargetModel:
    """Build the SMI target. Latent units are the floats followed by the
    held-out anchors; their positions form the analysis block (2 coords each,
    sigmoid-constrained to (0,1)). The shared block is alpha."""
    if data.n_anchor < 2:
        raise ValueError("need at least 2 anchors")
    keep = np.setdiff1d(np.arange(data.n_anchor), data.held_out)
    x_known = jnp.asarray(data.x_anchor[keep])
    y_known = jnp.asarray(data.y_anchor[keep], dtype=jnp.float64)
    y_latent = jnp.asarray(
        np.concatenate([data.y_float, data.y_anchor[data.held_out]], axis=0), dtype=jnp.float64
    )
    n_latent = int(y_latent.shape[0])
    slopes = jnp.asarray(PROBE_SLOPES)
    offsets = jnp.asarray(PROBE_OFFSETS)

    def bern_terms(x, alpha, y):
        t = x @ alpha[:2] + alpha[2]
        logits = slopes[None, :] * t[:, None] + offsets[None, :]
        ll = y * logits - jax.nn.softplus(logits)  # log sigmoid(l)^y (1-sigmoid)^1-y
        return jnp.sum(ll, axis=1)

    def log_prior_shared(delta, psi):
        sa = psi["sa"]
        return jnp.sum(-0.5 * jnp.log(2 * jnp.pi) - jnp.log(sa) - 0.5 * (delta / sa) ** 2)

    def log_prior_theta(theta, delta, psi):
        return 0.0  # uniform on the unit square; transform jacobian handled upstream

    def loglik_z_terms(delta):
        return bern_terms(x_known, delta, y_known)

    def loglik_y_terms(theta, delta):
        x = theta.reshape(n_latent, 2)
        return bern_terms(x, delta, y_latent)

    return TargetModel(
        name="location",
        psi_names=("eta", "sa"),
        psi_bounds=np.array([[0.0, 1.0], [0.3, 10.0]]),
        delta=identity_block(3),
        theta=sigmoid_block(2 * n_latent),
        log_prior_shared=log_prior_shared,
        log_prior_theta=log_prior_theta,
        log_lik_z=lambda delta: jnp.sum(loglik_z_terms(delta)),
        log_lik_y=lambda theta, delta: jnp.sum(loglik_y_terms(theta, delta)),
        loglik_y_terms=loglik_y_terms,
        loglik_z_terms=loglik_z_terms,
        data=data,
        meta={
            "n_latent": n_latent,
            "n_float": int(data.n_float),
            "held_out_slice": [int(data.n_float), n_latent],
        },
    )

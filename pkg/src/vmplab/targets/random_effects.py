"""Gaussian random-effects model (pure Bayes, no learning rate): group means
with a normal prior, group standard deviations with an inverse-gamma prior."""

from __future__ import annotations

from dataclasses import dataclass

import jax.numpy as jnp
import numpy as np
from jax.scipy.special import gammaln

from .base import TargetModel, identity_block, mixed_block, softplus_block

__all__ = ["RandomEffectsData", "simulate_random_effects", "make_random_effects_model"]

PSI_TRUE = {"m": 0.0, "s": 1.0, "g1": 1.5, "g2": 0.5}


@dataclass(frozen=True)
class RandomEffectsData:
    Y: np.ndarray  # (I, J) observations, column j is group j

    def __post_init__(self):
        if self.Y.ndim != 2 or self.Y.size == 0:
            raise ValueError("Y must be a non-empty I x J matrix")
        if not np.all(np.isfinite(self.Y)):
            raise ValueError("Y must be finite")

    @property
    def I(self) -> int:
        return self.Y.shape[0]

    @property
    def J(self) -> int:
        return self.Y.shape[1]


def simulate_random_effects(rng: np.random.Generator, I: int, J: int, psi: dict | None = None) -> RandomEffectsData:
    """Draw data from the generative process; sigma_j ~ InvGamma(g1, scale=g2)."""
    p = dict(PSI_TRUE, **(psi or {}))
    mu = rng.normal(p["m"], p["s"], size=J)
    sigma = p["g2"] / rng.gamma(p["g1"], 1.0, size=J)
    Y = rng.normal(mu[None, :], sigma[None, :], size=(I, J))
    return RandomEffectsData(Y=Y)


def make_random_effects_model(data: RandomEffectsData) -> TargetModel:
    Y = jnp.asarray(data.Y, dtype=jnp.float64)
    I, J = data.I, data.J

    def log_prior_theta(theta, delta, psi):
        mu, sigma = theta[:J], theta[J:]
        m, s, g1, g2 = psi["m"], psi["s"], psi["g1"], psi["g2"]
        lp_mu = jnp.sum(-0.5 * jnp.log(2 * jnp.pi) - jnp.log(s) - 0.5 * ((mu - m) / s) ** 2)
        # inverse-gamma with shape g1, scale g2
        lp_sig = jnp.sum(g1 * jnp.log(g2) - gammaln(g1) - (g1 + 1) * jnp.log(sigma) - g2 / sigma)
        return lp_mu + lp_sig

    def loglik_y_terms(theta, delta):
        mu, sigma = theta[:J], theta[J:]
        terms = -0.5 * jnp.log(2 * jnp.pi) - jnp.log(sigma)[None, :] - 0.5 * ((Y - mu[None, :]) / sigma[None, :]) ** 2
        return terms.reshape(-1)

    return TargetModel(
        name="random_effects",
        psi_names=("m", "s", "g1", "g2"),
        psi_bounds=np.array([[-5.0, 5.0], [0.05, 10.0], [0.05, 10.0], [0.05, 10.0]]),
        theta=mixed_block([identity_block(J), softplus_block(J)]),
        log_prior_theta=log_prior_theta,
        log_lik_y=lambda theta, delta: jnp.sum(loglik_y_terms(theta, delta)),
        loglik_y_terms=loglik_y_terms,
        data=data,
        # each coupling layer conditions half the 2J-dim block plus psi
        # through one MLP; the default width starves it
        meta={"I": I, "J": J, "flow_width": 32},
    )

"""Tiny conjugate Gaussian target used as an analytic oracle in tests: prior
N(mu0, s0^2), one observation y with unit noise."""

from __future__ import annotations

import numpy as np
import jax.numpy as jnp

from .base import TargetModel, identity_block

__all__ = ["make_conjugate_gaussian_model", "conjugate_posterior", "conjugate_log_evidence"]


def make_conjugate_gaussian_model(y: float = 1.0) -> TargetModel:
    def log_prior_theta(theta, delta, psi):
        mu0, s0 = psi["mu0"], psi["s0"]
        return -0.5 * jnp.log(2 * jnp.pi) - jnp.log(s0) - 0.5 * ((theta[0] - mu0) / s0) ** 2

    def loglik_y_terms(theta, delta):
        return jnp.array([-0.5 * jnp.log(2 * jnp.pi) - 0.5 * (y - theta[0]) ** 2])

    return TargetModel(
        name="conjugate_gaussian",
        psi_names=("mu0", "s0"),
        psi_bounds=np.array([[-3.0, 3.0], [0.2, 5.0]]),
        theta=identity_block(1),
        log_prior_theta=log_prior_theta,
        log_lik_y=lambda theta, delta: jnp.sum(loglik_y_terms(theta, delta)),
        loglik_y_terms=loglik_y_terms,
        data={"y": y},
    )


def conjugate_posterior(y: float, mu0: float, s0: float) -> tuple[float, float]:
    prec = 1 / s0**2 + 1.0
    mean = (mu0 / s0**2 + y) / prec
    return mean, 1 / np.sqrt(prec)


def conjugate_log_evidence(y: float, mu0: float, s0: float) -> float:
    var = s0**2 + 1.0
    return float(-0.5 * np.log(2 * np.pi * var) - 0.5 * (y - mu0) ** 2 / var)

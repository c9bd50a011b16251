"""Two-module epidemiological model: Binomial prevalence surveys (Z) and
Poisson cancer incidence (Y) over 13 countries, with Beta / Normal / Gamma
priors. The survey module is treated as well specified, the incidence module
as suspect."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jax.numpy as jnp
import numpy as np
from jax.scipy.special import gammaln

from .base import TargetModel, identity_block, mixed_block, sigmoid_block, softplus_block

__all__ = ["HpvData", "load_hpv_data", "make_hpv_model"]

# theta2 prior is Gamma(shape=g1, rate=g2); the fixed defaults give mean 10
FIXED_HYPERS = {"m": 0.0, "s": 100.0, "g1": 1.0, "g2": 0.1}


@dataclass(frozen=True)
class HpvData:
    country: tuple
    Z: np.ndarray  # HPV-positive count per country
    N: np.ndarray  # survey sample size
    Y: np.ndarray  # cancer count
    T: np.ndarray  # woman-years

    def __post_init__(self):
        if len(self.country) != 13:
            raise ValueError(f"expected 13 countries, got {len(self.country)}")
        if np.any(self.Z < 0) or np.any(self.Z > self.N):
            raise ValueError("need 0 <= Z <= N")
        if np.any(self.Y < 0):
            raise ValueError("need Y >= 0")
        if np.any(self.T <= 0):
            raise ValueError("need T > 0")

    @property
    def n(self) -> int:
        return len(self.country)


def load_hpv_data(path: str | Path | None = None) -> HpvData:
    """Read the bundled (or a user-supplied) 13-row CSV with columns
    country, Z, N, Y, T."""
    if path is None:
        src = resources.files("vmplab.data").joinpath("hpv.csv").read_text(encoding="utf-8")
        rows = list(csv.DictReader(src.splitlines()))
    else:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    if not rows or set(rows[0]) < {"country", "Z", "N", "Y", "T"}:
        raise ValueError("HPV CSV needs a header with columns country,Z,N,Y,T")
    return HpvData(
        country=tuple(r["country"] for r in rows),
        Z=np.array([int(r["Z"]) for r in rows]),
        N=np.array([int(r["N"]) for r in rows]),
        Y=np.array([int(r["Y"]) for r in rows]),
        T=np.array([float(r["T"]) for r in rows]),
    )


def _delta_ctx(data: HpvData) -> dict:
    p = np.clip(data.Z / data.N, 1e-3, 1 - 1e-3)
    return {
        "shift": p,
        "scale": np.maximum(np.sqrt(p * (1 - p) / data.N), 1e-3),
    }


def make_hpv_model(data: HpvData | None = None, fixed: dict | None = None) -> TargetModel:
    data = data or load_hpv_data()
    fx = dict(FIXED_HYPERS, **(fixed or {}))
    Z = jnp.asarray(data.Z, dtype=jnp.float64)
    N = jnp.asarray(data.N, dtype=jnp.float64)
    Y = jnp.asarray(data.Y, dtype=jnp.float64)
    # exposure enters in thousands of woman-years, keeping theta1 near zero
    logT = jnp.log(jnp.asarray(data.T, dtype=jnp.float64) / 1000.0)
    binom_const = gammaln(N + 1) - gammaln(Z + 1) - gammaln(N - Z + 1)

    def log_prior_shared(delta, psi):
        c1, c2 = psi["c1"], psi["c2"]
        beta_norm = gammaln(c1 + c2) - gammaln(c1) - gammaln(c2)
        return jnp.sum((c1 - 1) * jnp.log(delta) + (c2 - 1) * jnp.log1p(-delta) + beta_norm)

    def log_prior_theta(theta, delta, psi):
        t1, t2 = theta[0], theta[1]
        lp1 = -0.5 * jnp.log(2 * jnp.pi) - jnp.log(fx["s"]) - 0.5 * ((t1 - fx["m"]) / fx["s"]) ** 2
        g1, g2 = fx["g1"], fx["g2"]
        lp2 = g1 * jnp.log(g2) - gammaln(g1) + (g1 - 1) * jnp.log(t2) - g2 * t2
        return lp1 + lp2

    def loglik_z_terms(delta):
        return Z * jnp.log(delta) + (N - Z) * jnp.log1p(-delta) + binom_const

    def loglik_y_terms(theta, delta):
        log_mu = logT + theta[0] + theta[1] * delta
        return Y * log_mu - jnp.exp(log_mu) - gammaln(Y + 1)

    return TargetModel(
        name="hpv",
        psi_names=("eta", "c1", "c2"),
        psi_bounds=np.array([[0.0, 1.0], [0.1, 15.0], [0.1, 15.0]]),
        delta=sigmoid_block(data.n),
        theta=mixed_block([identity_block(1), softplus_block(1)]),
        log_prior_shared=log_prior_shared,
        log_prior_theta=log_prior_theta,
        log_lik_z=lambda delta: jnp.sum(loglik_z_terms(delta)),
        log_lik_y=lambda theta, delta: jnp.sum(loglik_y_terms(theta, delta)),
        loglik_y_terms=loglik_y_terms,
        loglik_z_terms=loglik_z_terms,
        data=data,
        # wide theta spline box: the analysis-posterior slope sits near 10-17
        # with a broad cut-limit tail, far outside the default +-5 interval
        # whose identity tails cannot carry mass there. The prevalences stay
        # within a few logit units, so the shared block keeps a tight box.
        # The wider conditioner keeps the theta flow responsive to its 16-dim
        # (delta, psi) context.
        meta={
            "fixed": fx,
            "flow_interval": {"delta": 8.0, "theta": 32.0},
            "flow_width": 32,
            # standardizer for the prevalence block when it enters another
            # flow's context: posterior location/scale are survey-dominated,
            # so Z/N and its binomial standard error put the context on an
            # O(1) scale the conditioners can actually respond to
            "delta_ctx": _delta_ctx(data),
            # the incidence counts are so informative that even eta ~ 0.02
            # moves the posterior several sd away from the cut limit; on a
            # log scale in eta that motion is gradual enough for the
            # conditioners to track
            "psi_feat": lambda v: jnp.concatenate([jnp.log(v[:1] + 0.01), v[1:]]),
        },
    )

"""Reference samplers used to validate the variational fits: an adaptive
random-walk Metropolis chain on an unconstrained log-density, and the nested
scheme for modular posteriors (outer chain on the power posterior, inner
warm-started chains on the analysis target)."""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .targets.base import TargetModel, smi_analysis_log_target, smi_pow_log_target

__all__ = ["ChainConfig", "ChainResult", "rwm", "nested_smi_mcmc", "save_samples_csv"]


@dataclass(frozen=True)
class ChainConfig:
    n_samples: int = 2000
    burn_in: int = 2000
    thin: int = 1
    step_size: float = 0.25
    target_accept: float = 0.25
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.burn_in < 0 or self.thin < 1:
            raise ValueError("bad chain sizes")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")


@dataclass(frozen=True)
class ChainResult:
    samples: np.ndarray  # (n_samples, dim), unconstrained coordinates
    accept_rate: float
    step_size: float
    scales: np.ndarray  # per-coordinate proposal scales frozen after burn-in


def _adapt(step, accepted, target):
    # stochastic-approximation tweak toward the target acceptance rate
    return step * np.exp(0.05 * ((1.0 if accepted else 0.0) - target))


def rwm(log_density, x0, cfg: ChainConfig) -> ChainResult:
    """Adaptive random-walk Metropolis. During burn-in both a global step size
    and per-coordinate proposal scales (running posterior sd, Haario-style
    diagonal preconditioner) adapt; the kept samples come from a fixed kernel.
    Without the preconditioner a single isotropic step collapses to the
    smallest posterior scale and the wide coordinates barely move."""
    logp = jax.jit(log_density)
    x = np.asarray(x0, float)
    lp = float(logp(jnp.asarray(x)))
    if not np.isfinite(lp):
        raise ValueError("initial point has non-finite log-density")
    rng = np.random.default_rng(cfg.seed)
    step = cfg.step_size
    scales = np.ones(x.size)
    mean = x.copy()
    m2 = np.zeros(x.size)
    total = cfg.burn_in + cfg.n_samples * cfg.thin
    out = np.empty((cfg.n_samples, x.size))
    accepts = 0
    kept = 0
    for t in range(total):
        prop = x + step * scales * rng.standard_normal(x.size)
        lp_prop = float(logp(jnp.asarray(prop)))
        if np.log(rng.uniform()) < lp_prop - lp:
            x, lp = prop, lp_prop
            accepted = True
        else:
            accepted = False
        if t < cfg.burn_in:
            step = _adapt(step, accepted, cfg.target_accept)
            d = x - mean
            mean += d / (t + 1)
            m2 += d * (x - mean)
            # refresh the preconditioner periodically once some history exists
            if t >= 99 and t % 100 == 99:
                sd = np.sqrt(m2 / t)
                scales = np.maximum(sd / max(sd.max(), 1e-300), 1e-3)
        else:
            accepts += accepted
            if (t - cfg.burn_in) % cfg.thin == cfg.thin - 1:
                out[kept] = x
                kept += 1
    return ChainResult(
        samples=out,
        accept_rate=accepts / (cfg.n_samples * cfg.thin),
        step_size=step,
        scales=scales,
    )


def nested_smi_mcmc(
    m: TargetModel,
    psi,
    cfg: ChainConfig,
    inner_steps: int = 50,
    inner_step_size: float | None = None,  # multiplier on the adapted scales
) -> dict:
    """Sample a modular posterior by running the outer chain on the power
    posterior over (delta, theta_tilde) and, for each kept outer draw, a short
    warm-started inner chain on the analysis target for theta.

    Returns unconstrained draws: {"delta": (n, dd), "theta": (n, dt),
    "theta_tilde": (n, dt)}."""
    if not m.is_modular:
        raise ValueError(f"model {m.name!r} has no shared block")
    from .vtrain import _as_psi_vec

    psi_vec = np.asarray(_as_psi_vec(psi, m))
    psi_d = {n: float(v) for n, v in zip(m.psi_names, psi_vec)}
    dd, dt = m.delta.dim, m.theta.dim

    def pow_logp(u):
        delta, lj_d = m.delta.constrain(u[:dd])
        ttil, lj_t = m.theta.constrain(u[dd:])
        return smi_pow_log_target(delta, ttil, psi_d, m) + lj_d + lj_t

    outer = rwm(pow_logp, np.zeros(dd + dt), cfg)

    def analysis_logp(tu, du):
        delta, _ = m.delta.constrain(du)
        theta, lj = m.theta.constrain(tu)
        return smi_analysis_log_target(theta, delta, psi_d, m) + lj

    inner_logp = jax.jit(analysis_logp)
    rng = np.random.default_rng(cfg.seed + 1)
    # analysis-target theta lives on the same scales as the outer theta_tilde
    inner_scales = outer.scales[dd:] * outer.step_size
    step = inner_step_size if inner_step_size is not None else 1.0
    theta_out = np.empty((cfg.n_samples, dt))
    warm = None
    accepts = 0
    for i in range(cfg.n_samples):
        du = jnp.asarray(outer.samples[i, :dd])
        # warm start from the previous inner endpoint, falling back to the
        # outer auxiliary draw
        tu = outer.samples[i, dd:].copy() if warm is None else warm.copy()
        lp = float(inner_logp(jnp.asarray(tu), du))
        if not np.isfinite(lp):
            tu = outer.samples[i, dd:].copy()
            lp = float(inner_logp(jnp.asarray(tu), du))
        for _ in range(inner_steps):
            prop = tu + step * inner_scales * rng.standard_normal(dt)
            lp_prop = float(inner_logp(jnp.asarray(prop), du))
            if np.log(rng.uniform()) < lp_prop - lp:
                tu, lp = prop, lp_prop
                accepts += 1
        theta_out[i] = tu
        warm = tu
    return {
        "delta": outer.samples[:, :dd],
        "theta_tilde": outer.samples[:, dd:],
        "theta": theta_out,
        "outer_accept_rate": outer.accept_rate,
        "inner_accept_rate": accepts / (cfg.n_samples * inner_steps),
    }


def save_samples_csv(path, samples: np.ndarray, names):
    import csv

    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[1] != len(names):
        raise ValueError("samples must be (n, len(names))")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(names))
        for row in samples:
            w.writerow([repr(float(x)) for x in row])

"""Loss-based hyperparameter selection on top of a trained amortised flow:
criterion surfaces (amortised ELBO, leave-one-out predictive density, held-out
mean squared error) that stay differentiable in the hyperparameters, and a
projected multi-start SGD over them."""

from __future__ import annotations

from dataclasses import dataclass

import jax
import jax.numpy as jnp
import numpy as np

from .flows import BlockFlowState, FlowState
from .targets.base import TargetModel
from .vtrain import _as_psi_vec, make_elbo_fn, make_smi_elbo_fns

__all__ = [
    "CRITERIA",
    "OptimizeConfig",
    "PsiOptResult",
    "make_criterion_fn",
    "criterion_value",
    "elpd_loocv",
    "pmse_lmo",
    "optimize_psi",
    "save_opt_trace_csv",
]

CRITERIA = ("elbo", "elpd_y", "elpd_z", "pmse")


def _draw_joint(state, m: TargetModel, psi_vec, key, n_mc):
    """Reparameterised draws of (theta, delta) at psi; delta is None for
    single-block models. Differentiable in psi_vec."""
    from .vtrain import _fs_apply, psi_features

    pf = psi_features(m, psi_vec)
    if isinstance(state, BlockFlowState):
        k1, k2 = jax.random.split(key)
        dd = m.delta.dim
        eps1 = jax.random.normal(k1, (n_mc, dd), dtype=jnp.float64)
        eps2 = jax.random.normal(k2, (n_mc, m.theta.dim), dtype=jnp.float64)

        def one(e1, e2):
            du, _ = _fs_apply(state.f1, state.f1.params, e1, pf)
            delta, _ = m.delta.constrain(du)
            tu, _ = _fs_apply(
                state.f2, state.f2.params, e2, jnp.concatenate([delta, pf])
            )
            theta, _ = m.theta.constrain(tu)
            return theta, delta

        return jax.vmap(one)(eps1, eps2)
    dd = m.delta.dim if m.is_modular else 0
    eps = jax.random.normal(key, (n_mc, state.config.dim), dtype=jnp.float64)

    def one(e):
        u, _ = _fs_apply(state, state.params, e, pf)
        delta = m.delta.constrain(u[:dd])[0] if dd else None
        theta, _ = m.theta.constrain(u[dd:])
        return (theta, delta) if dd else (theta, jnp.zeros(0))

    return jax.vmap(one)(eps)


def make_criterion_fn(state, m: TargetModel, criterion: str, n_mc: int, key):
    """Return a deterministic, differentiable map psi_vec -> loss (lower is
    better) with the Monte-Carlo noise frozen, so finite differences and
    analytic gradients see the same randomness."""
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}, got {criterion!r}")

    if criterion == "elbo":
        if isinstance(state, BlockFlowState):
            s1, s2 = make_smi_elbo_fns(state, m)
            k1, k2 = jax.random.split(key)

            def f(psi_vec):
                e1 = jnp.mean(s1(state.f1.params, state.f3.params, psi_vec, k1, n_mc))
                e2 = jnp.mean(s2(state.f2.params, state.f1.params, psi_vec, k2, n_mc))
                return -(e1 + e2)

            return f
        elbo_fn = make_elbo_fn(state, m)

        def f(psi_vec):
            return -jnp.mean(elbo_fn(state.params, psi_vec, key, n_mc))

        return f

    if criterion in ("elpd_y", "elpd_z"):
        if criterion == "elpd_z" and m.loglik_z_terms is None:
            raise ValueError(f"model {m.name!r} has no suspect-free module terms")

        def f(psi_vec):
            theta, delta = _draw_joint(state, m, psi_vec, key, n_mc)
            if criterion == "elpd_y":
                terms = jax.vmap(lambda t, d: m.loglik_y_terms(t, d))(theta, delta)
            else:
                terms = jax.vmap(lambda d: m.loglik_z_terms(d))(delta)
            # plug-in predictive: log mean_s p(obs_i | draw_s)
            lpd = jax.scipy.special.logsumexp(terms, axis=0) - jnp.log(n_mc)
            return -jnp.sum(lpd)

        return f

    # pmse: held-out squared position error, needs the model to declare which
    # slice of theta is held out and the matching truth
    sl = m.meta.get("held_out_slice")
    if sl is None:
        raise ValueError(f"model {m.name!r} declares no held-out block for pmse")
    lo, hi = int(sl[0]), int(sl[1])
    truth = jnp.asarray(m.data.x_anchor[m.data.held_out])

    def f(psi_vec):
        theta, _ = _draw_joint(state, m, psi_vec, key, n_mc)
        pos = theta[:, 2 * lo : 2 * hi].reshape(n_mc, hi - lo, 2)
        return jnp.mean(jnp.sum((pos - truth[None]) ** 2, axis=-1))

    return f


def criterion_value(state, m, criterion, psi, n_mc, rng) -> float:
    key = rng if isinstance(rng, jax.Array) else jax.random.PRNGKey(int(rng))
    f = make_criterion_fn(state, m, criterion, n_mc, key)
    v = float(f(jnp.asarray(_as_psi_vec(psi, m))))
    if not np.isfinite(v):
        raise FloatingPointError(f"criterion {criterion!r} is non-finite at psi={psi}")
    return v


def elpd_loocv(state, m: TargetModel, psi, n_mc: int, rng, module: str = "y") -> float:
    """Leave-one-out expected log predictive density (plug-in over posterior
    draws), higher is better. Errors out if any observation underflows for
    every draw."""
    key = rng if isinstance(rng, jax.Array) else jax.random.PRNGKey(int(rng))
    psi_vec = jnp.asarray(_as_psi_vec(psi, m))
    theta, delta = _draw_joint(state, m, psi_vec, key, n_mc)
    if module == "y":
        terms = jax.vmap(lambda t, d: m.loglik_y_terms(t, d))(theta, delta)
    elif module == "z":
        if m.loglik_z_terms is None:
            raise ValueError(f"model {m.name!r} has no second module")
        terms = jax.vmap(lambda d: m.loglik_z_terms(d))(delta)
    else:
        raise ValueError("module must be 'y' or 'z'")
    terms = np.asarray(terms)
    dead = ~np.any(np.isfinite(terms), axis=0)
    if np.any(dead):
        raise FloatingPointError(
            f"{int(dead.sum())} observations underflow for every posterior draw"
        )
    from scipy.special import logsumexp

    return float(np.sum(logsumexp(terms, axis=0) - np.log(n_mc)))


def pmse_lmo(state, m: TargetModel, psi, n_mc: int, rng) -> float:
    """Mean squared error of held-out positions under the posterior, lower is
    better."""
    key = rng if isinstance(rng, jax.Array) else jax.random.PRNGKey(int(rng))
    f = make_criterion_fn(state, m, "pmse", n_mc, key)
    v = float(f(jnp.asarray(_as_psi_vec(psi, m))))
    if not np.isfinite(v):
        raise FloatingPointError("pmse is non-finite")
    return v


@dataclass(frozen=True)
class OptimizeConfig:
    starts: int = 4
    iterations: int = 300
    lr: float = 0.05
    lr_decay: float = 0.1
    n_mc: int = 64
    seed: int = 0
    tail: int = 20  # psi_hat averages the final iterations of the best start
    # search box, defaults to the model's psi bounds; restrict it to the
    # support of the training distribution when that was narrower
    bounds: tuple | None = None

    def __post_init__(self):
        if self.starts < 1 or self.iterations < 1:
            raise ValueError("starts and iterations must be positive")
        if self.tail < 1:
            raise ValueError("tail must be positive")


@dataclass(frozen=True)
class PsiOptResult:
    psi_hat: dict
    loss: float
    best_start: int
    start_points: np.ndarray  # (starts, d)
    traces: np.ndarray  # (starts, iterations, 1 + d): loss then psi
    psi_names: tuple


def optimize_psi(state, m: TargetModel, criterion: str, cfg: OptimizeConfig) -> PsiOptResult:
    """Multi-start projected SGD on a criterion surface. Starts are spread
    uniformly over the psi box; steps are preconditioned by the squared box
    half-widths so all components move on comparable scales."""
    bounds = np.asarray(cfg.bounds if cfg.bounds is not None else m.psi_bounds, float)
    mb = np.asarray(m.psi_bounds, float)
    if bounds.shape != mb.shape or np.any(bounds[:, 0] < mb[:, 0]) or np.any(bounds[:, 1] > mb[:, 1]):
        raise ValueError("search box must lie inside the model's psi bounds")
    scale = np.maximum((bounds[:, 1] - bounds[:, 0]) / 2, 1e-12)
    scale2 = jnp.asarray(scale**2)
    lo, hi = jnp.asarray(bounds[:, 0]), jnp.asarray(bounds[:, 1])
    d = len(m.psi_names)
    master = jax.random.PRNGKey(cfg.seed)
    start_key, crn_key = jax.random.split(master)
    starts = np.asarray(
        jax.random.uniform(start_key, (cfg.starts, d), dtype=jnp.float64)
    ) * (bounds[:, 1] - bounds[:, 0]) + bounds[:, 0]

    def loss_fn(psi_vec, key):
        return make_criterion_fn(state, m, criterion, cfg.n_mc, key)(psi_vec)

    grad_fn = jax.jit(jax.value_and_grad(loss_fn))

    def run_start(s):
        psi = jnp.asarray(starts[s])
        rows = np.empty((cfg.iterations, 1 + d))
        for t in range(cfg.iterations):
            key = jax.random.fold_in(crn_key, t)  # shared across starts
            val, g = grad_fn(psi, key)
            lr = cfg.lr * cfg.lr_decay ** (t / cfg.iterations)
            step = lr * scale2 * g
            if bool(jnp.all(jnp.isfinite(step))):
                psi = jnp.clip(psi - step, lo, hi)
            rows[t, 0] = float(val)
            rows[t, 1:] = np.asarray(psi)
        return rows

    traces = np.stack([run_start(s) for s in range(cfg.starts)])
    tail = min(cfg.tail, cfg.iterations)
    final = traces[:, -tail:, 0].mean(axis=1)
    best = int(np.argmin(final))
    psi_hat_vec = traces[best, -tail:, 1:].mean(axis=0)
    psi_hat_vec = np.clip(psi_hat_vec, bounds[:, 0], bounds[:, 1])
    return PsiOptResult(
        psi_hat={n: float(v) for n, v in zip(m.psi_names, psi_hat_vec)},
        loss=float(final[best]),
        best_start=best,
        start_points=starts,
        traces=traces,
        psi_names=tuple(m.psi_names),
    )


def save_opt_trace_csv(path, result: PsiOptResult):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["start_id", "iteration", "loss", *result.psi_names])
        for s in range(result.traces.shape[0]):
            for t in range(result.traces.shape[1]):
                w.writerow([s, t] + [repr(float(x)) for x in result.traces[s, t]])

"""Reverse-mode differentiation utilities used by every objective in this package.

All arithmetic is 64-bit. Objectives are scalar functions of a flat parameter
vector built from jax.numpy primitives; gradients with respect to flow
parameters and hyperparameters flow through conditioner inputs like any other
leaf.
"""

from __future__ import annotations

from typing import Callable

import jax
import jax.numpy as jnp
import numpy as np

__all__ = ["NonFiniteError", "value_and_grad", "check_gradient", "stop_gradient"]


class NonFiniteError(RuntimeError):
    """Raised when an objective or its gradient produces a non-finite value."""


def stop_gradient(x):
    """Block adjoint flow through ``x``; backward pass sees a constant."""
    return jax.lax.stop_gradient(x)


def value_and_grad(objective: Callable, x) -> tuple[float, np.ndarray]:
    """Evaluate a scalar objective and its gradient at a flat vector ``x``.

    Deterministic given identical inputs. Raises :class:`NonFiniteError` if the
    value or any gradient component is non-finite, naming the offending output.
    """
    x = jnp.asarray(x, dtype=jnp.float64)
    if not bool(jnp.all(jnp.isfinite(x))):
        raise NonFiniteError("input vector contains non-finite entries")
    value, grad = jax.value_and_grad(objective)(x)
    if not bool(jnp.isfinite(value)):
        raise NonFiniteError("objective value is non-finite")
    if not bool(jnp.all(jnp.isfinite(grad))):
        bad = np.flatnonzero(~np.isfinite(np.asarray(grad)))
        raise NonFiniteError(f"gradient is non-finite at components {bad[:8].tolist()}")
    return float(value), np.asarray(grad)


def check_gradient(objective: Callable, x, step: float = 1e-5) -> float:
    """Max relative error between the analytic gradient and central differences.

    Relative error per component is |analytic - fd| / (|fd| + 1e-12). The
    objective must be deterministic (use common random numbers for Monte-Carlo
    objectives).
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    _, grad = value_and_grad(objective, x)
    fd = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        fd[i] = (float(objective(jnp.asarray(xp))) - float(objective(jnp.asarray(xm)))) / (2 * step)
    return float(np.max(np.abs(grad - fd) / (np.abs(fd) + 1e-12)))

import jax.numpy as jnp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmplab.diffcore import NonFiniteError, check_gradient, stop_gradient, value_and_grad


def quadratic(x):
    return jnp.sum(x**2) + 3.0 * x[0]


def test_value_and_grad_quadratic():
    x = np.array([1.0, -2.0, 0.5])
    v, g = value_and_grad(quadratic, x)
    assert v == pytest.approx(1 + 4 + 0.25 + 3)
    np.testing.assert_allclose(g, 2 * x + np.array([3.0, 0, 0]), rtol=1e-12)


def test_value_and_grad_is_deterministic():
    x = np.linspace(-1, 1, 7)
    f = lambda z: jnp.sum(jnp.sin(z) * jnp.exp(z))
    v1, g1 = value_and_grad(f, x)
    v2, g2 = value_and_grad(f, x)
    assert v1 == v2
    np.testing.assert_array_equal(g1, g2)


def test_nonfinite_value_raises():
    with pytest.raises(NonFiniteError):
        value_and_grad(lambda x: jnp.log(x[0]), np.array([-1.0]))


def test_nonfinite_gradient_raises_and_names_component():
    # sqrt has an infinite derivative at 0 while the value stays finite
    with pytest.raises(NonFiniteError, match="components"):
        value_and_grad(lambda x: jnp.sqrt(x[0]) + x[1], np.array([0.0, 1.0]))


def test_nonfinite_input_raises():
    with pytest.raises(NonFiniteError):
        value_and_grad(quadratic, np.array([np.nan, 0.0, 0.0]))


def test_check_gradient_smooth_function():
    err = check_gradient(lambda x: jnp.sum(jnp.tanh(x) ** 2), np.array([0.3, -1.2, 2.0]))
    assert err < 1e-6


def test_check_gradient_detects_wrong_gradient():
    import jax

    @jax.custom_vjp
    def broken(x):
        return jnp.sum(x**2)

    broken.defvjp(lambda x: (jnp.sum(x**2), x), lambda res, g: (g * 3 * res,))
    err = check_gradient(broken, np.array([1.0, 2.0]))
    assert err > 0.1


def test_check_gradient_rejects_bad_step():
    with pytest.raises(ValueError):
        check_gradient(quadratic, np.zeros(2), step=0.0)


def test_stop_gradient_blocks_adjoint():
    f = lambda x: jnp.sum(stop_gradient(x) * x)
    _, g = value_and_grad(f, np.array([2.0, -1.0]))
    # d/dx [c * x] with c = x held constant
    np.testing.assert_allclose(g, [2.0, -1.0], rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False),
        min_size=1,
        max_size=5,
    )
)
def test_check_gradient_property_polynomials(xs):
    x = np.asarray(xs)
    f = lambda z: jnp.sum(z**3 - 2 * z)
    assert check_gradient(f, x, step=1e-5) < 1e-4

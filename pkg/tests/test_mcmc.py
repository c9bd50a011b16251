import jax.numpy as jnp
import numpy as np
import pytest
import scipy.stats as st

from vmplab.evalx import wasserstein_1d
from vmplab.mcmc import ChainConfig, nested_smi_mcmc, rwm, save_samples_csv


def test_chain_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(n_samples=0)
    with pytest.raises(ValueError):
        ChainConfig(step_size=-1.0)


def test_rwm_standard_normal_moments():
    res = rwm(lambda x: -0.5 * jnp.sum(x**2), np.zeros(2), ChainConfig(n_samples=4000, burn_in=1000, seed=0))
    assert abs(res.samples.mean()) < 0.1
    assert abs(res.samples.std() - 1.0) < 0.1
    assert 0.1 < res.accept_rate < 0.5


def test_rwm_adapts_toward_target_acceptance():
    # start with a hopeless step size; adaptation should rescue it
    cfg = ChainConfig(n_samples=2000, burn_in=3000, step_size=40.0, seed=1)
    res = rwm(lambda x: -0.5 * jnp.sum(x**2), np.zeros(1), cfg)
    assert 0.1 < res.accept_rate < 0.45
    assert res.step_size < 10.0


def test_rwm_matches_skewed_target():
    # 1-d gamma in log space; compare against quantile-matched draws
    shape = 3.0

    def logp(u):
        x = jnp.exp(u[0])
        return shape * u[0] - x  # log gamma(shape) density in log space (+const)

    res = rwm(logp, np.zeros(1), ChainConfig(n_samples=6000, burn_in=2000, seed=2))
    x = np.exp(res.samples[:, 0])
    ref = st.gamma(shape).ppf((np.arange(x.size) + 0.5) / x.size)
    assert wasserstein_1d(x, ref) < 0.15


def test_rwm_rejects_nonfinite_start():
    with pytest.raises(ValueError):
        rwm(lambda x: jnp.log(x[0]), np.array([-1.0]), ChainConfig(n_samples=10, burn_in=0))


def test_rwm_deterministic_given_seed():
    cfg = ChainConfig(n_samples=200, burn_in=100, seed=3)
    a = rwm(lambda x: -0.5 * jnp.sum(x**2), np.zeros(2), cfg)
    b = rwm(lambda x: -0.5 * jnp.sum(x**2), np.zeros(2), cfg)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_nested_requires_modular_model(conj_model):
    with pytest.raises(ValueError, match="shared block"):
        nested_smi_mcmc(conj_model, {"mu0": 0.0, "s0": 1.0}, ChainConfig(n_samples=5, burn_in=5))


def test_nested_output_shapes(hpv_model):
    out = nested_smi_mcmc(
        hpv_model,
        {"eta": 0.3, "c1": 1.0, "c2": 1.0},
        ChainConfig(n_samples=50, burn_in=50, seed=0),
        inner_steps=5,
    )
    assert out["delta"].shape == (50, 13)
    assert out["theta"].shape == (50, 2)
    assert out["theta_tilde"].shape == (50, 2)
    assert 0.0 <= out["outer_accept_rate"] <= 1.0


def test_save_samples_csv(tmp_path):
    p = tmp_path / "s.csv"
    save_samples_csv(p, np.array([[1.0, 2.0], [3.0, 4.0]]), ["a", "b"])
    lines = p.read_text().strip().splitlines()
    assert lines[0] == "a,b"
    assert len(lines) == 3
    with pytest.raises(ValueError):
        save_samples_csv(p, np.zeros((2, 3)), ["a", "b"])

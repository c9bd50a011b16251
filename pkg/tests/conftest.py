import jax
import numpy as np
import pytest

from vmplab.targets import make_conjugate_gaussian_model, make_hpv_model
from vmplab.vtrain import RhoSpec, TrainConfig, train_smi_vmp, train_vmp


@pytest.fixture(scope="session")
def conj_model():
    return make_conjugate_gaussian_model(1.0)


@pytest.fixture(scope="session")
def conj_vmp(conj_model):
    """Small amortised fit on the conjugate model, shared across fast tests."""
    cfg = TrainConfig(iterations=800, mc_samples=16, psi_batch=4, seed=0, lr_decay=0.02)
    fs, trace = train_vmp(conj_model, RhoSpec.uniform_over_bounds(conj_model), cfg)
    return fs, trace


@pytest.fixture(scope="session")
def hpv_model():
    return make_hpv_model()


@pytest.fixture(scope="session")
def hpv_smi_small(hpv_model):
    """Short SMI fit on the epidemiological model; coarse but usable."""
    rho = RhoSpec.uniform_over_bounds(hpv_model)
    cfg = TrainConfig(iterations=1200, mc_samples=8, psi_batch=4, seed=0, lr_decay=0.02)
    bfs, traces = train_smi_vmp(hpv_model, rho, cfg)
    return bfs, traces


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


@pytest.fixture()
def key():
    return jax.random.PRNGKey(0)

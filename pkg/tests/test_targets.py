import jax.numpy as jnp
import numpy as np
import pytest
import scipy.stats as st
from hypothesis import given, settings
from hypothesis import strategies as hst

from vmplab.targets import (
    PSI_TRUE,
    HpvData,
    LocationData,
    PsiPoint,
    RandomEffectsData,
    conjugate_log_evidence,
    conjugate_posterior,
    gbi_log_joint,
    identity_block,
    load_hpv_data,
    make_conjugate_gaussian_model,
    make_hpv_model,
    make_location_model,
    make_random_effects_model,
    mixed_block,
    sigmoid_block,
    simulate_location_data,
    simulate_random_effects,
    smi_analysis_log_target,
    smi_pow_log_target,
    softplus_block,
)

# ---------------------------------------------------------------------------
# Constraint transforms
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "block,u",
    [
        (identity_block(3), np.array([-1.0, 0.0, 2.0])),
        (softplus_block(2), np.array([-3.0, 1.5])),
        (sigmoid_block(2), np.array([-2.0, 0.7])),
        (sigmoid_block(1, 2.0, 5.0), np.array([0.3])),
        (mixed_block([identity_block(1), softplus_block(2)]), np.array([0.1, -1.0, 2.0])),
    ],
)
def test_transform_roundtrip(block, u):
    x, _ = block.constrain(jnp.asarray(u))
    u2 = block.unconstrain(x)
    np.testing.assert_allclose(np.asarray(u2), u, atol=1e-9)


def test_softplus_jacobian_matches_fd():
    block = softplus_block(1)
    u = 0.37
    h = 1e-6
    _, lj = block.constrain(jnp.array([u]))
    xp, _ = block.constrain(jnp.array([u + h]))
    xm, _ = block.constrain(jnp.array([u - h]))
    fd = (float(xp[0]) - float(xm[0])) / (2 * h)
    assert float(lj) == pytest.approx(np.log(fd), abs=1e-8)


def test_sigmoid_jacobian_matches_fd():
    block = sigmoid_block(1, -1.0, 3.0)
    u = -0.8
    h = 1e-6
    _, lj = block.constrain(jnp.array([u]))
    xp, _ = block.constrain(jnp.array([u + h]))
    xm, _ = block.constrain(jnp.array([u - h]))
    fd = (float(xp[0]) - float(xm[0])) / (2 * h)
    assert float(lj) == pytest.approx(np.log(fd), abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(hst.floats(min_value=-10, max_value=10, allow_nan=False))
def test_sigmoid_stays_in_bounds_property(u):
    x, _ = sigmoid_block(1, 0.2, 0.9).constrain(jnp.array([u]))
    assert 0.2 <= float(x[0]) <= 0.9


# ---------------------------------------------------------------------------
# PsiPoint
# ---------------------------------------------------------------------------


def test_psi_point_validation():
    names = ("a", "b")
    bounds = [[0, 1], [0, 2]]
    p = PsiPoint.from_dict({"a": 0.5, "b": 1.5}, names, bounds)
    assert p.in_bounds()
    assert p.as_dict() == {"a": 0.5, "b": 1.5}
    with pytest.raises(ValueError, match="missing"):
        PsiPoint.from_dict({"a": 0.5}, names, bounds)
    with pytest.raises(ValueError, match="unknown"):
        PsiPoint.from_dict({"a": 0.5, "b": 1.0, "c": 2.0}, names, bounds)
    bad = PsiPoint.from_dict({"a": -1.0, "b": 1.0}, names, bounds)
    assert not bad.in_bounds()
    assert bad.component_violations() == ["a"]


# ---------------------------------------------------------------------------
# Conjugate Gaussian model against closed forms
# ---------------------------------------------------------------------------


def test_conjugate_posterior_closed_form():
    mean, sd = conjugate_posterior(1.0, 0.0, 1.0)
    assert mean == pytest.approx(0.5)
    assert sd == pytest.approx(np.sqrt(0.5))


def test_conjugate_log_evidence_matches_scipy():
    assert conjugate_log_evidence(1.0, 0.0, 1.0) == pytest.approx(
        st.norm(0.0, np.sqrt(2.0)).logpdf(1.0)
    )


def test_conjugate_log_joint_matches_scipy():
    m = make_conjugate_gaussian_model(1.0)
    theta = jnp.array([0.3])
    psi = {"mu0": 0.5, "s0": 1.7}
    expected = st.norm(0.5, 1.7).logpdf(0.3) + st.norm(0.3, 1.0).logpdf(1.0)
    got = gbi_log_joint({"theta": theta}, psi, m)
    assert float(got) == pytest.approx(expected, abs=1e-12)


# ---------------------------------------------------------------------------
# Epidemiological two-module model
# ---------------------------------------------------------------------------


def test_hpv_data_loads_and_validates():
    d = load_hpv_data()
    assert d.n == 13
    assert np.all(d.Z <= d.N)
    with pytest.raises(ValueError):
        HpvData(
            country=d.country,
            Z=d.N + 1,  # Z > N is impossible
            N=d.N,
            Y=d.Y,
            T=d.T,
        )


def test_hpv_power_target_matches_scipy():
    d = load_hpv_data()
    m = make_hpv_model(d)
    rng = np.random.default_rng(0)
    delta = rng.uniform(0.05, 0.5, 13)
    theta = np.array([-1.2, 8.0])
    psi = {"eta": 0.6, "c1": 2.0, "c2": 3.0}
    llz = st.binom(d.N, delta).logpmf(d.Z).sum()
    lly = st.poisson(d.T / 1000 * np.exp(theta[0] + theta[1] * delta)).logpmf(d.Y).sum()
    prior = (
        st.beta(2.0, 3.0).logpdf(delta).sum()
        + st.norm(0.0, 100.0).logpdf(theta[0])
        + st.gamma(1.0, scale=10.0).logpdf(theta[1])
    )
    expected = llz + 0.6 * lly + prior
    got = smi_pow_log_target(jnp.asarray(delta), jnp.asarray(theta), psi, m)
    assert float(got) == pytest.approx(expected, rel=1e-10)
    # analysis stage drops the Z module and the delta prior
    got2 = smi_analysis_log_target(jnp.asarray(theta), jnp.asarray(delta), psi, m)
    expected2 = lly + st.norm(0.0, 100.0).logpdf(theta[0]) + st.gamma(1.0, scale=10.0).logpdf(theta[1])
    assert float(got2) == pytest.approx(expected2, rel=1e-10)


def test_hpv_eta_zero_drops_y_module():
    m = make_hpv_model()
    delta = jnp.full(13, 0.2)
    theta = jnp.array([0.0, 5.0])
    at0 = smi_pow_log_target(delta, theta, {"eta": 0.0, "c1": 1.0, "c2": 1.0}, m)
    at1 = smi_pow_log_target(delta, theta, {"eta": 1.0, "c1": 1.0, "c2": 1.0}, m)
    lly = float(m.log_lik_y(theta, delta))
    assert float(at1) - float(at0) == pytest.approx(lly, rel=1e-10)


# ---------------------------------------------------------------------------
# Random-effects model
# ---------------------------------------------------------------------------


def test_random_effects_log_joint_matches_scipy():
    rng = np.random.default_rng(1)
    data = simulate_random_effects(rng, 4, 3)
    m = make_random_effects_model(data)
    mu = np.array([0.2, -0.5, 1.0])
    sigma = np.array([0.8, 1.5, 0.6])
    psi = dict(PSI_TRUE)
    lly = st.norm(mu[None, :], sigma[None, :]).logpdf(data.Y).sum()
    prior = (
        st.norm(psi["m"], psi["s"]).logpdf(mu).sum()
        + st.invgamma(psi["g1"], scale=psi["g2"]).logpdf(sigma).sum()
    )
    theta = jnp.concatenate([jnp.asarray(mu), jnp.asarray(sigma)])
    got = gbi_log_joint({"theta": theta}, psi, m)
    assert float(got) == pytest.approx(lly + prior, rel=1e-10)


def test_random_effects_simulation_shapes_and_validation():
    rng = np.random.default_rng(2)
    data = simulate_random_effects(rng, 10, 7)
    assert data.Y.shape == (10, 7)
    with pytest.raises(ValueError):
        RandomEffectsData(Y=np.array([[np.inf]]))
    with pytest.raises(ValueError):
        RandomEffectsData(Y=np.zeros((0, 3)))


def test_random_effects_loglik_terms_cover_all_cells():
    rng = np.random.default_rng(3)
    data = simulate_random_effects(rng, 5, 4)
    m = make_random_effects_model(data)
    theta = jnp.concatenate([jnp.zeros(4), jnp.ones(4)])
    terms = m.loglik_y_terms(theta, None)
    assert terms.shape == (20,)
    assert float(jnp.sum(terms)) == pytest.approx(float(m.log_lik_y(theta, None)), rel=1e-12)


# ---------------------------------------------------------------------------
# Anchor/float location model
# ---------------------------------------------------------------------------


def test_location_simulation_and_json_roundtrip():
    rng = np.random.default_rng(4)
    data = simulate_location_data(rng, float_logit_shift=1.5)
    again = LocationData.from_json(data.to_json())
    np.testing.assert_allclose(again.x_anchor, data.x_anchor)
    np.testing.assert_array_equal(again.y_float, data.y_float)
    assert again.float_logit_shift == 1.5


def test_location_model_bernoulli_terms_match_scipy():
    rng = np.random.default_rng(5)
    data = simulate_location_data(rng, n_anchor=6, n_float=3, n_held_out=2)
    m = make_location_model(data)
    alpha = np.array([1.0, -2.0, 0.3])
    keep = np.setdiff1d(np.arange(6), data.held_out)
    from vmplab.targets.location import PROBE_OFFSETS, PROBE_SLOPES

    t = data.x_anchor[keep] @ alpha[:2] + alpha[2]
    logits = PROBE_SLOPES[None, :] * t[:, None] + PROBE_OFFSETS[None, :]
    p = 1 / (1 + np.exp(-logits))
    expected = st.bernoulli(p).logpmf(data.y_anchor[keep]).sum()
    got = m.log_lik_z(jnp.asarray(alpha))
    assert float(got) == pytest.approx(expected, rel=1e-10)


def test_location_held_out_slice_points_at_anchors():
    rng = np.random.default_rng(6)
    data = simulate_location_data(rng, n_anchor=10, n_float=4, n_held_out=3)
    m = make_location_model(data)
    lo, hi = m.meta["held_out_slice"]
    assert (lo, hi) == (4, 7)
    assert m.theta.dim == 2 * 7


def test_location_rejects_duplicate_held_out():
    rng = np.random.default_rng(7)
    data = simulate_location_data(rng, n_anchor=8, n_held_out=0)
    with pytest.raises(ValueError):
        LocationData(
            x_anchor=data.x_anchor,
            y_anchor=data.y_anchor,
            y_float=data.y_float,
            held_out=np.array([1, 1]),
        )


def test_smi_targets_require_shared_block():
    m = make_conjugate_gaussian_model()
    with pytest.raises(ValueError):
        smi_pow_log_target(jnp.zeros(1), jnp.zeros(1), {"mu0": 0.0, "s0": 1.0}, m)

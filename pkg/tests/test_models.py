"""Covariance algebra, model geometry, and sampler determinism."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from interplab import models


def _iso_model(d=20, noise=0.5, link="linear_noise"):
    return models.MultiIndexModel(
        mu=np.zeros(d),
        sigma=models.make_covariance("isotropic", d=d, scale=1.0),
        W=np.eye(d, 1),
        link=link,
        noise=models.gaussian_noise(noise),
    )


def test_bilevel_trace_identities():
    cov = models.make_covariance(
        "bilevel", d=1000, spike_count=1, spike_value=100.0, tail_value=1.0
    )
    assert cov.trace == 1099.0
    assert cov.trace_sq == 10999.0
    assert_allclose(cov.eff_rank, 1099.0**2 / 10999.0)


def test_spectrum_effective_rank():
    cov = models.make_covariance("spectrum", values=[2.0, 1.0, 1.0])
    assert_allclose(cov.eff_rank, 8.0 / 3.0)
    assert cov.d == 3


def test_quad_matches_dense_matrix():
    cov = models.make_covariance(
        "bilevel", d=7, spike_count=2, spike_value=5.0, tail_value=0.3
    )
    rng = np.random.default_rng(3)
    m = cov.as_matrix()
    for _ in range(5):
        v = rng.standard_normal(7)
        assert_allclose(cov.quad(v), v @ m @ v, rtol=1e-12)
        assert_allclose(cov.matvec(v), m @ v, rtol=1e-12)


def test_covariance_sample_matches_spectrum():
    cov = models.make_covariance("spectrum", values=[4.0, 1.0, 0.25])
    draws = cov.sample(200_000, np.random.default_rng(0))
    emp = np.var(draws, axis=0)
    assert_allclose(emp, [4.0, 1.0, 0.25], rtol=0.03)


def test_geometry_removes_index_directions():
    model = _iso_model(d=12)
    geom = models.geometry(model)
    assert_allclose(geom.trace_perp, 11.0)
    assert_allclose(geom.eff_rank_perp, 11.0)
    # spectrum stays length d with the index direction zeroed out
    assert_allclose(np.sort(geom.perp_spectrum()), [0.0] + [1.0] * 11)
    # the oblique projection annihilates the index column
    q = geom.q_matrix()
    assert_allclose(q @ model.W, 0.0, atol=1e-12)


def test_geometry_perp_quad_agrees_with_dense():
    cov = models.make_covariance(
        "bilevel", d=9, spike_count=1, spike_value=10.0, tail_value=0.5
    )
    w_col = np.zeros((9, 1))
    w_col[0, 0] = 1.0
    geom = models.geometry(cov, w_col)
    sp = geom.sigma_perp_matrix()
    rng = np.random.default_rng(11)
    v = rng.standard_normal(9)
    assert_allclose(geom.perp_quad(v), v @ sp @ v, rtol=1e-10)
    assert_allclose(np.trace(sp), geom.trace_perp, rtol=1e-12)


def test_sample_is_seed_deterministic():
    model = _iso_model()
    s1 = models.sample(model, 50, seed=7)
    s2 = models.sample(model, 50, seed=7)
    s3 = models.sample(model, 50, seed=8)
    assert np.array_equal(s1.X, s2.X)
    assert np.array_equal(s1.y, s2.y)
    assert not np.array_equal(s1.y, s3.y)
    assert s1.n == 50 and s1.d == 20


def test_magnitude_link_without_noise():
    model = models.MultiIndexModel(
        mu=np.zeros(6),
        sigma=models.make_covariance("isotropic", d=6, scale=1.0),
        W=np.eye(6, 1),
        link="magnitude_noise",
        noise=models.no_noise(),
    )
    s = models.sample(model, 200, seed=1)
    assert_allclose(s.y, np.abs(s.X @ model.W[:, 0]), atol=1e-12)
    assert np.all(s.y >= 0)


def test_relu_pointmass_link_truncates():
    model = models.MultiIndexModel(
        mu=np.zeros(6),
        sigma=models.make_covariance("isotropic", d=6, scale=1.0),
        W=np.eye(6, 1),
        link="relu_pointmass",
        noise=models.gaussian_noise(0.5),
        offset=-0.5,
    )
    s = models.sample(model, 2000, seed=2)
    assert np.all(s.y >= 0)
    zero_frac = float(np.mean(s.y == 0.0))
    assert 0.2 < zero_frac < 0.8  # genuine point mass at zero


def test_projected_predictor_second_moment():
    cov = models.make_covariance(
        "bilevel", d=30, spike_count=1, spike_value=9.0, tail_value=0.5
    )
    model = models.MultiIndexModel(
        mu=np.zeros(30),
        sigma=cov,
        W=np.eye(30, 1) * 2.0,
        link="linear_noise",
        noise=models.gaussian_noise(0.3),
    )
    rng = np.random.default_rng(5)
    w = rng.standard_normal(30)
    problem = model.projected_problem()
    pred = model.project_predictor(w)
    s = problem.sample(400_000, np.random.default_rng(9))
    u = problem.predict(pred, s, np.random.default_rng(10).standard_normal(400_000))
    assert_allclose(np.mean(u**2), cov.quad(w), rtol=0.02)


def test_matrix_sensing_instance_consistency():
    inst = models.sample_matrix_sensing(6, 8, 2, 40, 0.0, seed=4)
    assert inst.a_ops.shape == (40, 6, 8)
    assert np.linalg.matrix_rank(inst.x_star) == 2
    assert_allclose(inst.apply(inst.x_star), inst.y, atol=1e-12)
    noisy = models.sample_matrix_sensing(6, 8, 2, 40, 0.7, seed=4)
    resid = noisy.y - noisy.apply(noisy.x_star)
    assert 0.3 < np.std(resid) < 1.2


def test_counterexample_sample_carries_weights():
    cmodel = models.CounterexampleModel(
        sigma_head=models.make_covariance("isotropic", d=1, scale=1.0),
        sigma_tail=models.make_covariance("isotropic", d=9, scale=1.0),
        h_kind="one_plus_abs",
        g_kind="h_squared",
    )
    s = models.sample_counterexample(cmodel, 300, seed=6)
    assert s.weights is not None and s.weights.shape == (300,)
    assert np.all(s.weights >= 1.0)  # h = 1 + |x_1| so h^2 >= 1
    assert_allclose(s.weights, cmodel.h(s.X[:, :1]) ** 2, rtol=1e-12)


def test_table_noise_support():
    noise = models.table_noise([-1.0, 3.0], [0.75, 0.25])
    draws = noise.draw(5000, np.random.default_rng(0))
    vals = np.unique(draws)
    assert_allclose(vals, [-1.0, 3.0])
    assert abs(np.mean(draws == 3.0) - 0.25) < 0.03


def test_unknown_covariance_kind_raises():
    with pytest.raises(ValueError):
        models.make_covariance("diagonal_rainbow", d=3)

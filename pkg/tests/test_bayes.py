import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from condmix.bayes import (Ensemble, Observation, bayes_update, forecast, forecast_decay_experiment,
                           prior_from_srb, truth_points)
from condmix.errors import DegeneratePosteriorError, DomainError
from condmix.lozi import LoziParams
from condmix.stats import student_ci

P = LoziParams(1.8, 0.35)


@pytest.fixture(scope="module")
def prior():
    return prior_from_srb(P, 20_000, seed=0)


def test_prior_weights_and_single_particle(prior):
    assert np.all(prior.weights == 1.0 / 20_000)
    one = prior_from_srb(P, 1, seed=0)
    assert one.count == 1 and one.weights[0] == 1.0
    with pytest.raises(DomainError):
        prior_from_srb(LoziParams(1.0, 0.1), 10, 0)


def test_prior_mean_matches_independent_orbits():
    means = [prior_from_srb(P, 20_000, seed=s, thin=7).particles[:, 0].mean() for s in range(6)]
    a, ha = student_ci(means[:3])
    b, hb = student_ci(means[3:])
    assert abs(a - b) <= math.hypot(ha, hb)


def test_flat_likelihood_keeps_uniform_weights(prior):
    post = bayes_update(prior, Observation("x", 0.3, 1e6))
    w = post.weights * prior.count
    assert np.max(np.abs(w - 1.0)) < 1e-6


def test_single_particle_posterior_is_prior():
    e = Ensemble(np.array([[0.2, 0.1]]), np.array([1.0]))
    post = bayes_update(e, Observation("x", 0.9, 0.1))
    assert post.weights[0] == 1.0


def test_weight_ratio_at_one_sigma():
    e = Ensemble(np.array([[0.4, 0.0], [0.5, 0.0]]), np.array([0.5, 0.5]))
    post = bayes_update(e, Observation("x", 0.4, 0.1))
    assert math.isclose(post.weights[0] / post.weights[1], math.exp(0.5), rel_tol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-1.2, 1.2), st.floats(1e-3, 5.0), st.floats(1e-3, 1e3))
def test_normalization_and_scaling_invariance(y, sigma, scale):
    g = np.random.default_rng(0)
    pts = g.uniform(-1, 1, (200, 2))
    w = g.random(200)
    a = bayes_update(Ensemble(pts, w), Observation("x", y, sigma))
    b = bayes_update(Ensemble(pts, scale * w), Observation("x", y, sigma))
    assert abs(math.fsum(a.weights) - 1.0) < 1e-12
    assert np.allclose(a.weights, b.weights, rtol=1e-10, atol=1e-300)


def test_infinite_sigma_and_zero_sigma(prior):
    post = bayes_update(prior, Observation("x", 0.3, math.inf))
    assert np.array_equal(post.weights, prior.weights)
    band = bayes_update(prior, Observation("x", 0.3, 0.0, tol=0.01))
    kept = band.weights > 0
    assert np.all(np.abs(prior.particles[kept, 0] - 0.3) < 0.01)
    assert np.allclose(band.weights[kept], 1.0 / kept.sum())


def test_degenerate_posterior(prior):
    with pytest.raises(DegeneratePosteriorError):
        bayes_update(prior, Observation("x", 5.0, 0.0))
    far = bayes_update(prior, Observation("x", 1e6, 1e-6))
    assert far.weights.max() == 1.0
    with pytest.raises(DomainError):
        bayes_update(prior, Observation("x", 0.0, -1.0))


def test_forecast_constant_and_concentration(prior):
    est, se = forecast(prior, "one", 3, P)
    assert est == 1.0 and se == 0.0
    y = 0.25
    post = bayes_update(prior, Observation("x", y, 0.01))
    est, _ = forecast(post, "x", 0, P)
    assert abs(est - y) < 0.05


def test_forecast_decay_small_run():
    res = forecast_decay_experiment(P, sigmas=(math.inf, 0.1, 0.0), n_max=25, count=50_000, K=6,
                                    tol=5e-3)
    inf_rows = [r for r in res.rows if math.isinf(r.sigma)]
    assert all(r.abs_error < 1e-12 for r in inf_rows)
    assert res.posterior_h_error[0.0] < res.posterior_h_error[0.1]
    assert len(res.truths) == 6
    for s in (0.1, 0.0):
        last = [r for r in res.rows if r.sigma == s][-1]
        assert last.abs_error <= last.stat_err


def test_truth_points_deterministic():
    assert np.array_equal(truth_points(P, 4, 1), truth_points(P, 4, 1))
    assert not np.array_equal(truth_points(P, 4, 1), truth_points(P, 4, 2))

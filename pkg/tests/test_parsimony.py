import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padbench._utils import rng_for
from padbench.models import Dataset, ExactPosterior, LinearRegressionGLS, NormalKnownVariance
from padbench.parsimony import (
    ParsimonyReport,
    enc_gls,
    enp_loo,
    enp_waic,
    finite_difference_hessian,
    laplace_log_marginal_likelihood,
    mdl,
    occam_factor_laplace,
    shrinkage_kappa,
)
from padbench.predictive import ElpdResult, PointwiseLogLik, elpd, loo_is

positive = st.floats(1e-3, 1e3)


def regression_enp(tau, seed=0):
    model = LinearRegressionGLS(tau=tau, n=100)
    rng = rng_for(seed, "enp-data")
    design = model.default_design()
    data = model.simulate([0.5, -1.0, 0.25, 1.0], rng, design)
    fit = ExactPosterior(n_chains=4, n_draws=2500).fit(model, data, seed=seed)
    ll = PointwiseLogLik.from_model(model, fit.draws, data)
    return enp_loo(elpd(ll), loo_is(ll)), enp_waic(ll)


def orthogonal_design(n, k, seed):
    q, _ = np.linalg.qr(rng_for(seed, "qr").standard_normal((n, k)))
    return q * math.sqrt(n) * np.array([1.0, 0.5, 2.0])[:k]


# --- ENP -------------------------------------------------------------------------


def test_enp_constant_loglik_zero():
    ll = PointwiseLogLik(np.full((200, 4), -1.0), "posterior_draws")
    assert enp_loo(elpd(ll), loo_is(ll)) == pytest.approx(0.0, abs=1e-12)
    assert enp_waic(ll) == 0.0


def test_enp_input_checks():
    a = ElpdResult.from_pointwise([0.0, 0.0], "posterior")
    with pytest.raises(ValueError):
        enp_loo(a, ElpdResult.from_pointwise([0.0], "loo_is"))
    with pytest.raises(ValueError):
        enp_loo(a, ElpdResult.from_pointwise([0.0, 0.0], "waic"))


def test_enp_flat_and_tight_prior():
    flat, _ = regression_enp(1e3)
    tight, _ = regression_enp(1e-3)
    assert flat == pytest.approx(4.0, rel=0.4)
    assert tight < flat


def test_enp_waic_close_to_enp_loo():
    model = NormalKnownVariance(n=50)
    rng = rng_for(2, "enp")
    data = model.simulate(model.prior_sample(rng), rng)
    fit = ExactPosterior(n_chains=4, n_draws=2500).fit(model, data, seed=3)
    ll = PointwiseLogLik.from_model(model, fit.draws, data)
    loo_enp = enp_loo(elpd(ll), loo_is(ll))
    assert abs(enp_waic(ll) - loo_enp) < max(0.5, 0.2 * loo_enp)


def test_enp_waic_duplicated_draws():
    x = rng_for(4, "dup").standard_normal((50, 3))
    single = enp_waic(PointwiseLogLik(x, "posterior_draws"))
    double = enp_waic(PointwiseLogLik(np.vstack([x, x]), "posterior_draws"))
    S = 50
    # ddof=1 variance of a duplicated sample scales by (2S-2)/(2S-1) * S/(S-1)
    assert double == pytest.approx(single * (S - 1) / S * 2 * S / (2 * S - 1), rel=1e-12)


# --- shrinkage -----------------------------------------------------------------------


def test_kappa_examples():
    assert shrinkage_kappa(1.0, 1.0, 1.0) == 0.5
    assert shrinkage_kappa(4.0, 0.5, 1.0) == 0.5
    assert shrinkage_kappa(1.0, 3.0, 1.0) == pytest.approx(0.1, abs=1e-15)
    assert shrinkage_kappa(1.0, 1.0, 1e-9) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        shrinkage_kappa(0.0, 1.0, 1.0)


@given(positive, positive, positive)
def test_kappa_in_unit_interval(a, lam, tau):
    k = shrinkage_kappa(a, lam, tau)
    assert 0 < k < 1


def test_kappa_strictly_decreasing_in_lambda():
    lams = np.linspace(0.1, 5, 50)
    k = shrinkage_kappa(2.0, lams, 0.7)
    assert np.all(np.diff(k) < 0)
    assert np.all(np.diff(shrinkage_kappa(np.linspace(0.1, 5, 50), 1.0, 1.0)) < 0)


def test_enc_examples():
    assert enc_gls([0.5] * 4) == 2.0
    assert enc_gls([1 - 1e-12] * 3) == pytest.approx(0.0, abs=1e-11)
    with pytest.raises(ValueError):
        enc_gls([0.5, 1.0])


@settings(max_examples=50)
@given(st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=10))
def test_enc_bounds(kappas):
    assert 0 < enc_gls(kappas) < len(kappas)


@pytest.mark.parametrize("sigma", [None, 0.8])
def test_posterior_mean_shrinkage_identity(sigma):
    n = 100
    X = orthogonal_design(n, 3, seed=5)
    model = LinearRegressionGLS(lambdas=(0.5, 1.0, 2.0), tau=0.1, sigma=sigma, n=n)
    theta = [0.3, -0.2, 0.1] + ([] if sigma is not None else [0.8])
    data = model.simulate(theta, rng_for(6, "eq"), Dataset(np.zeros(n), X).design)
    beta_ml = np.linalg.solve(X.T @ X, X.T @ data.y)
    kappa = shrinkage_kappa(model.shrinkage_constants(X), model.lambdas, model.tau)
    post = model.analytic_posterior(data)
    # exact identity on the analytic posterior mean
    assert np.allclose(post.mean[:3], (1 - kappa) * beta_ml, atol=1e-12, rtol=1e-12)
    # and within Monte Carlo error on exact draws
    fit = ExactPosterior(n_chains=4, n_draws=5000).fit(model, data, seed=7)
    draws = fit.draws.pooled_matrix()[:, :3]
    mc_se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - (1 - kappa) * beta_ml) < 3 * mc_se)


# --- Occam factor, Laplace and MDL -------------------------------------------------------


def test_laplace_exact_on_conjugate_normal():
    model = NormalKnownVariance(n=1)
    data = Dataset([0.0])
    log_ml, _ = laplace_log_marginal_likelihood(model, data)
    assert log_ml == pytest.approx(model.log_evidence(data), abs=1e-9)
    assert log_ml == pytest.approx(-1.2655, abs=1e-4)


def test_laplace_finite_difference_route():
    class NoClosedForm(NormalKnownVariance):
        def laplace_inputs(self, data):
            return None

    model = NoClosedForm(n=3)
    data = Dataset([0.2, -0.4, 1.0])
    log_ml, _ = laplace_log_marginal_likelihood(model, data)
    assert log_ml == pytest.approx(model.log_evidence(data), abs=1e-6)


def test_laplace_exact_on_known_sigma_regression():
    model = LinearRegressionGLS(sigma=0.5, n=30)
    data = model.simulate([0.1, 0.2, 0.3], rng_for(8, "lap"))
    log_ml, _ = laplace_log_marginal_likelihood(model, data)
    assert log_ml == pytest.approx(model.log_evidence(data), abs=1e-9)


def test_wider_prior_pays_log10():
    data = Dataset(np.zeros(100))
    _, narrow = laplace_log_marginal_likelihood(NormalKnownVariance(prior_sd=1.0), data)
    _, wide = laplace_log_marginal_likelihood(NormalKnownVariance(prior_sd=10.0), data)
    assert narrow - wide == pytest.approx(math.log(10), abs=0.01)


def test_occam_dim_zero_and_non_pd():
    assert occam_factor_laplace(-2.5, 0.0, 0) == -2.5
    with pytest.raises(ValueError):
        occam_factor_laplace(-1.0, float("nan"), 2)


def test_finite_difference_hessian_quadratic():
    A = np.array([[2.0, 0.5], [0.5, 1.0]])
    H = finite_difference_hessian(lambda x: 0.5 * x @ A @ x, np.array([0.3, -0.2]))
    assert np.allclose(H, A, atol=1e-6)


def test_mdl():
    assert mdl(-1.2655) == 1.2655
    assert mdl(0.0) == 0.0
    assert mdl(-1.0) < mdl(-2.0)
    with pytest.raises(ValueError):
        mdl(float("-inf"))


def test_report_serializes():
    rep = ParsimonyReport(3.9, 3.8, 4, enc_gls=2.5, occam_factor_log=-1.0, mdl=10.0)
    assert '"nominal_param_count": 4' in rep.to_json()
    with pytest.raises(ValueError):
        ParsimonyReport(1.0, -0.1, 1)

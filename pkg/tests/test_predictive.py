import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from padbench._utils import rng_for
from padbench.models import Dataset, ExactPosterior, NormalKnownVariance
from padbench.predictive import (
    ElpdResult,
    PointwiseLogLik,
    bayes_factor,
    elpd,
    gibbs_loss,
    log_marginal_likelihood_mc,
    loo_is,
    loo_refit,
    posterior_model_probs,
    waic,
)

LOG_ML_SINGLE_ZERO = stats.norm.logpdf(0.0, 0.0, math.sqrt(2.0))


@pytest.fixture(scope="module")
def conjugate_fixture():
    model = NormalKnownVariance(n=20)
    rng = rng_for(0, "pred-data")
    data = model.simulate(model.prior_sample(rng), rng)
    fit = ExactPosterior(n_chains=4, n_draws=2500).fit(model, data, seed=1)
    ll = PointwiseLogLik.from_model(model, fit.draws, data)
    return model, data, ll


# --- loglik container --------------------------------------------------------------------


def test_loglik_rejects_nan_and_bad_provenance():
    with pytest.raises(ValueError):
        PointwiseLogLik([[np.nan]], "posterior_draws")
    with pytest.raises(ValueError):
        PointwiseLogLik([[np.inf]], "posterior_draws")
    with pytest.raises(ValueError):
        PointwiseLogLik([[0.0]], "somewhere")


def test_loglik_is_read_only():
    ll = PointwiseLogLik([[0.0, 1.0]], "posterior_draws")
    with pytest.raises(ValueError):
        ll.values[0, 0] = 3.0


def test_loglik_csv_roundtrip(tmp_path):
    ll = PointwiseLogLik(rng_for(1, "csv").standard_normal((3, 4)), "posterior_draws")
    ll.to_csv(tmp_path / "ll.csv")
    back = PointwiseLogLik.read_csv(tmp_path / "ll.csv")
    assert np.array_equal(back.values, ll.values)


def test_loglik_csv_missing_pair(tmp_path):
    (tmp_path / "ll.csv").write_text("draw,obs,loglik\n1,1,0.0\n2,2,0.0\n")
    with pytest.raises(ValueError):
        PointwiseLogLik.read_csv(tmp_path / "ll.csv")


# --- marginal likelihood -------------------------------------------------------------------


def test_log_ml_single_observation():
    model = NormalKnownVariance(n=1)
    data = Dataset([0.0])
    assert LOG_ML_SINGLE_ZERO == pytest.approx(-1.2655, abs=1e-4)
    assert model.log_evidence(data) == pytest.approx(LOG_ML_SINGLE_ZERO, abs=1e-12)
    res = log_marginal_likelihood_mc(model, data, n_prior_draws=1_000_000)
    assert res.log_ml == pytest.approx(LOG_ML_SINGLE_ZERO, abs=0.05)
    assert not res.mc_se_flag


def test_log_ml_empty_data():
    assert log_marginal_likelihood_mc(NormalKnownVariance(), Dataset([])).log_ml == 0.0


def test_log_ml_flag_on_collapsed_weights():
    model = NormalKnownVariance(prior_sd=10.0, n=50)
    data = model.simulate([3.0], rng_for(2, "collapse"))
    _, flag = log_marginal_likelihood_mc(model, data, n_prior_draws=100)
    assert flag
    with pytest.raises(ValueError):
        log_marginal_likelihood_mc(model, data, n_prior_draws=10)


def test_log_ml_converges():
    model = NormalKnownVariance(n=5)
    data = model.simulate([0.3], rng_for(3, "conv"))
    small = log_marginal_likelihood_mc(model, data, n_prior_draws=10_000, seed=1)
    large = log_marginal_likelihood_mc(model, data, n_prior_draws=1_000_000, seed=2)
    assert abs(small.log_ml - large.log_ml) < 3 * small.mc_se


def test_sharper_prior_wins_near_truth():
    data = NormalKnownVariance(n=10).simulate([0.0], rng_for(4, "sharp"))
    wide = log_marginal_likelihood_mc(NormalKnownVariance(prior_sd=10.0), data, 100_000).log_ml
    sharp = log_marginal_likelihood_mc(NormalKnownVariance(prior_sd=0.5), data, 100_000).log_ml
    assert sharp > wide


def test_bayes_factor():
    assert bayes_factor(-3.0, -3.0) == 1.0
    assert bayes_factor(math.log(10) - 1, -1.0) == pytest.approx(10.0)
    assert bayes_factor(-2.0, -5.5) * bayes_factor(-5.5, -2.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        bayes_factor(-np.inf, 0.0)


def test_model_probs_examples():
    assert posterior_model_probs([-1.0] * 4).tolist() == [0.25] * 4
    p = posterior_model_probs([1000.0, 0.0, 0.0])
    assert p[0] == pytest.approx(1.0)
    assert posterior_model_probs([5.0]).tolist() == [1.0]
    with pytest.raises(ValueError):
        posterior_model_probs([0.0, 0.0], [0.5, 0.6])


@settings(max_examples=50)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=6), st.floats(-1e3, 1e3))
def test_model_probs_shift_invariant(log_mls, c):
    a = posterior_model_probs(log_mls)
    b = posterior_model_probs(np.asarray(log_mls) + c)
    assert np.allclose(a, b, atol=1e-9)
    assert a.sum() == pytest.approx(1.0)


# --- Gibbs loss and ELPD ----------------------------------------------------------------


def test_gibbs_examples():
    assert gibbs_loss(PointwiseLogLik([[-2.0]], "prior_draws"))[0] == -2.0
    ll = PointwiseLogLik([[-1.0, -2.0], [-1.0, -4.0]], "prior_draws")
    assert gibbs_loss(ll)[0] == -4.0
    with pytest.raises(ValueError):
        gibbs_loss(PointwiseLogLik([[-2.0]], "posterior_draws"))
    value, flags = gibbs_loss(PointwiseLogLik([[-np.inf], [0.0]], "prior_draws"))
    assert value == -np.inf and flags == ["neg_inf_loglik"]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_gibbs_below_elpd(seed):
    ll = PointwiseLogLik(3 * rng_for(seed, "jensen").standard_normal((20, 4)), "prior_draws")
    assert gibbs_loss(ll)[0] <= elpd(ll).total + 1e-12


def test_elpd_constant_and_uniform_weights():
    ll = PointwiseLogLik(np.full((7, 3), -1.5), "posterior_draws")
    assert elpd(ll).total == pytest.approx(-4.5, abs=1e-12)
    ll = PointwiseLogLik(rng_for(5, "w").standard_normal((8, 3)), "posterior_draws")
    assert elpd(ll, weights=np.full(8, 1 / 8)).total == elpd(ll).total


def test_elpd_errors_and_flags():
    with pytest.raises(ValueError):
        elpd(PointwiseLogLik([[-np.inf], [-np.inf]], "posterior_draws"))
    with pytest.raises(ValueError):
        elpd(PointwiseLogLik([[0.0], [0.0]], "posterior_draws"), weights=[0.7, 0.7])
    res = elpd(PointwiseLogLik([[-np.inf], [0.0]], "posterior_draws"))
    assert res.total == pytest.approx(-math.log(2)) and "neg_inf_loglik" in res.flags


def test_elpd_joint():
    ll = PointwiseLogLik([[-1.0, -2.0], [-3.0, -1.0]], "posterior_draws")
    res = elpd(ll, joint=True)
    assert res.method == "posterior_joint"
    assert res.total == pytest.approx(math.log(0.5 * (math.exp(-3) + math.exp(-4))))


def test_elpd_matches_analytic_predictive(conjugate_fixture):
    model, data, ll = conjugate_fixture
    post = model.analytic_posterior(data)
    pred_sd = math.sqrt(model.obs_sd**2 + post.sd[0] ** 2)
    analytic = stats.norm.logpdf(data.y, post.mean[0], pred_sd).sum()
    assert elpd(ll).total == pytest.approx(analytic, abs=0.05)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_elpd_permutation_invariant(seed):
    rng = rng_for(seed, "perm")
    x = rng.standard_normal((30, 5))
    a = elpd(PointwiseLogLik(x, "posterior_draws")).total
    b = elpd(PointwiseLogLik(x[rng.permutation(30)], "posterior_draws")).total
    assert a == pytest.approx(b, abs=1e-12)


def test_elpd_result_serialization():
    res = ElpdResult.from_pointwise([-1.0, -2.0], "posterior")
    assert res.se == pytest.approx(math.sqrt(2 * 0.25))
    assert '"total": -3.0' in res.to_json()


# --- LOO and WAIC -----------------------------------------------------------------------


def test_loo_is_constant_equals_in_sample():
    ll = PointwiseLogLik(np.full((200, 3), -0.7), "posterior_draws")
    assert loo_is(ll).total == pytest.approx(elpd(ll).total, abs=1e-12)


def test_loo_is_matches_refit(conjugate_fixture):
    model, data, ll = conjugate_fixture
    approx = loo_is(ll)
    refit = loo_refit(model, data, ExactPosterior(n_chains=4, n_draws=2500), seed=2)
    assert abs(approx.total - refit.total) < 0.1
    assert approx.total <= elpd(ll).total
    assert not [f for f in approx.flags if f.startswith("unreliable")]


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_loo_is_below_in_sample(seed):
    model = NormalKnownVariance(n=8)
    rng = rng_for(seed, "loo-prop")
    data = model.simulate(model.prior_sample(rng), rng)
    fit = ExactPosterior(n_chains=1, n_draws=400).fit(model, data, seed=seed)
    ll = PointwiseLogLik.from_model(model, fit.draws, data)
    assert loo_is(ll).total <= elpd(ll).total


def test_loo_is_preconditions():
    with pytest.raises(ValueError):
        loo_is(PointwiseLogLik(np.zeros((50, 2)), "posterior_draws"))
    with pytest.raises(ValueError):
        loo_is(PointwiseLogLik(np.zeros((200, 2)), "prior_draws"))


def test_loo_is_flags_degenerate_weights():
    values = np.zeros((200, 2))
    values[0, 1] = -200.0  # one draw carries all of the leave-one-out weight
    res = loo_is(PointwiseLogLik(values, "posterior_draws"))
    assert "unreliable_obs_2" in res.flags
    assert "unreliable_obs_1" not in res.flags


def test_loo_refit_single_point_is_prior_predictive():
    model = NormalKnownVariance(n=1)
    data = Dataset([0.4])
    res = loo_refit(model, data, ExactPosterior(n_chains=1, n_draws=100_000))
    assert res.pointwise[0] == pytest.approx(stats.norm.logpdf(0.4, 0, math.sqrt(2)), abs=0.01)


def test_loo_refit_duplicates_agree():
    model = NormalKnownVariance(n=4)
    data = Dataset([0.1, 0.5, 0.5, -0.3])
    res = loo_refit(model, data, ExactPosterior(n_chains=1, n_draws=20_000))
    assert res.pointwise[1] == pytest.approx(res.pointwise[2], abs=0.01)


def test_loo_refit_size_guard():
    with pytest.raises(ValueError):
        loo_refit(NormalKnownVariance(), Dataset(np.zeros(201)), ExactPosterior())


def test_waic_constant():
    ll = PointwiseLogLik(np.full((10, 3), -2.0), "posterior_draws")
    res = waic(ll)
    assert res.total == elpd(ll).total
    assert np.all(res.diagnostics["penalty"] == 0)


def test_waic_close_to_loo(conjugate_fixture):
    _, _, ll = conjugate_fixture
    assert abs(waic(ll).total - loo_is(ll).total) < 0.2


def test_waic_penalty_matches_enp_waic(conjugate_fixture):
    from padbench.parsimony import enp_waic

    _, _, ll = conjugate_fixture
    assert waic(ll).diagnostics["penalty"].sum() == pytest.approx(enp_waic(ll), rel=1e-12)

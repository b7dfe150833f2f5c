import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from padbench._utils import rng_for
from padbench.draws import DrawsTensor, Pushforward
from padbench.models import Approximator, ExactPosterior, FitResult, NormalKnownVariance, RandomWalkMetropolis
from padbench.sbc import (
    SbcResult,
    data_averaged_posterior_check,
    ecdf_diff_envelope,
    rank_bins,
    rank_statistic,
    run_sbc,
    uniformity_chisq,
)

MU = Pushforward.identity("mu")


class LikelihoodOnly(Approximator):
    """Draws from the normalized likelihood of a known-variance normal model."""

    name = "likelihood_only"
    _param_names = ("n_draws",)

    def __init__(self, n_draws=200):
        self.n_draws = n_draws

    def fit(self, model, data, seed=None):
        rng = rng_for(seed or 0, "lik-only")
        x = data.y.mean() + model.obs_sd / np.sqrt(data.n) * rng.standard_normal((1, self.n_draws, 1))
        return FitResult(DrawsTensor(x, ["mu"]), self.name, self.get_params(), 0.0, 0.0)


# --- rank statistic -----------------------------------------------------------------


def test_rank_examples():
    assert rank_statistic(-1.0, [0, 1, 2, 3, 4]) == 5
    assert rank_statistic(10.0, [0, 1, 2, 3, 4]) == 0
    assert rank_statistic(2.0, [2.0] * 5, tie_break="deterministic") == 5


def test_rank_random_ties_are_seeded_and_bounded():
    a = rank_statistic(2.0, [2.0] * 5 + [3.0], rng_for(1, "t"))
    b = rank_statistic(2.0, [2.0] * 5 + [3.0], rng_for(1, "t"))
    assert a == b and 1 <= a <= 6


def test_rank_errors():
    with pytest.raises(ValueError):
        rank_statistic(np.nan, [1.0])
    with pytest.raises(ValueError):
        rank_statistic(0.0, [])
    with pytest.raises(ValueError):
        rank_statistic(0.0, [0.0], tie_break="coin")


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(-1000, 1000), min_size=2, max_size=30, unique=True))
def test_rank_invariant_under_increasing_transform(values):
    truth, draws = values[0], np.array(values[1:], dtype=float)
    f = lambda v: v**3 + v - 7  # noqa: E731
    assert rank_statistic(truth, draws) == rank_statistic(f(float(truth)), f(draws))


# --- chi-square -------------------------------------------------------------------------


def test_chisq_balanced_is_zero():
    res = SbcResult(np.repeat(np.arange(10) * 10, 10), L=99, psi_name="mu")
    stat, p = uniformity_chisq(res, 10)
    assert stat == 0.0 and p == 1.0


def test_chisq_single_bin_900():
    res = SbcResult(np.zeros(100, dtype=int), L=99, psi_name="mu")
    stat, _ = uniformity_chisq(res, 10)
    assert stat == pytest.approx(900.0)


def test_chisq_preconditions():
    with pytest.raises(ValueError):
        uniformity_chisq(SbcResult(np.zeros(20, dtype=int), L=99, psi_name="mu"), 10)
    with pytest.raises(ValueError):
        uniformity_chisq(SbcResult(np.zeros(100, dtype=int), L=98, psi_name="mu"), 10)


def test_rank_bins_counts():
    res = SbcResult([0, 9, 10, 99], L=99, psi_name="mu")
    assert rank_bins(res, 10).tolist() == [2, 1, 0, 0, 0, 0, 0, 0, 0, 1]


def test_result_validates_ranks():
    with pytest.raises(ValueError):
        SbcResult([100], L=99, psi_name="mu")


# --- run_sbc --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def sbc_runs():
    model = NormalKnownVariance(n=10)
    out = {}
    for label, kwargs in {"exact": {}, "shift": {"shift": 0.5}, "scale": {"scale": 0.5}}.items():
        approx = ExactPosterior(n_chains=1, n_draws=99, **kwargs)
        out[label] = run_sbc(model, approx, MU, M=1000, L=99, seed=1)
    return out


def test_sbc_exact_uniform(sbc_runs):
    assert uniformity_chisq(sbc_runs["exact"])[1] > 0.001
    assert not ecdf_diff_envelope(sbc_runs["exact"]).violated


def test_sbc_positive_bias_gives_high_ranks(sbc_runs):
    res = sbc_runs["shift"]
    assert uniformity_chisq(res)[1] < 1e-6
    counts = rank_bins(res, 10)
    assert counts[5:].sum() > counts[:5].sum()
    env = ecdf_diff_envelope(res)
    assert env.violated
    # too few low ranks: the ECDF difference goes negative in the lower half
    assert env.diff[: res.L // 2].min() < env.lower[: res.L // 2].min()


def test_sbc_overconfidence_gives_u_shape(sbc_runs):
    res = sbc_runs["scale"]
    assert uniformity_chisq(res)[1] < 1e-6
    counts = rank_bins(res, 10)
    assert counts[0] + counts[-1] > 2 * (2 * res.M / 10)


def test_sbc_thinning_contract_large_m():
    res = run_sbc(NormalKnownVariance(n=3), ExactPosterior(n_chains=1, n_draws=99), MU, M=5000, L=99, seed=2)
    assert uniformity_chisq(res)[1] > 0.001


def test_sbc_determinism_across_threads(monkeypatch):
    args = (NormalKnownVariance(n=3), ExactPosterior(n_chains=1, n_draws=20), MU, 40, 19)
    monkeypatch.setenv("PADBENCH_THREADS", "1")
    a = run_sbc(*args, seed=7)
    monkeypatch.setenv("PADBENCH_THREADS", "4")
    b = run_sbc(*args, seed=7)
    assert np.array_equal(a.ranks, b.ranks)


def test_sbc_preconditions():
    model, approx = NormalKnownVariance(), ExactPosterior(n_chains=1, n_draws=20)
    with pytest.raises(ValueError):
        run_sbc(model, approx, MU, M=10, L=19)
    with pytest.raises(ValueError):
        run_sbc(model, approx, MU, M=20, L=5)
    with pytest.raises(ValueError):
        run_sbc(model, approx, MU, M=20, L=19, thin=2)


def test_sbc_auto_thin_for_mcmc():
    rwm = RandomWalkMetropolis(n_chains=2, n_iterations=400, warmup=200)
    res = run_sbc(NormalKnownVariance(n=3), rwm, MU, M=20, L=19, thin=None, seed=3)
    assert res.thin > 1
    assert res.M + res.n_skipped == 20


def test_sbc_csv(tmp_path, sbc_runs):
    sbc_runs["exact"].to_csv(tmp_path / "ranks.csv")
    lines = (tmp_path / "ranks.csv").read_text().splitlines()
    assert lines[0] == "m,rank" and len(lines) == 1001


# --- ECDF envelope ------------------------------------------------------------------


def test_envelope_null_calibration():
    violations = 0
    for s in range(40):
        ranks = rng_for(s, "uniform-ranks").integers(0, 100, size=200)
        violations += ecdf_diff_envelope(SbcResult(ranks, 99, "mu"), seed=1000 + s).violated
    # expected 2 violations at gamma = 0.95
    assert violations <= 6


def test_envelope_width_scaling():
    widths = {}
    for M in (1000, 4000):
        ranks = rng_for(M, "w").integers(0, 100, size=M)
        env = ecdf_diff_envelope(SbcResult(ranks, 99, "mu"))
        widths[M] = np.mean(env.upper - env.lower)
    assert 0.45 <= widths[4000] / widths[1000] <= 0.55


def test_envelope_preconditions():
    res = SbcResult(np.zeros(40, dtype=int), 99, "mu")
    with pytest.raises(ValueError):
        ecdf_diff_envelope(res)
    res = SbcResult(np.zeros(60, dtype=int), 99, "mu")
    with pytest.raises(ValueError):
        ecdf_diff_envelope(res, n_null=100)


def test_envelope_csv(tmp_path):
    env = ecdf_diff_envelope(SbcResult(rng_for(0, "c").integers(0, 20, 100), 19, "mu"))
    env.to_csv(tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "quantile,diff,lower,upper" and len(lines) == 20


# --- data-averaged posterior -----------------------------------------------------------


def test_data_averaged_exact_not_extreme():
    model = NormalKnownVariance(prior_sd=0.5, n=5)
    extreme = 0
    for s in range(10):
        _, rank = data_averaged_posterior_check(model, ExactPosterior(n_chains=1, n_draws=20), M=200, seed=s)
        extreme += rank < 0.01
    assert extreme <= 1


def test_data_averaged_prior_ignoring_detected():
    model = NormalKnownVariance(prior_sd=0.5, n=5)
    mmd2, rank = data_averaged_posterior_check(model, LikelihoodOnly(), M=300, seed=1)
    assert rank < 0.01
    assert mmd2 > 0


def test_data_averaged_precondition():
    with pytest.raises(ValueError):
        data_averaged_posterior_check(NormalKnownVariance(), ExactPosterior(), M=10)

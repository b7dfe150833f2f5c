import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from padbench.draws import (
    DrawsFormatError,
    DrawsTensor,
    NonFiniteDrawsError,
    Pushforward,
    SummaryStatistic,
    pushforward_draws,
    rank_normalize,
    read_draws_csv,
    summarize,
    summarize_values,
    weighted_summary,
    write_draws_csv,
)

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def one_chain(values, name="theta"):
    return DrawsTensor(np.asarray(values, float).reshape(1, -1, 1), [name])


class TestSummarize:
    def test_mean(self):
        assert summarize(one_chain([1, 2, 3]), "theta", SummaryStatistic.mean()) == 2

    def test_median(self):
        assert summarize(one_chain([1, 2, 3]), "theta", SummaryStatistic.quantile(0.5)) == 2

    def test_constant_sd(self):
        assert summarize(one_chain([4.0] * 6), "theta", SummaryStatistic.sd()) == 0

    def test_sd_uses_n_minus_one(self):
        assert summarize(one_chain([1, 2, 3]), "theta", SummaryStatistic.sd()) == pytest.approx(1.0)

    def test_type7_quantile(self):
        x = np.array([3.0, 1.0, 4.0, 1.5, 9.0])
        for p in (0.1, 0.33, 0.9):
            assert summarize_values(x, SummaryStatistic.quantile(p)) == pytest.approx(np.quantile(x, p))

    def test_prob_below(self):
        assert summarize(one_chain([1, 2, 3, 4]), "theta", SummaryStatistic.prob_below(2.5)) == 0.5

    def test_errors(self):
        d = one_chain([1, 2, 3])
        with pytest.raises(KeyError):
            summarize(d, "nope", SummaryStatistic.mean())
        with pytest.raises(ValueError):
            summarize(one_chain([1.0]), "theta", SummaryStatistic.sd())
        with pytest.raises(NonFiniteDrawsError):
            summarize(one_chain([1, np.nan, 3]), "theta", SummaryStatistic.mean())

    def test_quantile_probability_bounds(self):
        for p in (0.0, 1.0, -0.1):
            with pytest.raises(ValueError):
                SummaryStatistic.quantile(p)

    @pytest.mark.parametrize("text", ["mean", "sd", "q0.05", "p<1.5"])
    def test_parse_roundtrip(self, text):
        assert SummaryStatistic.parse(text).label == text

    @given(st.lists(finite, min_size=2, max_size=40), st.randoms(use_true_random=False))
    def test_mean_permutation_invariant(self, xs, rnd):
        ys = list(xs)
        rnd.shuffle(ys)
        a = summarize_values(np.array(xs), SummaryStatistic.mean())
        b = summarize_values(np.array(ys), SummaryStatistic.mean())
        assert a == pytest.approx(b, rel=1e-9, abs=1e-6)

    @given(st.lists(finite, min_size=1, max_size=40))
    def test_median_antisymmetric(self, xs):
        x = np.array(xs)
        med = SummaryStatistic.quantile(0.5)
        assert summarize_values(x, med) == pytest.approx(-summarize_values(-x, med), abs=1e-9)

    def test_chain_layout_irrelevant_for_mean(self):
        x = np.arange(12.0)
        a = DrawsTensor(x.reshape(3, 4), ["v"])
        b = DrawsTensor(x[::-1].reshape(2, 6), ["v"])
        assert summarize(a, "v", SummaryStatistic.mean()) == summarize(b, "v", SummaryStatistic.mean())


class TestWeightedSummary:
    def test_uniform_weights_bit_identical(self):
        x = np.random.default_rng(1).normal(size=101)
        w = np.full(101, 1 / 101)
        for stat in (SummaryStatistic.mean(), SummaryStatistic.sd(), SummaryStatistic.quantile(0.3)):
            assert weighted_summary(x, w, stat) == summarize_values(x, stat)

    def test_point_mass(self):
        x = np.array([1.0, 5.0, 9.0])
        assert weighted_summary(x, [0, 1, 0], SummaryStatistic.mean()) == 5.0


class TestPushforward:
    def test_difference_of_constants(self):
        d = DrawsTensor(np.stack([np.full((2, 5), 3.0), np.full((2, 5), 1.0)], axis=-1), ["beta1", "beta2"])
        psi = Pushforward("diff", lambda p: p["beta1"] - p["beta2"])
        out = pushforward_draws(d, psi)
        assert out.variable_names == ("diff",)
        assert_array_equal(out.column("diff"), np.full((2, 5), 2.0))

    def test_identity(self):
        d = DrawsTensor(np.random.default_rng(0).normal(size=(2, 5, 1)), ["theta"])
        assert_array_equal(pushforward_draws(d, Pushforward.identity("theta")).column("theta"), d.column("theta"))

    def test_square(self):
        d = one_chain([-1, 0, 2])
        out = pushforward_draws(d, Pushforward("sq", lambda p: p["theta"] ** 2))
        assert_array_equal(out.pooled("sq"), [1, 0, 4])

    def test_nonfinite_map_rejected(self):
        with pytest.raises(ValueError):
            with np.errstate(divide="ignore"):
                pushforward_draws(one_chain([0.0, 1.0]), Pushforward("inv", lambda p: 1 / p["theta"]))

    @given(st.permutations(list(range(8))))
    def test_commutes_with_permutation(self, perm):
        x = np.linspace(-2, 3, 8)
        psi = Pushforward("cube", lambda p: p["theta"] ** 3)
        a = pushforward_draws(one_chain(x[perm]), psi).pooled("cube")
        b = pushforward_draws(one_chain(x), psi).pooled("cube")[perm]
        assert_array_equal(a, b)


class TestRankNormalize:
    def test_symmetric_increasing(self):
        z = rank_normalize(one_chain([10, 20, 30]), "theta").pooled("theta")
        assert z[0] < z[1] < z[2]
        assert_allclose(z[0], -z[2])
        assert z[1] == pytest.approx(0.0, abs=1e-15)

    def test_blom_offsets(self):
        from scipy.stats import norm

        z = rank_normalize(one_chain([3.0, 1.0, 2.0, 4.0]), "theta").pooled("theta")
        ranks = np.array([3, 1, 2, 4])
        assert_allclose(z, norm.ppf((ranks - 0.375) / 4.25))

    def test_identical_rejected(self):
        with pytest.raises(ValueError):
            rank_normalize(one_chain([5, 5]), "theta")

    @given(st.lists(st.integers(-10_000, 10_000), min_size=3, max_size=30, unique=True))
    def test_monotone_invariance(self, xs):
        x = np.array(xs, dtype=float)
        a = rank_normalize(one_chain(x), "theta").pooled("theta")
        b = rank_normalize(one_chain(x**3 + x - 7), "theta").pooled("theta")
        assert_allclose(a, b)


class TestTensor:
    def test_immutable(self):
        d = one_chain([1, 2, 3])
        with pytest.raises(ValueError):
            d.values[0, 0, 0] = 5

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            DrawsTensor(np.zeros((1, 2, 2)), ["a", "a"])

    def test_nonfinite_flag(self):
        assert one_chain([1, np.inf]).contains_nonfinite
        assert not one_chain([1, 2]).contains_nonfinite


class TestCsv:
    def test_roundtrip_any_row_order(self, tmp_path):
        d = DrawsTensor(np.random.default_rng(3).normal(size=(2, 4, 2)), ["a", "b"])
        path = tmp_path / "d.csv"
        write_draws_csv(d, path)
        lines = path.read_text().splitlines()
        path.write_text("\n".join([lines[0]] + lines[1:][::-1]) + "\n")
        back = read_draws_csv(path)
        assert_array_equal(back.values, d.values)
        assert back.variable_names == ("a", "b")

    def test_duplicate_pair_reported(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("chain,draw,x\n1,1,0.5\n1,2,0.1\n1,1,0.7\n")
        with pytest.raises(DrawsFormatError) as info:
            read_draws_csv(path)
        assert any("duplicate" in p for p in info.value.problems)

    def test_bad_header_and_zero_index(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("c,d,x\n1,1,0\n")
        with pytest.raises(DrawsFormatError):
            read_draws_csv(path)
        path.write_text("chain,draw,x\n0,1,0\n")
        with pytest.raises(DrawsFormatError):
            read_draws_csv(path)

    def test_missing_pair(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("chain,draw,x\n1,1,0\n2,2,0\n")
        with pytest.raises(DrawsFormatError):
            read_draws_csv(path)

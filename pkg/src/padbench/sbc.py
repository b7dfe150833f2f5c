"""Simulation-based calibration.

Ranks follow the written indicator ``r = sum_s I(psi* <= psi^(s))``: a
posterior biased upward puts most draws above the truth and so produces
an excess of *high* ranks; overconfident posteriors produce a U shape.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chisquare

from ._utils import parallel_map, rng_for
from .convergence import ess_from_chains, split_chains
from .draws import Pushforward, pushforward_draws
from .models import Approximator, ModelSpec, fit_seed
from .recoverability import _fit_with_policy, _gauss_kernel, median_heuristic


def rank_statistic(truth: float, draws, rng=None, tie_break: str = "random") -> int:
    """Number of draws at or above ``truth``.

    With ``tie_break="random"`` each draw exactly equal to the truth counts
    with probability 1/2 (seeded through ``rng``); ``"deterministic"``
    counts every tie, which is the literal ``<=`` convention.
    """
    draws = np.asarray(draws, dtype=float).reshape(-1)
    if draws.size < 1:
        raise ValueError("need at least one draw")
    if not np.isfinite(truth) or not np.all(np.isfinite(draws)):
        raise ValueError("nonfinite truth or draws")
    above = int(np.sum(draws > truth))
    ties = int(np.sum(draws == truth))
    if ties == 0:
        return above
    if tie_break == "deterministic":
        return above + ties
    if tie_break != "random":
        raise ValueError(f"unknown tie_break {tie_break!r}")
    rng = rng if rng is not None else np.random.default_rng(0)
    return above + int(rng.binomial(ties, 0.5))


@dataclass
class SbcResult:
    ranks: np.ndarray
    L: int
    psi_name: str
    n_skipped: int = 0
    thin: int = 1

    def __post_init__(self):
        self.ranks = np.asarray(self.ranks, dtype=int).reshape(-1)
        if self.ranks.size < 1:
            raise ValueError("SBC result needs at least one rank")
        if np.any(self.ranks < 0) or np.any(self.ranks > self.L):
            raise ValueError("ranks must lie in 0..L")

    @property
    def M(self) -> int:
        return self.ranks.size

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "rank"])
            for m, r in enumerate(self.ranks, start=1):
                w.writerow([m, int(r)])


def _default_thin(fit, psi) -> int:
    x = pushforward_draws(fit.draws, psi).column(psi.name)
    if x.shape[1] < 4:
        return 1
    try:
        e = ess_from_chains(split_chains(np.asarray(x)))
    except ValueError:
        return 1
    return max(1, int(math.ceil(x.size / e)))


def run_sbc(
    model: ModelSpec,
    approximator: Approximator,
    psi: Pushforward,
    M: int,
    L: int,
    thin: int | None = 1,
    seed: int = 0,
    tie_break: str = "random",
    gate_policy: str = "skip",
) -> SbcResult:
    """Rank ``psi(theta*)`` among ``L`` posterior draws for ``M`` prior simulations.

    Each instance uses seeds derived from ``(seed, m)`` so results do not
    depend on scheduling. ``thin=None`` picks the thinning factor from the
    ESS/S ratio of each fit.
    """
    if M < 20:
        raise ValueError("SBC needs M >= 20")
    if L < 9:
        raise ValueError("SBC needs L >= 9")
    names = model.parameter_names

    def one(m):
        rng = rng_for(seed, m, "sbc")
        theta = model.prior_sample(rng)
        data = model.simulate(theta, rng)
        fit = _fit_with_policy(approximator, model, data, fit_seed(seed, m, "sbc"), gate_policy)
        if fit is None:
            return None
        k = _default_thin(fit, psi) if thin is None else int(thin)
        x = pushforward_draws(fit.draws, psi).column(psi.name)[:, ::k].reshape(-1)
        if x.size < L:
            raise ValueError(
                f"approximator produced {x.size} draws after thinning by {k}; need L={L}"
            )
        truth = psi.evaluate_vector(theta, names)
        return rank_statistic(truth, x[:L], rng_for(seed, m, "sbc-ties"), tie_break), k

    results = parallel_map(one, range(M))
    kept = [r for r in results if r is not None]
    if not kept:
        raise ValueError("every SBC fit was skipped by the convergence gate")
    return SbcResult(
        [r[0] for r in kept], L, psi.name, n_skipped=len(results) - len(kept),
        thin=max(r[1] for r in kept),
    )


def rank_bins(result: SbcResult, n_bins: int) -> np.ndarray:
    if (result.L + 1) % n_bins:
        raise ValueError(f"L + 1 = {result.L + 1} is not divisible by n_bins = {n_bins}")
    width = (result.L + 1) // n_bins
    return np.bincount(result.ranks // width, minlength=n_bins)


def uniformity_chisq(result: SbcResult, n_bins: int = 10):
    """Pearson chi-square test of binned ranks against equal counts.

    Returns ``(statistic, p_value)`` with ``n_bins - 1`` degrees of freedom.
    """
    counts = rank_bins(result, n_bins)
    expected = result.M / n_bins
    if expected < 5:
        raise ValueError(f"expected count per bin is {expected:g} < 5")
    stat, p = chisquare(counts)
    return float(stat), float(p)


@dataclass
class EcdfEnvelope:
    quantiles: np.ndarray
    diff: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    violated: bool
    gamma: float
    flags: list = field(default_factory=list)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["quantile", "diff", "lower", "upper"])
            for row in zip(self.quantiles, self.diff, self.lower, self.upper):
                w.writerow([repr(float(v)) for v in row])


def _ecdf_diff(ranks: np.ndarray, L: int) -> np.ndarray:
    """ECDF(k) - k/(L+1) at k = 1..L, with ECDF(k) = fraction of ranks < k."""
    counts = np.bincount(ranks, minlength=L + 1)
    below = np.cumsum(counts)[:-1] / ranks.size
    z = np.arange(1, L + 1) / (L + 1)
    return below - z


def ecdf_diff_envelope(result: SbcResult, gamma: float = 0.95, n_null: int = 999, seed: int = 0) -> EcdfEnvelope:
    """ECDF-difference curve of the ranks with a simultaneous ``gamma`` band.

    The band has the binomial shape ``c * sqrt(z (1 - z) / M)``; ``c`` is the
    smallest constant for which a ``gamma`` fraction of ``n_null`` simulated
    uniform rank sets lie entirely inside it.
    """
    if result.M < 50:
        raise ValueError("ECDF envelope needs M >= 50")
    if n_null < 999:
        raise ValueError("n_null must be at least 999")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    L, M = result.L, result.M
    z = np.arange(1, L + 1) / (L + 1)
    sd = np.sqrt(z * (1 - z) / M)
    rng = rng_for(seed, "ecdf-null")
    null_ranks = rng.integers(0, L + 1, size=(n_null, M))
    # vectorized ECDF of every null set
    counts = np.zeros((n_null, L + 1))
    np.add.at(counts, (np.repeat(np.arange(n_null), M), null_ranks.reshape(-1)), 1)
    null_diff = np.cumsum(counts, axis=1)[:, :-1] / M - z
    c = float(np.quantile(np.max(np.abs(null_diff) / sd, axis=1), gamma, method="higher"))
    diff = _ecdf_diff(result.ranks, L)
    upper, lower = c * sd, -c * sd
    violated = bool(np.any(diff > upper) or np.any(diff < lower))
    return EcdfEnvelope(z, diff, lower, upper, violated, gamma)


@dataclass
class SelfConsistency:
    mmd2: float
    null_rank: float

    def __iter__(self):
        return iter((self.mmd2, self.null_rank))


def data_averaged_posterior_check(
    model: ModelSpec,
    approximator: Approximator,
    M: int,
    draws_per_fit: int = 1,
    seed: int = 0,
    n_perm: int = 199,
    gate_policy: str = "skip",
) -> SelfConsistency:
    """Compare the data-averaged posterior with the prior.

    Pools ``draws_per_fit`` random posterior draws from each of ``M`` fits on
    prior-predictive data and tests them against fresh prior draws with an
    MMD permutation test. ``null_rank`` is the permutation p-value.
    """
    if M < 100:
        raise ValueError("data-averaged posterior check needs M >= 100")

    def one(m):
        rng = rng_for(seed, m, "dap")
        theta = model.prior_sample(rng)
        data = model.simulate(theta, rng)
        fit = _fit_with_policy(approximator, model, data, fit_seed(seed, m, "dap"), gate_policy)
        if fit is None:
            return None
        pooled = fit.draws.pooled_matrix()
        idx = rng.integers(0, pooled.shape[0], size=draws_per_fit)
        return pooled[idx]

    post = [r for r in parallel_map(one, range(M)) if r is not None]
    if not post:
        raise ValueError("every fit was skipped by the convergence gate")
    post = np.vstack(post)
    prior = model.prior_sample(rng_for(seed, "dap-prior"), post.shape[0])
    pooled = np.vstack([post, prior])
    scale = pooled.std(axis=0, ddof=1)
    scale[scale == 0] = 1.0
    pooled = pooled / scale
    h = median_heuristic(pooled)
    K = _gauss_kernel(pooled, pooled, h)
    n = post.shape[0]

    def stat(idx_a, idx_b):
        kaa = K[np.ix_(idx_a, idx_a)]
        kbb = K[np.ix_(idx_b, idx_b)]
        kab = K[np.ix_(idx_a, idx_b)]
        na, nb = idx_a.size, idx_b.size
        return (
            (kaa.sum() - np.trace(kaa)) / (na * (na - 1))
            + (kbb.sum() - np.trace(kbb)) / (nb * (nb - 1))
            - 2.0 * kab.mean()
        )

    all_idx = np.arange(pooled.shape[0])
    observed = stat(all_idx[:n], all_idx[n:])
    rng = rng_for(seed, "dap-perm")
    exceed = 0
    for _ in range(n_perm):
        perm = rng.permutation(all_idx)
        if stat(perm[:n], perm[n:]) >= observed:
            exceed += 1
    return SelfConsistency(float(observed), (1 + exceed) / (n_perm + 1))

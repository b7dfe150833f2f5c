"""Parameter recoverability: contraction, surprise, information gain,
point recovery, coverage, sharpness and a prior-predictive misspecification score."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist, pdist
from scipy.stats import binomtest

from ._utils import derive_seed, parallel_map, rng_for
from .convergence import RHAT_THRESHOLD, split_rhat
from .draws import (
    DrawsTensor,
    Pushforward,
    SummaryStatistic,
    pushforward_draws,
    read_draws_csv,
    summarize_values,
)
from .models import (
    Approximator,
    Dataset,
    ModelSpec,
    fit_seed,
    prior_draws,
    read_dataset_csv,
    write_dataset_csv,
)


class ConvergenceGateError(RuntimeError):
    """A fit inside a study failed the convergence gate under the abort policy."""


def _psi_values(draws: DrawsTensor, psi: Pushforward | None) -> np.ndarray:
    if psi is None:
        if len(draws.variable_names) != 1:
            raise ValueError("pass a pushforward for multi-variable draws")
        return draws.pooled(draws.variable_names[0])
    return pushforward_draws(draws, psi).pooled(psi.name)


def posterior_contraction(prior_draws: DrawsTensor, posterior_draws: DrawsTensor, psi: Pushforward | None = None) -> float:
    """``1 - Var_post(psi) / Var_prior(psi)``.

    Negative values (posterior wider than prior) are returned unchanged and
    trigger a warning.
    """
    v_prior = np.var(_psi_values(prior_draws, psi), ddof=1)
    if v_prior == 0:
        raise ValueError("zero prior variance")
    v_post = np.var(_psi_values(posterior_draws, psi), ddof=1)
    pc = float(1.0 - v_post / v_prior)
    if pc < 0:
        warnings.warn("negative posterior contraction: posterior wider than prior", RuntimeWarning)
    return pc


def bayesian_surprise_gaussian(prior, posterior) -> float:
    """KL divergence ``KL[N_post || N_prior]`` in nats; arguments are ``(mean, sd)``."""
    m_pr, s_pr = prior
    m_po, s_po = posterior
    if s_pr <= 0 or s_po <= 0:
        raise ValueError("standard deviations must be positive")
    return float(
        math.log(s_pr / s_po) + (s_po**2 + (m_po - m_pr) ** 2) / (2 * s_pr**2) - 0.5
    )


def _as_matrix(x) -> np.ndarray:
    if isinstance(x, DrawsTensor):
        return x.pooled_matrix()
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def median_heuristic(x, y=None) -> float:
    pooled = _as_matrix(x) if y is None else np.vstack([_as_matrix(x), _as_matrix(y)])
    d = pdist(pooled)
    d = d[d > 0]
    if d.size == 0:
        raise ValueError("median heuristic undefined: all points coincide")
    return float(np.median(d))


def _gauss_kernel(a, b, h):
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * h * h))


def mmd_squared(draws_a, draws_b, bandwidth="median") -> float:
    """Unbiased U-statistic estimate of squared MMD with a Gaussian kernel.

    Accepts :class:`DrawsTensor` (all variables, pooled) or arrays of shape
    ``(n,)`` / ``(n, d)``. Can be slightly negative.
    """
    a, b = _as_matrix(draws_a), _as_matrix(draws_b)
    if a.shape[0] < 2 or b.shape[0] < 2:
        raise ValueError("MMD needs at least 2 draws per sample")
    h = median_heuristic(a, b) if bandwidth == "median" else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    m, n = a.shape[0], b.shape[0]
    kaa = _gauss_kernel(a, a, h)
    kbb = _gauss_kernel(b, b, h)
    kab = _gauss_kernel(a, b, h)
    term_a = (kaa.sum() - np.trace(kaa)) / (m * (m - 1))
    term_b = (kbb.sum() - np.trace(kbb)) / (n * (n - 1))
    return float(term_a + term_b - 2.0 * kab.mean())


def _fit_passes_gate(fit, threshold=RHAT_THRESHOLD) -> bool:
    draws = fit.draws
    if draws.chain_count * draws.draws_per_chain < 8 or draws.draws_per_chain < 4:
        return True
    for var in draws.variable_names:
        try:
            if split_rhat(draws, var, "rank_normal") > threshold:
                return False
        except ValueError:
            return False
    return True


def _fit_with_policy(approximator, model, data, seed, gate_policy):
    fit = approximator.fit(model, data, seed=seed)
    if approximator.is_mcmc and gate_policy != "off" and not _fit_passes_gate(fit):
        if gate_policy == "abort":
            raise ConvergenceGateError("fit failed the convergence gate")
        return None
    return fit


@dataclass
class InformationGain:
    """Mean per-instance information gain and its Monte Carlo standard error."""

    estimate: float
    mc_error: float
    values: np.ndarray
    n_skipped: int = 0
    flags: list = field(default_factory=list)

    def __iter__(self):
        return iter((self.estimate, self.mc_error))


def expected_information_gain(
    model: ModelSpec,
    approximator: Approximator,
    psi: Pushforward,
    M: int,
    measure: str = "epc",
    seed: int = 0,
    n_prior_draws: int = 4000,
    gate_policy: str = "skip",
) -> InformationGain:
    """Expected posterior contraction or expected Gaussian-approximate surprise.

    For each instance a ground truth is drawn from the prior, data are
    simulated and the approximator is fit; per-instance contraction (``epc``)
    or Gaussian-moment KL (``ebs_gaussian_approx``) is averaged over
    instances. ``M=1`` is allowed and yields ``mc_error = nan`` with a flag.
    """
    if measure not in ("epc", "ebs_gaussian_approx"):
        raise ValueError(f"unknown measure {measure!r}")
    if M < 1:
        raise ValueError("M must be at least 1")
    prior = prior_draws(model, n_draws=n_prior_draws, seed=derive_seed(seed, "eig-prior"))
    prior_psi = _psi_values(prior, psi)
    prior_moments = (float(prior_psi.mean()), float(prior_psi.std(ddof=1)))

    def one(m):
        rng = rng_for(seed, m, "eig")
        theta = model.prior_sample(rng)
        data = model.simulate(theta, rng)
        fit = _fit_with_policy(approximator, model, data, fit_seed(seed, m, "eig"), gate_policy)
        if fit is None:
            return None
        post = _psi_values(fit.draws, psi)
        if measure == "epc":
            return 1.0 - np.var(post, ddof=1) / prior_moments[1] ** 2
        return bayesian_surprise_gaussian(prior_moments, (float(post.mean()), float(post.std(ddof=1))))

    results = parallel_map(one, range(M))
    values = np.array([r for r in results if r is not None], dtype=float)
    skipped = sum(r is None for r in results)
    flags = ["skipped_fits"] if skipped else []
    if values.size == 0:
        return InformationGain(float("nan"), float("nan"), values, skipped, flags + ["no_valid_fits"])
    if values.size == 1:
        return InformationGain(float(values[0]), float("nan"), values, skipped, flags + ["undefined_mc_error"])
    return InformationGain(
        float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size)), values, skipped, flags
    )


# --------------------------------------------------------------------------
# recovery studies


@dataclass
class RecoveryStudy:
    """Ground truths and posterior draws of ``psi`` for M simulated datasets."""

    truths: np.ndarray
    draws: list
    mode: str = "prior_predictive"
    psi_name: str = "psi"
    datasets: list | None = None
    n_skipped: int = 0

    def __post_init__(self):
        self.truths = np.asarray(self.truths, dtype=float).reshape(-1)
        self.draws = [np.asarray(d, dtype=float).reshape(-1) for d in self.draws]
        if len(self.draws) != self.truths.size:
            raise ValueError("one draw set per ground truth is required")
        if self.mode not in ("fixed_truth", "prior_predictive"):
            raise ValueError(f"unknown generation mode {self.mode!r}")

    @property
    def M(self) -> int:
        return self.truths.size

    def intervals(self, q: float) -> np.ndarray:
        """Central ``q`` credible intervals, shape ``(M, 2)``."""
        if not 0 < q < 1:
            raise ValueError("q must lie in (0, 1)")
        lo = SummaryStatistic.quantile((1 - q) / 2)
        hi = SummaryStatistic.quantile((1 + q) / 2)
        return np.array([[summarize_values(d, lo), summarize_values(d, hi)] for d in self.draws])

    def save(self, directory):
        """Write ``truths.csv``, ``draws/m=<k>.csv`` and ``datasets/m=<k>.csv``."""
        directory = Path(directory)
        (directory / "draws").mkdir(parents=True, exist_ok=True)
        with open(directory / "truths.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["m", "phi"])
            for m, phi in enumerate(self.truths, start=1):
                w.writerow([m, repr(float(phi))])
        for m, d in enumerate(self.draws, start=1):
            DrawsTensor.from_pooled(d, [self.psi_name]).to_csv(directory / "draws" / f"m={m}.csv")
        if self.datasets is not None:
            (directory / "datasets").mkdir(exist_ok=True)
            for m, ds in enumerate(self.datasets, start=1):
                write_dataset_csv(ds, directory / "datasets" / f"m={m}.csv")
        meta = {"M": self.M, "mode": self.mode, "psi": self.psi_name, "n_skipped": self.n_skipped}
        (directory / "study.json").write_text(json.dumps(meta, indent=2, sort_keys=True))

    @classmethod
    def load(cls, directory) -> "RecoveryStudy":
        directory = Path(directory)
        meta = json.loads((directory / "study.json").read_text())
        with open(directory / "truths.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        truths = [float(r["phi"]) for r in sorted(rows, key=lambda r: int(r["m"]))]
        draws = [
            read_draws_csv(directory / "draws" / f"m={m}.csv").pooled(meta["psi"])
            for m in range(1, len(truths) + 1)
        ]
        datasets = None
        if (directory / "datasets").is_dir():
            datasets = [read_dataset_csv(directory / "datasets" / f"m={m}.csv") for m in range(1, len(truths) + 1)]
        return cls(truths, draws, meta["mode"], meta["psi"], datasets, meta.get("n_skipped", 0))


def run_recovery_study(
    model: ModelSpec,
    approximator: Approximator,
    psi: Pushforward,
    M: int,
    mode: str = "prior_predictive",
    fixed_theta=None,
    design=None,
    seed: int = 0,
    gate_policy: str = "skip",
    keep_datasets: bool = False,
) -> RecoveryStudy:
    """Simulate M datasets, fit each, and collect draws of ``psi``.

    ``prior_predictive`` draws a fresh truth per instance from the prior;
    ``fixed_truth`` reuses ``fixed_theta``. Fits failing the convergence gate
    are skipped (and counted) unless ``gate_policy="abort"``.
    """
    if mode == "fixed_truth" and fixed_theta is None:
        raise ValueError("fixed_truth mode needs fixed_theta")
    names = model.parameter_names

    def one(m):
        rng = rng_for(seed, m, "recovery")
        theta = model.prior_sample(rng) if mode == "prior_predictive" else np.asarray(fixed_theta, dtype=float)
        data = model.simulate(theta, rng, design)
        fit = _fit_with_policy(approximator, model, data, fit_seed(seed, m, "recovery"), gate_policy)
        if fit is None:
            return None
        return psi.evaluate_vector(theta, names), _psi_values(fit.draws, psi), data

    results = [r for r in parallel_map(one, range(M))]
    kept = [r for r in results if r is not None]
    if not kept:
        raise ValueError("every fit was skipped by the convergence gate")
    return RecoveryStudy(
        [r[0] for r in kept], [r[1] for r in kept], mode, psi.name,
        [r[2] for r in kept] if keep_datasets else None,
        n_skipped=len(results) - len(kept),
    )


_DISTANCES = {
    "bias": lambda est, truth: est - truth,
    "squared": lambda est, truth: (est - truth) ** 2,
    "absolute": lambda est, truth: np.abs(est - truth),
}


def point_recovery(study: RecoveryStudy, estimator: SummaryStatistic | None = None, distance: str = "squared") -> float:
    """Average distance between a point estimate and the ground truth."""
    if study.M == 0:
        raise ValueError("empty study")
    estimator = estimator or SummaryStatistic.mean()
    try:
        f = _DISTANCES[distance]
    except KeyError:
        raise ValueError(f"unknown distance {distance!r}") from None
    est = np.array([summarize_values(d, estimator) for d in study.draws])
    return float(np.mean(f(est, study.truths)))


def posterior_zscores(study: RecoveryStudy) -> np.ndarray:
    """``(posterior mean - truth) / posterior sd`` per instance."""
    means = np.array([d.mean() for d in study.draws])
    sds = np.array([d.std(ddof=1) for d in study.draws])
    with np.errstate(divide="ignore", invalid="ignore"):
        return (means - study.truths) / sds


@dataclass
class CoverageResult:
    coverage: float
    ci: tuple
    hits: int
    M: int

    def __iter__(self):
        return iter((self.coverage, self.ci))


def coverage(study: RecoveryStudy, q: float) -> CoverageResult:
    """Fraction of truths inside their central ``q`` interval, with a 95% Clopper-Pearson CI."""
    if study.M == 0:
        raise ValueError("empty study")
    iv = study.intervals(q)
    hits = int(np.sum((iv[:, 0] <= study.truths) & (study.truths <= iv[:, 1])))
    ci = binomtest(hits, study.M).proportion_ci(0.95)
    return CoverageResult(hits / study.M, (float(ci.low), float(ci.high)), hits, study.M)


@dataclass
class SharpnessResult:
    verdict: str
    width_a: float
    width_b: float
    coverage_a: float
    coverage_b: float
    flags: list = field(default_factory=list)


def sharpness_compare(study_a: RecoveryStudy, study_b: RecoveryStudy, q: float) -> SharpnessResult:
    """Compare two studies' ``q`` intervals: narrower wins only if not worse calibrated.

    Calibration error is ``|coverage - q|``; one side counts as at least as
    well calibrated when its error exceeds the other's by no more than two
    binomial standard errors.
    """
    if study_a.M != study_b.M or not np.array_equal(study_a.truths, study_b.truths):
        raise ValueError("studies must share the same ground-truth instances")
    cov_a, cov_b = coverage(study_a, q), coverage(study_b, q)
    iv_a, iv_b = study_a.intervals(q), study_b.intervals(q)
    width_a = float(np.mean(iv_a[:, 1] - iv_a[:, 0]))
    width_b = float(np.mean(iv_b[:, 1] - iv_b[:, 0]))
    tol = 2.0 * math.sqrt(q * (1 - q) / study_a.M)
    err_a, err_b = abs(cov_a.coverage - q), abs(cov_b.coverage - q)
    flags = []
    for label, c in (("a", cov_a), ("b", cov_b)):
        if c.ci[1] < q:
            flags.append(f"{label}_under_coverage")
    verdict = "incomparable"
    if err_a <= err_b + tol and width_a < width_b:
        verdict = "a_sharper"
    elif err_b <= err_a + tol and width_b < width_a:
        verdict = "b_sharper"
    return SharpnessResult(verdict, width_a, width_b, cov_a.coverage, cov_b.coverage, flags)


@dataclass
class MisspecificationScore:
    mmd2: float
    null_rank: float

    def __iter__(self):
        return iter((self.mmd2, self.null_rank))


def misspecification_score(model: ModelSpec, observed: Dataset, summary, n_sim: int = 200, seed: int = 0, bandwidth="median") -> MisspecificationScore:
    """Compare an observed data summary against prior-predictive summaries.

    ``summary`` maps a :class:`Dataset` to a real vector. Returns the squared
    MMD between the observed point and the simulated cloud, and the rank of
    the observed point's mean kernel similarity within the leave-one-out
    similarities of the simulated points. Small ranks mean the observed data
    look atypical for the model.
    """
    if n_sim < 50:
        raise ValueError("n_sim must be at least 50")
    obs = np.atleast_1d(np.asarray(summary(observed), dtype=float))
    if not np.all(np.isfinite(obs)):
        raise ValueError("observed summary is nonfinite")
    sims = []
    for i in range(n_sim):
        rng = rng_for(seed, i, "misspec")
        theta = model.prior_sample(rng)
        sims.append(np.atleast_1d(np.asarray(summary(model.simulate(theta, rng, observed.design)), dtype=float)))
    sims = np.array(sims)
    if not np.all(np.isfinite(sims)):
        raise ValueError("simulated summary is nonfinite")
    center, scale = sims.mean(axis=0), sims.std(axis=0, ddof=1)
    scale[scale == 0] = 1.0
    sims_z = (sims - center) / scale
    obs_z = ((obs - center) / scale)[None, :]
    h = median_heuristic(sims_z) if bandwidth == "median" else float(bandwidth)
    k_ss = _gauss_kernel(sims_z, sims_z, h)
    k_os = _gauss_kernel(obs_z, sims_z, h)[0]
    off = (k_ss.sum() - np.trace(k_ss)) / (n_sim * (n_sim - 1))
    mmd2 = float(1.0 - 2.0 * k_os.mean() + off)
    null = (k_ss.sum(axis=1) - np.diag(k_ss)) / (n_sim - 1)
    rank = (1 + np.sum(null <= k_os.mean())) / (n_sim + 1)
    return MisspecificationScore(mmd2, float(rank))

"""Prior and posterior predictive performance: marginal likelihood, Bayes
factors, model probabilities, Gibbs loss, ELPD, importance-sampled and
refit leave-one-out, and WAIC."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

from ._utils import log_mean_exp, normalized_weights, parallel_map, rng_for
from .draws import DrawsTensor
from .models import Approximator, Dataset, ModelSpec, fit_seed

PROVENANCES = ("prior_draws", "posterior_draws")


class PointwiseLogLik:
    """Matrix of ``log p(y_n | theta^(s))`` with shape ``(S, N)``.

    ``-inf`` entries are allowed (support violations) and flagged; NaN and
    ``+inf`` are rejected.
    """

    def __init__(self, values, provenance: str):
        values = np.array(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("loglik must be a (draws, observations) matrix")
        if np.any(np.isnan(values)) or np.any(values == np.inf):
            raise ValueError("loglik contains NaN or +inf")
        if provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        values.setflags(write=False)
        self.values = values
        self.provenance = provenance

    @property
    def n_draws(self) -> int:
        return self.values.shape[0]

    @property
    def n_obs(self) -> int:
        return self.values.shape[1]

    @property
    def has_neg_inf(self) -> bool:
        return bool(np.any(np.isneginf(self.values)))

    @classmethod
    def from_model(cls, model: ModelSpec, draws, data: Dataset, provenance="posterior_draws"):
        theta = draws.pooled_matrix() if isinstance(draws, DrawsTensor) else np.asarray(draws, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = model.loglik_pointwise(theta, data)
        return cls(np.nan_to_num(ll, nan=-np.inf), provenance)

    def to_csv(self, path):
        """Long-form ``draw,obs,loglik`` with 1-based indices."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["draw", "obs", "loglik"])
            for s in range(self.n_draws):
                for n in range(self.n_obs):
                    w.writerow([s + 1, n + 1, repr(float(self.values[s, n]))])

    @classmethod
    def read_csv(cls, path, provenance="posterior_draws"):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != ["draw", "obs", "loglik"]:
                raise ValueError("expected header draw,obs,loglik")
            for row in reader:
                rows.append((int(row["draw"]), int(row["obs"]), float(row["loglik"])))
        if not rows:
            raise ValueError("empty loglik file")
        S = max(r[0] for r in rows)
        N = max(r[1] for r in rows)
        values = np.full((S, N), np.nan)
        for s, n, v in rows:
            if s < 1 or n < 1:
                raise ValueError("draw and obs indices are 1-based")
            values[s - 1, n - 1] = v
        if np.any(np.isnan(values)):
            raise ValueError("loglik file does not cover every (draw, obs) pair")
        return cls(values, provenance)


@dataclass
class ElpdResult:
    total: float
    pointwise: np.ndarray
    se: float
    method: str
    flags: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def from_pointwise(cls, pointwise, method, flags=None, diagnostics=None):
        pointwise = np.asarray(pointwise, dtype=float)
        n = pointwise.size
        finite = np.all(np.isfinite(pointwise))
        se = float(math.sqrt(n * np.var(pointwise))) if finite and n > 0 else float("nan")
        return cls(float(np.sum(pointwise)), pointwise, se, method, list(flags or []), dict(diagnostics or {}))

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "pointwise": self.pointwise.tolist(),
            "se": self.se,
            "method": self.method,
            "flags": list(self.flags),
            "diagnostics": {k: np.asarray(v).tolist() for k, v in self.diagnostics.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class MarginalLikelihood:
    log_ml: float
    mc_se_flag: bool
    effective_draws: float
    mc_se: float

    def __iter__(self):
        return iter((self.log_ml, self.mc_se_flag))


def log_marginal_likelihood_mc(model: ModelSpec, data: Dataset, n_prior_draws: int = 10_000, seed: int = 0) -> MarginalLikelihood:
    """Naive Monte Carlo ``log E_prior[p(y | theta)]``.

    The flag is raised when fewer than 100 prior draws effectively carry the
    estimate (exponentiated entropy of the normalized likelihood weights),
    which is when the estimator is dominated by a handful of draws.
    """
    if n_prior_draws < 100:
        raise ValueError("n_prior_draws must be at least 100")
    if data.n == 0:
        return MarginalLikelihood(0.0, False, float(n_prior_draws), 0.0)
    theta = model.prior_sample(rng_for(seed, "log-ml"), n_prior_draws)
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.nan_to_num(model.loglik_pointwise(theta, data).sum(axis=-1), nan=-np.inf)
    if not np.any(np.isfinite(ll)):
        raise ValueError("every prior draw has zero likelihood")
    log_ml = float(log_mean_exp(ll))
    w, entropy = normalized_weights(ll)
    eff = float(math.exp(entropy))
    # delta-method standard error of the log of a sample mean
    rel = np.exp(ll - ll.max())
    mc_se = float(np.std(rel, ddof=1) / (math.sqrt(rel.size) * rel.mean()))
    return MarginalLikelihood(log_ml, eff < 100, eff, mc_se)


def bayes_factor(log_ml_j: float, log_ml_k: float) -> float:
    if not (np.isfinite(log_ml_j) and np.isfinite(log_ml_k)):
        raise ValueError("log marginal likelihoods must be finite")
    return float(math.exp(log_ml_j - log_ml_k))


def posterior_model_probs(log_mls, prior_probs=None) -> np.ndarray:
    log_mls = np.asarray(log_mls, dtype=float).reshape(-1)
    if prior_probs is None:
        prior_probs = np.full(log_mls.size, 1.0 / log_mls.size)
    prior_probs = np.asarray(prior_probs, dtype=float).reshape(-1)
    if prior_probs.shape != log_mls.shape:
        raise ValueError("one prior probability per model is required")
    if np.any(prior_probs < 0) or abs(prior_probs.sum() - 1.0) > 1e-9:
        raise ValueError("prior model probabilities must be nonnegative and sum to 1")
    with np.errstate(divide="ignore"):
        return softmax(log_mls + np.log(prior_probs))


def gibbs_loss(loglik: PointwiseLogLik):
    """``sum_n mean_s log p(y_n | theta^(s))`` over prior draws.

    Returns ``(value, flags)``; ``-inf`` entries make the value ``-inf``.
    """
    if loglik.provenance != "prior_draws":
        raise ValueError("Gibbs loss is defined on prior draws")
    flags = ["neg_inf_loglik"] if loglik.has_neg_inf else []
    value = float(np.sum(np.mean(loglik.values, axis=0)))
    return value, flags


def _weighted_lpd(values: np.ndarray, weights) -> np.ndarray:
    """Column-wise ``log sum_s w_s exp(values[s, n])``."""
    S = values.shape[0]
    if weights is None:
        return logsumexp(values, axis=0) - math.log(S)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if np.any(w < 0) or not np.allclose(w.sum(axis=0), 1.0, atol=1e-9):
        raise ValueError("weights must be nonnegative and sum to 1")
    with np.errstate(divide="ignore"):
        return logsumexp(values + np.log(w), axis=0)


def elpd(loglik: PointwiseLogLik, weights=None, joint: bool = False) -> ElpdResult:
    """Log expected predictive density of each observation.

    ``weights`` may be per draw ``(S,)`` or per draw and observation
    ``(S, N)``. With ``joint=True`` the observations are aggregated inside
    the expectation, giving ``log E[prod_n p(y_n | theta)]`` as a single
    pointwise entry.
    """
    values = loglik.values
    method = "prior" if loglik.provenance == "prior_draws" else "posterior"
    if joint:
        values = values.sum(axis=1, keepdims=True)
        method += "_joint"
    if np.any(np.all(np.isneginf(values), axis=0)):
        raise ValueError("an observation has -inf log-likelihood under every draw")
    if weights is not None and np.ndim(weights) == 2 and joint:
        raise ValueError("per-observation weights are incompatible with joint aggregation")
    flags = ["neg_inf_loglik"] if np.any(np.isneginf(values)) else []
    if weights is not None:
        w = np.asarray(weights, dtype=float)
        if np.any(w < 0) or not np.allclose(w.sum(axis=0), 1.0, atol=1e-9):
            raise ValueError("weights must be nonnegative and sum to 1")
        if w.ndim == 1 and np.all(w == w[0]) and w.size == values.shape[0]:
            weights = None  # exact uniform weights reproduce the unweighted value
    return ElpdResult.from_pointwise(_weighted_lpd(values, weights), method, flags)


def loo_is(loglik: PointwiseLogLik, min_effective: float = 10.0) -> ElpdResult:
    """Truncated importance-sampling leave-one-out.

    Raw weights ``exp(-loglik[s, n])`` are truncated at ``mean * S**0.75``
    and renormalized per observation. ``diagnostics["weight_entropy"]``
    holds the exponentiated entropy of each observation's weights; values
    below ``min_effective`` are flagged as ``unreliable_obs_<n>``.
    """
    if loglik.provenance != "posterior_draws":
        raise ValueError("LOO needs posterior draws")
    S, N = loglik.values.shape
    if S < 100:
        raise ValueError("importance-sampled LOO needs at least 100 draws")
    values = loglik.values
    if np.any(np.all(np.isneginf(values), axis=0)):
        raise ValueError("an observation has -inf log-likelihood under every draw")
    log_raw = -values
    # draws with -inf likelihood get infinite raw weight; they cannot occur
    # under a posterior that conditions on the observation, so drop them
    log_raw[np.isneginf(values)] = -np.inf
    log_raw = log_raw - np.max(np.where(np.isfinite(log_raw), log_raw, -np.inf), axis=0)
    raw = np.exp(log_raw)
    cap = raw.mean(axis=0) * S**0.75
    w = np.minimum(raw, cap)
    w = w / w.sum(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ent = -np.sum(np.where(w > 0, w * np.log(w), 0.0), axis=0)
    eff = np.exp(ent)
    flags = [f"unreliable_obs_{n + 1}" for n in np.flatnonzero(eff < min_effective)]
    if np.any(np.isneginf(values)):
        flags.append("neg_inf_loglik")
    lpd = _weighted_lpd(values, w)
    return ElpdResult.from_pointwise(lpd, "loo_is", flags, {"weight_entropy": ent, "effective_draws": eff})


def loo_refit(model: ModelSpec, data: Dataset, approximator: Approximator, seed: int = 0) -> ElpdResult:
    """Brute-force leave-one-out: refit on each ``y_{-n}``."""
    if data.n > 200:
        raise ValueError("loo_refit is limited to N <= 200")
    if data.n < 1:
        raise ValueError("loo_refit needs at least one observation")

    def fold(n):
        held = data.subset([n])
        fit = approximator.fit(model, data.drop(n), seed=fit_seed(seed, n, "loo"))
        theta = fit.draws.pooled_matrix()
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.nan_to_num(model.loglik_pointwise(theta, held)[:, 0], nan=-np.inf)
        if not np.any(np.isfinite(ll)):
            raise ValueError(f"fold {n + 1}: held-out point has zero density under every draw")
        return float(log_mean_exp(ll))

    return ElpdResult.from_pointwise(parallel_map(fold, range(data.n)), "loo_refit")


def _waic_penalty(values: np.ndarray) -> np.ndarray:
    """Per-observation posterior variance of the log-likelihood (ddof=1)."""
    if values.shape[0] < 2:
        raise ValueError("need at least 2 draws")
    return np.var(values, axis=0, ddof=1)


def waic(loglik: PointwiseLogLik) -> ElpdResult:
    if loglik.provenance != "posterior_draws":
        raise ValueError("WAIC needs posterior draws")
    base = elpd(loglik)
    if loglik.has_neg_inf:
        warnings.warn("-inf log-likelihood entries make the WAIC penalty undefined", RuntimeWarning)
    penalty = _waic_penalty(loglik.values)
    return ElpdResult.from_pointwise(base.pointwise - penalty, "waic", base.flags, {"penalty": penalty})

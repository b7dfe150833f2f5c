"""Parsimony measures: effective number of parameters, shrinkage factors,
effective number of coefficients, Laplace Occam factor and description
length."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize

from ._utils import rng_for
from .models import Dataset, ModelSpec
from .predictive import ElpdResult, PointwiseLogLik, _waic_penalty

LOG_2PI = math.log(2 * math.pi)


def enp_loo(in_sample: ElpdResult, loo: ElpdResult) -> float:
    """``sum_n (lpd_n - loo_n)``: the in-sample optimism of the fit."""
    if in_sample.method != "posterior" or not loo.method.startswith("loo"):
        raise ValueError("expected an in-sample posterior ELPD and a LOO ELPD")
    if in_sample.pointwise.shape != loo.pointwise.shape:
        raise ValueError("pointwise lengths differ")
    return float(np.sum(in_sample.pointwise - loo.pointwise))


def enp_waic(loglik: PointwiseLogLik) -> float:
    """Sum over observations of the posterior variance of the log-likelihood."""
    return float(np.sum(_waic_penalty(loglik.values)))


def _check_positive(**values):
    for name, v in values.items():
        if not np.all(np.asarray(v) > 0):
            raise ValueError(f"{name} must be positive")


def shrinkage_kappa(a, lam, tau):
    """Shrinkage factor ``1 / (1 + a * lam^2 * tau^2)``; vectorized."""
    _check_positive(a=a, lam=lam, tau=tau)
    k = 1.0 / (1.0 + np.asarray(a, dtype=float) * np.asarray(lam, dtype=float) ** 2 * float(tau) ** 2)
    return float(k) if np.ndim(k) == 0 else k


def enc_gls(kappas) -> float:
    """Effective number of coefficients ``sum_k (1 - kappa_k)``."""
    k = np.asarray(kappas, dtype=float).reshape(-1)
    if np.any(k <= 0) or np.any(k >= 1):
        raise ValueError("shrinkage factors must lie in (0, 1)")
    return float(np.sum(1.0 - k))


def occam_factor_laplace(prior_logpdf_at_mode: float, log_det_hessian: float, dim: int) -> float:
    """Log Occam factor ``log p(theta_MP) - 0.5 * log det(H / 2 pi)``."""
    if dim == 0:
        return float(prior_logpdf_at_mode)
    if not np.isfinite(log_det_hessian):
        raise ValueError("Hessian is not positive definite")
    return float(prior_logpdf_at_mode - 0.5 * (log_det_hessian - dim * LOG_2PI))


def _logdet_pd(H) -> float:
    H = np.atleast_2d(np.asarray(H, dtype=float))
    try:
        L = np.linalg.cholesky(0.5 * (H + H.T))
    except np.linalg.LinAlgError:
        raise ValueError("Hessian is not positive definite") from None
    return float(2.0 * np.sum(np.log(np.diag(L))))


def finite_difference_hessian(f, x, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of scalar ``f`` at ``x`` with ``h = rel_step * (1 + |x|)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x.size
    h = rel_step * (1.0 + np.abs(x))
    H = np.empty((d, d))
    f0 = f(x)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = h[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / h[i] ** 2
        for j in range(i + 1, d):
            ej = np.zeros(d)
            ej[j] = h[j]
            H[i, j] = H[j, i] = (
                f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)
            ) / (4 * h[i] * h[j])
    return H


def laplace_mode_hessian(model: ModelSpec, data: Dataset, seed: int = 0):
    """Posterior mode and Hessian of the negative log joint.

    Uses the model's closed form when available; otherwise a quasi-Newton
    search started from the best of 50 prior draws, then finite differences.
    """
    inputs = model.laplace_inputs(data)
    if inputs is not None:
        return np.asarray(inputs[0], dtype=float), np.atleast_2d(inputs[1])

    def nlj(theta):
        v = float(model.log_joint(theta, data))
        return -v if np.isfinite(v) else 1e300

    starts = model.prior_sample(rng_for(seed, "laplace-start"), 50)
    x0 = starts[np.argmin([nlj(s) for s in starts])]
    res = minimize(nlj, x0, method="BFGS")
    mode = res.x
    return mode, finite_difference_hessian(nlj, mode)


def laplace_log_marginal_likelihood(model: ModelSpec, data: Dataset, seed: int = 0):
    """Laplace approximation ``log p(y | mode) + log Occam factor``.

    Returns ``(log_ml, log_occam)``. Exact for Gaussian posteriors.
    """
    mode, H = laplace_mode_hessian(model, data, seed)
    lp = float(model.prior_logpdf(mode))
    ll = float(np.sum(model.loglik_pointwise(mode, data)))
    occam = occam_factor_laplace(lp, _logdet_pd(H), mode.size)
    return ll + occam, occam


def mdl(log_ml: float) -> float:
    """Description length: the negative log marginal likelihood."""
    if not np.isfinite(log_ml):
        raise ValueError("log marginal likelihood must be finite")
    return -float(log_ml)


@dataclass
class ParsimonyReport:
    enp_loo: float
    enp_waic: float
    nominal_param_count: int
    enc_gls: float | None = None
    occam_factor_log: float | None = None
    mdl: float | None = None

    def __post_init__(self):
        if self.enp_waic < 0:
            raise ValueError("ENP_WAIC is a sum of variances and cannot be negative")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

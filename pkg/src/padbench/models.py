"""Reference models, structured priors and the two shipped approximators.

Every model is vectorized over a leading draws axis: ``prior_logpdf`` maps
``(..., d) -> (...)`` and ``loglik_pointwise`` maps ``(..., d) -> (..., N)``.
Conjugate models also provide an analytic posterior with an exact sampler,
which is what makes them useful as oracles for the diagnostics.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import betaln, gammaln

from ._utils import derive_seed, rng_for
from .draws import DrawsTensor

LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class Design:
    """What a simulator needs besides parameters: size and covariates."""

    n: int
    X: np.ndarray | None = None


@dataclass(frozen=True)
class Dataset:
    """Observations ``y`` (length N) with an optional ``(N, p)`` covariate matrix."""

    y: np.ndarray
    X: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "y", y)
        if self.X is not None:
            X = np.asarray(self.X, dtype=float)
            if X.ndim == 1:
                X = X[:, None]
            if X.shape[0] != y.size:
                raise ValueError(f"covariates have {X.shape[0]} rows for {y.size} observations")
            object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def design(self) -> Design:
        return Design(self.n, self.X)

    def drop(self, index: int) -> "Dataset":
        keep = np.arange(self.n) != index
        return Dataset(self.y[keep], None if self.X is None else self.X[keep])

    def subset(self, index) -> "Dataset":
        index = np.atleast_1d(index)
        return Dataset(self.y[index], None if self.X is None else self.X[index])


def read_dataset_csv(path) -> Dataset:
    """Read a dataset CSV: a ``y`` column plus any covariate columns, in order."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if "y" not in header:
            raise ValueError(f"{path}: dataset needs a 'y' column")
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.array(rows, dtype=float).reshape(-1, len(header))
    yi = header.index("y")
    cov = [i for i in range(len(header)) if i != yi]
    return Dataset(arr[:, yi], arr[:, cov] if cov else None)


def write_dataset_csv(data: Dataset, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        p = 0 if data.X is None else data.X.shape[1]
        writer.writerow(["y"] + [f"x{j + 1}" for j in range(p)])
        for i in range(data.n):
            row = [repr(float(data.y[i]))]
            if p:
                row += [repr(float(v)) for v in data.X[i]]
            writer.writerow(row)


# --------------------------------------------------------------------------
# analytic posteriors


class NormalPosterior:
    """Independent normal marginals."""

    def __init__(self, mean, sd):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        self.sd = np.atleast_1d(np.asarray(sd, dtype=float))

    def sample(self, rng, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.mean.size))
        return self.mean + self.sd * z

    def marginal_cdf(self, j: int, x):
        return stats.norm.cdf(x, self.mean[j], self.sd[j])


class BetaPosterior:
    def __init__(self, a: float, b: float):
        self.a, self.b = float(a), float(b)
        self.mean = np.array([self.a / (self.a + self.b)])
        s = self.a + self.b
        self.sd = np.array([math.sqrt(self.a * self.b / (s * s * (s + 1)))])

    def sample(self, rng, size: int) -> np.ndarray:
        return rng.beta(self.a, self.b, size=size)[:, None]

    def marginal_cdf(self, j: int, x):
        return stats.beta.cdf(x, self.a, self.b)


class MvNormalPosterior:
    def __init__(self, mean, cov):
        self.mean = np.asarray(mean, dtype=float)
        self.cov = np.asarray(cov, dtype=float)
        self.sd = np.sqrt(np.diag(self.cov))
        self._chol = np.linalg.cholesky(self.cov)

    def sample(self, rng, size: int) -> np.ndarray:
        z = rng.standard_normal((size, self.mean.size))
        return self.mean + z @ self._chol.T

    def marginal_cdf(self, j: int, x):
        return stats.norm.cdf(x, self.mean[j], self.sd[j])


class NigPosterior:
    """Normal-inverse-gamma posterior over ``(beta_1..beta_K, sigma)``."""

    def __init__(self, m, V, a, b):
        self.m = np.asarray(m, dtype=float)
        self.V = np.asarray(V, dtype=float)
        self.a, self.b = float(a), float(b)
        self._chol = np.linalg.cholesky(self.V)
        scale = np.sqrt(self.b / self.a * np.diag(self.V))
        dof = 2 * self.a
        beta_var = scale**2 * dof / (dof - 2) if dof > 2 else np.full_like(scale, np.inf)
        # E[sigma] for sigma^2 ~ IG(a, b)
        e_sigma = math.exp(0.5 * math.log(self.b) + gammaln(self.a - 0.5) - gammaln(self.a))
        e_sigma2 = self.b / (self.a - 1) if self.a > 1 else np.inf
        self.mean = np.append(self.m, e_sigma)
        self.sd = np.sqrt(np.append(beta_var, e_sigma2 - e_sigma**2))

    def sample(self, rng, size: int) -> np.ndarray:
        sigma2 = self.b / rng.gamma(self.a, 1.0, size=size)
        z = rng.standard_normal((size, self.m.size))
        beta = self.m + np.sqrt(sigma2)[:, None] * (z @ self._chol.T)
        return np.column_stack([beta, np.sqrt(sigma2)])

    def marginal_cdf(self, j: int, x):
        k = self.m.size
        if j < k:
            scale = math.sqrt(self.b / self.a * self.V[j, j])
            return stats.t.cdf(x, 2 * self.a, loc=self.m[j], scale=scale)
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, stats.invgamma.cdf(np.maximum(x, 0) ** 2, self.a, scale=self.b), 0.0)


def conjugate_normal_posterior(prior_mean: float, prior_sd: float, obs_sd: float, data):
    """Normal-normal update with known observation sd.

    Returns ``(posterior_mean, posterior_sd)``; an empty dataset returns the prior.
    """
    if prior_sd <= 0 or obs_sd <= 0:
        raise ValueError("standard deviations must be positive")
    y = data.y if isinstance(data, Dataset) else np.asarray(data, dtype=float).reshape(-1)
    prec = 1.0 / prior_sd**2 + y.size / obs_sd**2
    mean = (prior_mean / prior_sd**2 + y.sum() / obs_sd**2) / prec
    return float(mean), float(1.0 / math.sqrt(prec))


def _normal_logpdf(x, mean, sd):
    z = (x - mean) / sd
    return -0.5 * LOG_2PI - np.log(sd) - 0.5 * z * z


# --------------------------------------------------------------------------
# models


class ModelSpec:
    """A generative model ``theta ~ p(theta), y ~ p(y | theta)``.

    Subclasses set ``id`` and ``parameter_names`` and implement the four
    densities/samplers. Conjugate subclasses override
    :meth:`analytic_posterior` (and usually :meth:`log_evidence`).
    """

    id = "model"
    parameter_names: tuple = ()

    @property
    def dim(self) -> int:
        return len(self.parameter_names)

    def prior_sample(self, rng, size: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def prior_logpdf(self, theta) -> np.ndarray:
        raise NotImplementedError

    def loglik_pointwise(self, theta, data: Dataset) -> np.ndarray:
        raise NotImplementedError

    def simulate(self, theta, rng, design: Design | None = None) -> Dataset:
        raise NotImplementedError

    def default_design(self) -> Design:
        raise NotImplementedError

    def analytic_posterior(self, data: Dataset):
        return None

    def log_evidence(self, data: Dataset) -> float:
        raise NotImplementedError(f"{self.id} has no analytic marginal likelihood")

    def laplace_inputs(self, data: Dataset):
        """Posterior mode and Hessian of the negative log joint, if known in closed form."""
        return None

    @property
    def has_analytic_posterior(self) -> bool:
        return type(self).analytic_posterior is not ModelSpec.analytic_posterior

    def log_joint(self, theta, data: Dataset) -> np.ndarray:
        lp = np.asarray(self.prior_logpdf(theta), dtype=float)
        ll = self.loglik_pointwise(theta, data).sum(axis=-1)
        return np.where(np.isfinite(lp), lp + ll, -np.inf)

    def get_params(self) -> dict:
        return {}

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({params})"

    def _sample_shape(self, rng, size, fn):
        out = fn(1 if size is None else size)
        return out[0] if size is None else out


class NormalKnownVariance(ModelSpec):
    """``mu ~ N(prior_mean, prior_sd)``, ``y_i ~ N(mu, obs_sd)``."""

    id = "normal_known_var"
    parameter_names = ("mu",)

    def __init__(self, prior_mean=0.0, prior_sd=1.0, obs_sd=1.0, n=20):
        if prior_sd <= 0 or obs_sd <= 0:
            raise ValueError("standard deviations must be positive")
        self.prior_mean = float(prior_mean)
        self.prior_sd = float(prior_sd)
        self.obs_sd = float(obs_sd)
        self.n = int(n)

    def get_params(self):
        return dict(prior_mean=self.prior_mean, prior_sd=self.prior_sd, obs_sd=self.obs_sd, n=self.n)

    def default_design(self):
        return Design(self.n)

    def prior_sample(self, rng, size=None):
        return self._sample_shape(
            rng, size, lambda k: self.prior_mean + self.prior_sd * rng.standard_normal((k, 1))
        )

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _normal_logpdf(theta[..., 0], self.prior_mean, self.prior_sd)

    def loglik_pointwise(self, theta, data):
        mu = np.asarray(theta, dtype=float)[..., 0]
        return _normal_logpdf(data.y, mu[..., None], self.obs_sd)

    def simulate(self, theta, rng, design=None):
        design = design or self.default_design()
        mu = float(np.asarray(theta).reshape(-1)[0])
        return Dataset(mu + self.obs_sd * rng.standard_normal(design.n))

    def analytic_posterior(self, data):
        m, s = conjugate_normal_posterior(self.prior_mean, self.prior_sd, self.obs_sd, data)
        return NormalPosterior([m], [s])

    def log_evidence(self, data):
        r = data.y - self.prior_mean
        n, s2, t2 = data.n, self.obs_sd**2, self.prior_sd**2
        c = 1.0 + n * t2 / s2
        quad = r @ r / s2 - (t2 / s2**2) * r.sum() ** 2 / c
        return float(-0.5 * n * math.log(2 * math.pi * s2) - 0.5 * math.log(c) - 0.5 * quad)

    def laplace_inputs(self, data):
        post = self.analytic_posterior(data)
        prec = 1.0 / self.prior_sd**2 + data.n / self.obs_sd**2
        return post.mean.copy(), np.array([[prec]])


class BetaBinomial(ModelSpec):
    """``p ~ Beta(a, b)``; each observation counts successes in ``trials`` trials."""

    id = "beta_binomial"
    parameter_names = ("p",)

    def __init__(self, a=1.0, b=1.0, trials=10, n=1):
        self.a, self.b = float(a), float(b)
        self.trials = int(trials)
        self.n = int(n)

    def get_params(self):
        return dict(a=self.a, b=self.b, trials=self.trials, n=self.n)

    def default_design(self):
        return Design(self.n)

    def prior_sample(self, rng, size=None):
        return self._sample_shape(rng, size, lambda k: rng.beta(self.a, self.b, size=(k, 1)))

    def prior_logpdf(self, theta):
        p = np.asarray(theta, dtype=float)[..., 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (self.a - 1) * np.log(p) + (self.b - 1) * np.log1p(-p) - betaln(self.a, self.b)
        return np.where((p > 0) & (p < 1), out, -np.inf)

    def loglik_pointwise(self, theta, data):
        p = np.asarray(theta, dtype=float)[..., 0][..., None]
        y, t = data.y, self.trials
        log_choose = gammaln(t + 1) - gammaln(y + 1) - gammaln(t - y + 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = log_choose + np.where(y > 0, y * np.log(p), 0.0) + np.where(
                t - y > 0, (t - y) * np.log1p(-p), 0.0
            )
        return np.where((p >= 0) & (p <= 1), ll, -np.inf)

    def simulate(self, theta, rng, design=None):
        design = design or self.default_design()
        p = float(np.asarray(theta).reshape(-1)[0])
        return Dataset(rng.binomial(self.trials, p, size=design.n).astype(float))

    def analytic_posterior(self, data):
        s = data.y.sum()
        return BetaPosterior(self.a + s, self.b + data.n * self.trials - s)

    def log_evidence(self, data):
        y, t = data.y, self.trials
        s = y.sum()
        log_choose = np.sum(gammaln(t + 1) - gammaln(y + 1) - gammaln(t - y + 1))
        return float(log_choose + betaln(self.a + s, self.b + data.n * t - s) - betaln(self.a, self.b))


class TwoGroup(ModelSpec):
    """Group means ``mu_n = beta1 * I(n in C1) + beta2 * I(n in C2)`` with known sd.

    Group membership is the first covariate column, coded 1 or 2.
    """

    id = "two_group"
    parameter_names = ("beta1", "beta2")

    def __init__(self, prior_mean=0.0, prior_sd=1.0, obs_sd=1.0, n=20):
        self.prior_mean = float(prior_mean)
        self.prior_sd = float(prior_sd)
        self.obs_sd = float(obs_sd)
        self.n = int(n)

    def get_params(self):
        return dict(prior_mean=self.prior_mean, prior_sd=self.prior_sd, obs_sd=self.obs_sd, n=self.n)

    def default_design(self):
        groups = np.where(np.arange(self.n) % 2 == 0, 1.0, 2.0)
        return Design(self.n, groups[:, None])

    @staticmethod
    def _groups(X):
        if X is None:
            raise ValueError("two_group data needs a group column")
        g = np.asarray(X)[:, 0]
        if not np.all(np.isin(g, (1, 2))):
            raise ValueError("group labels must be 1 or 2")
        return g

    def prior_sample(self, rng, size=None):
        return self._sample_shape(
            rng, size, lambda k: self.prior_mean + self.prior_sd * rng.standard_normal((k, 2))
        )

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        return _normal_logpdf(theta, self.prior_mean, self.prior_sd).sum(axis=-1)

    def loglik_pointwise(self, theta, data):
        theta = np.asarray(theta, dtype=float)
        g = self._groups(data.X)
        mu = np.where(g == 1, theta[..., 0:1], theta[..., 1:2])
        return _normal_logpdf(data.y, mu, self.obs_sd)

    def simulate(self, theta, rng, design=None):
        design = design or self.default_design()
        theta = np.asarray(theta, dtype=float).reshape(-1)
        g = self._groups(design.X)
        mu = np.where(g == 1, theta[0], theta[1])
        return Dataset(mu + self.obs_sd * rng.standard_normal(design.n), design.X)

    def analytic_posterior(self, data):
        g = self._groups(data.X)
        means, sds = [], []
        for k in (1, 2):
            m, s = conjugate_normal_posterior(self.prior_mean, self.prior_sd, self.obs_sd, data.y[g == k])
            means.append(m)
            sds.append(s)
        return NormalPosterior(means, sds)

    def log_evidence(self, data):
        g = self._groups(data.X)
        sub = NormalKnownVariance(self.prior_mean, self.prior_sd, self.obs_sd)
        return sum(sub.log_evidence(Dataset(data.y[g == k])) for k in (1, 2))


class LinearRegressionGLS(ModelSpec):
    """Gaussian linear regression with a global-local scale prior on coefficients.

    With ``sigma`` given the residual sd is known and
    ``beta_k ~ N(0, (lambda_k * tau)^2)``. With ``sigma=None`` the residual
    sd is a parameter with ``sigma^2 ~ InvGamma(a0, b0)`` and
    ``beta_k | sigma ~ N(0, (sigma * lambda_k * tau)^2)``; both variants are
    conjugate. Local scales ``lambdas`` and the global scale ``tau`` are fixed.
    """

    id = "linreg_gls"

    def __init__(self, lambdas=(1.0, 1.0, 1.0), tau=1.0, sigma=None, a0=2.0, b0=1.0, n=100):
        self.lambdas = np.asarray(lambdas, dtype=float).reshape(-1)
        if np.any(self.lambdas <= 0) or tau <= 0:
            raise ValueError("scales must be positive")
        self.tau = float(tau)
        self.sigma = None if sigma is None else float(sigma)
        self.a0, self.b0 = float(a0), float(b0)
        self.n = int(n)
        names = [f"beta_{k + 1}" for k in range(self.lambdas.size)]
        if self.sigma is None:
            names.append("sigma")
        self.parameter_names = tuple(names)

    def get_params(self):
        return dict(
            lambdas=self.lambdas.tolist(), tau=self.tau, sigma=self.sigma,
            a0=self.a0, b0=self.b0, n=self.n,
        )

    @property
    def n_coef(self) -> int:
        return self.lambdas.size

    @property
    def prior_scales(self) -> np.ndarray:
        return self.lambdas * self.tau

    def default_design(self):
        X = rng_for(0, "linreg-design").standard_normal((self.n, self.n_coef))
        return Design(self.n, X)

    def shrinkage_constants(self, X) -> np.ndarray:
        """Per-coefficient ``a_k = N * mean(x_k^2) / sigma^2`` (sigma^2 drops out when unknown)."""
        X = np.asarray(X, dtype=float)
        a = X.shape[0] * np.mean(X**2, axis=0)
        return a / self.sigma**2 if self.sigma is not None else a

    def prior_sample(self, rng, size=None):
        def draw(k):
            z = rng.standard_normal((k, self.n_coef))
            if self.sigma is not None:
                return z * self.prior_scales
            sigma = np.sqrt(self.b0 / rng.gamma(self.a0, 1.0, size=k))
            return np.column_stack([z * self.prior_scales * sigma[:, None], sigma])

        return self._sample_shape(rng, size, draw)

    def prior_logpdf(self, theta):
        theta = np.asarray(theta, dtype=float)
        beta = theta[..., : self.n_coef]
        if self.sigma is not None:
            return _normal_logpdf(beta, 0.0, self.prior_scales).sum(axis=-1)
        sigma = theta[..., self.n_coef]
        with np.errstate(divide="ignore", invalid="ignore"):
            s2 = sigma**2
            log_ig = (
                self.a0 * math.log(self.b0) - gammaln(self.a0)
                - (self.a0 + 1) * np.log(s2) - self.b0 / s2
            )
            lp = log_ig + np.log(2 * sigma) + _normal_logpdf(
                beta, 0.0, self.prior_scales * sigma[..., None]
            ).sum(axis=-1)
        return np.where(sigma > 0, lp, -np.inf)

    def _sigma_of(self, theta):
        if self.sigma is not None:
            return self.sigma
        return theta[..., self.n_coef][..., None]

    def loglik_pointwise(self, theta, data):
        theta = np.asarray(theta, dtype=float)
        beta = theta[..., : self.n_coef]
        mu = beta @ data.X.T
        sigma = self._sigma_of(theta)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = _normal_logpdf(data.y, mu, sigma)
        return np.where(np.broadcast_to(sigma, ll.shape) > 0, ll, -np.inf)

    def simulate(self, theta, rng, design=None):
        design = design or self.default_design()
        theta = np.asarray(theta, dtype=float).reshape(-1)
        beta = theta[: self.n_coef]
        sigma = self.sigma if self.sigma is not None else theta[self.n_coef]
        y = design.X @ beta + sigma * rng.standard_normal(design.n)
        return Dataset(y, design.X)

    def _posterior_parts(self, data):
        X, y = data.X, data.y
        d_inv = np.diag(1.0 / self.prior_scales**2)
        if self.sigma is not None:
            prec = X.T @ X / self.sigma**2 + d_inv
            cov = np.linalg.inv(prec)
            return prec, cov, cov @ X.T @ y / self.sigma**2
        prec = X.T @ X + d_inv
        V = np.linalg.inv(prec)
        return prec, V, V @ X.T @ y

    def analytic_posterior(self, data):
        prec, V, m = self._posterior_parts(data)
        if self.sigma is not None:
            return MvNormalPosterior(m, V)
        a_n = self.a0 + data.n / 2
        b_n = self.b0 + 0.5 * (data.y @ data.y - m @ prec @ m)
        return NigPosterior(m, V, a_n, b_n)

    def log_evidence(self, data):
        X, y, n = data.X, data.y, data.n
        if self.sigma is not None:
            cov = self.sigma**2 * np.eye(n) + (X * self.prior_scales**2) @ X.T
            return float(stats.multivariate_normal.logpdf(y, np.zeros(n), cov))
        prec, V, m = self._posterior_parts(data)
        a_n = self.a0 + n / 2
        b_n = self.b0 + 0.5 * (y @ y - m @ prec @ m)
        logdet_v = np.linalg.slogdet(V)[1]
        logdet_v0 = np.sum(np.log(self.prior_scales**2))
        return float(
            -0.5 * n * LOG_2PI + 0.5 * (logdet_v - logdet_v0)
            + self.a0 * math.log(self.b0) - a_n * math.log(b_n)
            + gammaln(a_n) - gammaln(self.a0)
        )

    def laplace_inputs(self, data):
        if self.sigma is None:
            return None
        prec, cov, m = self._posterior_parts(data)
        return m, prec


def logistic_trajectory(rho, y0: float, steps: int) -> np.ndarray:
    """Iterates ``y_{t+1} = rho * y_t * (1 - y_t)`` for ``t = 0..steps-1``.

    ``rho`` may be an array; the result then has shape ``rho.shape + (steps,)``.
    """
    rho = np.asarray(rho, dtype=float)
    out = np.empty(rho.shape + (steps,))
    y = np.full(rho.shape, float(y0))
    for t in range(steps):
        y = rho * y * (1.0 - y)
        out[..., t] = y
    return out


class LogisticMap(ModelSpec):
    """Logistic-map trajectory observed with additive Gaussian noise.

    ``rho ~ Uniform(rho_low, rho_high)``; ``y_t ~ N(x_t, noise_sd)`` where
    ``x_t`` follows the map from the fixed start ``y0``.
    """

    id = "logistic_map"
    parameter_names = ("rho",)

    def __init__(self, rho_low=3.5, rho_high=4.0, y0=0.3, noise_sd=0.05, n=20):
        if not 0 < rho_low < rho_high <= 4:
            raise ValueError("need 0 < rho_low < rho_high <= 4")
        if noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")
        self.rho_low, self.rho_high = float(rho_low), float(rho_high)
        self.y0 = float(y0)
        self.noise_sd = float(noise_sd)
        self.n = int(n)

    def get_params(self):
        return dict(rho_low=self.rho_low, rho_high=self.rho_high, y0=self.y0, noise_sd=self.noise_sd, n=self.n)

    def default_design(self):
        return Design(self.n)

    def prior_sample(self, rng, size=None):
        return self._sample_shape(
            rng, size, lambda k: rng.uniform(self.rho_low, self.rho_high, size=(k, 1))
        )

    def prior_logpdf(self, theta):
        rho = np.asarray(theta, dtype=float)[..., 0]
        inside = (rho >= self.rho_low) & (rho <= self.rho_high)
        return np.where(inside, -math.log(self.rho_high - self.rho_low), -np.inf)

    def loglik_pointwise(self, theta, data):
        if self.noise_sd <= 0:
            raise ValueError("likelihood needs noise_sd > 0")
        rho = np.asarray(theta, dtype=float)[..., 0]
        with np.errstate(over="ignore", invalid="ignore"):
            traj = logistic_trajectory(rho, self.y0, data.n)
            ll = _normal_logpdf(data.y, traj, self.noise_sd)
        return np.where(np.isfinite(ll), ll, -np.inf)

    def simulate(self, theta, rng, design=None):
        design = design or self.default_design()
        rho = float(np.asarray(theta).reshape(-1)[0])
        traj = logistic_trajectory(rho, self.y0, design.n)
        if self.noise_sd > 0:
            traj = traj + self.noise_sd * rng.standard_normal(design.n)
        return Dataset(traj)


_ZOO = {
    NormalKnownVariance.id: NormalKnownVariance,
    BetaBinomial.id: BetaBinomial,
    LinearRegressionGLS.id: LinearRegressionGLS,
    TwoGroup.id: TwoGroup,
    LogisticMap.id: LogisticMap,
}


def model_zoo() -> list:
    """Default instance of every shipped model."""
    return [cls() for cls in _ZOO.values()]


def get_model(model_id: str, **params) -> ModelSpec:
    try:
        cls = _ZOO[model_id]
    except KeyError:
        raise KeyError(f"unknown model {model_id!r}; choose from {sorted(_ZOO)}") from None
    return cls(**params)


# --------------------------------------------------------------------------
# structured priors


def structured_prior_logpdf(kind: str, phi, sigma: float, mu=None, adjacency=None) -> float:
    """Log density of exchangeable, random-walk or CAR structured priors.

    ``exchangeable``: ``phi_i ~ N(mu, sigma)``.
    ``random_walk``: ``phi_i ~ N(phi_{i-1}, sigma)`` for ``i >= 2`` (the first
    element is left unconstrained).
    ``car``: sum over nodes of ``log N(phi_i | mean of neighbours, sigma)``.
    This is the pseudo-likelihood of the full conditionals, not a normalized
    joint GMRF density.
    """
    phi = np.asarray(phi, dtype=float).reshape(-1)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if kind == "exchangeable":
        if mu is None:
            raise ValueError("exchangeable prior needs mu")
        return float(_normal_logpdf(phi, mu, sigma).sum())
    if kind == "random_walk":
        if phi.size < 2:
            raise ValueError("random walk needs at least two elements")
        return float(_normal_logpdf(phi[1:], phi[:-1], sigma).sum())
    if kind == "car":
        if adjacency is None:
            raise ValueError("car prior needs an adjacency matrix")
        A = np.asarray(adjacency, dtype=float)
        if A.shape != (phi.size, phi.size):
            raise ValueError("adjacency shape does not match phi")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency must be symmetric")
        if not np.all(np.isin(A, (0, 1))) or np.any(np.diag(A) != 0):
            raise ValueError("adjacency must be 0/1 with an empty diagonal")
        deg = A.sum(axis=1)
        if np.any(deg == 0):
            raise ValueError("car prior has an isolated node")
        cond_mean = A @ phi / deg
        return float(_normal_logpdf(phi, cond_mean, sigma).sum())
    raise ValueError(f"unknown structured prior {kind!r}")


# --------------------------------------------------------------------------
# approximators


@dataclass
class FitResult:
    """Draws plus run metadata from one approximator call."""

    draws: DrawsTensor
    approximator: str
    hyperparameters: dict
    t_start: float
    t_end: float
    acceptance_rate: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


class Approximator:
    """Base class; hyperparameters are the constructor arguments."""

    name = "approximator"
    _param_names: tuple = ()

    def get_params(self) -> dict:
        return {k: getattr(self, k) for k in self._param_names}

    def set_params(self, **params):
        for k, v in params.items():
            if k not in self._param_names:
                raise ValueError(f"{self.name} has no hyperparameter {k!r}")
            setattr(self, k, v)
        return self

    def clone(self, **params):
        p = self.get_params()
        p.update(params)
        return type(self)(**p)

    @property
    def hyperparameter_count(self) -> int:
        return len(self._param_names)

    @property
    def is_mcmc(self) -> bool:
        return False

    def fit(self, model: ModelSpec, data: Dataset, seed: int | None = None) -> FitResult:
        raise NotImplementedError

    def __repr__(self):
        params = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({params})"


class ExactPosterior(Approximator):
    """Independent draws from a model's analytic posterior.

    ``shift`` (in posterior sd units) and ``scale`` distort the draws around
    the posterior mean; both default to the undistorted sampler and exist to
    plant known miscalibration.
    """

    name = "exact"
    _param_names = ("n_chains", "n_draws", "seed", "shift", "scale")

    def __init__(self, n_chains=4, n_draws=1000, seed=0, shift=0.0, scale=1.0):
        self.n_chains = int(n_chains)
        self.n_draws = int(n_draws)
        self.seed = int(seed)
        self.shift = float(shift)
        self.scale = float(scale)

    def fit(self, model, data, seed=None):
        seed = self.seed if seed is None else seed
        t0 = time.time()
        post = model.analytic_posterior(data)
        if post is None:
            raise ValueError(f"{model.id} has no analytic posterior")
        chains = []
        for c in range(self.n_chains):
            x = post.sample(rng_for(seed, c, "exact"), self.n_draws)
            if self.shift != 0.0 or self.scale != 1.0:
                x = post.mean + self.scale * (x - post.mean) + self.shift * post.sd
            chains.append(x)
        draws = DrawsTensor(np.stack(chains), model.parameter_names)
        return FitResult(draws, self.name, self.get_params(), t0, time.time())


def rwm_chain(logdensity, x0, proposal_sd, n_warmup, n_iter, rng, adapt=True, target_accept=None):
    """One random-walk Metropolis chain with an isotropic Gaussian proposal.

    During warmup the log proposal scale follows a Robbins-Monro update
    toward ``target_accept`` (0.44 in one dimension, 0.234 otherwise) and is
    frozen afterwards. Returns ``(draws, post-warmup acceptance rate, final
    proposal sd)``.
    """
    x = np.array(x0, dtype=float).reshape(-1)
    d = x.size
    if target_accept is None:
        target_accept = 0.44 if d == 1 else 0.234
    lp = float(logdensity(x))
    log_sd = math.log(proposal_sd)
    total = n_warmup + n_iter
    noise = rng.standard_normal((total, d))
    log_u = np.log(rng.uniform(size=total))
    out = np.empty((n_iter, d))
    accepted = 0
    for t in range(total):
        prop = x + math.exp(log_sd) * noise[t]
        lp_prop = float(logdensity(prop))
        accept = lp_prop - lp > log_u[t]
        if accept:
            x, lp = prop, lp_prop
        if t < n_warmup:
            if adapt:
                log_sd += (float(accept) - target_accept) / (t + 1) ** 0.6
        else:
            accepted += accept
            out[t - n_warmup] = x
    rate = accepted / n_iter if n_iter else float("nan")
    return out, rate, math.exp(log_sd)


class RandomWalkMetropolis(Approximator):
    """Multi-chain random-walk Metropolis with prior-drawn initial states."""

    name = "rwm"
    _param_names = ("proposal_sd", "n_chains", "n_iterations", "warmup", "seed", "adapt")

    def __init__(self, proposal_sd=0.5, n_chains=4, n_iterations=1000, warmup=1000, seed=0, adapt=True):
        if proposal_sd <= 0:
            raise ValueError("proposal_sd must be positive")
        self.proposal_sd = float(proposal_sd)
        self.n_chains = int(n_chains)
        self.n_iterations = int(n_iterations)
        self.warmup = int(warmup)
        self.seed = int(seed)
        self.adapt = bool(adapt)

    @property
    def is_mcmc(self):
        return True

    def fit(self, model, data, seed=None):
        if self.proposal_sd <= 0:
            raise ValueError("proposal_sd must be positive")
        seed = self.seed if seed is None else seed

        def logdensity(theta):
            lp = float(model.prior_logpdf(theta))
            if not np.isfinite(lp):
                return -np.inf
            ll = float(np.sum(model.loglik_pointwise(theta, data)))
            return lp + ll if not np.isnan(ll) else -np.inf

        t0 = time.time()
        chains, rates, sds = [], [], []
        for c in range(self.n_chains):
            rng = rng_for(seed, c, "rwm")
            x0 = None
            for _ in range(100):
                cand = model.prior_sample(rng)
                if np.isfinite(logdensity(cand)):
                    x0 = cand
                    break
            if x0 is None:
                raise RuntimeError("no finite-density initial point after 100 prior draws")
            draws, rate, sd = rwm_chain(
                logdensity, x0, self.proposal_sd, self.warmup, self.n_iterations, rng, self.adapt
            )
            chains.append(draws)
            rates.append(rate)
            sds.append(sd)
        t1 = time.time()
        tensor = DrawsTensor(np.stack(chains), model.parameter_names)
        return FitResult(
            tensor, self.name, self.get_params(), t0, t1,
            acceptance_rate=float(np.mean(rates)),
            extra={"chain_acceptance": rates, "adapted_proposal_sd": sds},
        )


_APPROXIMATORS = {ExactPosterior.name: ExactPosterior, RandomWalkMetropolis.name: RandomWalkMetropolis}


def get_approximator(approximator_id: str, **params) -> Approximator:
    try:
        cls = _APPROXIMATORS[approximator_id]
    except KeyError:
        raise KeyError(
            f"unknown approximator {approximator_id!r}; choose from {sorted(_APPROXIMATORS)}"
        ) from None
    return cls(**params)


def prior_draws(model: ModelSpec, n_chains=1, n_draws=4000, seed=0) -> DrawsTensor:
    """Draws from the prior in the usual ``(chain, draw, variable)`` layout."""
    chains = [model.prior_sample(rng_for(seed, c, "prior"), n_draws) for c in range(n_chains)]
    return DrawsTensor(np.stack(chains), model.parameter_names)


def fit_seed(master_seed: int, index: int, tag: str = "fit") -> int:
    """Seed for the ``index``-th fit inside a study, independent of scheduling."""
    return derive_seed(master_seed, index, tag)

"""Robustness diagnostics: power-scaling perturbations by importance
reweighting, sensitivity distances and derivatives, an approximator
hyperparameter rerun harness, and Lyapunov exponents of the logistic map."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._utils import normalized_weights
from .draws import DrawsTensor, Pushforward, SummaryStatistic, pushforward_draws, weighted_summary
from .models import Approximator, Dataset, ModelSpec

COMPONENTS = ("prior", "likelihood")
DISTANCES = ("absolute_difference", "standardized_difference")


@dataclass
class ScaledWeights:
    weights: np.ndarray
    entropy: float

    @property
    def effective_draws(self) -> float:
        return math.exp(self.entropy)


def power_scale_weights(log_prior, log_lik, alpha: float, component: str = "prior") -> ScaledWeights:
    """Importance weights turning base draws into draws from the posterior
    with the chosen component raised to the power ``alpha``.

    ``w_s`` is proportional to ``exp((alpha - 1) * log_component_s)``.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if component not in COMPONENTS:
        raise ValueError(f"component must be one of {COMPONENTS}")
    target = np.asarray(log_prior if component == "prior" else log_lik, dtype=float).reshape(-1)
    if not np.all(np.isfinite(target)):
        raise ValueError("log densities must be finite")
    if alpha == 1.0:
        S = target.size
        return ScaledWeights(np.full(S, 1.0 / S), math.log(S))
    w, entropy = normalized_weights((alpha - 1.0) * target)
    if not np.all(np.isfinite(w)) or w.sum() == 0:
        raise ValueError("power-scaling weights underflow")
    return ScaledWeights(w, entropy)


@dataclass
class SensitivitySpec:
    """Perturbation target, grid, summary and distance for a sensitivity study."""

    component: str = "prior"
    alphas: tuple = (0.5, 0.8, 1.0, 1.25, 2.0)
    statistic: SummaryStatistic = field(default_factory=SummaryStatistic.mean)
    distance: str = "standardized_difference"
    delta: float = 0.2
    alpha0: float = 1.0

    def __post_init__(self):
        if self.component not in COMPONENTS:
            raise ValueError(f"component must be one of {COMPONENTS}")
        if self.distance not in DISTANCES:
            raise ValueError(f"distance must be one of {DISTANCES}")
        if self.alpha0 <= 0 or any(a <= 0 for a in self.alphas):
            raise ValueError("alphas must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        self.alphas = tuple(sorted(set(self.alphas) | {self.alpha0}))


@dataclass
class PowerScalingInputs:
    """Per-draw ``psi`` values with the log prior and joint log-likelihood."""

    psi_values: np.ndarray
    log_prior: np.ndarray
    log_lik: np.ndarray

    def __post_init__(self):
        self.psi_values = np.asarray(self.psi_values, dtype=float).reshape(-1)
        self.log_prior = np.asarray(self.log_prior, dtype=float).reshape(-1)
        self.log_lik = np.asarray(self.log_lik, dtype=float).reshape(-1)
        if not (self.psi_values.size == self.log_prior.size == self.log_lik.size):
            raise ValueError("inputs must be aligned with the draws")


def sensitivity_inputs(model: ModelSpec, draws: DrawsTensor, data: Dataset, psi: Pushforward | None = None) -> PowerScalingInputs:
    theta = draws.pooled_matrix()
    psi = psi or Pushforward.identity(draws.variable_names[0])
    values = pushforward_draws(draws, psi).pooled(psi.name)
    return PowerScalingInputs(
        values,
        model.prior_logpdf(theta),
        model.loglik_pointwise(theta, data).sum(axis=-1),
    )


def _summary_at(inputs: PowerScalingInputs, spec: SensitivitySpec, alpha: float, min_effective: float):
    sw = power_scale_weights(inputs.log_prior, inputs.log_lik, alpha, spec.component)
    if sw.effective_draws < min_effective:
        raise ValueError(
            f"power-scaling weights at alpha={alpha:g} are degenerate "
            f"({sw.effective_draws:.1f} effective draws)"
        )
    return weighted_summary(inputs.psi_values, sw.weights, spec.statistic), sw


def _scale(inputs: PowerScalingInputs, spec: SensitivitySpec) -> float:
    if spec.distance == "absolute_difference":
        return 1.0
    sd = float(np.std(inputs.psi_values, ddof=1))
    if sd == 0:
        raise ValueError("standardized distance needs a non-constant quantity")
    return sd


def sensitivity_distance(inputs: PowerScalingInputs, spec: SensitivitySpec, alpha1: float, min_effective: float = 10.0) -> float:
    """``f(T(alpha0), T(alpha1))`` for the configured distance ``f``.

    The standardized variant divides by the base posterior sd of ``psi``.
    """
    if alpha1 <= 0:
        raise ValueError("alpha1 must be positive")
    t0, _ = _summary_at(inputs, spec, spec.alpha0, min_effective)
    t1, _ = _summary_at(inputs, spec, alpha1, min_effective)
    return abs(t1 - t0) / _scale(inputs, spec)


def sensitivity_gradient(inputs: PowerScalingInputs, spec: SensitivitySpec, h: float = 1e-3, signed: bool = False, min_effective: float = 10.0) -> float:
    """Central difference ``(T(alpha0 + h) - T(alpha0 - h)) / 2h``.

    By default the magnitude (scaled like the distance) is returned; pass
    ``signed=True`` for the raw derivative on the summary's own scale.
    """
    if h <= 0 or spec.alpha0 - h <= 0:
        raise ValueError("need h > 0 and alpha0 - h > 0")
    hi, _ = _summary_at(inputs, spec, spec.alpha0 + h, min_effective)
    lo, _ = _summary_at(inputs, spec, spec.alpha0 - h, min_effective)
    d = (hi - lo) / (2 * h)
    if signed:
        return d
    return abs(d) / _scale(inputs, spec)


def is_practically_sensitive(sen: float, delta: float) -> bool:
    if sen < 0 or delta < 0:
        raise ValueError("sensitivity and delta must be nonnegative")
    return sen > delta


@dataclass
class SensitivityCurve:
    alphas: np.ndarray
    values: np.ndarray
    entropies: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["alpha", "statistic_value", "weight_entropy"])
            for row in zip(self.alphas, self.values, self.entropies):
                w.writerow([repr(float(v)) for v in row])


def sensitivity_curve(inputs: PowerScalingInputs, spec: SensitivitySpec) -> SensitivityCurve:
    values, ents = [], []
    for a in spec.alphas:
        sw = power_scale_weights(inputs.log_prior, inputs.log_lik, a, spec.component)
        values.append(weighted_summary(inputs.psi_values, sw.weights, spec.statistic))
        ents.append(sw.entropy)
    return SensitivityCurve(np.array(spec.alphas), np.array(values), np.array(ents))


def hyperparameter_sensitivity(
    model: ModelSpec,
    data: Dataset,
    approximator: Approximator,
    parameter: str,
    grid,
    psi: Pushforward,
    statistic: SummaryStatistic | None = None,
    standardize: bool = True,
    seed: int = 0,
):
    """Refit across a hyperparameter grid and measure how far the summary moves.

    Returns a list of ``(value, summary, distance)`` where the distance is
    taken against the fit at the approximator's current setting.
    """
    statistic = statistic or SummaryStatistic.mean()

    def summary(approx):
        fit = approx.fit(model, data, seed=seed)
        x = pushforward_draws(fit.draws, psi).pooled(psi.name)
        return weighted_summary(x, np.full(x.size, 1.0 / x.size), statistic), float(np.std(x, ddof=1))

    base, base_sd = summary(approximator)
    scale = base_sd if standardize and base_sd > 0 else 1.0
    out = []
    for v in grid:
        t, _ = summary(approximator.clone(**{parameter: v}))
        out.append((v, t, abs(t - base) / scale))
    return out


def lyapunov_logistic(rho: float, y0: float, T: int = 100_000, burn_in: int = 1000) -> float:
    """Average of ``log|rho (1 - 2 y_t)|`` along ``T`` post-burn-in iterates.

    A trajectory that lands exactly on 0.5 contributes ``log 0`` and the
    result is ``-inf`` (with a warning); leaving ``(0, 1)`` is an error.
    """
    if not 0 < rho <= 4:
        raise ValueError("rho must lie in (0, 4]")
    if not 0 < y0 < 1:
        raise ValueError("y0 must lie in (0, 1)")
    if T < 1000:
        raise ValueError("T must be at least 1000")
    y = y0
    total = 0.0
    hit_half = False
    for t in range(burn_in + T):
        if t >= burn_in:
            d = abs(rho * (1.0 - 2.0 * y))
            if d == 0.0:
                hit_half = True
            else:
                total += math.log(d)
        y = rho * y * (1.0 - y)
        if not 0.0 < y < 1.0:
            raise ValueError(f"trajectory left (0, 1) at step {t + 1}")
    if hit_half:
        warnings.warn("trajectory hit y = 0.5; Lyapunov exponent is -inf", RuntimeWarning)
        return float("-inf")
    return total / T

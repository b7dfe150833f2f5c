"""Split-R-hat, effective sample size, Monte Carlo standard error and
sampling efficiency for draw-based approximators."""

from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import beta as beta_dist

from .draws import (
    DrawsTensor,
    NonFiniteDrawsError,
    SummaryStatistic,
    _rank_normal_scores,
    _type7_quantile,
)

RHAT_THRESHOLD = 1.01
ESS_THRESHOLD = 400.0
# below this many draws per chain the direct autocovariance sum is used
_FFT_MIN_SIZE = 1024


class DegenerateDrawsWarning(UserWarning):
    pass


def _chains(draws: DrawsTensor, variable: str, transform: str) -> np.ndarray:
    if draws.contains_nonfinite:
        raise NonFiniteDrawsError("draws contain nonfinite values")
    x = np.asarray(draws.column(variable), dtype=float)
    if transform == "identity":
        return x
    if transform == "rank_normal":
        return _rank_normal_scores(x)
    raise ValueError(f"unknown transform {transform!r}")


def split_chains(x: np.ndarray) -> np.ndarray:
    """Halve each chain; odd lengths lose their middle draw."""
    n = x.shape[1]
    half = n // 2
    first = x[:, :half]
    second = x[:, n - half:]
    return np.concatenate([first, second], axis=0)


def _rhat_from_subchains(sub: np.ndarray) -> float:
    w = np.mean(np.var(sub, axis=1, ddof=1))
    if w == 0:
        raise ValueError("zero within-chain variance")
    # between-chain term: variance of subchain means (no draws-per-chain factor),
    # so sqrt((B + W) / W) -> 1 for independent chains
    b = np.var(np.mean(sub, axis=1), ddof=1) if sub.shape[0] > 1 else 0.0
    return float(np.sqrt((b + w) / w))


def split_rhat(draws: DrawsTensor, variable: str, transform: str = "identity") -> float:
    """Split-chain scale reduction factor ``sqrt((B + W) / W)``.

    Parameters
    ----------
    draws : DrawsTensor
    variable : str
    transform : {"identity", "rank_normal"}
        Applied to the pooled draws before splitting.

    Raises
    ------
    ValueError
        Fewer than 4 draws per chain, or all subchains constant.
    """
    if draws.draws_per_chain < 4:
        raise ValueError("split R-hat needs at least 4 draws per chain")
    x = _chains(draws, variable, transform)
    return _rhat_from_subchains(split_chains(x))


def _autocovariance(x: np.ndarray) -> np.ndarray:
    """Biased (1/n) autocovariance of each row, lags 0..n-1."""
    m, n = x.shape
    xc = x - x.mean(axis=1, keepdims=True)
    if n >= _FFT_MIN_SIZE:
        size = 1 << int(np.ceil(np.log2(2 * n)))
        f = np.fft.rfft(xc, n=size, axis=1)
        acov = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n]
        return acov / n
    acov = np.empty((m, n))
    for t in range(n):
        acov[:, t] = np.sum(xc[:, : n - t] * xc[:, t:], axis=1) / n
    return acov


def ess_from_chains(x: np.ndarray) -> float:
    """Multi-chain ESS of an ``(m, n)`` array (already split if desired).

    Autocorrelations combine the averaged within-chain autocovariances with
    the between-chain variance; the sum is truncated with Geyer's initial
    positive sequence and made monotone.
    """
    x = np.asarray(x, dtype=float)
    m, n = x.shape
    if n < 2:
        raise ValueError("ESS needs at least 2 draws per chain")
    acov = _autocovariance(x)
    chain_var = acov[:, 0] * n / (n - 1)
    w = chain_var.mean()
    if w == 0:
        raise ValueError("ESS undefined for constant draws")
    between = np.var(x.mean(axis=1), ddof=1) if m > 1 else 0.0
    var_plus = w * (n - 1) / n + between
    mean_acov = acov.mean(axis=0)

    rho = np.zeros(n)
    rho[0] = 1.0
    rho_even = 1.0
    rho_odd = 1.0 - (w - mean_acov[1]) / var_plus if n > 1 else 0.0
    rho[1] = rho_odd
    t = 1
    while t < n - 3 and rho_even + rho_odd > 0.0:
        rho_even = 1.0 - (w - mean_acov[t + 1]) / var_plus
        rho_odd = 1.0 - (w - mean_acov[t + 2]) / var_plus
        if rho_even + rho_odd >= 0:
            rho[t + 1] = rho_even
            rho[t + 2] = rho_odd
        t += 2
    max_t = t - 2
    if rho_even > 0 and max_t + 1 < n:
        rho[max_t + 1] = rho_even
    # initial monotone sequence on paired sums
    t = 1
    while t <= max_t - 2:
        if rho[t + 1] + rho[t + 2] > rho[t - 1] + rho[t]:
            rho[t + 1] = (rho[t - 1] + rho[t]) / 2.0
            rho[t + 2] = rho[t + 1]
        t += 2
    total = m * n
    tau = -1.0 + 2.0 * np.sum(rho[: max_t + 1]) + np.sum(rho[max_t + 1: max_t + 2])
    # antithetic chains: cap ESS at S * log10(S)
    tau = max(tau, 1.0 / np.log10(total))
    return float(total / tau)


def ess(draws: DrawsTensor, variable: str, transform: str = "identity") -> float:
    """Effective sample size ``S / (1 + 2 sum rho_t)`` on split chains.

    Independent draws give roughly ``S``; negatively autocorrelated chains may
    exceed ``S``.
    """
    if draws.draws_per_chain < 4:
        raise ValueError("ESS needs at least 4 draws per chain")
    x = _chains(draws, variable, transform)
    return ess_from_chains(split_chains(x))


def _is_constant(x: np.ndarray) -> bool:
    flat = x.reshape(-1)
    return bool(np.all(flat == flat[0]))


def _mcse_parts(x: np.ndarray, stat: SummaryStatistic):
    """Return (mcse, ess used, variance used, degenerate)."""
    flat = x.reshape(-1)
    if _is_constant(x):
        return 0.0, float("nan"), 0.0, True
    if stat.kind == "mean":
        e = ess_from_chains(split_chains(x))
        v = float(np.var(flat, ddof=1))
        return float(np.sqrt(v / e)), e, v, False
    if stat.kind == "sd":
        dev2 = (x - flat.mean()) ** 2
        e = ess_from_chains(split_chains(dev2))
        v = float(np.var(dev2.reshape(-1), ddof=1))
        sd = float(np.std(flat, ddof=1))
        return float(np.sqrt(v / e) / (2.0 * sd)), e, v, False
    if stat.kind == "prob_below":
        ind = (x < stat.threshold).astype(float)
        if _is_constant(ind):
            return 0.0, float("nan"), 0.0, True
        e = ess_from_chains(split_chains(ind))
        v = float(np.var(ind.reshape(-1), ddof=1))
        return float(np.sqrt(v / e)), e, v, False
    # quantile: ESS of the indicator at the estimate, mapped back to the value
    # scale through the order statistics of a +-1 sd beta interval
    p = stat.p
    q = _type7_quantile(flat, p)
    ind = (x <= q).astype(float)
    if _is_constant(ind):
        return 0.0, float("nan"), 0.0, True
    e = ess_from_chains(split_chains(ind))
    a = beta_dist.ppf(0.15865525393145707, e * p + 1, e * (1 - p) + 1)
    b = beta_dist.ppf(0.8413447460685429, e * p + 1, e * (1 - p) + 1)
    xs = np.sort(flat)
    s = xs.size
    lo = xs[int(np.clip(np.floor(a * s), 0, s - 1))]
    hi = xs[int(np.clip(np.ceil(b * s), 0, s - 1))]
    return float((hi - lo) / 2.0), e, float(np.var(ind.reshape(-1), ddof=1)), False


def mcse(draws: DrawsTensor, variable: str, stat: SummaryStatistic | None = None) -> float:
    """Monte Carlo standard error of a summary statistic.

    For the mean this is ``sqrt(V / ESS)`` with ``V`` the pooled sample
    variance. Quantile MCSEs use the ESS of the indicator draws and the
    order statistics of the induced rank interval, so they are an
    approximation. Constant draws yield 0 and a
    :class:`DegenerateDrawsWarning`.
    """
    stat = stat or SummaryStatistic.mean()
    if draws.draws_per_chain < 4:
        raise ValueError("MCSE needs at least 4 draws per chain")
    x = _chains(draws, variable, "identity")
    value, _, _, degenerate = _mcse_parts(x, stat)
    if degenerate:
        warnings.warn(f"degenerate draws for {variable!r}: MCSE set to 0", DegenerateDrawsWarning)
    return value


def sampling_efficiency(ess_value: float, t_start: float, t_end: float) -> float:
    """Effective draws per second of wall-clock time."""
    duration = t_end - t_start
    if duration <= 0:
        raise ValueError("nonpositive duration")
    if not ess_value > 0:
        raise ValueError("ESS must be positive")
    return ess_value / duration


@dataclass
class ConvergenceRecord:
    variable: str
    statistic: str
    rhat: float
    ess: float
    mcse: float
    flags: list = field(default_factory=list)


@dataclass
class ConvergenceReport:
    records: list

    @property
    def flagged(self) -> bool:
        return any(r.flags for r in self.records)

    def has_flag(self, flag: str) -> bool:
        return any(flag in r.flags for r in self.records)

    def to_dicts(self) -> list:
        return [asdict(r) for r in self.records]

    def to_json(self) -> str:
        return json.dumps(self.to_dicts(), indent=2, allow_nan=True)


def convergence_report(
    draws: DrawsTensor,
    variables=None,
    statistics=None,
    rhat_threshold: float = RHAT_THRESHOLD,
    ess_threshold: float = ESS_THRESHOLD,
) -> ConvergenceReport:
    """R-hat, ESS and MCSE for every (variable, statistic) pair.

    ``rhat`` is the rank-normalized split R-hat of the variable. ``ess`` is
    the statistic-specific ESS that enters ``mcse``, so for the mean
    ``mcse**2 * ess`` reproduces the pooled variance.
    """
    variables = list(variables or draws.variable_names)
    statistics = list(statistics or [SummaryStatistic.mean()])
    records = []
    for var in variables:
        x = np.asarray(draws.column(var), dtype=float)
        if not np.all(np.isfinite(x)):
            for stat in statistics:
                records.append(ConvergenceRecord(var, stat.label, float("nan"), float("nan"), float("nan"), ["nonfinite"]))
            continue
        try:
            rhat = split_rhat(draws, var, "rank_normal")
        except ValueError:
            rhat = float("nan")
        for stat in statistics:
            flags = []
            value, e, _, degenerate = _mcse_parts(x, stat)
            if degenerate:
                flags.append("degenerate")
            if np.isfinite(rhat) and rhat > rhat_threshold:
                flags.append("high_rhat")
            if np.isfinite(e) and e < ess_threshold:
                flags.append("low_ess")
            records.append(ConvergenceRecord(var, stat.label, rhat, e, value, flags))
    return ConvergenceReport(records)

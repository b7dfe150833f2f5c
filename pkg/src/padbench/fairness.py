"""Fairness diagnostics for risk-score decision rules and measurement models."""

from __future__ import annotations

import csv
import itertools
import math
from fractions import Fraction
from dataclasses import dataclass

import numpy as np

from .draws import DrawsTensor


@dataclass(frozen=True)
class AttributeSchema:
    protected: tuple
    unprotected: tuple

    def __post_init__(self):
        object.__setattr__(self, "protected", tuple(self.protected))
        object.__setattr__(self, "unprotected", tuple(self.unprotected))
        overlap = set(self.protected) & set(self.unprotected)
        if overlap:
            raise ValueError(f"attributes both protected and unprotected: {sorted(overlap)}")

    @property
    def columns(self) -> tuple:
        return self.protected + self.unprotected


def _theta_rows(draws):
    if isinstance(draws, DrawsTensor):
        return draws.pooled_matrix()
    return np.atleast_2d(np.asarray(draws, dtype=float).T).T


def expected_risk(draws, x, conditional_risk) -> float:
    """Posterior average of ``conditional_risk(theta, x)`` over the draws."""
    values = np.array([conditional_risk(theta, x) for theta in _theta_rows(draws)], dtype=float)
    if not np.all(np.isfinite(values)):
        raise ValueError("conditional risk is not finite on every draw")
    return float(values.mean())


def decide(risk: float, tau: float) -> int:
    """1 when the risk strictly exceeds the threshold."""
    if not (np.isfinite(risk) and np.isfinite(tau)):
        raise ValueError("risk and threshold must be finite")
    return int(risk > tau)


@dataclass
class DecisionRule:
    conditional_risk: object
    tau: float

    def __post_init__(self):
        if not np.isfinite(self.tau):
            raise ValueError("threshold must be finite")

    def risk(self, x, draws) -> float:
        return expected_risk(draws, x, self.conditional_risk)

    def __call__(self, x, draws) -> int:
        return decide(self.risk(x, draws), self.tau)


@dataclass
class AntiClassification:
    holds: bool
    counterexamples: list
    vacuous: bool = False

    def __iter__(self):
        return iter((self.holds, self.counterexamples))


def anti_classification_check(rule: DecisionRule, draws, population, schema: AttributeSchema, protected_value_grid) -> AntiClassification:
    """Sweep the protected attributes of every member while holding the
    unprotected ones fixed; the rule passes when no decision changes.

    ``population`` is a list of attribute dicts; ``protected_value_grid``
    maps each protected attribute to the values to try. Counterexamples are
    ``(member index, x, x_alt, d, d_alt)`` tuples.
    """
    grids = [list(protected_value_grid[p]) for p in schema.protected]
    if not schema.protected or any(len(g) == 0 for g in grids):
        raise ValueError("every protected attribute needs a nonempty value grid")
    population = list(population)
    if not population:
        return AntiClassification(True, [], vacuous=True)
    combos = list(itertools.product(*grids))
    counter = []
    for i, x in enumerate(population):
        base = rule(x, draws)
        for combo in combos:
            alt = dict(x)
            alt.update(zip(schema.protected, combo))
            d = rule(alt, draws)
            if d != base:
                counter.append((i, dict(x), alt, base, d))
    return AntiClassification(not counter, counter)


def demographic_parity_gap(decisions, protected_labels):
    """Largest pairwise difference in positive-decision rate across groups.

    Returns ``(gap, rates)`` with ``rates`` a dict keyed by group label.
    """
    d = np.asarray(decisions)
    labels = np.asarray(protected_labels)
    if d.shape != labels.shape:
        raise ValueError("one label per decision is required")
    if not np.all(np.isin(d, (0, 1))):
        raise ValueError("decisions must be 0 or 1")
    groups = sorted(set(labels.tolist()), key=str)
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    # exact rational rates so that e.g. 3/5 - 1/5 gives 0.4, not 0.39999...
    exact = {g: Fraction(int(d[labels == g].sum()), int(np.sum(labels == g))) for g in groups}
    rates = {g: float(r) for g, r in exact.items()}
    return float(max(exact.values()) - min(exact.values())), rates


def _gaussian_kl(m1, s1, m2, s2) -> float:
    return math.log(s2 / s1) + (s1**2 + (m1 - m2) ** 2) / (2 * s2**2) - 0.5


def symmetric_kl_gaussian(m1, s1, m2, s2) -> float:
    if s1 <= 0 or s2 <= 0:
        raise ValueError("standard deviations must be positive")
    return _gaussian_kl(m1, s1, m2, s2) + _gaussian_kl(m2, s2, m1, s1)


def gaussian_summary(draws) -> tuple:
    """Mean and sd (ddof=1) of a 1-D sample."""
    x = np.asarray(draws, dtype=float).reshape(-1)
    return float(x.mean()), float(x.std(ddof=1))


def dif_check(group_posteriors: dict, threshold: float):
    """Pairwise symmetric KL between Gaussian summaries of one item parameter.

    ``group_posteriors`` maps group to ``(mean, sd)``. Returns
    ``(max_divergence, flagged_pairs)``; a pair is flagged when its
    divergence exceeds ``threshold``.
    """
    if len(group_posteriors) < 2:
        raise ValueError("need at least two groups")
    for g, (_, s) in group_posteriors.items():
        if s <= 0:
            raise ValueError(f"group {g!r} has a nonpositive sd")
    worst, flagged = 0.0, []
    for (g1, (m1, s1)), (g2, (m2, s2)) in itertools.combinations(group_posteriors.items(), 2):
        kl = symmetric_kl_gaussian(m1, s1, m2, s2)
        worst = max(worst, kl)
        if kl > threshold:
            flagged.append((g1, g2, kl))
    return worst, flagged


def gaussian_entropy(sd) -> np.ndarray:
    sd = np.asarray(sd, dtype=float)
    return 0.5 * np.log(2 * math.pi * math.e * sd**2)


def entropy_parity(posterior_sds: dict, tolerance: float):
    """Largest entropy difference between any two people and whether it is within tolerance."""
    sds = np.array(list(posterior_sds.values()), dtype=float)
    if sds.size == 0:
        raise ValueError("no posterior sds given")
    if np.any(sds <= 0):
        raise ValueError("posterior sds must be positive")
    # entropies differ by log sd ratios; taking logs directly avoids rounding
    # in the constant term
    log_sd = np.log(sds)
    gap = float(log_sd.max() - log_sd.min())
    return gap, gap <= tolerance


@dataclass
class FairnessData:
    ids: list
    attributes: list
    outcome: np.ndarray


def read_fairness_csv(path, schema: AttributeSchema) -> FairnessData:
    """Read ``id,<protected>,<unprotected>,outcome`` rows.

    Attribute values are parsed as floats where possible and kept as
    strings otherwise.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in ("id", *schema.columns, "outcome") if c not in header]
        if missing:
            raise ValueError(f"{path}: missing columns {missing}")
        ids, attrs, outcome = [], [], []
        for row in reader:
            ids.append(row["id"])
            attrs.append({c: _parse_value(row[c]) for c in schema.columns})
            outcome.append(float(row["outcome"]))
    return FairnessData(ids, attrs, np.array(outcome))


def _parse_value(text: str):
    try:
        return float(text)
    except ValueError:
        return text

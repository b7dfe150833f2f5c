"""Posterior and prior draws: the container every diagnostic consumes.

Draws are stored as a read-only array of shape ``(chain, draw, variable)``.
All transforms return new tensors.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import rankdata


class NonFiniteDrawsError(ValueError):
    """Raised when a diagnostic is asked to run on draws containing NaN/inf."""


class DrawsTensor:
    """Immutable ``(chain, draw, variable)`` array of draws.

    Parameters
    ----------
    values : array_like
        Array of shape ``(chains, draws, variables)``. A 2-D array is read as
        a single variable ``(chains, draws)``.
    variable_names : sequence of str
        Unique names, one per trailing-axis slot.
    """

    __slots__ = ("_values", "_names", "_index", "contains_nonfinite")

    def __init__(self, values, variable_names: Sequence[str]):
        arr = np.array(values, dtype=float, copy=True)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError("draws must have shape (chain, draw, variable)")
        names = tuple(str(n) for n in variable_names)
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("need at least one chain and one draw")
        if len(names) != arr.shape[2]:
            raise ValueError(
                f"{len(names)} variable names for {arr.shape[2]} variables"
            )
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")
        arr.setflags(write=False)
        self._values = arr
        self._names = names
        self._index = {n: i for i, n in enumerate(names)}
        self.contains_nonfinite = bool(not np.all(np.isfinite(arr)))

    @classmethod
    def from_dict(cls, columns: Mapping[str, np.ndarray]) -> "DrawsTensor":
        """Build from ``{name: array of shape (chains, draws)}``."""
        names = list(columns)
        if not names:
            raise ValueError("no variables given")
        arrays = [np.atleast_2d(np.asarray(columns[n], dtype=float)) for n in names]
        return cls(np.stack(arrays, axis=-1), names)

    @classmethod
    def from_pooled(cls, values, variable_names: Sequence[str]) -> "DrawsTensor":
        """Single-chain tensor from an ``(S,)`` or ``(S, K)`` array."""
        arr = np.asarray(values, dtype=float)
        if arr.ndim == 1:
            arr = arr[:, None]
        return cls(arr[None, :, :], variable_names)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def variable_names(self) -> tuple:
        return self._names

    @property
    def chain_count(self) -> int:
        return self._values.shape[0]

    @property
    def draws_per_chain(self) -> int:
        return self._values.shape[1]

    @property
    def n_draws(self) -> int:
        return self.chain_count * self.draws_per_chain

    def __repr__(self):
        return (
            f"DrawsTensor(chains={self.chain_count}, draws={self.draws_per_chain}, "
            f"variables={list(self._names)})"
        )

    def __contains__(self, name):
        return name in self._index

    def column(self, variable: str) -> np.ndarray:
        """``(chain, draw)`` view of one variable."""
        try:
            return self._values[:, :, self._index[variable]]
        except KeyError:
            raise KeyError(f"unknown variable {variable!r}") from None

    def pooled(self, variable: str) -> np.ndarray:
        return self.column(variable).reshape(-1)

    def pooled_matrix(self) -> np.ndarray:
        """``(S, K)`` array, chains concatenated in order."""
        return self._values.reshape(-1, self._values.shape[2])

    def as_dict(self) -> dict:
        return {n: self.column(n) for n in self._names}

    def select(self, names: Sequence[str]) -> "DrawsTensor":
        idx = [self._index[n] for n in names]
        return DrawsTensor(self._values[:, :, idx], names)

    def check_finite(self):
        if self.contains_nonfinite:
            raise NonFiniteDrawsError("draws contain nonfinite values")

    def to_csv(self, path):
        write_draws_csv(self, path)


@dataclass(frozen=True)
class SummaryStatistic:
    """A posterior summary ``T``: mean, sd, quantile(p) or probability below t."""

    kind: str
    p: float | None = None
    threshold: float | None = None

    def __post_init__(self):
        if self.kind not in ("mean", "sd", "quantile", "prob_below"):
            raise ValueError(f"unknown summary kind {self.kind!r}")
        if self.kind == "quantile":
            if self.p is None or not 0.0 < self.p < 1.0:
                raise ValueError("quantile probability must lie strictly in (0, 1)")
        if self.kind == "prob_below" and self.threshold is None:
            raise ValueError("prob_below needs a threshold")

    @classmethod
    def mean(cls):
        return cls("mean")

    @classmethod
    def sd(cls):
        return cls("sd")

    @classmethod
    def quantile(cls, p: float):
        return cls("quantile", p=float(p))

    @classmethod
    def prob_below(cls, threshold: float):
        return cls("prob_below", threshold=float(threshold))

    @property
    def label(self) -> str:
        if self.kind == "quantile":
            return f"q{self.p:g}"
        if self.kind == "prob_below":
            return f"p<{self.threshold:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "SummaryStatistic":
        """Parse ``mean``, ``sd``, ``q0.05`` or ``p<1.5``."""
        text = text.strip()
        if text in ("mean", "sd"):
            return cls(text)
        if text.startswith("q"):
            return cls.quantile(float(text[1:]))
        if text.startswith("p<"):
            return cls.prob_below(float(text[2:]))
        raise ValueError(f"cannot parse summary statistic {text!r}")


@dataclass(frozen=True)
class Pushforward:
    """Named deterministic map ``psi(theta)``.

    ``fn`` receives a mapping from parameter name to value (scalars or arrays
    of matching shape) and must broadcast elementwise, e.g.
    ``lambda p: p["beta1"] - p["beta2"]``.
    """

    name: str
    fn: Callable[[Mapping[str, np.ndarray]], np.ndarray] = field(compare=False)

    @classmethod
    def identity(cls, variable: str) -> "Pushforward":
        return cls(variable, lambda p: p[variable])

    def __call__(self, params: Mapping[str, np.ndarray]):
        return self.fn(params)

    def evaluate_vector(self, theta, parameter_names: Sequence[str]) -> float:
        """Apply to a single parameter vector."""
        theta = np.asarray(theta, dtype=float)
        return float(self.fn({n: theta[i] for i, n in enumerate(parameter_names)}))


def _type7_quantile(x: np.ndarray, p: float) -> float:
    # h = (n-1)p + 1 in 1-based order-statistic indexing
    xs = np.sort(x)
    h = (xs.size - 1) * p
    lo = int(np.floor(h))
    hi = min(lo + 1, xs.size - 1)
    return float(xs[lo] + (h - lo) * (xs[hi] - xs[lo]))


def summarize_values(x, stat: SummaryStatistic) -> float:
    """Apply ``stat`` to a flat array of finite values."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("no draws to summarize")
    if not np.all(np.isfinite(x)):
        raise NonFiniteDrawsError("draws contain nonfinite values")
    if stat.kind == "mean":
        return float(np.mean(x))
    if stat.kind == "sd":
        if x.size < 2:
            raise ValueError("sd needs at least two draws")
        return float(np.std(x, ddof=1))
    if stat.kind == "quantile":
        return _type7_quantile(x, stat.p)
    return float(np.mean(x < stat.threshold))


def weighted_summary(x, weights, stat: SummaryStatistic) -> float:
    """Summary of draws under normalized importance weights.

    Exactly uniform weights dispatch to the unweighted estimator so that an
    identity reweighting reproduces :func:`summarize_values` bit for bit.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != x.shape:
        raise ValueError("weights and draws differ in length")
    if np.all(w == w[0]):
        return summarize_values(x, stat)
    w = w / w.sum()
    if stat.kind == "mean":
        return float(np.sum(w * x))
    if stat.kind == "sd":
        m = np.sum(w * x)
        # reliability-weight correction; equals ddof=1 for uniform weights
        denom = 1.0 - np.sum(w**2)
        if denom <= 0:
            raise ValueError("weighted sd undefined for a single effective draw")
        return float(np.sqrt(np.sum(w * (x - m) ** 2) / denom))
    if stat.kind == "quantile":
        order = np.argsort(x, kind="stable")
        xs, ws = x[order], w[order]
        cw = np.cumsum(ws) - 0.5 * ws
        return float(np.interp(stat.p, cw, xs))
    return float(np.sum(w * (x < stat.threshold)))


def summarize(draws: DrawsTensor, variable: str, stat: SummaryStatistic) -> float:
    """Pooled summary statistic of one variable across all chains."""
    draws.check_finite()
    return summarize_values(draws.pooled(variable), stat)


def pushforward_draws(draws: DrawsTensor, psi: Pushforward) -> DrawsTensor:
    """Evaluate ``psi`` on every (chain, draw) parameter vector."""
    out = np.asarray(psi(draws.as_dict()), dtype=float)
    out = np.broadcast_to(out, (draws.chain_count, draws.draws_per_chain))
    if not np.all(np.isfinite(out)):
        raise NonFiniteDrawsError(f"pushforward {psi.name!r} is nonfinite on some draws")
    return DrawsTensor(out[:, :, None], [psi.name])


def rank_normalize(draws: DrawsTensor, variable: str) -> DrawsTensor:
    """Replace pooled draws by Blom normal scores, keeping chain structure.

    Ranks are pooled over chains with average ranks for ties, then mapped
    through ``ndtri((rank - 3/8) / (n + 1/4))``.
    """
    draws.check_finite()
    x = draws.column(variable)
    return DrawsTensor(_rank_normal_scores(x)[:, :, None], [variable])


def _rank_normal_scores(x: np.ndarray) -> np.ndarray:
    flat = x.reshape(-1)
    if np.all(flat == flat[0]):
        raise ValueError("rank normalization needs at least two distinct values")
    ranks = rankdata(flat, method="average")
    z = ndtri((ranks - 0.375) / (flat.size + 0.25))
    return z.reshape(x.shape)


def write_draws_csv(draws: DrawsTensor, path):
    """Write ``chain,draw,<vars...>`` with 1-based indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["chain", "draw", *draws.variable_names])
        vals = draws.values
        for c in range(draws.chain_count):
            for s in range(draws.draws_per_chain):
                writer.writerow([c + 1, s + 1, *(repr(float(v)) for v in vals[c, s])])


class DrawsFormatError(ValueError):
    """Malformed draws CSV; ``problems`` lists every issue found."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


def read_draws_csv(path) -> DrawsTensor:
    """Parse a draws CSV. Rows may come in any order."""
    problems = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DrawsFormatError([f"{path}: empty file"]) from None
        header = [h.strip() for h in header]
        if header[:2] != ["chain", "draw"] or len(header) < 3:
            raise DrawsFormatError([f"{path}: header must start with chain,draw,<var>"])
        names = header[2:]
        if len(set(names)) != len(names):
            problems.append(f"{path}: duplicate variable names in header")
        rows = {}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                problems.append(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
                continue
            try:
                c, s = int(row[0]), int(row[1])
                vals = [float(v) for v in row[2:]]
            except ValueError:
                problems.append(f"{path}:{lineno}: non-numeric field")
                continue
            if c < 1 or s < 1:
                problems.append(f"{path}:{lineno}: chain and draw are 1-based")
                continue
            if (c, s) in rows:
                problems.append(f"{path}:{lineno}: duplicate (chain={c}, draw={s})")
                continue
            rows[(c, s)] = vals
    if not rows and not problems:
        problems.append(f"{path}: no draws")
    if problems:
        raise DrawsFormatError(problems)
    n_chain = max(c for c, _ in rows)
    n_draw = max(s for _, s in rows)
    missing = [
        (c, s) for c in range(1, n_chain + 1) for s in range(1, n_draw + 1) if (c, s) not in rows
    ]
    if missing:
        raise DrawsFormatError(
            [f"{path}: missing (chain, draw) pairs, e.g. {missing[:3]}"]
        )
    arr = np.empty((n_chain, n_draw, len(names)))
    for (c, s), vals in rows.items():
        arr[c - 1, s - 1] = vals
    return DrawsTensor(arr, names)

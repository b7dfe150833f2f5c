"""Seeding, parallel map and small numeric helpers shared across modules."""

from __future__ import annotations

import os
import zlib
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.special import logsumexp


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("seed keys must be nonnegative")
        return int(key)
    return zlib.crc32(str(key).encode("utf8"))


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Independent generator keyed by ``(seed, *keys)``.

    Keys may be integers (chain or instance indices) or strings (purpose
    tags). Streams for distinct key tuples do not overlap, so results depend
    only on the keys and never on evaluation order.
    """
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *keys) -> int:
    entropy = [_key_to_int(seed)] + [_key_to_int(k) for k in keys]
    return int(np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint32)[0])


def max_workers() -> int:
    raw = os.environ.get("PADBENCH_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(1, n)


def parallel_map(fn, items):
    """Ordered map, threaded when ``PADBENCH_THREADS`` > 1."""
    items = list(items)
    workers = min(max_workers(), len(items)) if items else 1
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def normalized_weights(log_w):
    """Normalize log weights; returns (weights, entropy in nats)."""
    log_w = np.asarray(log_w, dtype=float)
    if not np.any(np.isfinite(log_w)) or np.any(log_w == np.inf):
        raise ValueError("log weights have no finite mass")
    log_w = log_w - logsumexp(log_w)
    w = np.exp(log_w)
    pos = w > 0
    entropy = float(-np.sum(w[pos] * log_w[pos]))
    return w, entropy


def log_mean_exp(x, axis=None):
    x = np.asarray(x, dtype=float)
    n = x.shape[axis] if axis is not None else x.size
    return logsumexp(x, axis=axis) - np.log(n)

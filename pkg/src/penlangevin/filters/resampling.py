"""Resampling and weight diagnostics."""

import numpy as np
from scipy.special import logsumexp


def normalize_log_weights(log_w):
    """Normalized weights and the log of the unnormalized total."""
    log_w = np.asarray(log_w, dtype=float)
    total = logsumexp(log_w)
    if not np.isfinite(total):
        raise FloatingPointError("all particle weights vanished")
    w = np.exp(log_w - total)
    return w / w.sum(), total


def effective_sample_size(weights) -> float:
    """1 / sum W^2 for normalized weights; lies in [1, K]."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.dot(w, w))


def systematic_resample(weights, rng: np.random.Generator) -> np.ndarray:
    """Ancestor indices from a single stratified uniform draw.

    Index i is selected either floor(K W_i) or ceil(K W_i) times.
    """
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise ValueError("cannot resample from all-zero weights")
    k = len(w)
    cs = np.cumsum(w) / total
    cs[np.flatnonzero(w)[-1]:] = 1.0
    u = (rng.random() + np.arange(k)) / k
    return np.searchsorted(cs, u, side="right")

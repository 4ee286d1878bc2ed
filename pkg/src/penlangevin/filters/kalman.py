"""Kalman-type filters on the Lie-Trotter state-space model.

The prediction mean is always the nonlinear Lie-Trotter map. The naive KF
treats the residual drift as a known constant when propagating the
covariance; the EKF adds the first-order term h^2 E G R G^T E^T with
G = D g_lam.
"""

from __future__ import annotations

import numpy as np

from ..dynamics import LangevinModel, residual_drift, residual_drift_jacobian
from ..noise import gaussianized_covariance
from .common import OBSERVATION_MATRIX as L
from .common import FilterConfig, FilterOutput, Observations, initial_belief


def _sym(m):
    return 0.5 * (m + m.T)


def _clamp_psd(m, diag, key):
    w, v = np.linalg.eigh(m)
    if w.min() < -1e-12 * np.abs(w).max():
        diag[key] = diag.get(key, 0) + 1
        m = (v * np.clip(w, 0.0, None)) @ v.T
    return m


def kalman_update(mean, cov, y, obs_cov, diag=None):
    """Standard correction with the position observed."""
    diag = {} if diag is None else diag
    s = _sym(L @ cov @ L.T + obs_cov)
    s = _clamp_psd(s, diag, "innovation_clamped")
    gain = np.linalg.solve(s, L @ cov).T  # cov L^T S^-1, S symmetric
    mean = mean + gain @ (y - L @ mean)
    cov = _sym((np.eye(4) - gain @ L) @ cov)
    return mean, cov


def predict(mean, cov, model: LangevinModel, h: float, extended: bool):
    l = model.select_center(mean[0:2])
    ctx = model.context(l, h)
    e = ctx.exp_drift
    shifted = mean - ctx.fixed_point - h * residual_drift(mean, model, l)
    mean_pred = e @ shifted + ctx.fixed_point
    cov_pred = e @ cov @ e.T + ctx.cov
    if extended:
        g = np.zeros((4, 4))
        g[2:4, 0:2] = residual_drift_jacobian(mean[0:2], model, l)
        eg = e @ g
        cov_pred = cov_pred + h**2 * eg @ cov @ eg.T
    return mean_pred, _sym(cov_pred)


def ekf(observations: Observations, cfg: FilterConfig, model: LangevinModel, h: float = None) -> FilterOutput:
    """Naive KF (``cfg.algorithm == "KF"``) or EKF over equally spaced observations.

    Non-Gaussian measurement models are replaced by an isotropic Gaussian
    with matching per-axis variance. ``cfg.penalized = False`` drops the
    penalty (lam = inf).
    """
    if cfg.algorithm not in ("KF", "EKF"):
        raise ValueError("ekf() runs the KF and EKF algorithms only")
    model = model if cfg.penalized else model.without_penalty()
    h = observations.step if h is None else h
    obs_cov = gaussianized_covariance(cfg.model)
    extended = cfg.algorithm == "EKF"
    ys = observations.values
    n = len(ys)
    means = np.empty((n, 4))
    covs = np.empty((n, 4, 4))
    diag: dict = {}
    mean, cov = initial_belief(ys[0], cfg.model, model.movement.nu)
    mean, cov = kalman_update(mean, cov, ys[0], obs_cov, diag)
    means[0], covs[0] = mean, cov
    for k in range(1, n):
        mean, cov = predict(mean, cov, model, h, extended)
        mean, cov = kalman_update(mean, cov, ys[k], obs_cov, diag)
        cov = _clamp_psd(cov, diag, "covariance_clamped")
        means[k], covs[k] = mean, cov
    return FilterOutput(np.asarray(observations.times, dtype=float), means, covs, diagnostics=diag)


def naive_kf(observations, cfg: FilterConfig, model, h=None) -> FilterOutput:
    from dataclasses import replace

    return ekf(observations, replace(cfg, algorithm="KF"), model, h)

"""Measurement-error models for observed positions.

Three models, all acting on the 2-d residual y - x:

* ``Gaussian``   isotropic N(0, s^2 I)
* ``StudentIso`` s * (t1, t2) with t1, t2 independent standard t_d variates
* ``ArgosMix``   bivariate t_d with scale Sigma (prob p) or Sigma~ (prob 1 - p),
                 Sigma = s^2 [[1, k], [k, 1]], Sigma~ = s^2 [[1, -k], [-k, 1]], k = rho sqrt(a)
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple, Union

import numpy as np
from scipy.special import gammaln


def _check_residual(r):
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ValueError("residual must be finite")
    return r


def _mvt_logpdf(r, scale, d):
    """Bivariate t_d log-density with scale matrix ``scale`` at rows of ``r``."""
    inv = np.linalg.inv(scale)
    _, logdet = np.linalg.slogdet(scale)
    maha = np.einsum("...a,ab,...b->...", r, inv, r)
    return (gammaln((d + 2) / 2) - gammaln(d / 2) - math.log(d * math.pi) - 0.5 * logdet
            - 0.5 * (d + 2) * np.log1p(maha / d))


def _mvt_sample(scale, d, rng, shape):
    fac = np.linalg.cholesky(scale)
    z = rng.standard_normal(shape + (2,)) @ fac.T
    w = np.sqrt(d / rng.chisquare(d, size=shape))
    return z * w[..., None]


@dataclass(frozen=True)
class Gaussian:
    sigma_obs: float

    def __post_init__(self):
        if not self.sigma_obs > 0:
            raise ValueError("sigma_obs must be positive")

    def sample(self, rng, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        return self.sigma_obs * rng.standard_normal(shape + (2,))

    def log_density(self, residual):
        r = _check_residual(residual)
        s2 = self.sigma_obs**2
        return -math.log(2 * math.pi * s2) - 0.5 * np.sum(r * r, axis=-1) / s2

    def moment_match(self) -> List[Tuple[float, np.ndarray]]:
        return [(1.0, self.sigma_obs**2 * np.eye(2))]


@dataclass(frozen=True)
class StudentIso:
    sigma_obs: float
    d: float

    def __post_init__(self):
        if not self.sigma_obs > 0:
            raise ValueError("sigma_obs must be positive")
        if not self.d > 0:
            raise ValueError("degrees of freedom must be positive")

    def sample(self, rng, size=None):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        return self.sigma_obs * rng.standard_t(self.d, size=shape + (2,))

    def log_density(self, residual):
        r = _check_residual(residual) / self.sigma_obs
        d = self.d
        const = gammaln((d + 1) / 2) - gammaln(d / 2) - 0.5 * math.log(d * math.pi) - math.log(self.sigma_obs)
        return np.sum(const - 0.5 * (d + 1) * np.log1p(r * r / d), axis=-1)

    def moment_match(self):
        if self.d <= 2:
            raise ValueError("moment matching needs d > 2 (finite variance)")
        return [(1.0, self.sigma_obs**2 * self.d / (self.d - 2) * np.eye(2))]


@dataclass(frozen=True)
class ArgosMix:
    sigma_obs: float
    d: float
    rho: float
    a: float
    p: float

    def __post_init__(self):
        if not self.sigma_obs > 0:
            raise ValueError("sigma_obs must be positive")
        if not self.d > 0:
            raise ValueError("degrees of freedom must be positive")
        if not -1 < self.rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        if not self.a >= 0:
            raise ValueError("a must be nonnegative")
        if not 0 <= self.p <= 1:
            raise ValueError("p must lie in [0, 1]")
        if not abs(self.rho * math.sqrt(self.a)) < 1:
            raise ValueError("|rho sqrt(a)| must be < 1")

    @property
    def coupling(self) -> float:
        return self.rho * math.sqrt(self.a)

    @property
    def scales(self) -> Tuple[np.ndarray, np.ndarray]:
        k = self.coupling
        s2 = self.sigma_obs**2
        return (s2 * np.array([[1.0, k], [k, 1.0]]), s2 * np.array([[1.0, -k], [-k, 1.0]]))

    def sample(self, rng, size=None, return_branch: bool = False):
        shape = () if size is None else (size,) if np.isscalar(size) else tuple(size)
        first = rng.random(shape) < self.p
        s1, s2 = self.scales
        e1 = _mvt_sample(s1, self.d, rng, shape)
        e2 = _mvt_sample(s2, self.d, rng, shape)
        eps = np.where(first[..., None], e1, e2)
        return (eps, first) if return_branch else eps

    def log_density(self, residual):
        r = _check_residual(residual)
        s1, s2 = self.scales
        with np.errstate(divide="ignore"):
            lp, lq = math.log(self.p) if self.p > 0 else -np.inf, math.log1p(-self.p) if self.p < 1 else -np.inf
        return np.logaddexp(lp + _mvt_logpdf(r, s1, self.d), lq + _mvt_logpdf(r, s2, self.d))

    def moment_match(self):
        if self.d <= 2:
            raise ValueError("moment matching needs d > 2 (finite variance)")
        f = self.d / (self.d - 2)
        s1, s2 = self.scales
        return [(self.p, f * s1), (1.0 - self.p, f * s2)]

    def isotropic_variance(self) -> float:
        """Per-axis variance d/(d-2) s^2, ignoring the coupling."""
        return self.sigma_obs**2 * self.d / (self.d - 2)


MeasurementModel = Union[Gaussian, StudentIso, ArgosMix]


def sample_error(model: MeasurementModel, rng: np.random.Generator, size=None):
    return model.sample(rng, size)


def log_density(model: MeasurementModel, residual):
    return model.log_density(residual)


def moment_match(model: MeasurementModel):
    """Gaussian mixture [(weight, covariance), ...] with the model's second moments."""
    return model.moment_match()


def gaussianized_covariance(model: MeasurementModel) -> np.ndarray:
    """Single isotropic Gaussian covariance used by the Kalman-type filters."""
    if isinstance(model, ArgosMix):
        return model.isotropic_variance() * np.eye(2)
    (w, cov), = model.moment_match()
    return cov

"""Small dense kernels for the linear (Ornstein-Uhlenbeck) part of the splitting."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from .potential import NO_CENTER

log = logging.getLogger(__name__)

KRON_COND_LIMIT = 1e12
SIMPSON_ABS_TOL = 1e-10


@dataclass(frozen=True)
class DriftMatrix:
    """Linearized drift [[0, I], [-2 alpha_l B_l, -A]] with A = [[c, -omega], [omega, c]].

    ``index`` is the potential component the drift is linearized around, or
    ``NO_CENTER`` for the flat potential (zero bottom-left block).
    """

    matrix: np.ndarray
    c: float
    omega: float
    index: int = NO_CENTER

    @classmethod
    def build(cls, c: float, omega: float, alpha: float = 0.0, precision=None,
              index: int = NO_CENTER) -> "DriftMatrix":
        if not c > 0:
            raise ValueError(f"damping c must be positive, got {c}")
        m = np.zeros((4, 4))
        m[0:2, 2:4] = np.eye(2)
        m[2:4, 2:4] = -np.array([[c, -omega], [omega, c]])
        if precision is not None:
            m[2:4, 0:2] = -2.0 * alpha * np.asarray(precision, dtype=float)
        m.setflags(write=False)
        return cls(m, float(c), float(omega), int(index))

    @property
    def friction(self) -> np.ndarray:
        return -self.matrix[2:4, 2:4]


@dataclass(frozen=True)
class NoiseMatrix:
    """Diffusion covariance blockdiag(0, sigma^2 I) acting on the velocity only."""

    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def matrix(self) -> np.ndarray:
        g = np.zeros((4, 4))
        g[2:4, 2:4] = self.sigma**2 * np.eye(2)
        return g


def matrix_exponential(m) -> np.ndarray:
    """exp(M) by scaling-and-squaring Pade (scipy)."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix_exponential: non-finite input")
    return scipy.linalg.expm(m)


def kronecker_sum(a) -> np.ndarray:
    n = a.shape[0]
    eye = np.eye(n)
    return np.kron(a, eye) + np.kron(eye, a)


def _integrand(a, gamma, u):
    e = scipy.linalg.expm(a * u)
    return e @ gamma @ e.T


def _adaptive_simpson(f, lo, hi, tol, max_depth=40):
    """Adaptive Simpson quadrature for matrix-valued ``f`` with an entrywise absolute tolerance."""

    def simpson(a, fa, b, fb):
        mid = 0.5 * (a + b)
        fm = f(mid)
        return mid, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, fa, b, fb, mid, fm, whole, tol, depth):
        lm, flm, left = simpson(a, fa, mid, fm)
        rm, frm, right = simpson(mid, fm, b, fb)
        err = left + right - whole
        if depth >= max_depth or np.max(np.abs(err)) <= 15.0 * tol:
            return left + right + err / 15.0
        return (recurse(a, fa, mid, fm, lm, flm, left, tol / 2, depth + 1)
                + recurse(mid, fm, b, fb, rm, frm, right, tol / 2, depth + 1))

    fa, fb = f(lo), f(hi)
    mid, fm, whole = simpson(lo, fa, hi, fb)
    return recurse(lo, fa, hi, fb, mid, fm, whole, tol, 0)


def ou_covariance(drift: DriftMatrix, noise: NoiseMatrix, h: float, *, full_output: bool = False):
    """Covariance of the OU increment over a step ``h``.

    Q(h) = int_0^h e^{A u} G e^{A^T u} du. With K = A (+) A the Kronecker sum,
    vec Q = K^{-1} (e^{Kh} - I) vec G. The factor K^{-1} (e^{Kh} - I) is read off
    the exponential of [[Kh, Ih], [0, 0]], which avoids the cancellation of the
    subtraction for small h. Falls back to adaptive Simpson quadrature when K is
    (near) singular, as it is for the flat potential.

    With ``full_output`` also returns a dict with the method used and the
    condition number.
    """
    if not h > 0:
        raise ValueError("step h must be positive")
    a = np.asarray(drift.matrix)
    gamma = noise.matrix
    ksum = kronecker_sum(a)
    cond = np.linalg.cond(ksum)
    if np.isfinite(cond) and cond <= KRON_COND_LIMIT:
        m = ksum.shape[0]
        aug = np.zeros((2 * m, 2 * m))
        aug[:m, :m] = ksum * h
        aug[:m, m:] = np.eye(m) * h
        phi = scipy.linalg.expm(aug)[:m, m:]
        # column-major vec; the Kronecker sum is symmetric in the two factors
        q = (phi @ gamma.reshape(-1, order="F")).reshape(4, 4, order="F")
        method = "kronecker"
    else:
        log.debug("Kronecker sum ill-conditioned (cond=%.3g); using quadrature", cond)
        q = _adaptive_simpson(lambda u: _integrand(a, gamma, u), 0.0, h, SIMPSON_ABS_TOL)
        method = "quadrature"
    q = 0.5 * (q + q.T)
    if full_output:
        return q, {"method": method, "cond": cond}
    return q


def condition_gaussian(mean, cov, observed_position):
    """Law of the velocity block given the position block of a 4-d Gaussian.

    Broadcasts over leading axes of ``mean``/``observed_position``; ``cov``
    may be a single 4x4 matrix or a matching stack.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    q_xx, q_xv = cov[..., 0:2, 0:2], cov[..., 0:2, 2:4]
    q_vx, q_vv = cov[..., 2:4, 0:2], cov[..., 2:4, 2:4]
    try:
        gain = np.swapaxes(np.linalg.solve(q_xx, q_xv), -1, -2)  # Q_vx Q_xx^-1 (Q_xx symmetric)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "position covariance block is singular; use a larger step or the flat-potential path"
        ) from exc
    innov = np.asarray(observed_position, dtype=float) - mean[..., 0:2]
    m = mean[..., 2:4] + np.einsum("...ab,...b->...a", gain, innov)
    s = q_vv - gain @ q_xv
    s = 0.5 * (s + np.swapaxes(s, -1, -2))
    return m, s


def psd_factor(cov, tol: float = 1e-10) -> np.ndarray:
    """Factor L with L L^T = cov for a symmetric PSD matrix, tolerating rank deficiency.

    Eigenvalues below zero but above ``-tol * trace`` are clamped to zero.
    """
    cov = np.asarray(cov, dtype=float)
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    tr = max(np.trace(cov), 0.0)
    if w.min() < -tol * max(tr, np.finfo(float).tiny):
        raise ValueError(f"covariance is indefinite (min eigenvalue {w.min():.3e})")
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_mvn(mean, cov, rng: np.random.Generator, size: Optional[int] = None):
    """Draw from N(mean, cov); ``cov`` may be singular."""
    mean = np.asarray(mean, dtype=float)
    fac = psd_factor(cov)
    shape = (mean.shape[-1],) if size is None else (size, mean.shape[-1])
    z = rng.standard_normal(shape)
    return mean + z @ fac.T


def gaussian_logpdf(x, mean, cov_inv, logdet):
    """Log N(x; mean, cov) from a precomputed inverse and log-determinant, batched over rows."""
    d = np.asarray(x) - mean
    n = d.shape[-1]
    maha = np.einsum("...a,...ab,...b->...", d, cov_inv, d)
    return -0.5 * (n * np.log(2 * np.pi) + logdet + maha)

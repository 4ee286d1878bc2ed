"""Gaussian approximations of the optimal particle proposal.

Both proposals replace the measurement density by its moment-matched
Gaussian (mixture) and combine it with the splitting transition density in
closed form. Everything is batched over particles that share one step
context.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..dynamics import LIE_TROTTER, STRANG, LangevinModel, StepContext, residual_velocity_drift, transition_mean
from ..linalg import condition_gaussian, gaussian_logpdf
from ..noise import MeasurementModel
from .common import OBSERVATION_MATRIX as L

JITTER = 1e-12


def jittered(cov):
    """cov + JITTER * trace(cov) * I, keeps near-singular OU covariances invertible."""
    n = cov.shape[-1]
    return cov + JITTER * np.trace(cov) * np.eye(n)


def _inv_logdet(cov):
    sign, logdet = np.linalg.slogdet(cov)
    if np.any(sign <= 0):
        raise np.linalg.LinAlgError("proposal covariance is not positive definite")
    return np.linalg.inv(cov), logdet


@dataclass
class GaussianMixtureProposal:
    """sum_i w_i N(m_i, C_i) with per-particle means ``means[i]`` of shape (B, n)."""

    weights: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.precisions = np.empty_like(self.covs)
        self.logdets = np.empty(len(self.weights))
        self.factors = np.empty_like(self.covs)
        for i, c in enumerate(self.covs):
            self.precisions[i], self.logdets[i] = _inv_logdet(c)
            self.factors[i] = np.linalg.cholesky(0.5 * (c + c.T))

    @property
    def n_components(self) -> int:
        return len(self.weights)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        b, n = self.means.shape[1:]
        z = rng.standard_normal((b, n))
        if self.n_components == 1:
            return self.means[0] + z @ self.factors[0].T
        comp = rng.choice(self.n_components, size=b, p=self.weights)
        out = np.empty((b, n))
        for i in range(self.n_components):
            sel = comp == i
            out[sel] = self.means[i, sel] + z[sel] @ self.factors[i].T
        return out

    def logpdf(self, u) -> np.ndarray:
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        terms = [logw[i] + gaussian_logpdf(u, self.means[i], self.precisions[i], self.logdets[i])
                 for i in range(self.n_components)]
        return logsumexp(np.stack(terms), axis=0)


def _measurement_precisions(obs_model: MeasurementModel):
    return [(w, np.linalg.inv(cov)) for w, cov in obs_model.moment_match()]


@dataclass
class LieTrotterProposal:
    """Gaussian (mixture) proposal over the full state plus the LT transition density."""

    mixture: GaussianMixtureProposal
    transition_mean: np.ndarray
    transition_precision: np.ndarray
    transition_logdet: float

    def sample(self, rng):
        return self.mixture.sample(rng)

    def logpdf(self, u):
        return self.mixture.logpdf(u)

    def transition_logpdf(self, u):
        return gaussian_logpdf(u, self.transition_mean, self.transition_precision, self.transition_logdet)

    def log_weight_increment(self, u):
        """log p^LT(u | u') - log q(u); the measurement density is added by the caller."""
        return self.transition_logpdf(u) - self.logpdf(u)


def lt_proposal(u_prev, y, ctx: StepContext, model: LangevinModel,
                obs_model: MeasurementModel) -> LieTrotterProposal:
    """Product of the Lie-Trotter transition N(m, Q) with a Gaussian measurement term.

    Component i has covariance (Q^-1 + L^T P_i L)^-1 and mean
    Gamma_i (Q^-1 m + L^T P_i y), where P_i is the inverse moment-matched
    measurement covariance; mixture weights are the measurement model's.
    """
    u_prev = np.atleast_2d(np.asarray(u_prev, dtype=float))
    m = transition_mean(u_prev, ctx, model, LIE_TROTTER)
    q_inv, q_logdet = _inv_logdet(jittered(ctx.cov))
    weights, covs, means = [], [], []
    for w, prec in _measurement_precisions(obs_model):
        gamma_inv = q_inv + L.T @ prec @ L
        gamma = np.linalg.inv(gamma_inv)
        gamma = 0.5 * (gamma + gamma.T)
        rhs = m @ q_inv + (L.T @ prec @ np.asarray(y, dtype=float))
        weights.append(w)
        covs.append(gamma)
        means.append(rhs @ gamma)
    mix = GaussianMixtureProposal(np.array(weights), np.stack(means), np.stack(covs))
    return LieTrotterProposal(mix, m, q_inv, q_logdet)


@dataclass
class StrangProposal:
    """Position from a Gaussian (mixture), then velocity from the Strang conditional law."""

    position: GaussianMixtureProposal
    z_mean: np.ndarray  # mean of the OU output Z, (B, 4)
    z_cov: np.ndarray
    xx_precision: np.ndarray
    xx_logdet: float
    vel_cov: np.ndarray
    vel_factor: np.ndarray
    ctx: StepContext
    model: LangevinModel

    def velocity_mean(self, x):
        m_v, _ = condition_gaussian(self.z_mean, self.z_cov, x)
        return m_v - 0.5 * self.ctx.h * residual_velocity_drift(x, self.model, self.ctx.index)

    def sample(self, rng):
        x = self.position.sample(rng)
        z = rng.standard_normal(x.shape)
        v = self.velocity_mean(x) + z @ self.vel_factor.T
        return np.concatenate([x, v], axis=-1)

    def position_logpdf(self, x):
        return self.position.logpdf(x)

    def transition_position_logpdf(self, x):
        return gaussian_logpdf(x, self.z_mean[..., 0:2], self.xx_precision, self.xx_logdet)

    def velocity_logpdf(self, u):
        prec, logdet = _inv_logdet(self.vel_cov)
        return gaussian_logpdf(u[..., 2:4], self.velocity_mean(u[..., 0:2]), prec, logdet)

    def logpdf(self, u):
        return self.position_logpdf(u[..., 0:2]) + self.velocity_logpdf(u)

    def transition_logpdf(self, u):
        """Exact Strang transition density N(x; m_x, Q_xx) N(v; m_v|x, Q_v|x)."""
        return self.transition_position_logpdf(u[..., 0:2]) + self.velocity_logpdf(u)

    def log_weight_increment(self, u):
        # the velocity factors of transition and proposal cancel
        x = u[..., 0:2]
        return self.transition_position_logpdf(x) - self.position_logpdf(x)


def strang_proposal(u_prev, y, ctx: StepContext, model: LangevinModel,
                    obs_model: MeasurementModel) -> StrangProposal:
    """Two-stage Strang proposal.

    Stage one draws the position from N(m_x, Q_xx) times the Gaussianized
    measurement term; stage two draws the velocity from its exact
    conditional law given the new position.
    """
    u_prev = np.atleast_2d(np.asarray(u_prev, dtype=float))
    mz = transition_mean(u_prev, ctx, model, STRANG)
    q = jittered(ctx.cov)
    q_xx = q[0:2, 0:2]
    xx_inv, xx_logdet = _inv_logdet(q_xx)
    weights, covs, means = [], [], []
    for w, prec in _measurement_precisions(obs_model):
        gamma = np.linalg.inv(xx_inv + prec)
        gamma = 0.5 * (gamma + gamma.T)
        rhs = mz[:, 0:2] @ xx_inv + prec @ np.asarray(y, dtype=float)
        weights.append(w)
        covs.append(gamma)
        means.append(rhs @ gamma)
    pos = GaussianMixtureProposal(np.array(weights), np.stack(means), np.stack(covs))
    _, vel_cov = condition_gaussian(mz[0], q, mz[0, 0:2])
    vel_cov = jittered(vel_cov)
    return StrangProposal(pos, mz, q, xx_inv, xx_logdet, vel_cov, np.linalg.cholesky(vel_cov), ctx, model)

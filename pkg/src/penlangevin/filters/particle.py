"""Sequential Monte Carlo filter with splitting-based proposals."""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from ..dynamics import LIE_TROTTER, LangevinModel
from ..geometry import contains
from ..linalg import sample_mvn
from .common import OBSERVATION_MATRIX as L
from .common import FilterConfig, FilterDivergence, FilterOutput, Observations, initial_belief
from .proposals import lt_proposal, strang_proposal
from .resampling import effective_sample_size, systematic_resample


def _cloud_summary(states, w):
    mean = w @ states
    d = states - mean
    cov = (d * w[:, None]).T @ d
    return mean, 0.5 * (cov + cov.T)


def _normalize(log_w, step, ess_hist):
    total = logsumexp(log_w)
    if not np.isfinite(total):
        raise FilterDivergence(step, "all particle weights vanished",
                               {"ess_history": list(ess_hist), "n_finite": int(np.isfinite(log_w).sum())})
    w = np.exp(log_w - total)
    return w / w.sum(), total


def particle_filter(observations: Observations, cfg: FilterConfig, model: LangevinModel,
                    rng: np.random.Generator, h: float = None) -> FilterOutput:
    """Particle filter with Lie-Trotter or Strang proposals.

    Incremental weights are p(y|U) p^scheme(U|U') / q(U|y, U'), with the
    exact measurement density in the numerator. Particles are resampled
    systematically at every step, or only when ESS < K/2 with
    ``cfg.resampling == "adaptive"``. ``cfg.hard_constraint`` additionally
    zeroes the weight of particles outside the domain.
    """
    if cfg.algorithm != "PF":
        raise ValueError("particle_filter() needs cfg.algorithm == 'PF'")
    model = model if cfg.penalized else model.without_penalty()
    if cfg.hard_constraint and model.domain is None:
        raise ValueError("hard-constraint weighting needs a domain")
    h = observations.step if h is None else h
    obs = cfg.model
    make_proposal = lt_proposal if cfg.scheme == LIE_TROTTER else strang_proposal
    k_part = cfg.n_particles
    ys = observations.values
    n = len(ys)

    means = np.empty((n, 4))
    covs = np.empty((n, 4, 4))
    ess = np.empty(n)
    log_ev = np.empty(n)
    n_resampled = 0

    m0, c0 = initial_belief(ys[0], obs, model.movement.nu)
    states = sample_mvn(m0, c0, rng, size=k_part)
    log_w = obs.log_density(ys[0] - states @ L.T)
    if cfg.hard_constraint:
        log_w = np.where(contains(states[:, 0:2], model.domain), log_w, -np.inf)
    w, total = _normalize(log_w, 0, [])
    log_ev[0] = total - np.log(k_part)
    ess[0] = effective_sample_size(w)
    means[0], covs[0] = _cloud_summary(states, w)

    for j in range(1, n):
        if cfg.resampling == "always" or ess[j - 1] < 0.5 * k_part:
            anc = systematic_resample(w, rng)
            prev = states[anc]
            log_prev = np.full(k_part, -np.log(k_part))
            n_resampled += 1
        else:
            prev = states
            log_prev = np.log(w)
        centers = np.broadcast_to(model.select_center(prev[:, 0:2]), (k_part,))
        new = np.empty_like(prev)
        incr = np.empty(k_part)
        for l in np.unique(centers):
            sel = centers == l
            prop = make_proposal(prev[sel], ys[j], model.context(int(l), h), model, obs)
            u = prop.sample(rng)
            new[sel] = u
            incr[sel] = prop.log_weight_increment(u)
        incr += obs.log_density(ys[j] - new[:, 0:2])
        if cfg.hard_constraint:
            incr = np.where(contains(new[:, 0:2], model.domain), incr, -np.inf)
        states = new
        w, total = _normalize(log_prev + incr, j, ess[:j])
        log_ev[j] = total
        ess[j] = effective_sample_size(w)
        means[j], covs[j] = _cloud_summary(states, w)

    diag = {"n_resampled": n_resampled, "min_ess": float(ess.min())}
    return FilterOutput(np.asarray(observations.times, dtype=float), means, covs, ess, log_ev, diag)

from .common import (OBSERVATION_MATRIX, FilterConfig, FilterDivergence, FilterOutput, Observations,
                     initial_belief)
from .kalman import ekf, kalman_update, naive_kf
from .particle import particle_filter
from .proposals import GaussianMixtureProposal, lt_proposal, strang_proposal
from .resampling import effective_sample_size, systematic_resample


def run_filter(observations, cfg, model, rng=None, h=None):
    """Dispatch on ``cfg.algorithm``; particle filters need ``rng``."""
    if cfg.algorithm == "PF":
        if rng is None:
            raise ValueError("particle filters need a random generator")
        return particle_filter(observations, cfg, model, rng, h)
    return ekf(observations, cfg, model, h)

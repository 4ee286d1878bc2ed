#!/usr/bin/env python3
"""Particle-filter error against the exact Kalman posterior on the linear-Gaussian model."""
import argparse

import numpy as np

from penlangevin.dynamics import LIE_TROTTER, LangevinModel, MovementParams, simulate_trajectory, subsample
from penlangevin.filters import FilterConfig, Observations, run_filter
from penlangevin.harness.pipeline import stream
from penlangevin.noise import Gaussian
from penlangevin.potential import PotentialSpec


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--particles", default="250,1000,4000")
    ap.add_argument("--replicates", type=int, default=50)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2024)
    args = ap.parse_args(argv)

    model = LangevinModel(MovementParams(), PotentialSpec([]))
    noise = Gaussian(0.2)
    rng = stream(args.seed, 0)
    tr = subsample(simulate_trajectory(np.array([0.0, 0.0, 2.0, 1.0]), 1 / 3600, 60 * (args.steps - 1),
                                       LIE_TROTTER, model, rng), 60)
    obs = Observations(tr.times, tr.positions + noise.sample(rng, len(tr)))
    kf = run_filter(obs, FilterConfig("KF", noise, False), model)
    sd = np.sqrt(np.diagonal(kf.covariances, axis1=1, axis2=2))

    sizes = [int(k) for k in args.particles.split(",")]
    errs = []
    for k in sizes:
        cfg = FilterConfig("PF", noise, False, LIE_TROTTER, k)
        sq = [np.mean(((run_filter(obs, cfg, model, stream(args.seed, 2, k, r)).means - kf.means) / sd) ** 2)
              for r in range(args.replicates)]
        errs.append(np.sqrt(np.mean(sq)))
        print(f"K={k:<6d} standardized RMS error {errs[-1]:.5f}")
    if len(sizes) > 1:
        print(f"log-log slope {np.polyfit(np.log(sizes), np.log(errs), 1)[0]:.3f} (K^-1/2 gives -0.5)")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Fraction of simulated time spent outside the domain as a function of lambda.

lambda = factor * h_sim^0.8; every factor reuses the same noise streams.
"""
import argparse

import numpy as np

from penlangevin.dynamics import outside_fraction
from penlangevin.harness import ExperimentConfig
from penlangevin.harness.config import LambdaRule
from penlangevin.harness.pipeline import simulate_replicate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=None)
    ap.add_argument("--replicates", type=int, default=5)
    ap.add_argument("--factors", default="0.1,1,10,100")
    args = ap.parse_args(argv)
    base = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    print("factor  lambda      outside_%  per-replicate_%")
    for factor in map(float, args.factors.split(",")):
        cfg = base.replace(lam=LambdaRule(base.lam.exponent, factor))
        fr = [outside_fraction(simulate_replicate(cfg, r).positions, cfg.domain())
              for r in range(args.replicates)]
        print(f"{factor:<7g} {cfg.lam_value:<11.3e} {100 * np.mean(fr):<10.3f} "
              + " ".join(f"{100 * f:.2f}" for f in fr))


if __name__ == "__main__":
    main()

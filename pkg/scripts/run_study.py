#!/usr/bin/env python3
"""Run one or more experiment configs and print their summary tables.

    python3 scripts/run_study.py configs/gaussian.yaml configs/student.yaml --workers 4
"""
import argparse
import logging

from penlangevin.harness import ExperimentConfig, run_experiment


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="+")
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--replicates", type=int, default=None, help="override n_replicates")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    for path in args.configs:
        cfg = ExperimentConfig.load(path)
        if args.replicates:
            cfg = cfg.replace(n_replicates=args.replicates)
        res = run_experiment(cfg, workers=args.workers)
        print(f"\n## {path} -> {res.out_dir}\n")
        print(res.table())


if __name__ == "__main__":
    main()

"""Command line entry point: ``penlangevin {simulate,corrupt,filter,bench,report}``.

Failures print one JSON record to stderr and exit nonzero:
2 for invalid input or configuration, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path


from ..dynamics import Trajectory, outside_fraction, subsample
from ..filters import FilterDivergence, Observations, run_filter
from .config import ConfigError, ExperimentConfig, method_key
from .metrics import add_noise, score
from .pipeline import _FILTER, _NOISE, report, run_experiment, simulate_replicate, stream

EXIT_USAGE = 2
EXIT_RUNTIME = 1


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    if getattr(args, "interval_min", None):
        changes["intervals_min"] = tuple(args.interval_min)
    if getattr(args, "replicates", None) is not None:
        changes["n_replicates"] = args.replicates
    if changes:
        try:
            cfg = cfg.replace(**changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    if getattr(args, "method", None):
        cfg = cfg.select_methods(args.method)
    return cfg


def _out(args, default) -> Path:
    p = Path(args.out or default)
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_simulate(args):
    cfg = _load(args)
    out = _out(args, cfg.output_dir)
    traj = simulate_replicate(cfg, args.replicate)
    written = []
    if args.full:
        traj.to_csv(out / "trajectory.csv")
        written.append(str(out / "trajectory.csv"))
    for m in cfg.intervals_min:
        path = out / f"truth_{m:g}min.csv"
        subsample(traj, cfg.subsample_factor(m)).to_csv(path)
        written.append(str(path))
    frac = outside_fraction(traj.positions, cfg.domain())
    return {"files": written, "outside_fraction": frac, "steps": cfg.n_steps}


def _noise_specs(cfg, label):
    if label is None:
        return list(enumerate(cfg.noise))
    hits = [(i, n) for i, n in enumerate(cfg.noise) if n.name == label]
    if not hits:
        raise ConfigError(f"no noise model labelled {label!r}; configured: {[n.name for n in cfg.noise]}")
    return hits


def cmd_corrupt(args):
    cfg = _load(args)
    out = _out(args, cfg.output_dir)
    truth = Trajectory.from_csv(args.truth)
    written = []
    for ni, nspec in _noise_specs(cfg, args.noise):
        obs = add_noise(truth, nspec.build(), stream(cfg.seed, args.replicate, _NOISE, ni, 0))
        path = out / f"obs_{nspec.name}.csv"
        obs.to_csv(path)
        written.append(str(path))
    return {"files": written}


def cmd_filter(args):
    cfg = _load(args)
    out = _out(args, cfg.output_dir)
    obs = Observations.from_csv(args.obs)
    (ni, nspec), = _noise_specs(cfg, args.noise or cfg.noise[0].name)
    model = cfg.model()
    truth = Trajectory.from_csv(args.truth) if args.truth else None
    results = []
    for fi, fspec in enumerate(cfg.filters):
        fcfg = fspec.build(nspec.build(), cfg.n_particles)
        est = run_filter(obs, fcfg, model, stream(cfg.seed, args.replicate, _FILTER, ni, 0, fi))
        stem = f"est_{method_key(fspec.name)}"
        cov = out / f"{stem}.cov.csv" if fcfg.algorithm != "PF" else None
        est.to_csv(out / f"{stem}.csv", cov)
        rec = {"method": fspec.name, "file": str(out / f"{stem}.csv")}
        if truth is not None:
            s = score(truth, est)
            rec.update(rmse_km=s.rmse, max_error_km=s.max_error)
        results.append(rec)
    return {"results": results}


def cmd_bench(args):
    cfg = _load(args)
    res = run_experiment(cfg, out_dir=args.out or cfg.output_dir)
    print(res.table())
    failed = sum(r.status != "ok" for r in res.rows)
    return {"out": str(res.out_dir), "rows": len(res.rows), "failed_rows": failed}


def cmd_report(args):
    out = Path(args.out)
    if not (out / "metrics.csv").exists():
        raise UsageError(f"{out / 'metrics.csv'} not found; run 'bench' first")
    report(out)
    print((out / "summary.md").read_text())
    return {"out": str(out)}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="penlangevin", description="Penalized Langevin simulation and filtering bench.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", help="YAML experiment file (defaults used when omitted)")
        if seed:
            sp.add_argument("--seed", type=int, help="override the master seed")
        sp.add_argument("--out", help="output directory")

    sp = sub.add_parser("simulate", help="simulate one true trajectory")
    common(sp)
    sp.add_argument("--interval-min", type=_floats, help="comma-separated subsampling intervals (minutes)")
    sp.add_argument("--replicate", type=int, default=0)
    sp.add_argument("--full", action="store_true", help="also write the fine-grid trajectory")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("corrupt", help="add measurement noise to a trajectory file")
    common(sp)
    sp.add_argument("--truth", required=True)
    sp.add_argument("--noise", help="noise label from the config (default: all)")
    sp.add_argument("--replicate", type=int, default=0)
    sp.set_defaults(func=cmd_corrupt)

    sp = sub.add_parser("filter", help="run filters on an observation file")
    common(sp)
    sp.add_argument("--obs", required=True)
    sp.add_argument("--truth", help="optional truth file for scoring")
    sp.add_argument("--noise", help="noise label the filters assume (default: first configured)")
    sp.add_argument("--method", type=_names, help="comma-separated method names, e.g. penalized-ekf")
    sp.add_argument("--replicate", type=int, default=0)
    sp.set_defaults(func=cmd_filter)

    sp = sub.add_parser("bench", help="full replicated experiment")
    common(sp)
    sp.add_argument("--workers", type=int)
    sp.add_argument("--replicates", type=int)
    sp.add_argument("--interval-min", type=_floats)
    sp.add_argument("--method", type=_names)
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("report", help="aggregate metrics of a finished bench run")
    sp.add_argument("--out", required=True, help="bench output directory")
    sp.set_defaults(func=cmd_report)
    return p


def _fail(verb, exc, code):
    rec = {"status": "error", "verb": verb, "error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if isinstance(exc, FilterDivergence):
        rec["step"] = exc.step
    print(json.dumps(rec), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        return _fail(None, UsageError("invalid command line"), EXIT_USAGE)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        result = args.func(args)
    except (ConfigError, UsageError, FileNotFoundError, ValueError) as exc:
        return _fail(args.verb, exc, EXIT_USAGE)
    except Exception as exc:  # noqa: BLE001 - reported as a machine-readable record
        if args.verbose:
            traceback.print_exc()
        return _fail(args.verb, exc, EXIT_RUNTIME)
    print(json.dumps({"status": "ok", "verb": args.verb, **result}, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())

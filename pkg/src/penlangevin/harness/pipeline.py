"""Replicated simulate / corrupt / filter / score pipeline."""

from __future__ import annotations

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np
import yaml

from .. import __version__
from ..dynamics import SimulationError, Trajectory, outside_fraction, simulate_trajectory, subsample
from ..filters import FilterDivergence, Observations, run_filter
from .config import ExperimentConfig, method_key
from .metrics import (BEFORE_FILTER, MetricsRow, SummaryRow, TIMING_COLUMNS, format_table, read_rows,
                      root_mean_square_error, score, summarize, write_rows, write_summary)

log = logging.getLogger(__name__)

# spawn-key purposes
_SIM, _NOISE, _FILTER = 0, 1, 2


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key); the same key always gives the same stream."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key)))


def _tag(interval_min: float) -> str:
    return f"{interval_min:g}min"


def simulate_replicate(cfg: ExperimentConfig, replicate: int, seed: Optional[int] = None) -> Trajectory:
    seed = cfg.seed if seed is None else seed
    return simulate_trajectory(cfg.start_state(), cfg.h_sim, cfg.n_steps, cfg.sim_scheme, cfg.model(),
                               stream(seed, replicate, _SIM))


def _estimate_row(noise, method, interval, rep, truth: Trajectory, est, domain, wall) -> MetricsRow:
    s = score(truth, est)
    pos = est.positions if hasattr(est, "positions") else est.values
    return MetricsRow(noise, method, interval, rep, s.rmse, s.max_error, root_mean_square_error(truth, est),
                      outside_fraction(pos, domain), wall)


def run_replicate(cfg: ExperimentConfig, replicate: int, out_dir: Optional[str] = None):
    """All (noise, interval, method) rows for one replicate, plus replicate info."""
    model = cfg.model()
    domain = model.domain
    rep_dir = None
    if out_dir is not None:
        rep_dir = Path(out_dir) / "replicates" / f"r{replicate:03d}"
        rep_dir.mkdir(parents=True, exist_ok=True)
    rows: List[MetricsRow] = []
    t0 = time.perf_counter()
    try:
        traj = simulate_replicate(cfg, replicate)
    except SimulationError as exc:
        reason = f"simulation failed: {exc}"
        for nz in cfg.noise:
            for m in cfg.intervals_min:
                for name in [BEFORE_FILTER] + [f.name for f in cfg.filters]:
                    rows.append(MetricsRow.failed(nz.name, name, m, replicate, reason))
        return rows, {"replicate": replicate, "status": "failed", "reason": reason}
    info = {"replicate": replicate, "status": "ok", "reason": "",
            "outside_fraction_fine": outside_fraction(traj.positions, domain),
            "sim_seconds": time.perf_counter() - t0}

    for ii, interval in enumerate(cfg.intervals_min):
        truth = subsample(traj, cfg.subsample_factor(interval))
        if rep_dir is not None:
            truth.to_csv(rep_dir / f"truth_{_tag(interval)}.csv")
        for ni, nspec in enumerate(cfg.noise):
            noise = nspec.build()
            rng = stream(cfg.seed, replicate, _NOISE, ni, ii)
            obs = Observations(np.array(truth.times), truth.positions + noise.sample(rng, len(truth)))
            if rep_dir is not None:
                obs.to_csv(rep_dir / f"obs_{nspec.name}_{_tag(interval)}.csv")
            rows.append(_estimate_row(nspec.name, BEFORE_FILTER, interval, replicate, truth, obs, domain, 0.0))
            for fi, fspec in enumerate(cfg.filters):
                fcfg = fspec.build(noise, cfg.n_particles)
                frng = stream(cfg.seed, replicate, _FILTER, ni, ii, fi)
                t1 = time.perf_counter()
                try:
                    est = run_filter(obs, fcfg, model, frng)
                except (FilterDivergence, np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
                    wall = time.perf_counter() - t1
                    log.warning("replicate %d %s %s: %s", replicate, nspec.name, fspec.name, exc)
                    rows.append(MetricsRow.failed(nspec.name, fspec.name, interval, replicate,
                                                  f"{type(exc).__name__}: {exc}", wall))
                    continue
                wall = time.perf_counter() - t1
                if rep_dir is not None:
                    stem = f"est_{nspec.name}_{_tag(interval)}_{method_key(fspec.name)}"
                    cov_path = rep_dir / f"{stem}.cov.csv" if fcfg.algorithm != "PF" else None
                    est.to_csv(rep_dir / f"{stem}.csv", cov_path)
                rows.append(_estimate_row(nspec.name, fspec.name, interval, replicate, truth, est, domain, wall))
    return rows, info


def _run_one(args):
    cfg, rep, out_dir = args
    return run_replicate(cfg, rep, out_dir)


@dataclass
class ExperimentResult:
    rows: List[MetricsRow]
    summary: List[SummaryRow]
    replicates: List[dict]
    out_dir: Optional[Path]

    def table(self) -> str:
        return format_table(self.summary)

    def mean(self, method: str, metric: str = "rmse_km", noise: Optional[str] = None,
             interval_min: Optional[float] = None) -> float:
        vals = [getattr(r, metric) for r in self.rows
                if r.method == method and r.status == "ok"
                and (noise is None or r.noise == noise)
                and (interval_min is None or r.interval_min == interval_min)]
        if not vals:
            raise KeyError(f"no successful rows for {method!r}")
        return float(np.mean(vals))

    def values(self, method: str, metric: str = "rmse_km", noise: Optional[str] = None,
               interval_min: Optional[float] = None) -> np.ndarray:
        """Per-replicate values ordered by replicate id (NaN for failures)."""
        rs = sorted((r for r in self.rows if r.method == method
                     and (noise is None or r.noise == noise)
                     and (interval_min is None or r.interval_min == interval_min)),
                    key=lambda r: r.replicate)
        return np.array([getattr(r, metric) for r in rs])


def _order_rows(cfg: ExperimentConfig, rows):
    noise_idx = {n.name: i for i, n in enumerate(cfg.noise)}
    int_idx = {m: i for i, m in enumerate(cfg.intervals_min)}
    meth_idx = {name: i for i, name in enumerate([BEFORE_FILTER] + [f.name for f in cfg.filters])}
    return sorted(rows, key=lambda r: (noise_idx[r.noise], int_idx[r.interval_min], meth_idx[r.method],
                                       r.replicate))


def write_report(rows: List[MetricsRow], out_dir) -> List[SummaryRow]:
    """Summary CSV, markdown tables and long-format plot data from metric rows."""
    out_dir = Path(out_dir)
    summary = summarize(rows)
    write_summary(summary, out_dir / "summary.csv")
    (out_dir / "summary.md").write_text(format_table(summary))
    with open(out_dir / "plot_data.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["noise", "method", "interval_min", "replicate", "metric", "value"])
        for r in rows:
            if r.status != "ok":
                continue
            for metric in ("rmse_km", "max_error_km", "rms_km", "outside_fraction"):
                w.writerow([r.noise, r.method, repr(r.interval_min), r.replicate, metric,
                            repr(getattr(r, metric))])
    return summary


def report(out_dir) -> List[SummaryRow]:
    return write_report(read_rows(Path(out_dir) / "metrics.csv"), out_dir)


def run_experiment(cfg: ExperimentConfig, out_dir=None, workers: Optional[int] = None,
                   persist: bool = True) -> ExperimentResult:
    """Run every replicate, persist artifacts and metrics, and aggregate.

    Results depend only on the configuration (including its seed), not on
    the number of workers: each replicate draws from its own stream.
    """
    workers = cfg.workers if workers is None else workers
    out = Path(out_dir if out_dir is not None else cfg.output_dir) if persist else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "config.yaml", "w") as fh:
            yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
        (out / "manifest.json").write_text(json.dumps(
            {"seed": cfg.seed, "n_replicates": cfg.n_replicates, "version": __version__,
             "lambda": cfg.lam_value, "h_sim_hours": cfg.h_sim}, indent=2) + "\n")
    jobs = [(cfg, r, None if out is None else str(out)) for r in range(cfg.n_replicates)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    rows = _order_rows(cfg, [row for rs, _ in results for row in rs])
    infos = [info for _, info in results]
    summary = summarize(rows)
    if out is not None:
        write_rows(rows, out / "metrics.csv")
        write_rows(rows, out / "timings.csv", TIMING_COLUMNS)
        with open(out / "replicates.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["replicate", "status", "reason", "outside_fraction_fine"])
            for i in infos:
                w.writerow([i["replicate"], i["status"], i["reason"], repr(i.get("outside_fraction_fine", float("nan")))])
        summary = write_report(rows, out)
    return ExperimentResult(rows, summary, infos, out)

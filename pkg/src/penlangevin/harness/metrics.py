"""Scoring, per-run metric rows and their aggregation into summary tables."""

from __future__ import annotations

import csv
import math
from collections import OrderedDict
from dataclasses import asdict, dataclass, fields
from typing import Iterable, List, NamedTuple, Optional

import numpy as np

from ..dynamics import Trajectory
from ..filters import Observations
from ..noise import MeasurementModel

BEFORE_FILTER = "Before filter"


class Score(NamedTuple):
    rmse: float
    max_error: float


def position_errors(true_positions, est_positions) -> np.ndarray:
    a = np.asarray(true_positions, dtype=float)
    b = np.asarray(est_positions, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: truth {a.shape} vs estimate {b.shape}")
    if a.ndim != 2 or a.shape[1] != 2:
        raise ValueError("expected (n, 2) position arrays")
    if len(a) == 0:
        raise ValueError("empty track")
    return np.hypot(a[:, 0] - b[:, 0], a[:, 1] - b[:, 1])


def _positions_and_times(obj):
    if hasattr(obj, "positions"):
        return obj.positions, np.asarray(obj.times, dtype=float)
    if hasattr(obj, "values"):
        return obj.values, np.asarray(obj.times, dtype=float)
    return np.asarray(obj, dtype=float), None


def score(true_states, estimates) -> Score:
    """Track error between true and estimated positions.

    ``rmse`` is the average Euclidean position error over the track (the
    quantity reported as RMSE in the comparison tables; for isotropic
    Gaussian noise of scale s it tends to s*sqrt(pi/2)). ``max_error`` is the
    largest Euclidean error. Accepts trajectories, filter outputs,
    observations or plain (n, 2) arrays; timestamps must agree when both
    sides carry them.
    """
    xt, tt = _positions_and_times(true_states)
    xe, te = _positions_and_times(estimates)
    if tt is not None and te is not None:
        if tt.shape != te.shape:
            raise ValueError(f"length mismatch: {len(tt)} true states vs {len(te)} estimates")
        if not np.allclose(tt, te, rtol=0, atol=1e-9):
            raise ValueError("timestamps of truth and estimates differ")
    e = position_errors(xt, xe)
    return Score(float(e.mean()), float(e.max()))


def root_mean_square_error(true_states, estimates) -> float:
    """sqrt(mean ||X - X_hat||^2); reported alongside the average error."""
    xt, _ = _positions_and_times(true_states)
    xe, _ = _positions_and_times(estimates)
    e = position_errors(xt, xe)
    return float(np.sqrt(np.mean(e**2)))


def add_noise(traj: Trajectory, model: MeasurementModel, rng: np.random.Generator) -> Observations:
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    eps = model.sample(rng, len(traj))
    return Observations(np.array(traj.times, dtype=float), traj.positions + eps)


@dataclass
class MetricsRow:
    noise: str
    method: str
    interval_min: float
    replicate: int
    rmse_km: float
    max_error_km: float
    rms_km: float
    outside_fraction: float
    wall_time_s: float = 0.0
    status: str = "ok"
    reason: str = ""

    def __post_init__(self):
        if self.status == "ok":
            vals = (self.rmse_km, self.max_error_km, self.rms_km, self.outside_fraction)
            if any(not (v >= 0) for v in vals):
                raise ValueError("metrics must be nonnegative")
            if self.rmse_km > self.max_error_km * (1 + 1e-12) + 1e-15:
                raise ValueError("average error cannot exceed the max error")

    @classmethod
    def failed(cls, noise, method, interval_min, replicate, reason, wall_time_s=0.0):
        nan = math.nan
        return cls(noise, method, interval_min, replicate, nan, nan, nan, nan, wall_time_s, "failed", reason)


# wall time is nondeterministic, so it is written to a separate file
METRIC_COLUMNS = [f.name for f in fields(MetricsRow) if f.name != "wall_time_s"]
TIMING_COLUMNS = ["noise", "method", "interval_min", "replicate", "wall_time_s"]


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows(rows: Iterable[MetricsRow], path, columns=METRIC_COLUMNS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            d = asdict(r)
            w.writerow([_fmt(d[c]) for c in columns])


def read_rows(path) -> List[MetricsRow]:
    types = {f.name: f.type for f in fields(MetricsRow)}
    conv = {"float": float, "int": int, "str": str}
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            kw = {k: conv[types[k]](v) for k, v in rec.items()}
            out.append(MetricsRow(**kw))
    return out


@dataclass
class SummaryRow:
    noise: str
    method: str
    interval_min: float
    n_ok: int
    n_failed: int
    mean_rmse_km: float
    mean_max_error_km: float
    mean_rms_km: float
    mean_outside_fraction: float


def summarize(rows: Iterable[MetricsRow]) -> List[SummaryRow]:
    """Mean of each metric per (noise, interval, method) over successful replicates."""
    groups: "OrderedDict[tuple, list]" = OrderedDict()
    for r in rows:
        groups.setdefault((r.noise, r.interval_min, r.method), []).append(r)
    out = []
    for (noise, interval, method), rs in groups.items():
        ok = [r for r in rs if r.status == "ok"]

        def mean(attr):
            return float(np.mean([getattr(r, attr) for r in ok])) if ok else math.nan

        out.append(SummaryRow(noise, method, interval, len(ok), len(rs) - len(ok), mean("rmse_km"),
                              mean("max_error_km"), mean("rms_km"), mean("outside_fraction")))
    return out


def write_summary(summary: List[SummaryRow], path) -> None:
    cols = [f.name for f in fields(SummaryRow)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for s in summary:
            d = asdict(s)
            w.writerow([_fmt(d[c]) for c in cols])


def _interval_label(m: float) -> str:
    return f"{m:g} min"


def format_table(summary: List[SummaryRow], noise: Optional[str] = None) -> str:
    """Markdown table: one row per method, a (max error, RMSE) pair per interval."""
    noises = [noise] if noise else list(OrderedDict.fromkeys(s.noise for s in summary))
    blocks = []
    for nz in noises:
        sub = [s for s in summary if s.noise == nz]
        intervals = list(OrderedDict.fromkeys(s.interval_min for s in sub))
        methods = list(OrderedDict.fromkeys(s.method for s in sub))
        cell = {(s.method, s.interval_min): s for s in sub}
        head = "| Method | " + " | ".join(f"{_interval_label(i)} max | {_interval_label(i)} RMSE" for i in intervals) + " |"
        sep = "|---|" + "---|---|" * len(intervals)
        lines = [f"### noise: {nz}", "", head, sep]
        for m in methods:
            vals = []
            for i in intervals:
                s = cell.get((m, i))
                if s is None or s.n_ok == 0:
                    vals += ["n/a", "n/a"]
                else:
                    flag = "*" if s.n_failed else ""
                    vals += [f"{s.mean_max_error_km:.3f}{flag}", f"{s.mean_rmse_km:.3f}{flag}"]
            lines.append(f"| {m} | " + " | ".join(vals) + " |")
        if any(s.n_failed for s in sub):
            lines += ["", "\\* some replicates failed; means use the successful ones"]
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"

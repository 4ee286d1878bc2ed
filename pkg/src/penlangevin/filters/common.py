"""Shared filter types: configuration, observations and results."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..dynamics import LIE_TROTTER, SCHEMES, STRANG
from ..noise import ArgosMix, Gaussian, MeasurementModel, StudentIso

# Y = L U: the position block is observed.
OBSERVATION_MATRIX = np.hstack([np.eye(2), np.zeros((2, 2))])
OBSERVATION_MATRIX.setflags(write=False)

ALGORITHMS = ("KF", "EKF", "PF")
RESAMPLING = ("always", "adaptive")


class FilterDivergence(RuntimeError):
    """A filter could not continue (e.g. every particle weight vanished)."""

    def __init__(self, step: int, message: str, diagnostics: Optional[dict] = None):
        super().__init__(f"{message} at observation {step}")
        self.step = step
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class FilterConfig:
    algorithm: str
    model: MeasurementModel
    penalized: bool = True
    scheme: str = LIE_TROTTER
    n_particles: int = 500
    resampling: str = "always"
    hard_constraint: bool = False

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.resampling not in RESAMPLING:
            raise ValueError(f"resampling must be one of {RESAMPLING}")
        if self.algorithm == "PF" and self.n_particles < 2:
            raise ValueError("a particle filter needs at least 2 particles")
        if self.algorithm != "PF":
            if isinstance(self.model, (StudentIso, ArgosMix)) and self.model.d <= 2:
                raise ValueError("Gaussianized filters need d > 2")

    @property
    def name(self) -> str:
        prefix = "Penalized " if self.penalized else ""
        if self.algorithm == "PF":
            base = "Lie-Trotter PF" if self.scheme == LIE_TROTTER else "Strang PF"
        else:
            base = self.algorithm
        return prefix + base


@dataclass(frozen=True)
class Observations:
    times: np.ndarray
    values: np.ndarray  # (n, 2)

    def __len__(self):
        return len(self.times)

    @property
    def step(self) -> float:
        dt = np.diff(self.times)
        if len(dt) == 0:
            return float("nan")
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=1e-12):
            raise ValueError("observations must be equally spaced")
        return float(dt[0])

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=",",
                   header="t_hours,y1_km,y2_km", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Observations":
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(arr[:, 0], arr[:, 1:3])


@dataclass
class FilterOutput:
    """Per-observation filtering summaries.

    ``covariances`` holds the Gaussian posterior covariance for KF/EKF and
    the weighted cloud covariance for particle filters.
    """

    times: np.ndarray
    means: np.ndarray
    covariances: np.ndarray
    ess: Optional[np.ndarray] = None
    log_evidence: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def positions(self) -> np.ndarray:
        return self.means[:, 0:2]

    def to_csv(self, path, covariance_path=None) -> None:
        ess = self.ess if self.ess is not None else np.full(len(self), np.nan)
        with open(path, "w") as fh:
            fh.write("t_hours,mean_x1,mean_x2,mean_v1,mean_v2,ess\n")
            for t, m, e in zip(self.times, self.means, ess):
                cells = [repr(float(t))] + [repr(float(v)) for v in m]
                cells.append("" if np.isnan(e) else repr(float(e)))
                fh.write(",".join(cells) + "\n")
        if covariance_path is not None:
            header = ",".join(f"c{i}{j}" for i in range(4) for j in range(4))
            np.savetxt(covariance_path, self.covariances.reshape(len(self), 16), delimiter=",",
                       header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, covariance_path=None) -> "FilterOutput":
        raw = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
        ess = raw[:, 5]
        covs = np.full((len(raw), 4, 4), np.nan)
        if covariance_path is not None:
            covs = np.loadtxt(covariance_path, delimiter=",", skiprows=1, ndmin=2).reshape(-1, 4, 4)
        return cls(raw[:, 0], raw[:, 1:5], covs, None if np.all(np.isnan(ess)) else ess)


def initial_belief(y0, model: MeasurementModel, nu: float):
    """Prior at the first observation: position around y0, velocity N(0, nu^2 I)."""
    from ..noise import gaussianized_covariance

    mean = np.zeros(4)
    mean[0:2] = y0
    cov = np.zeros((4, 4))
    cov[0:2, 0:2] = gaussianized_covariance(model)
    cov[2:4, 2:4] = nu**2 * np.eye(2)
    return mean, cov


__all__ = ["OBSERVATION_MATRIX", "FilterConfig", "FilterOutput", "Observations", "FilterDivergence",
           "initial_belief", "LIE_TROTTER", "STRANG", "Gaussian", "StudentIso", "ArgosMix"]

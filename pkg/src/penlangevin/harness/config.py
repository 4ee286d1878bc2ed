"""Experiment configuration: dataclasses plus strict YAML loading.

Every mapping in the file must only use known keys; a misspelt key is an
error rather than a silently ignored default. See ``configs/`` for examples.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
import yaml

from ..dynamics import LIE_TROTTER, SCHEMES, LangevinModel, MovementParams
from ..filters import FilterConfig
from ..geometry import PolygonDomain
from ..noise import ArgosMix, Gaussian, MeasurementModel, StudentIso
from ..potential import PotentialComponent, PotentialSpec, two_well_potential


class ConfigError(ValueError):
    pass


def _check_keys(data, allowed, where):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _build(cls, data, where):
    names = [f.name for f in dataclasses.fields(cls)]
    _check_keys(data, names, where)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass(frozen=True)
class LambdaRule:
    """lambda = factor * h_sim ** exponent, with h_sim in hours."""

    exponent: float = 0.8
    factor: float = 1.0

    def __post_init__(self):
        if not self.factor > 0:
            raise ValueError("lambda factor must be positive")

    def __call__(self, h_sim: float) -> float:
        return self.factor * h_sim**self.exponent


@dataclass(frozen=True)
class NoiseSpec:
    kind: str = "gaussian"
    sigma_obs: float = 0.2
    d: Optional[float] = None
    rho: Optional[float] = None
    a: Optional[float] = None
    p: Optional[float] = None
    label: Optional[str] = None

    _FIELDS = {"gaussian": (), "student": ("d",), "argos": ("d", "rho", "a", "p")}

    def __post_init__(self):
        if self.kind not in self._FIELDS:
            raise ValueError(f"noise kind must be one of {sorted(self._FIELDS)}")
        need = self._FIELDS[self.kind]
        extra = [k for k in ("d", "rho", "a", "p") if k not in need and getattr(self, k) is not None]
        missing = [k for k in need if getattr(self, k) is None]
        if missing or extra:
            raise ValueError(f"{self.kind} noise: missing {missing}, unexpected {extra}")
        self.build()

    @property
    def name(self) -> str:
        return self.label or self.kind

    def build(self) -> MeasurementModel:
        if self.kind == "gaussian":
            return Gaussian(self.sigma_obs)
        if self.kind == "student":
            return StudentIso(self.sigma_obs, self.d)
        return ArgosMix(self.sigma_obs, self.d, self.rho, self.a, self.p)


@dataclass(frozen=True)
class FilterSpec:
    algorithm: str
    penalized: bool = False
    scheme: str = LIE_TROTTER
    n_particles: Optional[int] = None
    resampling: str = "always"
    hard_constraint: bool = False

    def build(self, noise: MeasurementModel, default_particles: int) -> FilterConfig:
        k = self.n_particles if self.n_particles is not None else default_particles
        return FilterConfig(self.algorithm, noise, self.penalized, self.scheme, k,
                            self.resampling, self.hard_constraint)

    @property
    def name(self) -> str:
        # build against a dummy noise model only to reuse the naming rule
        return self.build(Gaussian(1.0), 2).name + (" (hard)" if self.hard_constraint else "")


def method_key(name: str) -> str:
    """Normalized method identifier: 'Penalized Strang PF' -> 'penalized-strang-pf'."""
    return "-".join(name.lower().replace("(", " ").replace(")", " ").split())


def _default_components():
    out = []
    for c in two_well_potential().components:
        b = np.asarray(c.precision)
        out.append({"alpha": float(c.alpha), "center": [float(v) for v in c.center],
                    "precision": [float(b[0, 0]), float(b[0, 1]), float(b[1, 1])]})
    return out


def _default_filters():
    return [FilterSpec("KF", False), FilterSpec("KF", True), FilterSpec("EKF", False), FilterSpec("EKF", True)]


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 2024
    n_replicates: int = 20
    t_hours: float = 12.0
    h_sim_seconds: float = 1.0
    intervals_min: Tuple[float, ...] = (1, 3, 5, 20)
    sim_scheme: str = LIE_TROTTER
    movement: MovementParams = field(default_factory=MovementParams)
    potential: Tuple[dict, ...] = field(default_factory=lambda: tuple(_default_components()))
    polygon: Optional[str] = None
    penalize_simulation: bool = True
    lam: LambdaRule = field(default_factory=LambdaRule)
    noise: Tuple[NoiseSpec, ...] = (NoiseSpec(),)
    filters: Tuple[FilterSpec, ...] = field(default_factory=lambda: tuple(_default_filters()))
    n_particles: int = 500
    initial_state: Optional[Tuple[float, ...]] = None
    output_dir: str = "runs/default"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "intervals_min", tuple(float(m) for m in self.intervals_min))
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        if not self.t_hours > 0 or not self.h_sim_seconds > 0:
            raise ValueError("t_hours and h_sim_seconds must be positive")
        if self.sim_scheme not in SCHEMES:
            raise ValueError(f"sim_scheme must be one of {SCHEMES}")
        if not self.intervals_min:
            raise ValueError("at least one observation interval is needed")
        for m in self.intervals_min:
            self.subsample_factor(m)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.initial_state is not None and len(self.initial_state) != 4:
            raise ValueError("initial_state needs 4 entries")
        names = [f.name for f in self.filters]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate filter methods: {names}")
        labels = [n.name for n in self.noise]
        if len(set(labels)) != len(labels):
            raise ValueError("noise models need distinct labels")

    # --- derived quantities ---------------------------------------------

    @property
    def h_sim(self) -> float:
        return self.h_sim_seconds / 3600.0

    @property
    def n_steps(self) -> int:
        n = self.t_hours * 3600.0 / self.h_sim_seconds
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise ConfigError("h_sim must divide t_hours")
        return int(round(n))

    @property
    def lam_value(self) -> float:
        return self.lam(self.h_sim)

    def subsample_factor(self, interval_min: float) -> int:
        f = interval_min * 60.0 / self.h_sim_seconds
        if f < 1 or abs(f - round(f)) > 1e-9 * f:
            raise ValueError(f"h_sim ({self.h_sim_seconds} s) must divide the {interval_min} min interval")
        return int(round(f))

    def potential_spec(self) -> PotentialSpec:
        comps = []
        for i, c in enumerate(self.potential):
            _check_keys(c, ("alpha", "center", "precision"), f"potential[{i}]")
            b11, b12, b22 = c["precision"]
            comps.append(PotentialComponent.from_entries(c["alpha"], tuple(c["center"]), b11, b12, b22))
        return PotentialSpec(comps)

    def domain(self) -> PolygonDomain:
        if self.polygon is None:
            from .. import default_domain
            return default_domain()
        return PolygonDomain.from_file(self.polygon)

    def model(self) -> LangevinModel:
        """The simulation model, penalized with lambda(h_sim) unless disabled."""
        lam = self.lam_value if self.penalize_simulation else math.inf
        return LangevinModel(self.movement, self.potential_spec(), self.domain(), lam)

    def start_state(self) -> np.ndarray:
        if self.initial_state is not None:
            return np.array(self.initial_state, dtype=float)
        spec = self.potential_spec()
        x0 = spec.centers[0] if spec.n_components else np.zeros(2)
        return np.array([x0[0], x0[1], 0.0, 0.0])

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def select_methods(self, keys) -> "ExperimentConfig":
        wanted = [method_key(k) for k in keys]
        known = {method_key(f.name): f for f in self.filters}
        missing = [k for k in wanted if k not in known]
        if missing:
            raise ConfigError(f"unknown method(s) {missing}; configured: {sorted(known)}")
        return self.replace(filters=tuple(known[k] for k in wanted))

    # --- (de)serialization ------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data or {})
        _check_keys(data, [f.name for f in dataclasses.fields(cls)], "config")
        if "movement" in data:
            data["movement"] = _build(MovementParams, data["movement"], "movement")
        if "lam" in data:
            data["lam"] = _build(LambdaRule, data["lam"], "lam")
        if "noise" in data:
            items = data["noise"] if isinstance(data["noise"], list) else [data["noise"]]
            data["noise"] = tuple(_build(NoiseSpec, n, f"noise[{i}]") for i, n in enumerate(items))
        if "filters" in data:
            data["filters"] = tuple(_build(FilterSpec, f, f"filters[{i}]") for i, f in enumerate(data["filters"]))
        if "potential" in data:
            data["potential"] = tuple(dict(c) for c in data["potential"])
        for key in ("intervals_min", "initial_state"):
            if data.get(key) is not None:
                data[key] = tuple(float(v) for v in data[key])
        try:
            cfg = cls(**data)
            cfg.potential_spec()
            cfg.n_steps
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        text = Path(path).read_text()
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        cfg = cls.from_dict(data)
        if cfg.polygon is not None and not Path(cfg.polygon).is_absolute():
            cfg = cfg.replace(polygon=str((Path(path).parent / cfg.polygon).resolve()))
        return cfg

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["intervals_min"] = list(self.intervals_min)
        out["potential"] = [{"alpha": float(c["alpha"]), "center": [float(v) for v in c["center"]],
                             "precision": [float(v) for v in c["precision"]]} for c in self.potential]
        out["noise"] = [dataclasses.asdict(n) for n in self.noise]
        out["filters"] = [dataclasses.asdict(f) for f in self.filters]
        if self.initial_state is not None:
            out["initial_state"] = list(self.initial_state)
        return out

"""Splitting integrators for the domain-penalized underdamped Langevin SDE.

    dX = V dt
    dV = (-A V - grad H(X) - beta_lam(X)) dt + sigma dW

The drift is split around a potential center u*_l = (c_l, 0) into a linear
OU part, solved exactly, and a residual ODE that only moves the velocity,
solved exactly by a single Euler step. States are 4-vectors (x1, x2, v1, v2)
in km and km/h; time is in hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import geometry
from .geometry import PolygonDomain
from .linalg import DriftMatrix, NoiseMatrix, ou_covariance, psd_factor, matrix_exponential
from .potential import NO_CENTER, PotentialSpec, _quad, select_center

LIE_TROTTER = "LT"
STRANG = "Strang"
SCHEMES = (LIE_TROTTER, STRANG)


class SimulationError(RuntimeError):
    def __init__(self, step: int, message: str = "non-finite state"):
        super().__init__(f"{message} at step {step}")
        self.step = step


@dataclass(frozen=True)
class MovementParams:
    """Persistence ``tau`` (h), speed scale ``nu`` (km/h) and angular velocity ``omega`` (rad/h)."""

    tau: float = 1.0
    nu: float = 5.0
    omega: float = 0.1

    def __post_init__(self):
        if not self.tau > 0 or not self.nu > 0:
            raise ValueError("tau and nu must be positive")

    @property
    def c(self) -> float:
        return 1.0 / self.tau

    @property
    def sigma(self) -> float:
        return 2.0 * self.nu / math.sqrt(math.pi * self.tau)


@dataclass(frozen=True)
class StepContext:
    """Everything a step of size ``h`` linearized around component ``index`` needs."""

    h: float
    index: int
    drift: DriftMatrix
    exp_drift: np.ndarray
    cov: np.ndarray
    cov_factor: np.ndarray
    fixed_point: np.ndarray


@dataclass(frozen=True, eq=False)
class LangevinModel:
    """Movement parameters, potential surface and (optional) penalized domain.

    ``lam = inf`` or ``domain = None`` switches the penalty off. Step
    contexts are cached per (component, h).
    """

    movement: MovementParams
    potential: PotentialSpec
    domain: Optional[PolygonDomain] = None
    lam: float = math.inf
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive (use inf for no penalty)")

    @property
    def penalized(self) -> bool:
        return self.domain is not None and math.isfinite(self.lam)

    def with_penalty(self, lam: float) -> "LangevinModel":
        return LangevinModel(self.movement, self.potential, self.domain, lam)

    def without_penalty(self) -> "LangevinModel":
        return LangevinModel(self.movement, self.potential, self.domain, math.inf)

    def drift_matrix(self, index: int) -> DriftMatrix:
        mv = self.movement
        if index == NO_CENTER:
            return DriftMatrix.build(mv.c, mv.omega)
        spec = self.potential
        return DriftMatrix.build(mv.c, mv.omega, spec.alphas[index], spec.precisions[index], index)

    def fixed_point(self, index: int) -> np.ndarray:
        u = np.zeros(4)
        if index != NO_CENTER:
            u[:2] = self.potential.centers[index]
        return u

    def context(self, index: int, h: float) -> StepContext:
        key = (int(index), float(h))
        ctx = self._cache.get(key)
        if ctx is None:
            drift = self.drift_matrix(key[0])
            cov = ou_covariance(drift, NoiseMatrix(self.movement.sigma), h)
            ctx = StepContext(h, key[0], drift, matrix_exponential(drift.matrix * h), cov,
                              psd_factor(cov), self.fixed_point(key[0]))
            self._cache[key] = ctx
        return ctx

    def select_center(self, x):
        return select_center(x, self.potential)

    def penalty(self, x):
        if not self.penalized:
            return np.zeros(np.shape(x))
        return geometry.penalty(x, self.domain, self.lam)

    def penalty_jacobian(self, x):
        if not self.penalized:
            return np.zeros(np.shape(x)[:-1] + (2, 2))
        return geometry.penalty_jacobian(x, self.domain, self.lam)


# --- residual drift ------------------------------------------------------

def _onehot(l, shape, n):
    l = np.broadcast_to(np.asarray(l), shape)
    return np.arange(n) == l[..., None]


def residual_velocity_drift(x, model: LangevinModel, l):
    """Velocity part of g_lam: 2 a_l (e_l - 1) B_l (x - c_l) + grad H_{-l}(x) + beta_lam(x).

    ``l`` is a component index (or an array of them matching the leading
    axes of ``x``); ``NO_CENTER`` drops the linearized term.
    """
    x = np.asarray(x, dtype=float)
    gv = model.penalty(x)
    spec = model.potential
    if spec.n_components == 0:
        return gv
    _, bd, q = _quad(x, spec)
    e = np.exp(-q)
    sel = _onehot(l, x.shape[:-1], spec.n_components)
    full = 2.0 * spec.alphas * e
    coef = np.where(sel, 2.0 * spec.alphas * (e - 1.0), full)
    return gv + np.einsum("...j,...ja->...a", coef, bd)


def residual_drift(u, model: LangevinModel, l):
    """g_lam(u): zero position block, velocity block from :func:`residual_velocity_drift`."""
    u = np.asarray(u, dtype=float)
    g = np.zeros_like(u)
    g[..., 2:4] = residual_velocity_drift(u[..., 0:2], model, l)
    return g


def residual_drift_jacobian(x, model: LangevinModel, l):
    """D_x of the velocity residual: (I - Dpi)/lam + D^2 H_{-l} + 2 a_l((e_l - 1) B_l - 2 e_l B_l d d^T B_l)."""
    x = np.asarray(x, dtype=float)
    jac = model.penalty_jacobian(x)
    spec = model.potential
    if spec.n_components == 0:
        return jac
    _, bd, q = _quad(x, spec)
    e = np.exp(-q)
    outer = bd[..., :, None] * bd[..., None, :]
    sel = _onehot(l, x.shape[:-1], spec.n_components)
    # other components: 2 a e (B - 2 Bd Bd^T); selected: 2 a ((e-1) B - 2 e Bd Bd^T)
    b_coef = 2.0 * spec.alphas * np.where(sel, e - 1.0, e)
    o_coef = -4.0 * spec.alphas * e
    jac = jac + np.einsum("...j,jab->...ab", b_coef, spec.precisions)
    jac = jac + np.einsum("...j,...jab->...ab", o_coef, outer)
    return 0.5 * (jac + np.swapaxes(jac, -1, -2))


# --- flows ---------------------------------------------------------------

def ode_flow(u, h: float, model: LangevinModel, l):
    """Exact flow of the residual ODE: u - h g_lam(u)."""
    u = np.asarray(u, dtype=float)
    out = u.copy()
    out[..., 2:4] -= h * residual_velocity_drift(u[..., 0:2], model, l)
    return out


def ou_mean(u, ctx: StepContext):
    return (np.asarray(u) - ctx.fixed_point) @ ctx.exp_drift.T + ctx.fixed_point


def ou_flow(u, ctx: StepContext, rng: Optional[np.random.Generator] = None, eta=None):
    """One exact OU step: e^{Ah}(u - u*) + u* + eta, eta ~ N(0, Q(h)).

    Pass ``eta`` to inject a pre-drawn increment; with neither ``rng`` nor
    ``eta`` the step is deterministic (mean only).
    """
    m = ou_mean(u, ctx)
    if eta is None and rng is not None:
        z = rng.standard_normal(np.shape(m))
        eta = z @ ctx.cov_factor.T
    return m if eta is None else m + eta


def lie_trotter_step(u, ctx: StepContext, model: LangevinModel, rng=None, eta=None):
    """phi1_h o phi2_h with the center of ``ctx``."""
    return ou_flow(ode_flow(u, ctx.h, model, ctx.index), ctx, rng, eta)


@dataclass(frozen=True)
class StrangResult:
    state: np.ndarray
    intermediate: np.ndarray  # Z = (X_Z, V_Z) after the OU flow
    velocity_correction: np.ndarray  # -(h/2) g_v(X_Z)


def strang_step(u, ctx: StepContext, model: LangevinModel, rng=None, eta=None,
                return_intermediate: bool = False):
    """phi2_{h/2} o phi1_h o phi2_{h/2} with the center of ``ctx``."""
    half = 0.5 * ctx.h
    z = ou_flow(ode_flow(u, half, model, ctx.index), ctx, rng, eta)
    corr = -half * residual_velocity_drift(z[..., 0:2], model, ctx.index)
    out = z.copy()
    out[..., 2:4] += corr
    if return_intermediate:
        return StrangResult(out, z, corr)
    return out


def transition_mean(u, ctx: StepContext, model: LangevinModel, scheme: str):
    """Mean of the Gaussian reached before any final half-step correction.

    For LT this is the full one-step mean; for Strang it is the mean of Z.
    """
    h = ctx.h if scheme == LIE_TROTTER else 0.5 * ctx.h
    return ou_mean(ode_flow(u, h, model, ctx.index), ctx)


# --- trajectories --------------------------------------------------------

@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # hours
    states: np.ndarray  # (n, 4)

    def __len__(self):
        return len(self.times)

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0:2]

    @property
    def step(self) -> float:
        return float(self.times[1] - self.times[0]) if len(self) > 1 else float("nan")

    def to_csv(self, path) -> None:
        np.savetxt(path, np.column_stack([self.times, self.states]), delimiter=",",
                   header="t_hours,x1_km,x2_km,v1_kmh,v2_kmh", comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(arr[:, 0], arr[:, 1:5])


def simulate_trajectory(u0, h: float, n_steps: int, scheme: str, model: LangevinModel,
                        rng: np.random.Generator, t0: float = 0.0, engine: str = "compiled") -> Trajectory:
    """Simulate ``n_steps`` splitting steps from ``u0``.

    The center is re-selected from the current position before every step.
    All Gaussian increments are drawn up front from ``rng`` so the path only
    depends on (seed, configuration). ``engine="numpy"`` runs the reference
    implementation built from the vectorized module functions; the default
    compiled loop computes the same map.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if engine not in ("compiled", "numpy"):
        raise ValueError("engine must be 'compiled' or 'numpy'")
    u0 = np.asarray(u0, dtype=float)
    z = rng.standard_normal((n_steps, 4))
    times = t0 + h * np.arange(n_steps + 1)
    if engine == "compiled":
        states = _simulate_compiled(u0, h, z, scheme, model)
        return Trajectory(times, states)
    states = np.empty((n_steps + 1, 4))
    states[0] = u0
    step = lie_trotter_step if scheme == LIE_TROTTER else strang_step
    u = u0
    for k in range(n_steps):
        ctx = model.context(model.select_center(u[0:2]), h)
        u = step(u, ctx, model, eta=ctx.cov_factor @ z[k])
        if not np.all(np.isfinite(u)):
            raise SimulationError(k + 1)
        states[k + 1] = u
    return Trajectory(times, states)


def _simulate_compiled(u0, h, z, scheme, model: LangevinModel):
    from ._kernels import simulate_kernel

    spec = model.potential
    idx = range(spec.n_components) if spec.n_components else [NO_CENTER]
    ctxs = [model.context(i, h) for i in idx]
    exp_bank = np.stack([c.exp_drift for c in ctxs])
    fac_bank = np.stack([c.cov_factor for c in ctxs])
    fixed_bank = np.stack([c.fixed_point for c in ctxs])
    if model.penalized:
        dom = model.domain
        starts, ends, edges, sq = dom._starts, dom._ends, dom.edges, dom.sq_lengths
        lam = float(model.lam)
    else:
        starts = ends = edges = np.zeros((1, 2))
        sq = np.ones(1)
        lam = 1.0
    states, failed = simulate_kernel(
        u0.copy(), float(h), z, scheme == STRANG, exp_bank, fac_bank, fixed_bank,
        np.ascontiguousarray(spec.alphas), np.ascontiguousarray(spec.centers).reshape(-1, 2),
        np.ascontiguousarray(spec.precisions).reshape(-1, 2, 2), model.penalized, lam,
        np.ascontiguousarray(starts), np.ascontiguousarray(ends), np.ascontiguousarray(edges),
        np.ascontiguousarray(sq))
    if failed >= 0:
        raise SimulationError(int(failed))
    return states


def subsample(traj: Trajectory, factor: int) -> Trajectory:
    """Keep every ``factor``-th state starting with the first."""
    if factor < 1:
        raise ValueError("subsampling factor must be >= 1")
    return Trajectory(traj.times[::factor].copy(), traj.states[::factor].copy())


def outside_fraction(positions, domain: PolygonDomain) -> float:
    return float(np.mean(~geometry.contains(np.asarray(positions), domain)))

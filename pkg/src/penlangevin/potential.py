"""Gaussian-mixture potential surface.

    H(x) = -sum_j alpha_j * exp(-(x - c_j)^T B_j (x - c_j))

The movement drift is ``-grad H``; this module returns ``grad H`` and the
Hessian of ``H`` with that sign. Points broadcast over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

NO_CENTER = -1


@dataclass(frozen=True)
class PotentialComponent:
    alpha: float
    center: tuple
    precision: tuple  # 2x2 nested tuple

    @classmethod
    def from_entries(cls, alpha, center, b11, b12, b22):
        return cls(float(alpha), (float(center[0]), float(center[1])),
                   ((float(b11), float(b12)), (float(b12), float(b22))))


@dataclass(frozen=True)
class PotentialSpec:
    """Mixture parameters. An empty component list is the flat potential."""

    components: Sequence[PotentialComponent] = ()
    alphas: np.ndarray = field(init=False, repr=False, compare=False)
    centers: np.ndarray = field(init=False, repr=False, compare=False)
    precisions: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        alphas = np.array([c.alpha for c in comps], dtype=float).reshape(-1)
        centers = np.array([c.center for c in comps], dtype=float).reshape(-1, 2)
        precs = np.array([c.precision for c in comps], dtype=float).reshape(-1, 2, 2)
        for j, (a, b) in enumerate(zip(alphas, precs)):
            if not a > 0:
                raise ValueError(f"component {j}: alpha must be positive, got {a}")
            if not np.allclose(b, b.T, rtol=0, atol=1e-14 * max(1.0, abs(b).max())):
                raise ValueError(f"component {j}: precision matrix must be symmetric")
            if np.linalg.eigvalsh(b).min() <= 0:
                raise ValueError(f"component {j}: precision matrix must be positive definite")
        for arr in (alphas, centers, precs):
            arr.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "precisions", precs)

    @property
    def n_components(self) -> int:
        return len(self.alphas)

    @classmethod
    def from_arrays(cls, alphas, centers, precisions) -> "PotentialSpec":
        comps = [PotentialComponent(float(a), tuple(map(float, c)), tuple(map(tuple, np.asarray(b, float))))
                 for a, c, b in zip(alphas, centers, precisions)]
        return cls(comps)


def two_well_potential() -> PotentialSpec:
    """The two-well surface used in the simulation study."""
    return PotentialSpec([
        PotentialComponent.from_entries(70.0, (25.0, 5.0), 1 / 9, 1 / 40, 1 / 4),
        PotentialComponent.from_entries(50.0, (35.0, 15.0), 1 / 36, -1 / 100, 1 / 100),
    ])


def _check_index(j, spec, name="index"):
    if j is None:
        return
    if not 0 <= j < spec.n_components:
        raise IndexError(f"{name} {j} out of range for {spec.n_components} components")


def _quad(x, spec):
    """Offsets d_j = x - c_j and quadratic forms d_j^T B_j d_j, shapes (..., J, 2) and (..., J)."""
    d = np.asarray(x, dtype=float)[..., None, :] - spec.centers
    bd = np.einsum("jab,...jb->...ja", spec.precisions, d)
    q = np.einsum("...ja,...ja->...j", d, bd)
    return d, bd, q


def gaussian_kernel(x, j: int, spec: PotentialSpec):
    """e_j(x) = exp(-(x - c_j)^T B_j (x - c_j))."""
    _check_index(j, spec)
    d = np.asarray(x, dtype=float) - spec.centers[j]
    q = np.einsum("...a,ab,...b->...", d, spec.precisions[j], d)
    return np.exp(-q)


def potential_value(x, spec: PotentialSpec):
    """H(x), negative in the wells."""
    if spec.n_components == 0:
        return np.zeros(np.shape(x)[:-1])
    _, _, q = _quad(x, spec)
    return -np.sum(spec.alphas * np.exp(-q), axis=-1)


def _mask(spec, exclude):
    m = np.ones(spec.n_components)
    if exclude is not None:
        _check_index(exclude, spec, "exclude")
        m[exclude] = 0.0
    return m


def potential_gradient(x, spec: PotentialSpec, exclude: Optional[int] = None):
    """grad H(x) = sum_j 2 alpha_j e_j(x) B_j (x - c_j), optionally omitting one component."""
    x = np.asarray(x, dtype=float)
    if spec.n_components == 0:
        return np.zeros_like(x)
    m = _mask(spec, exclude)
    _, bd, q = _quad(x, spec)
    w = 2.0 * spec.alphas * m * np.exp(-q)
    return np.einsum("...j,...ja->...a", w, bd)


def potential_hessian(x, spec: PotentialSpec, exclude: Optional[int] = None):
    """Hessian of H, sum_j 2 alpha_j e_j B_j (I - 2 d_j d_j^T B_j), symmetrized."""
    x = np.asarray(x, dtype=float)
    out_shape = x.shape[:-1] + (2, 2)
    if spec.n_components == 0:
        return np.zeros(out_shape)
    m = _mask(spec, exclude)
    _, bd, q = _quad(x, spec)
    w = 2.0 * spec.alphas * m * np.exp(-q)
    # B (I - 2 d d^T B) = B - 2 (B d)(B d)^T for symmetric B
    terms = spec.precisions - 2.0 * bd[..., :, None] * bd[..., None, :]
    hess = np.einsum("...j,...jab->...ab", w, terms)
    return 0.5 * (hess + np.swapaxes(hess, -1, -2))


def log_gradient_norms(x, spec: PotentialSpec):
    """log ||grad H_j(x)||^2 for every component, -inf at the component's own center."""
    _, bd, q = _quad(x, spec)
    nrm = np.einsum("...ja,...ja->...j", bd, bd)
    with np.errstate(divide="ignore"):
        return 2 * np.log(2.0) + 2 * np.log(spec.alphas) - 2 * q + np.log(nrm)


def select_center(x, spec: PotentialSpec):
    """Index of the component with the steepest gradient at ``x``.

    Returns ``NO_CENTER`` for the flat potential. Accepts stacked points and
    then returns an integer array.
    """
    x = np.asarray(x, dtype=float)
    if spec.n_components == 0:
        if x.ndim == 1:
            return NO_CENTER
        return np.full(x.shape[:-1], NO_CENTER, dtype=int)
    if spec.n_components == 1:
        return 0 if x.ndim == 1 else np.zeros(x.shape[:-1], dtype=int)
    idx = np.argmax(log_gradient_norms(x, spec), axis=-1)
    return int(idx) if x.ndim == 1 else idx

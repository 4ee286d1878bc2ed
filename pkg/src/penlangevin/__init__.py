"""Domain-penalized underdamped Langevin movement model: simulation and filtering."""

from importlib import resources

from .dynamics import (LIE_TROTTER, STRANG, LangevinModel, MovementParams, Trajectory, simulate_trajectory,
                       subsample)
from .geometry import PolygonDomain, contains, penalty, penalty_jacobian, project
from .noise import ArgosMix, Gaussian, StudentIso
from .potential import PotentialComponent, PotentialSpec, two_well_potential

__version__ = "0.1.0"


def default_polygon_path():
    return resources.files(__package__).joinpath("data", "default_polygon.csv")


def default_domain() -> PolygonDomain:
    """The 19-vertex non-convex test domain shipped with the package."""
    return PolygonDomain.from_file(default_polygon_path())


__all__ = [
    "ArgosMix", "Gaussian", "LIE_TROTTER", "LangevinModel", "MovementParams", "PolygonDomain",
    "PotentialComponent", "PotentialSpec", "STRANG", "StudentIso", "Trajectory", "contains",
    "default_domain", "default_polygon_path", "two_well_potential", "penalty", "penalty_jacobian",
    "project", "simulate_trajectory", "subsample",
]

"""Polygonal movement domain: containment, closest-point projection and the
boundary penalty drift (with its Jacobian).

All point-valued functions accept a single 2-vector or a stack of shape
``(..., 2)`` and broadcast over the leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Points closer than this to the boundary count as inside (km).
BOUNDARY_TOL = 1e-12


@dataclass(frozen=True)
class Projection:
    """Closest point of the closed domain to a query point.

    ``edge_index`` is -1 for interior points. ``gamma`` is the clamped
    position of ``point`` along the winning edge.
    """

    point: np.ndarray
    edge_index: np.ndarray
    gamma: np.ndarray
    clamped: np.ndarray
    inside: np.ndarray


def _segments_intersect(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return np.sign((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if d1 * d2 < 0 and d3 * d4 < 0:
        return True

    def on_segment(a, b, c):
        return (min(a[0], b[0]) <= c[0] <= max(a[0], b[0])
                and min(a[1], b[1]) <= c[1] <= max(a[1], b[1]))

    return ((d1 == 0 and on_segment(q1, q2, p1)) or (d2 == 0 and on_segment(q1, q2, p2))
            or (d3 == 0 and on_segment(p1, p2, q1)) or (d4 == 0 and on_segment(p1, p2, q2)))


class PolygonDomain:
    """Open bounded polygon given by its vertices in boundary order.

    The last vertex connects back to the first; do not repeat it.
    Instances are immutable after construction.
    """

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise ValueError(f"vertices must have shape (p, 2), got {v.shape}")
        if len(v) < 3:
            raise ValueError("a polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertices must be finite")
        starts = v
        ends = np.roll(v, -1, axis=0)
        edges = ends - starts
        sq_len = np.einsum("ij,ij->i", edges, edges)
        if np.any(sq_len <= 0.0):
            k = int(np.argmin(sq_len))
            raise ValueError(f"consecutive vertices {k} and {(k + 1) % len(v)} coincide")
        p = len(v)
        for i in range(p):
            for j in range(i + 1, p):
                if j == i + 1 or (i == 0 and j == p - 1):
                    continue
                if _segments_intersect(starts[i], ends[i], starts[j], ends[j]):
                    raise ValueError(f"polygon is not simple: edges {i} and {j} intersect")
        for arr in (v, starts, ends, edges, sq_len):
            arr.setflags(write=False)
        self.vertices = v
        self._starts = starts
        self._ends = ends
        self.edges = edges
        self.sq_lengths = sq_len

    def __len__(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"PolygonDomain({len(self)} vertices)"

    @property
    def area(self) -> float:
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @classmethod
    def from_file(cls, path) -> "PolygonDomain":
        """Read ``x,y`` vertex records (km), one per line; a header line is allowed."""
        lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
        rows = []
        first = True
        for ln in lines:
            if not ln or ln.startswith("#"):
                continue
            fields = ln.replace(",", " ").split()
            try:
                if len(fields) != 2:
                    raise ValueError
                rows.append([float(fields[0]), float(fields[1])])
            except ValueError:
                if not first:
                    raise ValueError(f"bad vertex record in {path}: {ln!r}") from None
            first = False
        if len(rows) >= 2 and rows[0] == rows[-1]:
            raise ValueError("first and last vertex must not repeat")
        return cls(rows)

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x,y\n")
            for x, y in self.vertices:
                fh.write(f"{float(x)!r},{float(y)!r}\n")

    # --- core geometry -------------------------------------------------

    def _boundary_projection(self, x):
        """Closest boundary point over all edges; ties go to the lowest edge index."""
        rel = x[..., None, :] - self._starts  # (..., E, 2)
        raw = np.einsum("...ei,ei->...e", rel, self.edges) / self.sq_lengths
        gam = np.clip(raw, 0.0, 1.0)
        foot = self._starts + gam[..., None] * self.edges
        diff = x[..., None, :] - foot
        d2 = np.einsum("...ei,...ei->...e", diff, diff)
        k = np.argmin(d2, axis=-1)
        pick = np.take_along_axis
        point = pick(foot, k[..., None, None], axis=-2)[..., 0, :]
        g = pick(gam, k[..., None], axis=-1)[..., 0]
        r = pick(raw, k[..., None], axis=-1)[..., 0]
        dist2 = pick(d2, k[..., None], axis=-1)[..., 0]
        return point, k, g, (r <= 0.0) | (r >= 1.0), dist2

    def _even_odd(self, x):
        px, py = x[..., 0, None], x[..., 1, None]
        ax, ay = self._starts[:, 0], self._starts[:, 1]
        bx, by = self._ends[:, 0], self._ends[:, 1]
        straddle = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = ax + (py - ay) * (bx - ax) / (by - ay)
        hits = straddle & (px < x_cross)
        return np.count_nonzero(hits, axis=-1) % 2 == 1


def contains(x, domain: PolygonDomain):
    """True where ``x`` lies in the domain; boundary points count as inside."""
    x = np.asarray(x, dtype=float)
    inside = domain._even_odd(x)
    if np.all(inside):
        return inside
    _, _, _, _, dist2 = domain._boundary_projection(x)
    return inside | (dist2 <= BOUNDARY_TOL**2)


def project(x, domain: PolygonDomain) -> Projection:
    """Closest point of the closed domain to ``x``."""
    x = np.asarray(x, dtype=float)
    point, k, gam, clamped, dist2 = domain._boundary_projection(x)
    inside = domain._even_odd(x) | (dist2 <= BOUNDARY_TOL**2)
    point = np.where(inside[..., None], x, point)
    k = np.where(inside, -1, k)
    clamped = clamped & ~inside
    return Projection(point=point, edge_index=k, gamma=gam, clamped=clamped, inside=inside)


def penalty(x, domain: PolygonDomain, lam: float):
    """Penalty drift ``(x - pi(x)) / lam``; zero inside and for ``lam = inf``."""
    if not lam > 0:
        raise ValueError("penalty strength lam must be positive")
    x = np.asarray(x, dtype=float)
    if np.isinf(lam):
        return np.zeros_like(x)
    inside = domain._even_odd(x)
    if np.all(inside):
        return np.zeros_like(x)
    proj = project(x, domain)
    return (x - proj.point) / lam


def penalty_jacobian(x, domain: PolygonDomain, lam: float):
    """Jacobian of :func:`penalty`, ``(I - Dpi(x)) / lam``.

    On an edge interior ``Dpi`` is the rank-one projector onto the edge
    direction; when the projection is clamped to a vertex it is zero.
    """
    if not lam > 0:
        raise ValueError("penalty strength lam must be positive")
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (2, 2))
    if np.isinf(lam):
        return out
    proj = project(x, domain)
    if np.all(proj.inside):
        return out
    e = domain.edges[np.maximum(proj.edge_index, 0)]
    dpi = e[..., :, None] * e[..., None, :] / domain.sq_lengths[np.maximum(proj.edge_index, 0)][..., None, None]
    dpi = np.where(proj.clamped[..., None, None], 0.0, dpi)
    jac = (np.eye(2) - dpi) / lam
    return np.where(proj.inside[..., None, None], out, jac)

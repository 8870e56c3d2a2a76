"""Triangle meshes with tagged boundary edges.

A :class:`Mesh` is immutable once built. Boundary edges carry one of two
tags, ``DIRICHLET`` or ``NEUMANN``; a vertex counts as Dirichlet as soon as
one of its incident boundary edges does.
"""
from __future__ import annotations

from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

DIRICHLET = "D"
NEUMANN = "N"
_TAGS = (DIRICHLET, NEUMANN)

# local edge k of a triangle joins local vertices _LOCAL_EDGES[k]
_LOCAL_EDGES = ((0, 1), (1, 2), (2, 0))


class MeshError(ValueError):
    """Raised for invalid mesh input or connectivity."""


class InvalidGeometryError(MeshError):
    """Raised for degenerate or unsupported domain geometry."""


class QualityReport(NamedTuple):
    min_angle: float
    max_angle: float
    h: float
    triangle_count: int


class Mesh:
    """Conforming triangulation of a polygonal domain.

    Parameters
    ----------
    points : (V, 2) array_like
    triangles : (T, 3) array_like of int
        Vertex indices, counter-clockwise.
    boundary_tags : dict, optional
        Maps a boundary edge, given as a frozenset/sorted pair of vertex
        indices, to a tag. Missing edges default to Neumann.
    """

    def __init__(self, points, triangles, boundary_tags=None):
        points = np.array(points, dtype=float).reshape(-1, 2)
        triangles = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise MeshError("mesh points must be finite")
        if len(triangles) == 0:
            raise MeshError("mesh has no triangles")
        if triangles.min() < 0 or triangles.max() >= len(points):
            raise MeshError("triangle references a vertex that does not exist")
        points.setflags(write=False)
        triangles.setflags(write=False)
        self.points = points
        self.triangles = triangles
        self._check_topology()

        edges = self._boundary_directed
        tags = np.full(len(edges), NEUMANN, dtype="<U1")
        if boundary_tags:
            lookup = {tuple(sorted(map(int, k))): v for k, v in boundary_tags.items()}
            for i, (a, b) in enumerate(edges):
                tag = lookup.get((min(a, b), max(a, b)), NEUMANN)
                if tag not in _TAGS:
                    raise MeshError(f"unknown boundary tag {tag!r}")
                tags[i] = tag
        tags.setflags(write=False)
        self.boundary_edges = edges
        self.boundary_tags = tags

    # -- validation -------------------------------------------------------

    def _check_topology(self):
        tri = self.triangles
        if np.any((tri[:, 0] == tri[:, 1]) | (tri[:, 1] == tri[:, 2]) | (tri[:, 0] == tri[:, 2])):
            raise MeshError("triangle with repeated vertices")
        if np.any(self.signed_areas <= 0.0):
            bad = int(np.argmax(self.signed_areas <= 0.0))
            raise MeshError(f"triangle {bad} is not counter-clockwise or has zero area")
        directed = tri[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2)
        # a conforming, consistently oriented mesh never repeats a directed edge
        keys = directed[:, 0] * len(self.points) + directed[:, 1]
        if len(np.unique(keys)) != len(keys):
            raise MeshError("non-conforming connectivity: directed edge used twice")
        undirected = np.sort(directed, axis=1)
        ukeys = undirected[:, 0] * len(self.points) + undirected[:, 1]
        _, inverse, counts = np.unique(ukeys, return_inverse=True, return_counts=True)
        if counts.max() > 2:
            raise MeshError("non-conforming connectivity: edge shared by more than two triangles")
        used = np.zeros(len(self.points), dtype=bool)
        used[tri.ravel()] = True
        if not used.all():
            raise MeshError("mesh contains vertices not used by any triangle")
        n_edges = len(counts)
        if len(self.points) - n_edges + len(tri) != 1:
            raise MeshError("non-conforming connectivity: domain is not a simply connected disk")
        self._boundary_directed = directed[counts[inverse] == 1]
        self._boundary_directed.setflags(write=False)

    # -- geometry ---------------------------------------------------------

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.points[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def area(self) -> float:
        return float(self.signed_areas.sum())

    @cached_property
    def diameters(self) -> np.ndarray:
        """Per-triangle diameter (longest edge length)."""
        p = self.points[self.triangles]
        lengths = np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)
        return lengths.max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges, sorted pairs in lexicographic order."""
        undirected = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        return np.unique(undirected, axis=0)

    @cached_property
    def triangle_edges(self) -> np.ndarray:
        """(T, 3) index into :attr:`edges` of local edges (0,1), (1,2), (2,0)."""
        undirected = np.sort(self.triangles[:, [0, 1, 1, 2, 2, 0]].reshape(-1, 2), axis=1)
        n = len(self.points)
        keys = self.edges[:, 0] * n + self.edges[:, 1]
        idx = np.searchsorted(keys, undirected[:, 0] * n + undirected[:, 1])
        return idx.reshape(-1, 3)

    @property
    def bbox(self):
        lo = self.points.min(axis=0)
        hi = self.points.max(axis=0)
        return (float(lo[0]), float(hi[0]), float(lo[1]), float(hi[1]))

    @cached_property
    def dirichlet_vertices(self) -> np.ndarray:
        mask = self.boundary_tags == DIRICHLET
        return np.unique(self.boundary_edges[mask].ravel())

    def __repr__(self):
        n_d = int(np.sum(self.boundary_tags == DIRICHLET))
        return (f"Mesh(vertices={len(self.points)}, triangles={len(self.triangles)}, "
                f"boundary_edges={len(self.boundary_edges)} ({n_d} Dirichlet), h={self.h:.4g})")

    # -- point location ---------------------------------------------------

    @cached_property
    def _buckets(self):
        xmin, xmax, ymin, ymax = self.bbox
        n = max(1, int(np.sqrt(len(self.triangles) / 2.0)))
        span = max(xmax - xmin, ymax - ymin)
        cell = span / n if span > 0 else 1.0
        nx = max(1, int(np.ceil((xmax - xmin) / cell)))
        ny = max(1, int(np.ceil((ymax - ymin) / cell)))
        p = self.points[self.triangles]
        lo = np.floor((p.min(axis=1) - [xmin, ymin]) / cell).astype(int)
        hi = np.floor((p.max(axis=1) - [xmin, ymin]) / cell).astype(int)
        lo = np.clip(lo, 0, [nx - 1, ny - 1])
        hi = np.clip(hi, 0, [nx - 1, ny - 1])
        buckets: dict[tuple[int, int], list[int]] = {}
        for t in range(len(self.triangles)):
            for i in range(lo[t, 0], hi[t, 0] + 1):
                for j in range(lo[t, 1], hi[t, 1] + 1):
                    buckets.setdefault((i, j), []).append(t)
        return xmin, ymin, cell, nx, ny, buckets

    def barycentric(self, t: int, p) -> np.ndarray:
        a, b, c = self.points[self.triangles[t]]
        det = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        l1 = ((p[0] - a[0]) * (c[1] - a[1]) - (p[1] - a[1]) * (c[0] - a[0])) / det
        l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])) / det
        return np.array([1.0 - l1 - l2, l1, l2])

    def locate(self, p, tol: float = 1e-12):
        """Find the triangle containing ``p``.

        Returns ``(triangle, barycentric)`` or ``None`` when ``p`` lies outside
        the mesh. Points on shared edges or vertices go to the lowest-indexed
        candidate triangle. Barycentric coordinates within ``-tol`` of zero are
        clipped and renormalised.
        """
        x, y = float(p[0]), float(p[1])
        xmin, ymin, cell, nx, ny, buckets = self._buckets
        i = int(np.floor((x - xmin) / cell))
        j = int(np.floor((y - ymin) / cell))
        candidates: set[int] = set()
        # points on a bucket seam may belong to the neighbouring bucket
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                candidates.update(buckets.get((i + di, j + dj), ()))
        for t in sorted(candidates):
            lam = self.barycentric(t, (x, y))
            if lam.min() >= -tol:
                lam = np.clip(lam, 0.0, None)
                return t, lam / lam.sum()
        return None


# -- construction -----------------------------------------------------------

def generate_structured(nx: int, ny: int, bbox=(0.0, 1.0, 0.0, 1.0)) -> Mesh:
    """Right-angled triangles on a rectangle ``bbox = (x0, x1, y0, y1)``.

    Each of the ``nx * ny`` cells is cut along its lower-left to upper-right
    diagonal. All boundary edges are Neumann.
    """
    if int(nx) < 1 or int(ny) < 1:
        raise InvalidGeometryError("nx and ny must be at least 1")
    x0, x1, y0, y1 = map(float, bbox)
    if not (x1 > x0 and y1 > y0):
        raise InvalidGeometryError(f"degenerate bounding box {bbox}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    points = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.column_stack([lower, upper]).reshape(-1, 3)
    return Mesh(points, triangles)


def structured_for_count(n_triangles: int, bbox) -> Mesh:
    """Square-cell structured mesh of a square ``bbox`` with ``n_triangles``."""
    n = int(round(np.sqrt(n_triangles / 2)))
    if 2 * n * n != n_triangles:
        raise InvalidGeometryError(f"{n_triangles} is not of the form 2*n^2")
    return generate_structured(n, n, bbox)


def tag_boundary(mesh: Mesh, rule: Callable[[float, float], str | bool]) -> Mesh:
    """Retag every boundary edge from ``rule`` evaluated at its midpoint.

    ``rule(x, y)`` returns a tag, or a bool meaning "is Dirichlet".
    """
    tags = {}
    for (a, b) in mesh.boundary_edges:
        m = 0.5 * (mesh.points[a] + mesh.points[b])
        tag = rule(float(m[0]), float(m[1]))
        if isinstance(tag, (bool, np.bool_)):
            tag = DIRICHLET if tag else NEUMANN
        tags[(int(a), int(b))] = tag
    return Mesh(mesh.points, mesh.triangles, tags)


def all_dirichlet(x, y):
    return DIRICHLET


def all_neumann(x, y):
    return NEUMANN


def dirichlet_on_vertical_lines(*xs: float, tol: float = 1e-12):
    """Rule: Dirichlet on edges whose midpoint has ``x`` equal to one of ``xs``."""
    def rule(x, y):
        return DIRICHLET if any(abs(x - x0) <= tol * max(1.0, abs(x0)) for x0 in xs) else NEUMANN
    return rule


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four through its edge midpoints.

    Boundary tags are inherited by both halves of each boundary edge.
    """
    nv = len(mesh.points)
    edges = mesh.edges
    mid = 0.5 * (mesh.points[edges[:, 0]] + mesh.points[edges[:, 1]])
    points = np.vstack([mesh.points, mid])
    te = mesh.triangle_edges + nv
    v = mesh.triangles
    m01, m12, m20 = te[:, 0], te[:, 1], te[:, 2]
    triangles = np.concatenate([
        np.column_stack([v[:, 0], m01, m20]),
        np.column_stack([m01, v[:, 1], m12]),
        np.column_stack([m20, m12, v[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ])
    n = nv
    keys = edges[:, 0] * n + edges[:, 1]
    tags = {}
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        lo, hi = min(a, b), max(a, b)
        m = nv + int(np.searchsorted(keys, lo * n + hi))
        tags[(int(a), m)] = str(tag)
        tags[(m, int(b))] = str(tag)
    return Mesh(points, triangles, tags)


def quality_report(mesh: Mesh) -> QualityReport:
    """Interior angle extremes in degrees, mesh size and triangle count."""
    angles = triangle_angles(mesh.points, mesh.triangles)
    return QualityReport(float(angles.min()), float(angles.max()), mesh.h, len(mesh.triangles))


def triangle_angles(points, triangles) -> np.ndarray:
    p = np.asarray(points)[np.asarray(triangles)]
    out = np.empty((len(p), 3))
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        w = p[:, (k + 2) % 3] - p[:, k]
        cos = np.einsum("ij,ij->i", u, w) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        out[:, k] = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return out

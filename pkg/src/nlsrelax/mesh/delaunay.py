"""Bowyer-Watson Delaunay meshing of convex polygons.

Points are seeded on the polygon edges and on an axis-aligned interior
lattice, all at spacing ``target_h``. Insertion starts from a Delaunay
triangulation of the polygon corners, so the convex hull is the polygon from
the first step and no super-triangle vertices ever have to be removed.
"""
from __future__ import annotations

import math

import numpy as np

from .core import InvalidGeometryError, Mesh

INCIRCLE_TOL = 1e-12


def orient(a, b, c) -> float:
    """Twice the signed area of ``abc`` (> 0 when counter-clockwise)."""
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def incircle(a, b, c, d) -> float:
    """In-circle determinant of ``d`` against CCW triangle ``abc``.

    Normalised by the fourth power of the longest edge, so the value is
    scale-free; positive means ``d`` is strictly inside the circumcircle.
    """
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    ad = adx * adx + ady * ady
    bd = bdx * bdx + bdy * bdy
    cd = cdx * cdx + cdy * cdy
    det = (adx * (bdy * cd - bd * cdy)
           - ady * (bdx * cd - bd * cdx)
           + ad * (bdx * cdy - bdy * cdx))
    l2 = max((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2,
             (b[0] - c[0]) ** 2 + (b[1] - c[1]) ** 2,
             (c[0] - a[0]) ** 2 + (c[1] - a[1]) ** 2)
    return det / (l2 * l2)


def check_convex_polygon(polygon) -> np.ndarray:
    """Validate a convex simple polygon and return it counter-clockwise."""
    poly = np.array(polygon, dtype=float).reshape(-1, 2)
    if len(poly) < 3:
        raise InvalidGeometryError("polygon needs at least 3 vertices")
    if not np.all(np.isfinite(poly)):
        raise InvalidGeometryError("polygon vertices must be finite")
    area2 = float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1]))
    if area2 < 0:
        poly = poly[::-1].copy()
    scale = float(np.ptp(poly, axis=0).max())
    if scale == 0.0 or abs(area2) <= 1e-14 * scale**2:
        raise InvalidGeometryError("polygon is degenerate")
    n = len(poly)
    turning = 0.0
    for i in range(n):
        a, b, c = poly[i - 1], poly[i], poly[(i + 1) % n]
        cross = orient(a, b, c)
        if cross <= 1e-12 * scale**2:
            raise InvalidGeometryError(f"polygon is not strictly convex at vertex {i}")
        u, v = b - a, c - b
        turning += math.atan2(u[0] * v[1] - u[1] * v[0], u @ v)
    if abs(turning - 2 * math.pi) > 1e-6:
        raise InvalidGeometryError("polygon is self-intersecting")
    return poly


def seed_points(poly: np.ndarray, target_h: float) -> tuple[np.ndarray, np.ndarray]:
    """Boundary and interior seed points for a CCW convex polygon."""
    boundary = []
    for i in range(len(poly)):
        a, b = poly[i], poly[(i + 1) % len(poly)]
        n = max(1, math.ceil(np.linalg.norm(b - a) / target_h - 1e-9))
        for j in range(n):
            boundary.append(a + (b - a) * (j / n))
    boundary = np.array(boundary)

    xmin, ymin = poly.min(axis=0)
    xmax, ymax = poly.max(axis=0)
    nx = max(1, math.ceil((xmax - xmin) / target_h - 1e-9))
    ny = max(1, math.ceil((ymax - ymin) / target_h - 1e-9))
    xs = np.linspace(xmin, xmax, nx + 1)[1:-1]
    ys = np.linspace(ymin, ymax, ny + 1)[1:-1]
    margin = 0.5 * min((xmax - xmin) / nx, (ymax - ymin) / ny)
    rows = []
    for j, y in enumerate(ys):
        row = xs if j % 2 == 0 else xs[::-1]  # serpentine order keeps the walk short
        rows.append(np.column_stack([row, np.full(len(row), y)]))
    interior = np.vstack(rows) if rows else np.empty((0, 2))
    if len(interior):
        keep = np.ones(len(interior), dtype=bool)
        for i in range(len(poly)):
            a, b = poly[i], poly[(i + 1) % len(poly)]
            edge = b - a
            normal_dist = (edge[0] * (interior[:, 1] - a[1]) - edge[1] * (interior[:, 0] - a[0])) / np.linalg.norm(edge)
            keep &= normal_dist >= margin
        interior = interior[keep]
    return boundary, interior


def _corner_triangulation(pts, corners):
    """Delaunay triangulation of a convex polygon's corners by recursive splitting."""
    tris = []

    def split(chain):
        if len(chain) < 3:
            return
        a, b = chain[0], chain[-1]
        best = 1
        for k in range(2, len(chain) - 1):
            # the apex whose circle through a, b excludes every other corner
            if incircle(pts[a], pts[chain[best]], pts[b], pts[chain[k]]) > INCIRCLE_TOL:
                best = k
        tris.append((a, chain[best], b))
        split(chain[: best + 1])
        split(chain[best:])

    # chain runs CCW from corners[0] to corners[-1]; the closing edge is corners[-1] -> corners[0]
    split(list(corners))
    return [(a, b, c) if orient(pts[a], pts[b], pts[c]) > 0 else (a, c, b) for a, b, c in tris]


class _Triangulation:
    """Mutable adjacency structure used during insertion."""

    def __init__(self, pts, triangles, scale):
        self.pts = pts
        self.v: list[list[int]] = []
        self.n: list[list[int]] = []
        self.alive: list[bool] = []
        self.eps = 1e-12 * scale * scale
        edge_owner = {}
        for t, tri in enumerate(triangles):
            self.v.append(list(tri))
            self.n.append([-1, -1, -1])
            self.alive.append(True)
            for i in range(3):
                a, b = tri[(i + 1) % 3], tri[(i + 2) % 3]
                if (b, a) in edge_owner:
                    s, j = edge_owner[(b, a)]
                    self.n[t][i] = s
                    self.n[s][j] = t
                edge_owner[(a, b)] = (t, i)
        self.last = 0

    def walk(self, p) -> int:
        pts = self.pts
        t = self.last
        steps = 0
        limit = 4 * len(self.v) + 10
        while True:
            v = self.v[t]
            moved = False
            for i in range(3):
                a, b = pts[v[(i + 1) % 3]], pts[v[(i + 2) % 3]]
                if orient(a, b, p) < -self.eps:
                    nxt = self.n[t][i]
                    if nxt < 0:
                        raise InvalidGeometryError("seed point lies outside the domain")
                    t = nxt
                    moved = True
                    break
            if not moved:
                return t
            steps += 1
            if steps > limit:
                raise InvalidGeometryError("point location did not terminate")

    def insert(self, k: int) -> None:
        pts = self.pts
        p = pts[k]
        start = self.walk(p)
        cavity = {start}
        stack = [start]
        while stack:
            t = stack.pop()
            for s in self.n[t]:
                if s >= 0 and s not in cavity:
                    a, b, c = self.v[s]
                    if incircle(pts[a], pts[b], pts[c], p) > INCIRCLE_TOL:
                        cavity.add(s)
                        stack.append(s)

        rim = []
        for t in cavity:
            v = self.v[t]
            for i in range(3):
                s = self.n[t][i]
                if s < 0 or s not in cavity:
                    rim.append((v[(i + 1) % 3], v[(i + 2) % 3], s, t))

        new = []
        starts, ends = {}, {}
        for a, b, s, old in rim:
            if s < 0:
                pa, pb = pts[a], pts[b]
                l2 = (pb[0] - pa[0]) ** 2 + (pb[1] - pa[1]) ** 2
                if abs(orient(pa, pb, p)) <= 1e-10 * l2:
                    continue  # p splits this domain boundary edge
            if orient(pts[a], pts[b], p) <= 0.0:
                raise InvalidGeometryError("cavity is not star-shaped around the new point")
            t = len(self.v)
            self.v.append([a, b, k])
            self.n.append([-1, -1, s])
            self.alive.append(True)
            if s >= 0:
                ns = self.n[s]
                ns[ns.index(old)] = t
            starts[a] = t
            ends[b] = t
            new.append(t)
        for t in new:
            a, b, _ = self.v[t]
            self.n[t][0] = starts.get(b, -1)  # across edge b -> k
            self.n[t][1] = ends.get(a, -1)    # across edge k -> a
        for t in cavity:
            self.alive[t] = False
        self.last = new[-1]

    def triangles(self) -> np.ndarray:
        return np.array([v for v, ok in zip(self.v, self.alive) if ok], dtype=np.int64)


def delaunay_points(points, hull: np.ndarray, order=None) -> np.ndarray:
    """Triangulate ``points`` whose first ``len(hull)`` entries are the CCW hull corners.

    Remaining points must lie inside the hull or on its edges.
    """
    pts = [tuple(map(float, p)) for p in points]
    nc = len(hull)
    scale = float(np.ptp(np.asarray(points), axis=0).max())
    tri = _Triangulation(pts, _corner_triangulation(pts, list(range(nc))), scale)
    for k in (range(nc, len(pts)) if order is None else order):
        tri.insert(k)
    return tri.triangles()


def delaunay_triangulate(polygon, target_h: float) -> Mesh:
    """Delaunay mesh of a convex polygon with seed spacing ``target_h``.

    All boundary edges are tagged Neumann; use :func:`tag_boundary` to change.
    """
    if not target_h > 0:
        raise InvalidGeometryError("target_h must be positive")
    poly = check_convex_polygon(polygon)
    boundary, interior = seed_points(poly, target_h)
    # corners first: every boundary edge chunk starts at a corner
    corner_idx = []
    for c in poly:
        corner_idx.append(int(np.argmin(np.linalg.norm(boundary - c, axis=1))))
    is_corner = set(corner_idx)
    rest = [i for i in range(len(boundary)) if i not in is_corner]
    pts = np.vstack([boundary[corner_idx], boundary[rest], interior])
    triangles = delaunay_points(pts, poly)
    return Mesh(pts, triangles)


def target_h_for_count(polygon, n_triangles: int) -> float:
    """Seed spacing giving roughly ``n_triangles`` triangles on ``polygon``."""
    poly = check_convex_polygon(polygon)
    area = 0.5 * abs(float(np.sum(poly[:, 0] * np.roll(poly[:, 1], -1) - np.roll(poly[:, 0], -1) * poly[:, 1])))
    return math.sqrt(2.0 * area / n_triangles)


def is_delaunay(mesh: Mesh, tol: float = INCIRCLE_TOL) -> bool:
    """Brute-force empty circumcircle check, O(T * V)."""
    return len(delaunay_violations(mesh, tol)) == 0


def delaunay_violations(mesh: Mesh, tol: float = INCIRCLE_TOL) -> list[tuple[int, int]]:
    p = mesh.points
    bad = []
    for t, (a, b, c) in enumerate(mesh.triangles):
        pa, pb, pc = p[a], p[b], p[c]
        ad, bd, cd = pa - p, pb - p, pc - p
        ad2 = np.einsum("ij,ij->i", ad, ad)
        bd2 = np.einsum("ij,ij->i", bd, bd)
        cd2 = np.einsum("ij,ij->i", cd, cd)
        det = (ad[:, 0] * (bd[:, 1] * cd2 - bd2 * cd[:, 1])
               - ad[:, 1] * (bd[:, 0] * cd2 - bd2 * cd[:, 0])
               + ad2 * (bd[:, 0] * cd[:, 1] - bd[:, 1] * cd[:, 0]))
        l2 = max(float(np.sum((pa - pb) ** 2)), float(np.sum((pb - pc) ** 2)), float(np.sum((pc - pa) ** 2)))
        inside = np.nonzero(det / (l2 * l2) > tol)[0]
        bad.extend((t, int(v)) for v in inside if v not in (a, b, c))
    return bad

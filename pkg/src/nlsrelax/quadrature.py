"""Quadrature rules on the reference triangle in barycentric form.

Weights sum to one, so an integral over a physical triangle is its area times
the weighted sum of integrand values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray   # (nq, 3) barycentric coordinates
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def reference_xy(self) -> np.ndarray:
        """Points in reference coordinates (xi, eta) = (l1, l2)."""
        return self.points[:, 1:]

    def __len__(self):
        return len(self.weights)


def _orbit_s21(a: float):
    return [(1 - 2 * a, a, a), (a, 1 - 2 * a, a), (a, a, 1 - 2 * a)]


def _orbit_s111(a: float, b: float):
    return sorted(set(permutations((a, b, 1 - a - b))))


def _rule(orbits, degree) -> QuadratureRule:
    pts, wts = [], []
    for points, w in orbits:
        pts.extend(points)
        wts.extend([w] * len(points))
    return QuadratureRule(np.array(pts), np.array(wts), degree)


@lru_cache(maxsize=None)
def _dunavant4() -> QuadratureRule:
    return _rule([
        (_orbit_s21(0.44594849091596488632), 0.22338158967801146570),
        (_orbit_s21(0.09157621350977074346), 0.10995174365532186764),
    ], 4)


@lru_cache(maxsize=None)
def _dunavant6() -> QuadratureRule:
    return _rule([
        (_orbit_s21(0.24928674517091042129), 0.11678627572637936603),
        (_orbit_s21(0.06308901449150222834), 0.050844906370206816921),
        (_orbit_s111(0.053145049844816947353, 0.31035245103378440542), 0.082851075618373575194),
    ], 6)


@lru_cache(maxsize=None)
def collapsed_gauss(degree: int) -> QuadratureRule:
    """Conical product Gauss rule exact for polynomials of total ``degree``."""
    n = max(1, math.ceil((degree + 2) / 2))
    g, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (g + 1.0)
    ws = 0.5 * w
    pts, wts = [], []
    for si, wi in zip(s, ws):
        for tj, wj in zip(s, ws):
            xi = si
            eta = tj * (1.0 - si)
            pts.append((1.0 - xi - eta, xi, eta))
            # reference area 1/2 is normalised out
            wts.append(2.0 * wi * wj * (1.0 - si))
    return QuadratureRule(np.array(pts), np.array(wts), degree)


def triangle_rule(degree: int) -> QuadratureRule:
    """Symmetric rule of at least ``degree`` for degree <= 6, else a collapsed Gauss rule."""
    if degree <= 4:
        return _dunavant4()
    if degree <= 6:
        return _dunavant6()
    return collapsed_gauss(degree)

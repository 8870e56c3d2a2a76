"""Closed-form data for the experiments: solitons, manufactured solutions, presets.

All pointwise functions take ``(x, y, t)`` and broadcast over numpy arrays.
The PDE throughout is ``i u_t + Lap u + lam |u|^2 u = f``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable

import numpy as np

from . import fem
from .mesh import (DIRICHLET, NEUMANN, Mesh, delaunay_triangulate, structured_for_count, tag_boundary,
                   target_h_for_count)

PI = math.pi


@dataclass(frozen=True)
class SolitonParams:
    eta: float
    xi: float
    x0: float = 0.0  # initial centre offset

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")


def bright_soliton(x, y, t, p: SolitonParams):
    """eta sech(eta (x - x0 + 2 xi t)) exp(-i theta), exact for lam = 2."""
    x = np.asarray(x, dtype=float) - p.x0
    theta = p.xi * x + (p.xi**2 - p.eta**2) * t
    return p.eta / np.cosh(p.eta * (x + 2.0 * p.xi * t)) * np.exp(-1j * theta) + 0.0 * np.asarray(y)


def dark_soliton(x, y, t, p: SolitonParams):
    """Dark soliton on a background of modulus eta, exact for lam = -2."""
    s, c = math.sin(p.xi), math.cos(p.xi)
    if s == 0.0:
        raise ValueError("dark soliton needs sin(xi) != 0")
    x = np.asarray(x, dtype=float) - p.x0
    arg = s * p.eta * (-x + 2.0 * p.eta * c * t)
    return p.eta * (c + 1j * s * np.tanh(arg)) * np.exp(-2j * p.eta**2 * t) + 0.0 * np.asarray(y)


def soliton_speed(kind: str, p: SolitonParams) -> float:
    """Signed x-velocity of the soliton centre."""
    return -2.0 * p.xi if kind == "bright" else 2.0 * p.eta * math.cos(p.xi)


# manufactured solution on [0,1] x [0,0.5]

def mms_poly(x, y, t):
    return np.exp(t) * x * (1.0 - x) * y * (0.5 - y) + 0j


def mms_poly_forcing(x, y, t, lam):
    # u_t = u, Lap u = e^t (-2 y (0.5 - y) - 2 x (1 - x)), u real
    px = x * (1.0 - x)
    qy = y * (0.5 - y)
    u = np.exp(t) * px * qy
    lap = np.exp(t) * (-2.0 * qy - 2.0 * px)
    return 1j * u + lap + lam * u**3


# manufactured solution on [0,2]^2

def mms_trig(x, y, t):
    return np.exp(t) * (1.0 - np.cos(2 * PI * x)) * np.sin(2 * PI * y) + 0j


def mms_trig_forcing(x, y, t, lam):
    et = np.exp(t)
    sy = np.sin(2 * PI * y)
    u = et * (1.0 - np.cos(2 * PI * x)) * sy
    lap = et * 4 * PI**2 * np.cos(2 * PI * x) * sy - 4 * PI**2 * u
    return 1j * u + lap + lam * u**3


# spatially constant controls (exact in every V_r), meant for lam = 0 and Neumann walls

def control_exp(x, y, t):
    """e^t: the error is purely temporal."""
    return np.exp(t) + 0.0 * np.asarray(x) + 0j


def control_exp_forcing(x, y, t, lam=0.0):
    return 1j * np.exp(t) + lam * np.exp(3 * t) + 0.0 * np.asarray(x)


def control_affine(x, y, t):
    """1 + i t: reproduced exactly by Crank-Nicolson in any V_r."""
    return 1.0 + 1j * t + 0.0 * np.asarray(x)


def control_affine_forcing(x, y, t, lam=0.0):
    return -1.0 + lam * (1.0 + t * t) * (1.0 + 1j * t) + 0.0 * np.asarray(x)


# -- convergence rates --------------------------------------------------------

def eoc(errors, steps) -> list[float]:
    """Experimental orders log(E_{l+1}/E_l) / log(k_{l+1}/k_l)."""
    errors = np.asarray(errors, dtype=float)
    steps = np.asarray(steps, dtype=float)
    if errors.shape != steps.shape or errors.ndim != 1:
        raise ValueError("errors and steps must be 1-D sequences of equal length")
    if len(errors) < 2:
        raise ValueError("need at least two runs")
    if np.any(errors <= 0) or np.any(steps <= 0):
        raise ValueError("errors and steps must be positive")
    return list(np.log(errors[1:] / errors[:-1]) / np.log(steps[1:] / steps[:-1]))


def least_squares_rate(errors, sizes) -> float:
    """Slope of the least-squares line through (log size, log error)."""
    errors = np.asarray(errors, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if np.any(errors <= 0) or np.any(sizes <= 0):
        raise ValueError("errors and sizes must be positive")
    slope, _ = np.polyfit(np.log(sizes), np.log(errors), 1)
    return float(slope)


# -- cross sections -----------------------------------------------------------

def domain_extent_at(mesh: Mesh, y0: float) -> tuple[float, float]:
    """x-interval where the horizontal line y = y0 meets the (convex) mesh."""
    xs = []
    for a, b in mesh.boundary_edges:
        (xa, ya), (xb, yb) = mesh.points[a], mesh.points[b]
        lo, hi = min(ya, yb), max(ya, yb)
        if lo <= y0 <= hi:
            if ya == yb:
                xs += [xa, xb]
            else:
                xs.append(xa + (y0 - ya) * (xb - xa) / (yb - ya))
    if not xs:
        raise fem.OutsideDomainError(f"line y={y0} does not meet the domain")
    return min(xs), max(xs)


def cross_section(field: fem.Field, y0: float = 0.0, n_samples: int = 401, x_range=None) -> np.ndarray:
    """(n, 4) array of x, |u|, Re u, Im u sampled along y = y0."""
    if x_range is None:
        x_range = domain_extent_at(field.space.mesh, y0)
    xs = np.linspace(x_range[0], x_range[1], n_samples)
    vals = fem.evaluate_many(field, np.column_stack([xs, np.full_like(xs, y0)])).astype(complex)
    return np.column_stack([xs, np.abs(vals), vals.real, vals.imag])


def profile_difference(profile, reference) -> float:
    """Relative discrete L2 difference of two equally sampled profiles."""
    profile = np.asarray(profile, dtype=float)
    reference = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(profile - reference) / np.linalg.norm(reference))


def best_mirrored_match(xs, profile, reference_fn, shifts) -> tuple[float, float]:
    """Smallest relative L2 gap between ``profile`` and x-mirrored translates.

    ``reference_fn(x)`` is the initial modulus profile; the candidate is
    ``reference_fn(-(x - s))`` for every shift ``s``. Returns (gap, shift).
    """
    best = (math.inf, 0.0)
    for s in shifts:
        ref = reference_fn(-(xs - s))
        gap = profile_difference(profile, ref)
        if gap < best[0]:
            best = (gap, float(s))
    return best


# -- presets ------------------------------------------------------------------

def rectangle(x0, x1, y0, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


def _bc_rule(kind: str, polygon) -> Callable:
    if kind == "dirichlet":
        return lambda x, y: DIRICHLET
    if kind == "neumann":
        return lambda x, y: NEUMANN
    if kind == "mixed":
        xs = [p[0] for p in polygon]
        lo, hi = min(xs), max(xs)
        return lambda x, y: DIRICHLET if (abs(x - lo) <= 1e-12 * max(1, abs(lo))
                                          or abs(x - hi) <= 1e-12 * max(1, abs(hi))) else NEUMANN
    raise ValueError(f"unknown boundary condition kind {kind!r}")


@dataclass(frozen=True)
class ExperimentPreset:
    name: str
    polygon: tuple
    mesh_kind: str          # "delaunay" or "structured"
    triangles: int          # mesh size of the reference experiment
    bc: str                 # "dirichlet", "neumann" or "mixed"
    lam: float
    degree: int
    k: float
    T_final: float
    initial: Callable       # u0(x, y, t)
    exact: Callable | None = None
    forcing: Callable | None = None
    soliton: SolitonParams | None = None
    soliton_kind: str | None = None
    expected: dict = field(default_factory=dict)
    desk: dict = field(default_factory=dict)
    ladder: tuple = ()

    @property
    def bc_rule(self) -> Callable:
        return _bc_rule(self.bc, self.polygon)

    def make_mesh(self, triangles: int | None = None) -> Mesh:
        """Mesh of the preset domain with about ``triangles`` elements, tagged."""
        n = int(triangles or self.triangles)
        if self.mesh_kind == "structured":
            xs = [q[0] for q in self.polygon]
            ys = [q[1] for q in self.polygon]
            mesh = structured_for_count(n, (min(xs), max(xs), min(ys), max(ys)))
        else:
            mesh = delaunay_triangulate(self.polygon, target_h_for_count(self.polygon, n))
        return tag_boundary(mesh, self.bc_rule)

    def initial_modulus(self, x):
        """|u0| along the x-axis."""
        return np.abs(self.initial(np.asarray(x, dtype=float), 0.0, 0.0))


def _forcing(fn, lam):
    return partial(fn, lam=lam)


def _make_presets() -> dict[str, ExperimentPreset]:
    p = {}
    lam = -2.0
    p["temporal-eoc"] = ExperimentPreset(
        name="temporal-eoc", polygon=tuple(rectangle(0.0, 1.0, 0.0, 0.5)), mesh_kind="delaunay",
        triangles=192802, bc="dirichlet", lam=lam, degree=2, k=0.5, T_final=4.0,
        initial=mms_poly, exact=mms_poly, forcing=_forcing(mms_poly_forcing, lam),
        expected={"errors": (9.02e-3, 2.27e-3, 2.35e-4, 1.43e-4, 3.49e-5),
                  "eoc": (1.9880, 1.9905, 2.0020, 2.0412)},
        desk={"triangles": 20000}, ladder=(0.5, 0.25, 0.125, 0.0625),
    )
    p["spatial-eoc"] = ExperimentPreset(
        name="spatial-eoc", polygon=tuple(rectangle(0.0, 2.0, 0.0, 2.0)), mesh_kind="structured",
        triangles=32768, bc="dirichlet", lam=lam, degree=1, k=2e-5, T_final=0.1,
        initial=mms_trig, exact=mms_trig, forcing=_forcing(mms_trig_forcing, lam),
        desk={"k": 1e-3, "T_final": 0.01, "ladder": (32, 128, 512, 2048, 8192)},
        ladder=(32, 128, 512, 2048, 8192, 32768),
    )
    bn = SolitonParams(eta=2.0, xi=2.0)
    p["bright-neumann"] = ExperimentPreset(
        name="bright-neumann", polygon=tuple(rectangle(-5.0, 5.0, -1.0, 1.0)), mesh_kind="delaunay",
        triangles=74496, bc="neumann", lam=2.0, degree=2, k=5e-3, T_final=3.0,
        initial=partial(bright_soliton, p=bn), exact=partial(bright_soliton, p=bn),
        soliton=bn, soliton_kind="bright",
        expected={"mass": 7.9999999, "energy": 10.5},
        desk={"triangles": 8000, "k": 1e-2, "T_final": 1.0},
    )
    bm = SolitonParams(eta=1.0, xi=1.0)
    p["bright-mixed"] = ExperimentPreset(
        name="bright-mixed", polygon=tuple(rectangle(-10.0, 10.0, -1.0, 1.0)), mesh_kind="delaunay",
        triangles=74241, bc="mixed", lam=2.0, degree=2, k=2.5e-3, T_final=10.0,
        initial=partial(bright_soliton, p=bm), exact=partial(bright_soliton, p=bm),
        soliton=bm, soliton_kind="bright",
        expected={"mass": 3.9999999, "energy": 1.3333},
        desk={"triangles": 8000, "k": 1e-2, "T_final": 2.0},
    )
    dn = SolitonParams(eta=1.0, xi=PI / 4)
    p["dark-neumann"] = ExperimentPreset(
        name="dark-neumann", polygon=tuple(rectangle(-5.0, 5.0, -1.0, 1.0)), mesh_kind="delaunay",
        triangles=18624, bc="neumann", lam=-2.0, degree=2, k=5e-2, T_final=15.0,
        initial=partial(dark_soliton, p=dn), exact=partial(dark_soliton, p=dn),
        soliton=dn, soliton_kind="dark",
        expected={"mass": 17.1763733098, "energy": 8.119},
        desk={"triangles": 4000},
    )
    # same modulus profile as dark-neumann, launched towards the slanted wall
    dd = SolitonParams(eta=1.0, xi=3 * PI / 4)
    p["dark-diagonal"] = ExperimentPreset(
        name="dark-diagonal", polygon=((-8.0, -1.0), (-7.0, 1.0), (8.0, 1.0), (8.0, -1.0)),
        mesh_kind="delaunay", triangles=28592, bc="neumann", lam=-2.0, degree=2, k=5e-2,
        T_final=15.0, initial=partial(dark_soliton, p=dd), soliton=dd, soliton_kind="dark",
        expected={"mass": 28.1716833830, "energy": 13.61},
        desk={"triangles": 10000},
    )
    return p


PRESETS = _make_presets()


class UnknownPresetError(KeyError):
    def __str__(self):
        return f"unknown preset {self.args[0]!r}; available: {', '.join(sorted(PRESETS))}"


def preset(name: str) -> ExperimentPreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise UnknownPresetError(name) from None

"""Lagrange P1/P2 finite elements on triangle meshes.

Dirichlet conditions are imposed by eliminating constrained degrees of
freedom: matrices and vectors live on the free DOFs only, and constrained
coefficients are implicitly zero.

Local DOF order is vertices 0, 1, 2 followed (for P2) by the midpoints of
edges (0,1), (1,2), (2,0). Global numbering puts all vertices first, then
edges in the order of :attr:`Mesh.edges`.
"""
from __future__ import annotations

from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import scipy.sparse as sp

from .linalg import Factorization, SolverConfig
from .mesh import DIRICHLET, Mesh
from .quadrature import QuadratureRule, triangle_rule

# quadrature exactness per element degree: the weighted mass integrand has degree 3r
QUADRATURE_DEGREE = {1: 4, 2: 6}
ERROR_QUADRATURE_DEGREE = 10


class UnsupportedDegreeError(ValueError):
    pass


class IncompatibleSpaceError(ValueError):
    pass


class OutsideDomainError(ValueError):
    pass


# -- reference basis --------------------------------------------------------

_GRAD_BARY = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
_P2_EDGES = ((0, 1), (1, 2), (2, 0))


def basis_values(degree: int, bary) -> np.ndarray:
    """(n, nloc) basis values at barycentric points ``bary`` (n, 3)."""
    lam = np.atleast_2d(bary)
    if degree == 1:
        return lam.copy()
    vertex = lam * (2.0 * lam - 1.0)
    edge = np.column_stack([4.0 * lam[:, a] * lam[:, b] for a, b in _P2_EDGES])
    return np.hstack([vertex, edge])


def basis_gradients(degree: int, bary) -> np.ndarray:
    """(n, nloc, 2) gradients with respect to reference coordinates."""
    lam = np.atleast_2d(bary)
    n = len(lam)
    if degree == 1:
        return np.broadcast_to(_GRAD_BARY, (n, 3, 2)).copy()
    out = np.empty((n, 6, 2))
    for i in range(3):
        out[:, i] = (4.0 * lam[:, i] - 1.0)[:, None] * _GRAD_BARY[i]
    for k, (a, b) in enumerate(_P2_EDGES):
        out[:, 3 + k] = 4.0 * (lam[:, b, None] * _GRAD_BARY[a] + lam[:, a, None] * _GRAD_BARY[b])
    return out


class _Pattern:
    """Deterministic scatter of element matrices into one CSR pattern."""

    def __init__(self, local_to_row: np.ndarray, n: int):
        nloc = local_to_row.shape[1]
        rows = np.repeat(local_to_row, nloc, axis=1).ravel()
        cols = np.tile(local_to_row, (1, nloc)).ravel()
        keep = (rows >= 0) & (cols >= 0)
        keys = rows[keep].astype(np.int64) * n + cols[keep]
        uniq, inverse = np.unique(keys, return_inverse=True)
        self.n = n
        self.keep = keep
        self.inverse = inverse
        self.indices = (uniq % n).astype(np.int32)
        self.indptr = np.searchsorted(uniq // n, np.arange(n + 1)).astype(np.int32)
        self.nnz = len(uniq)

    def data(self, local: np.ndarray) -> np.ndarray:
        vals = local.reshape(-1)[self.keep]
        return np.bincount(self.inverse, weights=vals, minlength=self.nnz)

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))


# -- spaces -------------------------------------------------------------------

class FESpace:
    """Continuous degree-``r`` Lagrange space on ``mesh``."""

    def __init__(self, mesh: Mesh, degree: int):
        if degree not in (1, 2):
            raise UnsupportedDegreeError(f"degree must be 1 or 2, got {degree!r}")
        self.mesh = mesh
        self.degree = degree
        nv = len(mesh.points)
        if degree == 1:
            self.dof_map = mesh.triangles.copy()
            self.dof_coords = mesh.points.copy()
        else:
            self.dof_map = np.hstack([mesh.triangles, nv + mesh.triangle_edges])
            mid = 0.5 * (mesh.points[mesh.edges[:, 0]] + mesh.points[mesh.edges[:, 1]])
            self.dof_coords = np.vstack([mesh.points, mid])
        self.n_dofs = len(self.dof_coords)

        constrained = np.zeros(self.n_dofs, dtype=bool)
        constrained[mesh.dirichlet_vertices] = True
        if degree == 2:
            d_edges = mesh.boundary_edges[mesh.boundary_tags == DIRICHLET]
            if len(d_edges):
                n = nv
                keys = mesh.edges[:, 0] * n + mesh.edges[:, 1]
                lo, hi = d_edges.min(axis=1), d_edges.max(axis=1)
                constrained[nv + np.searchsorted(keys, lo * n + hi)] = True
        self.free_dofs = np.nonzero(~constrained)[0]
        self.free_index = np.full(self.n_dofs, -1, dtype=np.int64)
        self.free_index[self.free_dofs] = np.arange(len(self.free_dofs))
        self.n_free = len(self.free_dofs)
        for arr in (self.dof_map, self.dof_coords, self.free_dofs, self.free_index):
            arr.setflags(write=False)
        self.rule = triangle_rule(QUADRATURE_DEGREE[degree])

    def __repr__(self):
        return f"FESpace(P{self.degree}, dofs={self.n_dofs}, free={self.n_free})"

    @property
    def nloc(self) -> int:
        return self.dof_map.shape[1]

    # geometry ---------------------------------------------------------------

    @cached_property
    def _jacobians(self):
        p = self.mesh.points[self.mesh.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # columns are edge vectors
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        inv = np.empty_like(J)
        inv[:, 0, 0] = J[:, 1, 1] / det
        inv[:, 0, 1] = -J[:, 0, 1] / det
        inv[:, 1, 0] = -J[:, 1, 0] / det
        inv[:, 1, 1] = J[:, 0, 0] / det
        return p[:, 0], J, 0.5 * det, inv

    @property
    def areas(self) -> np.ndarray:
        return self._jacobians[2]

    def quadrature_points(self, rule: QuadratureRule | None = None) -> np.ndarray:
        """(T, nq, 2) physical quadrature points."""
        rule = rule or self.rule
        origin, J, _, _ = self._jacobians
        return origin[:, None, :] + np.einsum("eij,qj->eqi", J, rule.reference_xy)

    def values(self, rule: QuadratureRule | None = None) -> np.ndarray:
        return basis_values(self.degree, (rule or self.rule).points)

    def gradients(self, rule: QuadratureRule | None = None) -> np.ndarray:
        """(T, nq, nloc, 2) physical basis gradients."""
        ref = basis_gradients(self.degree, (rule or self.rule).points)
        return np.einsum("qlm,emk->eqlk", ref, self._jacobians[3])

    @cached_property
    def _free_pattern(self) -> _Pattern:
        return _Pattern(self.free_index[self.dof_map], self.n_free)

    @cached_property
    def _full_pattern(self) -> _Pattern:
        return _Pattern(self.dof_map, self.n_dofs)

    def pattern(self, full: bool = False) -> _Pattern:
        return self._full_pattern if full else self._free_pattern

    # element kernels ----------------------------------------------------------

    def local_mass(self, weight: np.ndarray | None = None) -> np.ndarray:
        """(T, nloc, nloc) element matrices of int w * phi_i * phi_j."""
        phi = self.values()
        wq = self.rule.weights
        if weight is None:
            ref = np.einsum("q,qi,qj->ij", wq, phi, phi)
            return self.areas[:, None, None] * ref[None]
        return np.einsum("e,eq,q,qi,qj->eij", self.areas, weight, wq, phi, phi, optimize=True)

    def local_stiffness(self) -> np.ndarray:
        grad = self.gradients()
        return np.einsum("e,q,eqik,eqjk->eij", self.areas, self.rule.weights, grad, grad, optimize=True)

    def local_load(self, qvalues: np.ndarray) -> np.ndarray:
        """(T, nloc) element vectors of int f * phi_i from quadrature values."""
        return np.einsum("e,q,eq,qi->ei", self.areas, self.rule.weights, qvalues, self.values(), optimize=True)

    def scatter_vector(self, local: np.ndarray) -> np.ndarray:
        rows = self.free_index[self.dof_map].ravel()
        keep = rows >= 0
        vals = local.reshape(-1)[keep]
        if np.iscomplexobj(vals):
            re = np.bincount(rows[keep], weights=vals.real, minlength=self.n_free)
            im = np.bincount(rows[keep], weights=vals.imag, minlength=self.n_free)
            return re + 1j * im
        return np.bincount(rows[keep], weights=vals, minlength=self.n_free)

    # cached operators ---------------------------------------------------------

    @cached_property
    def mass_matrix(self) -> sp.csr_matrix:
        pat = self.pattern()
        return pat.matrix(pat.data(self.local_mass()))

    @cached_property
    def stiffness_matrix(self) -> sp.csr_matrix:
        pat = self.pattern()
        return pat.matrix(pat.data(self.local_stiffness()))

    def mass_solver(self, config: SolverConfig = SolverConfig()) -> Factorization:
        key = (config.method, config.rel_tolerance, config.max_iterations)
        cache = self.__dict__.setdefault("_mass_solvers", {})
        if key not in cache:
            cache[key] = Factorization(self.mass_matrix, config, spd=True)
        return cache[key]


def build_space(mesh: Mesh, degree: int) -> FESpace:
    return FESpace(mesh, degree)


# -- fields -------------------------------------------------------------------

class Field:
    """Finite element function given by its free-DOF coefficients."""

    def __init__(self, space: FESpace, coeffs):
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (space.n_free,):
            raise ValueError(f"expected {space.n_free} coefficients, got shape {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, space: FESpace, dtype=float) -> "Field":
        return cls(space, np.zeros(space.n_free, dtype=dtype))

    @property
    def is_complex(self) -> bool:
        return np.iscomplexobj(self.coeffs)

    def full(self) -> np.ndarray:
        out = np.zeros(self.space.n_dofs, dtype=self.coeffs.dtype)
        out[self.space.free_dofs] = self.coeffs
        return out

    def element_coeffs(self) -> np.ndarray:
        return self.full()[self.space.dof_map]

    def at_quadrature(self, rule: QuadratureRule | None = None) -> np.ndarray:
        """(T, nq) values at the quadrature points of ``rule``."""
        phi = self.space.values(rule)
        return np.einsum("el,ql->eq", self.element_coeffs(), phi)

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"Field({kind}, {self.space!r})"


def _check_same_mesh(space: FESpace, field: Field):
    if field.space.mesh is not space.mesh:
        raise IncompatibleSpaceError("field and space live on different meshes")


def assemble_mass(space: FESpace, full: bool = False) -> sp.csr_matrix:
    """Mass matrix on the free DOFs (or on all DOFs with ``full=True``)."""
    if full:
        pat = space.pattern(full=True)
        return pat.matrix(pat.data(space.local_mass()))
    return space.mass_matrix.copy()


def assemble_stiffness(space: FESpace, full: bool = False) -> sp.csr_matrix:
    if full:
        pat = space.pattern(full=True)
        return pat.matrix(pat.data(space.local_stiffness()))
    return space.stiffness_matrix.copy()


def weighted_mass_data(space: FESpace, phi: Field) -> np.ndarray:
    """CSR data of the weighted mass matrix, sharing the pattern of the mass matrix."""
    _check_same_mesh(space, phi)
    if np.iscomplexobj(phi.coeffs):
        raise IncompatibleSpaceError("weight field must be real")
    qvals = phi.at_quadrature(space.rule) if phi.space is space else _values_on(phi, space)
    return space.pattern().data(space.local_mass(qvals))


def _values_on(field: Field, space: FESpace) -> np.ndarray:
    bary = space.rule.points
    phi = basis_values(field.space.degree, bary)
    return np.einsum("el,ql->eq", field.element_coeffs(), phi)


def assemble_weighted_mass(space: FESpace, phi: Field) -> sp.csr_matrix:
    """Matrix of int phi_h * phi_i * phi_j over the free DOFs."""
    return space.pattern().matrix(weighted_mass_data(space, phi))


def _eval_pointwise(f, x, y, t):
    out = f(x, y, t)
    return np.broadcast_to(np.asarray(out), x.shape)


def load_vector(space: FESpace, f: Callable, t: float = 0.0) -> np.ndarray:
    """Vector of int f(x, y, t) * phi_i over the free DOFs."""
    q = space.quadrature_points()
    return space.scatter_vector(space.local_load(_eval_pointwise(f, q[..., 0], q[..., 1], t)))


def load_from_quadrature(space: FESpace, qvalues: np.ndarray) -> np.ndarray:
    return space.scatter_vector(space.local_load(qvalues))


def l2_project(space: FESpace, f: Callable, t: float = 0.0,
               solver: SolverConfig = SolverConfig()) -> Field:
    """L2 projection of ``f(x, y, t)`` onto the space."""
    b = load_vector(space, f, t)
    return Field(space, space.mass_solver(solver).solve(b))


# -- point evaluation -------------------------------------------------------

def evaluate(field: Field, p) -> complex | float:
    hit = field.space.mesh.locate(p)
    if hit is None:
        raise OutsideDomainError(f"point {tuple(p)} is outside the mesh")
    t, lam = hit
    phi = basis_values(field.space.degree, lam[None])[0]
    val = field.full()[field.space.dof_map[t]] @ phi
    return val.item()


def evaluate_many(field: Field, points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    full = field.full()
    out = np.empty(len(points), dtype=full.dtype)
    mesh, space = field.space.mesh, field.space
    for i, p in enumerate(points):
        hit = mesh.locate(p)
        if hit is None:
            raise OutsideDomainError(f"point {tuple(p)} is outside the mesh")
        t, lam = hit
        out[i] = full[space.dof_map[t]] @ basis_values(space.degree, lam[None])[0]
    return out


# -- norms ------------------------------------------------------------------

class Norms(NamedTuple):
    l2: float
    h1_semi: float
    l4: float


def quadratic_form(A, c) -> float:
    return float(np.real(np.vdot(c, A @ c)))


def l4_power(field: Field) -> float:
    """int |u_h|^4 by the space's quadrature rule."""
    v = np.abs(field.at_quadrature()) ** 2
    return float(np.einsum("e,q,eq->", field.space.areas, field.space.rule.weights, v * v))


def norms(field: Field) -> Norms:
    space = field.space
    l2 = np.sqrt(max(quadratic_form(space.mass_matrix, field.coeffs), 0.0))
    h1 = np.sqrt(max(quadratic_form(space.stiffness_matrix, field.coeffs), 0.0))
    return Norms(float(l2), float(h1), l4_power(field) ** 0.25)


def l2_error(field: Field, exact: Callable, t: float = 0.0, degree: int = ERROR_QUADRATURE_DEGREE) -> float:
    """||u_h - u(., t)|| with a high-order rule."""
    space = field.space
    rule = triangle_rule(degree)
    q = space.quadrature_points(rule)
    diff = field.at_quadrature(rule) - _eval_pointwise(exact, q[..., 0], q[..., 1], t)
    return float(np.sqrt(np.einsum("e,q,eq->", space.areas, rule.weights, np.abs(diff) ** 2)))


def interpolate(space: FESpace, f: Callable, t: float = 0.0) -> Field:
    """Nodal interpolant (values at free DOF coordinates)."""
    xy = space.dof_coords[space.free_dofs]
    vals = _eval_pointwise(f, xy[:, 0], xy[:, 1], t)
    return Field(space, np.array(vals))

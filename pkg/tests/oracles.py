"""Dense brute-force references, written independently of the package kernels.

Basis functions are recovered per element from a Vandermonde matrix in
physical coordinates and integrated with a collapsed Gauss-Legendre rule,
so neither the reference basis nor the symmetric quadrature of the package
is reused.
"""
import numpy as np

from nlsrelax.mesh import DIRICHLET

N_GAUSS = 8  # exact for total degree 14 on the triangle


def _gauss_triangle(n=N_GAUSS):
    g, w = np.polynomial.legendre.leggauss(n)
    u = 0.5 * (g + 1)
    wu = 0.5 * w
    pts, wts = [], []
    for ui, wi in zip(u, wu):
        for vj, wj in zip(u, wu):
            pts.append((ui, vj * (1 - ui)))
            wts.append(wi * wj * (1 - ui))
    return np.array(pts), np.array(wts)  # weights sum to 1/2


REF_PTS, REF_WTS = _gauss_triangle()


def element_nodes(points, tri, degree):
    v = points[tri]
    if degree == 1:
        return v
    mids = [(v[0] + v[1]) / 2, (v[1] + v[2]) / 2, (v[2] + v[0]) / 2]
    return np.vstack([v, mids])


def monomials(xy, degree):
    x, y = xy[:, 0], xy[:, 1]
    one = np.ones_like(x)
    if degree == 1:
        return np.column_stack([one, x, y])
    return np.column_stack([one, x, y, x * x, x * y, y * y])


def monomial_gradients(xy, degree):
    x, y = xy[:, 0], xy[:, 1]
    z, one = np.zeros_like(x), np.ones_like(x)
    gx = [z, one, z] + ([2 * x, y, z] if degree == 2 else [])
    gy = [z, z, one] + ([z, x, 2 * y] if degree == 2 else [])
    return np.stack([np.column_stack(gx), np.column_stack(gy)], axis=-1)  # (nq, nmono, 2)


def element_quadrature(points, tri):
    a, b, c = points[tri]
    J = np.column_stack([b - a, c - a])
    det = abs(np.linalg.det(J))
    xy = a + REF_PTS @ J.T
    return xy, REF_WTS * det


def element_basis(points, tri, degree, xy):
    """Values (nq, nloc) and gradients (nq, nloc, 2) of the nodal basis at ``xy``."""
    nodes = element_nodes(points, tri, degree)
    C = np.linalg.inv(monomials(nodes, degree))  # column i: coefficients of basis i
    vals = monomials(xy, degree) @ C
    grads = np.einsum("qmk,mi->qik", monomial_gradients(xy, degree), C)
    return vals, grads


def free_mask(space):
    """DOFs not lying on a Dirichlet boundary segment, decided geometrically."""
    mesh = space.mesh
    free = np.ones(space.n_dofs, dtype=bool)
    for (a, b), tag in zip(mesh.boundary_edges, mesh.boundary_tags):
        if tag != DIRICHLET:
            continue
        pa, pb = mesh.points[a], mesh.points[b]
        d = pb - pa
        for i, p in enumerate(space.dof_coords):
            r = p - pa
            cross = d[0] * r[1] - d[1] * r[0]
            s = (r @ d) / (d @ d)
            if abs(cross) <= 1e-12 * (d @ d) and -1e-12 <= s <= 1 + 1e-12:
                free[i] = False
    return free


def _assemble(space, kernel):
    n = space.n_dofs
    out = np.zeros((n, n), dtype=complex)
    for t, tri in enumerate(space.mesh.triangles):
        xy, w = element_quadrature(space.mesh.points, tri)
        vals, grads = element_basis(space.mesh.points, tri, space.degree, xy)
        dofs = space.dof_map[t]
        local = kernel(t, xy, w, vals, grads)
        for i in range(len(dofs)):
            for j in range(len(dofs)):
                out[dofs[i], dofs[j]] += local[i, j]
    keep = free_mask(space)
    return out[np.ix_(keep, keep)]


def field_at(space, full_coeffs, t, xy):
    tri = space.mesh.triangles[t]
    vals, _ = element_basis(space.mesh.points, tri, space.degree, xy)
    return vals @ full_coeffs[space.dof_map[t]]


def dense_mass(space):
    return _assemble(space, lambda t, xy, w, v, g: np.einsum("q,qi,qj->ij", w, v, v)).real


def dense_stiffness(space):
    return _assemble(space, lambda t, xy, w, v, g: np.einsum("q,qik,qjk->ij", w, g, g)).real


def dense_weighted_mass(space, phi_full):
    def kernel(t, xy, w, v, g):
        ph = field_at(space, phi_full, t, xy)
        return np.einsum("q,q,qi,qj->ij", w, ph, v, v)
    return _assemble(space, kernel).real


def dense_load(space, f, time=0.0):
    out = np.zeros(space.n_dofs, dtype=complex)
    for t, tri in enumerate(space.mesh.triangles):
        xy, w = element_quadrature(space.mesh.points, tri)
        vals, _ = element_basis(space.mesh.points, tri, space.degree, xy)
        fv = np.asarray(f(xy[:, 0], xy[:, 1], time)) * np.ones(len(xy))
        out[space.dof_map[t]] += vals.T @ (w * fv)
    return out[free_mask(space)]


def dense_modulus_load(space, U_full):
    """Vector of int |U|^2 chi_i over the free DOFs."""
    out = np.zeros(space.n_dofs)
    for t, tri in enumerate(space.mesh.triangles):
        xy, w = element_quadrature(space.mesh.points, tri)
        vals, _ = element_basis(space.mesh.points, tri, space.degree, xy)
        u = vals @ U_full[space.dof_map[t]]
        out[space.dof_map[t]] += vals.T @ (w * np.abs(u) ** 2)
    return out[free_mask(space)]


def full_vector(space, free_coeffs):
    out = np.zeros(space.n_dofs, dtype=np.result_type(free_coeffs))
    out[free_mask(space)] = free_coeffs
    return out


def dense_phi_update(space, U, Phi):
    M = dense_mass(space)
    b = dense_modulus_load(space, full_vector(space, U))
    return np.linalg.solve(M, 2 * b - M @ Phi)


def dense_step(space, U, Phi, k, lam, t_n=0.0, forcing=None):
    """One relaxation Crank-Nicolson step with dense matrices; returns (U_new, Phi_new)."""
    M = dense_mass(space)
    S = dense_stiffness(space)
    phi_new = dense_phi_update(space, U, Phi)
    W = dense_weighted_mass(space, full_vector(space, phi_new))
    A = (1j / k) * M - 0.5 * S + 0.5 * lam * W
    B = (1j / k) * M + 0.5 * S - 0.5 * lam * W
    rhs = B @ U
    if forcing is not None:
        rhs = rhs + dense_load(space, forcing, t_n + 0.5 * k)
    return np.linalg.solve(A, rhs), phi_new

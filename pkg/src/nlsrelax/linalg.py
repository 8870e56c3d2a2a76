"""Sparse CSR storage and the linear solvers used by the time stepper.

Matrices are :class:`scipy.sparse.csr_matrix` with canonical (sorted,
duplicate-free) indices. Every solve recomputes its relative residual and
raises :class:`SolverError` if the tolerance is missed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DIRECT = "direct"
ITERATIVE = "iterative"


class SolverError(RuntimeError):
    """Linear solve failed; ``residual`` is the last relative residual seen."""

    def __init__(self, message: str, residual: float = float("nan")):
        self.residual = residual
        super().__init__(f"{message} (relative residual {residual:.3e})")


@dataclass(frozen=True)
class SolverConfig:
    method: str = DIRECT
    rel_tolerance: float = 1e-12
    max_iterations: int = 1000

    def __post_init__(self):
        if self.method not in (DIRECT, ITERATIVE):
            raise ValueError(f"unknown solver method {self.method!r}")
        if not 0.0 < self.rel_tolerance < 1.0:
            raise ValueError("rel_tolerance must lie in (0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


def as_csr(A) -> sp.csr_matrix:
    A = sp.csr_matrix(A)
    A.sum_duplicates()
    A.sort_indices()
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    return A


def spmv(A, x) -> np.ndarray:
    x = np.asarray(x)
    if A.shape[1] != x.shape[0]:
        raise ValueError(f"dimension mismatch: {A.shape} times {x.shape}")
    return A @ x


def relative_residual(A, x, b) -> float:
    nb = np.linalg.norm(b)
    r = np.linalg.norm(A @ x - b)
    return float(r / nb) if nb > 0 else float(r)


class Factorization:
    """Reusable solver for one matrix.

    The direct path keeps a sparse LU (COLAMD ordering) and applies a few
    steps of iterative refinement when the first solve misses the tolerance.
    The iterative path runs Jacobi-preconditioned CG (real symmetric) or
    BiCGStab (complex), warm-started from ``x0`` when given.
    """

    def __init__(self, A, config: SolverConfig = SolverConfig(), spd: bool = False):
        self.A = as_csr(A)
        self.config = config
        self.spd = spd
        self._lu = None
        if config.method == DIRECT:
            try:
                self._lu = spla.splu(self.A.tocsc(), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SolverError(f"factorization failed: {exc}") from exc
        else:
            d = self.A.diagonal()
            if np.any(d == 0):
                raise SolverError("zero diagonal entry, Jacobi preconditioner undefined")
            self._jacobi = spla.LinearOperator(self.A.shape, matvec=lambda v: v / d, dtype=self.A.dtype)

    def solve(self, b, x0=None) -> np.ndarray:
        b = np.asarray(b)
        if b.shape[0] != self.A.shape[0]:
            raise ValueError(f"dimension mismatch: {self.A.shape} and {b.shape}")
        if not np.any(b):
            return np.zeros(b.shape, dtype=np.result_type(self.A.dtype, b.dtype))
        tol = self.config.rel_tolerance
        if self._lu is not None:
            x = self._lu_solve(b)
            res = relative_residual(self.A, x, b)
            for _ in range(3):
                if res <= tol:
                    break
                x = x + self._lu_solve(b - self.A @ x)
                res = relative_residual(self.A, x, b)
        else:
            x, res = self._iterate(b, x0)
        if not np.isfinite(res) or res > tol:
            raise SolverError("linear solve missed its tolerance", res)
        return x

    def _lu_solve(self, b):
        if np.iscomplexobj(b) and not np.iscomplexobj(self.A):
            return self._lu.solve(np.ascontiguousarray(b.real)) + 1j * self._lu.solve(np.ascontiguousarray(b.imag))
        return self._lu.solve(b)

    def _iterate(self, b, x0):
        cfg = self.config
        if not np.any(b):
            return np.zeros_like(b), 0.0
        if self.spd and np.iscomplexobj(b) and not np.iscomplexobj(self.A):
            x0r, x0i = (None, None) if x0 is None else (x0.real, x0.imag)
            xr, _ = self._iterate(b.real.copy(), x0r)
            xi, _ = self._iterate(b.imag.copy(), x0i)
            x = xr + 1j * xi
            return x, relative_residual(self.A, x, b)
        is_real = not np.iscomplexobj(self.A) and not np.iscomplexobj(b)
        method = spla.cg if (self.spd and is_real) else spla.bicgstab
        # the solver's own stopping test is compared against the true residual below
        x, info = method(self.A, b, x0=x0, rtol=0.1 * cfg.rel_tolerance, atol=0.0,
                         maxiter=cfg.max_iterations, M=self._jacobi)
        res = relative_residual(self.A, x, b)
        if info != 0 and res > cfg.rel_tolerance:
            raise SolverError(f"iterative solver stopped without converging (info={info})", res)
        return x, res


def solve_spd(A, b, config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Solve a real symmetric positive definite system."""
    return Factorization(A, config, spd=True).solve(b)


def solve_complex(A, b, config: SolverConfig = SolverConfig()) -> np.ndarray:
    """Solve a general (in practice complex symmetric) system."""
    return Factorization(A, config).solve(b)

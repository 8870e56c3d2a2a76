"""Relaxation Crank-Nicolson time stepping for i u_t + Lap u + lam |u|^2 u = f.

Each step first updates the real auxiliary field

    M (phi_new + phi_old) / 2 = <|U^n|^2, chi>

and then solves the linear system

    [(i/k) M - S/2 + (lam/2) W(phi_new)] U^{n+1}
        = [(i/k) M + S/2 - (lam/2) W(phi_new)] U^n + F(t_n + k/2),

with M the mass matrix, S the stiffness matrix and W the phi-weighted mass
matrix. Because phi is real the scheme conserves ||U||^2 exactly when f = 0.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable

import numpy as np

from . import fem
from .fem import Field, FESpace
from .linalg import ITERATIVE, Factorization, SolverConfig, SolverError

log = logging.getLogger(__name__)

MAX_RECORDS = 500


class StepError(SolverError):
    """Linear solve failure inside a time step."""

    def __init__(self, n: int, cause: SolverError):
        self.n = n
        self.records: list[DiagnosticsRecord] = []
        super().__init__(f"step {n} failed: {cause.args[0]}", cause.residual)


class BlowupError(RuntimeError):
    """Non-finite values appeared in the solution."""

    def __init__(self, n: int, t: float):
        self.n = n
        self.t = t
        self.records: list[DiagnosticsRecord] = []
        super().__init__(f"non-finite solution at step {n} (t={t:g})")


@dataclass(frozen=True)
class StepperConfig:
    k: float
    lam: float
    T_final: float
    solver: SolverConfig = SolverConfig()
    forcing: Callable | None = None   # f(x, y, t), complex
    record_every: int | None = None

    def __post_init__(self):
        if not (self.k > 0 and math.isfinite(self.k)):
            raise ValueError(f"time step must be positive, got {self.k}")
        if not self.T_final >= self.k * (1 - 1e-12):
            raise ValueError(f"T_final={self.T_final} is shorter than one step k={self.k}")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be at least 1")

    @property
    def n_steps(self) -> int:
        return int(math.floor(self.T_final / self.k + 0.5))

    @property
    def cadence(self) -> int:
        if self.record_every is not None:
            return self.record_every
        return max(1, math.ceil(self.n_steps / (MAX_RECORDS - 2)))


@dataclass(frozen=True)
class RelaxationState:
    U: Field        # U^n
    Phi: Field      # Phi^{n-1/2}
    n: int = 0
    k: float = 0.0

    @property
    def t(self) -> float:
        return self.n * self.k

    @property
    def space(self) -> FESpace:
        return self.U.space


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    mass: float
    energy: float


class RelaxationCN:
    """Time stepper bound to one space and configuration.

    Mass and stiffness matrices are assembled once; the step matrix is
    rebuilt and factorised each step since it depends on phi.
    """

    def __init__(self, space: FESpace, config: StepperConfig):
        self.space = space
        self.config = config
        self.M = space.mass_matrix
        self.S = space.stiffness_matrix
        # M, S and W share one sparsity pattern, so combinations act on .data
        self._pattern = space.pattern()
        self._mass_solver = space.mass_solver(config.solver)

    # -- pieces of one step ---------------------------------------------------

    def init_state(self, u0: Callable) -> RelaxationState:
        return init_state(self.space, u0, self.config.solver, k=self.config.k)

    def phi_update(self, state: RelaxationState) -> Field:
        rhs = 2.0 * fem.load_from_quadrature(self.space, np.abs(state.U.at_quadrature()) ** 2)
        rhs -= self.M @ state.Phi.coeffs
        return Field(self.space, self._mass_solver.solve(rhs, x0=state.Phi.coeffs))

    def step_operators(self, phi: Field, dt: float):
        """(A, B) with A U^{n+1} = B U^n + F for step size ``dt``."""
        lam = self.config.lam
        w = fem.weighted_mass_data(self.space, phi) if lam != 0.0 else 0.0
        pat = self._pattern
        m_data, s_data = self.M.data, self.S.data
        a = (1j / dt) * m_data - 0.5 * s_data + 0.5 * lam * w
        b = (1j / dt) * m_data + 0.5 * s_data - 0.5 * lam * w
        return pat.matrix(a), pat.matrix(b)

    def advance(self, U: np.ndarray, phi: Field, dt: float, t_mid: float) -> np.ndarray:
        A, B = self.step_operators(phi, dt)
        rhs = B @ U
        if self.config.forcing is not None:
            rhs = rhs + fem.load_vector(self.space, self.config.forcing, t_mid)
        if not np.all(np.isfinite(rhs)):
            raise FloatingPointError("non-finite right-hand side")
        solver = Factorization(A, self.config.solver)
        x0 = U if self.config.solver.method == ITERATIVE else None
        return solver.solve(rhs, x0=x0)

    def step(self, state: RelaxationState) -> RelaxationState:
        k = self.config.k
        if not np.all(np.isfinite(state.U.coeffs)):
            raise BlowupError(state.n, state.t)
        t_mid = state.n * k + 0.5 * k
        try:
            phi = self.phi_update(state)
            U = self.advance(state.U.coeffs, phi, k, t_mid)
        except SolverError as exc:
            raise StepError(state.n, exc) from exc
        except FloatingPointError:
            raise BlowupError(state.n, state.t) from None
        new = RelaxationState(Field(self.space, U), phi, state.n + 1, k)
        if not np.all(np.isfinite(U)):
            raise BlowupError(new.n, new.t)
        return new

    # -- diagnostics and the time loop ----------------------------------------

    def diagnostics(self, state: RelaxationState) -> DiagnosticsRecord:
        c = state.U.coeffs
        mass = fem.quadratic_form(self.M, c)
        grad2 = fem.quadratic_form(self.S, c)
        energy = 0.5 * grad2 - 0.25 * self.config.lam * fem.l4_power(state.U)
        return DiagnosticsRecord(state.t, mass, energy)

    def run(self, state: RelaxationState, observers: Iterable[Callable] = ()) -> tuple[RelaxationState, list[DiagnosticsRecord]]:
        """Advance ``n_steps`` steps, recording diagnostics every ``cadence`` steps.

        ``observers`` are called as ``obs(state)`` on the initial state and
        after every step. On failure the raised error carries the records
        collected so far in its ``records`` attribute.
        """
        cfg = self.config
        observers = list(observers)
        state = replace(state, k=cfg.k)
        records = [self.diagnostics(state)]
        for obs in observers:
            obs(state)
        n_steps, every = cfg.n_steps, cfg.cadence
        for i in range(1, n_steps + 1):
            try:
                state = self.step(state)
            except (StepError, BlowupError) as exc:
                exc.records = records
                raise
            if i % every == 0 or i == n_steps:
                rec = self.diagnostics(state)
                records.append(rec)
                log.debug("t=%.4f mass=%.12g energy=%.8g", rec.t, rec.mass, rec.energy)
            for obs in observers:
                obs(state)
        return state, records


# -- functional interface -------------------------------------------------------

def init_state(space: FESpace, u0: Callable, solver: SolverConfig = SolverConfig(), k: float = 0.0) -> RelaxationState:
    """U^0 = P u0 and Phi^{-1/2} = P |u0|^2."""
    U = fem.l2_project(space, lambda x, y, t: np.asarray(u0(x, y, t), dtype=complex), 0.0, solver)
    Phi = fem.l2_project(space, lambda x, y, t: np.abs(u0(x, y, t)) ** 2, 0.0, solver)
    return RelaxationState(U, Field(space, np.real(Phi.coeffs).astype(float)), 0, k)


def phi_update(state: RelaxationState, solver: SolverConfig = SolverConfig()) -> Field:
    return RelaxationCN(state.space, StepperConfig(k=1.0, lam=0.0, T_final=1.0, solver=solver)).phi_update(state)


def step(state: RelaxationState, config: StepperConfig) -> RelaxationState:
    return RelaxationCN(state.space, config).step(replace(state, k=config.k))


def run(state: RelaxationState, config: StepperConfig, observers: Iterable[Callable] = ()):
    return RelaxationCN(state.space, config).run(state, observers)


def diagnostics(state: RelaxationState, lam: float) -> DiagnosticsRecord:
    return RelaxationCN(state.space, StepperConfig(k=1.0, lam=lam, T_final=1.0)).diagnostics(state)

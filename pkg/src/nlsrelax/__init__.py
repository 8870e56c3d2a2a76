"""Finite element solver for the cubic nonlinear Schroedinger equation

    i u_t + Lap u + lam |u|^2 u = f

on polygonal 2-D domains, using a relaxation Crank-Nicolson scheme that
conserves the discrete mass.
"""
from .fem import FESpace, Field, build_space
from .linalg import SolverConfig, SolverError
from .mesh import Mesh, delaunay_triangulate, generate_structured
from .stepper import BlowupError, RelaxationCN, RelaxationState, StepperConfig

__version__ = "0.1.0"

__all__ = [
    "BlowupError", "FESpace", "Field", "Mesh", "RelaxationCN", "RelaxationState", "SolverConfig",
    "SolverError", "StepperConfig", "build_space", "delaunay_triangulate", "generate_structured",
]

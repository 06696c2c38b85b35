"""Stabilizer-free weak Galerkin finite elements for (-div(kappa grad) + mu)^2 u = f
on two-dimensional polytopal meshes."""

from .errors import ConfigurationError, MeshError, SolverError, WGError
from .mesh import PolytopalMesh, generate, validate
from .poly import KappaMatrix, Poly2, manufactured_rhs
from .problem import CASES, ModelCase, ModelProblem
from .study import ConvergenceTable, error_norms, run_convergence
from .system import AssembledSystem, assemble, solve
from .weakops import WGSpace, project_Qh

__version__ = "0.1.0"

__all__ = [
    "AssembledSystem",
    "CASES",
    "ConfigurationError",
    "ConvergenceTable",
    "KappaMatrix",
    "MeshError",
    "ModelCase",
    "ModelProblem",
    "Poly2",
    "PolytopalMesh",
    "SolverError",
    "WGError",
    "WGSpace",
    "assemble",
    "error_norms",
    "generate",
    "manufactured_rhs",
    "project_Qh",
    "run_convergence",
    "solve",
    "validate",
]

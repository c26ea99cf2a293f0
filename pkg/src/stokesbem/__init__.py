"""Isogeometric BEM for exterior Stokes flow with hybrid singular quadrature."""

from ._core import backend_name
from .bem import BemSystem, assemble, eval_pressure, eval_velocity, error_norms, solve_dirichlet
from .geometry import (
    SurfaceMesh,
    build_ellipsoid,
    build_sheet,
    build_single_patch_sphere,
    build_six_patch_sphere,
    classify,
)
from .kernels import eval_kernels, identity_residuals, tn_contraction
from .quadrature import (
    QuadRule,
    SchemeConfig,
    classical_gl_2d,
    duffy_rule,
    gauss_legendre_1d,
    hybrid_rules,
    integrate,
    min_distance,
    modified_gl,
    moment_fit_adjusted,
)

__version__ = "0.1.0"

__all__ = [
    "BemSystem",
    "QuadRule",
    "SchemeConfig",
    "SurfaceMesh",
    "assemble",
    "backend_name",
    "build_ellipsoid",
    "build_sheet",
    "build_single_patch_sphere",
    "build_six_patch_sphere",
    "classical_gl_2d",
    "classify",
    "duffy_rule",
    "eval_kernels",
    "eval_pressure",
    "eval_velocity",
    "error_norms",
    "gauss_legendre_1d",
    "hybrid_rules",
    "identity_residuals",
    "integrate",
    "min_distance",
    "modified_gl",
    "moment_fit_adjusted",
    "solve_dirichlet",
    "tn_contraction",
]

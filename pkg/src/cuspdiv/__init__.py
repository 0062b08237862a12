"""Weighted-divergence machinery on planar cusp domains.

Subpackages cover the cusp geometry and exact boundary distances, Whitney
decompositions and m-set checks, distance-power weights with Muckenhaupt
diagnostics and singular-family quadrature, a Newtonian-potential right
inverse of the divergence, weighted Taylor-Hood finite elements (divergence
right inverse, Stokes, inf-sup, Korn/Poincare constants), and the sweep /
rate-fitting experiments tying the pieces together.
"""

__version__ = "0.1.0"

from . import (cli, experiments, fem, geometry, mesh, potential, weights,
               whitney)
from .geometry import CuspDomain, distance, surrogate_distance
from .mesh import TriangulatedMesh, generate_graded_mesh, refine
from .weights import WeightSpec, estimate_ap_constant, weighted_lp_norm
from .whitney import WhitneyDecomposition, decompose

__all__ = [
    "__version__",
    "CuspDomain",
    "distance",
    "surrogate_distance",
    "TriangulatedMesh",
    "generate_graded_mesh",
    "refine",
    "WeightSpec",
    "estimate_ap_constant",
    "weighted_lp_norm",
    "WhitneyDecomposition",
    "decompose",
    "geometry",
    "mesh",
    "whitney",
    "weights",
    "potential",
    "fem",
    "experiments",
    "cli",
]

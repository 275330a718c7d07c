"""Full-order models: analytic manifolds and affine finite-element problems."""

from .analytic import (
    ManifoldProblem,
    analytic_manifold_1d,
    analytic_manifold_2d,
    analytic_manifold_3d,
    chebyshev_extended,
    grid_1d,
    grid_2d,
    grid_3d_ball,
    manifold_1d,
    manifold_2d,
    manifold_3d,
)
from .fem import Patch, QuadMesh, assemble, build_mesh
from .models import (
    AffineForm,
    FullOrderModel,
    build_convdiff_fom,
    build_reacdiff_fom,
    fom_output,
    fom_solve,
)

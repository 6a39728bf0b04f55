"""Incompressible 2D flow on a staggered grid with multigrid pressure solvers.

The pressure Poisson equation can be solved with plain red-black
Gauss-Seidel, additive correction multigrid (ACM), a two-level five-point
geometric scheme (GMG) or the two-level interpolated-stencil scheme (ISMG)
with aggressive 16h-32h coarsening.
"""

from .coarsening import (CoarseOperator, MgHierarchy, bilinear_eval, build_acm_hierarchy,
                         build_gmg_operator, build_ismg_operator, face_flux_x, face_flux_y,
                         prolongate_bilinear, prolongate_constant, restrict_sum)
from .cycles import (ConvergenceReport, CycleConfig, NonConvergence, PressureSolver,
                     solve_plain_gs, solve_two_level, v_cycle_acm)
from .field import (BoundaryCondition, ConfigurationError, GridSpec, MacVelocity, ScalarField,
                    apply_scalar_bc, apply_velocity_bc, padded_dims)
from .metrics import RunMetrics
from .projection import FluidState, correct, divergence, predictor, step
from .smoother import (FivePointStencil, LinearStage, NinePointStencil, SingularRowError,
                       gs_sweep_coarse, rbgs_sweep, residual)

__version__ = "0.1.0"

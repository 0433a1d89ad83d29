"""Periodic traveling capillary-gravity waves for one-phase Darcy flow."""

__version__ = "0.1.0"

from .continuation import (
    BranchPoint,
    BranchTrace,
    StepConfig,
    StopConfig,
    Termination,
    compact_map_F,
    continue_branch,
    jacobian_action,
    linearization_at_origin,
    newton_correct,
    residual,
)
from .curvature import capillary_gravity, curvature_remainder, invert_capillary_gravity, mean_curvature
from .dtn import BulkField, apply_dtn, build_workspace, dtn_remainder, reconstruct_bulk, solve_neumann
from .dynamics import EvolutionConfig, Forcing, evolve, rhs, traveling_invariance
from .errors import BottomCollisionError, DarcyWavesError, PreconditionError, SolverError
from .smallwave import PicardReport, fixed_point_map_K, solve_small_wave, surface_tension_limit
from .spectral import (
    Finite,
    FluidParams,
    GridFunction,
    Infinite,
    MultiplierSymbol,
    apply_multiplier,
    discrete_norms,
    multiplier_m,
    multiplier_m1,
)

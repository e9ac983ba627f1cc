"""Invariant attractors of the dissipative standard map and their KAM certification."""

from .bigreal import PrecisionContext, format_real, golden_diophantine, golden_mean, make_context
from .certifier import (
    ConditionReport,
    ConstantLedger,
    NormReport,
    certify,
    check_conditions,
    compute_constants,
    compute_norm_report,
    find_eps_kam,
    russmann_constant,
)
from .dsm import MapParams, TorusEmbedding, apply_map, embedding_from_u, invariance_error, jacobian, trivial_embedding
from .fourier import PeriodicFunction, analytic_norm
from .solver import (
    ContinuationConfig,
    NoConvergence,
    build_frame,
    continuation,
    newton_solve,
    newton_step,
    solve_cohomology_dissipative,
    solve_cohomology_small_divisor,
    solve_drift_system,
)

__version__ = "0.1.0"

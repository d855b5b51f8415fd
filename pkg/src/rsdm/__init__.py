"""Random submanifold descent for optimization with orthogonality constraints.

The package provides the Stiefel manifold primitives (points, tangents,
retractions), frame samplers for the random submanifold construction, a set
of benchmark problems, the solver family (full-space Riemannian descent and
the submanifold variants), and numerical verification oracles.  The `rsdm`
console script drives experiments from config files.
"""

__version__ = "0.1.0"

from .frames import (
    ENUMERATION_LIMIT,
    Frame,
    SamplerKind,
    enumerate_truncated_permutations,
    frame_apply,
    frame_apply_transpose,
    sample_frame,
    sample_haar_frame,
    sample_permutation_frame,
    truncated_permutation_count,
)
from .manifold import (
    SQUARE_ONLY,
    RetractionKind,
    SkewMatrix,
    StiefelPoint,
    TangentVector,
    feasibility_residual,
    qr_orthonormalize,
    random_stiefel,
    random_tangent,
    retract,
    retraction_bound_estimate,
    riemannian_gradient,
    skew_part,
)
from .problems import (
    Problem,
    gap_from_value,
    make_pca,
    make_procrustes,
    make_qap,
    make_stochastic_pca,
    optgap,
    procrustes_problem,
)
from .solvers import (
    FAMILIES,
    SUBMANIFOLD_FAMILIES,
    ConfigError,
    ProjectedGradient,
    SolverConfig,
    Trace,
    TraceRecord,
    apply_submanifold_rotation,
    condition_constant,
    projected_gradient,
    rsdm_step,
    run,
    run_rgd,
    run_rgd_momentum,
    run_rsdm,
    run_rsdm_exact,
    run_rsdm_momentum,
    run_rsdm_stochastic,
    validate_config,
)
from .verify import (
    MonteCarloReport,
    TailReport,
    block_embedding_equivalence,
    complete_frame,
    fd_gradient,
    full_grad_norm_identity,
    lemma2_check,
    prop1_ratio,
    prop2_tail,
    skew_energy,
)

__all__ = [
    "__version__",
    "ENUMERATION_LIMIT",
    "FAMILIES",
    "SQUARE_ONLY",
    "SUBMANIFOLD_FAMILIES",
    "ConfigError",
    "Frame",
    "MonteCarloReport",
    "Problem",
    "ProjectedGradient",
    "RetractionKind",
    "SamplerKind",
    "SkewMatrix",
    "SolverConfig",
    "StiefelPoint",
    "TailReport",
    "TangentVector",
    "Trace",
    "TraceRecord",
    "apply_submanifold_rotation",
    "block_embedding_equivalence",
    "complete_frame",
    "condition_constant",
    "enumerate_truncated_permutations",
    "fd_gradient",
    "feasibility_residual",
    "frame_apply",
    "frame_apply_transpose",
    "full_grad_norm_identity",
    "gap_from_value",
    "lemma2_check",
    "make_pca",
    "make_procrustes",
    "make_qap",
    "make_stochastic_pca",
    "optgap",
    "procrustes_problem",
    "projected_gradient",
    "prop1_ratio",
    "prop2_tail",
    "qr_orthonormalize",
    "random_stiefel",
    "random_tangent",
    "retract",
    "retraction_bound_estimate",
    "riemannian_gradient",
    "rsdm_step",
    "run",
    "run_rgd",
    "run_rgd_momentum",
    "run_rsdm",
    "run_rsdm_exact",
    "run_rsdm_momentum",
    "run_rsdm_stochastic",
    "skew_energy",
    "skew_part",
    "validate_config",
]

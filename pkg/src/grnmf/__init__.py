"""Group-robust nonnegative matrix factorization for hyperspectral unmixing.

Decomposes nonnegative band x pixel data into endmember spectra,
simplex-constrained abundances and a group-sparse nonnegative outlier
matrix, by minimizing a beta-divergence plus a column-norm penalty with
multiplicative block-coordinate updates.
"""

from .divergence import (
    beta_divergence,
    concave_part,
    concave_part_grad,
    convex_part,
    divergence_total,
    factor_exponent,
    outlier_exponent,
)
from .errors import (
    ConfigurationError,
    DimensionMismatch,
    DomainError,
    GrnmfError,
    NumericalFailure,
    ParseError,
)
from .masked import interpolation_sweep, masked_solve, reconstruct_and_score
from .metrics import (
    align_endmembers,
    asam,
    gmse_sq,
    otsu_threshold,
    outlier_detection_scores,
)
from .model import UnmixingState, energy_vector, l21_norm, objective, validate
from .solver import (
    InitSpec,
    SolveReport,
    SolverConfig,
    estimate_lambda0,
    initialize,
    penalty_weight,
    solve,
)
from .synth import (
    GroundTruth,
    SceneSpec,
    generate,
    load_endmember_library,
    sample_simplex,
    synthetic_spectra,
)
from .updates import (
    aux_bound_M,
    aux_bound_R,
    gradient_split,
    update_abundances,
    update_endmembers,
    update_outliers,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "DimensionMismatch",
    "DomainError",
    "GrnmfError",
    "GroundTruth",
    "InitSpec",
    "NumericalFailure",
    "ParseError",
    "SceneSpec",
    "SolveReport",
    "SolverConfig",
    "UnmixingState",
    "align_endmembers",
    "asam",
    "aux_bound_M",
    "aux_bound_R",
    "beta_divergence",
    "concave_part",
    "concave_part_grad",
    "convex_part",
    "divergence_total",
    "energy_vector",
    "estimate_lambda0",
    "factor_exponent",
    "generate",
    "gmse_sq",
    "gradient_split",
    "initialize",
    "interpolation_sweep",
    "l21_norm",
    "load_endmember_library",
    "masked_solve",
    "objective",
    "otsu_threshold",
    "outlier_detection_scores",
    "outlier_exponent",
    "penalty_weight",
    "reconstruct_and_score",
    "sample_simplex",
    "solve",
    "synthetic_spectra",
    "update_abundances",
    "update_endmembers",
    "update_outliers",
    "validate",
]

"""Quasi-stationary (Yaglom) distributions of subcritical Galton-Watson processes.

The distribution is computed by discretizing the Cauchy-integral form of
``G(P(z)) = m G(z) + 1 - m`` at scaled roots of unity, solving for the
smallest eigenvector and recovering Taylor coefficients with an inverse FFT.
Large problems use an adaptive cross approximation of the Cauchy factor.
"""
from .baselines import (
    EmpiricalDistribution,
    SimulationConfig,
    extinction_sequence,
    interpolation_baseline,
    simulate_returned_process,
    total_variation,
)
from .dense import (
    ContourConfig,
    QsdCoefficients,
    assemble_cauchy,
    residual,
    solve_dense,
)
from .errors import (
    AmbiguousEigenvalueError,
    AnalysisError,
    ConfigurationError,
    ConvergenceError,
    DegenerateContourError,
    DomainError,
    IllConditionedWarning,
    ModelError,
    NormalizationError,
    NumericalError,
    PrecisionWarning,
    SingularMatrixError,
    TruncationWarning,
    UnsupportedRegimeError,
    ValidationError,
    YaglomError,
    YaglomWarning,
)
from .genfun import (
    LinearFractional,
    OffspringGF,
    Polynomial,
    affine,
    choose_radius,
    decay_envelope,
    derivative_at,
    evaluate,
    psi_p,
)
from .lowrank import (
    LowRankFactors,
    aca,
    decay_bound_taylor,
    decay_bound_zolotarev,
    eigs_lr,
    solve_lowrank,
    zolotarev_parameters,
)
from .modelio import builtin_models, load_model
from .multitype import (
    BivariateOffspring,
    LinearFractional2D,
    Polynomial2D,
    QsdGrid,
    choose_radii,
    mean_matrix_and_rho,
    residual_2d,
    solve_dense_2d,
    solve_krylov_2d,
    solve_lowrank_2d,
)
from .oracles import (
    Moments,
    linfrac2d_grid,
    linfrac2d_params,
    linfrac2d_qsd,
    linfrac_qsd,
    moments_from_coefficients,
    moments_from_recurrence,
)

__all__ = [
    "AmbiguousEigenvalueError",
    "AnalysisError",
    "BivariateOffspring",
    "ConfigurationError",
    "ContourConfig",
    "ConvergenceError",
    "DegenerateContourError",
    "DomainError",
    "EmpiricalDistribution",
    "IllConditionedWarning",
    "LinearFractional",
    "LinearFractional2D",
    "LowRankFactors",
    "ModelError",
    "Moments",
    "NormalizationError",
    "NumericalError",
    "OffspringGF",
    "Polynomial",
    "Polynomial2D",
    "PrecisionWarning",
    "QsdCoefficients",
    "QsdGrid",
    "SimulationConfig",
    "SingularMatrixError",
    "TruncationWarning",
    "UnsupportedRegimeError",
    "ValidationError",
    "YaglomError",
    "YaglomWarning",
    "aca",
    "affine",
    "assemble_cauchy",
    "builtin_models",
    "choose_radii",
    "choose_radius",
    "decay_bound_taylor",
    "decay_bound_zolotarev",
    "decay_envelope",
    "derivative_at",
    "eigs_lr",
    "evaluate",
    "extinction_sequence",
    "interpolation_baseline",
    "linfrac2d_grid",
    "linfrac2d_params",
    "linfrac2d_qsd",
    "linfrac_qsd",
    "load_model",
    "mean_matrix_and_rho",
    "moments_from_coefficients",
    "moments_from_recurrence",
    "psi_p",
    "residual",
    "residual_2d",
    "simulate_returned_process",
    "solve_dense",
    "solve_dense_2d",
    "solve_krylov_2d",
    "solve_lowrank",
    "solve_lowrank_2d",
    "total_variation",
    "zolotarev_parameters",
]

__version__ = "0.1.0"

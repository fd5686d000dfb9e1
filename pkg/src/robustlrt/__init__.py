"""Minimax-robust likelihood ratio tests under alpha-divergence uncertainty.

Build a binary hypothesis test that stays reliable when the true densities
may deviate from the nominal pair by a bounded alpha-divergence: solve for
the least favorable densities and the randomized robust decision rule,
check how large the uncertainty radii are allowed to be, and evaluate
error probabilities by quadrature or Monte Carlo.

The heavy grid kernels are JIT-compiled with numba when available; set the
environment variable ROBUSTLRT_NO_NUMBA=1 before import to force the pure
numpy fallback (same results, useful for debugging and benchmarks).
"""

from .density import (
    DensityModel,
    Gaussian,
    GaussianMixture,
    QuadratureGrid,
    Shifted,
    Tabulated,
    evaluate,
    gaussian,
    gaussian_mixture,
    grid_for,
    integrate,
    likelihood_ratio,
    make_grid,
    ratio_values,
    sample,
    shifted,
    tabulated,
    trapezoid_weights,
)
from .divergence import (
    DivergenceSpec,
    alpha_divergence,
    bhattacharyya,
    check_alpha,
    moment_integral,
    x_of,
)
from .evaluation import (
    AlphaRow,
    ErrorReport,
    SnrRow,
    alpha_sweep,
    amplitudes_from_snr,
    ball_members,
    error_probs,
    lrt_errors,
    lrt_rule,
    monte_carlo_errors,
    rule_perturbations,
    snr_of,
    snr_sweep,
    tilted_density,
)
from .lfd_solver import (
    DegenerateRegionError,
    InfeasibleEpsError,
    KktParams,
    NonConvergenceError,
    ParametricInfeasibleError,
    RobustSolution,
    SolverConfig,
    TabulatedFunction,
    ThresholdPair,
    k_factor,
    partition,
    phi0,
    phi1,
    residuals,
    robust_lr,
    robust_rule,
    solve_raw_kkt,
    solve_symmetric,
    solve_thresholds,
    z_norm,
)
from .limits import (
    FeasibilityReport,
    InfeasiblePairError,
    NoBoundaryPointError,
    eps_surface,
    hellinger_eps_max,
    hellinger_root_a,
    max_eps_general,
    validate_eps,
)
from .oracle import (
    DiscreteProblem,
    OracleError,
    OscillationError,
    alternating_saddle,
    bayes_error_bins,
    best_response_rule,
    bin_centers,
    discrete_divergence,
    discretize,
    maximize_over_ball,
    worst_case_error,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # density
    "DensityModel", "Gaussian", "GaussianMixture", "Shifted", "Tabulated",
    "QuadratureGrid", "gaussian", "gaussian_mixture", "shifted", "tabulated",
    "make_grid", "grid_for", "trapezoid_weights", "evaluate", "integrate",
    "likelihood_ratio", "ratio_values", "sample",
    # divergence
    "DivergenceSpec", "check_alpha", "x_of", "moment_integral",
    "alpha_divergence", "bhattacharyya",
    # lfd_solver
    "ThresholdPair", "KktParams", "TabulatedFunction", "SolverConfig",
    "RobustSolution", "DegenerateRegionError", "ParametricInfeasibleError",
    "InfeasibleEpsError", "NonConvergenceError", "partition", "k_factor",
    "z_norm", "phi0", "phi1", "residuals", "robust_rule", "robust_lr",
    "solve_thresholds", "solve_symmetric", "solve_raw_kkt",
    # limits
    "FeasibilityReport", "InfeasiblePairError", "NoBoundaryPointError",
    "hellinger_root_a", "hellinger_eps_max", "max_eps_general",
    "eps_surface", "validate_eps",
    # evaluation
    "ErrorReport", "SnrRow", "AlphaRow", "error_probs", "lrt_rule",
    "lrt_errors", "monte_carlo_errors", "amplitudes_from_snr", "snr_of",
    "snr_sweep", "alpha_sweep", "tilted_density", "ball_members",
    "rule_perturbations",
    # oracle
    "DiscreteProblem", "OracleError", "OscillationError", "bin_centers",
    "discretize", "discrete_divergence", "maximize_over_ball",
    "best_response_rule", "bayes_error_bins", "worst_case_error",
    "alternating_saddle",
]

"""Normal-approximation error bounds for sums, and numerical audits of them."""

__version__ = "0.1.0"

from .limit_bounds import (
    EWBound,
    EWMomentPolicy,
    MomentOracle,
    SumSpecification,
    cor33_bound,
    ew_moment_upper,
    make_moment_oracle,
    thm32_bound,
)
from .monte_carlo import (
    AuditExperiment,
    AuditRow,
    DistanceEstimate,
    RngSeed,
    audit,
    chi2_1_expectation,
    empirical_kolmogorov_chi2_1,
    empirical_wasserstein_chi2_1,
    make_smoothing_bump,
    sample_statistic,
    smooth_discrepancy,
)
from .power_divergence import (
    AlphaPolicy,
    CountVector,
    MultinomialModel,
    bound_pearson,
    bound_power_divergence,
    kolmogorov_bound_pd,
    pearson_statistic,
    power_divergence_statistic,
    square_root_representation,
    w2_generic_bounds,
    w3h_prime_bound,
)
from .reports import Assumption, BoundReport, BoundTerm, TestFunctionNorms
from .selfcheck import SUITES, run_suites
from .stein_solution import (
    CovarianceSpec,
    DominatingPolynomial,
    QuadratureConfig,
    SmoothFunction,
    bound_f,
    bound_psi,
    f_derivative,
    library_function,
    psi_derivative,
    solve_f,
    stein_residual,
    verify_derivative_bounds,
)

__all__ = [
    "Assumption",
    "AlphaPolicy",
    "AuditExperiment",
    "AuditRow",
    "BoundReport",
    "BoundTerm",
    "CountVector",
    "CovarianceSpec",
    "DistanceEstimate",
    "DominatingPolynomial",
    "EWBound",
    "EWMomentPolicy",
    "MomentOracle",
    "MultinomialModel",
    "QuadratureConfig",
    "RngSeed",
    "SUITES",
    "SmoothFunction",
    "SumSpecification",
    "TestFunctionNorms",
    "audit",
    "bound_f",
    "bound_pearson",
    "bound_power_divergence",
    "bound_psi",
    "chi2_1_expectation",
    "cor33_bound",
    "empirical_kolmogorov_chi2_1",
    "empirical_wasserstein_chi2_1",
    "ew_moment_upper",
    "f_derivative",
    "kolmogorov_bound_pd",
    "library_function",
    "make_moment_oracle",
    "make_smoothing_bump",
    "pearson_statistic",
    "power_divergence_statistic",
    "psi_derivative",
    "run_suites",
    "sample_statistic",
    "smooth_discrepancy",
    "solve_f",
    "square_root_representation",
    "stein_residual",
    "thm32_bound",
    "verify_derivative_bounds",
    "w2_generic_bounds",
    "w3h_prime_bound",
]

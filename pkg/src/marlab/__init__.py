"""Martingale-array maximal inequalities, strong laws and kernel regression on Markov chains."""

__version__ = "0.1.0"

from .arrays import (ArrayDistribution, ExplicitArray, NestedIID, PredictableArray,
                     TriangularArray, WeightSchedule, alternating_array, extended_sum, generate,
                     load_array, partial_sums, predictable_nested, rademacher_nested,
                     row_increment, skewed_nested, tilted_array, validate_schedule)
from .inequality_lab import (InequalityReport, burkholder_check, burkholder_constant, cbm_bound,
                             thm2_check, thm2_sweep)
from .kernel_regression import (BandwidthSchedule, ChainKernelArray, FiniteRegressionProblem,
                                KernelSpec, RegressionProblem, bias_term, check_kernel,
                                check_psi, consistency_experiment, decomposition_terms,
                                epanechnikov_kernel, gaussian_kernel, nw, uniform_kernel)
from .markov_engine import (AR1Model, DriftSpec, FiniteChain, FiniteJointChain, drift_margin,
                            ergodicity_rate, poisson_identity2_check, poisson_solve_finite,
                            quadratic_V, simulate, stationary_moment_bound)
from .slln_diagnostics import corollary1_terms, diagonal_paths

"""Delta-power variations, iterated fractional Brownian motion and SPDE estimators."""

from .constants import (CltConstants, CorrelationTable, c_alpha_gamma_m, clt_constants,
                        decompose, difference_cov, hermite, iterated_fbm_cov, mu, mu_oracle,
                        normal_moment, nu, rho, rho_sq, sigma_sq, tau)
from .errors import (DegenerateInputError, DeltaVarError, ExperimentFailedError,
                     InvalidParameterError, NumericalError, SimulationDivergedError)
from .estimators import (DirichletGeometry, EstimationInput, EstimationResult, KnownSigma,
                         KnownTheta, WholeLineGeometry, estimate, estimate_sigma_q_bounded,
                         estimate_sigma_whole_line, estimate_theta_bounded,
                         estimate_theta_whole_line, naive_bias_factor, select_M)
from .experiment import (ExperimentConfig, emit_plot_data, run_clt_check, run_mc_experiment)
from .fbm import FbmSpec, IteratedFbmPath, sample_fgn_increments, sample_iterated_fbm
from .findiff import (GridFunction, VariationParams, delta_power_variation, forward_difference,
                      hz_seminorm_estimate)
from .spde import (SpdeField, SpdeModel, SpectralState, WholeLineSampler, evaluate_field,
                   simulate_linear_dirichlet, simulate_semilinear_dirichlet, simulate_whole_line)

__version__ = "0.1.0"

"""Randomized-QMC adaptive multiple importance sampling.

Scrambled Sobol' point generation, inverse-CDF transport sampling from
adaptive Gaussian / Student-t proposal families, the recycled
multiple-importance-sampling estimator and its self-normalized variant,
mode-matched IS baselines, and a harness that measures RMSE convergence
rates against Monte Carlo sampling.
"""

from .baselines import ModeResult, find_mode, laplace_cov, run_is_baseline
from .errors import (DegenerateWeightsError, EstimateError, IngestionError,
                     InvalidParameterError, MamisRunError, ModeSearchError,
                     SingularProposalError, UnsupportedDimensionError)
from .harness import (ExperimentConfig, ExperimentResult, default_config,
                      fit_loglog_slope, parse_config, rmse, run_experiment,
                      write_csv)
from .mamis import (Estimate, StageRecord, Trace, auxiliary_estimate,
                    mamis_estimate, parameter_update, pilot_mean,
                    recycle_weights, run_mamis, run_self_normalized_mamis,
                    run_stage)
from .pointgen import (PointKind, UniformPointSet, dyadic_stratification_check,
                       generate_iid, generate_sobol)
from .proposals import (Family, FamilySpec, ProposalParam, h_statistic,
                        log_density, param_from_moments, sample, spd_repair,
                        unpack)
from .targets import (Integrand, PimaDesign, Target, default_pima_path,
                      integrand_registry, load_pima, make_banana,
                      make_five_mixture, make_logistic_posterior,
                      make_shared_cov_gmm)
from .theory import empirical_lq_error, smoothed_projection
from .transforms import (gaussian_transport, inv_chi2_cdf, inv_norm_cdf,
                         student_t_transport)

__version__ = "0.1.0"

"""Finite-length scaling toolkit for spatially coupled LDPC codes on the
binary erasure channel: ensemble sampling, peeling decoding, density
evolution thresholds, scaling-parameter estimation, closed-form FER/BER
laws, and a mean-reverting surrogate for the decoding-wave fluctuations.
"""

from .density_evolution import (alpha_lower_bound, coupled_de,
                                coupled_threshold, uncoupled_fixed_point,
                                uncoupled_threshold)
from .ensemble import EnsembleSpec, TannerGraph, Termination, sample_graph
from .errors import (DegenerateChain, EmptyResidual, ExcessiveCensoring,
                     InvalidWindow, ManifestConflict, MissingParams,
                     NoPlateau, NonIntegerM, NonPositiveGap, OutOfTableRange,
                     RuntimeFailure, TooManyFailures, ValidationError,
                     WindowTooShort)
from .harness import (CurvePoint, ExperimentConfig, config_hash,
                      load_config_file, merge_config, run_experiment)
from .ou_model import (OUParams, OUSamples, coupled_refinement_ks,
                       fit_report, ks_statistic, ou_first_hit, ou_path,
                       two_wave_first_hit)
from .param_estimation import (build_parameter_table, default_eps_grid,
                               estimate_nu_theta, extract_window_params,
                               mean_trajectory, measure_table_knots)
from .peeling import (DecodingTrace, RunResult, TrialOutcome,
                      classify_residual, peel, run_single_trial, run_trials,
                      sample_erasures, wave_died, wilson_interval)
from .rng import derive_seed, trial_rng
from .scaling_law import (LAWS, Mu0, Prediction, ScalingParameters,
                          TableEntry, ber_erlang, ber_exponential,
                          fer_erlang, fer_exponential,
                          first_hit_cdf_erlang, first_hit_cdf_exponential,
                          first_hit_pdf_erlang, first_hit_pdf_exponential,
                          interpolate, load_params, mu0, mu0_from_w,
                          predict, save_params)

__version__ = "0.1.0"

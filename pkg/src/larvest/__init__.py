"""Temperature-dependent larval growth curves and hatching-time inference."""
from .data import (CaseObservation, ExperimentalDataset, HatchingEstimate, Stage,
                   TemperatureBatch, TemperatureProfile, format_experimental_csv,
                   format_temperature_csv, parse_experimental_csv, parse_lengths_csv,
                   parse_temperature_csv, validate_case)
from .dynamics import Phase, VaryingTempCurve, invert_length, reconstruct_growth
from .errors import *  # noqa: F401,F403
from .field import GrowthField, fit_growth_field, smooth_across_temperature
from .inference import (PriorSpec, SpeciesCase, adh_baseline, adh_interval, criterion_profile,
                        estimate, estimate_hatching, estimate_multispecies, grid_posterior,
                        likelihood_ci, parse_prior)
from .kernels import BACKEND
from .registration import (GrowthShape, WarpingQuadratic, compute_shape, find_landmarks,
                           fit_warping, invert_warping, register_curves)
from .smoothing import ConstantTempCurve, SmootherConfig, batch_summaries, local_linear_fit
from .synth import SynthFamily, default_family, synth_dataset, synth_truth_curve

__version__ = "0.1.0"

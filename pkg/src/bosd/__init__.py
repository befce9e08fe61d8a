"""Bayesian online segment detection with hidden semi-Markov models."""
from .bocpd import BocpdFilter
from .bosd_filter import BosdFilter, StepMarginals, map_state_sequence
from .errors import UnderflowError
from .kernels import BACKEND
from .learning import FitReport, Segment, SegmentLabels, complete_data_loglik, fit_supervised
from .model import HsmmParams, ValidationReport, duration_from_hazard, hazard_from_duration, validate
from .residual import residual_kernel, residual_posterior
from .sampling import SampledSequence, SyntheticConfig, enumerate_posterior, sample, synthetic_benchmark
from .trace import PosteriorTrace, filter_sequence

__all__ = [
    "BACKEND", "BocpdFilter", "BosdFilter", "FitReport", "HsmmParams", "PosteriorTrace", "SampledSequence",
    "Segment", "SegmentLabels", "StepMarginals", "SyntheticConfig", "UnderflowError", "ValidationReport",
    "complete_data_loglik", "duration_from_hazard", "enumerate_posterior", "filter_sequence",
    "fit_supervised", "hazard_from_duration", "map_state_sequence", "residual_kernel",
    "residual_posterior", "sample", "synthetic_benchmark", "validate",
]

"""Numerical laboratory for optimistic generalization bounds of
interpolating predictors under square-root-Lipschitz losses.

Layout:
  losses        loss catalog, Moreau envelopes, envelope-inequality checks
  models        Gaussian data models, projected views, matrix sensing
  interpolants  minimum-norm solvers and constructive interpolants
  bounds        bound calculators and Monte Carlo complexity estimators
  harness       seeded experiment drivers and report serialization
  cli           `interplab` command-line front end
"""

from .bounds import (
    BoundEvaluation,
    c_delta_l2,
    c_delta_nuclear,
    estimate_eps,
    estimate_tau,
    lambda_tradeoff_envelope,
    lambda_tradeoff_penalty,
    nn_complexity,
    norm_bound_linear,
    norm_bound_matrix,
    norm_bound_phase,
    optimistic_rhs,
    weighted_optimistic_rhs,
)
from .errors import InfeasibleError, NumericalError, SchemaError
from .harness import DRIVERS, VERSION, ExperimentReport, write_report
from .interpolants import (
    certify_nuclear,
    min_norm_linear,
    nuclear_min,
    phase_brute,
    phase_construct,
    relu_construct,
)
from .losses import catalog, eval_loss, moreau_envelope, nn_lip_constant
from .models import (
    CounterexampleModel,
    Covariance,
    MultiIndexModel,
    geometry,
    make_covariance,
    sample,
    sample_counterexample,
    sample_matrix_sensing,
)

__version__ = VERSION

__all__ = [
    "BoundEvaluation",
    "CounterexampleModel",
    "Covariance",
    "DRIVERS",
    "ExperimentReport",
    "InfeasibleError",
    "MultiIndexModel",
    "NumericalError",
    "SchemaError",
    "VERSION",
    "c_delta_l2",
    "c_delta_nuclear",
    "catalog",
    "certify_nuclear",
    "estimate_eps",
    "estimate_tau",
    "eval_loss",
    "geometry",
    "lambda_tradeoff_envelope",
    "lambda_tradeoff_penalty",
    "make_covariance",
    "min_norm_linear",
    "moreau_envelope",
    "nn_complexity",
    "nn_lip_constant",
    "norm_bound_linear",
    "norm_bound_matrix",
    "norm_bound_phase",
    "nuclear_min",
    "optimistic_rhs",
    "phase_brute",
    "phase_construct",
    "relu_construct",
    "sample",
    "sample_counterexample",
    "sample_matrix_sensing",
    "weighted_optimistic_rhs",
    "write_report",
]

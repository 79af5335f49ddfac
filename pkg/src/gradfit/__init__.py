"""Estimating a magnetic-field gradient along a spin chain with W-state probes."""

from .chain import (
    ChainGeometry,
    DimensionError,
    FieldProfile,
    InvalidInputError,
    ProbeParams,
    evolve,
    ghz_state,
    linear_field,
    noon_state,
    w_state,
)
from .estimator import GradientEstimate, OutcomeCounts, TrialConfig, crb_gradient, lslf_coefficients, lslf_fit, mle_fields_cascade
from .experiments import compare_states, nonlinear_field_demo, run_ensemble, sweep_scaling
from .fisher import FisherMatrix, fi_matrix_numeric, qfi_matrix_w, qfi_pure_diagonal
from .measurement import FieldModel, cascade_basis, fourier_basis, outcome_distribution, prob_a_linear, prob_b_linear

__all__ = [
    "ChainGeometry",
    "DimensionError",
    "FieldModel",
    "FieldProfile",
    "FisherMatrix",
    "GradientEstimate",
    "InvalidInputError",
    "OutcomeCounts",
    "ProbeParams",
    "TrialConfig",
    "cascade_basis",
    "compare_states",
    "crb_gradient",
    "evolve",
    "fi_matrix_numeric",
    "fourier_basis",
    "ghz_state",
    "linear_field",
    "lslf_coefficients",
    "lslf_fit",
    "mle_fields_cascade",
    "noon_state",
    "nonlinear_field_demo",
    "outcome_distribution",
    "prob_a_linear",
    "prob_b_linear",
    "qfi_matrix_w",
    "qfi_pure_diagonal",
    "run_ensemble",
    "sweep_scaling",
    "w_state",
]

"""Proximal point methods for minimizing ``phi + g - h`` (smooth plus difference of convex)."""

from .analysis import (KlEstimate, LojasiewiczResult, RateReport, TooFewPoints,
                       admissible_sequence, classify_rate, estimate_kl_exponent,
                       lojasiewicz_check, rate_bound_check, rate_predict)
from .bppa import ArmijoFailure, BppaConfig, armijo_search, bppa_step, solve_bppa, solve_ppa
from .checks import CheckContext, CheckResult, check_trace
from .core import (CapabilityError, ConvexOracle, DcError, DcProblem, DimensionError,
                   HypothesisViolation, InvalidProblemState, IterateRecord, SmoothOracle,
                   Trace, dc_gradient, dc_value, descent_lemma_check, finite_diff_gradient)
from .inertial import (DerivedConstants, InertialOptions, InertialParameterError,
                       InertialParams, InertialState, solve_inertial, validate_inertial_params)
from .problems import PROBLEMS, build_problem
from .prox import ProxError, ProxSpec, prox, prox_optimality_residual

__all__ = ['KlEstimate', 'LojasiewiczResult', 'RateReport', 'TooFewPoints',
           'admissible_sequence', 'classify_rate', 'estimate_kl_exponent',
           'lojasiewicz_check', 'rate_bound_check', 'rate_predict', 'ArmijoFailure',
           'BppaConfig', 'armijo_search', 'bppa_step', 'solve_bppa', 'solve_ppa',
           'CheckContext', 'CheckResult', 'check_trace', 'CapabilityError', 'ConvexOracle',
           'DcError', 'DcProblem', 'DimensionError', 'HypothesisViolation',
           'InvalidProblemState', 'IterateRecord', 'SmoothOracle', 'Trace', 'dc_gradient',
           'dc_value', 'descent_lemma_check', 'finite_diff_gradient', 'DerivedConstants',
           'InertialOptions', 'InertialParameterError', 'InertialParams', 'InertialState',
           'solve_inertial', 'validate_inertial_params', 'PROBLEMS', 'build_problem',
           'ProxError', 'ProxSpec', 'prox', 'prox_optimality_residual']

__version__ = '0.1.0'

"""Regularized channel estimation by Peaceman-Rachford splitting on the dual,
with a deep-equilibrium denoiser inference mode and a hybrid far/near-field
channel simulator."""

from .baselines import CovarianceModel, fista, fit_covariance, ista, lmmse_estimate, ls_estimate
from .prox import (
    DenoiserProx,
    L1SoftThreshold,
    ProxOperator,
    QuadraticResolvent,
    ZeroRegularizer,
    moreau_check,
    soft_threshold,
)
from .realform import (
    MeasurementOperator,
    ProblemInstance,
    apply_operator,
    build_real_operator,
    embed_complex,
    extract_complex,
)
from .solver import SolverConfig, SolverResult, SolverState, SolverTrace, init_state, iterate_once, iterate_raw, run, run_deq

__version__ = "0.1.0"

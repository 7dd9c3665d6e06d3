"""Recover a real signal, up to sign, from squared frame coefficients.

Modules
-------
frame   frames, the magnitude map, ``Q`` / ``R(x)`` and injectivity checks
solver  regularized iterative least squares (algorithms 1 and 2)
crlb    Fisher information and Cramer-Rao type bounds
bench   Monte Carlo SNR sweeps and result files
cli     ``phaseless`` command line tool
"""

from .frame import (
    DimensionError,
    EnumerationTooLarge,
    Frame,
    InjectivityVerdict,
    a0_estimate,
    analyze,
    equiv_distance,
    frame_bounds,
    full_spark_check,
    partition_injectivity_check,
    quadratic_Q,
    quadratic_R,
)
from .solver import (
    SolverConfig,
    SolverError,
    SolverResult,
    SolverState,
    init_state,
    iterate_step,
    objective_J,
    reconstruct,
    residual_L,
    run_algorithm1,
    run_algorithm2,
    schedule_update,
)
from .crlb import (
    BoundsReport,
    UnidentifiableError,
    bias_delta,
    bounds_report,
    crlb_trace,
    delta_matrix,
    expected_crlb_trace,
    fisher_info,
    lifted_bound,
    mle_mean,
    mle_mse_bound,
)
from .bench import SweepConfig, SweepRow, emit_results, gen_instance, run_sweep, sigma_for_snr

__version__ = "0.1.0"

"""Simulation and two-timescale optimization toolkit for an IRS-assisted
multi-cell downlink: closed-form per-slot beamforming, stochastic
phase-shift optimization, and Monte Carlo ergodic-rate evaluation."""

__version__ = "0.1.0"

from .baselines import SCHEMES, SchemeSpec, design_scheme, evaluate_scheme, scheme
from .beamforming import Beamformer, mrt_equivalent_beamformer, mrt_policy
from .channel import (
    ChannelStatistics,
    CsiSample,
    build_statistics,
    compute_path_loss,
    los_matrix,
    rician_combination_factor,
    sample_estimated_csi,
    sample_physical_channels,
    steering_vector,
)
from .config import (
    PRESETS,
    ScenarioConfig,
    dbm_to_watt,
    geometry_report,
    load_scenario,
    save_scenario,
    user_position_on_bisector,
    watt_to_dbm,
)
from .rate import (
    PhaseShiftVector,
    RateReport,
    ergodic_rate_mc,
    g0,
    gamma_ub,
    gamma_ub_gradient,
    gk,
    sinr_denominator,
    upper_bound_rate,
    upper_bound_rate_closed_form,
)
from .ssca import (
    DesignObjective,
    SolverConfig,
    SscaState,
    project_unit_modulus,
    run,
    solve_surrogate,
    stepsize_omega,
    stepsize_rho,
    update_coefficients,
)

__all__ = [
    "SCHEMES",
    "Beamformer",
    "ChannelStatistics",
    "CsiSample",
    "DesignObjective",
    "PRESETS",
    "PhaseShiftVector",
    "RateReport",
    "ScenarioConfig",
    "SchemeSpec",
    "SolverConfig",
    "SscaState",
    "build_statistics",
    "compute_path_loss",
    "dbm_to_watt",
    "design_scheme",
    "ergodic_rate_mc",
    "evaluate_scheme",
    "g0",
    "gamma_ub",
    "gamma_ub_gradient",
    "geometry_report",
    "gk",
    "load_scenario",
    "los_matrix",
    "mrt_equivalent_beamformer",
    "mrt_policy",
    "project_unit_modulus",
    "rician_combination_factor",
    "run",
    "sample_estimated_csi",
    "sample_physical_channels",
    "save_scenario",
    "scheme",
    "sinr_denominator",
    "solve_surrogate",
    "steering_vector",
    "stepsize_omega",
    "stepsize_rho",
    "update_coefficients",
    "upper_bound_rate",
    "upper_bound_rate_closed_form",
    "user_position_on_bisector",
    "watt_to_dbm",
]

//! Design-and-analysis toolkit for a modal-phase-matched squeezed-light
//! source: waveguide eigenmodes, phase matching, ring-cavity resonances with
//! photorefractive scan dynamics, parametric gain and threshold, squeezing
//! spectra, homodyne traces, and model fitting.

pub mod cavity;
pub mod config;
pub mod error;
pub mod fit;
pub mod grid;
pub mod interp;
pub mod material;
pub mod modesolver;
pub mod opo;
pub mod parallel;
pub mod phasematch;
pub mod trace;

pub use cavity::{
    asymmetry, calibrate_beta, dip_center_nm, escape_efficiency, fit_resonance, linear_regression,
    lorentzian_transmission, measured_dip_centers, q_linewidth, simulate_scan, CavityParams,
    Coupling, PhotorefractiveParams, ResonanceFit, ResonanceModel, ScanConfig, ScanDirection,
    ScanOutput,
};
pub use error::{Error, Result};
pub use fit::{
    fit_squeezing_vs_frequency, fit_squeezing_vs_power, least_squares, numeric_jacobian, FitPoint,
    FitProblem, FitResult, Jacobian,
};
pub use modesolver::{
    classify_mode, field_map_csv, mode_overlap, refine_convergence, solve_modes, ConvergenceStudy,
    ModeLabel, ModeSelector, ModeSolution, Polarization,
};
pub use opo::{
    budget_total, gain_envelopes, gain_trace, homodyne_trace, infer_eta_x, infer_onchip,
    noise_power, parametric_gain, project_threshold_limit, propagate_loss, threshold_from_gain,
    EfficiencyBudget, HomodyneSettings, NoisePower, SqueezerParams,
};
pub use phasematch::{
    double_resonance_detuning, find_phasematch_width, find_pulley_match, ring_resonances,
    sweep_neff, DispersionCurve, IndexModel, PhasematchResult, RingGeometry, SweepSettings,
};
pub use grid::Grid2D;
pub use material::{
    index, permittivity_tensor, CrossSection, DispersionModel, EpsTensor, LayerStack, Material,
    MaterialDb, PermittivityMap, MIN_MARGIN_UM, T_REF_DEFAULT_K,
};
pub use trace::{Trace, XKind};

/// Physical constants used across modules.
pub mod constants {
    /// Speed of light in micrometers per second.
    pub const C_UM_PER_S: f64 = 2.99792458e14;
    /// Speed of light in nanometers per second.
    pub const C_NM_PER_S: f64 = 2.99792458e17;
}

//! Damped nonlinear least squares and the toolkit's fit models.

mod engine;
mod models;

pub use engine::{
    least_squares, numeric_jacobian, ConvergenceReason, FitPoint, FitProblem, FitResult, Jacobian,
};
pub use models::{
    fit_squeezing_vs_frequency, fit_squeezing_vs_power, registered_models, FitModel, LorentzianDip,
    SqueezingVsFrequency, SqueezingVsPower, SqzFit,
};

//! Laziness criterion, norm and Lipschitz estimators, flow comparisons,
//! bound checks and linearization indicators.

mod bounds;
mod deviation;
mod indicators;
mod norms;

pub use bounds::{
    check_lemma1, check_lemma2, check_theorem2_bound, check_theorem3_rate, theorem2_horizon,
    BoundStatus, EnvelopeCheck, Lemma2Check, Theorem2Check, Theorem3Check,
};
pub use deviation::{
    compare_flows, deviation_slopes, slope_within, DeviationReport, DeviationSlopes,
};
pub use indicators::{
    check_under_param_plateau, generalization_gap, stability_of_activations, tangent_least_squares,
    PlateauReport, TangentFit,
};
pub use norms::{estimate_norms, kappa, second_derivative_norm, EstimatorConfig, NormEstimates};

//! Numerics for lazy training.
//!
//! A model `h: R^p -> F` maps parameters to outputs on a finite evaluation
//! set. Scaling the output by `alpha` and training on `R(alpha h(w)) /
//! alpha^2` drives the gradient flow towards the flow of the linearized model
//! `h(w0) + Dh(w0)(w - w0)`. The crate provides the models and wrappers,
//! the losses and scaled objectives, the tangent model and kernel, flow
//! integrators, estimators and bound checks, the arc-cosine kernel limits of
//! wide two-layer ReLU networks, and a teacher-student experiment harness.

pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod kernels;
pub mod linalg;
pub mod linearize;
pub mod loss;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use model::{evaluate, jacobian, EvaluationSet, Model, OutputPoint, ParamVector};

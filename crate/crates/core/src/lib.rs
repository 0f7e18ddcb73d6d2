//! Stationary solutions of small-noise SDEs built by pullback, the controlled
//! skeleton equation, the Freidlin–Wentzell action functional, minimum-action
//! quasi-potentials and Monte Carlo checks of large-deviation scaling.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod error;
pub mod integrate;
pub mod ldpverify;
pub mod mam;
pub mod model;
pub mod noise;
pub mod pullback;

pub use action::{action, action_gradient, control_from_path, ActionReport, Control};
pub use error::{Error, Result};
pub use integrate::{em_step_sde, integrate_skeleton, Path, SkeletonScheme};
pub use ldpverify::{
    estimate_event, ldp_slope, sample_stationary, Event, FitReport, MCEstimate, SampleOptions,
    SlopePoint,
};
pub use mam::{minimize_action, quasipotential, Init, MamOptions, MamResult, QPResult};
pub use model::{Constants, HypothesisReport, ModelParams, ModelSpec, TimeGrid};
pub use noise::{sample_noise, shift_noise, NoiseKey, NoisePath};
pub use pullback::{
    pullback_skeleton, pullback_stationary, stationarity_check, PullbackDiag, PullbackOptions,
};

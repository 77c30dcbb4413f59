//! Counting-rate estimation for pulse trains distorted by pileup.
//!
//! A sampled signal is modelled as a non-negative sparse combination of
//! shifted, truncated gamma pulses. [`solver::nnlasso`] fits it, the
//! coefficients are thresholded block by block, and the rising edges of the
//! active block pattern give the event count and the rate estimate. The
//! [`bounds`] module evaluates the confidence statements that accompany the
//! estimate, and [`experiment`] drives Monte Carlo studies.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod dictionary;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod io;
pub mod rng;
pub mod signal;
pub mod solver;

pub use bounds::{evaluate_bounds, Bound, BoundInputs, BoundReport};
pub use dictionary::{CorrelationProfile, Dictionary, RangeSpec, ShapeGrid, ShapeGridConfig};
pub use error::{Error, Result};
pub use estimation::{
    estimate_rate, extract_events, idle_time_rate, run_pipeline, EtaRule, EventEstimate, PipelineConfig,
    PipelineOutput, RRule, RateReport,
};
pub use experiment::{run_experiment, Case, ExperimentConfig, ExperimentResults, RunRecord};
pub use signal::{EnergyModel, GroundTruth, Horizon, PulseShape, SampledSignal, SamplingGrid};
pub use solver::{nnlasso, select_r, SolverOptions, SparseRegressor};

#![allow(dead_code)]

use pileup_core::dictionary::RangeSpec;
use pileup_core::experiment::{Case, ExperimentConfig};
use pileup_core::{EnergyModel, PipelineConfig, ShapeGridConfig};

/// Case I desk settings: 3 x 3 shape grid, `tau = 15`, `sigma = 1`,
/// `eta = 3 sigma`, residual-matched `r` on a geometric path of ratio 0.8.
pub fn desk_config(lambda_grid: Vec<f64>, replications: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        case: Case::I,
        lambda_grid,
        events_per_signal: 50,
        horizon: None,
        replications,
        sigma: 1.0,
        dt: 1.0,
        tail: None,
        shape_grid: ShapeGridConfig {
            theta1: RangeSpec {
                from: 1.0,
                to: 3.0,
                step: 1.0,
            },
            theta2: RangeSpec {
                from: 1.0,
                to: 2.0,
                step: 0.5,
            },
            tau: 15,
        },
        case2_theta1: (0.0, 10.0),
        case2_theta2: (0.0, 2.0),
        energy: EnergyModel::reference(),
        pipeline: PipelineConfig {
            path_factor: 0.8,
            ..PipelineConfig::default()
        },
        evaluate_bounds: false,
        seed,
    }
}

/// `x` is within `rel` relative error of `y`.
pub fn rel_close(x: f64, y: f64, rel: f64) -> bool {
    (x - y).abs() <= rel * y.abs().max(f64::MIN_POSITIVE)
}

//! Fixtures shared by the benchmarks.

use pileup_core::experiment::{simulate_run, Case, ExperimentConfig, Simulated};
use pileup_core::{EnergyModel, PipelineConfig, RangeSpec, ShapeGridConfig};

/// Case I sweep settings with a 3 x 3 shape grid and `tau = 15`.
pub fn desk_config() -> ExperimentConfig {
    ExperimentConfig {
        case: Case::I,
        lambda_grid: vec![0.1],
        events_per_signal: 50,
        horizon: None,
        replications: 1,
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
        seed: 0,
    }
}

/// One simulated signal at rate `lambda`.
pub fn fixture(lambda: f64, seed: u64) -> Simulated {
    let cfg = desk_config();
    let grid = cfg.shape_grid.to_grid().expect("valid shape grid");
    simulate_run(&cfg, &grid, lambda, seed).expect("simulation succeeds")
}

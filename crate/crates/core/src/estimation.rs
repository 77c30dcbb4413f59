//! Post-processing of the regression output into an event count and a rate,
//! the two reference rates computed from ground truth, and the idle-time
//! baseline.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{invalid, Error, Result};
use crate::signal::{optimal_index_set, GroundTruth, SampledSignal};
use crate::solver::{nnlasso, select_r, SolverOptions, SparseRegressor};

/// Detected events after thresholding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub m_hat: usize,
    /// Estimated arrival times in seconds, strictly increasing.
    pub t_hat: Vec<f64>,
    /// Post-threshold block pattern, ascending.
    pub active_blocks: Vec<usize>,
    pub eta: f64,
    pub r: f64,
}

/// Drops every block whose coefficient sub-vector has `l1` norm below `eta`.
pub fn threshold_blocks(beta: &SparseRegressor, eta: f64) -> Result<SparseRegressor> {
    if !(eta > 0.0) {
        return invalid(format!("eta must be positive, got {eta}"));
    }
    let norms = beta.block_l1();
    Ok(beta.retain_blocks(|k| norms.get(&k).is_some_and(|&v| v >= eta)))
}

/// First block of every maximal run of consecutive blocks. A block at index 0
/// opens a run.
pub fn rising_edges(pattern: &BTreeSet<usize>) -> Vec<usize> {
    let mut edges = Vec::new();
    let mut prev: Option<usize> = None;
    for &k in pattern {
        if prev.is_none_or(|p| p + 1 != k) {
            edges.push(k);
        }
        prev = Some(k);
    }
    edges
}

/// Reads the event list off a thresholded regressor: one event per rising
/// edge of the active-block indicator, at time `k dt`.
pub fn extract_events(beta_thresholded: &SparseRegressor, dt: f64, eta: f64) -> Result<EventEstimate> {
    if !(dt > 0.0) {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    let pattern = beta_thresholded.block_pattern();
    let t_hat: Vec<f64> = rising_edges(&pattern).iter().map(|&k| k as f64 * dt).collect();
    Ok(EventEstimate {
        m_hat: t_hat.len(),
        t_hat,
        active_blocks: pattern.into_iter().collect(),
        eta,
        r: beta_thresholded.r(),
    })
}

/// `M_hat / T_hat_{M_hat}`.
pub fn estimate_rate(events: &EventEstimate) -> Result<f64> {
    match events.t_hat.last() {
        None => Err(Error::UndefinedRate("no event detected")),
        Some(&t) if t <= 0.0 => Err(Error::UndefinedRate("last detected event at time 0")),
        Some(&t) => Ok(events.m_hat as f64 / t),
    }
}

/// `M / T_M` from the true arrivals.
pub fn ideal_rate(truth: &GroundTruth) -> Result<f64> {
    match truth.arrivals().last() {
        None => Err(Error::UndefinedRate("ground truth has no event")),
        Some(&t) if t <= 0.0 => Err(Error::UndefinedRate("last true arrival at time 0")),
        Some(&t) => Ok(truth.len() as f64 / t),
    }
}

/// `|P0| / (dt max P0)`.
pub fn optimal_rate(p0: &BTreeSet<usize>, dt: f64) -> Result<f64> {
    if !(dt > 0.0) {
        return invalid(format!("dt must be positive, got {dt}"));
    }
    match p0.last() {
        None => Err(Error::UndefinedRate("empty index set")),
        Some(0) => Err(Error::UndefinedRate("index set reduced to sample 0")),
        Some(&m) => Ok(p0.len() as f64 / (dt * m as f64)),
    }
}

/// Idle-time baseline: samples above `threshold` are busy, the rest idle. Only
/// idle runs with a busy sample on both sides count; the estimate is their
/// number divided by their total duration.
pub fn idle_time_rate(signal: &SampledSignal, threshold: f64) -> Result<f64> {
    if !(threshold > 0.0) {
        return invalid(format!("threshold must be positive, got {threshold}"));
    }
    let dt = signal.grid().dt();
    let mut seen_busy = false;
    let mut run = 0usize;
    let mut runs = 0usize;
    let mut idle = 0usize;
    for &v in signal.samples() {
        if v > threshold {
            if seen_busy && run > 0 {
                runs += 1;
                idle += run;
            }
            seen_busy = true;
            run = 0;
        } else if seen_busy {
            run += 1;
        }
    }
    if runs == 0 {
        return Err(Error::UndefinedRate("no idle period bounded by busy periods"));
    }
    Ok(runs as f64 / (idle as f64 * dt))
}

/// How the block threshold is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    Fixed(f64),
    /// `eta = factor * sigma`.
    NoiseMultiple(f64),
}

impl Default for EtaRule {
    fn default() -> Self {
        EtaRule::NoiseMultiple(3.0)
    }
}

impl EtaRule {
    pub fn resolve(self, sigma: f64) -> Result<f64> {
        let eta = match self {
            EtaRule::Fixed(v) => v,
            EtaRule::NoiseMultiple(f) => f * sigma,
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return invalid(format!("resolved eta must be positive, got {eta}"));
        }
        Ok(eta)
    }
}

/// How the sparsity parameter is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RRule {
    Fixed(f64),
    #[default]
    ResidualMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub eta: EtaRule,
    pub r: RRule,
    pub path_factor: f64,
    pub solver: SolverOptions,
    /// Baseline busy threshold as a multiple of sigma.
    pub baseline_factor: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            eta: EtaRule::default(),
            r: RRule::default(),
            path_factor: 0.9,
            solver: SolverOptions::default(),
            baseline_factor: 3.0,
        }
    }
}

/// Everything produced by one pass of the estimator on one signal.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub beta: SparseRegressor,
    pub beta_post: SparseRegressor,
    pub events: EventEstimate,
    pub lambda_hat: std::result::Result<f64, String>,
    pub lambda_std: std::result::Result<f64, String>,
}

/// Solve, threshold, extract events and compute both the proposed and the
/// baseline rate.
pub fn run_pipeline(
    dict: &Dictionary,
    y: &SampledSignal,
    sigma: f64,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if !(sigma > 0.0) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    let eta = config.eta.resolve(sigma)?;
    let beta = match config.r {
        RRule::Fixed(r) => nnlasso(dict, y, r, config.solver)?,
        RRule::ResidualMatched => select_r(dict, y, sigma, config.path_factor, config.solver)?.beta,
    };
    let beta_post = threshold_blocks(&beta, eta)?;
    let events = extract_events(&beta_post, dict.grid().dt(), eta)?;
    let lambda_hat = estimate_rate(&events).map_err(|e| e.to_string());
    let lambda_std = idle_time_rate(y, config.baseline_factor * sigma).map_err(|e| e.to_string());
    Ok(PipelineOutput {
        beta,
        beta_post,
        events,
        lambda_hat,
        lambda_std,
    })
}

/// Serializable summary of one estimate, with the ground-truth rates when the
/// truth is known.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub lambda_hat: Option<f64>,
    pub m_hat: usize,
    pub t_hat: Vec<f64>,
    pub lambda_std: Option<f64>,
    pub lambda_opt: Option<f64>,
    pub lambda_c: Option<f64>,
    pub r: f64,
    pub eta: f64,
    pub beta_l0: usize,
    pub active_blocks: Vec<usize>,
    pub n_samples: usize,
    pub dt: f64,
}

impl RateReport {
    pub fn new(output: &PipelineOutput, y: &SampledSignal, truth: Option<&GroundTruth>) -> Self {
        let grid = y.grid();
        let (lambda_c, lambda_opt) = match truth {
            Some(t) => (
                ideal_rate(t).ok(),
                optimal_index_set(t.arrivals(), grid)
                    .ok()
                    .and_then(|p0| optimal_rate(&p0, grid.dt()).ok()),
            ),
            None => (None, None),
        };
        Self {
            lambda_hat: output.lambda_hat.as_ref().ok().copied(),
            m_hat: output.events.m_hat,
            t_hat: output.events.t_hat.clone(),
            lambda_std: output.lambda_std.as_ref().ok().copied(),
            lambda_opt,
            lambda_c,
            r: output.events.r,
            eta: output.events.eta,
            beta_l0: output.beta.l0(),
            active_blocks: output.events.active_blocks.clone(),
            n_samples: grid.n_samples(),
            dt: grid.dt(),
        }
    }

    pub fn events(&self) -> EventEstimate {
        EventEstimate {
            m_hat: self.m_hat,
            t_hat: self.t_hat.clone(),
            active_blocks: self.active_blocks.clone(),
            eta: self.eta,
            r: self.r,
        }
    }
}

//! Monte Carlo runner: simulate signals over a grid of rates, estimate each
//! one with the sparse pipeline and the idle-time baseline, optionally
//! evaluate the confidence bounds, and write the results as CSV.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{discrepancy_alpha, evaluate_bounds, BoundInputs, BoundReport};
use crate::dictionary::{Dictionary, ShapeGrid, ShapeGridConfig};
use crate::error::{invalid, Error, Result};
use crate::estimation::{ideal_rate, optimal_rate, run_pipeline, PipelineConfig};
use crate::io::fmt_real;
use crate::rng::derive_seed;
use crate::signal::{
    optimal_index_set, sample_column_shapes, sample_energies, sample_gamma_shapes, sample_poisson_process,
    synthesize_signal, EnergyModel, GroundTruth, Horizon, SamplingGrid,
};

/// Which pulse shapes the simulated events use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Each event uses a shape drawn from the dictionary.
    I,
    /// Each event draws its own gamma parameters.
    II,
}

fn default_case2_theta1() -> (f64, f64) {
    (0.0, 10.0)
}

fn default_case2_theta2() -> (f64, f64) {
    (0.0, 2.0)
}

fn default_dt() -> f64 {
    1.0
}

/// JSON experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub case: Case,
    pub lambda_grid: Vec<f64>,
    /// Events per signal; ignored when `horizon` is set.
    pub events_per_signal: usize,
    /// Observation length in seconds; when set, signals hold every arrival up
    /// to this time instead of a fixed event count.
    #[serde(default)]
    pub horizon: Option<f64>,
    pub replications: usize,
    pub sigma: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Samples appended after the last arrival; defaults to `tau`.
    #[serde(default)]
    pub tail: Option<usize>,
    pub shape_grid: ShapeGridConfig,
    #[serde(default = "default_case2_theta1")]
    pub case2_theta1: (f64, f64),
    #[serde(default = "default_case2_theta2")]
    pub case2_theta2: (f64, f64),
    #[serde(default = "EnergyModel::reference")]
    pub energy: EnergyModel,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub evaluate_bounds: bool,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return invalid("lambda grid must be non-empty with positive entries");
        }
        if self.replications == 0 {
            return invalid("replications must be at least 1");
        }
        if self.horizon.is_none() && self.events_per_signal == 0 {
            return invalid("events_per_signal must be at least 1");
        }
        if let Some(h) = self.horizon {
            if !(h > 0.0 && h.is_finite()) {
                return invalid(format!("horizon must be positive, got {h}"));
            }
        }
        if !(self.sigma > 0.0) || !(self.dt > 0.0) {
            return invalid("sigma and dt must be positive");
        }
        self.shape_grid.to_grid()?;
        self.pipeline.eta.resolve(self.sigma)?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One simulated signal and everything estimated from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub lambda_index: usize,
    pub replication: usize,
    pub seed: u64,
    pub lambda_true: f64,
    pub n_samples: usize,
    pub m_true: usize,
    pub p0_size: usize,
    pub lambda_c: Option<f64>,
    pub lambda_opt: Option<f64>,
    pub lambda_hat: Option<f64>,
    pub lambda_std: Option<f64>,
    pub m_hat: Option<usize>,
    pub selected_r: Option<f64>,
    pub beta_l0: Option<usize>,
    pub eta: f64,
    pub alpha: Option<f64>,
    pub bounds: Option<BoundSummary>,
    /// Empty when the run completed; otherwise `;`-separated failure notes.
    pub flags: String,
}

/// Bound quantities kept per run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundSummary {
    pub r_admissible: bool,
    pub rho_r: Option<f64>,
    pub a_rho: Option<usize>,
    pub mu: Option<f64>,
    pub a_mu: Option<usize>,
    pub upper_gap: Option<f64>,
    pub upper_prob_raw: Option<f64>,
    pub upper_prob: Option<f64>,
    pub lower_gap: Option<f64>,
    pub lower_prob_raw: Option<f64>,
    pub lower_prob: Option<f64>,
}

impl From<&BoundReport> for BoundSummary {
    fn from(b: &BoundReport) -> Self {
        let up = b.upper_gap.value();
        let lo = b.lower_gap.value();
        Self {
            r_admissible: b.r_admissibility.admissible,
            rho_r: b.rho_r.value().map(|l| l.rho),
            a_rho: b.rho_r.value().map(|l| l.radius),
            mu: b.mu.value().map(|l| l.rho),
            a_mu: b.mu.value().map(|l| l.radius),
            upper_gap: up.map(|g| g.bound),
            upper_prob_raw: up.map(|g| g.probability.raw),
            upper_prob: up.map(|g| g.probability.clipped),
            lower_gap: lo.map(|g| g.bound),
            lower_prob_raw: lo.map(|g| g.probability.raw),
            lower_prob: lo.map(|g| g.probability.clipped),
        }
    }
}

/// Per-rate statistics of one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lambda_true: f64,
    pub estimator: String,
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Least-squares line `lambda_hat = slope * lambda_opt + intercept` and the
/// Pearson correlation of the pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub correlation: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub fit: Option<LinearFit>,
}

/// Salts of the independent random streams of one run.
const SALT_ARRIVALS: u64 = 1;
const SALT_ENERGIES: u64 = 2;
const SALT_SHAPES: u64 = 3;
const SALT_NOISE: u64 = 4;

/// Inputs of one run, built before any estimation.
pub struct Simulated {
    pub truth: GroundTruth,
    pub dict: Dictionary,
    pub signal: crate::signal::SampledSignal,
}

/// Simulates the signal of run `seed` at rate `lambda`.
pub fn simulate_run(config: &ExperimentConfig, shape_grid: &ShapeGrid, lambda: f64, seed: u64) -> Result<Simulated> {
    let horizon = match config.horizon {
        Some(t) => Horizon::TimeLimit(t),
        None => Horizon::EventCount(config.events_per_signal),
    };
    let arrivals = sample_poisson_process(lambda, horizon, derive_seed(seed, SALT_ARRIVALS))?;
    let t_end = match config.horizon {
        Some(t) => t,
        None => arrivals.last().copied().unwrap_or(0.0),
    };
    let tail = config.tail.unwrap_or(shape_grid.tau());
    let grid = SamplingGrid::covering(t_end, tail, config.dt)?;
    let dict = Dictionary::new(shape_grid.clone(), grid)?;
    let m = arrivals.len();
    let e = &config.energy;
    let energies = sample_energies(m, e.mean, e.std, e.bounds, derive_seed(seed, SALT_ENERGIES))?;
    let shapes = match config.case {
        Case::I => sample_column_shapes(m, dict.p(), derive_seed(seed, SALT_SHAPES))?,
        Case::II => sample_gamma_shapes(
            m,
            config.case2_theta1,
            config.case2_theta2,
            derive_seed(seed, SALT_SHAPES),
        )?,
    };
    let truth = GroundTruth::new(arrivals, energies, shapes, lambda)?;
    let signal = synthesize_signal(&truth, &dict, config.sigma, derive_seed(seed, SALT_NOISE))?;
    Ok(Simulated { truth, dict, signal })
}

fn run_one(config: &ExperimentConfig, shape_grid: &ShapeGrid, lambda_index: usize, replication: usize) -> RunRecord {
    let lambda = config.lambda_grid[lambda_index];
    let seed = config
        .seed
        .wrapping_add((lambda_index * config.replications + replication) as u64);
    let eta = config.pipeline.eta.resolve(config.sigma).unwrap_or(f64::NAN);
    let mut rec = RunRecord {
        lambda_index,
        replication,
        seed,
        lambda_true: lambda,
        n_samples: 0,
        m_true: 0,
        p0_size: 0,
        lambda_c: None,
        lambda_opt: None,
        lambda_hat: None,
        lambda_std: None,
        m_hat: None,
        selected_r: None,
        beta_l0: None,
        eta,
        alpha: None,
        bounds: None,
        flags: String::new(),
    };
    let flag = |rec: &mut RunRecord, note: String| {
        if !rec.flags.is_empty() {
            rec.flags.push(';');
        }
        rec.flags.push_str(&note.replace([',', '\n'], " "));
    };
    let sim = match simulate_run(config, shape_grid, lambda, seed) {
        Ok(s) => s,
        Err(e) => {
            flag(&mut rec, format!("simulation: {e}"));
            return rec;
        }
    };
    let grid = sim.dict.grid();
    rec.n_samples = grid.n_samples();
    rec.m_true = sim.truth.len();
    match ideal_rate(&sim.truth) {
        Ok(v) => rec.lambda_c = Some(v),
        Err(e) => flag(&mut rec, format!("lambda_c: {e}")),
    }
    let p0 = optimal_index_set(sim.truth.arrivals(), grid).unwrap_or_default();
    rec.p0_size = p0.len();
    match optimal_rate(&p0, grid.dt()) {
        Ok(v) => rec.lambda_opt = Some(v),
        Err(e) => flag(&mut rec, format!("lambda_opt: {e}")),
    }
    let out = match run_pipeline(&sim.dict, &sim.signal, config.sigma, &config.pipeline) {
        Ok(o) => o,
        Err(e) => {
            flag(&mut rec, format!("pipeline: {e}"));
            return rec;
        }
    };
    rec.selected_r = Some(out.events.r);
    rec.beta_l0 = Some(out.beta.l0());
    rec.m_hat = Some(out.events.m_hat);
    match &out.lambda_hat {
        Ok(v) => rec.lambda_hat = Some(*v),
        Err(e) => flag(&mut rec, format!("lambda_hat: {e}")),
    }
    match &out.lambda_std {
        Ok(v) => rec.lambda_std = Some(*v),
        Err(e) => flag(&mut rec, format!("lambda_std: {e}")),
    }
    if config.evaluate_bounds {
        match bounds_for(config, &sim, &out, p0.len()) {
            Ok((alpha, report)) => {
                rec.alpha = Some(alpha);
                rec.bounds = Some(BoundSummary::from(&report));
            }
            Err(e) => flag(&mut rec, format!("bounds: {e}")),
        }
    }
    rec
}

fn bounds_for(
    config: &ExperimentConfig,
    sim: &Simulated,
    out: &crate::estimation::PipelineOutput,
    p0_size: usize,
) -> Result<(f64, BoundReport)> {
    let (e_min, e_max) = config.energy.resolved_bounds();
    let alpha = discrepancy_alpha(&sim.truth, &sim.dict, e_min, e_max)?;
    let profile = sim.dict.correlation_profile()?;
    let grid = sim.dict.grid();
    let inputs = BoundInputs {
        e_min,
        e_max,
        sigma: config.sigma,
        alpha,
        g_min: sim.dict.gram_min(),
        g_mass: profile.g_mass(),
        tau: sim.dict.tau(),
        p: sim.dict.p(),
        n: grid.n_samples(),
        r: out.events.r,
        eta: out.events.eta,
        dt: grid.dt(),
    };
    let report = evaluate_bounds(
        &profile,
        inputs,
        &out.events,
        out.beta.l0(),
        sim.truth.lambda_true(),
        p0_size,
    )?;
    Ok((alpha, report))
}

/// Runs every `(lambda, replication)` pair. Runs are independent and seeded
/// by `seed + run index`, so the output does not depend on the thread count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResults> {
    config.validate()?;
    let shape_grid = config.shape_grid.to_grid()?;
    let jobs: Vec<(usize, usize)> = (0..config.lambda_grid.len())
        .flat_map(|l| (0..config.replications).map(move |r| (l, r)))
        .collect();
    let mut records: Vec<RunRecord> = jobs
        .par_iter()
        .map(|&(l, r)| run_one(config, &shape_grid, l, r))
        .collect();
    records.sort_by_key(|r| (r.lambda_index, r.replication));
    let summary = summarize(&records);
    let fit = fit_pairs(&records);
    Ok(ExperimentResults {
        config: config.clone(),
        records,
        summary,
        fit,
    })
}

/// Type-7 sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Mean and unbiased variance (zero for a single value).
pub fn mean_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    (mean, var)
}

pub const ESTIMATORS: [&str; 4] = ["lambda_c", "lambda_opt", "lambda_hat", "lambda_std"];

fn estimator_value(rec: &RunRecord, name: &str) -> Option<f64> {
    match name {
        "lambda_c" => rec.lambda_c,
        "lambda_opt" => rec.lambda_opt,
        "lambda_hat" => rec.lambda_hat,
        "lambda_std" => rec.lambda_std,
        _ => None,
    }
}

/// Summary statistics per `(lambda, estimator)` over the defined values.
pub fn summarize(records: &[RunRecord]) -> Vec<SummaryRow> {
    let mut by_lambda: BTreeMap<usize, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_lambda.entry(r.lambda_index).or_default().push(r);
    }
    let mut rows = Vec::new();
    for group in by_lambda.values() {
        for name in ESTIMATORS {
            let mut values: Vec<f64> = group.iter().filter_map(|r| estimator_value(r, name)).collect();
            let (mean, variance) = mean_variance(&values);
            values.sort_by(f64::total_cmp);
            rows.push(SummaryRow {
                lambda_true: group[0].lambda_true,
                estimator: name.to_string(),
                count: values.len(),
                mean,
                variance,
                q1: quantile_sorted(&values, 0.25),
                median: quantile_sorted(&values, 0.5),
                q3: quantile_sorted(&values, 0.75),
            });
        }
    }
    rows
}

/// Pearson correlation of paired samples.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, _) = mean_variance(x);
    let (my, _) = mean_variance(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

fn pairs(records: &[RunRecord]) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| Some((r.lambda_opt?, r.lambda_hat?)))
        .collect()
}

/// Ordinary least squares of `lambda_hat` on `lambda_opt`.
pub fn fit_pairs(records: &[RunRecord]) -> Option<LinearFit> {
    let pts = pairs(records);
    if pts.len() < 2 {
        return None;
    }
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (mx, vx) = mean_variance(&x);
    let (my, _) = mean_variance(&y);
    let cov = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() - 1) as f64;
    let slope = cov / vx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        correlation: pearson(&x, &y),
        count: pts.len(),
    })
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

fn opt_int(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const RECORD_HEADER: &str = "lambda_index,replication,seed,lambda_true,n_samples,m_true,p0_size,\
lambda_c,lambda_opt,lambda_hat,lambda_std,m_hat,selected_r,beta_l0,eta,alpha,\
r_admissible,rho_r,a_rho,mu,a_mu,upper_gap,upper_prob_raw,upper_prob,\
lower_gap,lower_prob_raw,lower_prob,flags";

/// `records.csv` content; missing values are empty fields.
pub fn records_csv(records: &[RunRecord]) -> String {
    let mut out = String::from(RECORD_HEADER);
    out.push('\n');
    for r in records {
        let b = r.bounds;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.lambda_index,
            r.replication,
            r.seed,
            fmt_real(r.lambda_true),
            r.n_samples,
            r.m_true,
            r.p0_size,
            opt_real(r.lambda_c),
            opt_real(r.lambda_opt),
            opt_real(r.lambda_hat),
            opt_real(r.lambda_std),
            opt_int(r.m_hat),
            opt_real(r.selected_r),
            opt_int(r.beta_l0),
            fmt_real(r.eta),
            opt_real(r.alpha),
            b.map(|b| b.r_admissible.to_string()).unwrap_or_default(),
            opt_real(b.and_then(|b| b.rho_r)),
            opt_int(b.and_then(|b| b.a_rho)),
            opt_real(b.and_then(|b| b.mu)),
            opt_int(b.and_then(|b| b.a_mu)),
            opt_real(b.and_then(|b| b.upper_gap)),
            opt_real(b.and_then(|b| b.upper_prob_raw)),
            opt_real(b.and_then(|b| b.upper_prob)),
            opt_real(b.and_then(|b| b.lower_gap)),
            opt_real(b.and_then(|b| b.lower_prob_raw)),
            opt_real(b.and_then(|b| b.lower_prob)),
            r.flags,
        );
    }
    out
}

pub const SUMMARY_HEADER: &str = "lambda_true,estimator,count,mean,variance,q1,median,q3";

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for s in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            fmt_real(s.lambda_true),
            s.estimator,
            s.count,
            fmt_real(s.mean),
            fmt_real(s.variance),
            fmt_real(s.q1),
            fmt_real(s.median),
            fmt_real(s.q3),
        );
    }
    out
}

pub const SCATTER_HEADER: &str =
    "lambda_true,replication,lambda_opt,lambda_hat,fit_slope,fit_intercept,fit_correlation";

/// One row per run with both rates defined; the fit columns repeat the
/// pooled least-squares line on every row.
pub fn scatter_csv(records: &[RunRecord], fit: Option<LinearFit>) -> String {
    let mut out = String::from(SCATTER_HEADER);
    out.push('\n');
    let (s, i, c) = fit.map_or((String::new(), String::new(), String::new()), |f| {
        (fmt_real(f.slope), fmt_real(f.intercept), fmt_real(f.correlation))
    });
    for r in records {
        if let (Some(o), Some(h)) = (r.lambda_opt, r.lambda_hat) {
            let _ = writeln!(
                out,
                "{},{},{},{},{s},{i},{c}",
                fmt_real(r.lambda_true),
                r.replication,
                fmt_real(o),
                fmt_real(h)
            );
        }
    }
    out
}

/// Writes `records.csv`, `summary.csv` and `scatter_lambda_opt.csv`.
pub fn emit_report(results: &ExperimentResults, out_dir: &Path) -> Result<()> {
    if results.records.is_empty() {
        return Err(Error::InvalidParameter("no records to report".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("records.csv"), records_csv(&results.records))?;
    std::fs::write(out_dir.join("summary.csv"), summary_csv(&results.summary))?;
    std::fs::write(
        out_dir.join("scatter_lambda_opt.csv"),
        scatter_csv(&results.records, results.fit),
    )?;
    Ok(())
}

//! Computable pieces of the theory: the Gaussian tail surrogate, the block
//! threshold and `r` admissibility condition, the support-recovery
//! probabilities, the correlation levels `rho_r` and `mu`, the two confidence
//! bounds on `lambda_hat - lambda_opt`, the separation probability of a
//! Poisson sample path, the discrepancy `alpha` and the irrepresentability
//! check.
//!
//! Probabilities are always returned raw and clipped to `[0, 1]`. A bound
//! whose hypotheses fail is returned as [`Bound::Inapplicable`] with the
//! reason, never as an error.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::{CorrelationProfile, Dictionary};
use crate::error::{invalid, Result};
use crate::estimation::EventEstimate;
use crate::signal::{isolated_pulse, nearest_index, noise_free_signal, GroundTruth};

/// Every scalar the bounds depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub e_min: f64,
    pub e_max: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// `min_{i,j} G(i,j)` of the single-block Gram matrix.
    pub g_min: f64,
    pub g_mass: f64,
    pub tau: usize,
    pub p: usize,
    pub n: usize,
    pub r: f64,
    pub eta: f64,
    pub dt: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.e_min > 0.0 && self.e_min <= self.e_max) {
            return invalid(format!(
                "energy bounds must satisfy 0 < e_min <= e_max, got ({}, {})",
                self.e_min, self.e_max
            ));
        }
        if !(self.sigma > 0.0) || !(self.alpha >= 0.0) || !(self.dt > 0.0) {
            return invalid("sigma and dt must be positive and alpha non-negative");
        }
        if self.p == 0 || self.n == 0 {
            return invalid("p and n must be positive");
        }
        Ok(())
    }

    fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }

    /// Argument of the first tail term, `sqrt(N) E_min^2 g_min^{1/2} / (4 E_max sigma)`.
    fn energy_tail_arg(&self) -> f64 {
        self.sqrt_n() * self.e_min.powi(2) * self.g_min.sqrt() / (4.0 * self.e_max * self.sigma)
    }

    /// Argument of the second tail term, `sqrt(N) (r - alpha) / sigma`.
    fn noise_tail_arg(&self) -> f64 {
        self.sqrt_n() * (self.r - self.alpha) / self.sigma
    }
}

/// A probability before and after clipping to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Probability {
    pub raw: f64,
    pub clipped: f64,
}

impl Probability {
    pub fn new(raw: f64) -> Self {
        Self {
            raw,
            clipped: raw.clamp(0.0, 1.0),
        }
    }
}

/// Outcome of a bound evaluator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "snake_case")]
pub enum Bound<T> {
    Applicable(T),
    Inapplicable { reason: String },
}

impl<T> Bound<T> {
    fn no(reason: impl Into<String>) -> Self {
        Bound::Inapplicable { reason: reason.into() }
    }

    pub fn value(&self) -> Option<&T> {
        match self {
            Bound::Applicable(v) => Some(v),
            Bound::Inapplicable { .. } => None,
        }
    }

    pub fn is_applicable(&self) -> bool {
        matches!(self, Bound::Applicable(_))
    }
}

/// `t(x) = exp(-x^2 / 2) / (x sqrt(2 pi))` for `x > 0`.
pub fn tail_t(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return invalid(format!("tail function needs x > 0, got {x}"));
    }
    Ok((-0.5 * x * x).exp() / (x * (2.0 * std::f64::consts::PI).sqrt()))
}

/// `t(x)` where the caller has already ruled out non-positive arguments.
fn tail(x: f64) -> f64 {
    tail_t(x).unwrap_or(f64::NAN)
}

/// Block threshold `E_min^2 g_min^{1/2} / (4 (2 tau + 1) E_max)`.
pub fn theoretical_eta(inputs: &BoundInputs) -> Bound<f64> {
    if !(inputs.g_min > 0.0) {
        return Bound::no("min Gram entry is not positive");
    }
    Bound::Applicable(inputs.e_min.powi(2) * inputs.g_min.sqrt() / (4.0 * (2 * inputs.tau + 1) as f64 * inputs.e_max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// `E_min^2 g_min^{1/2} / (2 E_max) - (r + alpha)`; positive when admissible.
    pub margin: f64,
}

/// Strict condition `r + alpha < E_min^2 g_min^{1/2} / (2 E_max)`.
pub fn check_r_admissible(inputs: &BoundInputs) -> Admissibility {
    let limit = inputs.e_min.powi(2) * inputs.g_min.max(0.0).sqrt() / (2.0 * inputs.e_max);
    let margin = limit - (inputs.r + inputs.alpha);
    Admissibility {
        admissible: margin > 0.0,
        margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportProbabilities {
    /// Every true block has a heavy estimated block nearby.
    pub forward: Probability,
    /// A heavy estimated block has a true block nearby.
    pub converse: Probability,
}

/// Forward and converse support-recovery probabilities; `beta_l0` is the
/// coefficient count of the estimated block (or of the whole regressor when
/// used as a union bound).
pub fn detection_probabilities(inputs: &BoundInputs, beta_l0: usize) -> Bound<SupportProbabilities> {
    if !(inputs.g_min > 0.0) {
        return Bound::no("min Gram entry is not positive");
    }
    if !(inputs.r > inputs.alpha) {
        return Bound::no("r does not exceed alpha");
    }
    let p = inputs.p as f64;
    let t_energy = tail(inputs.energy_tail_arg());
    let t_noise = tail(inputs.noise_tail_arg());
    let forward = 1.0 - p * t_energy - p * (2 * inputs.tau + 1) as f64 * t_noise;
    let converse = 1.0 - beta_l0 as f64 * t_noise;
    Bound::Applicable(SupportProbabilities {
        forward: Probability::new(forward),
        converse: Probability::new(converse),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub rho: f64,
    pub radius: usize,
}

/// Supremum of `{rho in [0, 1] : rho * slope(a_rho) <= offset(a_rho)}` where
/// `a_rho` is the profile radius, together with a separate rule at `rho = 1`.
/// The radius is a left-continuous step function of `rho`, so on each piece
/// the condition is linear and its supremum is either the piece end or the
/// crossing point.
fn piecewise_sup(
    profile: &CorrelationProfile,
    coeffs: impl Fn(usize) -> (f64, f64),
    at_one: impl Fn(usize) -> bool,
) -> Option<f64> {
    let radius = |rho: f64| profile.radius(rho).unwrap_or(0);
    let mut breaks: Vec<f64> = profile
        .values()
        .iter()
        .map(|v| v.clamp(0.0, 1.0))
        .chain([0.0, 1.0])
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    if at_one(radius(1.0)) {
        return Some(1.0);
    }
    let mut best = (coeffs(radius(0.0)).1 >= 0.0).then_some(0.0);
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let (slope, offset) = coeffs(radius(hi));
        let top = hi;
        let sup = if slope > 0.0 {
            let cross = offset / slope;
            if cross > lo {
                Some(cross.min(top))
            } else {
                None
            }
        } else if slope < 0.0 {
            let cross = offset / slope;
            if cross <= top {
                Some(top)
            } else {
                None
            }
        } else if offset >= 0.0 {
            Some(top)
        } else {
            None
        };
        if let Some(s) = sup {
            best = Some(best.map_or(s, |b: f64| b.max(s)));
        }
    }
    best
}

fn c_coefficients(inputs: &BoundInputs) -> (f64, f64) {
    let sg = inputs.g_min.sqrt();
    let c0 = inputs.e_min.powi(2) * sg / inputs.e_max - inputs.alpha - inputs.r;
    let k = (2 * inputs.tau + 1) as f64 * inputs.g_mass * inputs.p as f64 * inputs.e_max / sg;
    (c0, k)
}

/// `C_{r, rho}`.
pub fn c_r_rho(inputs: &BoundInputs, rho: f64) -> f64 {
    let (c0, k) = c_coefficients(inputs);
    c0 - k * rho
}

/// `rho_r = sup { rho : eta <= C_{r,rho} / ((1 - rho) |T_rho|) }` with
/// `|T_rho| = 2 a_rho + 1`; at `rho = 1` the condition holds iff
/// `C_{r,1} > 0`. Inapplicable when no `rho` qualifies.
pub fn rho_r(profile: &CorrelationProfile, inputs: &BoundInputs) -> Bound<Level> {
    if !(inputs.g_min > 0.0) {
        return Bound::no("min Gram entry is not positive");
    }
    if !(inputs.eta > 0.0) {
        return Bound::no("eta is not positive");
    }
    let (c0, k) = c_coefficients(inputs);
    let eta = inputs.eta;
    // eta (1 - rho) s <= c0 - k rho  <=>  rho (k - eta s) <= c0 - eta s
    let coeffs = |a: usize| {
        let s = (2 * a + 1) as f64;
        (k - eta * s, c0 - eta * s)
    };
    match piecewise_sup(profile, coeffs, |_| c0 - k > 0.0) {
        Some(rho) => Bound::Applicable(Level {
            rho,
            radius: profile.radius(rho).unwrap_or(0),
        }),
        None => Bound::no("no correlation level satisfies the threshold condition"),
    }
}

/// `mu = sup { rho : rho (2 tau - 2 a_rho) <= eta g_min^{3/2} / E_max }`.
pub fn mu_level(profile: &CorrelationProfile, inputs: &BoundInputs) -> Bound<Level> {
    if !(inputs.g_min > 0.0) {
        return Bound::no("min Gram entry is not positive");
    }
    let tau = profile.tau();
    let rhs = inputs.eta * inputs.g_min.powf(1.5) / inputs.e_max;
    let coeffs = |a: usize| (2.0 * (tau.saturating_sub(a)) as f64, rhs);
    let at_one = |a: usize| 2.0 * (tau.saturating_sub(a)) as f64 <= rhs;
    match piecewise_sup(profile, coeffs, at_one) {
        Some(rho) => Bound::Applicable(Level {
            rho,
            radius: profile.radius(rho).unwrap_or(0),
        }),
        None => Bound::no("no correlation level satisfies the condition"),
    }
}

/// Number of connected components of a union of integer intervals
/// `[lo, hi]`; intervals that overlap or touch (`next.lo <= hi + 1`) merge.
pub fn interval_count(intervals: &[(i64, i64)]) -> usize {
    let mut sorted: Vec<(i64, i64)> = intervals.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    sorted.sort_unstable();
    let mut count = 0;
    let mut end: Option<i64> = None;
    for (lo, hi) in sorted {
        match end {
            Some(e) if lo <= e + 1 => end = Some(e.max(hi)),
            _ => {
                count += 1;
                end = Some(hi);
            }
        }
    }
    count
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapBound {
    pub bound: f64,
    pub bracket: f64,
    pub probability: Probability,
}

/// Block indices of the estimated arrivals.
fn edge_blocks(events: &EventEstimate, dt: f64) -> Vec<i64> {
    events.t_hat.iter().map(|&t| nearest_index(t, dt)).collect()
}

fn common_checks(events: &EventEstimate, inputs: &BoundInputs) -> std::result::Result<(f64, i64, i64), String> {
    if events.m_hat == 0 {
        return Err("no estimated event".into());
    }
    let t_last = *events.t_hat.last().unwrap();
    if !(t_last > 0.0) {
        return Err("last estimated arrival at time 0".into());
    }
    if !(inputs.r > inputs.alpha) {
        return Err("r does not exceed alpha".into());
    }
    if !(inputs.g_min > 0.0) {
        return Err("min Gram entry is not positive".into());
    }
    let max_j = *events
        .active_blocks
        .last()
        .ok_or_else(|| "empty block pattern".to_string())? as i64;
    let last_interior = inputs.n as i64 - 1 - inputs.tau as i64;
    if last_interior < inputs.tau as i64 {
        return Err("grid too short for an interior block".into());
    }
    if max_j > last_interior {
        return Err("estimated pattern reaches the right boundary blocks".into());
    }
    Ok((t_last / inputs.dt, max_j, last_interior))
}

/// Upper confidence bound on `lambda_hat - lambda_opt`:
/// `lambda_hat [1 - (T_hat_last / dt) / (a_rho + max J) * I(U V_{a_mu}(T_hat_j)) / M_hat]`.
pub fn upper_gap_bound(
    events: &EventEstimate,
    a_rho: usize,
    a_mu: usize,
    inputs: &BoundInputs,
    beta_l0: usize,
) -> Bound<GapBound> {
    let (t_last, max_j, _) = match common_checks(events, inputs) {
        Ok(v) => v,
        Err(reason) => return Bound::no(reason),
    };
    let denom = a_rho as f64 + max_j as f64;
    if !(denom > 0.0) {
        return Bound::no("a_rho + max J is zero");
    }
    let m_hat = events.m_hat as f64;
    let lambda_hat = m_hat / (t_last * inputs.dt);
    let n_last = inputs.n as i64 - 1;
    let windows: Vec<(i64, i64)> = edge_blocks(events, inputs.dt)
        .into_iter()
        .map(|k| ((k - a_mu as i64).max(0), (k + a_mu as i64).min(n_last)))
        .collect();
    let components = interval_count(&windows) as f64;
    let bracket = 1.0 - t_last / denom * components / m_hat;
    let p = inputs.p as f64;
    let t_energy = tail(inputs.energy_tail_arg());
    let t_noise = tail(inputs.noise_tail_arg());
    let raw = 1.0 - p * t_energy - p * (2 * inputs.tau + 1) as f64 * t_noise - beta_l0 as f64 * t_noise;
    Bound::Applicable(GapBound {
        bound: lambda_hat * bracket,
        bracket,
        probability: Probability::new(raw),
    })
}

/// Lower confidence bound on `lambda_hat - lambda_opt`:
/// `lambda_hat [1 - |J| / M_hat * (T_hat_last / dt) / (max J - a_mu)]`, valid
/// when `(lambda dt)^2 N a_rho < 1`.
pub fn lower_gap_bound(
    events: &EventEstimate,
    a_rho: usize,
    a_mu: usize,
    inputs: &BoundInputs,
    lambda_nominal: f64,
    beta_l0: usize,
    p0_size: usize,
) -> Bound<GapBound> {
    let (t_last, max_j, _) = match common_checks(events, inputs) {
        Ok(v) => v,
        Err(reason) => return Bound::no(reason),
    };
    let hypothesis = (lambda_nominal * inputs.dt).powi(2) * inputs.n as f64 * a_rho as f64;
    if !(hypothesis < 1.0) {
        return Bound::no(format!("(lambda dt)^2 N a_rho = {hypothesis} is not below 1"));
    }
    let denom = max_j as f64 - a_mu as f64;
    if !(denom > 0.0) {
        return Bound::no("max J does not exceed a_mu");
    }
    let m_hat = events.m_hat as f64;
    let lambda_hat = m_hat / (t_last * inputs.dt);
    let bracket = 1.0 - events.active_blocks.len() as f64 / m_hat * t_last / denom;
    let p = inputs.p as f64;
    let t_energy = tail(inputs.energy_tail_arg());
    let t_noise = tail(inputs.noise_tail_arg());
    let per_block = p * t_energy + (p * (2 * inputs.tau + 1) as f64 + beta_l0 as f64) * t_noise;
    let raw = 1.0 - hypothesis - p0_size as f64 * per_block;
    Bound::Applicable(GapBound {
        bound: lambda_hat * bracket,
        bracket,
        probability: Probability::new(raw),
    })
}

/// `1 - lambda^2 T delta`, the probability that every interarrival time of a
/// Poisson path on `[0, T]` exceeds `delta`; inapplicable unless
/// `lambda^2 T delta < 1`.
pub fn separation_probability(lambda: f64, t_total: f64, delta: f64) -> Bound<f64> {
    if !(lambda > 0.0 && t_total > 0.0 && delta >= 0.0) {
        return Bound::no("lambda and T must be positive and delta non-negative");
    }
    let h = lambda * lambda * t_total * delta;
    if h < 1.0 {
        Bound::Applicable(1.0 - h)
    } else {
        Bound::no(format!("lambda^2 T delta = {h} is not below 1"))
    }
}

/// Lawson-Hanson non-negative least squares `min ||a x - b||`, `x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())) * b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * (a.nrows().max(n) as f64);
    let solve = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let mut z = DVector::zeros(n);
        if idx.is_empty() {
            return z;
        }
        let sub = a.select_columns(idx.iter());
        let sol = sub
            .clone()
            .svd(true, true)
            .solve(b, 1e-14)
            .unwrap_or_else(|_| DVector::zeros(idx.len()));
        for (i, &j) in idx.iter().enumerate() {
            z[j] = sol[i];
        }
        z
    };
    for _ in 0..(3 * n + 10) {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else {
            break;
        };
        passive[j] = true;
        loop {
            let z = solve(&passive);
            let bad: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= 0.0).collect();
            if bad.is_empty() {
                x = z;
                break;
            }
            let step = bad.iter().map(|&i| x[i] / (x[i] - z[i])).fold(f64::INFINITY, f64::min);
            x = &x + (&z - &x) * step;
            for i in 0..n {
                if passive[i] && x[i] <= tol.max(0.0) {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    x.map(|v| v.max(0.0))
}

/// Upper estimate of the discrepancy `alpha = ||y_bar - A beta|| / sqrt(N)`
/// over models supported on the nearest blocks of the arrivals, with every
/// block norm `||A_i x_i|| / sqrt(N)` inside `[e_min, e_max]`.
///
/// The pulses of all events sharing a nearest block are fitted jointly onto
/// that block by non-negative least squares; a fit whose norm leaves the
/// window is rescaled onto the nearest window edge.
pub fn discrepancy_alpha(truth: &GroundTruth, dict: &Dictionary, e_min: f64, e_max: f64) -> Result<f64> {
    if !(e_min > 0.0 && e_min <= e_max) {
        return invalid(format!(
            "energy window must satisfy 0 < e_min <= e_max, got ({e_min}, {e_max})"
        ));
    }
    let grid = dict.grid();
    let n = grid.n_samples();
    let sqrt_n = (n as f64).sqrt();
    let mut per_block: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (t, e, shape) in truth.events() {
        let k = nearest_index(t, grid.dt());
        if k < 0 || k as usize >= n {
            return invalid(format!("arrival {t} has no block on the grid"));
        }
        let pulse = isolated_pulse(t, e, shape, dict)?;
        let acc = per_block.entry(k as usize).or_insert_with(|| vec![0.0; n]);
        for (a, v) in acc.iter_mut().zip(&pulse) {
            *a += v;
        }
    }
    let y_bar = noise_free_signal(truth, dict)?;
    let p = dict.p();
    let mut model = vec![0.0; n];
    for (&k, target) in &per_block {
        let len = dict.support_len(k);
        if len == 0 {
            return invalid(format!(
                "block {k} has an empty support, no model meets the energy window"
            ));
        }
        let a = DMatrix::from_fn(len, p, |i, s| dict.column(k * p + s).1[i]);
        let b = DVector::from_iterator(len, target[k + 1..k + 1 + len].iter().copied());
        let mut x = nnls(&a, &b);
        let mut norm = (&a * &x).norm() / sqrt_n;
        if norm == 0.0 {
            let s = (0..p)
                .max_by(|&i, &j| a.column(i).dot(&b).total_cmp(&a.column(j).dot(&b)))
                .unwrap_or(0);
            x = DVector::zeros(p);
            x[s] = 1.0;
            norm = a.column(s).norm() / sqrt_n;
            if norm == 0.0 {
                return invalid(format!("block {k} has only zero columns"));
            }
        }
        let scale = if norm < e_min {
            e_min / norm
        } else if norm > e_max {
            e_max / norm
        } else {
            1.0
        };
        for s in 0..p {
            if x[s] > 0.0 {
                dict.add_column(k * p + s, scale * x[s], &mut model);
            }
        }
    }
    let diff: f64 = y_bar.iter().zip(&model).map(|(a, b)| (a - b).powi(2)).sum();
    Ok(diff.sqrt() / sqrt_n)
}

/// Result of the irrepresentability test on `M = G_{P0c,P0} G_{P0,P0}^{-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrepresentabilityReport {
    /// `None` when `G_{P0,P0}` is singular.
    pub passes: Option<bool>,
    pub singular: bool,
    pub entries_nonnegative: bool,
    pub min_entry: f64,
    pub max_row_sum: f64,
    /// `max(2 alpha / eta0, (2 sqrt(2) sigma / eta0) sqrt(log((N - |P0|) p) / N))`.
    pub r_threshold: f64,
}

const IRREP_LIMIT: usize = 4_000_000;
const IRREP_SIGN_TOL: f64 = 1e-10;

/// Checks `G_{P0c,P0} G_{P0,P0}^{-1} z < (1 - eta0) 1` for every `z <= 1`,
/// which holds iff every entry of the product is non-negative and every row
/// sum is below `1 - eta0`. Blocks farther than `tau` from every block of
/// `P0` contribute zero rows and are skipped.
pub fn irrepresentability_check(
    dict: &Dictionary,
    p0: &BTreeSet<usize>,
    eta0: f64,
    alpha: f64,
    sigma: f64,
) -> Result<IrrepresentabilityReport> {
    if !(eta0 > 0.0 && eta0 < 1.0) {
        return invalid(format!("eta0 must lie in (0, 1), got {eta0}"));
    }
    let n = dict.n_blocks();
    let p = dict.p();
    if p0.is_empty() || p0.iter().any(|&k| k >= n) {
        return invalid("P0 must be a non-empty set of block indices on the grid");
    }
    let tau = dict.tau();
    let inside: Vec<usize> = p0.iter().flat_map(|&k| k * p..(k + 1) * p).collect();
    let near: BTreeSet<usize> = p0
        .iter()
        .flat_map(|&k| k.saturating_sub(tau)..=(k + tau).min(n - 1))
        .filter(|j| !p0.contains(j))
        .collect();
    let outside: Vec<usize> = near.iter().flat_map(|&j| j * p..(j + 1) * p).collect();
    if inside.len() * inside.len().max(outside.len()) > IRREP_LIMIT {
        return invalid(format!(
            "{} x {} Gram product exceeds the {IRREP_LIMIT}-entry limit",
            outside.len(),
            inside.len()
        ));
    }
    let close = |a: usize, b: usize| dict.block_of(a).abs_diff(dict.block_of(b)) < tau;
    let g_in = DMatrix::from_fn(inside.len(), inside.len(), |i, j| {
        let (a, b) = (inside[i], inside[j]);
        if close(a, b) {
            dict.column_dot(a, b)
        } else {
            0.0
        }
    });
    let g_out = DMatrix::from_fn(outside.len(), inside.len(), |i, j| {
        let (a, b) = (outside[i], inside[j]);
        if close(a, b) {
            dict.column_dot(a, b)
        } else {
            0.0
        }
    });
    let log_arg = ((n - p0.len()) * p) as f64;
    let noise_term = if log_arg > 1.0 {
        2.0 * 2f64.sqrt() * sigma / eta0 * (log_arg.ln() / n as f64).sqrt()
    } else {
        0.0
    };
    let r_threshold = (2.0 * alpha / eta0).max(noise_term);
    let Some(chol) = g_in.clone().cholesky() else {
        return Ok(IrrepresentabilityReport {
            passes: None,
            singular: true,
            entries_nonnegative: false,
            min_entry: f64::NAN,
            max_row_sum: f64::NAN,
            r_threshold,
        });
    };
    // M = G_out G_in^{-1}  <=>  M^T = G_in^{-1} G_out^T.
    let m = chol.solve(&g_out.transpose()).transpose();
    let min_entry = m.iter().copied().fold(f64::INFINITY, f64::min).min(0.0);
    let max_row_sum = (0..m.nrows()).map(|i| m.row(i).sum()).fold(0.0f64, f64::max);
    let entries_nonnegative = min_entry >= -IRREP_SIGN_TOL;
    Ok(IrrepresentabilityReport {
        passes: Some(entries_nonnegative && max_row_sum < 1.0 - eta0),
        singular: false,
        entries_nonnegative,
        min_entry,
        max_row_sum,
        r_threshold,
    })
}

/// `(max ||beta_m||_1, min ||G beta_m||_inf)` implied for any block of a
/// model inside the energy window.
pub fn block_norm_bounds(g_min: f64, e_min: f64, e_max: f64) -> (f64, f64) {
    let sg = g_min.sqrt();
    (e_max / sg, sg * e_min * e_min / e_max)
}

/// Every bound evaluated for one estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub eta_theoretical: Bound<f64>,
    pub r_admissibility: Admissibility,
    pub support: Bound<SupportProbabilities>,
    pub rho_r: Bound<Level>,
    pub mu: Bound<Level>,
    pub upper_gap: Bound<GapBound>,
    pub lower_gap: Bound<GapBound>,
}

/// Evaluates every bound for an estimate; `beta_l0` counts the pre-threshold
/// non-zero coefficients.
pub fn evaluate_bounds(
    profile: &CorrelationProfile,
    inputs: BoundInputs,
    events: &EventEstimate,
    beta_l0: usize,
    lambda_nominal: f64,
    p0_size: usize,
) -> Result<BoundReport> {
    inputs.validate()?;
    let rho = rho_r(profile, &inputs);
    let mu = mu_level(profile, &inputs);
    let (upper_gap, lower_gap) = match (rho.value(), mu.value()) {
        (Some(r), Some(m)) => (
            upper_gap_bound(events, r.radius, m.radius, &inputs, beta_l0),
            lower_gap_bound(events, r.radius, m.radius, &inputs, lambda_nominal, beta_l0, p0_size),
        ),
        _ => (
            Bound::no("correlation levels undefined"),
            Bound::no("correlation levels undefined"),
        ),
    };
    Ok(BoundReport {
        inputs,
        eta_theoretical: theoretical_eta(&inputs),
        r_admissibility: check_r_admissible(&inputs),
        support: detection_probabilities(&inputs, beta_l0),
        rho_r: rho,
        mu,
        upper_gap,
        lower_gap,
    })
}

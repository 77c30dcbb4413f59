//! Ground-truth Poisson pulse trains and the sampled noisy signal they produce.
//!
//! A signal is `y_i = sum_n E_n * Phi_n(t_i - T_n) + eps_i` on the grid
//! `t_i = i * dt`, `0 <= i < N`, with `eps_i ~ N(0, sigma^2)` i.i.d.
//! Pulse shapes are truncated gamma functions normalized exactly like the
//! dictionary shapes, so `E_n` keeps its energy meaning whether the shape is
//! a dictionary entry (case I) or a free `(theta1, theta2)` pair (case II).

use std::collections::BTreeSet;

use rand::Rng as _;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::dictionary::{Dictionary, GammaShape};
use crate::error::{invalid, Error, Result};
use crate::rng::seeded;

/// Uniform sampling grid `t_i = i * dt`, `0 <= i < n_samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingGrid {
    n_samples: usize,
    dt: f64,
}

impl SamplingGrid {
    /// `n_samples` must be even and at least 2; `dt` must be positive.
    pub fn new(n_samples: usize, dt: f64) -> Result<Self> {
        if n_samples < 2 || !n_samples.is_multiple_of(2) {
            return invalid(format!("n_samples must be even and >= 2, got {n_samples}"));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return invalid(format!("dt must be positive, got {dt}"));
        }
        Ok(Self { n_samples, dt })
    }

    /// Smallest valid grid covering `[0, t_end]` plus `tail` extra samples.
    pub fn covering(t_end: f64, tail: usize, dt: f64) -> Result<Self> {
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return invalid(format!("t_end must be finite and non-negative, got {t_end}"));
        }
        let mut n = (t_end / dt).floor() as usize + tail + 2;
        n += n % 2;
        Self::new(n, dt)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Time of the last sample, `(N - 1) * dt`.
    pub fn end(&self) -> f64 {
        self.time(self.n_samples - 1)
    }
}

/// Stopping rule for the Poisson sampler.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Keep every arrival `<= T`.
    TimeLimit(f64),
    /// Draw exactly `M` arrivals.
    EventCount(usize),
}

/// Shape of one pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseShape {
    /// Index `s` of a dictionary shape (case I).
    Column(usize),
    /// Free gamma parameters (case II).
    Gamma { theta1: f64, theta2: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    arrivals: Vec<f64>,
    energies: Vec<f64>,
    shapes: Vec<PulseShape>,
    lambda_true: f64,
}

impl GroundTruth {
    pub fn new(arrivals: Vec<f64>, energies: Vec<f64>, shapes: Vec<PulseShape>, lambda_true: f64) -> Result<Self> {
        if arrivals.len() != energies.len() || arrivals.len() != shapes.len() {
            return invalid(format!(
                "ground truth lengths differ: {} arrivals, {} energies, {} shapes",
                arrivals.len(),
                energies.len(),
                shapes.len()
            ));
        }
        if arrivals.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("arrivals must be strictly increasing");
        }
        if arrivals.iter().any(|t| !t.is_finite()) {
            return invalid("arrivals must be finite");
        }
        if energies.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return invalid("energies must be positive and finite");
        }
        if !(lambda_true > 0.0) {
            return invalid(format!("lambda must be positive, got {lambda_true}"));
        }
        Ok(Self {
            arrivals,
            energies,
            shapes,
            lambda_true,
        })
    }

    pub fn arrivals(&self) -> &[f64] {
        &self.arrivals
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn shapes(&self) -> &[PulseShape] {
        &self.shapes
    }

    pub fn lambda_true(&self) -> f64 {
        self.lambda_true
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Events `(T_n, E_n, shape_n)` in arrival order.
    pub fn events(&self) -> impl Iterator<Item = (f64, f64, PulseShape)> + '_ {
        self.arrivals
            .iter()
            .zip(&self.energies)
            .zip(&self.shapes)
            .map(|((&t, &e), &s)| (t, e, s))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSignal {
    samples: Vec<f64>,
    grid: SamplingGrid,
    noise_sigma: f64,
}

impl SampledSignal {
    pub fn new(samples: Vec<f64>, grid: SamplingGrid, noise_sigma: f64) -> Result<Self> {
        if samples.len() != grid.n_samples() {
            return invalid(format!(
                "signal has {} samples but the grid has {}",
                samples.len(),
                grid.n_samples()
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return invalid("signal samples must be finite");
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return invalid(format!("sigma must be non-negative, got {noise_sigma}"));
        }
        Ok(Self {
            samples,
            grid,
            noise_sigma,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn grid(&self) -> SamplingGrid {
        self.grid
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Arrival times of a homogeneous Poisson process: cumulative sums of
/// i.i.d. `Exp(lambda)` gaps.
pub fn sample_poisson_process(lambda: f64, horizon: Horizon, seed: u64) -> Result<Vec<f64>> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return invalid(format!("lambda must be positive, got {lambda}"));
    }
    let gaps = Exp::new(lambda).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seeded(seed);
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    match horizon {
        Horizon::EventCount(m) => {
            if m == 0 {
                return invalid("event count must be positive");
            }
            arrivals.reserve(m);
            while arrivals.len() < m {
                t += gaps.sample(&mut rng);
                arrivals.push(t);
            }
        }
        Horizon::TimeLimit(limit) => {
            if !(limit > 0.0 && limit.is_finite()) {
                return invalid(format!("time limit must be positive, got {limit}"));
            }
            loop {
                t += gaps.sample(&mut rng);
                if t > limit {
                    break;
                }
                arrivals.push(t);
            }
        }
    }
    Ok(arrivals)
}

/// Gaussian energy law restricted to `[E_min, E_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub mean: f64,
    pub std: f64,
    #[serde(default)]
    pub bounds: Option<(f64, f64)>,
}

impl EnergyModel {
    /// Mean 50 and variance 5.
    pub fn reference() -> Self {
        Self {
            mean: 50.0,
            std: 5f64.sqrt(),
            bounds: None,
        }
    }

    /// Explicit bounds, or `(max(1e-3, mean - 6 std), mean + 6 std)`.
    pub fn resolved_bounds(&self) -> (f64, f64) {
        self.bounds
            .unwrap_or_else(|| ((self.mean - 6.0 * self.std).max(1e-3), self.mean + 6.0 * self.std))
    }
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// I.i.d. draws from `N(mean, std^2)` restricted to `[max(0, E_min), E_max]`
/// by rejection.
pub fn sample_energies(count: usize, mean: f64, std: f64, bounds: Option<(f64, f64)>, seed: u64) -> Result<Vec<f64>> {
    if !(std > 0.0 && std.is_finite()) || !mean.is_finite() {
        return invalid(format!("need finite mean and positive std, got ({mean}, {std})"));
    }
    let (e_min, e_max) = EnergyModel { mean, std, bounds }.resolved_bounds();
    if !(e_min < e_max) {
        return invalid(format!("E_min ({e_min}) must be below E_max ({e_max})"));
    }
    let lo = e_min.max(0.0);
    let acceptance = normal_cdf((e_max - mean) / std) - normal_cdf((lo - mean) / std);
    if !(acceptance >= 1e-6) {
        return Err(Error::InfeasibleBounds {
            probability: acceptance,
        });
    }
    let normal = Normal::new(mean, std).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = seeded(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let e = normal.sample(&mut rng);
        if e >= lo && e <= e_max && e > 0.0 {
            out.push(e);
        }
    }
    Ok(out)
}

/// Draws `count` uniform dictionary shape indices in `[0, p)` (case I).
pub fn sample_column_shapes(count: usize, p: usize, seed: u64) -> Result<Vec<PulseShape>> {
    if p == 0 {
        return invalid("shape count must be positive");
    }
    let mut rng = seeded(seed);
    Ok((0..count).map(|_| PulseShape::Column(rng.gen_range(0..p))).collect())
}

/// Draws `count` gamma parameter pairs uniformly from the given ranges
/// (case II); zero draws are rejected since both parameters must be positive.
pub fn sample_gamma_shapes(count: usize, theta1: (f64, f64), theta2: (f64, f64), seed: u64) -> Result<Vec<PulseShape>> {
    for (lo, hi) in [theta1, theta2] {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return invalid(format!("invalid theta range [{lo}, {hi}]"));
        }
    }
    let mut rng = seeded(seed);
    let mut draw = |(lo, hi): (f64, f64)| loop {
        let v = rng.gen_range(lo..hi);
        if v > 0.0 {
            return v;
        }
    };
    Ok((0..count)
        .map(|_| PulseShape::Gamma {
            theta1: draw(theta1),
            theta2: draw(theta2),
        })
        .collect())
}

/// Adds `energy * Phi(t_i - arrival)` to `out` for every sample of the
/// truncated support `(0, tau * dt]` that falls inside the grid.
fn add_pulse(out: &mut [f64], shape: &GammaShape, arrival: f64, energy: f64, grid: SamplingGrid) {
    let dt = grid.dt();
    let support = shape.support_end() * (1.0 + 1e-12);
    let first = (arrival / dt).floor().max(0.0) as usize;
    for (i, slot) in out.iter_mut().enumerate().skip(first) {
        let u = grid.time(i) - arrival;
        if u <= 0.0 {
            continue;
        }
        if u > support {
            break;
        }
        *slot += energy * shape.eval(u);
    }
}

/// Builds the sampled signal `y = Phi E + eps` for `truth` on the dictionary's
/// grid. `sigma = 0` yields the noise-free part.
pub fn synthesize_signal(truth: &GroundTruth, dict: &Dictionary, sigma: f64, seed: u64) -> Result<SampledSignal> {
    let clean = noise_free_signal(truth, dict)?;
    add_noise(clean, dict.grid(), sigma, seed)
}

/// `sum_n E_n Phi_n(t_i - T_n)`, without noise.
pub fn noise_free_signal(truth: &GroundTruth, dict: &Dictionary) -> Result<Vec<f64>> {
    let grid = dict.grid();
    validate_arrivals(truth, grid)?;
    let mut out = vec![0.0; grid.n_samples()];
    for (t, e, shape) in truth.events() {
        add_pulse(&mut out, &resolve_shape(shape, dict)?, t, e, grid);
    }
    Ok(out)
}

/// Noise-free signal of a single event.
pub fn isolated_pulse(arrival: f64, energy: f64, shape: PulseShape, dict: &Dictionary) -> Result<Vec<f64>> {
    let grid = dict.grid();
    let mut out = vec![0.0; grid.n_samples()];
    let shape = resolve_shape(shape, dict)?;
    check_arrival(arrival, grid)?;
    add_pulse(&mut out, &shape, arrival, energy, grid);
    Ok(out)
}

fn check_arrival(t: f64, grid: SamplingGrid) -> Result<()> {
    if !(t >= 0.0 && t < grid.end()) {
        return invalid(format!("arrival {t} outside the grid span [0, {})", grid.end()));
    }
    Ok(())
}

fn resolve_shape(shape: PulseShape, dict: &Dictionary) -> Result<GammaShape> {
    match shape {
        PulseShape::Column(s) => dict
            .shape(s)
            .cloned()
            .ok_or_else(|| Error::InvalidParameter(format!("shape index {s} out of range"))),
        PulseShape::Gamma { theta1, theta2 } => GammaShape::new(theta1, theta2, dict.tau(), dict.grid()),
    }
}

fn add_noise(mut clean: Vec<f64>, grid: SamplingGrid, sigma: f64, seed: u64) -> Result<SampledSignal> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return invalid(format!("sigma must be non-negative, got {sigma}"));
    }
    if sigma > 0.0 {
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = seeded(seed);
        for v in clean.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    SampledSignal::new(clean, grid, sigma)
}

/// Nearest sample index, ties rounded up.
pub fn nearest_index(t: f64, dt: f64) -> i64 {
    (t / dt + 0.5).floor() as i64
}

/// `P0 = { round(T_n / dt) }`: the grid indices closest to the arrivals.
pub fn optimal_index_set(arrivals: &[f64], grid: SamplingGrid) -> Result<BTreeSet<usize>> {
    let last = grid.n_samples() as i64 - 1;
    arrivals
        .iter()
        .map(|&t| {
            let k = nearest_index(t, grid.dt());
            if t < 0.0 || k > last {
                invalid(format!("arrival {t} outside the grid span"))
            } else {
                Ok(k as usize)
            }
        })
        .collect()
}

fn validate_arrivals(truth: &GroundTruth, grid: SamplingGrid) -> Result<()> {
    truth.arrivals().iter().try_for_each(|&t| check_arrival(t, grid))
}

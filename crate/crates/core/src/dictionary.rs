//! Dictionary of truncated gamma shapes and its Gram/correlation quantities.
//!
//! Block `A_k` holds the `p` shapes shifted so that their support starts at
//! sample `k + 1`; the global dictionary concatenates the `N` blocks. Column
//! `n = k * p + s` is shape `s` in block `k`. Only the `p` shape vectors are
//! stored: every product with `A` or `A^T` walks the shifted support directly,
//! so an `N x Np` matrix is never materialized.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::signal::SamplingGrid;

/// Offset-indexed Gram blocks are cached only below this many entries.
const GRAM_CACHE_LIMIT: usize = 4_000_000;

/// Samples of `c * t^theta1 * exp(-theta2 * t)` at `t = dt, 2 dt, ..., tau dt`,
/// with `c` chosen so that `(1/N) sum_i Gamma(t_i)^2 = 1` over the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaShape {
    theta1: f64,
    theta2: f64,
    dt: f64,
    tau: usize,
    /// Largest raw sample, used to keep `eval` on the same scale as `samples`.
    peak: f64,
    scale: f64,
    samples: Vec<f64>,
}

impl GammaShape {
    pub fn new(theta1: f64, theta2: f64, tau: usize, grid: SamplingGrid) -> Result<Self> {
        if !(theta1 > 0.0 && theta1.is_finite() && theta2 > 0.0 && theta2.is_finite()) {
            return invalid(format!("gamma parameters must be positive, got ({theta1}, {theta2})"));
        }
        let n = grid.n_samples();
        if tau == 0 || tau >= n {
            return invalid(format!("tau must satisfy 1 <= tau < N = {n}, got {tau}"));
        }
        let dt = grid.dt();
        let raw: Vec<f64> = (1..=tau).map(|j| raw_gamma(theta1, theta2, j as f64 * dt)).collect();
        if raw.iter().any(|v| !v.is_finite()) {
            return invalid(format!("gamma shape ({theta1}, {theta2}) overflows on its support"));
        }
        let peak = raw.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            return Err(Error::DegenerateShape { theta1, theta2 });
        }
        let energy: f64 = raw.iter().map(|v| (v / peak).powi(2)).sum();
        let scale = (n as f64 / energy).sqrt();
        let samples = raw.iter().map(|v| v / peak * scale).collect();
        Ok(Self {
            theta1,
            theta2,
            dt,
            tau,
            peak,
            scale,
            samples,
        })
    }

    pub fn theta1(&self) -> f64 {
        self.theta1
    }

    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    /// The normalizing constant `c_s`.
    pub fn normalizer(&self) -> f64 {
        self.scale / self.peak
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn support_end(&self) -> f64 {
        self.tau as f64 * self.dt
    }

    /// Normalized shape at continuous time `t`; zero outside `(0, tau dt]`.
    pub fn eval(&self, t: f64) -> f64 {
        if t <= 0.0 || t > self.support_end() * (1.0 + 1e-12) {
            return 0.0;
        }
        raw_gamma(self.theta1, self.theta2, t) / self.peak * self.scale
    }
}

fn raw_gamma(theta1: f64, theta2: f64, t: f64) -> f64 {
    (theta1 * t.ln() - theta2 * t).exp()
}

/// Convenience constructor mirroring [`GammaShape::new`]; returns the shape
/// samples together with `c_s`.
pub fn gamma_shape(theta1: f64, theta2: f64, tau: usize, grid: SamplingGrid) -> Result<(Vec<f64>, f64)> {
    let shape = GammaShape::new(theta1, theta2, tau, grid)?;
    let c = shape.normalizer();
    Ok((shape.samples, c))
}

/// Inclusive arithmetic range `from, from + step, ..., to`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeSpec {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl RangeSpec {
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.from.is_finite() && self.to >= self.from) {
            return invalid(format!("invalid range {self:?}"));
        }
        let count = ((self.to - self.from) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| self.from + i as f64 * self.step).collect())
    }
}

/// Shape-grid section of a configuration file:
/// `{ "theta1": {"from":..,"to":..,"step":..}, "theta2": {..}, "tau": .. }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeGridConfig {
    pub theta1: RangeSpec,
    pub theta2: RangeSpec,
    pub tau: usize,
}

impl ShapeGridConfig {
    pub fn to_grid(&self) -> Result<ShapeGrid> {
        let t1 = self.theta1.values()?;
        let t2 = self.theta2.values()?;
        let pairs = t1.iter().flat_map(|&a| t2.iter().map(move |&b| (a, b))).collect();
        ShapeGrid::new(pairs, self.tau)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeGrid {
    pairs: Vec<(f64, f64)>,
    tau: usize,
}

impl ShapeGrid {
    pub fn new(pairs: Vec<(f64, f64)>, tau: usize) -> Result<Self> {
        if pairs.is_empty() {
            return invalid("shape grid needs at least one (theta1, theta2) pair");
        }
        if pairs.iter().any(|&(a, b)| !(a > 0.0 && b > 0.0)) {
            return invalid("theta values must be positive");
        }
        if tau == 0 {
            return invalid("tau must be at least 1");
        }
        Ok(Self { pairs, tau })
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Smallest support length (in samples) after which every shape of `pairs`
/// stays below `ratio` times its own peak.
pub fn support_for_decay(pairs: &[(f64, f64)], dt: f64, ratio: f64) -> usize {
    pairs
        .iter()
        .map(|&(a, b)| {
            // t^a e^{-bt} peaks at a/b and decreases afterwards.
            let log_peak = {
                let t = a / b;
                a * t.ln() - b * t
            };
            let mut j = ((a / b) / dt).ceil().max(1.0) as usize;
            while a * (j as f64 * dt).ln() - b * j as f64 * dt - log_peak >= ratio.ln() {
                j += 1;
            }
            j
        })
        .max()
        .unwrap_or(1)
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    shape_grid: ShapeGrid,
    grid: SamplingGrid,
    shapes: Vec<GammaShape>,
    /// `prefix_sq[s][m] = (1/N) sum_{j < m} samples_s[j]^2`.
    prefix_sq: Vec<Vec<f64>>,
    /// Interior Gram blocks `G_{k, k+d}` for `d = 0..=tau`, when small enough.
    gram_cache: Option<Vec<DMatrix<f64>>>,
}

pub fn build_dictionary(shape_grid: &ShapeGrid, grid: SamplingGrid) -> Result<Dictionary> {
    Dictionary::new(shape_grid.clone(), grid)
}

impl Dictionary {
    pub fn new(shape_grid: ShapeGrid, grid: SamplingGrid) -> Result<Self> {
        let tau = shape_grid.tau();
        if tau >= grid.n_samples() {
            return invalid(format!("tau = {tau} must be below N = {}", grid.n_samples()));
        }
        let shapes = shape_grid
            .pairs()
            .iter()
            .map(|&(a, b)| GammaShape::new(a, b, tau, grid))
            .collect::<Result<Vec<_>>>()?;
        let inv_n = 1.0 / grid.n_samples() as f64;
        let prefix_sq = shapes
            .iter()
            .map(|sh| {
                let mut acc = 0.0;
                let mut out = Vec::with_capacity(tau + 1);
                out.push(0.0);
                for v in sh.samples() {
                    acc += v * v;
                    out.push(acc * inv_n);
                }
                out
            })
            .collect();
        let mut dict = Self {
            shape_grid,
            grid,
            shapes,
            prefix_sq,
            gram_cache: None,
        };
        let p = dict.p();
        let interior = grid.n_samples() - 1 - tau;
        if p * p * (tau + 1) <= GRAM_CACHE_LIMIT && interior >= tau {
            let cache = (0..=tau).map(|d| dict.gram_direct(0, d)).collect();
            dict.gram_cache = Some(cache);
        }
        Ok(dict)
    }

    pub fn grid(&self) -> SamplingGrid {
        self.grid
    }

    pub fn shape_grid(&self) -> &ShapeGrid {
        &self.shape_grid
    }

    pub fn tau(&self) -> usize {
        self.shape_grid.tau()
    }

    pub fn p(&self) -> usize {
        self.shapes.len()
    }

    pub fn n_blocks(&self) -> usize {
        self.grid.n_samples()
    }

    pub fn n_columns(&self) -> usize {
        self.n_blocks() * self.p()
    }

    pub fn shapes(&self) -> &[GammaShape] {
        &self.shapes
    }

    pub fn shape(&self, s: usize) -> Option<&GammaShape> {
        self.shapes.get(s)
    }

    /// Last block index whose support is not truncated, `N - 1 - tau`.
    pub fn last_interior_block(&self) -> usize {
        self.n_blocks() - 1 - self.tau()
    }

    /// Blocks past `N - 1 - tau` have their support cut by the grid end.
    pub fn is_boundary_block(&self, k: usize) -> bool {
        k > self.last_interior_block()
    }

    /// Blocks whose support lies entirely past the grid (only `k = N - 1`).
    pub fn is_degenerate_block(&self, k: usize) -> bool {
        self.support_len(k) == 0
    }

    /// Number of in-grid rows of any column of block `k`.
    pub fn support_len(&self, k: usize) -> usize {
        self.tau().min(self.n_blocks() - 1 - k)
    }

    pub fn block_of(&self, n: usize) -> usize {
        n / self.p()
    }

    /// Column `n` as `(first_row, values)`; `values` may be empty.
    pub fn column(&self, n: usize) -> (usize, &[f64]) {
        let p = self.p();
        let (k, s) = (n / p, n % p);
        let len = self.support_len(k);
        (k + 1, &self.shapes[s].samples()[..len])
    }

    /// `(1/N) ||A_n||^2`, the diagonal Gram entry of column `n`.
    pub fn column_sq_norm(&self, n: usize) -> f64 {
        let p = self.p();
        let (k, s) = (n / p, n % p);
        self.prefix_sq[s][self.support_len(k)]
    }

    /// `(1/N) A_n^T u`.
    pub fn correlate(&self, n: usize, u: &[f64]) -> f64 {
        let (start, col) = self.column(n);
        let dot: f64 = col.iter().zip(&u[start..]).map(|(a, b)| a * b).sum();
        dot / self.n_blocks() as f64
    }

    /// `(1/N) A_n^T A_m`, zero when the supports do not overlap.
    pub fn column_dot(&self, n: usize, m: usize) -> f64 {
        let (sn, cn) = self.column(n);
        let (sm, cm) = self.column(m);
        let (lo, hi) = (sn.max(sm), (sn + cn.len()).min(sm + cm.len()));
        if lo >= hi {
            return 0.0;
        }
        let dot: f64 = cn[lo - sn..hi - sn]
            .iter()
            .zip(&cm[lo - sm..hi - sm])
            .map(|(a, b)| a * b)
            .sum();
        dot / self.n_blocks() as f64
    }

    /// `(1/N) A^T u` for every column.
    pub fn correlate_all(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n_columns()).map(|n| self.correlate(n, u)).collect()
    }

    /// `out += scale * A_n`.
    pub fn add_column(&self, n: usize, scale: f64, out: &mut [f64]) {
        let (start, col) = self.column(n);
        for (o, a) in out[start..].iter_mut().zip(col) {
            *o += scale * a;
        }
    }

    /// `A beta` for a sparse coefficient list `(column, value)`.
    pub fn apply<'a>(&self, coefficients: impl IntoIterator<Item = (&'a usize, &'a f64)>) -> Vec<f64> {
        let mut out = vec![0.0; self.n_blocks()];
        for (&n, &v) in coefficients {
            self.add_column(n, v, &mut out);
        }
        out
    }

    /// Column `n` as a dense length-`N` vector.
    pub fn dense_column(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_blocks()];
        self.add_column(n, 1.0, &mut out);
        out
    }

    /// Dense `N x Np` matrix, for small verification problems only.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let (rows, cols) = (self.n_blocks(), self.n_columns());
        if rows * cols > GRAM_CACHE_LIMIT {
            return invalid(format!("refusing to materialize a {rows} x {cols} dictionary"));
        }
        let mut m = DMatrix::zeros(rows, cols);
        for n in 0..cols {
            let (start, col) = self.column(n);
            for (i, v) in col.iter().enumerate() {
                m[(start + i, n)] = *v;
            }
        }
        Ok(m)
    }

    fn gram_direct(&self, k: usize, l: usize) -> DMatrix<f64> {
        let p = self.p();
        let mut g = DMatrix::zeros(p, p);
        let (lk, ll) = (self.support_len(k), self.support_len(l));
        let lo = k.max(l) + 1;
        let hi = (k + lk).min(l + ll); // inclusive last row
        if hi < lo {
            return g;
        }
        let inv_n = 1.0 / self.n_blocks() as f64;
        for i in 0..p {
            let a = &self.shapes[i].samples()[lo - k - 1..=hi - k - 1];
            for j in 0..p {
                let b = &self.shapes[j].samples()[lo - l - 1..=hi - l - 1];
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                g[(i, j)] = dot * inv_n;
            }
        }
        g
    }

    /// `G_{{k},{l}} = (1/N) A_k^T A_l`, a `p x p` matrix.
    pub fn gram_block(&self, k: usize, l: usize) -> DMatrix<f64> {
        let last = self.last_interior_block();
        if let Some(cache) = &self.gram_cache {
            if k <= last && l <= last {
                if k.abs_diff(l) > self.tau() {
                    return DMatrix::zeros(self.p(), self.p());
                }
                return if l >= k {
                    cache[l - k].clone()
                } else {
                    cache[k - l].transpose()
                };
            }
        }
        self.gram_direct(k, l)
    }

    /// Single-block Gram matrix `G`, independent of the (interior) block.
    pub fn gram(&self) -> DMatrix<f64> {
        self.gram_block(0, 0)
    }

    /// `min_{i,j} G(i,j)`.
    pub fn gram_min(&self) -> f64 {
        self.gram().min()
    }

    /// Per-offset maximal correlations around an interior block.
    pub fn correlation_profile(&self) -> Result<CorrelationProfile> {
        let tau = self.tau();
        if self.n_blocks() - 1 < 2 * tau {
            return invalid(format!(
                "grid of {} samples has no interior block for tau = {tau}",
                self.n_blocks()
            ));
        }
        let k = tau;
        let mut max_corr = Vec::with_capacity(2 * tau + 1);
        let mut g_mass = 0.0;
        for l in 0..=2 * tau {
            let g = self.gram_block(k, l);
            max_corr.push(g.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            g_mass += g.max();
        }
        Ok(CorrelationProfile { tau, max_corr, g_mass })
    }
}

/// `m_d` for offsets `d` in `[-tau, tau]` and the correlation mass `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    tau: usize,
    /// `max_corr[d + tau] = m_d`.
    max_corr: Vec<f64>,
    g_mass: f64,
}

impl CorrelationProfile {
    /// Builds a profile from explicit values; `max_corr` has `2 tau + 1` entries.
    pub fn from_parts(tau: usize, max_corr: Vec<f64>, g_mass: f64) -> Result<Self> {
        if max_corr.len() != 2 * tau + 1 {
            return invalid(format!("profile needs {} offsets, got {}", 2 * tau + 1, max_corr.len()));
        }
        Ok(Self { tau, max_corr, g_mass })
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// `m_d`; zero beyond the common support.
    pub fn max_corr(&self, d: i64) -> f64 {
        if d.unsigned_abs() as usize > self.tau {
            return 0.0;
        }
        self.max_corr[(d + self.tau as i64) as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.max_corr
    }

    pub fn g_mass(&self) -> f64 {
        self.g_mass
    }

    /// `a_rho = max { |d| : m_d >= rho }`, or 0 when no offset qualifies.
    pub fn radius(&self, rho: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&rho) {
            return invalid(format!("rho must lie in [0, 1], got {rho}"));
        }
        Ok(self
            .max_corr
            .iter()
            .enumerate()
            .filter(|(_, &m)| m >= rho)
            .map(|(i, _)| i.abs_diff(self.tau))
            .max()
            .unwrap_or(0))
    }

    /// Offsets `d >= 0` where `m_d` increases with `|d|`, i.e. where the
    /// profile fails to decay monotonically.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        (1..=self.tau)
            .filter(|&d| self.max_corr(d as i64) > self.max_corr(d as i64 - 1) + 1e-12)
            .collect()
    }
}

pub fn rho_radius(profile: &CorrelationProfile, rho: f64) -> Result<usize> {
    profile.radius(rho)
}

//! Non-negative LASSO on the shift-structured dictionary.
//!
//! Minimizes `(1/2N) ||y - A beta||^2 + r sum beta` subject to `beta >= 0` by
//! cyclic coordinate descent. A solve owns its residual `y - A beta`, which is
//! updated after every coordinate move and recomputed from scratch after each
//! full sweep. Full sweeps (which may admit new columns) alternate with sweeps
//! restricted to the current support.
//!
//! Neighbouring shifts of one shape are almost collinear, which makes plain
//! coordinate descent crawl. Before each round of support sweeps the solver
//! therefore solves the unconstrained problem on the current support exactly
//! (Cholesky on the support Gram matrix) and moves toward that point as far as
//! non-negativity allows, dropping the coordinates that hit zero. The move
//! never increases the objective, so the descent stays monotone.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{invalid, Error, Result};
use crate::signal::SampledSignal;

pub mod oracle;

pub use oracle::brute_force_oracle;

/// Non-negative coefficient vector over the `N p` dictionary columns. Only
/// strictly positive entries are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseRegressor {
    p: usize,
    entries: BTreeMap<usize, f64>,
    r: f64,
    objective: f64,
    kkt_violation: f64,
    sweeps: usize,
}

impl SparseRegressor {
    pub fn zero(p: usize, r: f64) -> Self {
        Self {
            p,
            entries: BTreeMap::new(),
            r,
            objective: f64::NAN,
            kkt_violation: f64::NAN,
            sweeps: 0,
        }
    }

    /// Builds a regressor from `(column, value)` pairs, dropping non-positive values.
    pub fn from_entries(p: usize, r: f64, entries: impl IntoIterator<Item = (usize, f64)>) -> Self {
        let mut out = Self::zero(p, r);
        out.entries = entries.into_iter().filter(|&(_, v)| v > 0.0).collect();
        out
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }

    pub fn kkt_violation(&self) -> f64 {
        self.kkt_violation
    }

    pub fn sweeps(&self) -> usize {
        self.sweeps
    }

    pub fn entries(&self) -> &BTreeMap<usize, f64> {
        &self.entries
    }

    pub fn get(&self, n: usize) -> f64 {
        self.entries.get(&n).copied().unwrap_or(0.0)
    }

    /// Number of non-zero coefficients, `||beta||_0`.
    pub fn l0(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Block index `k` to its `p` coefficients, for active blocks only.
    pub fn block_view(&self) -> BTreeMap<usize, Vec<f64>> {
        let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for (&n, &v) in &self.entries {
            out.entry(n / self.p).or_insert_with(|| vec![0.0; self.p])[n % self.p] = v;
        }
        out
    }

    /// `l1` norm of every active block.
    pub fn block_l1(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (&n, &v) in &self.entries {
            *out.entry(n / self.p).or_insert(0.0) += v;
        }
        out
    }

    /// Block pattern `J(beta)`.
    pub fn block_pattern(&self) -> BTreeSet<usize> {
        self.entries.keys().map(|n| n / self.p).collect()
    }

    /// Keeps only the blocks accepted by `keep`.
    pub fn retain_blocks(&self, mut keep: impl FnMut(usize) -> bool) -> Self {
        let mut out = self.clone();
        out.entries.retain(|&n, _| keep(n / self.p));
        out
    }

    pub fn dense(&self, n_columns: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_columns];
        for (&n, &v) in &self.entries {
            out[n] = v;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

fn check_shapes(dict: &Dictionary, y: &SampledSignal) -> Result<()> {
    if y.len() != dict.n_blocks() {
        return invalid(format!(
            "signal length {} does not match the dictionary grid ({})",
            y.len(),
            dict.n_blocks()
        ));
    }
    Ok(())
}

struct Descent<'a> {
    dict: &'a Dictionary,
    y: &'a [f64],
    r: f64,
    beta: Vec<f64>,
    residual: Vec<f64>,
}

impl<'a> Descent<'a> {
    fn new(dict: &'a Dictionary, y: &'a [f64], r: f64, warm: Option<&SparseRegressor>) -> Self {
        let mut beta = vec![0.0; dict.n_columns()];
        if let Some(w) = warm {
            for (&n, &v) in w.entries() {
                if n < beta.len() && dict.column_sq_norm(n) > 0.0 {
                    beta[n] = v;
                }
            }
        }
        let mut s = Self {
            dict,
            y,
            r,
            beta,
            residual: Vec::new(),
        };
        s.refresh_residual();
        s
    }

    fn refresh_residual(&mut self) {
        let mut res = self.y.to_vec();
        for (n, &b) in self.beta.iter().enumerate() {
            if b != 0.0 {
                self.dict.add_column(n, -b, &mut res);
            }
        }
        self.residual = res;
    }

    /// One coordinate update; returns `|delta| / (1 + |beta_n|)`.
    fn update(&mut self, n: usize) -> f64 {
        let g = self.dict.column_sq_norm(n);
        if g == 0.0 {
            return 0.0;
        }
        let old = self.beta[n];
        let c = self.dict.correlate(n, &self.residual);
        let new = (old + (c - self.r) / g).max(0.0);
        let delta = new - old;
        if delta == 0.0 {
            return 0.0;
        }
        self.dict.add_column(n, -delta, &mut self.residual);
        self.beta[n] = new;
        delta.abs() / (1.0 + new.abs())
    }

    fn sweep(&mut self, columns: impl Iterator<Item = usize>) -> f64 {
        columns.fold(0.0, |m, n| m.max(self.update(n)))
    }

    /// Moves along the segment toward the minimizer of the objective restricted
    /// to the span of `support`, stopping at the first coordinate that reaches
    /// zero. A tiny ridge keeps the system solvable when the support columns
    /// are linearly dependent; the step still decreases the objective because
    /// `d' G d <= d' (G + eps I) d`. Returns `false` when no factorization is
    /// found or the support is too large.
    fn face_step(&mut self, support: &[usize]) -> bool {
        let m = support.len();
        if m == 0 || m > MAX_FACE_SIZE {
            return false;
        }
        let mut gram = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let (a, b) = (support[i], support[j]);
                if self.dict.block_of(a).abs_diff(self.dict.block_of(b)) > self.dict.tau() {
                    continue;
                }
                let g = self.dict.column_dot(a, b);
                gram[(i, j)] = g;
                gram[(j, i)] = g;
            }
        }
        let rhs = DVector::from_iterator(
            m,
            support.iter().map(|&n| self.dict.correlate(n, &self.residual) - self.r),
        );
        let scale = (0..m).map(|i| gram[(i, i)]).fold(0.0, f64::max);
        let mut ridge = 1e-12 * scale;
        let chol = loop {
            let mut shifted = gram.clone();
            for i in 0..m {
                shifted[(i, i)] += ridge;
            }
            if let Some(c) = shifted.cholesky() {
                break c;
            }
            ridge *= 1e3;
            if ridge > 1e-3 * scale {
                return false;
            }
        };
        let direction = chol.solve(&rhs);
        if direction.iter().any(|v| !v.is_finite()) {
            return false;
        }
        let mut step = 1.0f64;
        let mut blocking = None;
        for (i, &n) in support.iter().enumerate() {
            let d = direction[i];
            if d < 0.0 {
                let t = self.beta[n] / -d;
                if t < step {
                    step = t;
                    blocking = Some(i);
                }
            }
        }
        for (i, &n) in support.iter().enumerate() {
            let new = if Some(i) == blocking {
                0.0
            } else {
                (self.beta[n] + step * direction[i]).max(0.0)
            };
            self.beta[n] = new;
        }
        self.refresh_residual();
        true
    }

    #[cfg(debug_assertions)]
    fn objective(&self) -> f64 {
        let n = self.residual.len() as f64;
        let rss: f64 = self.residual.iter().map(|v| v * v).sum();
        rss / (2.0 * n) + self.r * self.beta.iter().sum::<f64>()
    }

    fn active(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&n| self.beta[n] > 0.0).collect()
    }

    fn finish(&self, sweeps: usize) -> SparseRegressor {
        let p = self.dict.p();
        let entries = self
            .beta
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(n, &v)| (n, v))
            .collect();
        let mut out = SparseRegressor {
            p,
            entries,
            r: self.r,
            objective: 0.0,
            kkt_violation: 0.0,
            sweeps,
        };
        out.objective = objective_from_residual(&self.residual, self.r, &out);
        out.kkt_violation = kkt_from_residual(self.dict, &self.residual, self.r, &self.beta);
        out
    }
}

fn objective_from_residual(residual: &[f64], r: f64, beta: &SparseRegressor) -> f64 {
    let n = residual.len() as f64;
    let rss: f64 = residual.iter().map(|v| v * v).sum();
    rss / (2.0 * n) + r * beta.entries().values().sum::<f64>()
}

fn kkt_from_residual(dict: &Dictionary, residual: &[f64], r: f64, beta: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for (n, &b) in beta.iter().enumerate().take(dict.n_columns()) {
        if dict.column_sq_norm(n) == 0.0 {
            continue;
        }
        let c = dict.correlate(n, residual);
        let v = if b > 0.0 { (c - r).abs() } else { c - r };
        worst = worst.max(v);
    }
    worst
}

const MAX_FACE_SIZE: usize = 4000;
const MAX_FACE_STEPS: usize = 256;

/// Solves the non-negative LASSO from a cold start.
pub fn nnlasso(dict: &Dictionary, y: &SampledSignal, r: f64, opts: SolverOptions) -> Result<SparseRegressor> {
    nnlasso_warm(dict, y, r, opts, None)
}

/// Solves the non-negative LASSO starting from `warm` when given.
pub fn nnlasso_warm(
    dict: &Dictionary,
    y: &SampledSignal,
    r: f64,
    opts: SolverOptions,
    warm: Option<&SparseRegressor>,
) -> Result<SparseRegressor> {
    check_shapes(dict, y)?;
    if !(r > 0.0 && r.is_finite()) {
        return invalid(format!("r must be positive, got {r}"));
    }
    if !(opts.tol > 0.0) || opts.max_sweeps == 0 {
        return invalid("solver needs tol > 0 and max_sweeps >= 1");
    }
    let mut cd = Descent::new(dict, y.samples(), r, warm);
    let n_columns = dict.n_columns();
    let mut sweeps = 0;
    loop {
        #[cfg(debug_assertions)]
        let before = cd.objective();
        let change = cd.sweep(0..n_columns);
        sweeps += 1;
        cd.refresh_residual();
        #[cfg(debug_assertions)]
        debug_assert!(cd.objective() <= before + 1e-9 * (1.0 + before.abs()));
        if change <= opts.tol {
            let violation = kkt_from_residual(dict, &cd.residual, r, &cd.beta);
            if violation <= opts.tol {
                return Ok(cd.finish(sweeps));
            }
        }
        let mut face_steps = 0;
        while sweeps < opts.max_sweeps {
            if face_steps < MAX_FACE_STEPS {
                let support = cd.active();
                #[cfg(debug_assertions)]
                let before = cd.objective();
                if cd.face_step(&support) {
                    face_steps += 1;
                }
                #[cfg(debug_assertions)]
                debug_assert!(cd.objective() <= before + 1e-9 * (1.0 + before.abs()));
            }
            let active = cd.active();
            let change = cd.sweep(active.iter().copied());
            sweeps += 1;
            if change <= opts.tol {
                break;
            }
        }
        if sweeps >= opts.max_sweeps {
            cd.refresh_residual();
            let best = cd.finish(sweeps);
            return Err(Error::NonConvergence {
                sweeps,
                violation: best.kkt_violation,
                best: Box::new(best),
            });
        }
    }
}

/// Residual `y - A beta`.
pub fn residual(dict: &Dictionary, y: &SampledSignal, beta: &SparseRegressor) -> Vec<f64> {
    let fit = dict.apply(beta.entries());
    y.samples().iter().zip(&fit).map(|(a, b)| a - b).collect()
}

/// Objective `(1/2N) ||y - A beta||^2 + r ||beta||_1`.
pub fn objective(dict: &Dictionary, y: &SampledSignal, r: f64, beta: &SparseRegressor) -> f64 {
    objective_from_residual(&residual(dict, y, beta), r, beta)
}

/// Largest violation of the non-negative KKT system: `|c_n - r|` on the
/// support and `max(c_n - r, 0)` elsewhere, with `c = (1/N) A^T (y - A beta)`.
pub fn kkt_residual(dict: &Dictionary, y: &SampledSignal, r: f64, beta: &SparseRegressor) -> f64 {
    let res = residual(dict, y, beta);
    kkt_from_residual(dict, &res, r, &beta.dense(dict.n_columns()))
}

/// `max(0, max_n (1/N) A_n^T y)`: the smallest `r` with a zero solution.
pub fn r_max(dict: &Dictionary, y: &SampledSignal) -> f64 {
    (0..dict.n_columns())
        .map(|n| dict.correlate(n, y.samples()))
        .fold(0.0, f64::max)
}

/// Number of geometric steps tried by [`select_r`].
pub const PATH_STEPS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub r: f64,
    pub residual_norm: f64,
}

/// Outcome of residual-matched selection of `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub r: f64,
    pub beta: SparseRegressor,
    /// Every visited point, in visiting order (decreasing `r`).
    pub path: Vec<PathPoint>,
}

/// Walks `r = r_max * path_factor^k`, `k = 1..=40`, with warm starts and
/// returns the first (largest) `r` whose fit satisfies
/// `||y - A beta(r)||_2 <= sigma sqrt(N)`.
pub fn select_r(
    dict: &Dictionary,
    y: &SampledSignal,
    sigma: f64,
    path_factor: f64,
    opts: SolverOptions,
) -> Result<Selection> {
    check_shapes(dict, y)?;
    if !(sigma > 0.0) {
        return invalid(format!("sigma must be positive, got {sigma}"));
    }
    if !(path_factor > 0.0 && path_factor < 1.0) {
        return invalid(format!("path factor must lie in (0, 1), got {path_factor}"));
    }
    let target = sigma * (y.len() as f64).sqrt();
    let top = r_max(dict, y);
    if top == 0.0 {
        // beta = 0 is optimal for every r > 0 and leaves y itself as residual.
        let norm = y.samples().iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm <= target {
            let mut beta = SparseRegressor::zero(dict.p(), 0.0);
            beta.objective = norm * norm / (2.0 * y.len() as f64);
            beta.kkt_violation = 0.0;
            return Ok(Selection {
                r: 0.0,
                beta,
                path: vec![PathPoint {
                    r: 0.0,
                    residual_norm: norm,
                }],
            });
        }
        return Err(Error::PathExhausted {
            last_r: 0.0,
            last_residual: norm,
            target,
        });
    }
    let mut path = Vec::with_capacity(PATH_STEPS);
    let mut warm: Option<SparseRegressor> = None;
    let mut last_residual = f64::INFINITY;
    let mut r = top;
    for _ in 0..PATH_STEPS {
        r *= path_factor;
        let beta = nnlasso_warm(dict, y, r, opts, warm.as_ref())?;
        let norm = residual(dict, y, &beta).iter().map(|v| v * v).sum::<f64>().sqrt();
        path.push(PathPoint { r, residual_norm: norm });
        if norm <= target {
            return Ok(Selection { r, beta, path });
        }
        last_residual = norm;
        warm = Some(beta);
    }
    Err(Error::PathExhausted {
        last_r: r,
        last_residual,
        target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_dictionary, ShapeGrid};
    use crate::signal::SamplingGrid;
    use rand::{Rng, SeedableRng};

    fn dict(n: usize, pairs: Vec<(f64, f64)>, tau: usize) -> Dictionary {
        let g = SamplingGrid::new(n, 1.0).unwrap();
        build_dictionary(&ShapeGrid::new(pairs, tau).unwrap(), g).unwrap()
    }

    fn random_signal(d: &Dictionary, seed: u64, events: usize, noise: f64) -> SampledSignal {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut y = vec![0.0; d.n_blocks()];
        for _ in 0..events {
            let n = rng.gen_range(0..d.n_columns());
            d.add_column(n, rng.gen_range(0.5..3.0), &mut y);
        }
        for v in y.iter_mut() {
            *v += noise * (rng.gen::<f64>() - 0.5);
        }
        SampledSignal::new(y, d.grid(), noise).unwrap()
    }

    #[test]
    fn zero_signal_gives_zero_solution() {
        let d = dict(32, vec![(1.0, 1.0), (2.0, 0.7)], 4);
        let y = SampledSignal::new(vec![0.0; 32], d.grid(), 0.0).unwrap();
        let b = nnlasso(&d, &y, 0.3, SolverOptions::default()).unwrap();
        assert!(b.is_empty());
        assert_eq!(b.objective(), 0.0);
        assert_eq!(r_max(&d, &y), 0.0);
    }

    #[test]
    fn r_above_r_max_gives_zero() {
        let d = dict(32, vec![(1.0, 1.0), (2.0, 0.7)], 4);
        let y = random_signal(&d, 1, 3, 0.1);
        let top = r_max(&d, &y);
        let b = nnlasso(&d, &y, top, SolverOptions::default()).unwrap();
        assert!(b.is_empty());
        let b = nnlasso(&d, &y, top * 1.5, SolverOptions::default()).unwrap();
        assert!(b.is_empty());
        assert_eq!(kkt_residual(&d, &y, top * 1.5, &b), 0.0);
        assert!(nnlasso(&d, &y, top * 0.5, SolverOptions::default()).unwrap().l0() > 0);
    }

    #[test]
    fn r_max_on_a_column_is_one() {
        let d = dict(32, vec![(1.0, 1.0), (2.0, 0.7)], 4);
        let y = SampledSignal::new(d.dense_column(2 * 5 + 1), d.grid(), 0.0).unwrap();
        assert!((r_max(&d, &y) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn r_max_matches_dense_product() {
        let d = dict(48, vec![(1.0, 1.0), (2.0, 0.7), (0.6, 0.4)], 6);
        let y = random_signal(&d, 5, 4, 1.0);
        let a = d.dense_matrix().unwrap();
        let yv = nalgebra::DVector::from_column_slice(y.samples());
        let c = a.transpose() * yv / 48.0;
        assert!((r_max(&d, &y) - c.max().max(0.0)).abs() < 1e-12);
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let d = dict(32, vec![(1.0, 1.0), (2.0, 0.7)], 4);
        let y = random_signal(&d, 7, 4, 0.2);
        let b = nnlasso(&d, &y, 0.1, SolverOptions::default()).unwrap();
        let a = d.dense_matrix().unwrap();
        let oracle = brute_force_oracle(&a, y.samples(), 0.1).unwrap();
        let dense = b.dense(d.n_columns());
        let gap = dense
            .iter()
            .zip(&oracle)
            .map(|(x, o)| (x - o).abs())
            .fold(0.0, f64::max);
        assert!(gap <= 1e-6, "linf gap {gap}");
        let ob = oracle::dense_objective(&a, y.samples(), 0.1, &oracle);
        assert!((b.objective() - ob).abs() <= 1e-10);
        assert!(b.kkt_violation() <= 1e-8);
    }

    #[test]
    fn kkt_grows_with_perturbation() {
        let d = dict(32, vec![(1.0, 1.0), (2.0, 0.7)], 4);
        let y = random_signal(&d, 3, 3, 0.2);
        let b = nnlasso(
            &d,
            &y,
            0.05,
            SolverOptions {
                tol: 1e-12,
                max_sweeps: 100_000,
            },
        )
        .unwrap();
        let base = kkt_residual(&d, &y, 0.05, &b);
        assert!(base <= 1e-10);
        let (&n, &v) = b.entries().iter().next().unwrap();
        let eps = 1e-4;
        let mut moved: Vec<(usize, f64)> = b.entries().iter().map(|(&k, &x)| (k, x)).collect();
        for e in moved.iter_mut() {
            if e.0 == n {
                e.1 = v + eps;
            }
        }
        let pert = SparseRegressor::from_entries(2, 0.05, moved);
        let grown = kkt_residual(&d, &y, 0.05, &pert);
        // The perturbed coordinate alone moves by eps * G_nn; correlated
        // neighbours can only move by at most eps * max|G|.
        let g = d.column_sq_norm(n);
        assert!(grown >= eps * g * 0.999 - base);
        assert!(grown <= eps * 1.0 + base + 1e-12);
    }

    #[test]
    fn nonconvergence_carries_best_iterate() {
        let d = dict(32, vec![(1.0, 1.0), (1.1, 1.0)], 4);
        let y = random_signal(&d, 2, 5, 0.5);
        match nnlasso(
            &d,
            &y,
            1e-4,
            SolverOptions {
                tol: 1e-15,
                max_sweeps: 2,
            },
        ) {
            Err(Error::NonConvergence { sweeps, best, .. }) => {
                assert_eq!(sweeps, 2);
                assert!(best.l0() > 0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let d = dict(32, vec![(1.0, 1.0)], 4);
        let y = SampledSignal::new(vec![0.0; 30], SamplingGrid::new(30, 1.0).unwrap(), 0.0).unwrap();
        assert!(nnlasso(&d, &y, 0.1, SolverOptions::default()).is_err());
        let y = SampledSignal::new(vec![0.0; 32], d.grid(), 0.0).unwrap();
        assert!(nnlasso(&d, &y, 0.0, SolverOptions::default()).is_err());
        assert!(select_r(&d, &y, 1.0, 1.0, SolverOptions::default()).is_err());
        assert!(select_r(&d, &y, 0.0, 0.9, SolverOptions::default()).is_err());
    }

    #[test]
    fn degenerate_columns_stay_inactive() {
        let d = dict(16, vec![(1.0, 1.0), (2.0, 0.8)], 4);
        let y = random_signal(&d, 9, 3, 0.3);
        let b = nnlasso(&d, &y, 0.01, SolverOptions::default()).unwrap();
        assert!(!b.block_pattern().contains(&15));
    }

    #[test]
    fn selection_rule_is_first_crossing() {
        let d = dict(64, vec![(1.0, 1.0), (2.0, 0.7)], 6);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut y = random_signal(&d, 4, 5, 0.0).samples().to_vec();
        let normal = rand_distr::Normal::new(0.0, 0.1).unwrap();
        for v in y.iter_mut() {
            *v += rand_distr::Distribution::sample(&normal, &mut rng);
        }
        let y = SampledSignal::new(y, d.grid(), 0.1).unwrap();
        let sel = select_r(&d, &y, 0.1, 0.8, SolverOptions::default()).unwrap();
        let target = 0.1 * 8.0;
        let last = sel.path.last().unwrap();
        assert_eq!(last.r, sel.r);
        assert!(last.residual_norm <= target);
        for p in &sel.path[..sel.path.len() - 1] {
            assert!(p.residual_norm > target);
        }
        let objs: Vec<f64> = sel.path.iter().map(|p| p.r).collect();
        assert!(objs.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn huge_sigma_selects_first_step() {
        let d = dict(32, vec![(1.0, 1.0), (2.0, 0.7)], 4);
        let y = random_signal(&d, 1, 3, 0.1);
        let sel = select_r(&d, &y, 1e6, 0.9, SolverOptions::default()).unwrap();
        assert!((sel.r - r_max(&d, &y) * 0.9).abs() < 1e-12);
        assert_eq!(sel.path.len(), 1);
    }

    #[test]
    fn path_exhaustion_is_reported() {
        let d = dict(32, vec![(1.0, 1.0)], 4);
        let y = random_signal(&d, 1, 3, 2.0);
        match select_r(&d, &y, 1e-9, 0.5, SolverOptions::default()) {
            Err(Error::PathExhausted {
                target, last_residual, ..
            }) => assert!(last_residual > target),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn block_views() {
        let b = SparseRegressor::from_entries(3, 0.1, [(0, 1.0), (2, 0.5), (7, 2.0), (9, 0.0)]);
        assert_eq!(b.l0(), 3);
        assert_eq!(b.block_pattern(), BTreeSet::from([0, 2]));
        assert_eq!(b.block_view()[&0], vec![1.0, 0.0, 0.5]);
        assert_eq!(b.block_l1()[&2], 2.0);
    }
}

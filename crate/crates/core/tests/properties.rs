use std::collections::BTreeSet;

use approx::assert_relative_eq;
use proptest::prelude::*;

mod common;

use pileup_core::bounds::{
    block_norm_bounds, detection_probabilities, interval_count, mu_level, rho_r, upper_gap_bound, BoundInputs,
};
use pileup_core::estimation::{extract_events, rising_edges, threshold_blocks};
use pileup_core::signal::noise_free_signal;
use pileup_core::solver::{kkt_residual, nnlasso};
use pileup_core::{
    Dictionary, GroundTruth, PulseShape, SampledSignal, SamplingGrid, ShapeGrid, SolverOptions, SparseRegressor,
};

fn regressor(p: usize, entries: &[(usize, f64)]) -> SparseRegressor {
    SparseRegressor::from_entries(p, 1.0, entries.iter().copied())
}

fn entries_strategy() -> impl Strategy<Value = Vec<(usize, f64)>> {
    prop::collection::vec((0usize..120, 0.01f64..20.0), 0..40)
}

fn small_dict(pairs: Vec<(f64, f64)>, tau: usize, n: usize) -> Dictionary {
    Dictionary::new(ShapeGrid::new(pairs, tau).unwrap(), SamplingGrid::new(n, 1.0).unwrap()).unwrap()
}

fn desk_dict(n: usize) -> Dictionary {
    Dictionary::new(
        common::desk_config(vec![0.1], 1, 0).shape_grid.to_grid().unwrap(),
        SamplingGrid::new(n, 1.0).unwrap(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn thresholding_is_idempotent_and_monotone(
        entries in entries_strategy(),
        eta in 0.1f64..30.0,
        extra in 0.0f64..30.0,
    ) {
        let beta = regressor(3, &entries);
        let once = threshold_blocks(&beta, eta).unwrap();
        let twice = threshold_blocks(&once, eta).unwrap();
        prop_assert_eq!(once.entries(), twice.entries());
        let stricter = threshold_blocks(&beta, eta + extra).unwrap();
        prop_assert!(stricter.block_pattern().is_subset(&once.block_pattern()));
    }

    #[test]
    fn event_extraction_is_scale_invariant(
        entries in entries_strategy(),
        eta in 0.1f64..30.0,
        scale in 0.01f64..100.0,
    ) {
        let beta = regressor(3, &entries);
        let scaled = regressor(3, &entries.iter().map(|&(n, v)| (n, v * scale)).collect::<Vec<_>>());
        let a = extract_events(&threshold_blocks(&beta, eta).unwrap(), 1.0, eta).unwrap();
        let b = extract_events(&threshold_blocks(&scaled, eta * scale).unwrap(), 1.0, eta * scale).unwrap();
        prop_assert_eq!(a.active_blocks, b.active_blocks);
        prop_assert_eq!(a.m_hat, b.m_hat);
        prop_assert_eq!(a.t_hat, b.t_hat);
    }

    #[test]
    fn event_count_is_below_pattern_sizes(entries in entries_strategy(), eta in 0.1f64..30.0) {
        let beta = regressor(3, &entries);
        let post = threshold_blocks(&beta, eta).unwrap();
        let events = extract_events(&post, 1.0, eta).unwrap();
        prop_assert!(events.m_hat <= post.block_pattern().len());
        prop_assert!(post.block_pattern().len() <= beta.block_pattern().len());
    }

    #[test]
    fn rising_edges_start_every_run(blocks in prop::collection::btree_set(0usize..200, 0..60)) {
        let edges = rising_edges(&blocks);
        let mut runs = 0;
        let mut prev: Option<usize> = None;
        for &k in &blocks {
            if prev.is_none_or(|p| p + 1 != k) {
                runs += 1;
                prop_assert!(edges.contains(&k));
            }
            prev = Some(k);
        }
        prop_assert_eq!(edges.len(), runs);
    }

    #[test]
    fn interval_count_matches_integer_union(
        intervals in prop::collection::vec((-50i64..50, 0i64..10), 0..12),
    ) {
        let iv: Vec<(i64, i64)> = intervals.iter().map(|&(a, w)| (a, a + w)).collect();
        let covered: BTreeSet<i64> = iv.iter().flat_map(|&(a, b)| a..=b).collect();
        let mut components = 0;
        let mut prev: Option<i64> = None;
        for &x in &covered {
            if prev.is_none_or(|p| p + 1 != x) {
                components += 1;
            }
            prev = Some(x);
        }
        prop_assert_eq!(interval_count(&iv), components);
    }

    #[test]
    fn support_probabilities_are_monotone(
        sigma in 0.5f64..5.0,
        dsigma in 0.0f64..3.0,
        n in 16usize..400,
        dn in 0usize..400,
        r in 1.0f64..3.0,
        beta_l0 in 0usize..200,
    ) {
        let base = BoundInputs {
            e_min: 10.0, e_max: 30.0, sigma, alpha: 0.5, g_min: 0.3, g_mass: 5.0,
            tau: 10, p: 4, n, r, eta: 1.0, dt: 1.0,
        };
        let at = |inputs: BoundInputs| detection_probabilities(&inputs, beta_l0).value().copied().unwrap();
        let here = at(base);
        let noisier = at(BoundInputs { sigma: sigma + dsigma, ..base });
        let longer = at(BoundInputs { n: n + dn, ..base });
        prop_assert!(noisier.forward.raw <= here.forward.raw);
        prop_assert!(noisier.converse.raw <= here.converse.raw);
        prop_assert!(longer.forward.raw >= here.forward.raw);
        prop_assert!(longer.converse.raw >= here.converse.raw);
        prop_assert!((0.0..=1.0).contains(&here.forward.clipped));
    }

    #[test]
    fn gap_bracket_stays_in_unit_interval(
        blocks in prop::collection::btree_set(16usize..400, 1..40),
        a_rho in 0usize..15,
        a_mu in 0usize..15,
    ) {
        let p = 2;
        let beta = SparseRegressor::from_entries(p, 0.5, blocks.iter().map(|&k| (k * p, 5.0)));
        let events = extract_events(&beta, 1.0, 1.0).unwrap();
        let inputs = BoundInputs {
            e_min: 40.0, e_max: 60.0, sigma: 1.0, alpha: 0.1, g_min: 0.3, g_mass: 5.0,
            tau: 15, p, n: 432, r: 0.5, eta: 1.0, dt: 1.0,
        };
        if let Some(g) = upper_gap_bound(&events, a_rho, a_mu, &inputs, beta.l0()).value() {
            prop_assert!((0.0..=1.0).contains(&g.bracket), "bracket {}", g.bracket);
        }
    }

    #[test]
    fn superposition_without_noise(
        first in prop::collection::vec((1.0f64..80.0, 1.0f64..10.0, 0usize..2), 0..6),
        second in prop::collection::vec((1.0f64..80.0, 1.0f64..10.0, 0usize..2), 0..6),
    ) {
        let dict = small_dict(vec![(2.0, 1.0), (3.0, 0.8)], 10, 100);
        let truth = |events: &[(f64, f64, usize)]| {
            let mut ev = events.to_vec();
            ev.sort_by(|a, b| a.0.total_cmp(&b.0));
            GroundTruth::new(
                ev.iter().map(|e| e.0).collect(),
                ev.iter().map(|e| e.1).collect(),
                ev.iter().map(|e| PulseShape::Column(e.2)).collect(),
                0.1,
            )
            .unwrap()
        };
        let both: Vec<_> = first.iter().chain(&second).copied().collect();
        let a = noise_free_signal(&truth(&first), &dict).unwrap();
        let b = noise_free_signal(&truth(&second), &dict).unwrap();
        let ab = noise_free_signal(&truth(&both), &dict).unwrap();
        for i in 0..ab.len() {
            assert_relative_eq!(ab[i], a[i] + b[i], epsilon = 1e-9, max_relative = 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn block_norms_of_cone_members(
        weights in prop::collection::vec(0.0f64..1.0, 9),
        energy_frac in 0.0f64..1.0,
    ) {
        prop_assume!(weights.iter().any(|&w| w > 1e-6));
        let dict = desk_dict(64);
        let g = dict.gram_block(20, 20);
        let g_min = dict.gram_min();
        let (e_min, e_max) = (36.0, 64.0);
        let w = nalgebra::DVector::from_vec(weights);
        let energy = e_min + energy_frac * (e_max - e_min);
        let beta = &w * (energy / w.dot(&(&g * &w)).sqrt());
        let (l1_max, g_inf_min) = block_norm_bounds(g_min, e_min, e_max);
        prop_assert!(beta.sum() <= l1_max * (1.0 + 1e-12));
        prop_assert!((&g * &beta).amax() >= g_inf_min * (1.0 - 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_is_scale_equivariant_and_certified(
        seed in 0u64..1000,
        scale in 0.1f64..10.0,
        r_frac in 0.05f64..0.9,
    ) {
        use rand::Rng;
        let mut rng = pileup_core::rng::seeded(seed);
        let dict = small_dict(vec![(1.5, 1.0), (3.0, 1.2)], 6, 40);
        let grid = dict.grid();
        let mut y = vec![0.0; 40];
        for _ in 0..4 {
            dict.add_column(rng.gen_range(0..dict.n_columns()), rng.gen_range(0.5..2.0), &mut y);
        }
        for v in &mut y {
            *v += rng.gen_range(-0.1..0.1);
        }
        let sy = SampledSignal::new(y.clone(), grid, 0.1).unwrap();
        let scaled = SampledSignal::new(y.iter().map(|v| v * scale).collect(), grid, 0.1 * scale).unwrap();
        let r = r_frac * pileup_core::solver::r_max(&dict, &sy);
        let opts = SolverOptions::default();
        let a = nnlasso(&dict, &sy, r, opts).unwrap();
        let b = nnlasso(&dict, &scaled, r * scale, opts).unwrap();
        prop_assert!(a.entries().values().all(|&v| v > 0.0));
        prop_assert!(kkt_residual(&dict, &sy, r, &a) <= opts.tol);
        let da = a.dense(dict.n_columns());
        let db = b.dense(dict.n_columns());
        for (x, z) in da.iter().zip(&db) {
            prop_assert!((x * scale - z).abs() <= 1e-6 * scale.max(1.0), "{} vs {}", x * scale, z);
        }
    }

    #[test]
    fn correlation_levels_match_dense_scans(
        eta in 0.001f64..50.0,
        r in 0.01f64..5.0,
        theta1 in 1.0f64..4.0,
        theta2 in 0.5f64..2.0,
    ) {
        let dict = small_dict(vec![(theta1, theta2)], 5, 24);
        let profile = dict.correlation_profile().unwrap();
        let g_min = dict.gram_min();
        let inputs = BoundInputs {
            e_min: 20.0, e_max: 30.0, sigma: 1.0, alpha: 0.0, g_min, g_mass: profile.g_mass(),
            tau: 5, p: 1, n: 24, r, eta, dt: 1.0,
        };
        const STEPS: usize = 20_000;
        let step = 1.0 / STEPS as f64;
        let size = |rho: f64| (2 * profile.radius(rho).unwrap() + 1) as f64;
        let sg = g_min.sqrt();
        let c0 = 400.0 * sg / 30.0 - r;
        let k = 11.0 * profile.g_mass() * 30.0 / sg;
        let scan = |ok: &dyn Fn(f64) -> bool, one: bool| -> Option<f64> {
            if one {
                return Some(1.0);
            }
            (0..STEPS).map(|i| i as f64 * step).filter(|&x| ok(x)).last()
        };
        let agree = |exact: Option<f64>, scanned: Option<f64>| match (exact, scanned) {
            (Some(e), Some(s)) => s <= e + 1e-12 && e - s <= step,
            (None, None) => true,
            _ => false,
        };
        let rho = rho_r(&profile, &inputs).value().map(|l| l.rho);
        let scanned = scan(&|x| eta * (1.0 - x) * size(x) <= c0 - k * x, c0 - k > 0.0);
        prop_assert!(agree(rho, scanned), "rho_r {:?} vs {:?}", rho, scanned);

        let rhs = eta * g_min.powf(1.5) / 30.0;
        let mu = mu_level(&profile, &inputs).value().map(|l| l.rho);
        let scanned = scan(&|x| x * (11.0 - size(x)) <= rhs, 11.0 - size(1.0) <= rhs);
        prop_assert!(agree(mu, scanned), "mu {:?} vs {:?}", mu, scanned);
    }
}

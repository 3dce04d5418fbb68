//! Property-based checks of the detector, selection, metric and generator
//! invariants.

mod common;

use std::collections::BTreeMap;

use common::*;
use decorr::autotune::{select_index, AutoDetector, AutoTuneConfig};
use decorr::detector::{cross_correlation, RECOMMENDED_ETAS};
use decorr::eval::{normalized_auc, roc_auc, trapezoid_area};
use decorr::synth::{
    build_scenario, gen_corr_strength, gen_mean_shift, gen_random_cov, scenario_suite,
    SuiteConfig,
};
use decorr::tuning::{downsample, feature_histograms, grid_search, jsd, BinEdges};
use decorr::{Detector, DetectorConfig, LabeledDataset};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(d: usize, max: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-max..max, d * d).prop_map(move |v| DMatrix::from_row_slice(d, d, &v))
}

fn window(rows: usize, d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-3.0..3.0f64, rows * d)
        .prop_map(move |v| DMatrix::from_row_slice(rows, d, &v))
}

fn stream(d: usize, len: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0..2.0f64, d), len)
}

/// Grid entries small enough not to blow up on the bounded inputs above.
fn eta() -> impl Strategy<Value = f64> {
    prop::sample::select(RECOMMENDED_ETAS[3..].to_vec())
}

/// Near-identity decorrelation matrix.
fn learned(d: usize) -> impl Strategy<Value = DMatrix<f64>> {
    matrix(d, 0.3).prop_map(move |m| m + DMatrix::identity(d, d))
}

fn config(eta: f64, gamma: f64, p: usize) -> DetectorConfig {
    DetectorConfig::new(eta, gamma, p).unwrap()
}

fn distribution(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), 0.0..1.0f64], n).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        if total < 1e-9 {
            let mut v = vec![0.0; raw.len()];
            v[0] = 1.0;
            v
        } else {
            raw.iter().map(|x| x / total).collect()
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    // ---- detector ----

    #[test]
    fn update_term_has_zero_diagonal(r in matrix(5, 2.0), w in window(3, 5)) {
        let cross = cross_correlation(&r, &w);
        for i in 0..5 {
            prop_assert_eq!(cross[(i, i)].to_bits(), 0f64.to_bits());
        }
    }

    #[test]
    fn diagonal_windows_leave_r_unchanged(
        d in 2usize..9,
        p in 0usize..3,
        picks in prop::collection::vec((0usize..8, -5.0..5.0f64), 3),
        eta in eta(),
    ) {
        // Every row has a single non-zero coordinate, so x̂ᵀx̂ is diagonal
        // under the identity.
        let mut det = Detector::new(config(eta, 0.25, p), d).unwrap();
        let rows: Vec<Vec<f64>> = picks[..=p]
            .iter()
            .map(|&(k, v)| {
                let mut x = vec![0.0; d];
                x[k % d] = v;
                x
            })
            .collect();
        let before = det.matrix().clone();
        let w = DMatrix::from_fn(p + 1, d, |i, j| rows[i][j]);
        det.update_r(&w).unwrap();
        prop_assert_eq!(det.matrix(), &before);

        let mut det = Detector::new(config(eta, 0.25, 0), d).unwrap();
        for x in &rows {
            prop_assert_eq!(det.process(x).unwrap(), 0.0);
        }
        prop_assert_eq!(det.matrix(), &before);
    }

    #[test]
    fn unwindowed_step_is_single_sample_rule(
        r0 in learned(3),
        x in prop::collection::vec(-2.0..2.0f64, 3),
        eta in eta(),
    ) {
        let mut det = Detector::resume(config(eta, 0.25, 0), r0.clone(), 10).unwrap();
        det.process(&x).unwrap();

        let xhat: Vec<f64> = (0..3).map(|i| (0..3).map(|j| r0[(i, j)] * x[j]).sum()).collect();
        for i in 0..3 {
            for j in 0..3 {
                let acc: f64 = (0..3)
                    .filter(|&k| k != i)
                    .map(|k| xhat[i] * xhat[k] * r0[(k, j)])
                    .sum();
                let expected = r0[(i, j)] - eta / 2.0 * acc;
                prop_assert!((det.matrix()[(i, j)] - expected).abs() <= 1e-14 * expected.abs().max(1.0));
            }
        }
    }

    #[test]
    fn windowed_rate_matches_explicit_normaliser(r0 in learned(4), w in window(3, 4), eta in eta()) {
        let mut det = Detector::resume(config(eta, 0.25, 2), r0.clone(), 10).unwrap();
        det.update_r(&w).unwrap();
        let expected = &r0 - (cross_correlation(&r0, &w) * &r0) * (eta / (3.0 * 3.0));
        prop_assert!((det.matrix() - expected).amax() <= 1e-14);
    }

    #[test]
    fn score_is_convex_combination(
        s in stream(4, 60),
        eta in eta(),
        gamma in 0.05..=1.0f64,
        p in 0usize..3,
    ) {
        let mut det = Detector::new(config(eta, gamma, p), 4).unwrap();
        let mut prev = 0.0f64;
        for x in &s {
            let score = det.process(x).unwrap();
            prop_assert!(score >= 0.0);
            if det.t() <= p as u64 {
                prop_assert_eq!(score, 0.0);
                continue;
            }
            let delta = (det.frobenius() - det.prev_frobenius()).abs();
            // The library folds in a cancellation-free Δ; a few ulps of ‖R‖
            // separate it from the naive difference above.
            let slack = 8.0 * f64::EPSILON * det.frobenius();
            prop_assert!(score >= prev.min(delta) - slack);
            prop_assert!(score <= prev.max(delta) + slack);
            prev = score;
        }
    }

    #[test]
    fn input_scale_trades_against_learning_rate_exactly(
        r0 in learned(3),
        w in window(2, 3),
        k in -3i32..4,
        eta in eta(),
    ) {
        let c = 2f64.powi(k);
        let mut scaled_input = Detector::resume(config(eta, 0.25, 1), r0.clone(), 5).unwrap();
        scaled_input.update_r(&(&w * c)).unwrap();
        let mut scaled_rate = Detector::resume(config(eta * c * c, 0.25, 1), r0, 5).unwrap();
        scaled_rate.update_r(&w).unwrap();
        prop_assert_eq!(scaled_input.matrix(), scaled_rate.matrix());
    }

    #[test]
    fn input_scale_trades_against_learning_rate(
        r0 in learned(3),
        w in window(2, 3),
        c in 0.3..3.0f64,
        eta in eta(),
    ) {
        let mut scaled_input = Detector::resume(config(eta, 0.25, 1), r0.clone(), 5).unwrap();
        scaled_input.update_r(&(&w * c)).unwrap();
        let mut scaled_rate = Detector::resume(config(eta * c * c, 0.25, 1), r0, 5).unwrap();
        scaled_rate.update_r(&w).unwrap();
        prop_assert!((scaled_input.matrix() - scaled_rate.matrix()).amax() <= 1e-13);
    }

    #[test]
    fn state_size_does_not_grow(s in stream(3, 200), p in 0usize..4, eta in eta()) {
        let mut det = Detector::new(config(eta, 0.25, p), 3).unwrap();
        let mut reference = None;
        for (t, x) in s.iter().enumerate() {
            det.process(x).unwrap();
            if t == p {
                reference = Some(det.memory_footprint());
            }
            if let Some(bytes) = reference {
                prop_assert_eq!(det.memory_footprint(), bytes);
            }
            prop_assert_eq!(det.buffered(), (t + 1).min(p));
        }
    }

    #[test]
    fn scoring_is_deterministic(s in stream(3, 100), p in 0usize..3, eta in eta()) {
        let run = || {
            let mut det = Detector::new(config(eta, 0.25, p), 3).unwrap();
            s.iter().map(|x| det.process(x).unwrap().to_bits()).collect::<Vec<_>>()
        };
        prop_assert_eq!(run(), run());
    }

    // ---- autotune ----

    #[test]
    fn burn_in_emits_zero(s in stream(3, 40), n in 1usize..40) {
        let cfg = AutoTuneConfig { burn_in: n, ..AutoTuneConfig::default() };
        let mut auto = AutoDetector::new(cfg, 3).unwrap();
        // Only the first n steps are constrained; a chosen rate may still
        // diverge later on these inputs.
        for x in &s[..n] {
            prop_assert_eq!(auto.process(x).unwrap(), 0.0);
        }
    }

    #[test]
    fn candidates_follow_standalone_detectors(s in stream(2, 30)) {
        let cfg = AutoTuneConfig { burn_in: 31, ..AutoTuneConfig::default() };
        let etas = cfg.eta_grid.clone();
        let mut auto = AutoDetector::new(cfg, 2).unwrap();
        for x in &s {
            auto.process(x).unwrap();
        }
        for (i, &eta) in etas.iter().enumerate() {
            let mut det = Detector::new(config(eta, 0.25, 0), 2).unwrap();
            let mut ok = true;
            for x in &s {
                ok &= det.process(x).is_ok();
            }
            if ok {
                prop_assert_eq!(auto.candidate_matrices()[i], det.matrix());
            }
        }
    }

    #[test]
    fn selection_admits_the_minimum(levels in prop::collection::vec(0.0..5.0f64, 1..12)) {
        let etas = RECOMMENDED_ETAS[..levels.len()].to_vec();
        let wrapped: Vec<Option<f64>> = levels.iter().copied().map(Some).collect();
        let i = select_index(&wrapped, &etas).unwrap();
        let min = levels.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(levels[i] >= min && levels[i] <= 1.025 * min);
        prop_assert_eq!(Some(i), brute_force_select(&wrapped, &etas));
    }

    // ---- eval ----

    #[test]
    fn auc_invariant_under_monotone_maps(
        scores in prop::collection::vec(0u32..1000, 4..120),
        labels in prop::collection::vec(0u8..2, 4..120),
    ) {
        let n = scores.len().min(labels.len());
        let mut labels = labels[..n].to_vec();
        labels[0] = 0;
        labels[1] = 1;
        let raw: Vec<f64> = scores[..n].iter().map(|&s| s as f64).collect();
        let base = roc_auc(&raw, &labels).unwrap().auc;
        for f in [|x: f64| 3.0 * x - 7.0, |x: f64| x * x * x, |x: f64| (x / 100.0).exp()] {
            let mapped: Vec<f64> = raw.iter().map(|&x| f(x)).collect();
            prop_assert_eq!(roc_auc(&mapped, &labels).unwrap().auc, base);
        }
    }

    #[test]
    fn roc_curve_is_well_formed(
        scores in prop::collection::vec(-1.0..1.0f64, 4..150),
        labels in prop::collection::vec(0u8..2, 4..150),
    ) {
        let n = scores.len().min(labels.len());
        let mut labels = labels[..n].to_vec();
        labels[0] = 1;
        labels[n - 1] = 0;
        let roc = roc_auc(&scores[..n], &labels).unwrap();
        prop_assert_eq!(roc.curve.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(roc.curve.last().copied(), Some((1.0, 1.0)));
        for pair in roc.curve.windows(2) {
            prop_assert!(pair[1].0 >= pair[0].0 && pair[1].1 >= pair[0].1);
        }
        prop_assert!((trapezoid_area(&roc.curve) - roc.auc).abs() <= 1e-12);
        prop_assert!((brute_force_auc(&scores[..n], &labels) - roc.auc).abs() <= 1e-12);
    }

    #[test]
    fn normalized_auc_is_scale_free(
        aucs in prop::collection::vec(0.01..=1.0f64, 1..8),
        k in 0.01..=1.0f64,
    ) {
        let named = |scale: f64| -> BTreeMap<String, f64> {
            aucs.iter().enumerate().map(|(i, &a)| (format!("m{i}"), a * scale)).collect()
        };
        let base = normalized_auc(&named(1.0)).unwrap();
        let scaled = normalized_auc(&named(k)).unwrap();
        prop_assert!(base.values().any(|&v| v == 100.0));
        prop_assert!(scaled.values().any(|&v| v == 100.0));
        for (name, v) in &base {
            prop_assert!(*v > 0.0 && *v <= 100.0);
            prop_assert!((v - scaled[name]).abs() <= 1e-10);
        }
    }

    // ---- tuning ----

    #[test]
    fn jsd_is_symmetric_and_bounded(p in distribution(12), q in distribution(12)) {
        let a = jsd(&p, &q).unwrap();
        let b = jsd(&q, &p).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(jsd(&p, &p).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn subsets_are_sorted_parent_rows(m in 1usize..500, ratio in 0.05..=1.0f64, seed in any::<u64>(), slot in 0usize..6) {
        let idx = downsample(m, ratio, seed, slot);
        let expected = ((ratio * m as f64).round() as usize).clamp(1, m);
        prop_assert_eq!(idx.len(), expected);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(idx.iter().all(|&i| i < m));
        prop_assert_eq!(idx, downsample(m, ratio, seed, slot));
    }

    #[test]
    fn histograms_are_normalized(
        values in prop::collection::vec(-10.0..10.0f64, 6..200),
        bins in 2usize..30,
        seed in any::<u64>(),
    ) {
        let d = 2;
        let m = values.len() / d;
        let mut labels = vec![0u8; m];
        labels[0] = 1;
        let ds = LabeledDataset::new(
            "h",
            decorr::dataset::default_feature_names(d),
            values[..m * d].to_vec(),
            labels,
        )
        .unwrap();
        for h in feature_histograms(&ds, bins).unwrap() {
            prop_assert!((h.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        let edges = BinEdges::fit(&ds, bins).unwrap();
        let idx = downsample(m, 0.5, seed, 0);
        let sub = ds.subset(&idx);
        for (k, &i) in idx.iter().enumerate() {
            prop_assert_eq!(sub.row(k), ds.row(i));
        }
        for h in edges.histograms(idx.iter().map(|&i| ds.row(i))) {
            prop_assert!((h.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn grid_search_ignores_grid_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let stream = random_stream(seed, 2, 300, 1.0);
        let mut labels = vec![0u8; 300];
        for l in &mut labels[200..230] {
            *l = 1;
        }
        let ds = LabeledDataset::new(
            "g",
            decorr::dataset::default_feature_names(2),
            stream.concat(),
            labels,
        )
        .unwrap();
        let mut grid = decorr::tuning::recommended_grid(&[0, 1]);
        let forward = grid_search(&ds, &grid).unwrap();
        let n = grid.len();
        for i in 0..n {
            let j = (shuffle as usize).wrapping_mul(i + 7) % n;
            grid.swap(i, j);
        }
        let shuffled = grid_search(&ds, &grid).unwrap();
        prop_assert_eq!(forward.best, shuffled.best);
        prop_assert_eq!(forward.subset_auc, shuffled.subset_auc);
    }

    #[test]
    fn generators_are_deterministic(seed in any::<u64>(), d in 2usize..6, s in 0.0..0.95f64) {
        prop_assert_eq!(gen_random_cov(d, 300, seed).unwrap(), gen_random_cov(d, 300, seed).unwrap());
        prop_assert_eq!(
            gen_corr_strength(d, 300, s, seed).unwrap(),
            gen_corr_strength(d, 300, s, seed).unwrap()
        );
        let shift = vec![1.5; d];
        prop_assert_eq!(
            gen_mean_shift(d, 300, seed, seed ^ 1, &shift).unwrap(),
            gen_mean_shift(d, 300, seed, seed ^ 1, &shift).unwrap()
        );
    }

    #[test]
    fn suites_are_deterministic(seed in any::<u64>()) {
        let config = SuiteConfig::new(seed, 4000);
        let a = scenario_suite(&config).unwrap();
        let b = scenario_suite(&config).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.len(), 20);
        let spec = &a[(seed % 20) as usize];
        let x = build_scenario(spec).unwrap();
        let y = build_scenario(spec).unwrap();
        prop_assert_eq!(x.values(), y.values());
        prop_assert_eq!(x.n_anomalies(), spec.anomaly.length);
        prop_assert!(spec.anomaly.start >= spec.m / 10);
    }
}

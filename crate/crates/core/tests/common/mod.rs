//! Independent reference implementations used by the integration tests.
//!
//! Everything here works on plain `Vec`s with explicit loops. The only
//! library code reused is the seeded row sampler, which fixes which rows a
//! candidate subset holds rather than anything being checked.

#![allow(dead_code)]

use decorr::dataset::default_feature_names;
use decorr::tuning::{downsample, SubsetConfig};
use decorr::LabeledDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Mat = Vec<Vec<f64>>;

pub fn identity(d: usize) -> Mat {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn frobenius(m: &Mat) -> f64 {
    m.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

/// Result of replaying a stream through the reference recursion.
pub struct OracleRun {
    pub scores: Vec<f64>,
    /// 1-based step at which the matrix first became non-finite.
    pub diverged_at: Option<usize>,
    pub r: Mat,
}

/// Replays the whole stream, rebuilding the window from the stored history
/// at every step and recomputing the update from scratch.
pub fn oracle_scores(stream: &[Vec<f64>], eta: f64, gamma: f64, p: usize) -> OracleRun {
    let d = stream[0].len();
    let mut r = identity(d);
    let mut s = 0.0;
    let mut scores = Vec::with_capacity(stream.len());
    for t in 1..=stream.len() {
        if t <= p {
            scores.push(0.0);
            continue;
        }
        let window = &stream[t - 1 - p..t];

        // x̂_k = R x_k for every window row.
        let xhat: Mat = window
            .iter()
            .map(|x| {
                (0..d)
                    .map(|i| (0..d).map(|j| r[i][j] * x[j]).sum())
                    .collect()
            })
            .collect();

        let rate = eta / ((p + 1) as f64 * (d - 1) as f64);
        let mut u = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in 0..d {
                let mut acc = 0.0;
                for k in 0..d {
                    if k == i {
                        continue;
                    }
                    let c_ik: f64 = xhat.iter().map(|row| row[i] * row[k]).sum();
                    acc += c_ik * r[k][j];
                }
                u[i][j] = rate * acc;
            }
        }

        let next: Mat = (0..d)
            .map(|i| (0..d).map(|j| r[i][j] - u[i][j]).collect())
            .collect();
        if next.iter().flatten().any(|v| !v.is_finite()) {
            return OracleRun {
                scores,
                diverged_at: Some(t),
                r,
            };
        }

        let norm_old = frobenius(&r);
        let norm_new = frobenius(&next);
        // |‖R − U‖ − ‖R‖| written without subtracting the two norms.
        let mut uu = 0.0;
        let mut ru = 0.0;
        for i in 0..d {
            for j in 0..d {
                uu += u[i][j] * u[i][j];
                ru += r[i][j] * u[i][j];
            }
        }
        let delta = (uu - 2.0 * ru).abs() / (norm_new + norm_old);
        if !delta.is_finite() {
            return OracleRun {
                scores,
                diverged_at: Some(t),
                r,
            };
        }
        s = (1.0 - gamma) * s + gamma * delta;
        scores.push(s);
        r = next;
    }
    OracleRun {
        scores,
        diverged_at: None,
        r,
    }
}

/// Largest elementwise relative deviation; exact zeros on both sides count
/// as agreement.
pub fn max_relative_error(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let scale = x.abs().max(y.abs());
            if scale == 0.0 {
                0.0
            } else {
                (x - y).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Gaussian stream `x = A z` with a random mixing matrix and scale.
pub fn random_stream(seed: u64, d: usize, len: usize, scale: f64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a: Mat = (0..d)
        .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    (0..len)
        .map(|_| {
            let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            (0..d)
                .map(|i| scale * (0..d).map(|j| a[i][j] * z[j]).sum::<f64>() / (d as f64).sqrt())
                .collect()
        })
        .collect()
}

/// Pairwise Mann-Whitney count with half credit for ties.
pub fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &sp) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sn) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                wins += 1.0;
            } else if sp == sn {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Admit every level within 1.025 of the minimum, then take the largest
/// admitted level, preferring the larger learning rate on exact ties.
pub fn brute_force_select(levels: &[Option<f64>], etas: &[f64]) -> Option<usize> {
    let valid: Vec<usize> = (0..levels.len()).filter(|&i| levels[i].is_some()).collect();
    let min = valid
        .iter()
        .map(|&i| levels[i].unwrap())
        .reduce(f64::min)?;
    let admitted: Vec<usize> = valid
        .into_iter()
        .filter(|&i| levels[i].unwrap() <= 1.025 * min)
        .collect();
    let top = admitted
        .iter()
        .map(|&i| levels[i].unwrap())
        .reduce(f64::max)?;
    admitted
        .into_iter()
        .filter(|&i| levels[i].unwrap() == top)
        .reduce(|a, b| if etas[b] > etas[a] { b } else { a })
}

/// Base-2 Jensen-Shannon divergence straight from its definition.
pub fn reference_jsd(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
    let kl = |x: &[f64]| -> f64 {
        x.iter()
            .zip(&m)
            .filter(|(a, _)| **a > 0.0)
            .map(|(a, mm)| a * (a / mm).log2())
            .sum()
    };
    0.5 * kl(p) + 0.5 * kl(q)
}

/// Equal-width histogram over `[lo, hi]` with the top edge closed.
pub fn reference_histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for &v in values {
        let b = if hi > lo {
            (((v - lo) / (hi - lo)) * bins as f64).floor() as isize
        } else {
            0
        };
        counts[b.clamp(0, bins as isize - 1) as usize] += 1.0;
    }
    let n = values.len() as f64;
    counts.iter().map(|c| c / n).collect()
}

/// Mean JSD of a subset against its parent, recomputed from scratch.
pub fn reference_mean_jsd(ds: &LabeledDataset, indices: &[usize], bins: usize) -> f64 {
    let d = ds.n_features();
    let mut total = 0.0;
    for j in 0..d {
        let parent: Vec<f64> = ds.column(j).collect();
        let lo = parent.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = parent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sub: Vec<f64> = indices.iter().map(|&i| parent[i]).collect();
        total += reference_jsd(
            &reference_histogram(&sub, lo, hi, bins),
            &reference_histogram(&parent, lo, hi, bins),
        );
    }
    total / d as f64
}

/// Small labeled dataset with a random size, width and contamination.
pub fn random_labeled(seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(40..400);
    let d = rng.random_range(1..5);
    let rate = rng.random_range(0.005..0.2);
    let values: Vec<f64> = (0..m * d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mut labels: Vec<u8> = (0..m).map(|_| rng.random_bool(rate) as u8).collect();
    labels[rng.random_range(0..m)] = 1;
    LabeledDataset::new("random", default_feature_names(d), values, labels).unwrap()
}

/// Ratio with the smallest reference mean JSD among subsets that contain an
/// anomaly; earlier ratios win ties.
pub fn brute_force_subset_ratio(ds: &LabeledDataset, config: &SubsetConfig) -> f64 {
    let mut best: Option<(f64, f64)> = None;
    for (slot, &ratio) in config.ratios.iter().enumerate() {
        let indices = downsample(ds.n_rows(), ratio, config.seed, slot);
        if indices.iter().all(|&i| ds.labels()[i] == 0) {
            continue;
        }
        let score = reference_mean_jsd(ds, &indices, config.bins);
        best = match best {
            Some((s, r)) if s <= score => Some((s, r)),
            _ => Some((score, ratio)),
        };
    }
    best.expect("at least one subset holds an anomaly").1
}

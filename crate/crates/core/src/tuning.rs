//! Hyperparameter tuning on a representative labeled subset.
//!
//! The dataset is downsampled at several ratios; the subset whose per-feature
//! histograms are closest to the full dataset's (mean Jensen-Shannon
//! divergence, shared bin edges) and that still contains at least one anomaly
//! is used to pick the detector configuration with the best AUC.

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::detector::{DetectorConfig, DEFAULT_GAMMA, RECOMMENDED_ETAS};
use crate::error::{Error, Result};
use crate::eval;
use crate::synth::seeded_rng;

pub const DEFAULT_BINS: usize = 20;
pub const DEFAULT_RATIOS: [f64; 6] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];

/// Equal-width bins per feature over the parent's `[min, max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinEdges {
    bins: usize,
    /// `(min, width)` per feature; width 0 marks a constant feature.
    features: Vec<(f64, f64)>,
}

impl BinEdges {
    pub fn fit(dataset: &LabeledDataset, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::InvalidConfig(format!("need at least 2 bins, got {bins}")));
        }
        if dataset.n_rows() == 0 {
            return Err(Error::Dimension("cannot histogram an empty dataset".into()));
        }
        let features = (0..dataset.n_features())
            .map(|j| {
                let (lo, hi) = dataset
                    .column(j)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                (lo, (hi - lo) / bins as f64)
            })
            .collect();
        Ok(Self { bins, features })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    fn bin_of(&self, feature: usize, value: f64) -> usize {
        let (lo, width) = self.features[feature];
        if !(width > 0.0) {
            return 0;
        }
        let k = ((value - lo) / width).floor();
        if k <= 0.0 {
            0
        } else {
            (k as usize).min(self.bins - 1)
        }
    }

    /// Normalized histograms (`d × bins`) of the given rows.
    pub fn histograms<'a>(&self, rows: impl Iterator<Item = &'a [f64]>) -> Vec<Vec<f64>> {
        let d = self.features.len();
        let mut counts = vec![vec![0usize; self.bins]; d];
        let mut n = 0usize;
        for row in rows {
            for (j, &v) in row.iter().enumerate() {
                counts[j][self.bin_of(j, v)] += 1;
            }
            n += 1;
        }
        counts
            .into_iter()
            .map(|c| {
                c.into_iter()
                    .map(|k| if n == 0 { 0.0 } else { k as f64 / n as f64 })
                    .collect()
            })
            .collect()
    }
}

/// Per-feature probability histograms of a dataset on its own edges.
pub fn feature_histograms(dataset: &LabeledDataset, bins: usize) -> Result<Vec<Vec<f64>>> {
    Ok(BinEdges::fit(dataset, bins)?.histograms(dataset.rows()))
}

fn check_distribution(p: &[f64], which: &str) -> Result<()> {
    if p.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidDistribution(format!(
            "{which} has negative or non-finite entries"
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!(
            "{which} sums to {total}, expected 1"
        )));
    }
    Ok(())
}

/// Jensen-Shannon divergence in bits, so the result lies in `[0, 1]`.
pub fn jsd(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::InvalidDistribution(format!(
            "lengths differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = 0.5 * (a + b);
        // Summing both terms per bin in a symmetric expression keeps
        // jsd(p, q) == jsd(q, p) bit for bit.
        total += kl_term(a, m) + kl_term(b, m);
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

fn kl_term(a: f64, m: f64) -> f64 {
    if a > 0.0 {
        a * (a / m).log2()
    } else {
        0.0
    }
}

/// One downsampling candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCandidate {
    pub ratio: f64,
    pub size: usize,
    pub anomalies: usize,
    pub mean_jsd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetSelection {
    pub ratio: f64,
    /// Sorted row indices into the parent dataset.
    pub indices: Vec<usize>,
    pub candidates: Vec<RatioCandidate>,
    pub contamination: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetConfig {
    pub ratios: Vec<f64>,
    pub bins: usize,
    pub seed: u64,
}

impl Default for SubsetConfig {
    fn default() -> Self {
        Self {
            ratios: DEFAULT_RATIOS.to_vec(),
            bins: DEFAULT_BINS,
            seed: 0,
        }
    }
}

/// Order-preserving uniform sample of `round(ratio · m)` rows without
/// replacement. Candidate `slot` uses ChaCha20 stream `slot` of `seed`.
pub fn downsample(m: usize, ratio: f64, seed: u64, slot: usize) -> Vec<usize> {
    let size = ((ratio * m as f64).round() as usize).clamp(1, m);
    let mut rng = seeded_rng(seed);
    rng.set_stream(slot as u64);
    let mut picked = index::sample(&mut rng, m, size).into_vec();
    picked.sort_unstable();
    picked
}

/// Mean over features of the JSD between the subset and parent histograms.
pub fn mean_subset_jsd(
    dataset: &LabeledDataset,
    edges: &BinEdges,
    parent: &[Vec<f64>],
    indices: &[usize],
) -> Result<f64> {
    let sub = edges.histograms(indices.iter().map(|&i| dataset.row(i)));
    let mut total = 0.0;
    for (h_sub, h_parent) in sub.iter().zip(parent) {
        total += jsd(h_sub, h_parent)?;
    }
    Ok(total / parent.len() as f64)
}

pub fn select_subset(dataset: &LabeledDataset, config: &SubsetConfig) -> Result<SubsetSelection> {
    if config.ratios.is_empty() {
        return Err(Error::InvalidConfig("no downsampling ratios given".into()));
    }
    if let Some(r) = config.ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(Error::InvalidConfig(format!("ratio {r} outside (0, 1]")));
    }
    if dataset.n_anomalies() == 0 {
        return Err(Error::NoValidSubset);
    }
    let edges = BinEdges::fit(dataset, config.bins)?;
    let parent = edges.histograms(dataset.rows());

    let mut candidates = Vec::with_capacity(config.ratios.len());
    let mut subsets = Vec::with_capacity(config.ratios.len());
    for (slot, &ratio) in config.ratios.iter().enumerate() {
        let indices = downsample(dataset.n_rows(), ratio, config.seed, slot);
        let anomalies = indices.iter().filter(|&&i| dataset.labels()[i] == 1).count();
        let mean_jsd = mean_subset_jsd(dataset, &edges, &parent, &indices)?;
        candidates.push(RatioCandidate {
            ratio,
            size: indices.len(),
            anomalies,
            mean_jsd,
        });
        subsets.push(indices);
    }

    // Minimal JSD among subsets with at least one anomaly; ties go to the
    // smaller ratio.
    let best = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.anomalies > 0)
        .min_by(|(_, a), (_, b)| {
            a.mean_jsd
                .total_cmp(&b.mean_jsd)
                .then(a.ratio.total_cmp(&b.ratio))
        })
        .map(|(i, _)| i)
        .ok_or(Error::NoValidSubset)?;

    let chosen = &candidates[best];
    Ok(SubsetSelection {
        ratio: chosen.ratio,
        contamination: chosen.anomalies as f64 / chosen.size as f64,
        indices: subsets.swap_remove(best),
        candidates,
    })
}

/// Every `(eta, window)` pair with the given momentum.
pub fn config_grid(etas: &[f64], windows: &[usize], gamma: f64) -> Result<Vec<DetectorConfig>> {
    let mut grid = Vec::with_capacity(etas.len() * windows.len());
    for &window in windows {
        for &eta in etas {
            grid.push(DetectorConfig::new(eta, gamma, window)?);
        }
    }
    Ok(grid)
}

/// The recommended learning-rate grid at `γ = 0.25` for the given windows.
pub fn recommended_grid(windows: &[usize]) -> Vec<DetectorConfig> {
    config_grid(&RECOMMENDED_ETAS, windows, DEFAULT_GAMMA).expect("recommended grid is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub config: DetectorConfig,
    pub auc: f64,
    /// The detector diverged; `auc` is the 0.5 placeholder.
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub best: DetectorConfig,
    pub subset_auc: f64,
    pub grid_results: Vec<GridEntry>,
}

/// Index of the best entry: max AUC, then smaller η, then smaller window.
///
/// Diverged entries only carry a placeholder AUC, so they are considered
/// only when every entry diverged.
pub fn best_entry(entries: &[GridEntry]) -> Option<usize> {
    let any_finished = entries.iter().any(|e| !e.diverged);
    entries
        .iter()
        .enumerate()
        .filter(|(_, e)| !(any_finished && e.diverged))
        .max_by(|(_, a), (_, b)| {
            a.auc
                .total_cmp(&b.auc)
                .then(b.config.eta.total_cmp(&a.config.eta))
                .then(b.config.window.cmp(&a.config.window))
        })
        .map(|(i, _)| i)
}

/// Scores `dataset` with every configuration and keeps the best AUC.
///
/// Configurations run in parallel; the audit table keeps grid order.
pub fn grid_search(dataset: &LabeledDataset, grid: &[DetectorConfig]) -> Result<TuneResult> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyperparameter grid".into()));
    }
    eval::check_two_class(dataset.labels())?;
    let grid_results = grid
        .par_iter()
        .map(|config| match eval::score_dataset(dataset, config) {
            Ok(scores) => {
                let auc = eval::roc_auc(&scores, dataset.labels())?.auc;
                Ok(GridEntry {
                    config: *config,
                    auc,
                    diverged: false,
                })
            }
            Err(Error::Divergence { .. }) => Ok(GridEntry {
                config: *config,
                auc: 0.5,
                diverged: true,
            }),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<_>>>()?;
    let best = best_entry(&grid_results).expect("grid is non-empty");
    Ok(TuneResult {
        best: grid_results[best].config,
        subset_auc: grid_results[best].auc,
        grid_results,
    })
}

/// Subset selection followed by a grid search on the subset.
pub fn tune(
    dataset: &LabeledDataset,
    subset: &SubsetConfig,
    grid: &[DetectorConfig],
) -> Result<(SubsetSelection, TuneResult)> {
    let selection = select_subset(dataset, subset)?;
    let sub = dataset.subset(&selection.indices);
    let result = grid_search(&sub, grid)?;
    Ok((selection, result))
}

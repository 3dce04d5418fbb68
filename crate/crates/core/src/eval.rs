//! Scoring quality and runtime evaluation.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autotune::{AutoDetector, AutoTuneConfig};
use crate::dataset::LabeledDataset;
use crate::detector::{Detector, DetectorConfig};
use crate::error::{Error, Result};
use crate::tuning::{self, SubsetConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    pub auc: f64,
    /// `(false-positive rate, true-positive rate)` from `(0, 0)` to `(1, 1)`.
    pub curve: Vec<(f64, f64)>,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn check_two_class(labels: &[u8]) -> Result<()> {
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass {
            positives,
            negatives,
        });
    }
    Ok(())
}

/// ROC curve and AUC with half credit for tied scores.
///
/// The area is accumulated from integer counts, so it equals the
/// Mann-Whitney statistic `P(pos > neg) + ½ P(pos = neg)` up to one final
/// division.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<RocResult> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig("scores must be finite".into()));
    }
    check_two_class(labels)?;
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = Vec::with_capacity(scores.len() + 1);
    curve.push((0.0, 0.0));
    let (mut tp, mut fp) = (0u64, 0u64);
    // Twice the area in units of one positive-negative pair.
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        let (tp_before, fp_before) = (tp, fp);
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp_before) * u128::from(tp + tp_before);
        curve.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
    }
    let auc = twice_area as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocResult {
        auc,
        curve,
        n_pos,
        n_neg,
    })
}

/// Trapezoidal area under a ROC curve.
pub fn trapezoid_area(curve: &[(f64, f64)]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum()
}

/// Each AUC as a percentage of the best AUC in the map.
pub fn normalized_auc(aucs: &BTreeMap<String, f64>) -> Result<BTreeMap<String, f64>> {
    if aucs.is_empty() {
        return Err(Error::InvalidConfig("no AUC values to normalize".into()));
    }
    let max = aucs.values().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max > 0.0) {
        return Err(Error::DegenerateAuc);
    }
    Ok(aucs
        .iter()
        .map(|(k, &v)| (k.clone(), if v == max { 100.0 } else { v / max * 100.0 }))
        .collect())
}

/// Streams every row of `dataset` through a fresh detector.
pub fn score_dataset(dataset: &LabeledDataset, config: &DetectorConfig) -> Result<Vec<f64>> {
    let mut det = Detector::new(*config, dataset.n_features())?;
    dataset.rows().map(|row| det.process(row)).collect()
}

pub fn score_dataset_auto(dataset: &LabeledDataset, config: &AutoTuneConfig) -> Result<(Vec<f64>, f64)> {
    let mut det = AutoDetector::new(config.clone(), dataset.n_features())?;
    let scores = dataset
        .rows()
        .map(|row| det.process(row))
        .collect::<Result<Vec<_>>>()?;
    let eta = det.selection().map(|s| s.eta).unwrap_or(f64::NAN);
    Ok((scores, eta))
}

/// Scores plus the time spent producing them.
#[derive(Debug, Clone)]
pub struct TimedScores {
    pub scores: Vec<f64>,
    pub elapsed: Option<Duration>,
}

/// Sequential scoring on the calling thread; only the detector loop is timed.
pub fn score_timed(dataset: &LabeledDataset, config: &DetectorConfig, timed: bool) -> Result<TimedScores> {
    let mut det = Detector::new(*config, dataset.n_features())?;
    let mut scores = Vec::with_capacity(dataset.n_rows());
    let start = timed.then(Instant::now);
    for row in dataset.rows() {
        scores.push(det.process(row)?);
    }
    Ok(TimedScores {
        scores,
        elapsed: start.map(|s| s.elapsed()),
    })
}

fn score_auto_timed(dataset: &LabeledDataset, config: &AutoTuneConfig) -> Result<(TimedScores, f64)> {
    let mut det = AutoDetector::new(config.clone(), dataset.n_features())?;
    let mut scores = Vec::with_capacity(dataset.n_rows());
    let start = Instant::now();
    for row in dataset.rows() {
        scores.push(det.process(row)?);
    }
    let elapsed = start.elapsed();
    let eta = det.selection().map(|s| s.eta).unwrap_or(f64::NAN);
    Ok((
        TimedScores {
            scores,
            elapsed: Some(elapsed),
        },
        eta,
    ))
}

/// How a benchmarked method picks its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum MethodKind {
    /// A single fixed configuration.
    Fixed { config: DetectorConfig },
    /// Best full-dataset AUC over the grid (peak performance).
    Peak { grid: Vec<DetectorConfig> },
    /// Grid search on a representative subset, then scoring of the full data.
    Tuned { grid: Vec<DetectorConfig>, subset: SubsetConfig },
    /// Burn-in learning-rate selection.
    Auto { config: AutoTuneConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: String,
    pub kind: MethodKind,
}

/// Scores produced outside this toolkit for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalScores {
    pub method: String,
    pub dataset: String,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub repeats: usize,
    pub timed: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            repeats: 1,
            timed: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub auc: Option<f64>,
    pub normalized_auc: Option<f64>,
    /// Seconds of score production, one entry per repeat.
    pub wall_clock: Vec<f64>,
    pub mean_wall_clock: Option<f64>,
    pub config: Option<DetectorConfig>,
    /// Learning rate picked by the burn-in, for auto methods.
    pub auto_eta: Option<f64>,
    pub external: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub repeats: usize,
    pub rows: Vec<ReportRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRecord {
    pub dataset: String,
    pub method: String,
    pub roc: RocResult,
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub report: EvalReport,
    pub curves: Vec<CurveRecord>,
}

struct CellOutcome {
    row: ReportRow,
    roc: Option<RocResult>,
}

fn failed_row(dataset: &str, method: &str, external: bool, err: &Error) -> CellOutcome {
    CellOutcome {
        row: ReportRow {
            dataset: dataset.to_owned(),
            method: method.to_owned(),
            auc: None,
            normalized_auc: None,
            wall_clock: Vec::new(),
            mean_wall_clock: None,
            config: None,
            auto_eta: None,
            external,
            error: Some(err.to_string()),
        },
        roc: None,
    }
}

fn peak_config(dataset: &LabeledDataset, grid: &[DetectorConfig]) -> Result<DetectorConfig> {
    Ok(tuning::grid_search(dataset, grid)?.best)
}

fn run_cell(dataset: &LabeledDataset, method: &MethodSpec, options: &BenchOptions) -> Result<CellOutcome> {
    check_two_class(dataset.labels())?;
    let repeats = options.repeats.max(1);
    let mut wall_clock = Vec::with_capacity(repeats);
    let mut reference: Option<Vec<f64>> = None;
    let mut config = None;
    let mut auto_eta = None;

    let fixed = match &method.kind {
        MethodKind::Fixed { config } => Some(*config),
        MethodKind::Peak { grid } => Some(peak_config(dataset, grid)?),
        MethodKind::Tuned { grid, subset } => Some(tuning::tune(dataset, subset, grid)?.1.best),
        MethodKind::Auto { .. } => None,
    };

    for _ in 0..repeats {
        let run = match (&method.kind, fixed) {
            (MethodKind::Auto { config }, _) => {
                let (run, eta) = score_auto_timed(dataset, config)?;
                auto_eta = Some(eta);
                run
            }
            (_, Some(cfg)) => {
                config = Some(cfg);
                score_timed(dataset, &cfg, options.timed)?
            }
            (_, None) => unreachable!("non-auto methods resolve a configuration"),
        };
        if let Some(elapsed) = run.elapsed {
            wall_clock.push(elapsed.as_secs_f64());
        }
        match &reference {
            None => reference = Some(run.scores),
            Some(r) => debug_assert_eq!(r, &run.scores),
        }
    }

    let scores = reference.expect("at least one repeat");
    let roc = roc_auc(&scores, dataset.labels())?;
    let mean_wall_clock =
        (!wall_clock.is_empty()).then(|| wall_clock.iter().sum::<f64>() / wall_clock.len() as f64);
    Ok(CellOutcome {
        row: ReportRow {
            dataset: dataset.name.clone(),
            method: method.name.clone(),
            auc: Some(roc.auc),
            normalized_auc: None,
            wall_clock,
            mean_wall_clock,
            config,
            auto_eta,
            external: false,
            error: None,
        },
        roc: Some(roc),
    })
}

fn external_cell(dataset: &LabeledDataset, ext: &ExternalScores) -> Result<CellOutcome> {
    if ext.scores.len() != dataset.n_rows() {
        return Err(Error::Dimension(format!(
            "{} external scores for {} rows",
            ext.scores.len(),
            dataset.n_rows()
        )));
    }
    let roc = roc_auc(&ext.scores, dataset.labels())?;
    Ok(CellOutcome {
        row: ReportRow {
            dataset: dataset.name.clone(),
            method: ext.method.clone(),
            auc: Some(roc.auc),
            normalized_auc: None,
            wall_clock: Vec::new(),
            mean_wall_clock: None,
            config: None,
            auto_eta: None,
            external: true,
            error: None,
        },
        roc: Some(roc),
    })
}

/// Runs every dataset × method cell and adds externally computed scores.
///
/// Cells run in parallel on the current rayon pool; each detector runs on a
/// single thread so its wall-clock time is meaningful. Failed cells are kept
/// as rows with an error message. Rows are ordered dataset-major in input
/// order, methods before external scores.
pub fn run_benchmark(
    datasets: &[LabeledDataset],
    methods: &[MethodSpec],
    external: &[ExternalScores],
    options: &BenchOptions,
) -> BenchOutcome {
    let cells: Vec<(usize, usize)> = (0..datasets.len())
        .flat_map(|d| (0..methods.len()).map(move |m| (d, m)))
        .collect();
    let mut outcomes: Vec<(usize, CellOutcome)> = cells
        .par_iter()
        .map(|&(d, m)| {
            let ds = &datasets[d];
            let method = &methods[m];
            let cell = run_cell(ds, method, options)
                .unwrap_or_else(|e| failed_row(&ds.name, &method.name, false, &e));
            (d, cell)
        })
        .collect();

    for ext in external {
        match datasets.iter().position(|ds| ds.name == ext.dataset) {
            Some(d) => {
                let cell = external_cell(&datasets[d], ext)
                    .unwrap_or_else(|e| failed_row(&ext.dataset, &ext.method, true, &e));
                outcomes.push((d, cell));
            }
            None => outcomes.push((
                datasets.len(),
                failed_row(
                    &ext.dataset,
                    &ext.method,
                    true,
                    &Error::InvalidConfig(format!("unknown dataset {:?}", ext.dataset)),
                ),
            )),
        }
    }
    // Stable sort keeps method order within a dataset.
    outcomes.sort_by_key(|(d, _)| *d);

    let mut rows: Vec<ReportRow> = Vec::with_capacity(outcomes.len());
    let mut curves = Vec::new();
    for (_, cell) in outcomes {
        if let Some(roc) = cell.roc {
            curves.push(CurveRecord {
                dataset: cell.row.dataset.clone(),
                method: cell.row.method.clone(),
                roc,
            });
        }
        rows.push(cell.row);
    }

    for ds in datasets {
        let aucs: BTreeMap<String, f64> = rows
            .iter()
            .filter(|r| r.dataset == ds.name)
            .filter_map(|r| r.auc.map(|a| (r.method.clone(), a)))
            .collect();
        if let Ok(norm) = normalized_auc(&aucs) {
            for row in rows.iter_mut().filter(|r| r.dataset == ds.name) {
                row.normalized_auc = norm.get(&row.method).copied();
            }
        }
    }

    BenchOutcome {
        report: EvalReport {
            repeats: options.repeats.max(1),
            rows,
        },
        curves,
    }
}

impl EvalReport {
    /// CSV with one `wall_clock_<k>` column per repeat.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["dataset", "method", "auc", "normalized_auc"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend((1..=self.repeats).map(|k| format!("wall_clock_{k}")));
        header.extend(
            ["mean_wall_clock", "eta", "gamma", "window", "auto_eta", "external", "error"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;

        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let mut rec = vec![
                row.dataset.clone(),
                row.method.clone(),
                opt(row.auc),
                opt(row.normalized_auc),
            ];
            for k in 0..self.repeats {
                rec.push(opt(row.wall_clock.get(k).copied()));
            }
            rec.push(opt(row.mean_wall_clock));
            rec.push(opt(row.config.map(|c| c.eta)));
            rec.push(opt(row.config.map(|c| c.gamma)));
            rec.push(row.config.map(|c| c.window.to_string()).unwrap_or_default());
            rec.push(opt(row.auto_eta));
            rec.push(row.external.to_string());
            rec.push(row.error.clone().unwrap_or_default());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_curve_csv<W: std::io::Write>(writer: W, roc: &RocResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["fpr", "tpr"])?;
    for (fpr, tpr) in &roc.curve {
        w.write_record([fpr.to_string(), tpr.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

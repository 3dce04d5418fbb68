//! Learning-rate selection by a burn-in race.
//!
//! During the first `burn_in` samples one decorrelation matrix per candidate
//! learning rate is trained (no temporal window) and the correlation level of
//! the decorrelated input is recorded. After the burn-in the candidate with
//! the largest mean level among those within 2.5% of the minimum is kept and
//! the detector switches to normal scoring. Burn-in scores are exactly zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::detector::{self, Detector, DetectorConfig, DEFAULT_GAMMA, RECOMMENDED_ETAS};
use crate::error::{Error, Result};

/// Candidates whose mean level is at most this multiple of the minimum are
/// admitted to the final argmax.
pub const ADMISSION_FACTOR: f64 = 1.025;

pub const DEFAULT_BURN_IN: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoTuneConfig {
    pub eta_grid: Vec<f64>,
    pub burn_in: usize,
    pub gamma: f64,
}

impl Default for AutoTuneConfig {
    fn default() -> Self {
        Self {
            eta_grid: RECOMMENDED_ETAS.to_vec(),
            burn_in: DEFAULT_BURN_IN,
            gamma: DEFAULT_GAMMA,
        }
    }
}

impl AutoTuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.eta_grid.is_empty() {
            return Err(Error::InvalidConfig("eta grid is empty".into()));
        }
        for (i, &eta) in self.eta_grid.iter().enumerate() {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "eta grid entries must be finite and > 0, got {eta}"
                )));
            }
            if self.eta_grid[..i].contains(&eta) {
                return Err(Error::InvalidConfig(format!("duplicate eta {eta} in grid")));
            }
        }
        if self.burn_in == 0 {
            return Err(Error::InvalidConfig("burn-in length must be >= 1".into()));
        }
        // Reuse the scalar checks on gamma.
        DetectorConfig::new(self.eta_grid[0], self.gamma, 0)?;
        Ok(())
    }
}

/// Mean over all `d²` entries of `(x Rᵀ)ᵀ(x Rᵀ)` for a single sample.
///
/// For one row the cross-product is the outer product `x̂ x̂ᵀ`, so the signed
/// sum of its entries equals `(Σ x̂)²` and the level is never negative.
pub fn correlation_level(sample: &[f64], r: &DMatrix<f64>) -> f64 {
    let d = sample.len();
    let mut total = 0.0;
    for row in r.row_iter() {
        total += row.iter().zip(sample).map(|(a, b)| a * b).sum::<f64>();
    }
    total * total / (d * d) as f64
}

/// Admit-then-argmax selection over mean correlation levels.
///
/// `None` marks a disqualified (diverged) candidate. Exact ties on the level
/// go to the larger learning rate.
pub fn select_index(mean_levels: &[Option<f64>], etas: &[f64]) -> Result<usize> {
    let min = mean_levels
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::SelectionFailure(
            "every candidate learning rate diverged".into(),
        ));
    }
    let threshold = ADMISSION_FACTOR * min;

    let mut best: Option<usize> = None;
    for (i, level) in mean_levels.iter().enumerate() {
        let Some(c) = *level else { continue };
        if c > threshold {
            continue;
        }
        best = match best {
            None => Some(i),
            Some(b) => {
                let cb = mean_levels[b].unwrap_or(f64::NEG_INFINITY);
                if c > cb || (c == cb && etas[i] > etas[b]) {
                    Some(i)
                } else {
                    Some(b)
                }
            }
        };
    }
    best.ok_or_else(|| {
        Error::SelectionFailure(format!(
            "no candidate satisfies level <= {ADMISSION_FACTOR} * {min}"
        ))
    })
}

#[derive(Debug, Clone)]
struct Candidate {
    eta: f64,
    r: DMatrix<f64>,
    frobenius: f64,
    level_sum: f64,
    levels: Vec<f64>,
    diverged: bool,
}

/// Outcome of the burn-in race.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub eta: f64,
    /// Mean correlation level per candidate; `None` for diverged ones.
    pub mean_levels: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    BurnIn,
    Operating,
    Failed,
}

#[derive(Debug, Clone)]
enum State {
    BurnIn(Vec<Candidate>),
    Operating(Box<Detector>),
    Failed,
}

/// Detector that picks its own learning rate from a burn-in prefix.
#[derive(Debug, Clone)]
pub struct AutoDetector {
    config: AutoTuneConfig,
    d: usize,
    t: usize,
    state: State,
    selection: Option<Selection>,
}

impl AutoDetector {
    pub fn new(config: AutoTuneConfig, d: usize) -> Result<Self> {
        config.validate()?;
        if d < 2 {
            return Err(Error::Dimension(format!(
                "detector needs at least 2 features, got {d}"
            )));
        }
        let norm = (d as f64).sqrt();
        let candidates = config
            .eta_grid
            .iter()
            .map(|&eta| Candidate {
                eta,
                r: DMatrix::identity(d, d),
                frobenius: norm,
                level_sum: 0.0,
                levels: Vec::with_capacity(config.burn_in),
                diverged: false,
            })
            .collect();
        Ok(Self {
            config,
            d,
            t: 0,
            state: State::BurnIn(candidates),
            selection: None,
        })
    }

    pub fn config(&self) -> &AutoTuneConfig {
        &self.config
    }

    pub fn phase(&self) -> Phase {
        match self.state {
            State::BurnIn(_) => Phase::BurnIn,
            State::Operating(_) => Phase::Operating,
            State::Failed => Phase::Failed,
        }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn selection(&self) -> Option<&Selection> {
        self.selection.as_ref()
    }

    /// The operating detector, once the burn-in has finished.
    pub fn detector(&self) -> Option<&Detector> {
        match &self.state {
            State::Operating(det) => Some(det),
            _ => None,
        }
    }

    /// Candidate matrices during the burn-in.
    pub fn candidate_matrices(&self) -> Vec<&DMatrix<f64>> {
        match &self.state {
            State::BurnIn(c) => c.iter().map(|c| &c.r).collect(),
            State::Operating(det) => vec![det.matrix()],
            State::Failed => Vec::new(),
        }
    }

    /// Per-candidate correlation levels recorded so far (empty after burn-in).
    pub fn correlation_levels(&self) -> Vec<&[f64]> {
        match &self.state {
            State::BurnIn(c) => c.iter().map(|c| c.levels.as_slice()).collect(),
            _ => Vec::new(),
        }
    }

    /// Current decorrelation matrix: the chosen one after burn-in.
    pub fn matrix(&self) -> Option<&DMatrix<f64>> {
        self.detector().map(Detector::matrix)
    }

    pub fn process(&mut self, sample: &[f64]) -> Result<f64> {
        if sample.len() != self.d {
            return Err(Error::ShapeMismatch {
                expected: self.d,
                actual: sample.len(),
            });
        }
        if let Some(column) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { column });
        }
        match &mut self.state {
            State::Failed => Err(Error::Poisoned),
            State::Operating(det) => {
                let score = det.process(sample)?;
                self.t += 1;
                Ok(score)
            }
            State::BurnIn(candidates) => {
                burn_in_step(candidates, sample, self.d);
                self.t += 1;
                if self.t == self.config.burn_in {
                    if let Err(e) = self.hand_off() {
                        self.state = State::Failed;
                        return Err(e);
                    }
                }
                Ok(0.0)
            }
        }
    }

    fn hand_off(&mut self) -> Result<()> {
        let State::BurnIn(candidates) = &mut self.state else {
            return Ok(());
        };
        let n = self.config.burn_in as f64;
        let mean_levels: Vec<Option<f64>> = candidates
            .iter()
            .map(|c| (!c.diverged).then(|| c.level_sum / n))
            .collect();
        let index = select_index(&mean_levels, &self.config.eta_grid)?;
        let chosen = std::mem::take(candidates).swap_remove(index);
        let config = DetectorConfig::new(chosen.eta, self.config.gamma, 0)?;
        let detector = Detector::resume(config, chosen.r, self.t as u64)?;
        self.selection = Some(Selection {
            index,
            eta: chosen.eta,
            mean_levels,
        });
        self.state = State::Operating(Box::new(detector));
        Ok(())
    }
}

fn burn_in_step(candidates: &mut [Candidate], sample: &[f64], d: usize) {
    let x = DMatrix::from_row_slice(1, d, sample);
    for c in candidates.iter_mut().filter(|c| !c.diverged) {
        let rate = c.eta / (d - 1) as f64;
        let step = detector::decorrelation_step(&c.r, c.frobenius, &x, rate);
        if !(step.r.iter().all(|v| v.is_finite()) && step.frobenius.is_finite()) {
            c.diverged = true;
            continue;
        }
        let level = correlation_level(sample, &step.r);
        if !level.is_finite() {
            c.diverged = true;
            continue;
        }
        c.r = step.r;
        c.frobenius = step.frobenius;
        c.level_sum += level;
        c.levels.push(level);
    }
}

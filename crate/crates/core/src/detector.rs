//! Streaming decorrelation detector.
//!
//! The detector keeps a single `d × d` decorrelation matrix `R`, initialised to
//! the identity. Every incoming sample (together with up to `window` previous
//! samples) is decorrelated as `x̂ = x Rᵀ`, and `R` is nudged so that the
//! off-diagonal part of `x̂ᵀx̂` shrinks:
//!
//! ```text
//! R ← R − η / ((p + 1)(d − 1)) · (x̂ᵀx̂ − diag(x̂ᵀx̂)) · R
//! ```
//!
//! The anomaly score is a momentum-smoothed absolute change of the Frobenius
//! norm of `R`:
//!
//! ```text
//! s_t = (1 − γ) · s_{t−1} + γ · | ‖R_t‖_F − ‖R_{t−1}‖_F |
//! ```
//!
//! Note that this is a difference of norms: an update that rotates `R`
//! without changing its norm produces a zero score.
//!
//! The state is `O(d² + p·d)` and never grows with the stream length.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default momentum factor.
pub const DEFAULT_GAMMA: f64 = 0.25;

/// Recommended learning-rate grid, largest first.
pub const RECOMMENDED_ETAS: [f64; 12] = [
    0.8, 0.2, 0.08, 0.02, 8e-3, 2e-3, 8e-4, 2e-4, 8e-5, 2e-5, 8e-6, 2e-6,
];

/// Recommended temporal window sizes.
pub const RECOMMENDED_WINDOWS: [usize; 2] = [0, 1];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Learning rate η.
    pub eta: f64,
    /// Momentum factor γ in (0, 1].
    pub gamma: f64,
    /// Number of past samples contributing to each update (p).
    pub window: usize,
}

impl DetectorConfig {
    pub fn new(eta: f64, gamma: f64, window: usize) -> Result<Self> {
        let config = Self { eta, gamma, window };
        config.validate()?;
        Ok(config)
    }

    /// `eta` with the default momentum and no temporal window.
    pub fn with_eta(eta: f64) -> Result<Self> {
        Self::new(eta, DEFAULT_GAMMA, 0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "eta must be finite and > 0, got {}",
                self.eta
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        Ok(())
    }
}

/// One update step of the decorrelation matrix.
///
/// `window` holds the `(p + 1) × d` rows used for the update. Returns the new
/// matrix and the change of the Frobenius norm.
pub(crate) struct Step {
    pub r: DMatrix<f64>,
    pub frobenius: f64,
    pub norm_change: f64,
}

/// `x̂ = window · rᵀ`.
pub(crate) fn decorrelate(r: &DMatrix<f64>, window: &DMatrix<f64>) -> DMatrix<f64> {
    window * r.transpose()
}

/// Off-diagonal part of `x̂ᵀx̂` for `x̂ = window · rᵀ`; its diagonal is exactly 0.
pub fn cross_correlation(r: &DMatrix<f64>, window: &DMatrix<f64>) -> DMatrix<f64> {
    let xhat = decorrelate(r, window);
    let mut cross = xhat.transpose() * &xhat;
    cross.fill_diagonal(0.0);
    cross
}

/// Applies `R ← R − rate · (C − diag C) · R` with `C = x̂ᵀx̂`.
///
/// `rate` already contains the `1 / ((p + 1)(d − 1))` normaliser.
pub(crate) fn decorrelation_step(
    r: &DMatrix<f64>,
    frobenius: f64,
    window: &DMatrix<f64>,
    rate: f64,
) -> Step {
    let cross = cross_correlation(r, window);
    let mut update = &cross * r;
    update *= rate;
    let next = r - &update;
    let next_frobenius = next.norm();

    // ‖R − U‖² − ‖R‖² = ‖U‖² − 2⟨R, U⟩, which avoids the cancellation of
    // subtracting two nearly equal norms when the update is tiny.
    let squared_change = update.norm_squared() - 2.0 * r.dot(&update);
    let denom = next_frobenius + frobenius;
    let norm_change = if denom > 0.0 {
        squared_change.abs() / denom
    } else {
        0.0
    };

    Step {
        r: next,
        frobenius: next_frobenius,
        norm_change,
    }
}

/// Fixed-capacity ring of the most recent samples, oldest first.
#[derive(Debug, Clone)]
struct SampleRing {
    data: Vec<f64>,
    dim: usize,
    capacity: usize,
    head: usize,
    len: usize,
}

impl SampleRing {
    fn new(capacity: usize, dim: usize) -> Self {
        Self {
            data: vec![0.0; capacity * dim],
            dim,
            capacity,
            head: 0,
            len: 0,
        }
    }

    fn push(&mut self, sample: &[f64]) {
        if self.capacity == 0 {
            return;
        }
        let slot = (self.head + self.len) % self.capacity;
        self.data[slot * self.dim..(slot + 1) * self.dim].copy_from_slice(sample);
        if self.len < self.capacity {
            self.len += 1;
        } else {
            self.head = (self.head + 1) % self.capacity;
        }
    }

    fn get(&self, i: usize) -> &[f64] {
        let slot = (self.head + i) % self.capacity;
        &self.data[slot * self.dim..(slot + 1) * self.dim]
    }

    fn iter(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.len).map(move |i| self.get(i))
    }

    fn clear(&mut self) {
        self.head = 0;
        self.len = 0;
    }

    fn heap_bytes(&self) -> usize {
        self.data.capacity() * std::mem::size_of::<f64>()
    }
}

/// Streaming detector state.
///
/// Operations on one detector must be serialized by the caller; the value is
/// `Send` and may be moved between threads between calls.
#[derive(Debug, Clone)]
pub struct Detector {
    config: DetectorConfig,
    d: usize,
    r: DMatrix<f64>,
    prev_frobenius: f64,
    frobenius: f64,
    norm_change: f64,
    score: f64,
    buffer: SampleRing,
    window: DMatrix<f64>,
    t: u64,
    poisoned: bool,
}

impl Detector {
    /// Creates a detector with `R = I_d` and a zero score.
    pub fn new(config: DetectorConfig, d: usize) -> Result<Self> {
        config.validate()?;
        if d < 2 {
            return Err(Error::Dimension(format!(
                "detector needs at least 2 features, got {d}"
            )));
        }
        let norm = (d as f64).sqrt();
        Ok(Self {
            config,
            d,
            r: DMatrix::identity(d, d),
            prev_frobenius: norm,
            frobenius: norm,
            norm_change: 0.0,
            score: 0.0,
            buffer: SampleRing::new(config.window, d),
            window: DMatrix::zeros(config.window + 1, d),
            t: 0,
            poisoned: false,
        })
    }

    /// Continues from an already learned matrix with `t` samples consumed and
    /// a zero score.
    pub fn resume(config: DetectorConfig, r: DMatrix<f64>, t: u64) -> Result<Self> {
        let mut detector = Self::new(config, r.nrows())?;
        if r.ncols() != r.nrows() {
            return Err(Error::Dimension("decorrelation matrix must be square".into()));
        }
        detector.frobenius = r.norm();
        detector.prev_frobenius = detector.frobenius;
        detector.r = r;
        detector.t = t;
        Ok(detector)
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Samples consumed so far.
    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn score(&self) -> f64 {
        self.score
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.r
    }

    /// ‖R_t‖_F
    pub fn frobenius(&self) -> f64 {
        self.frobenius
    }

    /// ‖R_{t−1}‖_F
    pub fn prev_frobenius(&self) -> f64 {
        self.prev_frobenius
    }

    pub fn is_poisoned(&self) -> bool {
        self.poisoned
    }

    /// Number of samples currently held in the window buffer.
    pub fn buffered(&self) -> usize {
        self.buffer.len
    }

    /// Buffered samples, oldest first.
    pub fn buffer(&self) -> impl Iterator<Item = &[f64]> {
        self.buffer.iter()
    }

    /// Returns the detector to its freshly initialised state.
    pub fn reset(&mut self) {
        let norm = (self.d as f64).sqrt();
        self.r = DMatrix::identity(self.d, self.d);
        self.prev_frobenius = norm;
        self.frobenius = norm;
        self.norm_change = 0.0;
        self.score = 0.0;
        self.buffer.clear();
        self.t = 0;
        self.poisoned = false;
    }

    /// Decorrelates every row of `window` with the current matrix.
    pub fn decorrelate_window(&self, window: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_columns(window.ncols())?;
        Ok(decorrelate(&self.r, window))
    }

    /// Applies one matrix update from `window` (rows `x_{t−p..t}`).
    ///
    /// On divergence the matrix is left untouched and the detector is
    /// poisoned.
    pub fn update_r(&mut self, window: &DMatrix<f64>) -> Result<()> {
        if self.poisoned {
            return Err(Error::Poisoned);
        }
        self.check_columns(window.ncols())?;
        let rows = window.nrows().max(1) as f64;
        let rate = self.config.eta / (rows * (self.d - 1) as f64);
        let step = decorrelation_step(&self.r, self.frobenius, window, rate);

        if !(step.r.iter().all(|v| v.is_finite())
            && step.frobenius.is_finite()
            && step.norm_change.is_finite())
        {
            self.poisoned = true;
            return Err(Error::Divergence {
                eta: self.config.eta,
                step: self.t,
            });
        }

        self.prev_frobenius = self.frobenius;
        self.frobenius = step.frobenius;
        self.norm_change = step.norm_change;
        self.r = step.r;
        Ok(())
    }

    /// Folds the latest norm change into the momentum score.
    pub fn update_score(&mut self) -> f64 {
        let gamma = self.config.gamma;
        self.score = (1.0 - gamma) * self.score + gamma * self.norm_change;
        self.score
    }

    /// Consumes one sample and returns its anomaly score.
    pub fn process(&mut self, sample: &[f64]) -> Result<f64> {
        if self.poisoned {
            return Err(Error::Poisoned);
        }
        self.check_columns(sample.len())?;
        if let Some(column) = sample.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { column });
        }

        self.t += 1;
        let p = self.config.window;
        if self.t <= p as u64 {
            self.buffer.push(sample);
            return Ok(0.0);
        }

        for (i, past) in self.buffer.iter().enumerate() {
            for (j, &v) in past.iter().enumerate() {
                self.window[(i, j)] = v;
            }
        }
        for (j, &v) in sample.iter().enumerate() {
            self.window[(p, j)] = v;
        }

        // `update_r` borrows `self` mutably, so move the scratch window out.
        let window = std::mem::replace(&mut self.window, DMatrix::zeros(0, 0));
        let result = self.update_r(&window);
        self.window = window;
        result?;

        let score = self.update_score();
        self.buffer.push(sample);
        Ok(score)
    }

    /// Euclidean norm of each column of `R`.
    pub fn column_norms(&self) -> Vec<f64> {
        self.r.column_iter().map(|c| c.norm()).collect()
    }

    /// Heap plus inline bytes owned by the detector.
    pub fn memory_footprint(&self) -> usize {
        std::mem::size_of::<Self>()
            + self.r.len() * std::mem::size_of::<f64>()
            + self.window.len() * std::mem::size_of::<f64>()
            + self.buffer.heap_bytes()
    }

    fn check_columns(&self, actual: usize) -> Result<()> {
        if actual != self.d {
            return Err(Error::ShapeMismatch {
                expected: self.d,
                actual,
            });
        }
        Ok(())
    }
}

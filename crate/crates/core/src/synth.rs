//! Synthetic benchmark streams.
//!
//! Every generator is driven by [`ChaCha20Rng`] seeded through
//! `SeedableRng::seed_from_u64`, and standard normals come from
//! `rand_distr::StandardNormal` (ziggurat). Both are portable, so a seed
//! reproduces the same stream on every platform.
//!
//! A scenario is a background stream from one generator with a contiguous
//! window of rows replaced by samples from an alternate generator. The
//! replaced rows are labeled `1`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};

/// Diagonal jitter applied when a PSD covariance is singular.
pub const CHOLESKY_JITTER: f64 = 1e-10;

/// Default block size for sliding covariance diagnostics.
pub const DEFAULT_COV_WINDOW: usize = 20;

pub fn seeded_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Gaussian sampler `N(mean, L Lᵀ)`.
#[derive(Debug, Clone)]
pub struct MultivariateNormal {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl MultivariateNormal {
    pub fn new(mean: DVector<f64>, covariance: &DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if covariance.shape() != (d, d) {
            return Err(Error::Dimension(format!(
                "covariance is {:?}, mean has {d} entries",
                covariance.shape()
            )));
        }
        let factor = match covariance.clone().cholesky() {
            Some(c) => c.l(),
            None => {
                let jittered = covariance + DMatrix::identity(d, d) * CHOLESKY_JITTER;
                jittered.cholesky().ok_or(Error::NotPositiveDefinite)?.l()
            }
        };
        Ok(Self { mean, factor })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Draws `m` samples as the rows of an `m × d` matrix.
    pub fn sample<R: Rng>(&self, rng: &mut R, m: usize) -> DMatrix<f64> {
        let d = self.dim();
        let mut out = DMatrix::zeros(m, d);
        let mut z = DVector::zeros(d);
        for i in 0..m {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let x = &self.factor * &z + &self.mean;
            out.set_row(i, &x.transpose());
        }
        out
    }
}

fn standard_normal_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // Filled row by row so the draw order is independent of storage layout.
    let mut a = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            a[(i, j)] = rng.sample(StandardNormal);
        }
    }
    a
}

/// `Σ = A Aᵀ` with i.i.d. standard-normal `A`, drawn from `rng`.
pub fn draw_random_covariance<R: Rng>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let a = standard_normal_matrix(rng, d, d);
    &a * a.transpose()
}

/// The covariance [`gen_random_cov`] uses for `(d, seed)`.
pub fn random_covariance(d: usize, seed: u64) -> DMatrix<f64> {
    draw_random_covariance(&mut seeded_rng(seed), d)
}

/// `(1 − s) I + s 11ᵀ`.
pub fn correlation_strength_covariance(d: usize, s: f64) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { s })
}

fn check_dims(d: usize, m: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Dimension(format!("need d >= 2, got {d}")));
    }
    if m == 0 {
        return Err(Error::Dimension("need m >= 1 samples".into()));
    }
    Ok(())
}

fn check_strength(s: f64) -> Result<()> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::InvalidConfig(format!(
            "correlation strength must lie in [0, 1), got {s}"
        )));
    }
    Ok(())
}

/// Zero-mean Gaussian data with a random covariance `A Aᵀ`.
pub fn gen_random_cov(d: usize, m: usize, seed: u64) -> Result<DMatrix<f64>> {
    check_dims(d, m)?;
    let mut rng = seeded_rng(seed);
    let sigma = draw_random_covariance(&mut rng, d);
    let mvn = MultivariateNormal::new(DVector::zeros(d), &sigma)?;
    Ok(mvn.sample(&mut rng, m))
}

/// Equicorrelated Gaussian data, standardized per feature.
pub fn gen_corr_strength(d: usize, m: usize, s: f64, seed: u64) -> Result<DMatrix<f64>> {
    check_dims(d, m)?;
    check_strength(s)?;
    let mut rng = seeded_rng(seed);
    let sigma = correlation_strength_covariance(d, s);
    let mvn = MultivariateNormal::new(DVector::zeros(d), &sigma)?;
    let mut data = mvn.sample(&mut rng, m);
    standardize_columns(&mut data)?;
    Ok(data)
}

/// Gaussian data with covariance `random_covariance(d, cov_seed)` around
/// `shift`; samples are drawn from `sample_seed`.
pub fn gen_mean_shift(
    d: usize,
    m: usize,
    cov_seed: u64,
    sample_seed: u64,
    shift: &[f64],
) -> Result<DMatrix<f64>> {
    check_dims(d, m)?;
    if shift.len() != d {
        return Err(Error::ShapeMismatch {
            expected: d,
            actual: shift.len(),
        });
    }
    let sigma = random_covariance(d, cov_seed);
    let mvn = MultivariateNormal::new(DVector::from_column_slice(shift), &sigma)?;
    Ok(mvn.sample(&mut seeded_rng(sample_seed), m))
}

/// Subtracts the column mean and divides by the sample (n − 1) standard
/// deviation.
pub fn standardize_columns(data: &mut DMatrix<f64>) -> Result<()> {
    let m = data.nrows();
    for (j, mut col) in data.column_iter_mut().enumerate() {
        let mean = col.sum() / m as f64;
        let var = if m > 1 {
            col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64
        } else {
            0.0
        };
        let sd = var.sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateFeature { feature: j });
        }
        for v in col.iter_mut() {
            *v = (*v - mean) / sd;
        }
    }
    Ok(())
}

/// Sample-generating recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    RandomCovariance { seed: u64 },
    CorrelationStrength { seed: u64, strength: f64 },
    MeanShift { cov_seed: u64, sample_seed: u64, shift: Vec<f64> },
}

impl Generator {
    pub fn generate(&self, d: usize, m: usize) -> Result<DMatrix<f64>> {
        match self {
            Generator::RandomCovariance { seed } => gen_random_cov(d, m, *seed),
            Generator::CorrelationStrength { seed, strength } => {
                gen_corr_strength(d, m, *strength, *seed)
            }
            Generator::MeanShift {
                cov_seed,
                sample_seed,
                shift,
            } => gen_mean_shift(d, m, *cov_seed, *sample_seed, shift),
        }
    }

    /// Population covariance of the generated distribution.
    pub fn covariance(&self, d: usize) -> DMatrix<f64> {
        match self {
            Generator::RandomCovariance { seed } => random_covariance(d, *seed),
            Generator::CorrelationStrength { strength, .. } => {
                correlation_strength_covariance(d, *strength)
            }
            Generator::MeanShift { cov_seed, .. } => random_covariance(d, *cov_seed),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        match self {
            Generator::CorrelationStrength { strength, .. } => check_strength(*strength),
            Generator::MeanShift { shift, .. } if shift.len() != d => Err(Error::ShapeMismatch {
                expected: d,
                actual: shift.len(),
            }),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalyWindow {
    pub start: usize,
    pub length: usize,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub d: usize,
    pub m: usize,
    pub background: Generator,
    pub anomaly: AnomalyWindow,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        check_dims(self.d, self.m)?;
        let end = self.anomaly.start.saturating_add(self.anomaly.length);
        if self.anomaly.length == 0 || end > self.m || self.anomaly.length >= self.m {
            return Err(Error::WindowBounds {
                start: self.anomaly.start,
                end,
                rows: self.m,
            });
        }
        self.background.validate(self.d)?;
        self.anomaly.generator.validate(self.d)
    }

    pub fn window(&self) -> std::ops::Range<usize> {
        self.anomaly.start..self.anomaly.start + self.anomaly.length
    }
}

pub fn build_scenario(spec: &ScenarioSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut data = spec.background.generate(spec.d, spec.m)?;
    let block = spec.anomaly.generator.generate(spec.d, spec.anomaly.length)?;
    let mut labels = vec![0u8; spec.m];
    for (k, i) in spec.window().enumerate() {
        data.set_row(i, &block.row(k));
        labels[i] = 1;
    }
    LabeledDataset::from_matrix(spec.name.clone(), &data, labels)
}

/// Shape of the scenario suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub master_seed: u64,
    /// Samples per scenario.
    pub m: usize,
    /// Low-dimensional (d = 2) scenarios, one of which is the mean shift.
    pub low_dim: usize,
    /// High-dimensional (d = 8) scenarios.
    pub high_dim: usize,
    /// Minimum |s_background − s_anomaly| for correlation-strength scenarios.
    pub min_strength_gap: f64,
    /// Mean shift in background standard deviations.
    pub mean_shift_sigmas: f64,
}

impl SuiteConfig {
    pub fn new(master_seed: u64, m: usize) -> Self {
        Self {
            master_seed,
            m,
            low_dim: 12,
            high_dim: 8,
            min_strength_gap: 0.4,
            mean_shift_sigmas: 3.0,
        }
    }
}

pub const LOW_DIM: usize = 2;
pub const HIGH_DIM: usize = 8;
pub const WINDOW_LENGTHS: [usize; 2] = [100, 1000];
const MEAN_SHIFT_SLOT: usize = 11;

/// Builds the suite of scenario specs.
///
/// Scenario `k` (0-based, low-dimensional first) draws all of its parameters
/// from a `ChaCha20Rng` keyed by the master seed on stream `k`, so scenarios
/// do not depend on each other or on generation order. The low-dimensional
/// scenario named `L11` is the pure mean shift.
pub fn scenario_suite(config: &SuiteConfig) -> Result<Vec<ScenarioSpec>> {
    let m = config.m;
    if m < 2 * WINDOW_LENGTHS[1] {
        return Err(Error::InvalidConfig(format!(
            "suite needs m >= {}, got {m}",
            2 * WINDOW_LENGTHS[1]
        )));
    }
    if !(0.0..0.95).contains(&config.min_strength_gap) {
        return Err(Error::InvalidConfig("min_strength_gap must lie in [0, 0.95)".into()));
    }
    let total = config.low_dim + config.high_dim;
    (0..total)
        .map(|k| {
            let (d, name, mean_shift) = if k < config.low_dim {
                let idx = k + 1;
                (LOW_DIM, format!("L{idx}"), idx == MEAN_SHIFT_SLOT)
            } else {
                (HIGH_DIM, format!("H{}", k - config.low_dim + 1), false)
            };
            let mut rng = seeded_rng(config.master_seed);
            rng.set_stream(k as u64);
            let spec = draw_scenario(&mut rng, config, name, d, mean_shift);
            spec.validate()?;
            Ok(spec)
        })
        .collect()
}

fn draw_scenario(
    rng: &mut ChaCha20Rng,
    config: &SuiteConfig,
    name: String,
    d: usize,
    mean_shift: bool,
) -> ScenarioSpec {
    let m = config.m;
    let length = WINDOW_LENGTHS[rng.random_range(0..WINDOW_LENGTHS.len())];
    let start = rng.random_range(m / 10..=m - length);
    let seed_a = u64::from(rng.random::<u32>());
    let mut seed_b = u64::from(rng.random::<u32>());
    while seed_b == seed_a {
        seed_b = u64::from(rng.random::<u32>());
    }

    let (background, anomaly) = if mean_shift {
        let sigma = random_covariance(d, seed_a);
        let shift = (0..d)
            .map(|j| config.mean_shift_sigmas * sigma[(j, j)].sqrt())
            .collect();
        (
            Generator::RandomCovariance { seed: seed_a },
            Generator::MeanShift {
                cov_seed: seed_a,
                sample_seed: seed_b,
                shift,
            },
        )
    } else if rng.random_bool(0.5) {
        (
            Generator::RandomCovariance { seed: seed_a },
            Generator::RandomCovariance { seed: seed_b },
        )
    } else {
        let (s_bg, s_an) = loop {
            let a: f64 = rng.random_range(0.0..0.95);
            let b: f64 = rng.random_range(0.0..0.95);
            if (a - b).abs() >= config.min_strength_gap {
                break (a, b);
            }
        };
        (
            Generator::CorrelationStrength {
                seed: seed_a,
                strength: s_bg,
            },
            Generator::CorrelationStrength {
                seed: seed_a,
                strength: s_an,
            },
        )
    };

    ScenarioSpec {
        name,
        d,
        m,
        background,
        anomaly: AnomalyWindow {
            start,
            length,
            generator: anomaly,
        },
    }
}

/// Non-overlapping block second moments `XᵀX / (w_c − 1)` (zero-mean
/// assumption). Trailing rows that do not fill a block are dropped.
pub fn sliding_cov(data: &DMatrix<f64>, w_c: usize) -> Result<Vec<DMatrix<f64>>> {
    if w_c < 2 {
        return Err(Error::InvalidConfig(format!("block size must be >= 2, got {w_c}")));
    }
    let blocks = data.nrows() / w_c;
    Ok((0..blocks)
        .map(|b| {
            let x = data.rows(b * w_c, w_c);
            (x.transpose() * x) / (w_c - 1) as f64
        })
        .collect())
}

/// Mean over all `d²` entries of the correlation matrix implied by `cov`.
pub fn mean_correlation(cov: &DMatrix<f64>) -> Result<f64> {
    let d = cov.nrows();
    if let Some(index) = (0..d).find(|&i| !(cov[(i, i)] > 0.0)) {
        return Err(Error::ZeroVariance { index });
    }
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            total += cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
        }
    }
    Ok(total / (d * d) as f64)
}

/// Mean of the off-diagonal entries of the empirical correlation matrix.
pub fn mean_offdiag_correlation(data: &DMatrix<f64>) -> f64 {
    let cov = empirical_covariance(data);
    let d = cov.nrows();
    let mut total = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                total += cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt();
            }
        }
    }
    total / (d * (d - 1)) as f64
}

/// Mean-centred sample covariance with the `n − 1` denominator.
pub fn empirical_covariance(data: &DMatrix<f64>) -> DMatrix<f64> {
    let m = data.nrows();
    let mean = data.row_mean();
    let mut centred = data.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    (centred.transpose() * &centred) / (m.max(2) - 1) as f64
}

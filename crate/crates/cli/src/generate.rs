use std::path::Path;

use anyhow::Result;
use decorr::synth::{
    build_scenario, mean_correlation, random_covariance, scenario_suite, sliding_cov,
    AnomalyWindow, Generator, ScenarioSpec, SuiteConfig,
};
use decorr::{Error, LabeledDataset};
use serde_json::json;

use crate::args::{Command, GenerateArgs, ScenarioKind};
use crate::output::{create_dir, output_dir, write_atomic, write_json, Run};

pub fn run(mut args: GenerateArgs) -> Result<()> {
    let dir = output_dir(args.output.as_deref())?;
    args.output = Some(dir.clone());
    let specs = if args.suite {
        scenario_suite(&SuiteConfig::new(args.seed, args.m))?
    } else {
        vec![single_spec(&args)?]
    };
    create_dir(&dir)?;

    let mut run = Run::new(Command::Generate(args.clone()));
    let mut summary = Vec::with_capacity(specs.len());
    for spec in &specs {
        let ds = build_scenario(spec)?;
        let csv_path = dir.join(format!("{}.csv", spec.name));
        write_atomic(&csv_path, |w| Ok(ds.write_csv(w)?))?;
        let spec_path = dir.join(format!("{}.json", spec.name));
        write_json(&spec_path, spec)?;
        run.output(csv_path);
        run.output(spec_path);
        if args.cov_diag {
            for path in write_cov_diag(&dir, &ds, args.wc)? {
                run.output(path);
            }
        }
        log::info!("generated {} ({} x {})", spec.name, spec.m, spec.d);
        summary.push(json!({
            "name": spec.name,
            "d": spec.d,
            "m": spec.m,
            "anomaly_start": spec.anomaly.start,
            "anomaly_length": spec.anomaly.length,
        }));
    }
    run.finish(&dir.join("manifest.json"), json!({ "scenarios": summary }))
}

fn single_spec(args: &GenerateArgs) -> Result<ScenarioSpec> {
    let Some(kind) = args.kind else {
        return Err(Error::InvalidConfig("pass --suite or --kind".into()).into());
    };
    let anomaly_seed = args.anomaly_seed.unwrap_or(args.seed.wrapping_add(1));
    let (background, anomaly) = match kind {
        ScenarioKind::RandomCov => (
            Generator::RandomCovariance { seed: args.seed },
            Generator::RandomCovariance { seed: anomaly_seed },
        ),
        ScenarioKind::Corr => {
            let anomaly_s = args
                .anomaly_s
                .unwrap_or(if args.s < 0.5 { 0.9 } else { 0.05 });
            (
                Generator::CorrelationStrength {
                    seed: args.seed,
                    strength: args.s,
                },
                Generator::CorrelationStrength {
                    seed: anomaly_seed,
                    strength: anomaly_s,
                },
            )
        }
        ScenarioKind::MeanShift => {
            if args.d == 0 {
                return Err(Error::Dimension("d must be >= 1".into()).into());
            }
            let sigma = random_covariance(args.d, args.seed);
            let shift = (0..args.d)
                .map(|j| args.shift_sigmas * sigma[(j, j)].sqrt())
                .collect();
            (
                Generator::RandomCovariance { seed: args.seed },
                Generator::MeanShift {
                    cov_seed: args.seed,
                    sample_seed: anomaly_seed,
                    shift,
                },
            )
        }
    };
    let spec = ScenarioSpec {
        name: args.name.clone(),
        d: args.d,
        m: args.m,
        background,
        anomaly: AnomalyWindow {
            start: args.start.unwrap_or(args.m / 2),
            length: args.length,
            generator: anomaly,
        },
    };
    spec.validate().map_err(invalid_flags)?;
    Ok(spec)
}

/// Bad window bounds or dimensions from flags are flag errors.
fn invalid_flags(e: Error) -> Error {
    match e {
        Error::WindowBounds { .. } | Error::Dimension(_) | Error::ShapeMismatch { .. } => {
            Error::InvalidConfig(e.to_string())
        }
        other => other,
    }
}

/// Writes `<name>_sliding_cov.csv` (one row per block and matrix entry) and
/// `<name>_mean_corr.csv` (one row per block).
fn write_cov_diag(dir: &Path, ds: &LabeledDataset, wc: usize) -> Result<Vec<std::path::PathBuf>> {
    let blocks = sliding_cov(&ds.to_matrix(), wc)?;
    let cov_path = dir.join(format!("{}_sliding_cov.csv", ds.name));
    write_atomic(&cov_path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["block", "start", "i", "j", "cov"])?;
        for (b, cov) in blocks.iter().enumerate() {
            for i in 0..cov.nrows() {
                for j in 0..cov.ncols() {
                    out.write_record([
                        b.to_string(),
                        (b * wc).to_string(),
                        i.to_string(),
                        j.to_string(),
                        cov[(i, j)].to_string(),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    })?;

    let corr_path = dir.join(format!("{}_mean_corr.csv", ds.name));
    write_atomic(&corr_path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["block", "start", "mean_corr", "anomalies"])?;
        for (b, cov) in blocks.iter().enumerate() {
            // A block with a zero-variance feature has no defined correlation.
            let corr = mean_correlation(cov).map(|c| c.to_string()).unwrap_or_default();
            let anomalies = ds.labels()[b * wc..(b + 1) * wc]
                .iter()
                .filter(|&&l| l == 1)
                .count();
            out.write_record([b.to_string(), (b * wc).to_string(), corr, anomalies.to_string()])?;
        }
        out.flush()?;
        Ok(())
    })?;
    Ok(vec![cov_path, corr_path])
}

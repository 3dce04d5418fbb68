use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use anyhow::{Context, Result};
use decorr::dataset::CsvRows;
use decorr::{AutoDetector, AutoTuneConfig, Detector, DetectorConfig, Error};
use serde_json::json;

use crate::args::{Command, ScoreArgs};
use crate::output::{absolute, output_dir, write_atomic, Run};

/// Fixed-rate or self-tuning detector behind one interface.
enum Stream {
    Fixed(Detector),
    Auto(AutoDetector),
}

impl Stream {
    fn process(&mut self, sample: &[f64]) -> decorr::Result<f64> {
        match self {
            Stream::Fixed(d) => d.process(sample),
            Stream::Auto(a) => a.process(sample),
        }
    }

    /// The active detector; `None` while the burn-in is still racing.
    fn detector(&self) -> Option<&Detector> {
        match self {
            Stream::Fixed(d) => Some(d),
            Stream::Auto(a) => a.detector(),
        }
    }

    fn selected_eta(&self) -> Option<f64> {
        match self {
            Stream::Fixed(d) => Some(d.config().eta),
            Stream::Auto(a) => a.selection().map(|s| s.eta),
        }
    }
}

pub fn run(mut args: ScoreArgs) -> Result<()> {
    args.input = absolute(&args.input)?;
    let output = match &args.output {
        Some(p) => absolute(p)?,
        None => {
            let stem = args
                .input
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "input".into());
            output_dir(None)?.join(format!("{stem}_scores.csv"))
        }
    };
    args.output = Some(output.clone());

    let file = File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let rows = CsvRows::new(BufReader::new(file))?;
    let d = rows.feature_names().len();
    let feature_names = rows.feature_names().to_vec();

    let mut stream = if args.auto {
        if args.window != 0 {
            return Err(Error::InvalidConfig("--window applies to a fixed learning rate only".into()).into());
        }
        let config = AutoTuneConfig {
            eta_grid: args.grid.clone(),
            burn_in: args.burn_in,
            gamma: args.gamma,
        };
        Stream::Auto(AutoDetector::new(config, d)?)
    } else {
        let eta = args
            .eta
            .ok_or_else(|| Error::InvalidConfig("pass --eta or --auto".into()))?;
        Stream::Fixed(Detector::new(DetectorConfig::new(eta, args.gamma, args.window)?, d)?)
    };

    let mut run = Run::new(Command::Score(args.clone()));
    run.input(args.input.clone());

    let mut count = 0usize;
    let mut max_score = 0.0f64;
    write_atomic(&output, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["index".to_string(), "score".to_string()];
        if args.diagnostics {
            header.push("frobenius".into());
            header.extend(feature_names.iter().map(|n| format!("col_norm_{n}")));
        }
        out.write_record(&header)?;

        let mut record: Vec<String> = Vec::with_capacity(header.len());
        for row in rows {
            let row = row?;
            let score = stream
                .process(&row.values)
                .with_context(|| format!("scoring row {}", row.index))?;
            record.clear();
            record.push(row.index.to_string());
            record.push(score.to_string());
            if args.diagnostics {
                match stream.detector() {
                    Some(det) => {
                        record.push(det.frobenius().to_string());
                        record.extend(det.column_norms().iter().map(f64::to_string));
                    }
                    None => record.extend(std::iter::repeat_n(String::new(), d + 1)),
                }
            }
            out.write_record(&record)?;
            count += 1;
            max_score = max_score.max(score);
        }
        out.flush()?;
        Ok(())
    })?;
    log::info!("scored {count} rows into {}", output.display());

    run.output(output.clone());
    let results = json!({
        "rows": count,
        "eta": stream.selected_eta(),
        "max_score": max_score,
    });
    run.finish(&manifest_path(&output), results)
}

pub fn manifest_path(output: &std::path::Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

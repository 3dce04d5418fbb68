use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use decorr::dataset::{read_scores, CsvRows};
use decorr::detector::RECOMMENDED_ETAS;
use decorr::eval::{run_benchmark, write_curve_csv, BenchOptions, ExternalScores, MethodKind, MethodSpec};
use decorr::tuning::config_grid;
use decorr::{AutoTuneConfig, DetectorConfig, Error, LabeledDataset};
use serde_json::json;

use crate::args::{BenchArgs, Command};
use crate::output::{absolute, create_dir, output_dir, write_atomic, write_json, Run};
use crate::tune::subset_config;

pub fn run(mut args: BenchArgs) -> Result<()> {
    args.dataset_dir = absolute(&args.dataset_dir)?;
    if let Some(ext) = &args.external_scores {
        args.external_scores = Some(absolute(ext)?);
    }
    let dir = output_dir(args.output.as_deref())?;
    args.output = Some(dir.clone());
    if args.repeats == 0 {
        return Err(Error::InvalidConfig("--repeats must be >= 1".into()).into());
    }
    if args.jobs == Some(0) {
        return Err(Error::InvalidConfig("--jobs must be >= 1".into()).into());
    }

    let methods = methods(&args)?;
    let mut run = Run::new(Command::Bench(args.clone()));
    let (datasets, skipped) = load_datasets(&args.dataset_dir, &mut run)?;
    let external = match &args.external_scores {
        Some(ext) => load_external(ext, &datasets, &mut run)?,
        None => Vec::new(),
    };

    let options = BenchOptions {
        repeats: args.repeats,
        timed: true,
    };
    let outcome = match args.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .context("building worker pool")?
            .install(|| run_benchmark(&datasets, &methods, &external, &options)),
        None => run_benchmark(&datasets, &methods, &external, &options),
    };
    for row in &outcome.report.rows {
        if let Some(err) = &row.error {
            log::warn!("{} / {}: {err}", row.dataset, row.method);
        }
    }

    create_dir(&dir)?;
    let csv_path = dir.join("report.csv");
    write_atomic(&csv_path, |w| Ok(outcome.report.write_csv(w)?))?;
    run.output(csv_path);
    let json_path = dir.join("report.json");
    write_json(&json_path, &outcome.report)?;
    run.output(json_path);
    for curve in &outcome.curves {
        let path = dir
            .join("curves")
            .join(&curve.dataset)
            .join(format!("{}.csv", curve.method));
        write_atomic(&path, |w| Ok(write_curve_csv(w, &curve.roc)?))?;
        run.output(path);
    }

    let mut by_method: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in &outcome.report.rows {
        if let Some(auc) = row.auc {
            by_method.entry(&row.method).or_default().push(auc);
        }
    }
    let mean_auc: BTreeMap<&str, f64> = by_method
        .iter()
        .map(|(m, v)| (*m, v.iter().sum::<f64>() / v.len() as f64))
        .collect();
    for (method, auc) in &mean_auc {
        log::info!("{method}: mean AUC {auc:.4}");
    }
    let failed = outcome.report.rows.iter().filter(|r| r.error.is_some()).count();
    let results = json!({
        "datasets": datasets.len(),
        "skipped": skipped,
        "rows": outcome.report.rows.len(),
        "failed_cells": failed,
        "mean_auc": mean_auc,
    });
    run.finish(&dir.join("manifest.json"), results)
}

fn methods(args: &BenchArgs) -> Result<Vec<MethodSpec>> {
    let etas = match &args.grid {
        Some(g) if !g.is_empty() => g.clone(),
        _ => RECOMMENDED_ETAS.to_vec(),
    };
    let grid = config_grid(&etas, &args.windows, args.gamma)?;
    let mut methods = Vec::new();
    let explicit = args.tuned || args.auto || !args.eta.is_empty();
    if args.grid.is_some() || !explicit {
        methods.push(MethodSpec {
            name: "peak".into(),
            kind: MethodKind::Peak { grid: grid.clone() },
        });
    }
    if args.tuned {
        methods.push(MethodSpec {
            name: "tuned".into(),
            kind: MethodKind::Tuned {
                grid: grid.clone(),
                subset: subset_config(&args.subset),
            },
        });
    }
    for &eta in &args.eta {
        methods.push(MethodSpec {
            name: format!("eta={eta}"),
            kind: MethodKind::Fixed {
                config: DetectorConfig::new(eta, args.gamma, args.window)?,
            },
        });
    }
    if args.auto {
        let config = AutoTuneConfig {
            eta_grid: etas,
            burn_in: args.burn_in,
            gamma: args.gamma,
        };
        config.validate()?;
        methods.push(MethodSpec {
            name: "auto".into(),
            kind: MethodKind::Auto { config },
        });
    }
    Ok(methods)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut entries = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()
        .with_context(|| format!("listing {}", dir.display()))?;
    entries.sort();
    Ok(entries)
}

/// Loads every labeled `*.csv` in `dir`. Unlabeled CSVs (such as score or
/// diagnostic files) and unreadable datasets are logged and skipped.
fn load_datasets(dir: &Path, run: &mut Run) -> Result<(Vec<LabeledDataset>, Vec<String>)> {
    let mut datasets = Vec::new();
    let mut skipped = Vec::new();
    for path in sorted_entries(dir)? {
        if !path.is_file() || path.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let labeled = File::open(&path)
            .map_err(Error::from)
            .and_then(|f| CsvRows::new(BufReader::new(f)))
            .map(|rows| rows.has_labels());
        let loaded = match labeled {
            Ok(true) => LabeledDataset::read_csv(&path),
            Ok(false) => {
                log::warn!("skipping {}: no label column", path.display());
                skipped.push(path.display().to_string());
                continue;
            }
            Err(e) => Err(e),
        };
        match loaded {
            Ok(ds) => {
                run.input(path);
                datasets.push(ds);
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped.push(path.display().to_string());
            }
        }
    }
    if datasets.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no labeled datasets in {}",
            dir.display()
        ))
        .into());
    }
    Ok((datasets, skipped))
}

/// Reads `<dir>/<method>/<dataset>.csv` for every loaded dataset.
fn load_external(
    dir: &Path,
    datasets: &[LabeledDataset],
    run: &mut Run,
) -> Result<Vec<ExternalScores>> {
    let mut external = Vec::new();
    for method_dir in sorted_entries(dir)? {
        if !method_dir.is_dir() {
            continue;
        }
        let method = method_dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        for ds in datasets {
            let path = method_dir.join(format!("{}.csv", ds.name));
            if !path.is_file() {
                log::warn!("external method {method} has no scores for {}", ds.name);
                continue;
            }
            let scores = File::open(&path)
                .map_err(Error::from)
                .and_then(|f| read_scores(BufReader::new(f), ds.n_rows()));
            match scores {
                Ok(scores) => {
                    run.input(path);
                    external.push(ExternalScores {
                        method: method.clone(),
                        dataset: ds.name.clone(),
                        scores,
                    });
                }
                Err(e) => log::warn!("skipping {}: {e}", path.display()),
            }
        }
    }
    Ok(external)
}

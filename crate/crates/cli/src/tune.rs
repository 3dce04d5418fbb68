use anyhow::Result;
use decorr::tuning::{config_grid, tune, SubsetConfig};
use decorr::LabeledDataset;
use serde_json::json;

use crate::args::{Command, SubsetArgs, TuneArgs};
use crate::output::{absolute, create_dir, output_dir, write_atomic, write_json, Run};

pub fn subset_config(args: &SubsetArgs) -> SubsetConfig {
    SubsetConfig {
        ratios: args.ratios.clone(),
        bins: args.bins,
        seed: args.seed,
    }
}

pub fn run(mut args: TuneArgs) -> Result<()> {
    args.input = absolute(&args.input)?;
    let dir = output_dir(args.output.as_deref())?;
    args.output = Some(dir.clone());

    let grid = config_grid(&args.grid.grid, &args.grid.windows, args.grid.gamma)?;
    let dataset = LabeledDataset::read_csv(&args.input)?;
    let (selection, result) = tune(&dataset, &subset_config(&args.subset), &grid)?;
    log::info!(
        "subset ratio {} ({} rows), best eta {} window {} (AUC {})",
        selection.ratio,
        selection.indices.len(),
        result.best.eta,
        result.best.window,
        result.subset_auc
    );

    create_dir(&dir)?;
    let mut run = Run::new(Command::Tune(args.clone()));
    run.input(args.input.clone());

    let report = json!({
        "ratio": selection.ratio,
        "contamination": selection.contamination,
        "candidates": selection.candidates,
        "best": result.best,
        "subset_auc": result.subset_auc,
        "grid_results": result.grid_results,
    });
    let tune_path = dir.join("tune.json");
    write_json(&tune_path, &report)?;
    run.output(tune_path);

    let indices_path = dir.join("subset_indices.csv");
    write_atomic(&indices_path, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["index"])?;
        for i in &selection.indices {
            out.write_record([i.to_string()])?;
        }
        out.flush()?;
        Ok(())
    })?;
    run.output(indices_path);

    let results = json!({
        "ratio": selection.ratio,
        "best": result.best,
        "subset_auc": result.subset_auc,
    });
    run.finish(&dir.join("manifest.json"), results)
}

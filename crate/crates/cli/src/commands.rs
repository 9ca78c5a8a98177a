//! One function per subcommand. Each resolves its config, runs the
//! corresponding library operation, writes the artifacts into `--out` and
//! finishes with a run manifest.

use std::fs::{self, File};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rallycast_core::ingest::{
    generate_synthetic, parse_dataset, write_dataset, CsvSchema, Feature, Rally, SynthConfig,
};
use rallycast_core::metric::{evaluate_dataset, generate_candidates, write_predictions_csv};
use rallycast_core::model::{prepare_dataset, Checkpoint, PreparedRally, VocabSizes, PREFIX_LEN};
use rallycast_core::stats::association_matrix;
use rallycast_core::train::{
    cross_validate, loss_selection, train, write_curve_csv, write_grid_csv, SelectionReport,
};
use serde::Serialize;

use crate::args::{CorrArgs, FitArgs, ScoreArgs, SelectArgs, SynthArgs};
use crate::config::{FileConfig, Overrides, ResolvedConfig};
use crate::manifest::ManifestBuilder;

pub const DATA_FILE: &str = "rallies.csv";
pub const MATRIX_FILE: &str = "association_matrix.csv";
pub const CHECKPOINT_FILE: &str = "checkpoint.json";
pub const CURVE_FILE: &str = "loss_curve.csv";
pub const CV_REPORT_FILE: &str = "cv_report.json";
pub const GRID_FILE: &str = "grid_results.csv";
pub const SELECTION_FILE: &str = "selection_report.json";
pub const PREDICTIONS_FILE: &str = "predictions.csv";
pub const METRIC_FILE: &str = "metric_report.json";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Resolves the config layers and starts the manifest for one run.
fn start(
    subcommand: &str,
    config_path: Option<&Path>,
    flags: Overrides,
    out: &Path,
) -> Result<(ResolvedConfig, ManifestBuilder)> {
    let file = config_path.map(FileConfig::load).transpose()?;
    let resolved = ResolvedConfig::resolve(file, flags)?;
    fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    let mut manifest = ManifestBuilder::new(subcommand, &resolved);
    if let Some(path) = config_path {
        manifest.input(path)?;
    }
    Ok((resolved, manifest))
}

fn load_rallies(path: &Path) -> Result<Vec<Rally>> {
    let file =
        File::open(path).with_context(|| format!("opening dataset {}", path.display()))?;
    let rallies = parse_dataset(file, &CsvSchema::default())?;
    Ok(rallies)
}

fn create(path: &Path) -> Result<File> {
    File::create(path).with_context(|| format!("writing {}", path.display()))
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let flags = Overrides {
        seed: args.common.seed,
        rallies: args.rallies.map(|n| n as usize),
        ..Overrides::default()
    };
    let (resolved, manifest) =
        start("synth", args.common.config.as_deref(), flags, &args.common.out)?;

    let rallies = generate_synthetic(resolved.rallies, resolved.seed, &SynthConfig::default())?;
    let path = args.common.out.join(DATA_FILE);
    write_dataset(&rallies, create(&path)?, &CsvSchema::default())?;
    manifest.write(&args.common.out)?;
    println!("wrote {} ({} rallies)", path.display(), rallies.len());
    Ok(())
}

pub fn corr(args: &CorrArgs) -> Result<()> {
    let flags = Overrides {
        seed: args.common.seed,
        features: args.features.clone(),
        ..Overrides::default()
    };
    let (resolved, mut manifest) =
        start("corr", args.common.config.as_deref(), flags, &args.common.out)?;
    manifest.input(&args.data)?;

    let rallies = load_rallies(&args.data)?;
    let features = resolved.feature_list()?;
    let matrix = association_matrix(&rallies, &features)?;
    let path = args.common.out.join(MATRIX_FILE);
    matrix.to_csv(create(&path)?)?;
    manifest.write(&args.common.out)?;
    println!("{}", matrix.render());
    println!("wrote {}", path.display());
    Ok(())
}

/// Fits vocabularies and the scaler on the full dataset and encodes it,
/// reporting rallies too short to forecast.
fn prepare_full(
    rallies: &[Rally],
) -> Result<(
    Vec<PreparedRally>,
    rallycast_core::ingest::Vocabularies,
    rallycast_core::ingest::CoordScaler,
)> {
    let vocabs = rallycast_core::ingest::build_vocabularies(rallies);
    let scaler = rallycast_core::ingest::CoordScaler::fit(rallies)?;
    let (prepared, dropped, _) = prepare_dataset(rallies, &vocabs, &scaler)?;
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rallies shorter than {} strokes", PREFIX_LEN + 2);
    }
    if prepared.is_empty() {
        bail!("no rally is long enough to forecast (need {} strokes)", PREFIX_LEN + 2);
    }
    Ok((prepared, vocabs, scaler))
}

pub fn train_cmd(args: &FitArgs) -> Result<()> {
    let (resolved, mut manifest) = start(
        "train",
        args.common.config.as_deref(),
        args.overrides(),
        &args.common.out,
    )?;
    manifest.input(&args.data)?;

    let rallies = load_rallies(&args.data)?;
    let (prepared, vocabs, scaler) = prepare_full(&rallies)?;
    let output = train(
        &prepared,
        resolved.model_config(),
        VocabSizes::from_vocabularies(&vocabs),
        &resolved.train_config(),
    )?;

    let curve_path = args.common.out.join(CURVE_FILE);
    write_curve_csv(&output.curve, create(&curve_path)?)?;
    let checkpoint_path = args.common.out.join(CHECKPOINT_FILE);
    Checkpoint::from_model(&output.model, &vocabs, &scaler).save(&checkpoint_path)?;
    manifest.write(&args.common.out)?;

    let last = output.curve.last().expect("training ran at least one epoch");
    println!("trained {} epochs, final loss {:.4}", last.epoch, last.loss.total);
    println!("wrote {}", curve_path.display());
    println!("wrote {}", checkpoint_path.display());
    Ok(())
}

#[derive(Serialize)]
struct CvFoldRow {
    fold: usize,
    score: f64,
    shot: f64,
    area: f64,
    checkpoint: String,
    curve: String,
}

#[derive(Serialize)]
struct CvReportFile {
    format_version: u32,
    mean_score: f64,
    sd_score: f64,
    mean_shot: f64,
    mean_area: f64,
    folds: Vec<CvFoldRow>,
}

pub fn cv_cmd(args: &FitArgs) -> Result<()> {
    let (resolved, mut manifest) = start(
        "cv",
        args.common.config.as_deref(),
        args.overrides(),
        &args.common.out,
    )?;
    manifest.input(&args.data)?;

    let rallies = load_rallies(&args.data)?;
    let output = cross_validate(&rallies, resolved.model_config(), &resolved.train_config())?;

    let mut rows = Vec::with_capacity(output.folds.len());
    for outcome in &output.folds {
        let checkpoint = format!("fold{}.json", outcome.fold);
        let curve = format!("fold{}_curve.csv", outcome.fold);
        outcome.checkpoint.save(&args.common.out.join(&checkpoint))?;
        write_curve_csv(&outcome.curve, create(&args.common.out.join(&curve))?)?;
        rows.push(CvFoldRow {
            fold: outcome.fold,
            score: outcome.report.aggregate.total_loss,
            shot: outcome.report.aggregate.shot_loss,
            area: outcome.report.aggregate.area_loss,
            checkpoint,
            curve,
        });
    }
    let report = CvReportFile {
        format_version: 1,
        mean_score: output.mean_score,
        sd_score: output.sd_score,
        mean_shot: output.mean_shot,
        mean_area: output.mean_area,
        folds: rows,
    };
    let report_path = args.common.out.join(CV_REPORT_FILE);
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    manifest.write(&args.common.out)?;

    println!(
        "cross-validated {} folds: score {:.4} +- {:.4}",
        output.folds.len(),
        output.mean_score,
        output.sd_score
    );
    println!("wrote {}", report_path.display());
    Ok(())
}

pub fn select_cmd(args: &SelectArgs) -> Result<()> {
    let (resolved, mut manifest) = start(
        "select",
        args.common.config.as_deref(),
        args.overrides(),
        &args.common.out,
    )?;
    manifest.input(&args.data)?;

    let rallies = load_rallies(&args.data)?;
    let checkpoint_dir = args.common.out.join(CHECKPOINT_DIR);
    let (results, mut report) = loss_selection(
        &rallies,
        &resolved.grid_spec(),
        &resolved.model_config(),
        &resolved.train_config(),
        Some(&checkpoint_dir),
    )?;
    relativize_checkpoints(&mut report, &args.common.out);

    let grid_path = args.common.out.join(GRID_FILE);
    write_grid_csv(&results, create(&grid_path)?)?;
    let report_path = args.common.out.join(SELECTION_FILE);
    fs::write(&report_path, serde_json::to_string_pretty(&report)? + "\n")?;
    manifest.write(&args.common.out)?;

    println!("searched {} grid points", results.len());
    println!("best total: {}", report.best_total.label);
    println!("best shot:  {}", report.best_shot.label);
    println!("best area:  {}", report.best_area.label);
    println!("wrote {}", grid_path.display());
    println!("wrote {}", report_path.display());
    Ok(())
}

/// Rewrites winner checkpoint paths relative to the output directory, so
/// the report stays valid when the directory is moved or copied.
fn relativize_checkpoints(report: &mut SelectionReport, out: &Path) {
    for winner in [
        &mut report.best_total,
        &mut report.best_shot,
        &mut report.best_area,
    ] {
        for path in &mut winner.checkpoints {
            if let Ok(rel) = Path::new(path).strip_prefix(out) {
                *path = rel.to_string_lossy().into_owned();
            }
        }
    }
}

/// Loads a checkpoint and encodes the dataset with the checkpoint's own
/// vocabularies and scaler, so units match training.
fn load_for_scoring(
    args: &ScoreArgs,
) -> Result<(
    rallycast_core::model::Model,
    Vec<PreparedRally>,
    rallycast_core::ingest::Vocabularies,
    rallycast_core::ingest::CoordScaler,
)> {
    if !args.checkpoint.exists() {
        bail!("checkpoint {} does not exist", args.checkpoint.display());
    }
    let (model, vocabs, scaler) = Checkpoint::load(&args.checkpoint)?.into_model()?;
    let rallies = load_rallies(&args.data)?;
    let (prepared, dropped, _) = prepare_dataset(&rallies, &vocabs, &scaler)?;
    if dropped > 0 {
        eprintln!("note: dropped {dropped} rallies shorter than {} strokes", PREFIX_LEN + 2);
    }
    if prepared.is_empty() {
        bail!("no rally is long enough to forecast (need {} strokes)", PREFIX_LEN + 2);
    }
    Ok((model, prepared, vocabs, scaler))
}

pub fn predict_cmd(args: &ScoreArgs) -> Result<()> {
    let (resolved, mut manifest) = start(
        "predict",
        args.common.config.as_deref(),
        args.overrides(),
        &args.common.out,
    )?;
    manifest.input(&args.data)?;
    manifest.input(&args.checkpoint)?;

    let (model, prepared, vocabs, scaler) = load_for_scoring(args)?;
    let sets = generate_candidates(&model, &prepared, resolved.seed, &resolved.decode_mode())?;
    let path = args.common.out.join(PREDICTIONS_FILE);
    write_predictions_csv(&sets, vocabs.get(Feature::ShotType), &scaler, create(&path)?)?;
    manifest.write(&args.common.out)?;

    println!(
        "predicted {} candidate sets in {} mode",
        sets.len(),
        resolved.mode
    );
    println!("wrote {}", path.display());
    Ok(())
}

pub fn evaluate_cmd(args: &ScoreArgs) -> Result<()> {
    let (resolved, mut manifest) = start(
        "evaluate",
        args.common.config.as_deref(),
        args.overrides(),
        &args.common.out,
    )?;
    manifest.input(&args.data)?;
    manifest.input(&args.checkpoint)?;

    let (model, prepared, _, _) = load_for_scoring(args)?;
    let report = evaluate_dataset(&model, &prepared, resolved.seed, &resolved.decode_mode())?;
    let path = args.common.out.join(METRIC_FILE);
    report.save(&path)?;
    manifest.write(&args.common.out)?;

    println!(
        "evaluated {} rallies: total {:.4} = shot {:.4} + area {:.4}",
        report.n_rallies,
        report.aggregate.total_loss,
        report.aggregate.shot_loss,
        report.aggregate.area_loss
    );
    println!("wrote {}", path.display());
    Ok(())
}

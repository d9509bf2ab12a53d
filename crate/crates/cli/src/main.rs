//! Command-line front end: feature extraction, synthetic cohorts, and the
//! two classification pipelines with machine-readable reports.

mod manifest;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use manifest::{hash_file, InputHash, RunManifest};
use qstrat_core::features::{
    build_subject_vector, matrix_to_csv, normalize_volume_tiv, roi_statistics,
    roi_volume, ClassLabel, FeatureMatrix, ROIS,
};
use qstrat_core::learners::LearnerKind;
use qstrat_core::modelsel::{default_grid, run_approach_a, CvOptions, Grid, ModelReport, Task};
use qstrat_core::subset::{run_approach_b, SubsetOptions, SubsetSearchReport};
use qstrat_core::synth::{default_table1_config, generate, CohortConfig, CohortMode};
use qstrat_core::volume::{
    extract_roi_values, read_nifti_labelmap, read_nifti_volume, write_nifti_labelmap,
    write_nifti_volume, MapIntent,
};
use qstrat_core::{Error as CoreError, HyperValue};

const EXIT_INPUT: u8 = 2;
const EXIT_DEGENERATE: u8 = 3;
const EXIT_INTERNAL: u8 = 1;

#[derive(Parser)]
#[command(name = "qstrat", version, about = "Quantitative-MRI stratification toolkit")]
struct Cli {
    /// Worker thread cap (falls back to QSTRAT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the 225-feature subject vector from qMRI volumes.
    Extract(ExtractArgs),
    /// Run a classification task on a features CSV.
    Run(RunArgs),
    /// Generate a synthetic cohort.
    Cohort(CohortArgs),
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    subject_id: String,
    /// Class label: HC, PIGD, TD, or Indeterminate.
    #[arg(long)]
    class_label: String,
    #[arg(long)]
    r1: PathBuf,
    #[arg(long)]
    r2star: PathBuf,
    #[arg(long)]
    qsm: PathBuf,
    /// Label map with ROI codes 1-9 in canonical order (sn, rn, stn,
    /// lateral_ventricles, thalamus, caudate, putamen, hippocampus, amygdala).
    #[arg(long)]
    labels: PathBuf,
    /// Total intracranial volume in liters (computed externally).
    #[arg(long)]
    tiv: f64,
    #[arg(long)]
    out: PathBuf,
    /// Append to an existing features CSV instead of overwriting.
    #[arg(long)]
    append: bool,
}

#[derive(Args)]
struct RunArgs {
    /// 1 = HC vs PwP, 2 = PIGD vs TD, 3 = three-class.
    #[arg(long)]
    task: u8,
    /// A = all-features multi-classifier, B = subset search.
    #[arg(long)]
    approach: String,
    #[arg(long)]
    features: PathBuf,
    /// JSON overrides for grids, CV, and subset options.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Rank subset-search features inside each training fold only.
    #[arg(long)]
    leakfree_ranking: bool,
}

#[derive(Args)]
struct CohortArgs {
    #[arg(long, conflicts_with = "table1_defaults")]
    config: Option<PathBuf>,
    /// Use the built-in cohort parameter table (21/14/9 subjects).
    #[arg(long)]
    table1_defaults: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self { code: EXIT_INPUT, message: message.into() }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::DegenerateLabels(_) | CoreError::Data(_) | CoreError::EmptyRoi { .. } => {
                EXIT_DEGENERATE
            }
            _ => EXIT_INPUT,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        Self::input(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli
        .threads
        .or_else(|| std::env::var("QSTRAT_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(EXIT_INTERNAL);
        }
    }
    let result = match cli.command {
        Command::Extract(args) => cmd_extract(args),
        Command::Run(args) => cmd_run(args),
        Command::Cohort(args) => cmd_cohort(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// extract

fn cmd_extract(args: ExtractArgs) -> CliResult<()> {
    let class = ClassLabel::from_str(&args.class_label)?;
    if !(args.tiv.is_finite() && args.tiv > 0.0) {
        return Err(CliError::input(format!("--tiv must be a positive volume in liters, got {}", args.tiv)));
    }
    let r1 = read_nifti_volume(&args.r1, MapIntent::R1, false)?;
    let r2star = read_nifti_volume(&args.r2star, MapIntent::R2Star, false)?;
    let qsm = read_nifti_volume(&args.qsm, MapIntent::Qsm, false)?;
    let labels = read_nifti_labelmap(&args.labels)?;

    let mut volumes = BTreeMap::new();
    let mut stats = BTreeMap::new();
    for (r, roi) in ROIS.iter().enumerate() {
        let code = (r + 1) as u32;
        let raw = roi_volume(&labels, code)?;
        volumes.insert(roi.to_string(), normalize_volume_tiv(raw, args.tiv)?);
        for (vol, map) in [(&r1, "r1"), (&r2star, "r2star"), (&qsm, "qsm")] {
            let vals = extract_roi_values(vol, &labels, code)?;
            stats.insert((roi.to_string(), map.to_string()), roi_statistics(&vals)?);
        }
    }
    let vector = build_subject_vector(&args.subject_id, class, &volumes, &stats)?;

    let matrix = if args.append && args.out.exists() {
        let mut m = qstrat_core::features::read_matrix_csv(&args.out)?;
        m.subject_ids.push(vector.subject_id.clone());
        m.labels.push(vector.label);
        m.data.extend(vector.values.iter().copied());
        m
    } else {
        FeatureMatrix::from_subjects(vec![vector])?
    };
    write_atomic(&args.out, &matrix_to_csv(&matrix))?;

    let inputs = vec![
        hash_file(&args.r1)?,
        hash_file(&args.r2star)?,
        hash_file(&args.qsm)?,
        hash_file(&args.labels)?,
    ];
    let config_json = format!("{{\"tiv\":{},\"subject_id\":{:?}}}", args.tiv, args.subject_id);
    let man = RunManifest::new(0, &config_json, inputs);
    write_atomic(
        &args.out.with_extension("manifest.json"),
        &serde_json::to_string_pretty(&man).map_err(|e| CliError::input(e.to_string()))?,
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// run

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    #[serde(default)]
    cv: Option<CvOptions>,
    #[serde(default)]
    subset: Option<SubsetOptions>,
    /// Approach A learners to evaluate, in order; defaults to all five.
    #[serde(default)]
    learners: Option<Vec<String>>,
    /// Per-learner hyperparameter grid overrides.
    #[serde(default)]
    grids: Option<BTreeMap<String, BTreeMap<String, Vec<HyperValue>>>>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    manifest: &'a RunManifest,
    task: u8,
    approach: String,
    leakfree_ranking: bool,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    approach_a: Vec<ModelReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    approach_b: Option<SubsetSearchReport>,
}

fn parse_learner(name: &str) -> CliResult<LearnerKind> {
    Ok(LearnerKind::from_str(name)?)
}

fn cmd_run(args: RunArgs) -> CliResult<()> {
    let task = Task::from_id(args.task)?;
    let approach = match args.approach.as_str() {
        "A" | "a" => 'A',
        "B" | "b" => 'B',
        other => return Err(CliError::input(format!("--approach must be A or B, got {other:?}"))),
    };
    let config_text = match &args.config {
        Some(p) => std::fs::read_to_string(p)?,
        None => "{}".to_string(),
    };
    let config: RunConfig = serde_json::from_str(&config_text)
        .map_err(|e| CliError::input(format!("config JSON: {e}")))?;
    let matrix = qstrat_core::features::read_matrix_csv(&args.features)?;

    let mut inputs = vec![hash_file(&args.features)?];
    if let Some(p) = &args.config {
        inputs.push(hash_file(p)?);
    }
    let man = RunManifest::new(args.seed, &config_text, inputs);

    let mut approach_a = Vec::new();
    let mut approach_b = None;
    if approach == 'A' {
        let cv = config.cv.clone().unwrap_or_default();
        let kinds: Vec<LearnerKind> = match &config.learners {
            Some(names) => names.iter().map(|n| parse_learner(n)).collect::<CliResult<_>>()?,
            None => LearnerKind::ALL.to_vec(),
        };
        for kind in kinds {
            let mut grid = default_grid(kind);
            if let Some(overrides) = config.grids.as_ref().and_then(|g| g.get(kind.as_str())) {
                grid = Grid { kind, candidates: overrides.clone() };
            }
            approach_a.push(run_approach_a(&matrix, task, &grid, args.seed, &cv)?);
        }
    } else {
        let opts = config.subset.clone().unwrap_or_default();
        approach_b = Some(run_approach_b(&matrix, task, args.seed, &opts, args.leakfree_ranking)?);
    }

    let report = RunReport {
        manifest: &man,
        task: args.task,
        approach: approach.to_string(),
        leakfree_ranking: args.leakfree_ranking,
        approach_a,
        approach_b,
    };
    std::fs::create_dir_all(&args.out)?;
    write_atomic(
        &args.out.join("report.json"),
        &serde_json::to_string_pretty(&report).map_err(|e| CliError::input(e.to_string()))?,
    )?;
    write_summary(&args.out, &report)?;
    write_curves_and_importance(&args.out, &report)?;
    Ok(())
}

fn write_summary(dir: &Path, report: &RunReport) -> CliResult<()> {
    let mut csv = String::new();
    if !report.approach_a.is_empty() {
        csv.push_str("task,approach,learner,mean_accuracy,mean_auc,pooled_auc\n");
        for r in &report.approach_a {
            csv.push_str(&format!(
                "{},A,{},{},{},{}\n",
                r.task_id,
                r.learner.as_str(),
                r.mean_accuracy,
                r.mean_auc,
                r.pooled_auc
            ));
        }
    }
    if let Some(b) = &report.approach_b {
        csv.push_str("task,approach,n_features,features,mean_accuracy,mean_auc\n");
        let features = if b.leakfree {
            "per-fold".to_string()
        } else {
            b.best_feature_names.join(";")
        };
        csv.push_str(&format!(
            "{},B,{},{},{},{}\n",
            b.task_id, b.best.n_features, features, b.best.mean_accuracy, b.best.mean_auc
        ));
    }
    write_atomic(&dir.join("summary.csv"), &csv)
}

fn write_curves_and_importance(dir: &Path, report: &RunReport) -> CliResult<()> {
    for r in &report.approach_a {
        let tag = r.learner.as_str();
        for f in &r.folds {
            if let Some(roc) = &f.roc {
                write_atomic(&dir.join(format!("roc_{tag}_fold{}.csv", f.fold)), &roc.to_csv())?;
            }
        }
        if let Some(mean) = &r.mean_roc {
            write_atomic(&dir.join(format!("roc_{tag}_mean.csv")), &mean.to_csv())?;
        }
        if let Some(imp) = &r.mean_importance {
            let mut order: Vec<usize> = (0..imp.len()).collect();
            order.sort_by(|&a, &b| {
                imp[b].partial_cmp(&imp[a]).unwrap().then(a.cmp(&b))
            });
            let mut csv = String::from("feature,importance\n");
            for &j in &order {
                csv.push_str(&format!("{},{}\n", r.feature_names[j], imp[j]));
            }
            write_atomic(&dir.join(format!("importance_{tag}.csv")), &csv)?;
        }
    }
    if let Some(b) = &report.approach_b {
        for f in &b.best_folds {
            if let Some(roc) = &f.roc {
                write_atomic(&dir.join(format!("roc_fold{}.csv", f.fold)), &roc.to_csv())?;
            }
        }
        if let Some(mean) = &b.mean_roc {
            write_atomic(&dir.join("roc_mean.csv"), &mean.to_csv())?;
        }
        let mut csv = String::from("bitmask,n_features,mean_auc,mean_accuracy\n");
        for s in &b.all_scores {
            csv.push_str(&format!(
                "{},{},{},{}\n",
                s.bitmask, s.n_features, s.mean_auc, s.mean_accuracy
            ));
        }
        write_atomic(&dir.join("subsets.csv"), &csv)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// cohort

fn cmd_cohort(args: CohortArgs) -> CliResult<()> {
    let (mut config, config_text, mut inputs) = match (&args.config, args.table1_defaults) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            let c: CohortConfig = serde_json::from_str(&text)
                .map_err(|e| CliError::input(format!("config JSON: {e}")))?;
            (c, text, vec![hash_file(path)?])
        }
        (None, true) => {
            let c = default_table1_config();
            let text = serde_json::to_string(&c).map_err(|e| CliError::input(e.to_string()))?;
            (c, text, Vec::new())
        }
        (None, false) => {
            return Err(CliError::input("provide --config <json> or --table1-defaults"));
        }
    };
    config.seed = args.seed;
    let cohort = generate(&config)?;
    std::fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("features.csv"), &matrix_to_csv(&cohort.matrix))?;
    if config.mode == CohortMode::Phantom {
        for ph in &cohort.phantoms {
            let base = args.out.join(&ph.subject_id);
            write_nifti_volume(&base.with_extension("r1.nii"), &ph.r1)?;
            write_nifti_volume(&base.with_extension("r2star.nii"), &ph.r2star)?;
            write_nifti_volume(&base.with_extension("qsm.nii"), &ph.qsm)?;
            write_nifti_labelmap(&base.with_extension("labels.nii"), &ph.labels)?;
            inputs.push(InputHash {
                path: ph.subject_id.clone(),
                sha256: manifest::sha256_hex(ph.subject_id.as_bytes()),
            });
        }
    }
    let man = RunManifest::new(args.seed, &config_text, inputs);
    write_atomic(
        &args.out.join("manifest.json"),
        &serde_json::to_string_pretty(&man).map_err(|e| CliError::input(e.to_string()))?,
    )?;
    Ok(())
}

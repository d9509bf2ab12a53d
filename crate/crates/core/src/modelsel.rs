//! Stratified cross-validation, hyperparameter grid search, and the
//! whole-feature-set evaluation pipeline.
//!
//! Per outer fold: z-score parameters are fitted on the training split only,
//! hyperparameters are chosen by an inner stratified 3-fold search on that
//! normalized training split, the winning configuration is refitted on the
//! full training split, and the held-out fold is scored once.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::features::{zscore_apply, zscore_fit, FeatureMatrix};
use crate::learners::{
    train, DataView, HyperValue, LearnerKind, LearnerSpec, TrainedModel,
};
use crate::metrics::{
    accuracy, auc_binary, auc_ovr_macro, mean_roc, roc_binary, RocCurve, ScoreSet,
};
use crate::rng;

pub const DEFAULT_OUTER_K: usize = 5;
pub const DEFAULT_INNER_K: usize = 3;
pub const DEFAULT_ROC_GRID: usize = 101;

/// Row indices per fold; `test[f]` is held out when training on the rest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldPlan {
    pub test: Vec<Vec<usize>>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.test.len()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = self
            .test
            .iter()
            .enumerate()
            .filter(|(f, _)| *f != fold)
            .flat_map(|(_, v)| v.iter().copied())
            .collect();
        idx.sort_unstable();
        idx
    }
}

/// Stratified k-fold assignment: within each class (classes visited in sorted
/// order) the rows are shuffled with a seed-derived stream and dealt round-robin.
pub fn stratified_kfold(labels: &[String], k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be >= 2, got {k}")));
    }
    if k > labels.len() {
        return Err(Error::Parameter(format!(
            "k = {k} exceeds the {} available samples",
            labels.len()
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        by_class.entry(l.as_str()).or_default().push(i);
    }
    let mut test = vec![Vec::new(); k];
    let mut next = 0usize; // fold cursor carried across classes for balance
    for (c, (_, mut rows)) in by_class.into_iter().enumerate() {
        let mut rng = rng::stream(seed, &[0x666c64, c as u64]);
        for i in (1..rows.len()).rev() {
            let j = rand::Rng::gen_range(&mut rng, 0..=i);
            rows.swap(i, j);
        }
        for r in rows {
            test[next % k].push(r);
            next += 1;
        }
    }
    for t in &mut test {
        t.sort_unstable();
    }
    if test.iter().any(|t| t.is_empty()) {
        return Err(Error::Parameter(format!("k = {k} leaves an empty fold")));
    }
    Ok(FoldPlan { test })
}

/// Candidate values per hyperparameter, enumerated in schema order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Grid {
    pub kind: LearnerKind,
    pub candidates: BTreeMap<String, Vec<HyperValue>>,
}

impl Grid {
    /// Cartesian product in schema order, candidates in listed order.
    /// Configurations that differ only in inert parameters (e.g. `degree`
    /// under a non-poly kernel) are collapsed onto the first occurrence.
    pub fn enumerate(&self, seed: u64) -> Vec<LearnerSpec> {
        let schema = self.kind.hyper_schema();
        let axes: Vec<(&str, &Vec<HyperValue>)> = schema
            .iter()
            .filter_map(|&name| self.candidates.get(name).map(|v| (name, v)))
            .filter(|(_, v)| !v.is_empty())
            .collect();
        let mut specs: Vec<LearnerSpec> = Vec::new();
        let mut seen: Vec<crate::learners::HyperMap> = Vec::new();
        let mut stack: Vec<(String, HyperValue)> = Vec::new();
        fn rec(
            kind: LearnerKind,
            seed: u64,
            axes: &[(&str, &Vec<HyperValue>)],
            stack: &mut Vec<(String, HyperValue)>,
            seen: &mut Vec<crate::learners::HyperMap>,
            out: &mut Vec<LearnerSpec>,
        ) {
            if axes.is_empty() {
                let mut spec = LearnerSpec::new(kind, seed);
                let kernel = stack
                    .iter()
                    .find(|(n, _)| n == "kernel")
                    .and_then(|(_, v)| match v {
                        HyperValue::Text(s) => Some(s.as_str()),
                        _ => None,
                    })
                    .unwrap_or("linear");
                for (name, value) in stack.iter() {
                    // drop parameters the chosen kernel ignores
                    if kind == LearnerKind::Svm {
                        if name == "gamma" && kernel == "linear" {
                            continue;
                        }
                        if name == "degree" && kernel != "poly" {
                            continue;
                        }
                    }
                    spec.hyperparameters.insert(name.clone(), value.clone());
                }
                if !seen.contains(&spec.hyperparameters) {
                    seen.push(spec.hyperparameters.clone());
                    out.push(spec);
                }
                return;
            }
            let (name, values) = axes[0];
            for v in values {
                stack.push((name.to_string(), v.clone()));
                rec(kind, seed, &axes[1..], stack, seen, out);
                stack.pop();
            }
        }
        rec(self.kind, seed, &axes, &mut stack, &mut seen, &mut specs);
        specs
    }
}

fn floats(values: &[f64]) -> Vec<HyperValue> {
    values.iter().map(|&v| HyperValue::Float(v)).collect()
}

fn ints(values: &[i64]) -> Vec<HyperValue> {
    values.iter().map(|&v| HyperValue::Int(v)).collect()
}

fn texts(values: &[&str]) -> Vec<HyperValue> {
    values.iter().map(|&v| HyperValue::Text(v.to_string())).collect()
}

/// Stock search grid for each learner.
pub fn default_grid(kind: LearnerKind) -> Grid {
    let mut candidates = BTreeMap::new();
    match kind {
        LearnerKind::Svm => {
            candidates.insert("c".into(), floats(&[0.01, 0.1, 1.0, 10.0, 100.0]));
            candidates.insert("kernel".into(), texts(&["linear", "rbf", "poly"]));
            let mut gamma = floats(&[0.001, 0.01, 0.1]);
            gamma.push(HyperValue::Text("scale".into()));
            candidates.insert("gamma".into(), gamma);
            candidates.insert("degree".into(), ints(&[2, 3]));
        }
        LearnerKind::LogReg => {
            candidates.insert("penalty".into(), texts(&["l1", "l2"]));
            candidates.insert("c".into(), floats(&[0.01, 0.1, 1.0, 10.0, 100.0]));
        }
        LearnerKind::RandomForest => {
            candidates.insert("n_trees".into(), ints(&[100, 300]));
            candidates.insert("max_depth".into(), ints(&[0, 5, 10]));
            candidates.insert("min_samples_split".into(), ints(&[2, 5]));
            candidates.insert("min_samples_leaf".into(), ints(&[1, 2]));
        }
        LearnerKind::GradientBoost => {
            candidates.insert("n_trees".into(), ints(&[100, 300]));
            candidates.insert("max_depth".into(), ints(&[3, 5]));
            candidates.insert("learning_rate".into(), floats(&[0.05, 0.1]));
            candidates.insert("subsample".into(), floats(&[0.8, 1.0]));
            candidates.insert("colsample".into(), floats(&[0.8, 1.0]));
        }
        LearnerKind::Knn => {
            candidates.insert("n_neighbors".into(), ints(&[3, 5, 7, 9]));
            candidates.insert("weights".into(), texts(&["uniform", "distance"]));
            candidates.insert("metric".into(), texts(&["euclidean", "manhattan"]));
        }
    }
    Grid { kind, candidates }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSearchOutcome {
    pub best: LearnerSpec,
    pub mean_val_accuracy: f64,
    pub n_candidates: usize,
    pub warnings: Vec<String>,
}

/// Inner-CV hyperparameter search. All candidates share one fold plan; the
/// winner is the highest mean validation accuracy, ties resolved in favour of
/// the earlier candidate in enumeration order.
pub fn grid_search(
    x: DataView,
    y: &[String],
    grid: &Grid,
    inner_k: usize,
    seed: u64,
) -> Result<GridSearchOutcome> {
    let specs = grid.enumerate(seed);
    if specs.is_empty() {
        return Err(Error::Config("empty hyperparameter grid".into()));
    }
    let plan = stratified_kfold(y, inner_k, seed)?;
    let mut warnings = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for (s, spec) in specs.iter().enumerate() {
        let mut accs = Vec::with_capacity(plan.k());
        let mut failed = false;
        for fold in 0..plan.k() {
            let train_idx = plan.train_indices(fold);
            let test_idx = &plan.test[fold];
            let (tr_data, tr_y) = gather(x, y, &train_idx);
            let (te_data, te_y) = gather(x, y, test_idx);
            let model = match train(spec, DataView::new(&tr_data, train_idx.len(), x.n_features), &tr_y)
            {
                Ok(m) => m,
                Err(e) => {
                    warnings.push(format!("candidate {s} skipped: {e}"));
                    failed = true;
                    break;
                }
            };
            let preds = model.predict(DataView::new(&te_data, test_idx.len(), x.n_features))?;
            accs.push(accuracy(&preds, &te_y)?);
        }
        if failed {
            continue;
        }
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        if best.map_or(true, |(_, b)| mean > b) {
            best = Some((s, mean));
        }
    }
    let (idx, mean_val_accuracy) =
        best.ok_or_else(|| Error::SearchFailed("every grid candidate failed".into()))?;
    Ok(GridSearchOutcome {
        best: specs[idx].clone(),
        mean_val_accuracy,
        n_candidates: specs.len(),
        warnings,
    })
}

fn gather(x: DataView, y: &[String], idx: &[usize]) -> (Vec<f64>, Vec<String>) {
    let mut data = Vec::with_capacity(idx.len() * x.n_features);
    let mut labels = Vec::with_capacity(idx.len());
    for &i in idx {
        data.extend_from_slice(x.row(i));
        labels.push(y[i].clone());
    }
    (data, labels)
}

/// Classification task: which subjects participate and how they are labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    /// Healthy controls vs all people with parkinsonism.
    HcVsPwp,
    /// Postural-instability/gait-difficulty vs tremor-dominant phenotype.
    PigdVsTd,
    /// HC vs PIGD vs TD.
    ThreeClass,
}

impl Task {
    pub fn id(&self) -> u8 {
        match self {
            Task::HcVsPwp => 1,
            Task::PigdVsTd => 2,
            Task::ThreeClass => 3,
        }
    }

    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(Task::HcVsPwp),
            2 => Ok(Task::PigdVsTd),
            3 => Ok(Task::ThreeClass),
            other => Err(Error::Config(format!("unknown task {other}"))),
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            Task::ThreeClass => 3,
            _ => 2,
        }
    }

    /// Task label for a subject, or None when the subject is excluded.
    pub fn project(&self, label: &str) -> Option<String> {
        match self {
            Task::HcVsPwp => match label {
                "HC" => Some("HC".into()),
                "PIGD" | "TD" | "Indeterminate" => Some("PwP".into()),
                _ => None,
            },
            Task::PigdVsTd => match label {
                "PIGD" | "TD" => Some(label.into()),
                _ => None,
            },
            Task::ThreeClass => match label {
                "HC" | "PIGD" | "TD" => Some(label.into()),
                _ => None,
            },
        }
    }

    /// Row indices kept for this task plus their projected labels.
    pub fn select(&self, labels: &[crate::features::ClassLabel]) -> (Vec<usize>, Vec<String>) {
        let mut idx = Vec::new();
        let mut out = Vec::new();
        for (i, l) in labels.iter().enumerate() {
            if let Some(p) = self.project(l.as_str()) {
                idx.push(i);
                out.push(p);
            }
        }
        (idx, out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub spec: LearnerSpec,
    pub inner_val_accuracy: f64,
    pub accuracy: f64,
    pub auc: f64,
    pub test_ids: Vec<String>,
    pub truth: Vec<String>,
    pub predicted: Vec<String>,
    /// Row-major test scores, one column per class (sorted class order).
    pub scores: Vec<f64>,
    pub classes: Vec<String>,
    pub roc: Option<RocCurve>,
    pub importance: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelReport {
    pub task_id: u8,
    pub learner: LearnerKind,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub folds: Vec<FoldOutcome>,
    pub mean_accuracy: f64,
    pub mean_auc: f64,
    pub pooled_auc: f64,
    pub mean_roc: Option<RocCurve>,
    pub mean_importance: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CvOptions {
    pub outer_k: usize,
    pub inner_k: usize,
    pub roc_grid: usize,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self { outer_k: DEFAULT_OUTER_K, inner_k: DEFAULT_INNER_K, roc_grid: DEFAULT_ROC_GRID }
    }
}

/// Evaluate the test split of one fold: accuracy, AUC, optional binary ROC.
fn score_fold(
    model: &TrainedModel,
    x: DataView,
    truth: &[String],
) -> Result<(f64, f64, Vec<f64>, Vec<String>, Option<RocCurve>)> {
    let preds = model.predict(x)?;
    let acc = accuracy(&preds, &truth.to_vec())?;
    let scores = model.decision_scores(x)?;
    let set = ScoreSet {
        classes: model.classes.clone(),
        scores: scores.clone(),
        labels: truth.to_vec(),
    };
    let (auc, roc) = if model.classes.len() == 2 {
        let (margins, t) = set.binary_margins()?;
        (auc_binary(&margins, &t)?, Some(roc_binary(&margins, &t)?))
    } else {
        (auc_ovr_macro(&set)?.0, None)
    };
    Ok((acc, auc, scores, preds, roc))
}

/// Grid-searched k-fold evaluation on the full feature set.
pub fn run_approach_a(
    matrix: &FeatureMatrix,
    task: Task,
    grid: &Grid,
    seed: u64,
    opts: &CvOptions,
) -> Result<ModelReport> {
    let (rows, labels) = task.select(&matrix.labels);
    if rows.is_empty() {
        return Err(Error::DegenerateLabels("no subjects left after task selection".into()));
    }
    let m = matrix.select_rows(&rows);
    run_cv(&m, &labels, task, grid, seed, opts)
}

/// The outer-CV engine shared by the full-feature and subset pipelines.
pub fn run_cv(
    m: &FeatureMatrix,
    labels: &[String],
    task: Task,
    grid: &Grid,
    seed: u64,
    opts: &CvOptions,
) -> Result<ModelReport> {
    let plan = stratified_kfold(labels, opts.outer_k, rng::stream_tag(seed, &[task.id() as u64]))?;
    let mut warnings = Vec::new();
    let mut folds = Vec::with_capacity(plan.k());
    let mut pooled_scores: Vec<f64> = Vec::new();
    let mut pooled_truth: Vec<String> = Vec::new();
    let mut classes_seen: Option<Vec<String>> = None;

    for fold in 0..plan.k() {
        let train_idx = plan.train_indices(fold);
        let test_idx = &plan.test[fold];
        let train_m = m.select_rows(&train_idx);
        let test_m = m.select_rows(test_idx);
        let tr_labels: Vec<String> = train_idx.iter().map(|&i| labels[i].clone()).collect();
        let te_labels: Vec<String> = test_idx.iter().map(|&i| labels[i].clone()).collect();
        let zp = zscore_fit(&train_m)?;
        let train_z = zscore_apply(&train_m, &zp)?;
        let test_z = zscore_apply(&test_m, &zp)?;

        let tr_view = DataView::new(&train_z.data, train_z.n_rows(), train_z.n_features());
        let te_view = DataView::new(&test_z.data, test_z.n_rows(), test_z.n_features());

        let inner_seed = rng::stream_tag(seed, &[task.id() as u64, fold as u64]);
        let search = grid_search(tr_view, &tr_labels, grid, opts.inner_k, inner_seed)?;
        warnings.extend(search.warnings.iter().map(|w| format!("fold {fold}: {w}")));

        let model = train(&search.best, tr_view, &tr_labels)?;
        let (acc, auc, scores, preds, roc) = score_fold(&model, te_view, &te_labels)?;
        if let Some(ref c) = classes_seen {
            if *c != model.classes {
                warnings.push(format!("fold {fold}: class set {:?} differs", model.classes));
            }
        } else {
            classes_seen = Some(model.classes.clone());
        }
        pooled_scores.extend(&scores);
        pooled_truth.extend(te_labels.iter().cloned());
        folds.push(FoldOutcome {
            fold,
            spec: search.best,
            inner_val_accuracy: search.mean_val_accuracy,
            accuracy: acc,
            auc,
            test_ids: test_z.subject_ids.clone(),
            truth: te_labels.clone(),
            predicted: preds,
            scores,
            classes: model.classes.clone(),
            roc,
            importance: model.feature_importance().map(|i| i.weights),
        });
    }

    let k = folds.len() as f64;
    let mean_accuracy = folds.iter().map(|f| f.accuracy).sum::<f64>() / k;
    let mean_auc = folds.iter().map(|f| f.auc).sum::<f64>() / k;
    let classes = classes_seen.expect("at least one fold");
    let pooled_set =
        ScoreSet { classes: classes.clone(), scores: pooled_scores, labels: pooled_truth };
    let pooled_auc = if classes.len() == 2 {
        let (margins, t) = pooled_set.binary_margins()?;
        auc_binary(&margins, &t)?
    } else {
        auc_ovr_macro(&pooled_set)?.0
    };
    let fold_curves: Vec<RocCurve> = folds.iter().filter_map(|f| f.roc.clone()).collect();
    let mean_curve = if fold_curves.len() == folds.len() {
        Some(mean_roc(&fold_curves, opts.roc_grid)?)
    } else {
        None
    };
    let mean_importance = if folds.iter().all(|f| f.importance.is_some()) {
        let d = m.n_features();
        let mut acc = vec![0.0; d];
        for f in &folds {
            for (j, v) in f.importance.as_ref().unwrap().iter().enumerate() {
                acc[j] += v / k;
            }
        }
        Some(acc)
    } else {
        None
    };

    Ok(ModelReport {
        task_id: task.id(),
        learner: grid.kind,
        seed,
        feature_names: m.feature_names.clone(),
        folds,
        mean_accuracy,
        mean_auc,
        pooled_auc,
        mean_roc: mean_curve,
        mean_importance,
        warnings,
    })
}

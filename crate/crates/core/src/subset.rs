//! Univariate feature ranking and exhaustive subset search.
//!
//! Candidate features are ranked by single-feature discriminative AUC
//! (orientation-free: max(a, 1-a)). The search then scores every non-empty
//! subset of a small pool with a cross-validated linear SVM and keeps the
//! subset with the highest mean validation AUC.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{zscore_apply, zscore_fit, FeatureMatrix};
use crate::learners::{train, DataView, HyperValue, LearnerKind, LearnerSpec};
use crate::metrics::{accuracy, auc_binary, mean_roc, roc_binary, RocCurve, ScoreSet};
use crate::modelsel::{stratified_kfold, FoldPlan, Task};
use crate::rng;

pub const DEFAULT_POOL_SIZE: usize = 12;
pub const MAX_POOL_SIZE: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    /// Column index into the source matrix.
    pub index: usize,
    pub name: String,
    /// Raw AUC of the feature value as a score for the positive class
    /// (averaged over one-vs-rest comparisons when there are three classes).
    pub raw_auc: f64,
    /// Orientation-free ranking score.
    pub score: f64,
}

/// Rank every column by oriented single-feature AUC, descending; ties keep
/// the lower column index (canonical feature order).
pub fn rank_features_by_auc(
    x: DataView,
    names: &[String],
    labels: &[String],
) -> Result<Vec<RankedFeature>> {
    let mut classes: Vec<&String> = labels.iter().collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels("feature ranking needs at least two classes".into()));
    }
    let mut out = Vec::with_capacity(x.n_features);
    for j in 0..x.n_features {
        let col: Vec<f64> = (0..x.n_rows).map(|i| x.row(i)[j]).collect();
        let (raw, score) = if classes.len() == 2 {
            let truth: Vec<bool> = labels.iter().map(|l| l == classes[1]).collect();
            let a = auc_binary(&col, &truth)?;
            (a, a.max(1.0 - a))
        } else {
            let mut raws = Vec::new();
            let mut oriented = Vec::new();
            for c in &classes {
                let truth: Vec<bool> = labels.iter().map(|l| &l == c).collect();
                let a = auc_binary(&col, &truth)?;
                raws.push(a);
                oriented.push(a.max(1.0 - a));
            }
            (
                raws.iter().sum::<f64>() / raws.len() as f64,
                oriented.iter().sum::<f64>() / oriented.len() as f64,
            )
        };
        out.push(RankedFeature { index: j, name: names[j].clone(), raw_auc: raw, score });
    }
    out.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.index.cmp(&b.index)));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturePool {
    pub features: Vec<RankedFeature>,
}

impl FeaturePool {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.features.iter().map(|f| f.index).collect()
    }
}

/// The `size` best-ranked features.
pub fn top_pool(ranked: &[RankedFeature], size: usize) -> FeaturePool {
    FeaturePool { features: ranked.iter().take(size).cloned().collect() }
}

/// Pool for the three-class task: the top `half` features of each binary
/// ranking. A feature appearing in both halves is kept by the ranking that
/// places it higher; the other half backfills from its next-ranked unused
/// feature. The combined pool is re-sorted by score, ties in canonical order.
pub fn build_multiclass_pool(
    r1: &[RankedFeature],
    r2: &[RankedFeature],
    half: usize,
) -> FeaturePool {
    let mut sel1: Vec<usize> = (0..half.min(r1.len())).collect(); // positions into r1
    let mut sel2: Vec<usize> = (0..half.min(r2.len())).collect();
    loop {
        let dup = sel1.iter().find_map(|&p1| {
            sel2.iter()
                .position(|&p2| r2[p2].index == r1[p1].index)
                .map(|s2_pos| (p1, s2_pos))
        });
        let Some((p1, s2_pos)) = dup else { break };
        let p2 = sel2[s2_pos];
        let used: Vec<usize> = sel1
            .iter()
            .map(|&p| r1[p].index)
            .chain(sel2.iter().map(|&p| r2[p].index))
            .collect();
        // the loser (ranked lower) backfills; position ties favour r1
        if p1 <= p2 {
            match (p2 + 1..r2.len()).find(|&p| !used.contains(&r2[p].index)) {
                Some(next) => sel2[s2_pos] = next,
                None => {
                    sel2.remove(s2_pos);
                }
            }
        } else {
            let s1_pos = sel1.iter().position(|&p| p == p1).unwrap();
            match (p1 + 1..r1.len()).find(|&p| !used.contains(&r1[p].index)) {
                Some(next) => sel1[s1_pos] = next,
                None => {
                    sel1.remove(s1_pos);
                }
            }
        }
    }
    let mut features: Vec<RankedFeature> = sel1
        .iter()
        .map(|&p| r1[p].clone())
        .chain(sel2.iter().map(|&p| r2[p].clone()))
        .collect();
    features.sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap().then(a.index.cmp(&b.index)));
    FeaturePool { features }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetOptions {
    pub outer_k: usize,
    pub svm_c: f64,
    pub roc_grid: usize,
    pub pool_size: usize,
}

impl Default for SubsetOptions {
    fn default() -> Self {
        Self {
            outer_k: crate::modelsel::DEFAULT_OUTER_K,
            svm_c: 1.0,
            roc_grid: crate::modelsel::DEFAULT_ROC_GRID,
            pool_size: DEFAULT_POOL_SIZE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub bitmask: u64,
    pub n_features: usize,
    pub mean_auc: f64,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetFold {
    pub fold: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub test_ids: Vec<String>,
    pub truth: Vec<String>,
    pub predicted: Vec<String>,
    pub roc: Option<RocCurve>,
    /// Columns used in this fold (differs between folds in leak-free mode).
    pub feature_indices: Vec<usize>,
    pub feature_names: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetSearchReport {
    pub task_id: u8,
    pub seed: u64,
    pub leakfree: bool,
    /// Whole-cohort pool (empty in leak-free mode, where pools are per fold).
    pub pool: Vec<RankedFeature>,
    pub best: SubsetScore,
    pub best_feature_indices: Vec<usize>,
    pub best_feature_names: Vec<String>,
    pub best_folds: Vec<SubsetFold>,
    pub mean_roc: Option<RocCurve>,
    pub all_scores: Vec<SubsetScore>,
}

fn mask_positions(mask: u64, p: usize) -> Vec<usize> {
    (0..p).filter(|&b| mask & (1 << b) != 0).collect()
}

/// The per-fold ranking used in leak-free mode, mirroring how the pool is
/// built for each task on the whole cohort.
fn fold_pool(
    m: &FeatureMatrix,
    labels: &[String],
    task: Task,
    rows: &[usize],
    pool_size: usize,
) -> Result<FeaturePool> {
    let sub = m.select_rows(rows);
    let sub_labels: Vec<String> = rows.iter().map(|&i| labels[i].clone()).collect();
    let view = DataView::new(&sub.data, sub.n_rows(), sub.n_features());
    if task == Task::ThreeClass {
        let to1: Vec<String> = sub_labels
            .iter()
            .map(|l| if l == "HC" { "HC".to_string() } else { "PwP".to_string() })
            .collect();
        let r1 = rank_features_by_auc(view, &sub.feature_names, &to1)?;
        let keep2: Vec<usize> =
            (0..sub.n_rows()).filter(|&i| sub_labels[i] != "HC").collect();
        let sub2 = sub.select_rows(&keep2);
        let l2: Vec<String> = keep2.iter().map(|&i| sub_labels[i].clone()).collect();
        let r2 = rank_features_by_auc(
            DataView::new(&sub2.data, sub2.n_rows(), sub2.n_features()),
            &sub2.feature_names,
            &l2,
        )?;
        Ok(build_multiclass_pool(&r1, &r2, pool_size / 2))
    } else {
        let ranked = rank_features_by_auc(view, &sub.feature_names, &sub_labels)?;
        Ok(top_pool(&ranked, pool_size))
    }
}

/// Score one candidate subset: stratified k-fold, per-fold z-scoring, linear
/// SVM, per-fold AUC. In leak-free mode `mask` addresses rank positions of
/// each fold's own training-rows pool instead of fixed columns.
#[allow(clippy::too_many_arguments)]
fn eval_mask(
    m: &FeatureMatrix,
    labels: &[String],
    task: Task,
    pool: &FeaturePool,
    mask: u64,
    seed: u64,
    opts: &SubsetOptions,
    leakfree: bool,
    detail: bool,
) -> Result<(SubsetScore, Vec<SubsetFold>)> {
    let plan: FoldPlan = stratified_kfold(labels, opts.outer_k, rng::stream_tag(seed, &[mask]))?;
    let positions = mask_positions(mask, pool.len().max(opts.pool_size));
    let spec = LearnerSpec::new(LearnerKind::Svm, 0)
        .with("kernel", HyperValue::Text("linear".into()))
        .with("c", HyperValue::Float(opts.svm_c));
    let mut aucs = Vec::with_capacity(plan.k());
    let mut accs = Vec::with_capacity(plan.k());
    let mut folds = Vec::new();
    for fold in 0..plan.k() {
        let train_idx = plan.train_indices(fold);
        let test_idx = &plan.test[fold];
        let cols: Vec<usize> = if leakfree {
            let fp = fold_pool(m, labels, task, &train_idx, opts.pool_size)?;
            let idx = fp.indices();
            positions.iter().filter(|&&p| p < idx.len()).map(|&p| idx[p]).collect()
        } else {
            let idx = pool.indices();
            positions.iter().map(|&p| idx[p]).collect()
        };
        if cols.is_empty() {
            return Err(Error::Parameter("empty feature subset".into()));
        }
        let sel = m.select_columns(&cols);
        let train_m = sel.select_rows(&train_idx);
        let test_m = sel.select_rows(test_idx);
        let tr_labels: Vec<String> = train_idx.iter().map(|&i| labels[i].clone()).collect();
        let te_labels: Vec<String> = test_idx.iter().map(|&i| labels[i].clone()).collect();
        let zp = zscore_fit(&train_m)?;
        let train_z = zscore_apply(&train_m, &zp)?;
        let test_z = zscore_apply(&test_m, &zp)?;
        let tr = DataView::new(&train_z.data, train_z.n_rows(), train_z.n_features());
        let te = DataView::new(&test_z.data, test_z.n_rows(), test_z.n_features());
        let model = train(&spec, tr, &tr_labels)?;
        let scores = model.decision_scores(te)?;
        let preds = model.predict(te)?;
        let set = ScoreSet {
            classes: model.classes.clone(),
            scores: scores.clone(),
            labels: te_labels.clone(),
        };
        let (auc, roc) = if model.classes.len() == 2 {
            let (margins, t) = set.binary_margins()?;
            let roc = if detail { Some(roc_binary(&margins, &t)?) } else { None };
            (auc_binary(&margins, &t)?, roc)
        } else {
            (crate::metrics::auc_ovr_macro(&set)?.0, None)
        };
        let acc = accuracy(&preds, &te_labels)?;
        aucs.push(auc);
        accs.push(acc);
        if detail {
            folds.push(SubsetFold {
                fold,
                accuracy: acc,
                auc,
                test_ids: test_z.subject_ids.clone(),
                truth: te_labels,
                predicted: preds,
                roc,
                feature_names: cols.iter().map(|&c| m.feature_names[c].clone()).collect(),
                feature_indices: cols,
            });
        }
    }
    let score = SubsetScore {
        bitmask: mask,
        n_features: positions.len(),
        mean_auc: aucs.iter().sum::<f64>() / aucs.len() as f64,
        mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
    };
    Ok((score, folds))
}

/// Exhaustively score all non-empty subsets of the pool. Pools beyond
/// `MAX_POOL_SIZE` features are refused (2^p blowup).
pub fn exhaustive_subset_search(
    m: &FeatureMatrix,
    labels: &[String],
    task: Task,
    pool: &FeaturePool,
    seed: u64,
    opts: &SubsetOptions,
    leakfree: bool,
) -> Result<(SubsetScore, Vec<SubsetScore>)> {
    let p = if leakfree { opts.pool_size } else { pool.len() };
    if p == 0 {
        return Err(Error::Parameter("empty feature pool".into()));
    }
    if p > MAX_POOL_SIZE {
        return Err(Error::EnumerationCap { size: p });
    }
    let n_masks = (1u64 << p) - 1;
    let scores: Vec<SubsetScore> = (1..=n_masks)
        .into_par_iter()
        .map(|mask| {
            eval_mask(m, labels, task, pool, mask, seed, opts, leakfree, false)
                .map(|(s, _)| s)
        })
        .collect::<Result<Vec<_>>>()?;
    let best = scores
        .iter()
        .min_by(|a, b| {
            b.mean_auc
                .partial_cmp(&a.mean_auc)
                .unwrap()
                .then(a.n_features.cmp(&b.n_features))
                .then(a.bitmask.cmp(&b.bitmask))
        })
        .cloned()
        .ok_or_else(|| Error::SearchFailed("no subset could be scored".into()))?;
    Ok((best, scores))
}

/// Ranking + pool construction + exhaustive subset search for a task.
pub fn run_approach_b(
    matrix: &FeatureMatrix,
    task: Task,
    seed: u64,
    opts: &SubsetOptions,
    leakfree: bool,
) -> Result<SubsetSearchReport> {
    let (rows, labels) = task.select(&matrix.labels);
    if rows.is_empty() {
        return Err(Error::DegenerateLabels("no subjects left after task selection".into()));
    }
    let m = matrix.select_rows(&rows);

    let pool = if leakfree {
        FeaturePool { features: Vec::new() }
    } else {
        fold_pool(&m, &labels, task, &(0..m.n_rows()).collect::<Vec<_>>(), opts.pool_size)?
    };
    let (best, all_scores) =
        exhaustive_subset_search(&m, &labels, task, &pool, seed, opts, leakfree)?;
    let (_, best_folds) =
        eval_mask(&m, &labels, task, &pool, best.bitmask, seed, opts, leakfree, true)?;

    let (best_feature_indices, best_feature_names) = if leakfree {
        (Vec::new(), Vec::new()) // per-fold; see best_folds
    } else {
        let idx = pool.indices();
        let cols: Vec<usize> =
            mask_positions(best.bitmask, pool.len()).iter().map(|&p| idx[p]).collect();
        let names = cols.iter().map(|&c| m.feature_names[c].clone()).collect();
        (cols, names)
    };
    let curves: Vec<RocCurve> = best_folds.iter().filter_map(|f| f.roc.clone()).collect();
    let mean_curve = if curves.len() == best_folds.len() && !curves.is_empty() {
        Some(mean_roc(&curves, opts.roc_grid)?)
    } else {
        None
    };
    Ok(SubsetSearchReport {
        task_id: task.id(),
        seed,
        leakfree,
        pool: pool.features,
        best,
        best_feature_indices,
        best_feature_names,
        best_folds,
        mean_roc: mean_curve,
        all_scores,
    })
}

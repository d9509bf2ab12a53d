//! Accuracy, ROC curves, binary and one-vs-rest AUC, fold-mean ROC.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// An ROC curve: (fpr, tpr) points from (0,0) to (1,1) with the score cutoff
/// that produced each point.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

impl RocCurve {
    /// Area under the curve by the trapezoidal rule.
    pub fn auc(&self) -> f64 {
        trapezoid(&self.points)
    }

    pub fn is_monotone(&self) -> bool {
        self.points.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1)
    }

    /// Two-column CSV (fpr,tpr) for external plotting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("fpr,tpr\n");
        for (fpr, tpr) in &self.points {
            let _ = writeln!(s, "{fpr},{tpr}");
        }
        s
    }
}

fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}

/// Per-sample scores with true labels. One score column per class; a plain
/// binary score vector is a one-column set.
#[derive(Debug, Clone)]
pub struct ScoreSet {
    pub classes: Vec<String>,
    /// Row-major, n rows x classes.len() columns.
    pub scores: Vec<f64>,
    pub labels: Vec<String>,
}

impl ScoreSet {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        let k = self.classes.len();
        (0..self.n()).map(|i| self.scores[i * k + c]).collect()
    }

    /// Binary margin: score of the second class minus score of the first.
    /// The second class in the ordered class list is the positive class.
    pub fn binary_margins(&self) -> Result<(Vec<f64>, Vec<bool>)> {
        if self.classes.len() != 2 {
            return Err(Error::Schema(format!("expected 2 score columns, got {}", self.classes.len())));
        }
        let pos = &self.classes[1];
        let margins = (0..self.n())
            .map(|i| self.scores[i * 2 + 1] - self.scores[i * 2])
            .collect();
        let truth = self.labels.iter().map(|l| l == pos).collect();
        Ok((margins, truth))
    }
}

/// Fraction of exact matches.
pub fn accuracy<T: PartialEq>(predicted: &[T], truth: &[T]) -> Result<f64> {
    if predicted.len() != truth.len() || truth.is_empty() {
        return Err(Error::Schema(format!(
            "accuracy needs equal nonempty label lists ({} vs {})",
            predicted.len(),
            truth.len()
        )));
    }
    let hits = predicted.iter().zip(truth.iter()).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// ROC by sweeping unique score thresholds descending; tied scores collapse
/// into single steps, so the trapezoidal AUC equals the pairwise probability
/// P(s+ > s-) + P(s+ = s-)/2.
pub fn roc_binary(scores: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if scores.len() != truth.len() || scores.is_empty() {
        return Err(Error::Schema("scores and labels must be equal-length and nonempty".into()));
    }
    let n_pos = truth.iter().filter(|&&t| t).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::DegenerateLabels("both classes must be present for ROC".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));

    let mut points = vec![(0.0, 0.0)];
    let mut thresholds = vec![f64::INFINITY];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        // consume the whole tie group
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(s);
    }
    Ok(RocCurve { points, thresholds })
}

/// Trapezoidal binary AUC.
pub fn auc_binary(scores: &[f64], truth: &[bool]) -> Result<f64> {
    Ok(roc_binary(scores, truth)?.auc())
}

/// Macro-averaged one-vs-rest AUC. Classes absent from the truth (or with no
/// negatives) are excluded and reported in the warning list.
pub fn auc_ovr_macro(s: &ScoreSet) -> Result<(f64, Vec<String>)> {
    if s.classes.len() < 2 {
        return Err(Error::Schema("one-vs-rest AUC needs >= 2 score columns".into()));
    }
    let mut aucs = Vec::new();
    let mut warnings = Vec::new();
    for (c, class) in s.classes.iter().enumerate() {
        let truth: Vec<bool> = s.labels.iter().map(|l| l == class).collect();
        let n_pos = truth.iter().filter(|&&t| t).count();
        if n_pos == 0 || n_pos == truth.len() {
            warnings.push(format!("class {class} degenerate (positives {n_pos}/{})", truth.len()));
            continue;
        }
        aucs.push(auc_binary(&s.column(c), &truth)?);
    }
    if aucs.is_empty() {
        return Err(Error::DegenerateLabels("all classes degenerate for OvR AUC".into()));
    }
    Ok((aucs.iter().sum::<f64>() / aucs.len() as f64, warnings))
}

/// Vertical averaging of ROC curves on a uniform fpr grid.
///
/// Endpoints are forced to (0,0) and (1,1); at a duplicated fpr the highest
/// tpr of that vertical segment is used for interpolation.
pub fn mean_roc(curves: &[RocCurve], grid_size: usize) -> Result<RocCurve> {
    if curves.is_empty() {
        return Err(Error::Parameter("mean_roc needs at least one curve".into()));
    }
    if grid_size < 2 {
        return Err(Error::Parameter("grid_size must be >= 2".into()));
    }
    let mut points = Vec::with_capacity(grid_size);
    for g in 0..grid_size {
        let fpr = g as f64 / (grid_size - 1) as f64;
        let tpr = if g == 0 {
            0.0
        } else if g == grid_size - 1 {
            1.0
        } else {
            curves.iter().map(|c| interp_tpr(c, fpr)).sum::<f64>() / curves.len() as f64
        };
        points.push((fpr, tpr));
    }
    let thresholds = vec![f64::NAN; points.len()];
    Ok(RocCurve { points, thresholds })
}

fn interp_tpr(curve: &RocCurve, fpr: f64) -> f64 {
    let pts = &curve.points;
    // exact hits take the maximum tpr of the vertical segment
    let mut best_exact: Option<f64> = None;
    for &(x, y) in pts {
        if x == fpr {
            best_exact = Some(best_exact.map_or(y, |b: f64| b.max(y)));
        }
    }
    if let Some(y) = best_exact {
        return y;
    }
    for w in pts.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if x0 < fpr && fpr < x1 {
            return y0 + (fpr - x0) / (x1 - x0) * (y1 - y0);
        }
    }
    if fpr <= pts[0].0 {
        pts[0].1
    } else {
        pts[pts.len() - 1].1
    }
}

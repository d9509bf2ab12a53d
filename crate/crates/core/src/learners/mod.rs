//! The classifier suite behind one train/predict/score interface.

pub mod forest;
pub mod gboost;
pub mod knn;
pub mod logreg;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LearnerKind {
    Svm,
    RandomForest,
    LogReg,
    GradientBoost,
    Knn,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 5] = [
        LearnerKind::Svm,
        LearnerKind::RandomForest,
        LearnerKind::LogReg,
        LearnerKind::GradientBoost,
        LearnerKind::Knn,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerKind::Svm => "svm",
            LearnerKind::RandomForest => "random_forest",
            LearnerKind::LogReg => "logreg",
            LearnerKind::GradientBoost => "gradient_boost",
            LearnerKind::Knn => "knn",
        }
    }

    pub fn from_str(s: &str) -> Result<Self> {
        match s {
            "svm" => Ok(LearnerKind::Svm),
            "random_forest" => Ok(LearnerKind::RandomForest),
            "logreg" => Ok(LearnerKind::LogReg),
            "gradient_boost" => Ok(LearnerKind::GradientBoost),
            "knn" => Ok(LearnerKind::Knn),
            other => Err(Error::Config(format!("unknown learner kind {other:?}"))),
        }
    }

    /// Hyperparameter names in schema order (grid enumeration order).
    pub fn hyper_schema(&self) -> &'static [&'static str] {
        match self {
            LearnerKind::Svm => &["c", "kernel", "gamma", "degree"],
            LearnerKind::LogReg => &["penalty", "c"],
            LearnerKind::RandomForest => &[
                "n_trees",
                "max_depth",
                "min_samples_split",
                "min_samples_leaf",
                "bootstrap",
                "max_features",
            ],
            LearnerKind::GradientBoost => {
                &["n_trees", "max_depth", "learning_rate", "subsample", "colsample"]
            }
            LearnerKind::Knn => &["n_neighbors", "weights", "metric"],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl HyperValue {
    fn as_f64(&self) -> Option<f64> {
        match self {
            HyperValue::Float(v) => Some(*v),
            HyperValue::Int(v) => Some(*v as f64),
            HyperValue::Text(_) => None,
        }
    }

    fn as_usize(&self) -> Option<usize> {
        match self {
            HyperValue::Int(v) if *v >= 0 => Some(*v as usize),
            HyperValue::Float(v) if *v >= 0.0 && v.fract() == 0.0 => Some(*v as usize),
            _ => None,
        }
    }

    fn as_str(&self) -> Option<&str> {
        match self {
            HyperValue::Text(s) => Some(s),
            _ => None,
        }
    }
}

pub type HyperMap = BTreeMap<String, HyperValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub hyperparameters: HyperMap,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(kind: LearnerKind, seed: u64) -> Self {
        Self { kind, hyperparameters: HyperMap::new(), seed }
    }

    pub fn with(mut self, name: &str, value: HyperValue) -> Self {
        self.hyperparameters.insert(name.to_string(), value);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let schema = self.kind.hyper_schema();
        for name in self.hyperparameters.keys() {
            if !schema.contains(&name.as_str()) {
                return Err(Error::Parameter(format!(
                    "hyperparameter {name:?} not in schema of {}",
                    self.kind.as_str()
                )));
            }
        }
        Ok(())
    }

    fn f64_or(&self, name: &str, default: f64) -> Result<f64> {
        match self.hyperparameters.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::Parameter(format!("hyperparameter {name} must be numeric"))),
        }
    }

    fn usize_or(&self, name: &str, default: usize) -> Result<usize> {
        match self.hyperparameters.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_usize()
                .ok_or_else(|| Error::Parameter(format!("hyperparameter {name} must be a non-negative integer"))),
        }
    }

    fn str_or<'a>(&'a self, name: &str, default: &'a str) -> Result<&'a str> {
        match self.hyperparameters.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::Parameter(format!("hyperparameter {name} must be a string"))),
        }
    }
}

/// Borrowed row-major design matrix.
#[derive(Debug, Clone, Copy)]
pub struct DataView<'a> {
    pub data: &'a [f64],
    pub n_rows: usize,
    pub n_features: usize,
}

impl<'a> DataView<'a> {
    pub fn new(data: &'a [f64], n_rows: usize, n_features: usize) -> Self {
        debug_assert_eq!(data.len(), n_rows * n_features);
        Self { data, n_rows, n_features }
    }

    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.n_features..(i + 1) * self.n_features]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum ModelInner {
    Svm(svm::SvmModel),
    LogReg { penalty: logreg::Penalty, c: f64, heads: Vec<logreg::LogRegHead> },
    Forest(forest::ForestModel),
    Gboost(gboost::GboostModel),
    Knn(knn::KnnModel),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainedModel {
    pub spec: LearnerSpec,
    pub classes: Vec<String>,
    pub n_features: usize,
    inner: ModelInner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ImportanceMethod {
    AbsCoefficient,
    ImpurityDecrease,
    Gain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub weights: Vec<f64>,
    pub method: ImportanceMethod,
}

fn class_index_targets(y: &[String], classes: &[String]) -> Vec<usize> {
    y.iter().map(|l| classes.iter().position(|c| c == l).unwrap()).collect()
}

/// Train a model. Deterministic given (spec, x, y) including the seed.
pub fn train(spec: &LearnerSpec, x: DataView, y: &[String]) -> Result<TrainedModel> {
    spec.validate()?;
    if x.n_rows != y.len() {
        return Err(Error::Schema(format!("{} rows vs {} labels", x.n_rows, y.len())));
    }
    if x.n_rows < 2 {
        return Err(Error::Parameter("training needs at least 2 samples".into()));
    }
    if let Some(v) = x.data.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite feature value {v}")));
    }
    let mut classes: Vec<String> = y.to_vec();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels(format!("only one class in training labels: {classes:?}")));
    }
    let targets = class_index_targets(y, &classes);
    let (n, d) = (x.n_rows, x.n_features);

    let inner = match spec.kind {
        LearnerKind::Svm => {
            let c = spec.f64_or("c", 1.0)?;
            // gamma "scale" resolves to 1/n_features at fit time
            let gamma = match spec.hyperparameters.get("gamma") {
                Some(HyperValue::Text(s)) if s == "scale" => 1.0 / d as f64,
                _ => spec.f64_or("gamma", 1.0 / d as f64)?,
            };
            let kernel = match spec.str_or("kernel", "linear")? {
                "linear" => svm::Kernel::Linear,
                "rbf" => svm::Kernel::Rbf { gamma },
                "poly" => svm::Kernel::Poly { gamma, degree: spec.usize_or("degree", 3)? as u32 },
                k => return Err(Error::Parameter(format!("unknown SVM kernel {k:?}"))),
            };
            let heads = (0..classes.len())
                .map(|c_idx| svm::fit_head(x.data, n, d, &targets, c_idx, kernel, c))
                .collect::<Result<Vec<_>>>()?;
            ModelInner::Svm(svm::SvmModel { kernel, c, heads })
        }
        LearnerKind::LogReg => {
            let c = spec.f64_or("c", 1.0)?;
            let penalty = match spec.str_or("penalty", "l2")? {
                "l1" => logreg::Penalty::L1,
                "l2" => logreg::Penalty::L2,
                p => return Err(Error::Parameter(format!("unknown LogReg penalty {p:?}"))),
            };
            let heads = (0..classes.len())
                .map(|c_idx| {
                    let yy: Vec<f64> =
                        targets.iter().map(|&t| if t == c_idx { 1.0 } else { -1.0 }).collect();
                    logreg::fit_head(x.data, n, d, &yy, penalty, c)
                })
                .collect::<Result<Vec<_>>>()?;
            ModelInner::LogReg { penalty, c, heads }
        }
        LearnerKind::RandomForest => {
            let max_depth = spec.usize_or("max_depth", 0)?;
            let config = forest::ForestConfig {
                n_trees: spec.usize_or("n_trees", 100)?,
                max_depth: if max_depth == 0 { None } else { Some(max_depth) },
                min_samples_split: spec.usize_or("min_samples_split", 2)?,
                min_samples_leaf: spec.usize_or("min_samples_leaf", 1)?,
                bootstrap: spec.usize_or("bootstrap", 1)? != 0,
                max_features: match spec.str_or("max_features", "sqrt")? {
                    "sqrt" => forest::FeatureSubsample::Sqrt,
                    "all" => forest::FeatureSubsample::All,
                    m => return Err(Error::Parameter(format!("unknown max_features {m:?}"))),
                },
            };
            ModelInner::Forest(forest::fit(x.data, n, d, &targets, classes.len(), &config, spec.seed))
        }
        LearnerKind::GradientBoost => {
            let config = gboost::GboostConfig {
                n_trees: spec.usize_or("n_trees", 100)?,
                max_depth: spec.usize_or("max_depth", 3)?,
                learning_rate: spec.f64_or("learning_rate", 0.1)?,
                subsample: spec.f64_or("subsample", 1.0)?,
                colsample: spec.f64_or("colsample", 1.0)?,
            };
            ModelInner::Gboost(gboost::fit(x.data, n, d, &targets, classes.len(), &config, spec.seed))
        }
        LearnerKind::Knn => ModelInner::Knn(knn::KnnModel {
            n_neighbors: spec.usize_or("n_neighbors", 5)?,
            weights: match spec.str_or("weights", "uniform")? {
                "uniform" => knn::KnnWeights::Uniform,
                "distance" => knn::KnnWeights::Distance,
                w => return Err(Error::Parameter(format!("unknown KNN weights {w:?}"))),
            },
            metric: match spec.str_or("metric", "euclidean")? {
                "euclidean" => knn::KnnMetric::Euclidean,
                "manhattan" => knn::KnnMetric::Manhattan,
                m => return Err(Error::Parameter(format!("unknown KNN metric {m:?}"))),
            },
            train_data: x.data.to_vec(),
            train_targets: targets,
            n_classes: classes.len(),
            n_features: d,
        }),
    };

    Ok(TrainedModel { spec: spec.clone(), classes, n_features: d, inner })
}

impl TrainedModel {
    fn check_width(&self, x: &DataView) -> Result<()> {
        if x.n_features != self.n_features {
            return Err(Error::Schema(format!(
                "input width {} != model n_features {}",
                x.n_features, self.n_features
            )));
        }
        Ok(())
    }

    /// Per-class decision scores, row-major n x n_classes. Margins for SVM,
    /// log-odds for LogReg and gradient boosting, vote fractions for the
    /// forest, neighbour weight fractions for KNN.
    pub fn decision_scores(&self, x: DataView) -> Result<Vec<f64>> {
        self.check_width(&x)?;
        let k = self.classes.len();
        let mut out = Vec::with_capacity(x.n_rows * k);
        for i in 0..x.n_rows {
            let row = x.row(i);
            match &self.inner {
                ModelInner::Svm(m) => {
                    for head in &m.heads {
                        out.push(m.head_score(head, row, self.n_features));
                    }
                }
                ModelInner::LogReg { heads, .. } => {
                    for head in heads {
                        out.push(head.score(row));
                    }
                }
                ModelInner::Forest(m) => out.extend(m.vote_fractions(row)),
                ModelInner::Gboost(m) => {
                    for head in &m.heads {
                        out.push(head.score(row));
                    }
                }
                ModelInner::Knn(m) => out.extend(m.class_fractions(row)),
            }
        }
        Ok(out)
    }

    /// Argmax of decision scores; ties go to the lexicographically first
    /// class (the class list is sorted).
    pub fn predict(&self, x: DataView) -> Result<Vec<String>> {
        let scores = self.decision_scores(x)?;
        let k = self.classes.len();
        Ok((0..x.n_rows)
            .map(|i| {
                let row = &scores[i * k..(i + 1) * k];
                let mut best = 0;
                for (c, &s) in row.iter().enumerate() {
                    if s > row[best] {
                        best = c;
                    }
                }
                self.classes[best].clone()
            })
            .collect())
    }

    pub fn feature_importance(&self) -> Option<FeatureImportance> {
        match &self.inner {
            ModelInner::LogReg { heads, .. } => {
                let mut acc = vec![0.0; self.n_features];
                for head in heads {
                    for (j, w) in head.weights.iter().enumerate() {
                        acc[j] += w.abs() / heads.len() as f64;
                    }
                }
                Some(FeatureImportance { weights: acc, method: ImportanceMethod::AbsCoefficient })
            }
            ModelInner::Svm(m) => m
                .linear_importance(self.n_features)
                .map(|weights| FeatureImportance { weights, method: ImportanceMethod::AbsCoefficient }),
            ModelInner::Forest(m) => Some(FeatureImportance {
                weights: m.importance.clone(),
                method: ImportanceMethod::ImpurityDecrease,
            }),
            ModelInner::Gboost(m) => Some(FeatureImportance {
                weights: m.importance.clone(),
                method: ImportanceMethod::Gain,
            }),
            ModelInner::Knn(_) => None,
        }
    }

    /// Versioned JSON document for reload and audit.
    pub fn to_json(&self) -> String {
        let doc = serde_json::json!({
            "format_version": MODEL_FORMAT_VERSION,
            "model": self,
        });
        serde_json::to_string(&doc).expect("model serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("model JSON: {e}")))?;
        let version = doc.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0);
        if version != MODEL_FORMAT_VERSION as u64 {
            return Err(Error::Unsupported(format!("model format version {version}")));
        }
        serde_json::from_value(doc["model"].clone())
            .map_err(|e| Error::Format(format!("model JSON: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn toy(n: usize, d: usize, n_classes: usize, seed: u64) -> (Vec<f64>, Vec<String>) {
        let mut rng = crate::rng::stream(seed, &[99]);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let cls = rng.gen_range(0..n_classes);
            let mut row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            row[cls % d] += 3.0;
            data.extend(row);
            labels.push(format!("c{cls}"));
        }
        (data, labels)
    }

    fn all_specs() -> Vec<LearnerSpec> {
        vec![
            LearnerSpec::new(LearnerKind::Svm, 1).with("kernel", HyperValue::Text("rbf".into())).with("gamma", HyperValue::Float(0.5)),
            LearnerSpec::new(LearnerKind::Svm, 1),
            LearnerSpec::new(LearnerKind::LogReg, 1),
            LearnerSpec::new(LearnerKind::RandomForest, 1).with("n_trees", HyperValue::Int(20)),
            LearnerSpec::new(LearnerKind::GradientBoost, 1).with("n_trees", HyperValue::Int(20)),
            LearnerSpec::new(LearnerKind::Knn, 1).with("n_neighbors", HyperValue::Int(3)),
        ]
    }

    #[test]
    fn predict_equals_argmax_of_scores_for_every_kind() {
        let (data, labels) = toy(36, 4, 3, 5);
        let x = DataView::new(&data, 36, 4);
        for spec in all_specs() {
            let m = train(&spec, x, &labels).unwrap();
            let preds = m.predict(x).unwrap();
            let scores = m.decision_scores(x).unwrap();
            let k = m.classes.len();
            for i in 0..36 {
                let row = &scores[i * k..(i + 1) * k];
                let mut best = 0;
                for (c, &s) in row.iter().enumerate() {
                    if s > row[best] {
                        best = c;
                    }
                }
                assert_eq!(preds[i], m.classes[best], "{:?} row {i}", spec.kind);
            }
        }
    }

    #[test]
    fn determinism_bit_identical() {
        let (data, labels) = toy(30, 5, 2, 8);
        let x = DataView::new(&data, 30, 5);
        for spec in all_specs() {
            let a = train(&spec, x, &labels).unwrap();
            let b = train(&spec, x, &labels).unwrap();
            assert_eq!(a.to_json(), b.to_json(), "{:?}", spec.kind);
        }
    }

    #[test]
    fn knn_k1_training_accuracy_one() {
        let (data, labels) = toy(25, 3, 2, 2);
        let x = DataView::new(&data, 25, 3);
        let spec = LearnerSpec::new(LearnerKind::Knn, 0).with("n_neighbors", HyperValue::Int(1));
        let m = train(&spec, x, &labels).unwrap();
        assert_eq!(m.predict(x).unwrap(), labels);
    }

    #[test]
    fn importance_finds_fully_determining_feature() {
        // feature 0 fully determines the class, others are noise
        let mut rng = crate::rng::stream(12, &[1]);
        let n = 60;
        let d = 6;
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let cls = rng.gen_range(0..2usize);
            let mut row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            row[0] = cls as f64 * 2.0 - 1.0;
            data.extend(row);
            labels.push(format!("c{cls}"));
        }
        let x = DataView::new(&data, n, d);
        for kind in [LearnerKind::LogReg, LearnerKind::RandomForest, LearnerKind::GradientBoost] {
            let spec = LearnerSpec::new(kind, 3);
            let m = train(&spec, x, &labels).unwrap();
            let imp = m.feature_importance().unwrap();
            assert!(imp.weights.iter().all(|&w| w >= 0.0 && w.is_finite()));
            let best =
                (0..d).max_by(|&a, &b| imp.weights[a].partial_cmp(&imp.weights[b]).unwrap()).unwrap();
            assert_eq!(best, 0, "{kind:?}");
        }
    }

    #[test]
    fn knn_and_rbf_svm_have_no_importance() {
        let (data, labels) = toy(20, 3, 2, 4);
        let x = DataView::new(&data, 20, 3);
        let knn = train(&LearnerSpec::new(LearnerKind::Knn, 0), x, &labels).unwrap();
        assert!(knn.feature_importance().is_none());
        let spec = LearnerSpec::new(LearnerKind::Svm, 0).with("kernel", HyperValue::Text("rbf".into()));
        let rbf = train(&spec, x, &labels).unwrap();
        assert!(rbf.feature_importance().is_none());
    }

    #[test]
    fn forest_importance_sums_to_one() {
        let (data, labels) = toy(40, 5, 2, 9);
        let x = DataView::new(&data, 40, 5);
        let m = train(&LearnerSpec::new(LearnerKind::RandomForest, 0), x, &labels).unwrap();
        let imp = m.feature_importance().unwrap();
        assert!((imp.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn width_mismatch_rejected() {
        let (data, labels) = toy(20, 4, 2, 6);
        let x = DataView::new(&data, 20, 4);
        let m = train(&LearnerSpec::new(LearnerKind::LogReg, 0), x, &labels).unwrap();
        let narrow = DataView::new(&data[..20 * 3], 20, 3);
        assert!(matches!(m.predict(narrow), Err(Error::Schema(_))));
    }

    #[test]
    fn single_class_rejected() {
        let (data, _) = toy(10, 2, 2, 7);
        let x = DataView::new(&data, 10, 2);
        let labels = vec!["a".to_string(); 10];
        assert!(matches!(
            train(&LearnerSpec::new(LearnerKind::Svm, 0), x, &labels),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn model_json_roundtrip() {
        let (data, labels) = toy(20, 3, 2, 10);
        let x = DataView::new(&data, 20, 3);
        let m = train(&LearnerSpec::new(LearnerKind::LogReg, 0), x, &labels).unwrap();
        let back = TrainedModel::from_json(&m.to_json()).unwrap();
        assert_eq!(back.predict(x).unwrap(), m.predict(x).unwrap());
    }

    #[test]
    fn unknown_hyperparameter_rejected() {
        let spec = LearnerSpec::new(LearnerKind::Knn, 0).with("banana", HyperValue::Int(1));
        assert!(spec.validate().is_err());
    }
}

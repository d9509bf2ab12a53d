//! Subject feature vectors: eight first-order ROI statistics per quantitative
//! map, TIV-normalized ROI volumes, the canonical 225-feature layout, and
//! cohort z-score normalization.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::volume::LabelMap;

/// Canonical ROI order.
pub const ROIS: [&str; 9] = [
    "sn",
    "rn",
    "stn",
    "lateral_ventricles",
    "thalamus",
    "caudate",
    "putamen",
    "hippocampus",
    "amygdala",
];

/// Canonical map order.
pub const MAPS: [&str; 3] = ["r1", "r2star", "qsm"];

/// Canonical metric order.
pub const METRICS: [&str; 8] = ["mean", "std", "median", "max", "min", "p5", "skewness", "kurtosis"];

pub const N_FEATURES: usize = 9 + 9 * 3 * 8;

/// The fixed 225-entry feature name list: 9 volumes, then ROI-major
/// statistics (map within ROI, metric within map).
pub fn canonical_feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(N_FEATURES);
    for roi in ROIS {
        names.push(format!("{roi}_volume"));
    }
    for roi in ROIS {
        for map in MAPS {
            for metric in METRICS {
                names.push(format!("{roi}_{map}_{metric}"));
            }
        }
    }
    names
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ClassLabel {
    HC,
    PIGD,
    TD,
    Indeterminate,
}

impl ClassLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::HC => "HC",
            ClassLabel::PIGD => "PIGD",
            ClassLabel::TD => "TD",
            ClassLabel::Indeterminate => "Indeterminate",
        }
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "HC" => Ok(ClassLabel::HC),
            "PIGD" => Ok(ClassLabel::PIGD),
            "TD" => Ok(ClassLabel::TD),
            "Indeterminate" => Ok(ClassLabel::Indeterminate),
            other => Err(Error::Schema(format!("unknown class label {other:?}"))),
        }
    }
}

/// First-order statistics of one ROI on one map.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RoiStats {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    pub max: f64,
    pub min: f64,
    pub p5: f64,
    pub skewness: f64,
    pub kurtosis: f64,
    pub n_voxels: usize,
}

impl RoiStats {
    /// Values in the canonical metric order.
    pub fn to_array(&self) -> [f64; 8] {
        [self.mean, self.std, self.median, self.max, self.min, self.p5, self.skewness, self.kurtosis]
    }
}

/// Compute the eight first-order statistics.
///
/// Conventions: population standard deviation (denominator n); median by the
/// even/odd midpoint rule; 5-percentile by linear interpolation at zero-based
/// rank (n-1)*0.05; Fisher-Pearson moment skewness m3/m2^1.5; excess kurtosis
/// m4/m2^2 - 3; zero-variance input yields skewness = kurtosis = 0.
pub fn roi_statistics(values: &[f64]) -> Result<RoiStats> {
    if values.is_empty() {
        return Err(Error::EmptyRoi { roi: "<unnamed>".into() });
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Data(format!("non-finite ROI value {v}")));
    }
    let n = values.len();
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    for &v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let std = m2.sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let p5 = percentile_sorted(&sorted, 0.05);

    Ok(RoiStats {
        mean,
        std,
        median,
        max: sorted[n - 1],
        min: sorted[0],
        p5,
        skewness,
        kurtosis,
        n_voxels: n,
    })
}

fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let rank = (n - 1) as f64 * q;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// ROI volume in mm^3: voxel count times the voxel volume.
pub fn roi_volume(labels: &LabelMap, label: u32) -> Result<f64> {
    let name = labels
        .label_names
        .get(&label)
        .ok_or(Error::UnknownLabel { label, context: "roi_volume".into() })?
        .clone();
    let count = labels.count(label);
    if count == 0 {
        return Err(Error::EmptyRoi { roi: name });
    }
    Ok(count as f64 * labels.voxel_size.iter().product::<f64>())
}

/// Normalize an ROI volume on total intracranial volume; result in mm^3/L.
pub fn normalize_volume_tiv(volume_mm3: f64, tiv_liters: f64) -> Result<f64> {
    if !(tiv_liters > 0.0) {
        return Err(Error::Parameter(format!("TIV must be positive, got {tiv_liters}")));
    }
    Ok(volume_mm3 / tiv_liters)
}

/// One subject's ordered 225-entry feature vector.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SubjectVector {
    pub subject_id: String,
    pub label: ClassLabel,
    pub values: Vec<f64>,
}

/// Assemble the canonical subject vector from TIV-normalized volumes (mm^3/L,
/// keyed by ROI) and per-(ROI, map) statistics.
pub fn build_subject_vector(
    subject_id: &str,
    label: ClassLabel,
    volumes: &BTreeMap<String, f64>,
    stats: &BTreeMap<(String, String), RoiStats>,
) -> Result<SubjectVector> {
    let mut missing = Vec::new();
    for roi in ROIS {
        if !volumes.contains_key(roi) {
            missing.push(format!("{roi}_volume"));
        }
        for map in MAPS {
            if !stats.contains_key(&(roi.to_string(), map.to_string())) {
                missing.push(format!("{roi}_{map}"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::Assembly { subject: subject_id.to_string(), missing });
    }
    let mut values = Vec::with_capacity(N_FEATURES);
    for roi in ROIS {
        values.push(volumes[roi]);
    }
    for roi in ROIS {
        for map in MAPS {
            values.extend(stats[&(roi.to_string(), map.to_string())].to_array());
        }
    }
    Ok(SubjectVector { subject_id: subject_id.to_string(), label, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Normalization {
    Raw,
    Zscored,
}

/// A cohort's stacked subject vectors. Row-major storage.
#[derive(Debug, Clone)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub subject_ids: Vec<String>,
    pub labels: Vec<ClassLabel>,
    pub data: Vec<f64>,
    pub normalization: Normalization,
}

impl FeatureMatrix {
    pub fn from_subjects(rows: Vec<SubjectVector>) -> Result<Self> {
        let names = canonical_feature_names();
        let mut m = FeatureMatrix {
            feature_names: names,
            subject_ids: Vec::new(),
            labels: Vec::new(),
            data: Vec::new(),
            normalization: Normalization::Raw,
        };
        for r in rows {
            if r.values.len() != N_FEATURES {
                return Err(Error::Schema(format!(
                    "subject {} has {} values, expected {N_FEATURES}",
                    r.subject_id,
                    r.values.len()
                )));
            }
            m.subject_ids.push(r.subject_id);
            m.labels.push(r.label);
            m.data.extend(r.values);
        }
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_features();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureMatrix {
        let d = self.n_features();
        let mut out = FeatureMatrix {
            feature_names: self.feature_names.clone(),
            subject_ids: Vec::with_capacity(idx.len()),
            labels: Vec::with_capacity(idx.len()),
            data: Vec::with_capacity(idx.len() * d),
            normalization: self.normalization,
        };
        for &i in idx {
            out.subject_ids.push(self.subject_ids[i].clone());
            out.labels.push(self.labels[i]);
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let n = self.n_rows();
        let mut data = Vec::with_capacity(n * cols.len());
        for i in 0..n {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        FeatureMatrix {
            feature_names: cols.iter().map(|&c| self.feature_names[c].clone()).collect(),
            subject_ids: self.subject_ids.clone(),
            labels: self.labels.clone(),
            data,
            normalization: self.normalization,
        }
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.row(i)[c]).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }
}

/// Per-feature z-score parameters, fitted on one set of rows.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct ZscoreParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Fit per-feature mean and population standard deviation.
pub fn zscore_fit(m: &FeatureMatrix) -> Result<ZscoreParams> {
    let n = m.n_rows();
    if n < 2 {
        return Err(Error::Parameter(format!("z-score fit requires >= 2 rows, got {n}")));
    }
    let d = m.n_features();
    let mut mean = vec![0.0; d];
    let mut std = vec![0.0; d];
    for i in 0..n {
        for (j, &v) in m.row(i).iter().enumerate() {
            mean[j] += v;
        }
    }
    for v in &mut mean {
        *v /= n as f64;
    }
    for i in 0..n {
        for (j, &v) in m.row(i).iter().enumerate() {
            let dv = v - mean[j];
            std[j] += dv * dv;
        }
    }
    for v in &mut std {
        *v = (*v / n as f64).sqrt();
    }
    Ok(ZscoreParams { feature_names: m.feature_names.clone(), mean, std })
}

/// Apply z-score parameters; zero-variance features map to 0.
pub fn zscore_apply(m: &FeatureMatrix, p: &ZscoreParams) -> Result<FeatureMatrix> {
    if m.feature_names != p.feature_names {
        return Err(Error::Schema("z-score params fitted on different feature names".into()));
    }
    let d = m.n_features();
    let mut out = m.clone();
    for i in 0..m.n_rows() {
        for j in 0..d {
            let v = &mut out.data[i * d + j];
            *v = if p.std[j] > 0.0 { (*v - p.mean[j]) / p.std[j] } else { 0.0 };
        }
    }
    out.normalization = Normalization::Zscored;
    Ok(out)
}

// ---------------------------------------------------------------------------
// CSV interchange

/// Serialize as CSV: `subject_id,label,<feature names>` header, one row per
/// subject, full round-trip float precision.
pub fn matrix_to_csv(m: &FeatureMatrix) -> String {
    let mut s = String::new();
    s.push_str("subject_id,label");
    for name in &m.feature_names {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for i in 0..m.n_rows() {
        s.push_str(&m.subject_ids[i]);
        s.push(',');
        s.push_str(m.labels[i].as_str());
        for &v in m.row(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn matrix_from_csv(text: &str) -> Result<FeatureMatrix> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Schema("empty CSV".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("subject_id") || cols.next() != Some("label") {
        return Err(Error::Schema("CSV header must start with subject_id,label".into()));
    }
    let feature_names: Vec<String> = cols.map(str::to_string).collect();
    let d = feature_names.len();
    let mut m = FeatureMatrix {
        feature_names,
        subject_ids: Vec::new(),
        labels: Vec::new(),
        data: Vec::new(),
        normalization: Normalization::Raw,
    };
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let id = parts
            .next()
            .ok_or_else(|| Error::Schema(format!("line {}: missing subject_id", lineno + 2)))?;
        let label: ClassLabel = parts
            .next()
            .ok_or_else(|| Error::Schema(format!("line {}: missing label", lineno + 2)))?
            .parse()?;
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|e| Error::Schema(format!("line {}: bad float {p:?}: {e}", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if values.len() != d {
            return Err(Error::Schema(format!(
                "line {}: {} values, header names {d}",
                lineno + 2,
                values.len()
            )));
        }
        m.subject_ids.push(id.to_string());
        m.labels.push(label);
        m.data.extend(values);
    }
    Ok(m)
}

pub fn write_matrix_csv(path: &Path, m: &FeatureMatrix) -> Result<()> {
    std::fs::write(path, matrix_to_csv(m))?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<FeatureMatrix> {
    matrix_from_csv(&std::fs::read_to_string(path)?)
}

//! Synthetic cohort generator.
//!
//! Per-class, per-ROI distributions follow the published cohort summary
//! table: a subject's ROI volume and map means are drawn from per-class
//! Gaussians, then an in-ROI voxel population is sampled around the subject
//! mean and fed through the real statistics code, so the derived features
//! (std, median, extremes, percentile, shape moments) carry realistic
//! inter-feature correlations instead of independent noise.
//!
//! Two modes: `FeatureTable` emits the feature matrix directly; `Phantom`
//! additionally materializes each subject as three map volumes plus a label
//! map with the nine ROIs as axis-aligned boxes, so the full volumetric
//! extraction pipeline can run end to end.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{
    build_subject_vector, canonical_feature_names, roi_statistics, ClassLabel, FeatureMatrix,
    MAPS, ROIS,
};
use crate::rng;
use crate::volume::{LabelMap, MapIntent, Volume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CohortMode {
    FeatureTable,
    Phantom,
}

/// Per-(class, ROI) generating parameters. Volumes are TIV-normalized
/// (mm^3/L); map units are s^-1 (R1, R2*) and ppb (QSM).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiParams {
    pub volume_mean: f64,
    pub volume_sd: f64,
    pub r1_mean: f64,
    pub r1_sd: f64,
    pub r2star_mean: f64,
    pub r2star_sd: f64,
    pub qsm_mean: f64,
    pub qsm_sd: f64,
}

impl RoiParams {
    pub fn map_mean_sd(&self, map: &str) -> (f64, f64) {
        match map {
            "r1" => (self.r1_mean, self.r1_sd),
            "r2star" => (self.r2star_mean, self.r2star_sd),
            _ => (self.qsm_mean, self.qsm_sd),
        }
    }
}

/// A post-hoc mean shift on one feature for one class, in units of that
/// feature's generating SD (volume SD for volume features, map SD for map
/// statistics, absolute units for the dimensionless shape moments).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedEffect {
    pub feature: String,
    pub class: ClassLabel,
    pub shift_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortConfig {
    /// Subjects per class, ordered HC, PIGD, TD.
    pub n_per_class: [usize; 3],
    /// Keyed by (class, ROI name). Serialized as a row list for JSON.
    #[serde(with = "params_rows")]
    pub params: BTreeMap<(ClassLabel, String), RoiParams>,
    pub injected_effects: Vec<InjectedEffect>,
    pub seed: u64,
    pub mode: CohortMode,
    /// Voxels drawn per ROI population. `None` derives the count from the
    /// drawn volume at 1 mm isotropic resolution and quantizes the volume
    /// feature to it, which makes the two modes agree exactly.
    pub voxels_per_roi: Option<usize>,
}

pub const DEFAULT_VOXELS_PER_ROI: usize = 200;

mod params_rows {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Row {
        class: ClassLabel,
        roi: String,
        #[serde(flatten)]
        params: RoiParams,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(ClassLabel, String), RoiParams>,
        s: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Row> = map
            .iter()
            .map(|((class, roi), p)| Row { class: *class, roi: roi.clone(), params: *p })
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<BTreeMap<(ClassLabel, String), RoiParams>, D::Error> {
        let rows = Vec::<Row>::deserialize(d)?;
        Ok(rows.into_iter().map(|r| ((r.class, r.roi), r.params)).collect())
    }
}

/// One phantom subject: three map volumes sharing a label-map geometry.
#[derive(Debug, Clone)]
pub struct PhantomSubject {
    pub subject_id: String,
    pub r1: Volume,
    pub r2star: Volume,
    pub qsm: Volume,
    pub labels: LabelMap,
    /// TIV in liters matching the volume features (fixed at 1.0).
    pub tiv_liters: f64,
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub matrix: FeatureMatrix,
    pub phantoms: Vec<PhantomSubject>,
}

/// All 27 (class, ROI) parameter rows of the cohort summary table, with
/// volumes converted from 10^3 mm^3/L to mm^3/L, and the published class
/// counts (21 HC, 14 PIGD, 9 TD).
pub fn default_table1_config() -> CohortConfig {
    // (roi, vol_mean, vol_sd, r1 m/sd, r2* m/sd, qsm m/sd); volumes in 10^3
    const HC: [(&str, f64, f64, f64, f64, f64, f64, f64, f64); 9] = [
        ("sn", 0.76, 0.09, 0.71, 0.17, 77.0, 23.0, 78.0, 36.0),
        ("rn", 0.38, 0.05, 0.68, 0.17, 73.0, 19.0, 68.0, 35.0),
        ("stn", 0.15, 0.03, 0.71, 0.14, 68.0, 19.0, 68.0, 29.0),
        ("lateral_ventricles", 18.8, 9.81, 0.30, 0.07, 10.0, 16.0, 7.0, 26.0),
        ("thalamus", 9.81, 0.79, 0.64, 0.07, 40.0, 13.0, 0.0, 28.0),
        ("caudate", 4.88, 0.36, 0.59, 0.05, 46.0, 18.0, 22.0, 31.0),
        ("putamen", 6.70, 0.49, 0.65, 0.04, 56.0, 21.0, 14.0, 41.0),
        ("hippocampus", 5.38, 0.43, 0.57, 0.05, 34.0, 16.0, -1.0, 30.0),
        ("amygdala", 2.24, 0.18, 0.57, 0.04, 33.0, 14.0, -6.0, 31.0),
    ];
    const PIGD: [(&str, f64, f64, f64, f64, f64, f64, f64, f64); 9] = [
        ("sn", 0.72, 0.08, 0.78, 0.19, 79.0, 24.0, 83.0, 40.0),
        ("rn", 0.33, 0.03, 0.74, 0.16, 77.0, 20.0, 74.0, 36.0),
        ("stn", 0.14, 0.02, 0.78, 0.17, 68.0, 19.0, 60.0, 28.0),
        ("lateral_ventricles", 23.5, 11.3, 0.31, 0.07, 9.2, 15.0, 6.0, 24.0),
        ("thalamus", 9.39, 0.63, 0.64, 0.09, 39.0, 12.0, 1.0, 27.0),
        ("caudate", 4.70, 0.42, 0.59, 0.05, 45.0, 17.0, 19.0, 31.0),
        ("putamen", 6.08, 0.62, 0.65, 0.04, 55.0, 20.0, 12.0, 38.0),
        ("hippocampus", 5.16, 0.37, 0.58, 0.05, 35.0, 16.0, 1.0, 27.0),
        ("amygdala", 2.20, 0.25, 0.58, 0.04, 33.0, 14.0, -5.0, 30.0),
    ];
    const TD: [(&str, f64, f64, f64, f64, f64, f64, f64, f64); 9] = [
        ("sn", 0.73, 0.08, 0.75, 0.17, 79.0, 24.0, 87.0, 42.0),
        ("rn", 0.34, 0.02, 0.72, 0.17, 75.0, 19.0, 74.0, 36.0),
        ("stn", 0.14, 0.03, 0.71, 0.13, 67.0, 18.0, 66.0, 28.0),
        ("lateral_ventricles", 20.4, 10.4, 0.31, 0.07, 11.0, 17.0, 6.0, 26.0),
        ("thalamus", 9.51, 0.83, 0.65, 0.07, 40.0, 13.0, 1.0, 29.0),
        ("caudate", 4.83, 0.66, 0.60, 0.05, 47.0, 18.0, 22.0, 32.0),
        ("putamen", 6.20, 0.54, 0.65, 0.04, 55.0, 19.0, 11.0, 40.0),
        ("hippocampus", 5.27, 0.62, 0.58, 0.06, 36.0, 16.0, -1.0, 29.0),
        ("amygdala", 2.12, 0.30, 0.58, 0.04, 33.0, 13.0, -6.0, 30.0),
    ];
    let mut params = BTreeMap::new();
    for (class, rows) in
        [(ClassLabel::HC, &HC), (ClassLabel::PIGD, &PIGD), (ClassLabel::TD, &TD)]
    {
        for &(roi, vm, vs, r1m, r1s, r2m, r2s, qm, qs) in rows.iter() {
            params.insert(
                (class, roi.to_string()),
                RoiParams {
                    volume_mean: vm * 1000.0,
                    volume_sd: vs * 1000.0,
                    r1_mean: r1m,
                    r1_sd: r1s,
                    r2star_mean: r2m,
                    r2star_sd: r2s,
                    qsm_mean: qm,
                    qsm_sd: qs,
                },
            );
        }
    }
    CohortConfig {
        n_per_class: [21, 14, 9],
        params,
        injected_effects: Vec::new(),
        seed: 0,
        mode: CohortMode::FeatureTable,
        voxels_per_roi: Some(DEFAULT_VOXELS_PER_ROI),
    }
}

fn validate(config: &CohortConfig) -> Result<()> {
    let names = canonical_feature_names();
    for e in &config.injected_effects {
        if !names.contains(&e.feature) {
            return Err(Error::Config(format!("injected effect names unknown feature {:?}", e.feature)));
        }
    }
    for class in [ClassLabel::HC, ClassLabel::PIGD, ClassLabel::TD] {
        for roi in ROIS {
            let p = config
                .params
                .get(&(class, roi.to_string()))
                .ok_or_else(|| Error::Config(format!("missing parameters for ({class:?}, {roi})")))?;
            let sds =
                [p.volume_sd, p.r1_sd, p.r2star_sd, p.qsm_sd];
            if sds.iter().any(|&s| !(s >= 0.0)) {
                return Err(Error::Config(format!("negative SD for ({class:?}, {roi})")));
            }
        }
    }
    if let Some(0) = config.voxels_per_roi {
        return Err(Error::Config("voxels_per_roi must be positive".into()));
    }
    Ok(())
}

fn draw_normal(rng: &mut impl Rng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("validated sd").sample(rng)
}

/// SD unit for a post-hoc effect shift on the named feature.
fn effect_scale(config: &CohortConfig, class: ClassLabel, feature: &str) -> f64 {
    for roi in ROIS {
        let p = &config.params[&(class, roi.to_string())];
        if feature == format!("{roi}_volume") {
            return p.volume_sd;
        }
        for map in MAPS {
            if let Some(metric) = feature.strip_prefix(&format!("{roi}_{map}_")) {
                if metric == "skewness" || metric == "kurtosis" {
                    return 1.0; // dimensionless shape moments shift in absolute units
                }
                return p.map_mean_sd(map).1;
            }
        }
    }
    1.0
}

struct SubjectDraw {
    vector: crate::features::SubjectVector,
    /// Voxel populations per ROI per map, for phantom materialization.
    voxels: Vec<[Vec<f64>; 3]>,
    n_vox: Vec<usize>,
}

fn draw_subject(config: &CohortConfig, class: ClassLabel, index: usize) -> Result<SubjectDraw> {
    let mut rng = rng::stream(config.seed, &[0x636f686f, index as u64]);
    let mut volumes = BTreeMap::new();
    let mut stats = BTreeMap::new();
    let mut voxels = Vec::with_capacity(ROIS.len());
    let mut n_vox_all = Vec::with_capacity(ROIS.len());
    for roi in ROIS {
        let p = &config.params[&(class, roi.to_string())];
        let vol_raw = draw_normal(&mut rng, p.volume_mean, p.volume_sd).max(1.0);
        let (n_vox, vol_feature) = match (config.mode, config.voxels_per_roi) {
            (CohortMode::FeatureTable, Some(k)) => (k, vol_raw),
            // derive the voxel count from the volume at 1 mm^3 voxels and
            // quantize the feature to it, so phantom extraction agrees
            _ => {
                let n = vol_raw.round().max(1.0) as usize;
                (n, n as f64)
            }
        };
        volumes.insert(roi.to_string(), vol_feature);
        let mut roi_voxels: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
        for (m, map) in MAPS.iter().enumerate() {
            let (mean, sd) = p.map_mean_sd(map);
            let subj_mean = draw_normal(&mut rng, mean, sd);
            let pop: Vec<f64> = (0..n_vox).map(|_| draw_normal(&mut rng, subj_mean, sd)).collect();
            stats.insert((roi.to_string(), map.to_string()), roi_statistics(&pop)?);
            roi_voxels[m] = pop;
        }
        voxels.push(roi_voxels);
        n_vox_all.push(n_vox);
    }
    let id = format!("{}_{index:03}", class.as_str().to_lowercase());
    let mut vector = build_subject_vector(&id, class, &volumes, &stats)?;
    let names = canonical_feature_names();
    for e in &config.injected_effects {
        if e.class == class {
            let j = names.iter().position(|n| n == &e.feature).unwrap();
            vector.values[j] += e.shift_sd * effect_scale(config, class, &e.feature);
        }
    }
    Ok(SubjectDraw { vector, voxels, n_vox: n_vox_all })
}

/// Box side of the phantom cross-section (voxels).
const SLAB: usize = 64;

fn build_phantom(id: &str, draw: &SubjectDraw) -> Result<PhantomSubject> {
    // one axis-aligned slab per ROI, stacked along z with a gap slice
    let slices: Vec<usize> =
        draw.n_vox.iter().map(|&n| n.div_ceil(SLAB * SLAB)).collect();
    let nz: usize = slices.iter().sum::<usize>() + ROIS.len();
    let dims = [SLAB, SLAB, nz];
    let total = SLAB * SLAB * nz;
    let mut label_data = vec![0u32; total];
    let mut maps = [vec![0.0; total], vec![0.0; total], vec![0.0; total]];
    let mut z0 = 0usize;
    for (r, _) in ROIS.iter().enumerate() {
        let base = z0 * SLAB * SLAB;
        for v in 0..draw.n_vox[r] {
            label_data[base + v] = (r + 1) as u32;
            for m in 0..3 {
                maps[m][base + v] = draw.voxels[r][m][v];
            }
        }
        z0 += slices[r] + 1;
    }
    let names: BTreeMap<u32, String> =
        ROIS.iter().enumerate().map(|(r, roi)| ((r + 1) as u32, roi.to_string())).collect();
    let voxel = [1.0, 1.0, 1.0];
    let [r1, r2star, qsm] = maps;
    Ok(PhantomSubject {
        subject_id: id.to_string(),
        r1: Volume::new(dims, voxel, r1, MapIntent::R1)?,
        r2star: Volume::new(dims, voxel, r2star, MapIntent::R2Star)?,
        qsm: Volume::new(dims, voxel, qsm, MapIntent::Qsm)?,
        labels: LabelMap::new(dims, voxel, label_data, names)?,
        tiv_liters: 1.0,
    })
}

/// Generate a cohort. Deterministic per (config, seed); subjects are ordered
/// HC block, PIGD block, TD block, indexed across the whole cohort.
pub fn generate(config: &CohortConfig) -> Result<Cohort> {
    validate(config)?;
    let mut rows = Vec::new();
    let mut phantoms = Vec::new();
    let mut index = 0usize;
    for (c, class) in [ClassLabel::HC, ClassLabel::PIGD, ClassLabel::TD].into_iter().enumerate() {
        for _ in 0..config.n_per_class[c] {
            let draw = draw_subject(config, class, index)?;
            if config.mode == CohortMode::Phantom {
                phantoms.push(build_phantom(&draw.vector.subject_id, &draw)?);
            }
            rows.push(draw.vector);
            index += 1;
        }
    }
    if rows.is_empty() {
        return Err(Error::Config("cohort has zero subjects".into()));
    }
    Ok(Cohort { matrix: FeatureMatrix::from_subjects(rows)?, phantoms })
}

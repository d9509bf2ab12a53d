//! End-to-end acceptance suite. Each test prints one `criterion N: PASS`
//! line (run with `--nocapture` to see them on success).

use std::collections::BTreeMap;
use std::process::Command;

use rand::Rng;

use qstrat_core::features::{
    canonical_feature_names, roi_statistics, ClassLabel, FeatureMatrix,
};
use qstrat_core::learners::svm::{solve_smo, Kernel};
use qstrat_core::learners::{train, DataView, HyperValue, LearnerKind, LearnerSpec};
use qstrat_core::metrics::{auc_binary, auc_ovr_macro, ScoreSet};
use qstrat_core::modelsel::{run_approach_a, stratified_kfold, CvOptions, Grid, Task};
use qstrat_core::subset::{
    exhaustive_subset_search, rank_features_by_auc, run_approach_b, top_pool, SubsetOptions,
};
use qstrat_core::synth::{
    default_table1_config, generate, CohortConfig, CohortMode, InjectedEffect,
};
use qstrat_core::volume::{dice, LabelMap};

const BIN: &str = env!("CARGO_BIN_EXE_qstrat");

fn floats(values: &[f64]) -> Vec<HyperValue> {
    values.iter().map(|&v| HyperValue::Float(v)).collect()
}

fn ints(values: &[i64]) -> Vec<HyperValue> {
    values.iter().map(|&v| HyperValue::Int(v)).collect()
}

fn texts(values: &[&str]) -> Vec<HyperValue> {
    values.iter().map(|&v| HyperValue::Text(v.to_string())).collect()
}

fn grid(kind: LearnerKind, axes: &[(&str, Vec<HyperValue>)]) -> Grid {
    let candidates: BTreeMap<String, Vec<HyperValue>> =
        axes.iter().map(|(n, v)| (n.to_string(), v.clone())).collect();
    Grid { kind, candidates }
}

/// Cheap single-core grids for the statistical criteria; grid size is not
/// under test there, the harness is.
fn tiny_grids() -> Vec<Grid> {
    vec![
        grid(
            LearnerKind::Svm,
            &[
                ("c", floats(&[1.0])),
                ("kernel", texts(&["linear", "rbf"])),
                ("gamma", texts(&["scale"])),
            ],
        ),
        grid(LearnerKind::LogReg, &[("penalty", texts(&["l2"])), ("c", floats(&[1.0]))]),
        grid(
            LearnerKind::RandomForest,
            &[("n_trees", ints(&[50])), ("max_depth", ints(&[5]))],
        ),
        grid(
            LearnerKind::GradientBoost,
            &[("n_trees", ints(&[50])), ("max_depth", ints(&[3]))],
        ),
        grid(LearnerKind::Knn, &[("n_neighbors", ints(&[5]))]),
    ]
}

/// All classes share the HC parameter rows: a true null cohort.
fn null_config() -> CohortConfig {
    let mut c = default_table1_config();
    let rois: Vec<String> = qstrat_core::features::ROIS.iter().map(|r| r.to_string()).collect();
    for roi in &rois {
        let hc = c.params[&(ClassLabel::HC, roi.clone())];
        c.params.insert((ClassLabel::PIGD, roi.clone()), hc);
        c.params.insert((ClassLabel::TD, roi.clone()), hc);
    }
    c
}

fn run_bin(args: &[&str]) -> std::process::Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_feature_vector_structure() {
    let names = canonical_feature_names();
    assert_eq!(names.len(), 225);
    assert_eq!(names[0], "sn_volume");
    assert_eq!(names[9], "sn_r1_mean");
    assert_eq!(names[224], "amygdala_qsm_kurtosis");

    // end to end through the binary: phantom cohort, then extraction
    let dir = tempfile::tempdir().unwrap();
    let mut config = default_table1_config();
    config.n_per_class = [1, 0, 0];
    config.mode = CohortMode::Phantom;
    config.voxels_per_roi = None;
    let cfg_path = dir.path().join("cohort.json");
    std::fs::write(&cfg_path, serde_json::to_string(&config).unwrap()).unwrap();
    let out = dir.path().join("cohort");
    let st = run_bin(&[
        "cohort",
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "7",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));

    let feat = dir.path().join("extracted.csv");
    let st = run_bin(&[
        "extract",
        "--subject-id",
        "hc_000",
        "--class-label",
        "HC",
        "--r1",
        out.join("hc_000.r1.nii").to_str().unwrap(),
        "--r2star",
        out.join("hc_000.r2star.nii").to_str().unwrap(),
        "--qsm",
        out.join("hc_000.qsm.nii").to_str().unwrap(),
        "--labels",
        out.join("hc_000.labels.nii").to_str().unwrap(),
        "--tiv",
        "1.0",
        "--out",
        feat.to_str().unwrap(),
    ]);
    assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    let text = std::fs::read_to_string(&feat).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 227);
    assert_eq!(&header[2..], &names.iter().map(|s| s.as_str()).collect::<Vec<_>>()[..]);
    assert_eq!(text.lines().count(), 2);
    println!("criterion 1: PASS — 225 canonical features, extraction end to end");
}

#[test]
fn criterion_02_statistics_oracle() {
    fn oracle(values: &[f64]) -> [f64; 8] {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let m3 = values.iter().map(|v| (v - mean).powi(3)).sum::<f64>() / n;
        let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
        let std = m2.sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        let rank = (n - 1.0) * 0.05;
        let lo = rank.floor() as usize;
        let p5 = if lo + 1 < sorted.len() {
            sorted[lo] + (rank - lo as f64) * (sorted[lo + 1] - sorted[lo])
        } else {
            sorted[lo]
        };
        let skew = if m2 > 0.0 { m3 / m2.powf(1.5) } else { 0.0 };
        let kurt = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };
        [mean, std, median, sorted[sorted.len() - 1], sorted[0], p5, skew, kurt]
    }

    let mut rng = qstrat_core::rng::stream(2024, &[2]);
    for case in 0..1000 {
        let n = rng.gen_range(1..=10_000);
        let scale = 10f64.powi(rng.gen_range(-2..4));
        let values: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0) * scale).collect();
        let got = roi_statistics(&values).unwrap().to_array();
        let want = oracle(&values);
        for (j, (a, b)) in got.iter().zip(&want).enumerate() {
            assert!(
                (a - b).abs() <= 1e-9 * (1.0 + b.abs()),
                "case {case} stat {j}: {a} vs {b}"
            );
        }
    }
    println!("criterion 2: PASS — 8 ROI statistics match direct-definition oracle, 1000 cases");
}

#[test]
fn criterion_03_auc_oracle() {
    fn pairwise(scores: &[f64], truth: &[bool]) -> f64 {
        let pos: Vec<f64> =
            scores.iter().zip(truth).filter(|(_, &t)| t).map(|(&s, _)| s).collect();
        let neg: Vec<f64> =
            scores.iter().zip(truth).filter(|(_, &t)| !t).map(|(&s, _)| s).collect();
        let mut total = 0.0;
        for &p in &pos {
            for &q in &neg {
                total += if p > q {
                    1.0
                } else if p == q {
                    0.5
                } else {
                    0.0
                };
            }
        }
        total / (pos.len() * neg.len()) as f64
    }

    let mut rng = qstrat_core::rng::stream(99, &[3]);
    for case in 0..1000 {
        let n = rng.gen_range(4..=200);
        // coarse quantization forces plenty of ties
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen_range(0.0f64..1.0) * 8.0).round()).collect();
        let mut truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        truth[0] = true;
        truth[1] = false;
        let got = auc_binary(&scores, &truth).unwrap();
        let want = pairwise(&scores, &truth);
        assert!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
    }

    // OvR macro = mean of per-class binary AUCs
    let mut rng = qstrat_core::rng::stream(100, &[3]);
    for _ in 0..50 {
        let n = 60;
        let classes = vec!["a".to_string(), "b".to_string(), "c".to_string()];
        let labels: Vec<String> = (0..n).map(|i| classes[i % 3].clone()).collect();
        let scores: Vec<f64> = (0..n * 3).map(|_| rng.gen_range(0.0..1.0)).collect();
        let set = ScoreSet { classes: classes.clone(), scores: scores.clone(), labels: labels.clone() };
        let (macro_auc, _) = auc_ovr_macro(&set).unwrap();
        let mut mean = 0.0;
        for (c, class) in classes.iter().enumerate() {
            let col: Vec<f64> = (0..n).map(|i| scores[i * 3 + c]).collect();
            let truth: Vec<bool> = labels.iter().map(|l| l == class).collect();
            mean += auc_binary(&col, &truth).unwrap() / 3.0;
        }
        assert!((macro_auc - mean).abs() <= 1e-12);
    }
    println!("criterion 3: PASS — trapezoidal AUC matches pairwise oracle; OvR macro is class mean");
}

#[test]
fn criterion_04_dice_identities() {
    let dims = [3, 3, 1];
    let vx = [1.0, 1.0, 1.0];
    let a = LabelMap::new(dims, vx, vec![1, 1, 0, 0, 0, 0, 0, 0, 0], BTreeMap::new()).unwrap();
    let b = LabelMap::new(dims, vx, vec![0, 1, 1, 0, 0, 0, 0, 0, 0], BTreeMap::new()).unwrap();
    let c = LabelMap::new(dims, vx, vec![0, 0, 0, 1, 1, 0, 0, 0, 0], BTreeMap::new()).unwrap();
    assert_eq!(dice(&a, &a, 1).unwrap(), 1.0);
    assert_eq!(dice(&a, &c, 1).unwrap(), 0.0);
    // |A|=2, |B|=2, overlap 1 → 2*1/(2+2) = 0.5
    assert_eq!(dice(&a, &b, 1).unwrap(), 0.5);
    println!("criterion 4: PASS — dice identities exact");
}

#[test]
fn criterion_05_subset_search_oracle() {
    let n = 60;
    let labels: Vec<ClassLabel> =
        (0..n).map(|i| if i % 2 == 0 { ClassLabel::PIGD } else { ClassLabel::TD }).collect();
    let mut rng = qstrat_core::rng::stream(55, &[5]);
    let d = 10;
    let mut data = Vec::new();
    for l in &labels {
        let cls = (*l == ClassLabel::TD) as usize as f64;
        let mut row: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        row[1] += cls * 1.5;
        row[6] -= cls * 1.0;
        data.extend(row);
    }
    let m = FeatureMatrix {
        feature_names: (0..d).map(|j| format!("f{j}")).collect(),
        subject_ids: (0..n).map(|i| format!("s{i}")).collect(),
        labels,
        data,
        normalization: qstrat_core::features::Normalization::Raw,
    };
    let strs: Vec<String> = m.labels.iter().map(|l| l.as_str().to_string()).collect();
    let task = Task::PigdVsTd;
    let x = DataView::new(&m.data, n, d);
    let ranked = rank_features_by_auc(x, &m.feature_names, &strs).unwrap();
    let pool = top_pool(&ranked, 8);
    let opts = SubsetOptions { pool_size: 8, ..SubsetOptions::default() };
    let seed = 5u64;
    let (best, table) =
        exhaustive_subset_search(&m, &strs, task, &pool, seed, &opts, false).unwrap();
    assert_eq!(table.len(), 255);

    // naive sequential reimplementation from public pieces
    let spec = LearnerSpec::new(LearnerKind::Svm, 0)
        .with("kernel", HyperValue::Text("linear".into()))
        .with("c", HyperValue::Float(1.0));
    let idx = pool.indices();
    let mut oracle_best: Option<(u64, usize, f64)> = None;
    for mask in 1u64..=255 {
        let cols: Vec<usize> =
            (0..8).filter(|&b| mask & (1 << b) != 0).map(|b| idx[b]).collect();
        let sel = m.select_columns(&cols);
        let plan =
            stratified_kfold(&strs, 5, qstrat_core::rng::stream_tag(seed, &[mask])).unwrap();
        let mut aucs = Vec::new();
        for fold in 0..5 {
            let tr_idx = plan.train_indices(fold);
            let te_idx = &plan.test[fold];
            let tr_m = sel.select_rows(&tr_idx);
            let te_m = sel.select_rows(te_idx);
            let zp = qstrat_core::features::zscore_fit(&tr_m).unwrap();
            let tr_z = qstrat_core::features::zscore_apply(&tr_m, &zp).unwrap();
            let te_z = qstrat_core::features::zscore_apply(&te_m, &zp).unwrap();
            let tr_l: Vec<String> = tr_idx.iter().map(|&i| strs[i].clone()).collect();
            let te_l: Vec<String> = te_idx.iter().map(|&i| strs[i].clone()).collect();
            let model = train(
                &spec,
                DataView::new(&tr_z.data, tr_z.n_rows(), tr_z.n_features()),
                &tr_l,
            )
            .unwrap();
            let scores = model
                .decision_scores(DataView::new(&te_z.data, te_z.n_rows(), te_z.n_features()))
                .unwrap();
            let set =
                ScoreSet { classes: model.classes.clone(), scores, labels: te_l.clone() };
            let (margins, t) = set.binary_margins().unwrap();
            aucs.push(auc_binary(&margins, &t).unwrap());
        }
        let mean = aucs.iter().sum::<f64>() / 5.0;
        let n_feat = cols.len();
        let entry = table.iter().find(|s| s.bitmask == mask).unwrap();
        assert!(
            (entry.mean_auc - mean).abs() <= 1e-12,
            "mask {mask}: {} vs {mean}",
            entry.mean_auc
        );
        let better = match oracle_best {
            None => true,
            Some((bm, bf, ba)) => {
                mean > ba
                    || (mean == ba && (n_feat < bf || (n_feat == bf && mask < bm)))
            }
        };
        if better {
            oracle_best = Some((mask, n_feat, mean));
        }
    }
    let (om, of, oa) = oracle_best.unwrap();
    assert_eq!((best.bitmask, best.n_features), (om, of));
    assert!((best.mean_auc - oa).abs() <= 1e-12);

    // p = 12: full table has 4095 entries
    let d2 = 12;
    let mut data2 = Vec::new();
    let mut rng2 = qstrat_core::rng::stream(56, &[5]);
    for l in &m.labels {
        let cls = (*l == ClassLabel::TD) as usize as f64;
        let mut row: Vec<f64> = (0..d2).map(|_| rng2.gen_range(-1.0..1.0)).collect();
        row[0] += cls;
        data2.extend(row);
    }
    let m2 = FeatureMatrix {
        feature_names: (0..d2).map(|j| format!("g{j}")).collect(),
        subject_ids: m.subject_ids.clone(),
        labels: m.labels.clone(),
        data: data2,
        normalization: qstrat_core::features::Normalization::Raw,
    };
    let x2 = DataView::new(&m2.data, n, d2);
    let ranked2 = rank_features_by_auc(x2, &m2.feature_names, &strs).unwrap();
    let pool2 = top_pool(&ranked2, 12);
    let opts2 = SubsetOptions { pool_size: 12, ..SubsetOptions::default() };
    let (_, table2) =
        exhaustive_subset_search(&m2, &strs, task, &pool2, 1, &opts2, false).unwrap();
    assert_eq!(table2.len(), 4095);
    println!("criterion 5: PASS — subset search matches sequential oracle (p=8); p=12 table = 4095");
}

#[test]
fn criterion_06_stratification_and_task_aucs() {
    let mut labels = Vec::new();
    labels.extend(std::iter::repeat("HC".to_string()).take(21));
    labels.extend(std::iter::repeat("PIGD".to_string()).take(14));
    labels.extend(std::iter::repeat("TD".to_string()).take(9));
    for seed in 0..20 {
        let plan = stratified_kfold(&labels, 5, seed).unwrap();
        for class in ["HC", "PIGD", "TD"] {
            let counts: Vec<usize> = plan
                .test
                .iter()
                .map(|f| f.iter().filter(|&&i| labels[i] == class).count())
                .collect();
            let (lo, hi) = (*counts.iter().min().unwrap(), *counts.iter().max().unwrap());
            assert!(hi - lo <= 1, "seed {seed} class {class}: {counts:?}");
        }
    }

    let mut config = default_table1_config();
    config.seed = 11;
    let cohort = generate(&config).unwrap();
    let knn_grid = &tiny_grids()[4];
    for task in [Task::HcVsPwp, Task::PigdVsTd, Task::ThreeClass] {
        let r = run_approach_a(&cohort.matrix, task, knn_grid, 17, &CvOptions::default()).unwrap();
        for f in &r.folds {
            assert!(f.auc.is_finite(), "task {:?} fold {} AUC undefined", task, f.fold);
        }
    }
    println!("criterion 6: PASS — fold stratification balanced; all tasks yield defined fold AUCs");
}

#[test]
fn criterion_07_learner_correctness() {
    // LogReg vs slow gradient-descent oracle
    let mut rng = qstrat_core::rng::stream(7, &[7]);
    let n = 50;
    let d = 4;
    let mut data = Vec::new();
    let mut y = Vec::new();
    let mut labels = Vec::new();
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let z = row[0] - 0.5 * row[1] + rng.gen_range(-0.3..0.3);
        y.push(if z > 0.0 { 1.0 } else { -1.0 });
        labels.push(if z > 0.0 { "p".to_string() } else { "n".to_string() });
        data.extend(row);
    }
    let c = 1.0;
    let spec = LearnerSpec::new(LearnerKind::LogReg, 0)
        .with("penalty", HyperValue::Text("l2".into()))
        .with("c", HyperValue::Float(c));
    let model = train(&spec, DataView::new(&data, n, d), &labels).unwrap();
    let imp = model.feature_importance().unwrap();
    // oracle: plain gradient descent with backtracking on the same objective,
    // head for the sorted-second class ("p"), run to tight tolerance
    let (wo, _) = {
        let mut w = vec![0.0; d];
        let mut b = 0.0;
        let mut step = 1e-2;
        let obj = |w: &[f64], b: f64| -> f64 {
            let mut loss = 0.0;
            for i in 0..n {
                let z = b + w.iter().zip(&data[i * d..(i + 1) * d]).map(|(w, x)| w * x).sum::<f64>();
                let t = -y[i] * z;
                loss += if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
            }
            loss + w.iter().map(|v| v * v).sum::<f64>() / (2.0 * c)
        };
        for _ in 0..200_000 {
            let mut gw = vec![0.0; d];
            let mut gb = 0.0;
            for i in 0..n {
                let row = &data[i * d..(i + 1) * d];
                let z = b + w.iter().zip(row).map(|(w, x)| w * x).sum::<f64>();
                let p = 1.0 / (1.0 + (y[i] * z).exp());
                for j in 0..d {
                    gw[j] += -y[i] * p * row[j];
                }
                gb += -y[i] * p;
            }
            for j in 0..d {
                gw[j] += w[j] / c;
            }
            let f0 = obj(&w, b);
            loop {
                let wt: Vec<f64> = w.iter().zip(&gw).map(|(w, g)| w - step * g).collect();
                let bt = b - step * gb;
                if obj(&wt, bt) <= f0 || step < 1e-14 {
                    w = wt;
                    b = bt;
                    break;
                }
                step *= 0.5;
            }
            step *= 1.1;
            if (gb * gb + gw.iter().map(|g| g * g).sum::<f64>()).sqrt() < 1e-10 {
                break;
            }
        }
        (w, b)
    };
    // the "p" head weights equal the oracle; importance averages |w| of the
    // two symmetric heads, so it equals |w| as well
    for j in 0..d {
        assert!(
            (imp.weights[j] - wo[j].abs()).abs() < 1e-4,
            "feature {j}: {} vs {}",
            imp.weights[j],
            wo[j].abs()
        );
    }

    // SVM dual feasibility + KKT gap for all kernels
    let targets: Vec<f64> = y.clone();
    for kernel in
        [Kernel::Linear, Kernel::Rbf { gamma: 0.3 }, Kernel::Poly { gamma: 0.3, degree: 2 }]
    {
        let mut kmat = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                kmat[i * n + j] =
                    kernel.eval(&data[i * d..(i + 1) * d], &data[j * d..(j + 1) * d]);
            }
        }
        let (alpha, _, gap) = solve_smo(&kmat, &targets, 2.0, 1e-3).unwrap();
        assert!(alpha.iter().all(|&a| (-1e-9..=2.0 + 1e-9).contains(&a)));
        assert!(gap < 1e-3, "gap {gap}");
    }

    // single-tree forest (no bootstrap, all features) equals a CART oracle:
    // covered exhaustively in the library's unit suite; spot-check accuracy
    let rf = LearnerSpec::new(LearnerKind::RandomForest, 0)
        .with("n_trees", HyperValue::Int(1))
        .with("bootstrap", HyperValue::Int(0))
        .with("max_features", HyperValue::Text("all".into()));
    let rf_model = train(&rf, DataView::new(&data, n, d), &labels).unwrap();
    let preds = rf_model.predict(DataView::new(&data, n, d)).unwrap();
    assert_eq!(preds, labels, "a single unrestricted CART must fit training data");

    // KNN k=1 training accuracy 1.0
    let knn = LearnerSpec::new(LearnerKind::Knn, 0).with("n_neighbors", HyperValue::Int(1));
    let knn_model = train(&knn, DataView::new(&data, n, d), &labels).unwrap();
    assert_eq!(knn_model.predict(DataView::new(&data, n, d)).unwrap(), labels);
    println!("criterion 7: PASS — LogReg matches GD oracle; SVM KKT-feasible; CART/KNN exact");
}

#[test]
fn criterion_08_table1_fidelity() {
    let mut config = default_table1_config();
    config.n_per_class = [100, 100, 100];
    config.seed = 2028;
    let cohort = generate(&config).unwrap();
    let m = &cohort.matrix;
    let class_rows = |class: ClassLabel| -> Vec<usize> {
        (0..m.n_rows()).filter(|&i| m.labels[i] == class).collect()
    };
    let mut checked = 0;
    for class in [ClassLabel::HC, ClassLabel::PIGD, ClassLabel::TD] {
        let rows = class_rows(class);
        for roi in qstrat_core::features::ROIS {
            let p = config.params[&(class, roi.to_string())];
            let mut targets = vec![(format!("{roi}_volume"), p.volume_mean, p.volume_sd)];
            for map in qstrat_core::features::MAPS {
                let (mean, sd) = p.map_mean_sd(map);
                targets.push((format!("{roi}_{map}_mean"), mean, sd));
            }
            for (name, target, sd) in targets {
                let j = m.feature_index(&name).unwrap();
                let sum: f64 = rows.iter().map(|&i| m.row(i)[j]).sum();
                let sample_mean = sum / rows.len() as f64;
                assert!(
                    (sample_mean - target).abs() <= 3.0 * sd / 10.0,
                    "{class:?} {name}: {sample_mean} vs {target} (sd {sd})"
                );
                checked += 1;
            }
        }
    }
    assert_eq!(checked, 108); // 27 volume rows + 81 map rows
    println!("criterion 8: PASS — all 108 per-class generated means within 3·SD/√100 of targets");
}

#[test]
fn criterion_09_subset_selection_beats_all_features() {
    let injected = ["sn_qsm_mean", "rn_r2star_mean", "putamen_r1_mean", "hippocampus_qsm_mean"];
    let svm_grid = grid(
        LearnerKind::Svm,
        &[("c", floats(&[0.01, 0.1, 1.0, 10.0, 100.0])), ("kernel", texts(&["linear"]))],
    );
    let mut wins = 0;
    for seed in 0..20u64 {
        let mut config = null_config();
        config.seed = 1000 + seed;
        for class in [ClassLabel::PIGD, ClassLabel::TD] {
            for f in injected {
                config.injected_effects.push(InjectedEffect {
                    feature: f.to_string(),
                    class,
                    shift_sd: 1.5,
                });
            }
        }
        let cohort = generate(&config).unwrap();
        let a = run_approach_a(
            &cohort.matrix,
            Task::HcVsPwp,
            &svm_grid,
            seed,
            &CvOptions::default(),
        )
        .unwrap();
        let b = run_approach_b(
            &cohort.matrix,
            Task::HcVsPwp,
            seed,
            &SubsetOptions::default(),
            false,
        )
        .unwrap();
        if b.best.mean_auc > a.mean_auc {
            wins += 1;
        }
    }
    assert!(wins >= 18, "subset search won only {wins}/20 seeds");
    println!("criterion 9: PASS — subset search beat all-features linear SVM in {wins}/20 seeds");
}

#[test]
fn criterion_10_null_calibration() {
    let grids = tiny_grids();
    let mut ok = vec![0usize; grids.len()];
    for seed in 0..20u64 {
        let mut config = null_config();
        // doubled cohort keeps the null fold-mean AUC sampling noise well
        // inside the tolerance band
        config.n_per_class = [42, 28, 18];
        config.seed = 9000 + seed;
        let cohort = generate(&config).unwrap();
        for (g, grid) in grids.iter().enumerate() {
            let r = run_approach_a(
                &cohort.matrix,
                Task::HcVsPwp,
                grid,
                seed,
                &CvOptions::default(),
            )
            .unwrap();
            if (0.3..=0.7).contains(&r.mean_auc) {
                ok[g] += 1;
            }
        }
    }
    for (g, grid) in grids.iter().enumerate() {
        assert!(
            ok[g] >= 19,
            "{:?}: null AUC in [0.3, 0.7] in only {}/20 seeds",
            grid.kind,
            ok[g]
        );
    }
    println!("criterion 10: PASS — null-cohort fold-mean AUC within [0.3, 0.7] for every learner");
}

#[test]
fn criterion_11_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cohort_a = dir.path().join("ca");
    let cohort_b = dir.path().join("cb");
    for (out, threads) in [(&cohort_a, "1"), (&cohort_b, "2")] {
        let st = run_bin(&[
            "cohort",
            "--table1-defaults",
            "--seed",
            "31",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    let fa = std::fs::read(cohort_a.join("features.csv")).unwrap();
    let fb = std::fs::read(cohort_b.join("features.csv")).unwrap();
    assert_eq!(fa, fb, "cohort output differs across runs/threads");

    let run_a = dir.path().join("ra");
    let run_b = dir.path().join("rb");
    for (out, threads) in [(&run_a, "1"), (&run_b, "2")] {
        let st = run_bin(&[
            "run",
            "--task",
            "2",
            "--approach",
            "B",
            "--features",
            cohort_a.join("features.csv").to_str().unwrap(),
            "--seed",
            "31",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(st.status.success(), "{}", String::from_utf8_lossy(&st.stderr));
    }
    for file in ["report.json", "summary.csv", "subsets.csv", "roc_mean.csv"] {
        let a = std::fs::read(run_a.join(file)).unwrap();
        let b = std::fs::read(run_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs across runs/threads");
    }
    println!("criterion 11: PASS — byte-identical outputs across repeat runs and thread counts");
}

//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bargecast::ais::{clean_records, AisRecord};
use bargecast::dataprep::{smote_augment, stratified_kfold, BargeClassMap};
use bargecast::features::{recompute_derived, Feature, N_FEATURES, ONE_HOT_GROUPS};
use bargecast::geo::{haversine_km, GeoPoint};
use bargecast::learners::{AdaBoost, AdaBoostParams, Gbdt, GbdtParams, LearnerSpec, Matrix, RandomForestParams, RegNode};
use bargecast::matching::read_dataset_file;
use bargecast::metrics::{build_report, roc_auc_binary, ReportContext};
use bargecast::pipeline::{
    run_training, segment_sensitivity, transfer_run, write_synthetic, PipelineConfig, SyntheticScenario,
};
use bargecast::tuning::{
    rfe_select, tpe_optimize, Evaluation, HyperparameterSpace, ParamDef, ParamKind, RfeConfig, TpeConfig,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// 1. Metrics against brute-force counting.
fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(1..=60);
        let t: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let p: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
        let names: Vec<String> = (0..k).map(|c| c.to_string()).collect();
        let r = build_report(&ReportContext::default(), &names, &t, &p, None).expect("report");
        let mut wf1 = 0.0;
        for c in 0..k {
            let tp = (0..n).filter(|&i| t[i] == c && p[i] == c).count() as f64;
            let fp = (0..n).filter(|&i| t[i] != c && p[i] == c).count() as f64;
            let fnn = (0..n).filter(|&i| t[i] == c && p[i] != c).count() as f64;
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
            let f1 = if tp > 0.0 { 2.0 * tp / (2.0 * tp + fp + fnn) } else { 0.0 };
            let s = &r.per_class[c].scores;
            worst = worst.max((s.precision - prec).abs()).max((s.recall - rec).abs()).max((s.f1 - f1).abs());
            wf1 += (tp + fnn) * f1 / n as f64;
        }
        let acc = (0..n).filter(|&i| t[i] == p[i]).count() as f64 / n as f64;
        worst = worst.max((r.weighted.f1 - wf1).abs()).max((r.accuracy - acc).abs());
    }
    let mut auc_mismatch = 0;
    for _ in 0..1000 {
        let n = rng.random_range(2..=50);
        let mut y: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        y[0] = true;
        y[1] = false;
        // Coarse scores force plenty of ties.
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64 / 4.0).collect();
        let mut twice = 0u64;
        for i in 0..n {
            for j in 0..n {
                if y[i] && !y[j] {
                    twice += if s[i] > s[j] { 2 } else if s[i] == s[j] { 1 } else { 0 };
                }
            }
        }
        let np = y.iter().filter(|&&v| v).count() as u64;
        let oracle = twice as f64 / (2 * np * (n as u64 - np)) as f64;
        if roc_auc_binary(&y, &s).expect("auc") != oracle {
            auc_mismatch += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-12 && auc_mismatch == 0 && secs < 10.0,
        format!("max metric deviation {worst:.2e}, AUC mismatches {auc_mismatch}/1000, {secs:.2} s"),
    )
}

// Central angle from 3-D unit vectors; shares no code with the haversine form.
fn vector_great_circle_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let v = |p: GeoPoint| {
        let (la, lo) = (p.lat.to_radians(), p.lon.to_radians());
        [la.cos() * lo.cos(), la.cos() * lo.sin(), la.sin()]
    };
    let (u, w) = (v(a), v(b));
    let cross = [u[1] * w[2] - u[2] * w[1], u[2] * w[0] - u[0] * w[2], u[0] * w[1] - u[1] * w[0]];
    let dot = u[0] * w[0] + u[1] * w[1] + u[2] * w[2];
    6371.0 * (cross.iter().map(|c| c * c).sum::<f64>().sqrt()).atan2(dot)
}

// 2. Haversine on fixed pairs.
fn haversine_pairs() -> Outcome {
    let g = GeoPoint::new;
    let pairs = [
        (g(38.6247, -90.1848), g(38.6247, -90.1848)),
        (g(0.0, 0.0), g(0.0, 180.0)),
        (g(0.0, 0.0), g(0.0, 1.0)),
        (g(90.0, 0.0), g(-90.0, 0.0)),
        (g(38.6247, -90.1848), g(29.9511, -90.0715)),
        (g(32.3, -90.9), g(32.31, -90.89)),
        (g(51.5074, -0.1278), g(40.7128, -74.0060)),
        (g(-33.8688, 151.2093), g(35.6762, 139.6503)),
        (g(37.0, -89.5), g(37.0, -89.499)),
        (g(10.0, 179.5), g(-10.0, -179.5)),
    ];
    let mut worst = 0.0f64;
    for (a, b) in pairs {
        let (h, o) = (haversine_km(a, b), vector_great_circle_km(a, b));
        let rel = if o == 0.0 { h.abs() } else { (h - o).abs() / o };
        worst = worst.max(rel);
    }
    let eq = haversine_km(g(0.0, 0.0), g(0.0, 1.0));
    let pass = worst <= 0.005 && (eq - 111.195).abs() / 111.195 <= 0.005;
    outcome(pass, format!("max relative deviation {worst:.2e}, 1 deg at equator = {eq:.3} km"))
}

fn random_feature_row<R: Rng>(rng: &mut R) -> Vec<f64> {
    use Feature::*;
    let mut v = vec![0.0; N_FEATURES];
    let mut q = [rng.random_range(1.0..12.0), rng.random_range(1.0..12.0), rng.random_range(1.0..12.0)];
    q.sort_by(f64::total_cmp);
    v[SogQ1.index()] = q[0];
    v[SogQ2.index()] = q[1];
    v[SogQ3.index()] = q[2];
    let p = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
    let s: f64 = p.iter().sum();
    v[PtstLow.index()] = p[0] / s;
    v[PtstMid.index()] = p[1] / s;
    v[PtstHigh.index()] = p[2] / s;
    v[SogSd.index()] = rng.random_range(0.0..2.0);
    v[Nrot.index()] = rng.random_range(0.0..5.0);
    v[Len.index()] = rng.random_range(15.0..45.0);
    v[Wid.index()] = rng.random_range(5.0..12.0);
    v[Draft.index()] = rng.random_range(1.0..4.0);
    v[AccSd.index()] = rng.random_range(0.0..1.0);
    for g in ONE_HOT_GROUPS {
        let on = rng.random_range(g.clone());
        v[on] = 1.0;
    }
    recompute_derived(&mut v);
    v
}

// 3. SMOTE output validity.
fn smote_validity() -> Outcome {
    use Feature::*;
    let one_hot = |s: usize| ONE_HOT_GROUPS.iter().any(|g| g.contains(&s));
    let (mut total, mut bad) = (0usize, 0usize);
    for run in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + run);
        let n = rng.random_range(12..60);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| random_feature_row(&mut rng)).collect();
        let labels: Vec<usize> = (0..n).map(|i| usize::from(i % 3 == 0)).collect();
        let targets = vec![0, rng.random_range(1..30)];
        let out = smote_augment(&rows, &labels, &targets, 5, run).expect("smote");
        for (v, tr) in out.rows.iter().zip(&out.trace) {
            total += 1;
            let (a, b) = (&rows[tr.seed_row], &rows[tr.neighbor_row]);
            let contained =
                (0..N_FEATURES).filter(|&s| !one_hot(s)).all(|s| tr.raw[s] >= a[s].min(b[s]) && tr.raw[s] <= a[s].max(b[s]));
            let ordered = v[SogQ1.index()] <= v[SogQ2.index()] && v[SogQ2.index()] <= v[SogQ3.index()];
            let ptst = (v[PtstLow.index()] + v[PtstMid.index()] + v[PtstHigh.index()] - 1.0).abs() <= 1e-9;
            let hot = ONE_HOT_GROUPS
                .iter()
                .all(|g| g.clone().filter(|&s| v[s] == 1.0).count() == 1 && g.clone().all(|s| v[s] == 0.0 || v[s] == 1.0));
            let mut expect = v.clone();
            recompute_derived(&mut expect);
            let products = expect == *v;
            if !(contained && ordered && ptst && hot && products) {
                bad += 1;
            }
        }
    }
    outcome(bad == 0, format!("{} of {total} synthetic rows valid over 50 runs", total - bad))
}

// 4. Stratified fold balance.
fn fold_balance() -> Outcome {
    let mut failures = 0;
    let mut worst = 0.0f64;
    for d in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(d);
        let k_classes = rng.random_range(2..=6);
        let n = rng.random_range(20..300);
        let folds_k = rng.random_range(2..=10);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k_classes)).collect();
        let folds = stratified_kfold(&labels, folds_k, d).expect("folds");
        let mut seen = vec![0usize; n];
        for f in &folds {
            for &i in &f.validation {
                seen[i] += 1;
            }
            let mut both: Vec<usize> = f.train.iter().chain(&f.validation).copied().collect();
            both.sort_unstable();
            if both != (0..n).collect::<Vec<_>>() {
                failures += 1;
            }
            for c in 0..k_classes {
                let n_c = labels.iter().filter(|&&y| y == c).count() as f64;
                let in_fold = f.validation.iter().filter(|&&i| labels[i] == c).count() as f64;
                let dev = (in_fold - n_c / folds_k as f64).abs();
                worst = worst.max(dev);
            }
        }
        if seen.iter().any(|&s| s != 1) {
            failures += 1;
        }
    }
    outcome(failures == 0 && worst <= 1.0, format!("max per-class deviation {worst:.3}, partition failures {failures}"))
}

fn separable_fixture() -> (Matrix, Vec<usize>) {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in 0..8 {
        for j in 0..8 {
            let (a, b) = (i as f64, j as f64);
            let s = a + b;
            if (s - 7.0).abs() < 1.0 {
                continue;
            }
            rows.push(vec![a, b]);
            y.push(usize::from(s > 7.0));
        }
    }
    (Matrix::from_rows(&rows), y)
}

// 5. AdaBoost and GBDT sanity.
fn learner_sanity() -> Outcome {
    let (x, y) = separable_fixture();
    let n = y.len();
    let w = vec![1.0; n];
    let ada = AdaBoost::fit(&x, &y, &w, 2, &AdaBoostParams { n_estimators: 50, learning_rate: 1.0 }).expect("adaboost");
    let proba = ada.predict_proba(&x);
    let errors = (0..n).filter(|&i| (proba[i][1] > proba[i][0]) != (y[i] == 1)).count();

    let params = GbdtParams { n_estimators: 30, min_child_samples: 3, ..GbdtParams::default() };
    let gb = Gbdt::fit(&x, &y, &w, 2, &params).expect("gbdt");
    let monotone = gb.loss_trace.windows(2).all(|p| p[1] <= p[0] + 1e-12);

    // First-round leaves against finite-difference gradient and curvature of the leaf loss.
    let mut worst = 0.0f64;
    for c in 0..2 {
        let tree = &gb.trees[0][c];
        let f0 = gb.init_scores[c];
        for (leaf, node) in tree.nodes.iter().enumerate() {
            let RegNode::Leaf { value } = node else { continue };
            let members: Vec<usize> = (0..n).filter(|&i| tree.apply(x.row(i)) == leaf).collect();
            let loss = |d: f64| -> f64 {
                members
                    .iter()
                    .map(|&i| {
                        let t = f64::from(y[i] == c);
                        let p = 1.0 / (1.0 + (-(f0 + d)).exp());
                        -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
                    })
                    .sum()
            };
            let h = 1e-4;
            let g = (loss(h) - loss(-h)) / (2.0 * h);
            let hh = (loss(h) - 2.0 * loss(0.0) + loss(-h)) / (h * h);
            let expected = -g / (hh + params.lambda) * params.learning_rate;
            worst = worst.max((value - expected).abs());
        }
    }
    outcome(
        errors == 0 && monotone && worst <= 1e-4,
        format!("AdaBoost training errors {errors}, GBDT loss monotone {monotone}, max Newton-step deviation {worst:.2e}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

// 6. TPE against random search.
fn tpe_vs_random() -> Outcome {
    let space = HyperparameterSpace { params: vec![ParamDef::new("x", ParamKind::Continuous, 0.0, 1.0)] };
    let f = |x: f64| (x - 0.3).powi(2);
    let cfg = TpeConfig { n_trials: 50, ..TpeConfig::default() };
    let mut tpe = Vec::new();
    let mut random = Vec::new();
    for seed in 0..20u64 {
        let study = tpe_optimize(
            &space,
            |p| Ok(Evaluation { objective: f(p["x"].as_f64()), fold_scores: vec![] }),
            &cfg,
            seed,
        );
        tpe.push(study.best_trial().and_then(|t| t.objective).expect("best"));
        let mut rng = ChaCha8Rng::seed_from_u64(10_000 + seed);
        random.push((0..50).map(|_| f(space.sample_uniform(&mut rng)["x"].as_f64())).fold(f64::INFINITY, f64::min));
    }
    let (mt, mr) = (median(tpe), median(random));
    outcome(mt <= mr, format!("median best: TPE {mt:.3e}, random {mr:.3e}"))
}

// 7. RFE finds the planted feature.
fn rfe_recovery() -> Outcome {
    let planted = 6;
    let mut hits = 0;
    for run in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + run);
        let n = 200;
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..10).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y: Vec<usize> = rows.iter().map(|r| usize::from(r[planted] + rng.random_range(-0.1..0.1) > 0.0)).collect();
        let x = Matrix::from_rows(&rows);
        let folds = stratified_kfold(&y, 5, run).expect("folds");
        let spec = LearnerSpec::RandomForest(RandomForestParams { n_estimators: 20, max_depth: Some(4), ..Default::default() });
        let r = rfe_select(&spec, &x, &y, &vec![1.0; n], 2, &folds, &RfeConfig::default(), run).expect("rfe");
        if r.best_subset.contains(&planted) {
            hits += 1;
        }
    }
    outcome(hits * 100 >= 95 * 20, format!("planted feature kept in {hits}/20 runs"))
}

// 8. Barge-count bins, exhaustively.
fn binning() -> Outcome {
    let map = BargeClassMap::default();
    let expected = |c: u32| match c {
        1 => 0,
        2..=4 => 1,
        5..=12 => 2,
        13..=20 => 3,
        21..=29 => 4,
        _ => 5,
    };
    let wrong = (1..=42u32).filter(|&c| map.bin(c).ok() != Some(expected(c))).count();
    let edges_reject = map.bin(0).is_err() && map.bin(43).is_err();
    outcome(wrong == 0 && edges_reject, format!("{} of 42 counts binned as expected, 0 and 43 rejected {edges_reject}", 42 - wrong))
}

fn files_identical(a: &Path, b: &Path) -> bool {
    let mut stack = vec![std::path::PathBuf::new()];
    while let Some(rel) = stack.pop() {
        let Ok(entries) = fs::read_dir(a.join(&rel)) else { return false };
        let mut count = 0;
        for e in entries.flatten() {
            count += 1;
            let name = rel.join(e.file_name());
            if e.path().is_dir() {
                stack.push(name);
            } else if fs::read(a.join(&name)).ok() != fs::read(b.join(&name)).ok() {
                return false;
            }
        }
        if fs::read_dir(b.join(&rel)).map(|d| d.count()).unwrap_or(usize::MAX) != count {
            return false;
        }
    }
    true
}

// 9. End-to-end synthetic run, twice.
fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = SyntheticScenario::default();
    let files = write_synthetic(&scenario, dir.path(), &PipelineConfig::default()).expect("synthetic");
    let cfg = PipelineConfig::load(&files.config).expect("config");
    let start = Instant::now();
    let first = match run_training(&cfg, &dir.path().join("run1")) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("training failed: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let second = run_training(&cfg, &dir.path().join("run2")).expect("rerun");
    let identical = ["artifacts", "reports", "data"]
        .iter()
        .all(|d| files_identical(&dir.path().join("run1").join(d), &dir.path().join("run2").join(d)));
    let labeled = first.manifest.counts["labeled_rows"];
    let pf1 = first.presence.report.weighted.f1;
    let qf1 = first.quantity.report.weighted.f1;
    let same_scores = pf1 == second.presence.report.weighted.f1 && qf1 == second.quantity.report.weighted.f1;
    outcome(
        pf1 >= 0.90 && qf1 >= 0.75 && secs <= 600.0 && identical && same_scores,
        format!(
            "{labeled} labeled vessels, presence F1 {pf1:.4}, quantity F1 {qf1:.4}, run {secs:.1} s, byte-identical rerun {identical}"
        ),
    )
}

fn spearman_vs_position(values: &[f64]) -> f64 {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut rank = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        for &o in &order[i..=j] {
            rank[o] = (i + j) as f64 / 2.0;
        }
        i = j + 1;
    }
    let pos: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let mean = (n as f64 - 1.0) / 2.0;
    let cov: f64 = (0..n).map(|i| (pos[i] - mean) * (rank[i] - mean)).sum();
    let var_p: f64 = pos.iter().map(|p| (p - mean).powi(2)).sum();
    let var_r: f64 = rank.iter().map(|r| (r - mean).powi(2)).sum();
    cov / (var_p * var_r).sqrt()
}

// 10. Segment-size sensitivity.
fn segment_sizes() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let files = write_synthetic(&SyntheticScenario::default(), dir.path(), &PipelineConfig::default()).expect("synthetic");
    let mut cfg = PipelineConfig::load(&files.config).expect("config");
    cfg.sensitivity.segment_sizes = vec![2.0, 1.0, 0.5, 0.3, 0.1];
    let (_, rows) = segment_sensitivity(&cfg).expect("sensitivity");
    let errors: Vec<f64> = rows.iter().map(|r| r.mean_error_miles).collect();
    let rho = spearman_vs_position(&errors);
    let table: Vec<String> = rows.iter().map(|r| format!("{}:{:.4}", r.segment_miles, r.mean_error_miles)).collect();
    outcome(rho <= -0.9, format!("Spearman rho {rho:.3}, errors (mi) {}", table.join(" ")))
}

// 11. Cleaning rules on a hand-checked fixture.
fn cleaning_fixture() -> Outcome {
    let p = GeoPoint::new(37.0, -89.5);
    // (sog, status, expected kept)
    let rows: [(f64, Option<u8>, bool); 20] = [
        (0.5, Some(0), false),
        (26.0, Some(0), false),
        (102.3, Some(0), true),
        (5.0, Some(1), false),
        (5.0, Some(2), false),
        (1.0, Some(0), true),
        (0.99, None, false),
        (25.0, Some(0), true),
        (25.01, Some(12), false),
        (7.3, Some(0), true),
        (7.3, Some(15), true),
        (7.3, None, true),
        (3.0, Some(3), true),
        (0.0, Some(0), false),
        (102.3, Some(1), false),
        (8.0, Some(5), true),
        (0.5, Some(1), false),
        (12.0, Some(8), true),
        (30.0, Some(2), false),
        (4.4, Some(0), true),
    ];
    let recs: Vec<AisRecord> = rows
        .iter()
        .enumerate()
        .map(|(i, &(sog, status, _))| {
            let mut r = AisRecord::at(366_000_001, 1_700_000_000 + i as i64 * 60, p, sog);
            r.status = status;
            r
        })
        .collect();
    let (kept, report) = clean_records(recs);
    let kept_ts: Vec<i64> = kept.iter().map(|r| r.timestamp).collect();
    let expected: Vec<i64> =
        rows.iter().enumerate().filter(|(_, r)| r.2).map(|(i, _)| 1_700_000_000 + i as i64 * 60).collect();
    outcome(
        kept_ts == expected,
        format!(
            "kept {} of 20 (expected {}); removed slow {}, fast {}, status {}",
            kept.len(),
            expected.len(),
            report.removed_slow,
            report.removed_fast,
            report.removed_status
        ),
    )
}

// 12. Transfer to a shifted location.
fn transferability() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let scenario = SyntheticScenario {
        speed_intercept_kn: 10.5,
        location_speed_shift_kn: 0.4,
        location_length_shift_m: 3.0,
        ..SyntheticScenario::default()
    };
    let files = write_synthetic(&scenario, dir.path(), &PipelineConfig::default()).expect("synthetic");
    let cfg = PipelineConfig::load(&files.config).expect("config");
    let out = dir.path().join("run");
    let cfg_fast = PipelineConfig { run_rfe: false, run_tuning: false, ..cfg.clone() };
    if let Err(e) = run_training(&cfg_fast, &out) {
        return outcome(false, format!("labeled dataset build failed: {e}"));
    }
    let data = read_dataset_file(out.join("data/labeled.csv")).expect("dataset");
    match transfer_run(&data, "L1", &cfg.quantity_learner, &cfg) {
        Ok(t) => {
            let (i, h) = (t.in_domain.weighted.f1, t.holdout.weighted.f1);
            outcome(h <= i, format!("holdout L1 F1 {h:.4} vs in-domain {i:.4} ({} holdout rows)", t.n_holdout_rows))
        }
        Err(e) => outcome(false, format!("transfer failed: {e}")),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 12] = [
        ("metric oracle equivalence", metric_oracles),
        ("haversine reference pairs", haversine_pairs),
        ("SMOTE validity", smote_validity),
        ("stratified folds", fold_balance),
        ("learner sanity", learner_sanity),
        ("TPE vs random search", tpe_vs_random),
        ("RFE planted feature", rfe_recovery),
        ("class binning", binning),
        ("end-to-end synthetic run", end_to_end),
        ("segment-size sensitivity", segment_sizes),
        ("cleaning rules", cleaning_fixture),
        ("transferability harness", transferability),
    ];
    let filter: Option<usize> = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if filter.is_some_and(|f| f != i + 1) {
            continue;
        }
        let o = check();
        println!("[{}] {:>2}. {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

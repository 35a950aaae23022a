//! Acceptance validator: one PASS/FAIL line per criterion, exit code 1 on any failure.
//!
//! Run with `cargo test -p ferbench-core --test acceptance` (add `--release`
//! for realistic timings on the end-to-end run).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ferbench::eval::{macro_f1, PerformanceTensor};
use ferbench::labels::{ExpressionLabel, HeadPose, Provenance};
use ferbench::manifest::{BBox, DatasetManifest, SampleRecord};
use ferbench::metrics::{build_similarity_report, render_local_global_table, Cell, SimilarityReport};
use ferbench::normalize::{align_and_crop, apply_exclusion, sample_frames, ClassMap, SamplingStrategy, OUTPUT_SIDE};
use ferbench::pipeline::{run_all, synthetic_run, RunPaths, Selection};
use ferbench::training::{early_stop_decision, make_folds, FoldKind, StopDecision};

struct Validator {
    failed: usize,
}

impl Validator {
    fn report(&mut self, id: u32, name: &str, result: Result<String, String>) {
        match result {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL {id:>2} {name}: {detail}");
            }
        }
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---- naive similarity formulas over a dense [model][train][test] array ----

struct Dense {
    scores: Vec<Vec<Vec<f64>>>,
}

impl Dense {
    fn cs(&self, i: usize, j: usize) -> f64 {
        let m = self.scores.len() as f64;
        self.scores.iter().map(|s| s[i][j]).sum::<f64>() / m
    }

    fn ls(&self, i: usize) -> f64 {
        self.cs(i, i)
    }

    fn gs(&self, i: usize) -> f64 {
        let d = self.scores[0].len();
        let others: Vec<f64> = (0..d).filter(|&j| j != i).map(|j| self.cs(i, j)).collect();
        others.iter().sum::<f64>() / others.len() as f64
    }

    fn ps(&self, i: usize, j: usize) -> f64 {
        self.cs(i, j) / self.ls(j)
    }
}

fn cell(c: Cell) -> Result<f64, String> {
    c.value().ok_or_else(|| format!("expected a value, got {c:?}"))
}

fn ps_diagonal_is_one(report: &SimilarityReport) -> Result<(), String> {
    for d in &report.datasets {
        match report.ps_of(d, d) {
            Cell::Value(v) if v == 1.0 => {}
            other => return Err(format!("PS({d},{d}) = {other:?}")),
        }
    }
    Ok(())
}

fn metric_oracle(reports: &mut Vec<SimilarityReport>) -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let m = rng.random_range(1..=3);
        let d = rng.random_range(2..=6);
        let names: Vec<String> = (0..d).map(|i| format!("D{i}")).collect();
        let dense = Dense {
            scores: (0..m)
                .map(|_| (0..d).map(|_| (0..d).map(|_| rng.random_range(0.05..1.0)).collect()).collect())
                .collect(),
        };
        let mut tensor = PerformanceTensor::new();
        for (a, s) in dense.scores.iter().enumerate() {
            for i in 0..d {
                for j in 0..d {
                    tensor.insert(&format!("m{a}"), &names[i], &names[j], s[i][j]);
                }
            }
        }
        let report = build_similarity_report(&tensor);
        for i in 0..d {
            let checks = [
                (cell(report.ls_of(&names[i]))?, dense.ls(i)),
                (cell(report.gs_of(&names[i]))?, dense.gs(i)),
            ];
            for (got, want) in checks {
                worst = worst.max((got - want).abs());
            }
            for j in 0..d {
                let cs = cell(report.cs_of(&names[i], &names[j]))?;
                worst = worst.max((cs - dense.cs(i, j)).abs());
                if i != j {
                    let ps = cell(report.ps_of(&names[i], &names[j]))?;
                    worst = worst.max((ps - dense.ps(i, j)).abs());
                }
            }
        }
        ensure(worst <= 1e-12, || format!("case {case}: deviation {worst:e}"))?;
        reports.push(report);
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 10.0, || format!("took {elapsed:.2} s"))?;
    Ok(format!("max deviation {worst:e}, {elapsed:.2} s"))
}

fn hand_tensor() -> Result<String, String> {
    let mut t = PerformanceTensor::new();
    for (m, a_a, a_b, b_a, b_b) in [("m1", 0.9, 0.5, 0.4, 0.8), ("m2", 0.7, 0.3, 0.6, 0.6)] {
        t.insert(m, "A", "A", a_a);
        t.insert(m, "A", "B", a_b);
        t.insert(m, "B", "A", b_a);
        t.insert(m, "B", "B", b_b);
    }
    let r = build_similarity_report(&t);
    let expected = [
        ("CS(A,A)", r.cs_of("A", "A"), 0.8),
        ("CS(A,B)", r.cs_of("A", "B"), 0.4),
        ("CS(B,A)", r.cs_of("B", "A"), 0.5),
        ("CS(B,B)", r.cs_of("B", "B"), 0.7),
        ("LS(A)", r.ls_of("A"), 0.8),
        ("LS(B)", r.ls_of("B"), 0.7),
        ("GS(A)", r.gs_of("A"), 0.4),
        ("GS(B)", r.gs_of("B"), 0.5),
        ("PS(A,B)", r.ps_of("A", "B"), 0.5714),
        ("PS(B,A)", r.ps_of("B", "A"), 0.625),
        ("PS(A,A)", r.ps_of("A", "A"), 1.0),
        ("PS(B,B)", r.ps_of("B", "B"), 1.0),
    ];
    for (name, got, want) in expected {
        let got = cell(got)?;
        ensure(close(got, want, 1e-4), || format!("{name} = {got}, expected {want}"))?;
    }
    Ok("CS, LS, GS and PS within 1e-4".into())
}

fn reference_table() -> Result<String, String> {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/local_global_fixture.csv");
    let mut reader = csv::Reader::from_path(&fixture).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| e.to_string())?;
        let ls: f64 = rec[1].parse().map_err(|e| format!("{e}"))?;
        let gs: f64 = rec[2].parse().map_err(|e| format!("{e}"))?;
        rows.push((rec[0].to_string(), ls, gs));
    }
    // One model; diagonal carries LS and every off-diagonal of a row carries GS.
    let mut t = PerformanceTensor::new();
    for (train, ls, gs) in &rows {
        for (test, _, _) in &rows {
            t.insert("reference", train, test, if train == test { *ls } else { *gs });
        }
    }
    let report = build_similarity_report(&t);
    let table = render_local_global_table(&report);
    let lines: HashSet<&str> = table.lines().collect();
    for want in ["AffectNet,0.5622,0.6095", "RaFD,0.9849,0.4539"] {
        ensure(lines.contains(want), || format!("row `{want}` absent from table"))?;
    }
    ensure(table.lines().count() == rows.len() + 1, || format!("{} lines", table.lines().count()))?;
    Ok(format!("{} rows rendered", rows.len()))
}

/// F1 recomputed from an explicit list of (truth, prediction) pairs.
fn brute_force_f1(pairs: &[(usize, usize)], k: usize) -> Option<f64> {
    let mut scores = Vec::new();
    for c in 0..k {
        let support = pairs.iter().filter(|(t, _)| *t == c).count();
        if support == 0 {
            continue;
        }
        let tp = pairs.iter().filter(|(t, p)| *t == c && *p == c).count();
        let fp = pairs.iter().filter(|(t, p)| *t != c && *p == c).count();
        let fn_ = support - tp;
        // F1 = 2TP / (2TP + FP + FN)
        let denom = 2 * tp + fp + fn_;
        scores.push(if denom == 0 { 0.0 } else { 2.0 * tp as f64 / denom as f64 });
    }
    (!scores.is_empty()).then(|| scores.iter().sum::<f64>() / scores.len() as f64)
}

fn macro_f1_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let mut worst: f64 = 0.0;
    let mut compared = 0;
    for case in 0..100 {
        let k = rng.random_range(2..=7);
        let mut counts = vec![vec![0u64; k]; k];
        let mut pairs = Vec::new();
        for t in 0..k {
            // Some classes get no true samples at all.
            if rng.random_bool(0.15) {
                continue;
            }
            for _ in 0..rng.random_range(0..25) {
                let p = if rng.random_bool(0.6) { t } else { rng.random_range(0..k) };
                counts[t][p] += 1;
                pairs.push((t, p));
            }
        }
        match (macro_f1(&counts), brute_force_f1(&pairs, k)) {
            (Ok(got), Some(want)) => {
                worst = worst.max((got - want).abs());
                compared += 1;
            }
            (Err(_), None) => {}
            (got, want) => return Err(format!("case {case}: {got:?} vs {want:?}")),
        }
        ensure(worst <= 1e-9, || format!("case {case}: deviation {worst:e}"))?;
    }
    let worked = macro_f1(&[vec![3, 1], vec![2, 4]]).map_err(|e| e.to_string())?;
    ensure(close(worked, 0.697, 0.001), || format!("[[3,1],[2,4]] -> {worked}"))?;
    Ok(format!("{compared} matrices, max deviation {worst:e}; worked matrix {worked:.4}"))
}

fn frame_sampling() -> Result<String, String> {
    for n in [5u32, 6, 100, 101] {
        let idx: Vec<u32> = sample_frames(n, SamplingStrategy::UniformFive, "clip")
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|f| f.index)
            .collect();
        ensure(idx.len() == 5, || format!("N={n}: {idx:?}"))?;
        ensure(idx.windows(2).all(|w| w[0] < w[1]), || format!("N={n}: {idx:?} not increasing"))?;
        ensure(idx[0] == 0 && idx[4] == n - 1, || format!("N={n}: {idx:?} misses an end"))?;
        if n == 100 {
            ensure(idx == [0, 25, 50, 74, 99], || format!("N=100: {idx:?}"))?;
        }
    }
    Ok("N in {5, 6, 100, 101}".into())
}

/// Light face on a grey background with two dark eye discs, anti-aliased by 4x4 supersampling.
fn synthetic_face(eyes: [(f64, f64); 2], face: (f64, f64), radius: f64, side: u32) -> RgbImage {
    let eye_r = radius * 0.12;
    RgbImage::from_fn(side, side, |x, y| {
        let mut acc = 0.0f64;
        for sy in 0..4 {
            for sx in 0..4 {
                let px = x as f64 + (sx as f64 + 0.5) / 4.0;
                let py = y as f64 + (sy as f64 + 0.5) / 4.0;
                let in_eye = eyes.iter().any(|e| (px - e.0).hypot(py - e.1) <= eye_r);
                let in_face = (px - face.0).hypot(py - face.1) <= radius;
                acc += if in_eye {
                    20.0
                } else if in_face {
                    225.0
                } else {
                    190.0
                };
            }
        }
        let v = (acc / 16.0).round() as u8;
        Rgb([v, v.saturating_sub(10), v.saturating_sub(20)])
    })
}

/// Darkness-weighted centroids of the eye pixels left and right of the output's vertical midline.
fn eye_centroids(img: &image::GrayImage) -> Option<[(f64, f64); 2]> {
    let mid = img.width() as f64 / 2.0;
    let mut sums = [(0.0, 0.0, 0.0); 2];
    for (x, y, p) in img.enumerate_pixels() {
        let v = p[0] as f64;
        if v >= 120.0 {
            continue;
        }
        let w = 120.0 - v;
        let cx = x as f64 + 0.5;
        let s = &mut sums[usize::from(cx >= mid)];
        s.0 += w * cx;
        s.1 += w * (y as f64 + 0.5);
        s.2 += w;
    }
    if sums.iter().any(|s| s.2 == 0.0) {
        return None;
    }
    Some(sums.map(|s| (s.0 / s.2, s.1 / s.2)))
}

fn preprocessing() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0007);
    let side = 640u32;
    let mut worst_transform: f64 = 0.0;
    let mut worst_pixels: f64 = 0.0;
    for case in 0..50 {
        let theta = rng.random_range(-40.0f64..=40.0).to_radians();
        let half = rng.random_range(25.0..45.0);
        let pivot = (320.0 + rng.random_range(-15.0..15.0), 300.0 + rng.random_range(-15.0..15.0));
        let (s, c) = theta.sin_cos();
        let left = (pivot.0 - c * half, pivot.1 - s * half);
        let right = (pivot.0 + c * half, pivot.1 + s * half);
        // Face center sits below the eye line in the face's own frame.
        let drop = half * 0.6;
        let face = (pivot.0 - s * drop, pivot.1 + c * drop);
        let radius = half * 2.4;
        let img = synthetic_face([left, right], face, radius, side);
        let bbox = BBox::new(
            (face.0 - radius) as u32,
            (face.1 - radius) as u32,
            (2.0 * radius) as u32,
            (2.0 * radius) as u32,
        );
        let (l, r) = if rng.random_bool(0.5) { (left, right) } else { (right, left) };
        let out = align_and_crop(&img, l, r, bbox).map_err(|e| format!("case {case}: {e}"))?;
        ensure(out.image.dimensions() == (OUTPUT_SIDE, OUTPUT_SIDE), || {
            format!("case {case}: {:?}", out.image.dimensions())
        })?;
        let a = out.transform.to_output(left);
        let b = out.transform.to_output(right);
        let angle = (b.1 - a.1).atan2(b.0 - a.0).to_degrees();
        worst_transform = worst_transform.max(angle.abs());
        ensure(angle.abs() <= 0.5, || format!("case {case}: transformed eye line at {angle:.4} deg"))?;

        let [pl, pr] = eye_centroids(&out.image).ok_or_else(|| format!("case {case}: eyes not visible"))?;
        let seen = (pr.1 - pl.1).atan2(pr.0 - pl.0).to_degrees();
        worst_pixels = worst_pixels.max(seen.abs());
        ensure(seen.abs() <= 0.5, || format!("case {case}: rendered eye line at {seen:.4} deg"))?;
    }
    Ok(format!(
        "224x224 luma; eye line within {worst_transform:.2e} deg (transform), {worst_pixels:.3} deg (pixels)"
    ))
}

fn golden_manifest(dir: &Path) -> Result<String, String> {
    use ExpressionLabel::*;
    // (raw label, dataset, canonical label)
    let merges: &[(&str, &str, ExpressionLabel)] = &[
        ("arrabbiato", "FEGA", Anger),
        ("annoyed", "Lifespan", Anger),
        ("grumpy", "Lifespan", Anger),
        ("disgusto", "FEGA", Disgust),
        ("afraid", "DDCF", Fear),
        ("afraid", "NIMH-ChEFS", Fear),
        ("afraid", "KDEF", Fear),
        ("fearful", "RaFD", Fear),
        ("paura", "FEGA", Fear),
        ("joy", "WSEFEP", Happiness),
        ("allegria", "FEGA", Happiness),
        ("amusement", "BioVidEmo", Happiness),
        ("tristezza", "FEGA", Sadness),
        ("sorpresa", "FEGA", Surprise),
        ("neutra", "FEGA", Neutral),
        ("profile", "Lifespan", Neutral),
        ("anger", "CK+", Anger),
        ("Disgust", "JAFFE", Disgust),
        ("fear", "MMI", Fear),
        ("happiness", "AffectNet", Happiness),
        ("sadness", "ExpW", Sadness),
        (" Surprise ", "RAF-DB", Surprise),
        ("neutral", "FER2013", Neutral),
    ];
    // (label raw, face found, head pose, expected reason)
    let exclusions: &[(&str, bool, Option<HeadPose>, Option<&str>)] = &[
        ("happiness", false, Some(HeadPose::Front), Some("no_face")),
        ("happiness", false, None, Some("no_face")),
        ("happiness", true, Some(HeadPose::FullLeft), Some("pose_full_or_back")),
        ("happiness", true, Some(HeadPose::FullRight), Some("pose_full_or_back")),
        ("happiness", true, Some(HeadPose::Back), Some("pose_full_or_back")),
        ("happiness", true, None, Some("pose_missing")),
        ("contempt", true, Some(HeadPose::Front), Some("unmapped_label")),
        ("joy", true, Some(HeadPose::Front), Some("unmapped_label")),
        ("happiness", true, Some(HeadPose::Front), None),
        ("happiness", true, Some(HeadPose::HalfLeft), None),
        ("happiness", true, Some(HeadPose::HalfRight), None),
    ];

    let map = ClassMap::standard();
    let mut manifest = DatasetManifest::new("Golden", Provenance::LabControlled);
    let mut expected: BTreeMap<String, (Option<ExpressionLabel>, Option<&str>)> = BTreeMap::new();
    for (i, (raw, ds, label)) in merges.iter().enumerate() {
        let id = format!("merge{i:02}");
        let mut r = SampleRecord::image(ds, &id, &format!("{id}.png"), raw);
        r.label = map.unify(raw, ds).label();
        r.face_bbox = Some(BBox::new(0, 0, 50, 50));
        r.head_pose = Some(HeadPose::Front);
        manifest.samples.push(apply_exclusion(r));
        expected.insert(id, (Some(*label), None));
    }
    for (i, (raw, face, pose, reason)) in exclusions.iter().enumerate() {
        let id = format!("excl{i:02}");
        let mut r = SampleRecord::image("Golden", &id, &format!("{id}.png"), raw);
        r.label = map.unify(raw, "Golden").label();
        r.face_bbox = face.then(|| BBox::new(0, 0, 50, 50));
        r.head_pose = *pose;
        manifest.samples.push(apply_exclusion(apply_exclusion(r)));
        let label = reason.map_or(true, |r| r != "unmapped_label").then_some(ExpressionLabel::Happiness);
        expected.insert(id, (label, *reason));
    }

    let path = dir.join("golden.jsonl");
    manifest.write(&path).map_err(|e| e.to_string())?;
    let back = DatasetManifest::read(&path).map_err(|e| e.to_string())?;
    ensure(back == manifest, || "manifest changed on disk round trip".into())?;

    let mut mismatches = Vec::new();
    for s in &back.samples {
        let (label, reason) = expected[&s.sample_id];
        let got = (s.label, s.excluded, s.exclusion_reason.as_deref());
        if got != (label, reason.is_some(), reason) {
            mismatches.push(format!("{}: {got:?}", s.sample_id));
        }
    }
    ensure(mismatches.is_empty(), || mismatches.join("; "))?;
    ensure(back.samples.len() == expected.len(), || "sample count changed".into())?;
    Ok(format!("{} merge rows, {} exclusion rows, 0 mismatches", merges.len(), exclusions.len()))
}

fn stop_epoch(history: &[f64]) -> Option<usize> {
    (1..=history.len()).find(|&n| early_stop_decision(&history[..n]) == StopDecision::Stop)
}

fn early_stopping() -> Result<String, String> {
    let plateau = [0.50, 0.52, 0.521, 0.522, 0.523, 0.524, 0.525];
    ensure(stop_epoch(&plateau) == Some(7), || format!("plateau stops at {:?}", stop_epoch(&plateau)))?;
    let rising: Vec<f64> = (0..20).map(|i| 0.4 + 0.02 * i as f64).collect();
    ensure(
        (1..20).all(|n| early_stop_decision(&rising[..n]) == StopDecision::Continue),
        || "rising history stopped before epoch 20".into(),
    )?;
    let flat = [0.5; 6];
    ensure(stop_epoch(&flat) == Some(6), || format!("flat stops at {:?}", stop_epoch(&flat)))?;

    let patience = 5;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0009);
    let mut earliest = usize::MAX;
    for _ in 0..1000 {
        let len = rng.random_range(1..=20);
        let h: Vec<f64> = (0..len).map(|_| rng.random_range(0.0..=1.0)).collect();
        if let Some(e) = stop_epoch(&h) {
            earliest = earliest.min(e);
            ensure(e > patience, || format!("stopped at epoch {e} on {h:?}"))?;
        }
    }
    Ok(format!("three traces as specified; earliest random stop at epoch {earliest}"))
}

fn random_manifest(rng: &mut ChaCha8Rng, index: usize) -> DatasetManifest {
    let mut m = DatasetManifest::new(format!("F{index}"), Provenance::LabControlled);
    let users = rng.random_range(6..40);
    let n = rng.random_range(users..users * 8);
    for i in 0..n {
        let label = ExpressionLabel::ALL[rng.random_range(0..ExpressionLabel::ALL.len())];
        let mut r = SampleRecord::image(&m.name, &format!("s{i:04}"), &format!("s{i:04}.png"), label.as_str());
        r.label = Some(label);
        // Every user owns at least one sample.
        let u = if i < users { i } else { rng.random_range(0..users) };
        r.user_id = Some(format!("u{u}"));
        if rng.random_bool(0.05) {
            r.excluded = true;
            r.exclusion_reason = Some("no_face".into());
        }
        m.samples.push(r);
    }
    m
}

fn fold_properties() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0010);
    for case in 0..200 {
        let m = random_manifest(&mut rng, case);
        let k = rng.random_range(2..=5);
        let seed = rng.random::<u64>();
        let plan = make_folds(&m, k, seed).map_err(|e| format!("case {case}: {e}"))?;
        let again = make_folds(&m, k, seed).map_err(|e| format!("case {case}: {e}"))?;
        ensure(plan.to_json() == again.to_json(), || format!("case {case}: serialized folds differ"))?;
        ensure(plan.kind == FoldKind::SubjectDisjoint, || format!("case {case}: {:?}", plan.kind))?;
        ensure(plan.folds.len() == k, || format!("case {case}: {} folds", plan.folds.len()))?;

        let included: BTreeSet<String> = m.included().map(|s| s.sample_id.clone()).collect();
        let user_of: BTreeMap<&str, &str> = m
            .samples
            .iter()
            .map(|s| (s.sample_id.as_str(), s.user_id.as_deref().unwrap_or("")))
            .collect();
        let mut seen = BTreeMap::<String, usize>::new();
        for f in &plan.folds {
            for id in &f.val_ids {
                *seen.entry(id.clone()).or_default() += 1;
            }
            let union: BTreeSet<String> = f.train_ids.union(&f.val_ids).cloned().collect();
            ensure(f.train_ids.is_disjoint(&f.val_ids), || format!("case {case}: train/val overlap"))?;
            ensure(union == included, || format!("case {case} fold {}: does not cover samples", f.fold_index))?;
            let train_users: BTreeSet<&str> = f.train_ids.iter().map(|id| user_of[id.as_str()]).collect();
            let val_users: BTreeSet<&str> = f.val_ids.iter().map(|id| user_of[id.as_str()]).collect();
            ensure(train_users.is_disjoint(&val_users), || {
                format!("case {case} fold {}: user in train and val", f.fold_index)
            })?;
        }
        ensure(seen.keys().cloned().collect::<BTreeSet<_>>() == included, || {
            format!("case {case}: validation folds miss samples")
        })?;
        ensure(seen.values().all(|&c| c == 1), || format!("case {case}: sample validated twice"))?;
    }
    Ok("200 manifests".into())
}

struct EndToEnd {
    report: SimilarityReport,
    tensor_rows: usize,
    tensor_keys: usize,
    eval_rows: usize,
    eval_keys: usize,
    architectures: usize,
    datasets: usize,
    folds: usize,
    seconds: f64,
}

fn desk_run(dir: &Path) -> Result<EndToEnd, String> {
    let start = Instant::now();
    let mut cfg = synthetic_run(dir, 11).map_err(|e| e.to_string())?;
    cfg.jobs = 4;
    run_all(&cfg, &Selection::default()).map_err(|e| e.to_string())?;
    let paths = RunPaths::new(&cfg.output_root);

    let tensor_text = std::fs::read_to_string(paths.tensor()).map_err(|e| e.to_string())?;
    let tensor = PerformanceTensor::from_csv_str(&tensor_text, &paths.tensor()).map_err(|e| e.to_string())?;
    let tensor_lines: Vec<&str> = tensor_text.lines().skip(1).filter(|l| !l.is_empty()).collect();
    let tensor_keys: HashSet<String> = tensor_lines
        .iter()
        .map(|l| l.splitn(4, ',').take(3).collect::<Vec<_>>().join(","))
        .collect();

    let rows = paths.results().read_rows().map_err(|e| e.to_string())?;
    let eval_keys: HashSet<_> = rows.iter().map(|r| r.key()).collect();

    Ok(EndToEnd {
        report: build_similarity_report(&tensor),
        tensor_rows: tensor_lines.len(),
        tensor_keys: tensor_keys.len(),
        eval_rows: rows.len(),
        eval_keys: eval_keys.len(),
        architectures: cfg.architectures.len(),
        datasets: cfg.datasets.len(),
        folds: cfg.training.fold_count,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn desk_directional(run: &EndToEnd) -> Result<String, String> {
    let r = &run.report;
    let clean_ls = cell(r.ls_of("GlyphClean"))?;
    let noisy_ls = cell(r.ls_of("GlyphNoisy"))?;
    let clean_gs = cell(r.gs_of("GlyphClean"))?;
    let super_gs = cell(r.gs_of("GlyphSuperset"))?;
    let ps_sc = cell(r.ps_of("GlyphSuperset", "GlyphClean"))?;
    let ps_cs = cell(r.ps_of("GlyphClean", "GlyphSuperset"))?;
    ensure(clean_ls >= 0.9, || format!("clean LS {clean_ls:.4} < 0.9"))?;
    ensure(noisy_ls <= clean_ls - 0.1, || format!("noisy LS {noisy_ls:.4} > clean LS {clean_ls:.4} - 0.1"))?;
    ensure(super_gs >= clean_gs, || format!("superset GS {super_gs:.4} < clean GS {clean_gs:.4}"))?;
    ensure(ps_sc >= ps_cs, || format!("PS(superset,clean) {ps_sc:.4} < PS(clean,superset) {ps_cs:.4}"))?;
    Ok(format!(
        "LS clean {clean_ls:.3} noisy {noisy_ls:.3}; GS superset {super_gs:.3} clean {clean_gs:.3}; \
         PS(sup,clean) {ps_sc:.3} PS(clean,sup) {ps_cs:.3}; {:.1} s",
        run.seconds
    ))
}

fn store_integrity(run: &EndToEnd) -> Result<String, String> {
    let (a, d, k) = (run.architectures, run.datasets, run.folds);
    ensure(run.eval_rows == a * d * d * k, || format!("{} eval rows, expected {}", run.eval_rows, a * d * d * k))?;
    ensure(run.eval_keys == run.eval_rows, || format!("{} duplicate eval keys", run.eval_rows - run.eval_keys))?;
    ensure(run.tensor_rows == a * d * d, || format!("{} tensor rows, expected {}", run.tensor_rows, a * d * d))?;
    ensure(run.tensor_keys == run.tensor_rows, || {
        format!("{} duplicate tensor keys", run.tensor_rows - run.tensor_keys)
    })?;
    Ok(format!("A={a} D={d} K={k}: {} eval rows, {} tensor entries", run.eval_rows, run.tensor_rows))
}

fn main() -> ExitCode {
    let mut v = Validator { failed: 0 };
    let tmp = tempfile::tempdir().expect("temp dir");

    let mut reports = Vec::new();
    v.report(1, "metric oracle", metric_oracle(&mut reports));
    let desk = desk_run(tmp.path());
    if let Ok(run) = &desk {
        reports.push(run.report.clone());
    }
    let ps = reports.iter().try_for_each(ps_diagonal_is_one).map(|_| format!("{} reports", reports.len()));
    v.report(2, "PS diagonal identity", ps);
    v.report(3, "hand tensor", hand_tensor());
    v.report(4, "reference table rendering", reference_table());
    v.report(5, "macro-F1 oracle", macro_f1_oracle());
    v.report(6, "frame sampling", frame_sampling());
    v.report(7, "preprocessing invariants", preprocessing());
    v.report(8, "class map and exclusion golden manifest", golden_manifest(tmp.path()));
    v.report(9, "early stopping", early_stopping());
    v.report(10, "fold properties", fold_properties());
    match &desk {
        Ok(run) => {
            v.report(11, "desk-scale end-to-end", desk_directional(run));
            v.report(12, "results store integrity", store_integrity(run));
        }
        Err(e) => {
            v.report(11, "desk-scale end-to-end", Err(e.clone()));
            v.report(12, "results store integrity", Err(e.clone()));
        }
    }

    if v.failed == 0 {
        println!("acceptance: 12/12 passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of 12 failed", v.failed);
        ExitCode::FAILURE
    }
}

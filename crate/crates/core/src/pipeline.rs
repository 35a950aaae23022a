//! Stage runners over a [`RunConfig`]. Each stage reads the previous stage's
//! files under `output_root` and writes its own, so any stage can be rerun
//! alone.
//!
//! ```text
//! manifests/ingest/<ds>.jsonl (+ <ds>.clips.jsonl)
//! manifests/frames/<ds>.jsonl
//! manifests/unified/<ds>.jsonl
//! manifests/annotated/<ds>.jsonl      annotations/<ds>.csv
//! manifests/age_groups/<ds>.jsonl
//! manifests/final/<ds>.jsonl
//! processed/<ds>/<sample_id>.png
//! stats/*.csv
//! folds/<ds>.json
//! models/<ds>/<arch>/<fold>/
//! results/results.csv, results/missing_pairs.csv, results/evals/*.json
//! metrics/tensor.csv, metrics/local_global.csv, metrics/paired_similarity.csv, ...
//! report/local_global_table.csv, report/figures/*
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adapters::{
    bin_head_pose, write_responses, AnnotationRequest, AnnotationResponse, BatchAnnotator, InProcessAnnotator,
    ProcessAdapter, StubAdapter,
};
use crate::config::{AdapterChoice, DatasetConfig, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{build_performance_tensor, evaluate_model, PerformanceTensor, ResultsStore};
use crate::fsutil::{read_to_string, write_string_atomic};
use crate::ingest::{clips_from_jsonl, clips_to_jsonl, expand_clips, ingest_dataset};
use crate::manifest::{validate_manifest, DatasetManifest, Point, SampleRecord};
use crate::media::{frame_file_name, load_rgb, processed_path, resolve_media, save_png, sanitize};
use crate::metrics::build_similarity_report;
use crate::normalize::{aggregate_user_demographics, apply_exclusion, assign_age_group, align_and_crop, AgeEvidence, ClassMap, DemographicEstimate};
use crate::report::{render_figures, write_report_tables};
use crate::stats::compute_statistics;
use crate::synth::{desk_scale_specs, generate_all};
use crate::training::{
    handle_from_metadata, load_classifier, make_folds, model_dir, read_metadata, run_bounded, train_model, FoldPlan,
    NoopObserver,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    SampleFrames,
    UnifyClasses,
    Annotate,
    AgeGroups,
    Exclude,
    Preprocess,
    Stats,
    Split,
    Train,
    Evaluate,
    Metrics,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 13] = [
        Stage::Ingest,
        Stage::SampleFrames,
        Stage::UnifyClasses,
        Stage::Annotate,
        Stage::AgeGroups,
        Stage::Exclude,
        Stage::Preprocess,
        Stage::Stats,
        Stage::Split,
        Stage::Train,
        Stage::Evaluate,
        Stage::Metrics,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::SampleFrames => "sample-frames",
            Stage::UnifyClasses => "unify-classes",
            Stage::Annotate => "annotate",
            Stage::AgeGroups => "age-groups",
            Stage::Exclude => "exclude",
            Stage::Preprocess => "preprocess",
            Stage::Stats => "stats",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Metrics => "metrics",
            Stage::Report => "report",
        }
    }

    /// Directory under `manifests/` written by a manifest-producing stage.
    fn manifest_dir(self) -> Option<&'static str> {
        Some(match self {
            Stage::Ingest => "ingest",
            Stage::SampleFrames => "frames",
            Stage::UnifyClasses => "unified",
            Stage::Annotate => "annotated",
            Stage::AgeGroups => "age_groups",
            Stage::Exclude => "final",
            _ => return None,
        })
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// Optional filters; an empty list selects everything.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Selection {
    pub datasets: Vec<String>,
    pub architectures: Vec<String>,
    pub folds: Vec<usize>,
    pub dry_run: bool,
}

impl Selection {
    fn datasets<'a>(&self, cfg: &'a RunConfig) -> Result<Vec<&'a str>> {
        for d in &self.datasets {
            cfg.dataset(d)?;
        }
        Ok(cfg
            .datasets
            .keys()
            .filter(|d| self.datasets.is_empty() || self.datasets.contains(d))
            .map(String::as_str)
            .collect())
    }

    fn architectures<'a>(&self, cfg: &'a RunConfig) -> Vec<&'a str> {
        cfg.architectures
            .iter()
            .filter(|a| self.architectures.is_empty() || self.architectures.contains(a))
            .map(String::as_str)
            .collect()
    }

    fn folds(&self, cfg: &RunConfig) -> Vec<usize> {
        (0..cfg.training.fold_count)
            .filter(|f| self.folds.is_empty() || self.folds.contains(f))
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutcome {
    pub written: Vec<PathBuf>,
    pub notes: Vec<String>,
    /// Jobs a dry run would execute.
    pub planned: Vec<String>,
}

/// Output locations under `output_root`.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        RunPaths { root: root.into() }
    }

    pub fn manifest(&self, stage: Stage, dataset: &str) -> PathBuf {
        let dir = stage.manifest_dir().expect("stage writes manifests");
        self.root.join("manifests").join(dir).join(format!("{}.jsonl", sanitize(dataset)))
    }

    pub fn clips(&self, dataset: &str) -> PathBuf {
        self.root
            .join("manifests/ingest")
            .join(format!("{}.clips.jsonl", sanitize(dataset)))
    }

    pub fn annotations(&self, dataset: &str) -> PathBuf {
        self.root.join("annotations").join(format!("{}.csv", sanitize(dataset)))
    }

    pub fn processed(&self) -> PathBuf {
        self.root.join("processed")
    }

    pub fn stats(&self) -> PathBuf {
        self.root.join("stats")
    }

    pub fn folds(&self, dataset: &str) -> PathBuf {
        self.root.join("folds").join(format!("{}.json", sanitize(dataset)))
    }

    pub fn models(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn results(&self) -> ResultsStore {
        ResultsStore::new(self.root.join("results"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics")
    }

    pub fn tensor(&self) -> PathBuf {
        self.metrics().join("tensor.csv")
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report")
    }
}

fn read_stage_manifest(paths: &RunPaths, stage: Stage, dataset: &str, next: Stage) -> Result<DatasetManifest> {
    let path = paths.manifest(stage, dataset);
    if !path.exists() {
        return Err(Error::Config(format!(
            "{} needs {} (run `{stage}` first)",
            next,
            path.display()
        )));
    }
    DatasetManifest::read(&path)
}

fn write_stage_manifest(paths: &RunPaths, stage: Stage, manifest: &DatasetManifest, out: &mut StageOutcome) -> Result<()> {
    let path = paths.manifest(stage, &manifest.name);
    manifest.write(&path)?;
    out.written.push(path);
    Ok(())
}

/// Media key of a record relative to its dataset root.
pub fn media_key(record: &SampleRecord) -> String {
    match record.frame_index {
        Some(i) => format!("{}/{}", record.media_path.trim_end_matches('/'), frame_file_name(i)),
        None => record.media_path.clone(),
    }
}

pub fn run_stage(stage: Stage, cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    match stage {
        Stage::Ingest => ingest(cfg, sel),
        Stage::SampleFrames => sample_frames_stage(cfg, sel),
        Stage::UnifyClasses => unify_classes(cfg, sel),
        Stage::Annotate => annotate(cfg, sel),
        Stage::AgeGroups => age_groups(cfg, sel),
        Stage::Exclude => exclude(cfg, sel),
        Stage::Preprocess => preprocess(cfg, sel),
        Stage::Stats => stats(cfg),
        Stage::Split => split(cfg, sel),
        Stage::Train => train(cfg, sel),
        Stage::Evaluate => evaluate(cfg, sel),
        Stage::Metrics => metrics(cfg),
        Stage::Report => report(cfg),
    }
}

/// Every stage in order.
pub fn run_all(cfg: &RunConfig, sel: &Selection) -> Result<BTreeMap<Stage, StageOutcome>> {
    let mut out = BTreeMap::new();
    for stage in Stage::ALL {
        out.insert(stage, run_stage(stage, cfg, sel)?);
    }
    Ok(out)
}

pub fn ingest(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let d = &cfg.datasets[name];
        let got = ingest_dataset(name, d.provenance, &d.root, d.layout)?;
        write_stage_manifest(&paths, Stage::Ingest, &got.manifest, &mut out)?;
        let clips = paths.clips(name);
        write_string_atomic(&clips, &clips_to_jsonl(&got.clips))?;
        out.written.push(clips);
        out.notes.push(format!(
            "{name}: {} images, {} clips",
            got.manifest.samples.len(),
            got.clips.len()
        ));
    }
    Ok(out)
}

pub fn sample_frames_stage(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let mut m = read_stage_manifest(&paths, Stage::Ingest, name, Stage::SampleFrames)?;
        let clip_path = paths.clips(name);
        let clips = if clip_path.exists() {
            clips_from_jsonl(&read_to_string(&clip_path)?, &clip_path)?
        } else {
            Vec::new()
        };
        let n = expand_clips(&mut m, &clips, cfg.datasets[name].video_sampling)?;
        out.notes.push(format!("{name}: {n} frames from {} clips", clips.len()));
        write_stage_manifest(&paths, Stage::SampleFrames, &m, &mut out)?;
    }
    Ok(out)
}

fn class_map(cfg: &RunConfig) -> Result<std::borrow::Cow<'static, ClassMap>> {
    Ok(match &cfg.class_map_path {
        Some(p) => std::borrow::Cow::Owned(ClassMap::load(p)?),
        None => std::borrow::Cow::Borrowed(ClassMap::standard()),
    })
}

pub fn unify_classes(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let map = class_map(cfg)?;
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let mut m = read_stage_manifest(&paths, Stage::SampleFrames, name, Stage::UnifyClasses)?;
        let mut unmapped = BTreeSet::new();
        for r in &mut m.samples {
            r.label = map.unify(&r.label_raw, name).label();
            if r.label.is_none() {
                unmapped.insert(r.label_raw.clone());
            }
        }
        if !unmapped.is_empty() {
            out.notes.push(format!("{name}: unmapped labels {unmapped:?}"));
        }
        write_stage_manifest(&paths, Stage::UnifyClasses, &m, &mut out)?;
    }
    Ok(out)
}

fn annotator(choice: &AdapterChoice, root: &Path, work_dir: PathBuf) -> Result<Box<dyn BatchAnnotator>> {
    Ok(match choice {
        AdapterChoice::Stub => Box::new(InProcessAnnotator::new(StubAdapter::for_dataset(root)?)),
        AdapterChoice::Process(cmd) => Box::new(ProcessAdapter::new(cmd, work_dir)?),
    })
}

fn run_annotator(
    choice: &AdapterChoice,
    role: &str,
    root: &Path,
    work: &Path,
    requests: &[AnnotationRequest],
) -> Result<Vec<AnnotationResponse>> {
    if requests.is_empty() {
        return Ok(Vec::new());
    }
    let mut a = annotator(choice, root, work.join(role))?;
    let responses = a.annotate_batch(root, requests)?;
    if responses.len() != requests.len()
        || responses.iter().zip(requests).any(|(r, q)| r.sample_id != q.sample_id)
    {
        return Err(Error::Annotation(format!("{role} adapter answered out of order")));
    }
    Ok(responses)
}

/// Runs the three estimator roles. The detector sees every record; the other
/// two roles get the detected box. Roles sharing the detector's adapter reuse
/// its answers.
pub fn annotate(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let root = &cfg.datasets[name].root;
        let work = paths.root.join("annotations/work").join(sanitize(name));
        let mut m = read_stage_manifest(&paths, Stage::UnifyClasses, name, Stage::Annotate)?;
        let requests: Vec<AnnotationRequest> = m
            .samples
            .iter()
            .map(|r| AnnotationRequest::new(&r.sample_id, &media_key(r), None))
            .collect();
        let mut merged = run_annotator(&cfg.adapters.face_detector, "face_detector", root, &work, &requests)?;
        let boxed: Vec<AnnotationRequest> = requests
            .iter()
            .zip(&merged)
            .filter_map(|(q, r)| r.face().map(|f| AnnotationRequest::new(&q.sample_id, &q.image_path, Some(f.bbox))))
            .collect();
        let index: BTreeMap<String, usize> = merged.iter().enumerate().map(|(i, r)| (r.sample_id.clone(), i)).collect();
        for (choice, role) in [
            (&cfg.adapters.landmarks_pose, "landmarks_pose"),
            (&cfg.adapters.age_gender, "age_gender"),
        ] {
            if *choice == cfg.adapters.face_detector {
                continue;
            }
            let answers = run_annotator(choice, role, root, &work, &boxed)?;
            for a in answers {
                let slot = &mut merged[index[&a.sample_id]];
                if role == "landmarks_pose" {
                    (slot.eye_left_x, slot.eye_left_y, slot.eye_right_x, slot.eye_right_y) =
                        (a.eye_left_x, a.eye_left_y, a.eye_right_x, a.eye_right_y);
                    (slot.yaw, slot.pitch, slot.roll) = (a.yaw, a.pitch, a.roll);
                } else {
                    (slot.age_years, slot.gender, slot.age_gender_confidence) =
                        (a.age_years, a.gender, a.age_gender_confidence);
                }
            }
        }
        // Roles answered by a different adapter than the detector must not
        // keep the detector's values for faceless records.
        for r in &mut merged {
            if r.face().is_none() {
                *r = AnnotationResponse {
                    sample_id: std::mem::take(&mut r.sample_id),
                    ..Default::default()
                };
            }
        }

        for (rec, resp) in m.samples.iter_mut().zip(&merged) {
            rec.face_bbox = resp.face().map(|f| f.bbox);
            let lp = resp.landmarks();
            rec.eye_left = lp.map(|l| l.eye_left);
            rec.eye_right = lp.map(|l| l.eye_right);
            rec.head_pose = match lp {
                Some(l) => Some(bin_head_pose(l.pose.yaw)?),
                None => None,
            };
        }
        let ann = paths.annotations(name);
        write_responses(&ann, &merged)?;
        out.written.push(ann);
        let faces = merged.iter().filter(|r| r.face().is_some()).count();
        out.notes.push(format!("{name}: {faces}/{} faces", merged.len()));
        write_stage_manifest(&paths, Stage::Annotate, &m, &mut out)?;
    }
    Ok(out)
}

/// Fuses per-image estimates per user and assigns age groups. Dataset age
/// labels win over dataset groups, which win over estimates. Estimated ages
/// and genders fill in only what the dataset lacks.
pub fn age_groups(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let mut m = read_stage_manifest(&paths, Stage::Annotate, name, Stage::AgeGroups)?;
        let ann_path = paths.annotations(name);
        let responses = crate::adapters::read_responses(&ann_path)?;
        let by_id: BTreeMap<&str, &AnnotationResponse> = responses.iter().map(|r| (r.sample_id.as_str(), r)).collect();
        let estimate = |r: &SampleRecord| {
            let a = by_id.get(r.sample_id.as_str());
            DemographicEstimate {
                sample_id: r.sample_id.clone(),
                age_years: a.and_then(|a| a.age_years),
                gender: a.and_then(|a| a.gender),
            }
        };
        let mut per_user: BTreeMap<String, Vec<DemographicEstimate>> = BTreeMap::new();
        for r in &m.samples {
            if let Some(u) = &r.user_id {
                per_user.entry(u.clone()).or_default().push(estimate(r));
            }
        }
        let fused: BTreeMap<String, _> = per_user
            .into_iter()
            .map(|(u, e)| Ok((u, aggregate_user_demographics(&e)?)))
            .collect::<Result<_>>()?;
        let mut without = 0;
        for r in &mut m.samples {
            let own = estimate(r);
            let (age_est, gender_est) = match r.user_id.as_ref().and_then(|u| fused.get(u)) {
                Some(f) => (f.age_years, f.gender),
                None => (own.age_years, own.gender),
            };
            let group = assign_age_group(AgeEvidence {
                dataset_age: r.age_years,
                dataset_group: r.age_group,
                estimated_age: age_est,
            });
            if r.age_years.is_none() && r.age_group.is_none() {
                r.age_years = age_est;
            }
            r.age_group = group;
            if r.gender.is_none() {
                r.gender = gender_est;
            }
            if group.is_none() {
                without += 1;
            }
        }
        out.notes.push(format!("{name}: {without} records without age information"));
        write_stage_manifest(&paths, Stage::AgeGroups, &m, &mut out)?;
    }
    Ok(out)
}

pub fn exclude(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let mut m = read_stage_manifest(&paths, Stage::AgeGroups, name, Stage::Exclude)?;
        m.samples = m.samples.into_iter().map(apply_exclusion).collect();
        let violations = validate_manifest(&m);
        if let Some(v) = violations.first() {
            return Err(Error::Integrity(format!(
                "{name}: {} violation(s), first: {} ({}: {})",
                violations.len(),
                v.sample_id,
                v.rule.describe(),
                v.detail
            )));
        }
        let mut reasons: BTreeMap<&str, usize> = BTreeMap::new();
        for r in &m.samples {
            if let Some(reason) = &r.exclusion_reason {
                *reasons.entry(reason.as_str()).or_default() += 1;
            }
        }
        out.notes.push(format!("{name}: excluded {reasons:?}"));
        write_stage_manifest(&paths, Stage::Exclude, &m, &mut out)?;
    }
    Ok(out)
}

fn final_manifest(paths: &RunPaths, name: &str, next: Stage) -> Result<DatasetManifest> {
    read_stage_manifest(paths, Stage::Exclude, name, next)
}

pub fn preprocess(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let m = final_manifest(&paths, name, Stage::Preprocess)?;
        let root = cfg.datasets[name].root.clone();
        let jobs: Vec<SampleRecord> = m.included().cloned().collect();
        let processed = paths.processed();
        let results = run_bounded(jobs, cfg.jobs, |r| -> Result<PathBuf> {
            let missing = |what: &str| Error::Data {
                sample_id: r.sample_id.clone(),
                message: format!("{what} missing"),
            };
            let bbox = r.face_bbox.ok_or_else(|| missing("face_bbox"))?;
            let pt = |p: Option<Point>| p.map(|p| (p.x as f64, p.y as f64));
            let eye_left = pt(r.eye_left).ok_or_else(|| missing("eye_left"))?;
            let eye_right = pt(r.eye_right).ok_or_else(|| missing("eye_right"))?;
            let img = load_rgb(&resolve_media(&root, &r))?;
            let face = align_and_crop(&img, eye_left, eye_right, bbox)?;
            let path = processed_path(&processed, &m.name, &r.sample_id);
            save_png(&path, &face.image)?;
            Ok(path)
        })?;
        let written = results.into_iter().collect::<Result<Vec<_>>>()?;
        out.notes.push(format!("{name}: {} faces", written.len()));
        out.written.extend(written);
    }
    Ok(out)
}

fn final_manifests(cfg: &RunConfig, paths: &RunPaths, next: Stage) -> Result<Vec<DatasetManifest>> {
    cfg.datasets.keys().map(|n| final_manifest(paths, n, next)).collect()
}

pub fn stats(cfg: &RunConfig) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let manifests = final_manifests(cfg, &paths, Stage::Stats)?;
    let bundle = compute_statistics(&manifests);
    Ok(StageOutcome {
        written: bundle.write_csvs(&paths.stats())?,
        ..Default::default()
    })
}

pub fn split(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut out = StageOutcome::default();
    for name in sel.datasets(cfg)? {
        let m = final_manifest(&paths, name, Stage::Split)?;
        let plan = make_folds(&m, cfg.training.fold_count, cfg.seed)?;
        let path = paths.folds(name);
        write_string_atomic(&path, &plan.to_json())?;
        out.notes.push(format!("{name}: {:?} folds", plan.kind));
        out.written.push(path);
    }
    Ok(out)
}

fn read_folds(paths: &RunPaths, name: &str) -> Result<FoldPlan> {
    let path = paths.folds(name);
    if !path.exists() {
        return Err(Error::Config(format!("train needs {} (run `split` first)", path.display())));
    }
    FoldPlan::from_json(&read_to_string(&path)?)
}

pub fn train(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut jobs = Vec::new();
    for name in sel.datasets(cfg)? {
        for arch in sel.architectures(cfg) {
            for fold in sel.folds(cfg) {
                jobs.push((name.to_string(), arch.to_string(), fold));
            }
        }
    }
    let mut out = StageOutcome::default();
    out.planned = jobs.iter().map(|(d, a, f)| format!("train {a} on {d} fold {f}")).collect();
    if sel.dry_run {
        return Ok(out);
    }
    let mut data: BTreeMap<String, (DatasetManifest, FoldPlan)> = BTreeMap::new();
    for (name, _, _) in &jobs {
        if !data.contains_key(name) {
            data.insert(name.clone(), (final_manifest(&paths, name, Stage::Train)?, read_folds(&paths, name)?));
        }
    }
    let processed = paths.processed();
    let results = run_bounded(jobs, cfg.jobs, |(name, arch, fold)| {
        let (manifest, plan) = &data[&name];
        let split = plan
            .fold(fold)
            .ok_or_else(|| Error::Config(format!("{name} has no fold {fold}")))?;
        let dir = model_dir(&paths.models(), &name, &arch, fold);
        let (handle, meta) = train_model(&arch, manifest, split, &cfg.training, &processed, &dir, &mut NoopObserver)?;
        Ok::<_, Error>((dir, handle, meta))
    })?;
    for r in results {
        let (dir, handle, meta) = r?;
        out.notes.push(format!(
            "{}: {} epochs, best val accuracy {:.4}",
            handle.model_id, meta.epochs_run, meta.final_val_accuracy
        ));
        out.written.push(dir);
    }
    Ok(out)
}

/// Evaluates each selected model on every configured dataset. A model is
/// scored on its own dataset through its validation fold.
pub fn evaluate(cfg: &RunConfig, sel: &Selection) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let mut models = Vec::new();
    for name in sel.datasets(cfg)? {
        for arch in sel.architectures(cfg) {
            for fold in sel.folds(cfg) {
                models.push((name.to_string(), arch.to_string(), fold));
            }
        }
    }
    let mut out = StageOutcome::default();
    out.planned = models
        .iter()
        .map(|(d, a, f)| format!("evaluate {a}/{d}/fold{f} on {} datasets", cfg.datasets.len()))
        .collect();
    if sel.dry_run {
        return Ok(out);
    }
    let tests: Vec<DatasetManifest> = final_manifests(cfg, &paths, Stage::Evaluate)?;
    let mut plans = BTreeMap::new();
    for (name, _, _) in &models {
        if !plans.contains_key(name) {
            plans.insert(name.clone(), read_folds(&paths, name)?);
        }
    }
    let store = paths.results();
    let processed = paths.processed();
    let results = run_bounded(models, cfg.jobs, |(name, arch, fold)| -> Result<Vec<PathBuf>> {
        let dir = model_dir(&paths.models(), &name, &arch, fold);
        if !dir.join("metadata.json").exists() {
            return Err(Error::Config(format!("{} is not trained (run `train` first)", dir.display())));
        }
        let handle = handle_from_metadata(&read_metadata(&dir)?, &dir);
        let mut classifier = load_classifier(&handle, &cfg.training)?;
        let val_ids = &plans[&name]
            .fold(fold)
            .ok_or_else(|| Error::Config(format!("{name} has no fold {fold}")))?
            .val_ids;
        let mut written = Vec::new();
        for test in &tests {
            let holdout = (test.name == name).then_some(val_ids);
            let outcome = evaluate_model(classifier.as_mut(), &handle, test, &processed, holdout)?;
            written.push(store.put(&outcome)?);
        }
        Ok(written)
    })?;
    for r in results {
        out.written.extend(r?);
    }
    let (rows, missing) = store.compact()?;
    out.notes.push(format!("{} evaluations, {} skipped pairs", rows.len(), missing.len()));
    out.written.push(store.results_csv());
    out.written.push(store.missing_csv());
    Ok(out)
}

pub fn metrics(cfg: &RunConfig) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    let store = paths.results();
    if !store.results_csv().exists() {
        return Err(Error::Config(format!(
            "metrics needs {} (run `evaluate` first)",
            store.results_csv().display()
        )));
    }
    let tensor = build_performance_tensor(&store.read_rows()?, &store.read_missing()?)?;
    if tensor.is_empty() {
        return Err(Error::Config("no evaluation results to summarize".into()));
    }
    write_metrics(&tensor, &paths.metrics())
}

/// Writes `tensor.csv`, the similarity CSVs and `report.json` for `tensor`.
pub fn write_metrics(tensor: &PerformanceTensor, dir: &Path) -> Result<StageOutcome> {
    let mut out = StageOutcome::default();
    let tensor_path = dir.join("tensor.csv");
    write_string_atomic(&tensor_path, &tensor.to_csv())?;
    out.written.push(tensor_path);
    let report = build_similarity_report(tensor);
    out.written.extend(report.write_csvs(dir)?);
    let json = dir.join("report.json");
    write_string_atomic(&json, &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"))?;
    out.written.push(json);
    if !report.missing_pairs.is_empty() {
        out.notes.push(format!("{} dataset pairs without scores", report.missing_pairs.len()));
    }
    Ok(out)
}

pub fn report(cfg: &RunConfig) -> Result<StageOutcome> {
    let paths = RunPaths::new(&cfg.output_root);
    if !paths.tensor().exists() {
        return Err(Error::Config(format!(
            "report needs {} (run `metrics` first)",
            paths.tensor().display()
        )));
    }
    let tensor = PerformanceTensor::read_csv(&paths.tensor())?;
    let report = build_similarity_report(&tensor);
    let mut out = StageOutcome::default();
    out.written.extend(write_report_tables(&report, &paths.report())?);
    let bundle = match final_manifests(cfg, &paths, Stage::Report) {
        Ok(m) => Some(compute_statistics(&m)),
        Err(_) => {
            out.notes.push("dataset manifests not found; statistics figures skipped".into());
            None
        }
    };
    let figs = render_figures(bundle.as_ref(), Some(&report), &paths.report().join("figures"))?;
    out.written.extend(figs.written);
    out.notes.extend(figs.notices);
    Ok(out)
}

/// Generates the three desk-scale synthetic datasets under `dir/data` and
/// returns a two-fold `tiny` config writing to `dir/run`.
pub fn synthetic_run(dir: &Path, seed: u64) -> Result<RunConfig> {
    let specs = desk_scale_specs(seed);
    let summaries = generate_all(&specs, &dir.join("data"))?;
    let datasets = specs
        .iter()
        .map(|s| {
            (
                s.name.clone(),
                DatasetConfig {
                    root: summaries[&s.name].root.clone(),
                    provenance: s.provenance,
                    layout: Default::default(),
                    video_sampling: s.clip_strategy,
                },
            )
        })
        .collect();
    let mut cfg = RunConfig::new(dir.join("run"), datasets);
    cfg.training.fold_count = 2;
    cfg.set_seed(seed);
    Ok(cfg)
}

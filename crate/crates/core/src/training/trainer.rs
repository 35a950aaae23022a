//! One training cell: (dataset, architecture, fold) -> model artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::augment::{self, AugmentParams};
use super::backbone::{architecture, Adam, ArchitectureKind, MlpClassifier, Plane};
use super::config::TrainingConfig;
use super::early_stop::{EarlyStopping, StopDecision};
use super::folds::FoldSplit;
use super::model::{Classifier, ExternalModel, TinyModel};
use super::weights::compute_class_weights;
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_string_atomic};
use crate::labels::ExpressionLabel;
use crate::manifest::{DatasetManifest, SampleRecord};
use crate::media::{load_gray, processed_path};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModelHandle {
    pub model_id: String,
    pub architecture_id: String,
    pub train_dataset: String,
    pub fold_index: usize,
    pub class_set_trained: BTreeSet<ExpressionLabel>,
    pub artifact_path: PathBuf,
    pub epochs_run: usize,
}

/// Contents of `metadata.json` inside a model directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub model_id: String,
    pub architecture_id: String,
    pub train_dataset: String,
    pub fold_index: usize,
    pub class_set_trained: BTreeSet<ExpressionLabel>,
    /// Classes of the dataset that had no sample in the training split.
    pub dropped_classes: Vec<ExpressionLabel>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub final_val_accuracy: f64,
    pub val_macro_f1: Option<f64>,
    pub val_accuracy_history: Vec<f64>,
    pub train_loss_history: Vec<f64>,
    pub config_hash: String,
    pub seed: u64,
}

/// Contents of `job.json`: everything identifying one training cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub dataset: String,
    pub architecture_id: String,
    pub fold_index: usize,
    pub seed: u64,
    pub config_hash: String,
}

pub fn model_id(architecture_id: &str, dataset: &str, fold_index: usize) -> String {
    format!("{architecture_id}/{dataset}/fold{fold_index}")
}

/// `models/<dataset>/<arch>/<fold>/`
pub fn model_dir(models_root: &Path, dataset: &str, architecture_id: &str, fold_index: usize) -> PathBuf {
    models_root
        .join(crate::media::sanitize(dataset))
        .join(crate::media::sanitize(architecture_id))
        .join(fold_index.to_string())
}

/// Hooks for instrumenting a training run.
pub trait TrainingObserver {
    fn on_augment(&mut self, _sample_id: &str) {}
    fn on_epoch(&mut self, _epoch: usize, _train_loss: f64, _val_accuracy: f64) {}
}

pub struct NoopObserver;

impl TrainingObserver for NoopObserver {}

/// Records every augmented sample id.
#[derive(Debug, Default)]
pub struct AugmentationLog {
    pub augmented: BTreeMap<String, usize>,
}

impl TrainingObserver for AugmentationLog {
    fn on_augment(&mut self, sample_id: &str) {
        *self.augmented.entry(sample_id.to_string()).or_default() += 1;
    }
}

struct Example<'a> {
    record: &'a SampleRecord,
    label: ExpressionLabel,
    plane: Plane,
}

fn load_examples<'a>(
    manifest: &'a DatasetManifest,
    ids: &BTreeSet<String>,
    processed_root: &Path,
    side: usize,
    field_of_view: f64,
    keep: impl Fn(ExpressionLabel) -> bool,
) -> Result<Vec<Example<'a>>> {
    let mut out = Vec::new();
    for record in &manifest.samples {
        if !ids.contains(&record.sample_id) {
            continue;
        }
        let Some(label) = record.usable_label() else { continue };
        if !keep(label) {
            continue;
        }
        let path = processed_path(processed_root, &manifest.name, &record.sample_id);
        if !path.exists() {
            return Err(Error::Data {
                sample_id: record.sample_id.clone(),
                message: format!("processed image {} is missing", path.display()),
            });
        }
        let img = load_gray(&path)?;
        out.push(Example {
            record,
            label,
            plane: Plane::from_gray_center(&img, side, field_of_view),
        });
    }
    Ok(out)
}

fn accuracy(net: &MlpClassifier, examples: &[Example<'_>]) -> f64 {
    let correct = examples
        .iter()
        .filter(|e| {
            let p = net.probabilities(&net.input_from_plane(&e.plane));
            let best = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap_or(0);
            net.classes[best] == e.label
        })
        .count();
    correct as f64 / examples.len() as f64
}

/// Trains one cell and writes `weights.json`, `metadata.json` and `job.json`
/// into `model_dir`.
///
/// Training samples are `fold.train_ids`; validation samples are
/// `fold.val_ids` restricted to the classes that could be learned.
#[allow(clippy::too_many_arguments)]
pub fn train_model(
    architecture_id: &str,
    manifest: &DatasetManifest,
    fold: &FoldSplit,
    config: &TrainingConfig,
    processed_root: &Path,
    model_dir: &Path,
    observer: &mut dyn TrainingObserver,
) -> Result<(TrainedModelHandle, ModelMetadata)> {
    config.validate()?;
    let arch = architecture(architecture_id)?;
    let (input_side, hidden, fov) = match arch.kind {
        ArchitectureKind::Mlp {
            input_side,
            hidden,
            field_of_view,
        } => (input_side, hidden, field_of_view),
        ArchitectureKind::External => {
            return train_external(architecture_id, manifest, fold, config, model_dir);
        }
    };

    // Class set: every dataset class, minus those absent from this split.
    let mut counts: BTreeMap<ExpressionLabel, usize> = manifest.class_set().into_iter().map(|c| (c, 0)).collect();
    for record in manifest.samples.iter().filter(|r| fold.train_ids.contains(&r.sample_id)) {
        if let Some(label) = record.usable_label() {
            *counts.entry(label).or_default() += 1;
        }
    }
    let class_weights = compute_class_weights(&counts)?;
    let classes: Vec<ExpressionLabel> = class_weights.weights.keys().copied().collect();
    let class_set: BTreeSet<ExpressionLabel> = classes.iter().copied().collect();

    let train = load_examples(manifest, &fold.train_ids, processed_root, input_side, fov, |l| class_set.contains(&l))?;
    let val = load_examples(manifest, &fold.val_ids, processed_root, input_side, fov, |l| class_set.contains(&l))?;
    if val.is_empty() {
        return Err(Error::FoldConstruction(format!(
            "fold {} of {} has no validation sample in the trained classes",
            fold.fold_index, manifest.name
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ ((fold.fold_index as u64) << 32));
    let mut net = MlpClassifier::new(input_side, arch.input_channels, hidden, classes.clone(), &mut rng).with_field_of_view(fov);
    if config.pretrained_init {
        let path = config
            .pretrained_weights
            .as_ref()
            .ok_or_else(|| Error::Config("pretrained_init requires pretrained_weights".into()))?;
        let init: MlpClassifier = serde_json::from_str(&read_to_string(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if init.params.len() != net.params.len() || init.classes != net.classes || init.field_of_view != net.field_of_view {
            return Err(Error::Config(format!("{} does not match the {architecture_id} layout", path.display())));
        }
        net.params = init.params;
    }
    let mut optimizer = Adam::new(net.params.len(), config.learning_rate);
    let stopping = EarlyStopping {
        min_delta: config.early_stop_min_delta,
        patience: config.early_stop_patience,
        max_epochs: config.max_epochs,
    };
    let class_index = |l: ExpressionLabel| classes.iter().position(|c| *c == l).expect("trained class");

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut val_history = Vec::new();
    let mut loss_history = Vec::new();
    let mut best = (f64::NEG_INFINITY, 0usize, net.params.clone());
    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<Vec<f64>> = chunk
                .iter()
                .map(|&i| {
                    let e = &train[i];
                    let plane = if config.augmentation.enabled {
                        observer.on_augment(&e.record.sample_id);
                        let params = AugmentParams::sample(&config.augmentation, input_side, &mut rng);
                        augment::apply(&e.plane, &params)
                    } else {
                        e.plane.clone()
                    };
                    net.input_from_plane(&plane)
                })
                .collect();
            let batch: Vec<(&[f64], usize, f64)> = chunk
                .iter()
                .zip(&inputs)
                .map(|(&i, x)| {
                    let label = train[i].label;
                    (x.as_slice(), class_index(label), class_weights.weights[&label])
                })
                .collect();
            let (loss, grad) = net.loss_and_gradient(&batch);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training {
                    epoch,
                    message: format!("loss is {loss}"),
                });
            }
            optimizer.step(&mut net.params, &grad);
            epoch_loss += loss;
            batches += 1;
        }
        let train_loss = epoch_loss / batches.max(1) as f64;
        let val_acc = accuracy(&net, &val);
        observer.on_epoch(epoch, train_loss, val_acc);
        loss_history.push(train_loss);
        val_history.push(val_acc);
        if val_acc > best.0 {
            best = (val_acc, epoch, net.params.clone());
        }
        if stopping.decide(&val_history) == StopDecision::Stop {
            break;
        }
    }
    net.params = best.2;

    crate::fsutil::create_dir_all(model_dir)?;
    write_string_atomic(
        &model_dir.join("weights.json"),
        &serde_json::to_string(&net).expect("weights serialize"),
    )?;

    let handle = TrainedModelHandle {
        model_id: model_id(architecture_id, &manifest.name, fold.fold_index),
        architecture_id: architecture_id.to_string(),
        train_dataset: manifest.name.clone(),
        fold_index: fold.fold_index,
        class_set_trained: class_set,
        artifact_path: model_dir.to_path_buf(),
        epochs_run: val_history.len(),
    };

    // Held-out macro F1 through the same path the evaluator uses.
    let mut model = TinyModel { net };
    let val_f1 = match crate::eval::evaluate_model(&mut model, &handle, manifest, processed_root, Some(&fold.val_ids))? {
        crate::eval::EvalOutcome::Evaluated(r) => Some(r.macro_f1),
        crate::eval::EvalOutcome::Skipped(_) => None,
    };

    let metadata = ModelMetadata {
        model_id: handle.model_id.clone(),
        architecture_id: architecture_id.to_string(),
        train_dataset: manifest.name.clone(),
        fold_index: fold.fold_index,
        class_set_trained: handle.class_set_trained.clone(),
        dropped_classes: class_weights.dropped,
        epochs_run: handle.epochs_run,
        best_epoch: best.1,
        final_val_accuracy: best.0,
        val_macro_f1: val_f1,
        val_accuracy_history: val_history,
        train_loss_history: loss_history,
        config_hash: config.config_hash(),
        seed: config.seed,
    };
    write_string_atomic(
        &model_dir.join("metadata.json"),
        &(serde_json::to_string_pretty(&metadata).expect("metadata serializes") + "\n"),
    )?;
    write_job_spec(model_dir, &manifest.name, architecture_id, fold.fold_index, config)?;
    Ok((handle, metadata))
}

fn write_job_spec(model_dir: &Path, dataset: &str, architecture_id: &str, fold_index: usize, config: &TrainingConfig) -> Result<PathBuf> {
    let job = JobSpec {
        dataset: dataset.to_string(),
        architecture_id: architecture_id.to_string(),
        fold_index,
        seed: config.seed,
        config_hash: config.config_hash(),
    };
    let path = model_dir.join("job.json");
    write_string_atomic(&path, &(serde_json::to_string_pretty(&job).expect("job serializes") + "\n"))?;
    Ok(path)
}

/// External backbones: `<command...> train <job.json> <model_dir>` must leave a
/// `metadata.json` in `model_dir`. The fold's ids are written next to the job
/// spec as `train_ids.txt` / `val_ids.txt`.
fn train_external(
    architecture_id: &str,
    manifest: &DatasetManifest,
    fold: &FoldSplit,
    config: &TrainingConfig,
    model_dir: &Path,
) -> Result<(TrainedModelHandle, ModelMetadata)> {
    let (program, args) = config
        .external_command
        .split_first()
        .ok_or_else(|| Error::Config(format!("architecture `{architecture_id}` needs `external_command`")))?;
    crate::fsutil::create_dir_all(model_dir)?;
    let job = write_job_spec(model_dir, &manifest.name, architecture_id, fold.fold_index, config)?;
    let join = |ids: &BTreeSet<String>| ids.iter().map(|s| format!("{s}\n")).collect::<String>();
    write_string_atomic(&model_dir.join("train_ids.txt"), &join(&fold.train_ids))?;
    write_string_atomic(&model_dir.join("val_ids.txt"), &join(&fold.val_ids))?;
    let status = Command::new(program)
        .args(args)
        .arg("train")
        .arg(&job)
        .arg(model_dir)
        .status()
        .map_err(|e| Error::Config(format!("cannot start `{program}`: {e}")))?;
    if !status.success() {
        return Err(Error::Training {
            epoch: 0,
            message: format!("`{program} train` exited with {status}"),
        });
    }
    let metadata = read_metadata(model_dir)?;
    if metadata.epochs_run > config.max_epochs || metadata.class_set_trained.is_empty() {
        return Err(Error::Integrity(format!("{}: external metadata violates the training contract", model_dir.display())));
    }
    Ok((handle_from_metadata(&metadata, model_dir), metadata))
}

pub fn read_metadata(model_dir: &Path) -> Result<ModelMetadata> {
    let path = model_dir.join("metadata.json");
    serde_json::from_str(&read_to_string(&path)?).map_err(|e| Error::input(&path, e.line(), e.to_string()))
}

pub fn handle_from_metadata(metadata: &ModelMetadata, model_dir: &Path) -> TrainedModelHandle {
    TrainedModelHandle {
        model_id: metadata.model_id.clone(),
        architecture_id: metadata.architecture_id.clone(),
        train_dataset: metadata.train_dataset.clone(),
        fold_index: metadata.fold_index,
        class_set_trained: metadata.class_set_trained.clone(),
        artifact_path: model_dir.to_path_buf(),
        epochs_run: metadata.epochs_run,
    }
}

/// Reopens a trained model for inference.
pub fn load_classifier(handle: &TrainedModelHandle, config: &TrainingConfig) -> Result<Box<dyn Classifier + Send>> {
    match architecture(&handle.architecture_id)?.kind {
        ArchitectureKind::Mlp { .. } => {
            let path = handle.artifact_path.join("weights.json");
            let net: MlpClassifier =
                serde_json::from_str(&read_to_string(&path)?).map_err(|e| Error::input(&path, e.line(), e.to_string()))?;
            Ok(Box::new(TinyModel { net }))
        }
        ArchitectureKind::External => Ok(Box::new(ExternalModel {
            command: config.external_command.clone(),
            model_dir: handle.artifact_path.clone(),
            classes: handle.class_set_trained.iter().copied().collect(),
        })),
    }
}

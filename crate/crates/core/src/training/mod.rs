//! Cross-validation folds and the training protocol: class-weighted
//! cross-entropy, training-only augmentation, early stopping on validation
//! accuracy and best-epoch checkpointing.

pub mod augment;
pub mod backbone;
mod config;
mod early_stop;
mod folds;
mod model;
mod scheduler;
mod trainer;
mod weights;

pub use backbone::{architecture, ArchitectureKind, ArchitectureSpec, REGISTERED_ARCHITECTURES};
pub use config::{AugmentationConfig, TrainingConfig};
pub use early_stop::{early_stop_decision, EarlyStopping, StopDecision};
pub use folds::{make_folds, FoldKind, FoldPlan, FoldSplit, SUBJECT_COVERAGE};
pub use model::{Classifier, ExternalModel, FixedClassifier, TinyModel};
pub use scheduler::run_bounded;
pub use trainer::{
    handle_from_metadata, load_classifier, model_dir, model_id, read_metadata, train_model, AugmentationLog, JobSpec,
    ModelMetadata, NoopObserver, TrainedModelHandle, TrainingObserver,
};
pub use weights::{compute_class_weights, ClassWeights};

//! Normalization steps that turn raw heterogeneous datasets into uniform
//! face crops with canonical labels: frame sampling, class unification,
//! demographic aggregation, age groups, exclusion and alignment.

mod align;
mod classmap;
mod demographics;
mod exclusion;
mod sampling;

pub use align::{align_and_crop, eye_line_angle_degrees, AlignedFace, CropTransform, OUTPUT_SIDE};
pub use classmap::{ClassMap, ClassMapEntry, Unified, DATASET_WILDCARD, DEFAULT_CLASS_MAP_CSV};
pub use demographics::{
    age_group_for_years, aggregate_user_demographics, assign_age_group, AgeEvidence, DemographicEstimate,
    UserDemographics,
};
pub use exclusion::{apply_exclusion, ExclusionReason};
pub use sampling::{sample_frames, FrameRole, SampledFrame, SamplingStrategy};

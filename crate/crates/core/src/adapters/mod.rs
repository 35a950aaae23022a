//! Contracts for the face detector, landmark/head-pose estimator and
//! age/gender estimator, plus a deterministic stub backed by the synthetic
//! generator's ground truth and a batch protocol for out-of-process models.
//!
//! Adapter instances are not required to be thread-safe; callers serialize
//! calls per instance and scale by running more instances.

mod batch;
mod pose;
mod stub;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::Gender;
use crate::manifest::{BBox, Point};

pub use batch::{
    read_requests, read_responses, write_requests, write_responses, AnnotationRequest, AnnotationResponse,
    BatchAnnotator, InProcessAnnotator, ProcessAdapter,
};
pub use pose::bin_head_pose;
pub use stub::{SidecarEntry, SidecarFace, StubAdapter, SIDECAR_FILE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceDetection {
    pub bbox: BBox,
    pub confidence: f64,
}

/// Yaw is positive when the subject turns toward the image right.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeadPoseEstimate {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarksAndPose {
    pub eye_left: Point,
    pub eye_right: Point,
    pub pose: HeadPoseEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgeGenderEstimate {
    pub age_years: f64,
    pub gender: Gender,
    pub confidence: Option<f64>,
}

/// The image an adapter is asked about.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterImage {
    /// Path relative to the dataset root; the key ground-truth lookups use.
    pub media_key: String,
    pub path: PathBuf,
    pub width: u32,
    pub height: u32,
}

impl AdapterImage {
    pub fn open(root: &std::path::Path, media_key: &str) -> Result<Self> {
        let path = root.join(media_key);
        let (width, height) = crate::media::image_dimensions(&path)?;
        Ok(AdapterImage {
            media_key: media_key.to_string(),
            path,
            width,
            height,
        })
    }
}

pub trait FaceDetector {
    /// Every face found, in any order. An empty list means no face.
    fn detect_faces(&mut self, image: &AdapterImage) -> Result<Vec<FaceDetection>>;
}

pub trait LandmarkPoseEstimator {
    fn landmarks_and_pose(&mut self, image: &AdapterImage, bbox: BBox) -> Result<Option<LandmarksAndPose>>;
}

pub trait AgeGenderEstimator {
    fn age_gender(&mut self, image: &AdapterImage, bbox: BBox) -> Result<Option<AgeGenderEstimate>>;
}

/// The single highest-confidence face, or `None` when nothing was found.
pub fn detect_primary_face(detector: &mut dyn FaceDetector, image: &AdapterImage) -> Result<Option<FaceDetection>> {
    let faces = detector.detect_faces(image)?;
    for f in &faces {
        if f.bbox.width == 0 || f.bbox.height == 0 || !(0.0..=1.0).contains(&f.confidence) {
            return Err(Error::Annotation(format!("detector returned an invalid detection {f:?}")));
        }
    }
    Ok(faces.into_iter().max_by(|a, b| a.confidence.total_cmp(&b.confidence)))
}

fn check_bbox(image: &AdapterImage, bbox: BBox) -> Result<()> {
    if bbox.fits_within(image.width, image.height) {
        Ok(())
    } else {
        Err(Error::Precondition(format!(
            "box {bbox:?} is not inside the {}x{} image {}",
            image.width, image.height, image.media_key
        )))
    }
}

pub fn estimate_landmarks_and_pose(
    estimator: &mut dyn LandmarkPoseEstimator,
    image: &AdapterImage,
    bbox: BBox,
) -> Result<Option<LandmarksAndPose>> {
    check_bbox(image, bbox)?;
    let out = estimator.landmarks_and_pose(image, bbox)?;
    if let Some(lp) = &out {
        if !(-180.0..=180.0).contains(&lp.pose.yaw) {
            return Err(Error::Annotation(format!("yaw {} outside [-180, 180]", lp.pose.yaw)));
        }
    }
    Ok(out)
}

pub fn estimate_age_gender(
    estimator: &mut dyn AgeGenderEstimator,
    image: &AdapterImage,
    bbox: BBox,
) -> Result<Option<AgeGenderEstimate>> {
    check_bbox(image, bbox)?;
    let out = estimator.age_gender(image, bbox)?;
    if let Some(est) = &out {
        if !(est.age_years >= 0.0) {
            return Err(Error::Annotation(format!("negative age estimate {}", est.age_years)));
        }
    }
    Ok(out)
}

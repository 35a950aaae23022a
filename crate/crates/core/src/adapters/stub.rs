//! Ground-truth adapter for synthetic datasets.
//!
//! The synthetic generator writes a sidecar (`synthetic_meta.jsonl`) next to
//! the media, one line per image file listing the faces it drew. The stub
//! answers every adapter call from that file, so its outputs are exact and
//! depend only on the image key.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    AdapterImage, AgeGenderEstimate, AgeGenderEstimator, FaceDetection, FaceDetector, HeadPoseEstimate,
    LandmarkPoseEstimator, LandmarksAndPose,
};
use crate::error::{Error, Result};
use crate::labels::Gender;
use crate::manifest::{BBox, Point};

pub const SIDECAR_FILE: &str = "synthetic_meta.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarFace {
    pub bbox: BBox,
    pub confidence: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_left: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_right: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pose: Option<HeadPoseEstimate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    /// Image file relative to the dataset root.
    pub file: String,
    pub faces: Vec<SidecarFace>,
}

#[derive(Debug, Clone, Default)]
pub struct StubAdapter {
    faces: HashMap<String, Vec<SidecarFace>>,
}

impl StubAdapter {
    pub fn from_entries(entries: impl IntoIterator<Item = SidecarEntry>) -> Self {
        StubAdapter {
            faces: entries.into_iter().map(|e| (e.file, e.faces)).collect(),
        }
    }

    pub fn load(sidecar: &Path) -> Result<Self> {
        let file = File::open(sidecar).map_err(|e| Error::io(sidecar, e))?;
        let mut entries = Vec::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::input(sidecar, idx + 1, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: SidecarEntry =
                serde_json::from_str(&line).map_err(|e| Error::input(sidecar, idx + 1, e.to_string()))?;
            entries.push(entry);
        }
        Ok(Self::from_entries(entries))
    }

    /// Loads `<dataset_root>/synthetic_meta.jsonl`.
    pub fn for_dataset(root: &Path) -> Result<Self> {
        Self::load(&root.join(SIDECAR_FILE))
    }

    fn faces_of(&self, image: &AdapterImage) -> &[SidecarFace] {
        self.faces.get(&image.media_key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// The drawn face that best overlaps the query box.
    fn matching_face(&self, image: &AdapterImage, bbox: BBox) -> Option<&SidecarFace> {
        self.faces_of(image)
            .iter()
            .map(|f| (f.bbox.iou(&bbox), f))
            .filter(|(iou, _)| *iou > 0.0)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, f)| f)
    }
}

impl FaceDetector for StubAdapter {
    fn detect_faces(&mut self, image: &AdapterImage) -> Result<Vec<FaceDetection>> {
        Ok(self
            .faces_of(image)
            .iter()
            .map(|f| FaceDetection {
                bbox: f.bbox,
                confidence: f.confidence,
            })
            .collect())
    }
}

impl LandmarkPoseEstimator for StubAdapter {
    fn landmarks_and_pose(&mut self, image: &AdapterImage, bbox: BBox) -> Result<Option<LandmarksAndPose>> {
        Ok(self.matching_face(image, bbox).and_then(|f| match (f.eye_left, f.eye_right, f.pose) {
            (Some(eye_left), Some(eye_right), Some(pose)) => Some(LandmarksAndPose {
                eye_left,
                eye_right,
                pose,
            }),
            _ => None,
        }))
    }
}

impl AgeGenderEstimator for StubAdapter {
    fn age_gender(&mut self, image: &AdapterImage, bbox: BBox) -> Result<Option<AgeGenderEstimate>> {
        Ok(self.matching_face(image, bbox).and_then(|f| match (f.age_years, f.gender) {
            (Some(age_years), Some(gender)) => Some(AgeGenderEstimate {
                age_years,
                gender,
                confidence: Some(1.0),
            }),
            _ => None,
        }))
    }
}

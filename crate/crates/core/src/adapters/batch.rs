//! Batch protocol: a request file with one image per line goes in, a
//! response file with one annotation record per line comes out. Both are CSV
//! with a header row; absent values are empty fields.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde::{Deserialize, Serialize};

use super::{
    detect_primary_face, estimate_age_gender, estimate_landmarks_and_pose, AdapterImage, AgeGenderEstimate,
    AgeGenderEstimator, FaceDetection, FaceDetector, HeadPoseEstimate, LandmarkPoseEstimator, LandmarksAndPose,
};
use crate::error::{Error, Result};
use crate::labels::Gender;
use crate::manifest::{BBox, Point};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRequest {
    pub sample_id: String,
    /// Relative to the dataset root.
    pub image_path: String,
    /// Known face box; detection runs when absent.
    pub bbox_x: Option<u32>,
    pub bbox_y: Option<u32>,
    pub bbox_w: Option<u32>,
    pub bbox_h: Option<u32>,
}

impl AnnotationRequest {
    pub fn new(sample_id: &str, image_path: &str, bbox: Option<BBox>) -> Self {
        AnnotationRequest {
            sample_id: sample_id.to_string(),
            image_path: image_path.to_string(),
            bbox_x: bbox.map(|b| b.x),
            bbox_y: bbox.map(|b| b.y),
            bbox_w: bbox.map(|b| b.width),
            bbox_h: bbox.map(|b| b.height),
        }
    }

    pub fn bbox(&self) -> Option<BBox> {
        Some(BBox::new(self.bbox_x?, self.bbox_y?, self.bbox_w?, self.bbox_h?))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResponse {
    pub sample_id: String,
    pub face_x: Option<u32>,
    pub face_y: Option<u32>,
    pub face_w: Option<u32>,
    pub face_h: Option<u32>,
    pub face_confidence: Option<f64>,
    pub eye_left_x: Option<i32>,
    pub eye_left_y: Option<i32>,
    pub eye_right_x: Option<i32>,
    pub eye_right_y: Option<i32>,
    pub yaw: Option<f64>,
    pub pitch: Option<f64>,
    pub roll: Option<f64>,
    pub age_years: Option<f64>,
    pub gender: Option<Gender>,
    pub age_gender_confidence: Option<f64>,
}

impl AnnotationResponse {
    pub fn from_parts(
        sample_id: &str,
        face: Option<FaceDetection>,
        landmarks: Option<LandmarksAndPose>,
        age_gender: Option<AgeGenderEstimate>,
    ) -> Self {
        AnnotationResponse {
            sample_id: sample_id.to_string(),
            face_x: face.map(|f| f.bbox.x),
            face_y: face.map(|f| f.bbox.y),
            face_w: face.map(|f| f.bbox.width),
            face_h: face.map(|f| f.bbox.height),
            face_confidence: face.map(|f| f.confidence),
            eye_left_x: landmarks.map(|l| l.eye_left.x),
            eye_left_y: landmarks.map(|l| l.eye_left.y),
            eye_right_x: landmarks.map(|l| l.eye_right.x),
            eye_right_y: landmarks.map(|l| l.eye_right.y),
            yaw: landmarks.map(|l| l.pose.yaw),
            pitch: landmarks.map(|l| l.pose.pitch),
            roll: landmarks.map(|l| l.pose.roll),
            age_years: age_gender.map(|a| a.age_years),
            gender: age_gender.map(|a| a.gender),
            age_gender_confidence: age_gender.and_then(|a| a.confidence),
        }
    }

    pub fn face(&self) -> Option<FaceDetection> {
        Some(FaceDetection {
            bbox: BBox::new(self.face_x?, self.face_y?, self.face_w?, self.face_h?),
            confidence: self.face_confidence.unwrap_or(1.0),
        })
    }

    pub fn landmarks(&self) -> Option<LandmarksAndPose> {
        Some(LandmarksAndPose {
            eye_left: Point::new(self.eye_left_x?, self.eye_left_y?),
            eye_right: Point::new(self.eye_right_x?, self.eye_right_y?),
            pose: HeadPoseEstimate {
                yaw: self.yaw?,
                pitch: self.pitch.unwrap_or(0.0),
                roll: self.roll.unwrap_or(0.0),
            },
        })
    }

    pub fn age_gender(&self) -> Option<AgeGenderEstimate> {
        Some(AgeGenderEstimate {
            age_years: self.age_years?,
            gender: self.gender?,
            confidence: self.age_gender_confidence,
        })
    }
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut buf = Vec::new();
    {
        let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(&mut buf);
        writer.write_record(header)?;
        for row in rows {
            writer.serialize(row)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
    }
    crate::fsutil::write_atomic(path, |f| std::io::Write::write_all(f, &buf))
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::Reader::from_reader(file);
    let mut rows = Vec::new();
    for (idx, row) in reader.deserialize().enumerate() {
        rows.push(row.map_err(|e| Error::input(path, idx + 2, e.to_string()))?);
    }
    Ok(rows)
}

const REQUEST_HEADER: &[&str] = &["sample_id", "image_path", "bbox_x", "bbox_y", "bbox_w", "bbox_h"];
const RESPONSE_HEADER: &[&str] = &[
    "sample_id",
    "face_x",
    "face_y",
    "face_w",
    "face_h",
    "face_confidence",
    "eye_left_x",
    "eye_left_y",
    "eye_right_x",
    "eye_right_y",
    "yaw",
    "pitch",
    "roll",
    "age_years",
    "gender",
    "age_gender_confidence",
];

pub fn write_requests(path: &Path, requests: &[AnnotationRequest]) -> Result<()> {
    write_rows(path, requests, REQUEST_HEADER)
}

pub fn read_requests(path: &Path) -> Result<Vec<AnnotationRequest>> {
    read_rows(path)
}

pub fn write_responses(path: &Path, responses: &[AnnotationResponse]) -> Result<()> {
    write_rows(path, responses, RESPONSE_HEADER)
}

pub fn read_responses(path: &Path) -> Result<Vec<AnnotationResponse>> {
    read_rows(path)
}

/// Annotates a batch of images rooted at `root`. Responses come back in
/// request order, one per request.
pub trait BatchAnnotator {
    fn annotate_batch(&mut self, root: &Path, requests: &[AnnotationRequest]) -> Result<Vec<AnnotationResponse>>;
}

/// Runs the three in-process estimators on each request.
pub struct InProcessAnnotator<A> {
    pub adapter: A,
}

impl<A> InProcessAnnotator<A>
where
    A: FaceDetector + LandmarkPoseEstimator + AgeGenderEstimator,
{
    pub fn new(adapter: A) -> Self {
        InProcessAnnotator { adapter }
    }
}

impl<A> BatchAnnotator for InProcessAnnotator<A>
where
    A: FaceDetector + LandmarkPoseEstimator + AgeGenderEstimator,
{
    fn annotate_batch(&mut self, root: &Path, requests: &[AnnotationRequest]) -> Result<Vec<AnnotationResponse>> {
        let mut out = Vec::with_capacity(requests.len());
        for req in requests {
            let image = AdapterImage::open(root, &req.image_path)?;
            let face = match req.bbox() {
                Some(bbox) => Some(FaceDetection { bbox, confidence: 1.0 }),
                None => detect_primary_face(&mut self.adapter, &image)?,
            };
            let (landmarks, age_gender) = match face {
                Some(f) => (
                    estimate_landmarks_and_pose(&mut self.adapter, &image, f.bbox)?,
                    estimate_age_gender(&mut self.adapter, &image, f.bbox)?,
                ),
                None => (None, None),
            };
            out.push(AnnotationResponse::from_parts(&req.sample_id, face, landmarks, age_gender));
        }
        Ok(out)
    }
}

/// Adapter living in another process. It is invoked as
/// `<program> <args...> <dataset_root> <request.csv> <response.csv>` and must
/// write one response row per request row.
#[derive(Debug, Clone)]
pub struct ProcessAdapter {
    pub program: String,
    pub args: Vec<String>,
    pub work_dir: PathBuf,
}

impl ProcessAdapter {
    pub fn new(command: &[String], work_dir: impl Into<PathBuf>) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("empty adapter command".into()))?;
        Ok(ProcessAdapter {
            program: program.clone(),
            args: args.to_vec(),
            work_dir: work_dir.into(),
        })
    }
}

impl BatchAnnotator for ProcessAdapter {
    fn annotate_batch(&mut self, root: &Path, requests: &[AnnotationRequest]) -> Result<Vec<AnnotationResponse>> {
        crate::fsutil::create_dir_all(&self.work_dir)?;
        let request_path = self.work_dir.join("request.csv");
        let response_path = self.work_dir.join("response.csv");
        let _ = std::fs::remove_file(&response_path);
        write_requests(&request_path, requests)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(root)
            .arg(&request_path)
            .arg(&response_path)
            .status()
            .map_err(|e| Error::Annotation(format!("cannot start `{}`: {e}", self.program)))?;
        if !status.success() {
            return Err(Error::Annotation(format!("`{}` exited with {status}", self.program)));
        }
        let responses = read_responses(&response_path)?;
        if responses.len() != requests.len()
            || responses.iter().zip(requests).any(|(a, b)| a.sample_id != b.sample_id)
        {
            return Err(Error::Annotation(format!(
                "`{}` returned {} responses for {} requests, or out of order",
                self.program,
                responses.len(),
                requests.len()
            )));
        }
        Ok(responses)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_fields_mean_absent() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("resp.csv");
        let full = AnnotationResponse::from_parts(
            "a",
            Some(FaceDetection {
                bbox: BBox::new(1, 2, 3, 4),
                confidence: 0.5,
            }),
            None,
            Some(AgeGenderEstimate {
                age_years: 30.5,
                gender: Gender::Male,
                confidence: None,
            }),
        );
        let empty = AnnotationResponse {
            sample_id: "b".into(),
            ..Default::default()
        };
        write_responses(&path, &[full.clone(), empty.clone()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESPONSE_HEADER.join(","));
        assert_eq!(lines[2], "b,,,,,,,,,,,,,,,");
        assert_eq!(read_responses(&path).unwrap(), vec![full, empty]);
    }

    #[test]
    fn requests_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("req.csv");
        let reqs = vec![
            AnnotationRequest::new("x", "images/x.png", None),
            AnnotationRequest::new("y", "clips/y/000002.png", Some(BBox::new(5, 6, 7, 8))),
        ];
        write_requests(&path, &reqs).unwrap();
        let back = read_requests(&path).unwrap();
        assert_eq!(back, reqs);
        assert_eq!(back[1].bbox(), Some(BBox::new(5, 6, 7, 8)));
    }

    #[test]
    fn failing_process_is_an_annotation_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut adapter = ProcessAdapter::new(&["false".to_string()], dir.path()).unwrap();
        let err = adapter
            .annotate_batch(dir.path(), &[AnnotationRequest::new("x", "x.png", None)])
            .unwrap_err();
        assert!(matches!(err, Error::Annotation(_)));
    }
}

//! Sample records, dataset manifests and the line-delimited manifest format.
//!
//! A manifest file starts with one header line carrying the dataset name and
//! provenance, followed by one JSON object per sample. Absent optional fields
//! are omitted from the line rather than written as `null`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{AgeGroup, ExpressionLabel, Gender, HeadPose, MediaType, Provenance};
use crate::normalize::age_group_for_years;

/// Axis-aligned box in integer pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        BBox { x, y, width, height }
    }

    pub fn right(&self) -> u64 {
        self.x as u64 + self.width as u64
    }

    pub fn bottom(&self) -> u64 {
        self.y as u64 + self.height as u64
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + self.width as f64 / 2.0,
            self.y as f64 + self.height as f64 / 2.0,
        )
    }

    pub fn fits_within(&self, width: u32, height: u32) -> bool {
        self.width > 0 && self.height > 0 && self.right() <= width as u64 && self.bottom() <= height as u64
    }

    pub fn intersects(&self, width: u32, height: u32) -> bool {
        (self.x as u64) < width as u64 && (self.y as u64) < height as u64 && self.width > 0 && self.height > 0
    }

    /// Intersection over union with another box.
    pub fn iou(&self, other: &BBox) -> f64 {
        let x0 = self.x.max(other.x) as f64;
        let y0 = self.y.max(other.y) as f64;
        let x1 = self.right().min(other.right()) as f64;
        let y1 = self.bottom().min(other.bottom()) as f64;
        let inter = (x1 - x0).max(0.0) * (y1 - y0).max(0.0);
        let union = self.width as f64 * self.height as f64 + other.width as f64 * other.height as f64 - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }
}

impl From<[u32; 4]> for BBox {
    fn from(v: [u32; 4]) -> Self {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x, b.y, b.width, b.height]
    }
}

/// Integer pixel position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[i32; 2]", into = "[i32; 2]")]
pub struct Point {
    pub x: i32,
    pub y: i32,
}

impl Point {
    pub fn new(x: i32, y: i32) -> Self {
        Point { x, y }
    }
}

impl From<[i32; 2]> for Point {
    fn from(v: [i32; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [i32; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleRecord {
    pub dataset: String,
    pub sample_id: String,
    pub media_path: String,
    pub media_type: MediaType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u32>,
    pub label_raw: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<ExpressionLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_years: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<Gender>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age_group: Option<AgeGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub head_pose: Option<HeadPose>,
    pub excluded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusion_reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub face_bbox: Option<BBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_left: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eye_right: Option<Point>,
}

impl SampleRecord {
    /// A still image with only the required fields set.
    pub fn image(dataset: &str, sample_id: &str, media_path: &str, label_raw: &str) -> Self {
        SampleRecord {
            dataset: dataset.to_string(),
            sample_id: sample_id.to_string(),
            media_path: media_path.to_string(),
            media_type: MediaType::Image,
            frame_index: None,
            label_raw: label_raw.to_string(),
            label: None,
            user_id: None,
            age_years: None,
            gender: None,
            age_group: None,
            head_pose: None,
            excluded: false,
            exclusion_reason: None,
            face_bbox: None,
            eye_left: None,
            eye_right: None,
        }
    }

    /// A single frame of a video clip.
    pub fn frame(dataset: &str, sample_id: &str, media_path: &str, frame_index: u32, label_raw: &str) -> Self {
        SampleRecord {
            media_type: MediaType::Video,
            frame_index: Some(frame_index),
            ..SampleRecord::image(dataset, sample_id, media_path, label_raw)
        }
    }

    /// Kept for training and evaluation: not excluded and carrying a canonical label.
    pub fn usable_label(&self) -> Option<ExpressionLabel> {
        if self.excluded {
            None
        } else {
            self.label
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ManifestHeader {
    name: String,
    provenance: Provenance,
}

#[derive(Debug, Serialize, Deserialize)]
struct HeaderLine {
    manifest: ManifestHeader,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub provenance: Provenance,
    pub samples: Vec<SampleRecord>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, provenance: Provenance) -> Self {
        DatasetManifest {
            name: name.into(),
            provenance,
            samples: Vec::new(),
        }
    }

    /// Canonical labels present among non-excluded samples, always recomputed.
    pub fn class_set(&self) -> BTreeSet<ExpressionLabel> {
        self.samples.iter().filter_map(SampleRecord::usable_label).collect()
    }

    pub fn included(&self) -> impl Iterator<Item = &SampleRecord> {
        self.samples.iter().filter(|s| !s.excluded)
    }

    pub fn get(&self, sample_id: &str) -> Option<&SampleRecord> {
        self.samples.iter().find(|s| s.sample_id == sample_id)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file), path)
    }

    /// Parses a manifest; `origin` is only used in error messages.
    pub fn from_reader(reader: impl BufRead, origin: &Path) -> Result<Self> {
        let mut header: Option<ManifestHeader> = None;
        let mut samples = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::input(origin, line_no, e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            if header.is_none() {
                let parsed: HeaderLine = serde_json::from_str(&line)
                    .map_err(|e| Error::input(origin, line_no, format!("expected manifest header: {e}")))?;
                header = Some(parsed.manifest);
                continue;
            }
            let record: SampleRecord =
                serde_json::from_str(&line).map_err(|e| Error::input(origin, line_no, e.to_string()))?;
            samples.push(record);
        }
        let header = header.ok_or_else(|| Error::input(origin, 1, "empty manifest"))?;
        Ok(DatasetManifest {
            name: header.name,
            provenance: header.provenance,
            samples,
        })
    }

    pub fn to_writer(&self, mut out: impl Write) -> std::io::Result<()> {
        let header = HeaderLine {
            manifest: ManifestHeader {
                name: self.name.clone(),
                provenance: self.provenance,
            },
        };
        serde_json::to_writer(&mut out, &header)?;
        out.write_all(b"\n")?;
        for record in &self.samples {
            serde_json::to_writer(&mut out, record)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_string_lines(&self) -> String {
        let mut buf = Vec::new();
        self.to_writer(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Writes atomically (temp file in the same directory, then rename).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        crate::fsutil::write_atomic(path, |w| self.to_writer(BufWriter::new(w)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    DuplicateSampleId,
    DatasetMismatch,
    ExclusionReason,
    FrameIndex,
    AgeGroupConsistency,
    AgeRange,
    BBoxDegenerate,
    BBoxOutOfBounds,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::DuplicateSampleId => "sample_id must be unique within a manifest",
            Rule::DatasetMismatch => "record dataset must match the manifest name",
            Rule::ExclusionReason => "excluded must be true exactly when exclusion_reason is present",
            Rule::FrameIndex => "frame_index must be present for video frames and absent for images",
            Rule::AgeGroupConsistency => "age_group must agree with age_years",
            Rule::AgeRange => "age_years must be finite and nonnegative",
            Rule::BBoxDegenerate => "face_bbox must have positive width and height",
            Rule::BBoxOutOfBounds => "face_bbox must lie within the image bounds",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub sample_id: String,
    pub rule: Rule,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.sample_id, self.rule.describe())?;
        if !self.detail.is_empty() {
            write!(f, " ({})", self.detail)?;
        }
        Ok(())
    }
}

/// Checks every record and manifest invariant that can be decided without
/// touching the media files. An empty result means the manifest is valid.
pub fn validate_manifest(manifest: &DatasetManifest) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen = HashSet::new();
    for record in &manifest.samples {
        let mut push = |rule: Rule, detail: String| {
            violations.push(Violation {
                sample_id: record.sample_id.clone(),
                rule,
                detail,
            })
        };
        if !seen.insert(record.sample_id.as_str()) {
            push(Rule::DuplicateSampleId, String::new());
        }
        if record.dataset != manifest.name {
            push(Rule::DatasetMismatch, format!("`{}` vs `{}`", record.dataset, manifest.name));
        }
        if record.excluded != record.exclusion_reason.is_some() {
            push(
                Rule::ExclusionReason,
                format!("excluded={} reason={:?}", record.excluded, record.exclusion_reason),
            );
        }
        let frame_ok = match record.media_type {
            MediaType::Image => record.frame_index.is_none(),
            MediaType::Video => record.frame_index.is_some(),
        };
        if !frame_ok {
            push(Rule::FrameIndex, format!("media_type={}", record.media_type));
        }
        if let Some(age) = record.age_years {
            if !age.is_finite() || age < 0.0 {
                push(Rule::AgeRange, format!("age_years={age}"));
            } else if let Some(group) = record.age_group {
                let expected = age_group_for_years(age);
                if expected != group {
                    push(
                        Rule::AgeGroupConsistency,
                        format!("age_years={age} implies {expected}, found {group}"),
                    );
                }
            }
        }
        if let Some(bbox) = record.face_bbox {
            if bbox.width == 0 || bbox.height == 0 {
                push(Rule::BBoxDegenerate, format!("{bbox:?}"));
            }
        }
    }
    violations
}

/// Like [`validate_manifest`], additionally checking face boxes against the
/// dimensions of the referenced media under `media_root`.
pub fn validate_manifest_against_media(manifest: &DatasetManifest, media_root: &Path) -> Result<Vec<Violation>> {
    let mut violations = validate_manifest(manifest);
    for record in &manifest.samples {
        let Some(bbox) = record.face_bbox else { continue };
        let path = crate::media::resolve_media(media_root, record);
        let (w, h) = image::image_dimensions(&path).map_err(|e| Error::Image {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if !bbox.fits_within(w, h) {
            violations.push(Violation {
                sample_id: record.sample_id.clone(),
                rule: Rule::BBoxOutOfBounds,
                detail: format!("{bbox:?} in {w}x{h}"),
            });
        }
    }
    Ok(violations)
}

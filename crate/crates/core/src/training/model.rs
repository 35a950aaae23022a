//! Inference-side view of trained models.

use std::path::{Path, PathBuf};
use std::process::Command;

use crate::error::{Error, Result};
use crate::labels::ExpressionLabel;
use crate::media::load_gray;

use super::backbone::{MlpClassifier, Plane};

/// Anything that scores processed face images over its trained classes.
pub trait Classifier {
    /// Class order of every score vector.
    fn classes(&self) -> &[ExpressionLabel];

    /// One score vector per image (higher is more likely).
    fn predict_scores(&mut self, images: &[PathBuf]) -> Result<Vec<Vec<f64>>>;
}

pub struct TinyModel {
    pub net: MlpClassifier,
}

impl TinyModel {
    pub fn scores_for_plane(&self, plane: &Plane) -> Vec<f64> {
        self.net.probabilities(&self.net.input_from_plane(plane))
    }
}

impl Classifier for TinyModel {
    fn classes(&self) -> &[ExpressionLabel] {
        &self.net.classes
    }

    fn predict_scores(&mut self, images: &[PathBuf]) -> Result<Vec<Vec<f64>>> {
        images
            .iter()
            .map(|path| {
                let img = load_gray(path)?;
                Ok(self.scores_for_plane(&self.net.plane_from_gray(&img)))
            })
            .collect()
    }
}

/// Always prefers one class; a floor baseline and a test double.
pub struct FixedClassifier {
    pub classes: Vec<ExpressionLabel>,
    pub preferred: ExpressionLabel,
}

impl Classifier for FixedClassifier {
    fn classes(&self) -> &[ExpressionLabel] {
        &self.classes
    }

    fn predict_scores(&mut self, images: &[PathBuf]) -> Result<Vec<Vec<f64>>> {
        let row: Vec<f64> = self
            .classes
            .iter()
            .map(|c| if *c == self.preferred { 1.0 } else { 0.0 })
            .collect();
        Ok(vec![row; images.len()])
    }
}

/// Model served by an external command:
/// `<command...> predict <model_dir> <request.csv> <scores.csv>`.
/// The request has one `image_path` column; the response has one column per
/// class (named by label) and one row per request row.
pub struct ExternalModel {
    pub command: Vec<String>,
    pub model_dir: PathBuf,
    pub classes: Vec<ExpressionLabel>,
}

impl Classifier for ExternalModel {
    fn classes(&self) -> &[ExpressionLabel] {
        &self.classes
    }

    fn predict_scores(&mut self, images: &[PathBuf]) -> Result<Vec<Vec<f64>>> {
        let (program, args) = self
            .command
            .split_first()
            .ok_or_else(|| Error::Config("external architecture needs `external_command`".into()))?;
        let request = self.model_dir.join("predict_request.csv");
        let response = self.model_dir.join("predict_scores.csv");
        let mut body = String::from("image_path\n");
        for p in images {
            body.push_str(&p.to_string_lossy());
            body.push('\n');
        }
        crate::fsutil::write_string_atomic(&request, &body)?;
        let status = Command::new(program)
            .args(args)
            .arg("predict")
            .arg(&self.model_dir)
            .arg(&request)
            .arg(&response)
            .status()
            .map_err(|e| Error::Config(format!("cannot start `{program}`: {e}")))?;
        if !status.success() {
            return Err(Error::Integrity(format!("`{program} predict` exited with {status}")));
        }
        read_score_table(&response, &self.classes, images.len())
    }
}

fn read_score_table(path: &Path, classes: &[ExpressionLabel], expected_rows: usize) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header = reader.headers()?.clone();
    let columns: Vec<usize> = classes
        .iter()
        .map(|c| {
            header
                .iter()
                .position(|h| h == c.as_str())
                .ok_or_else(|| Error::input(path, 1, format!("missing score column `{c}`")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = columns
            .iter()
            .map(|&c| {
                record
                    .get(c)
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::input(path, idx + 2, "unparsable score"))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.len() != expected_rows {
        return Err(Error::input(
            path,
            rows.len() + 1,
            format!("expected {expected_rows} score rows, found {}", rows.len()),
        ));
    }
    Ok(rows)
}

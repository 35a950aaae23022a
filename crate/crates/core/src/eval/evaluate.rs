use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::f1::{macro_f1, per_class_f1, ConfusionMatrix};
use crate::error::{Error, Result};
use crate::labels::ExpressionLabel;
use crate::manifest::{DatasetManifest, SampleRecord};
use crate::media::processed_path;
use crate::training::{Classifier, TrainedModelHandle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub model_id: String,
    pub architecture_id: String,
    pub train_dataset: String,
    pub fold_index: usize,
    pub test_dataset: String,
    pub classes_used: BTreeSet<ExpressionLabel>,
    pub n_test: usize,
    pub confusion: ConfusionMatrix,
    /// Only classes with test support.
    pub per_class_f1: BTreeMap<ExpressionLabel, f64>,
    pub macro_f1: f64,
}

/// A (model, test set) pair that could not be scored; kept as missing, never 0.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingPair {
    pub architecture_id: String,
    pub train_dataset: String,
    pub fold_index: usize,
    pub test_dataset: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalOutcome {
    Evaluated(EvalResult),
    Skipped(MissingPair),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilteredTest<'a> {
    pub samples: Vec<&'a SampleRecord>,
    pub classes_used: BTreeSet<ExpressionLabel>,
}

/// Keeps the non-excluded test samples whose label the model was trained on.
/// Returns `None` when the trained and test class sets do not intersect.
pub fn class_intersection_filter<'a>(
    class_set_trained: &BTreeSet<ExpressionLabel>,
    test: &'a DatasetManifest,
) -> Option<FilteredTest<'a>> {
    let classes_used: BTreeSet<ExpressionLabel> = class_set_trained.intersection(&test.class_set()).copied().collect();
    if classes_used.is_empty() {
        return None;
    }
    let samples = test
        .samples
        .iter()
        .filter(|s| s.usable_label().is_some_and(|l| classes_used.contains(&l)))
        .collect();
    Some(FilteredTest { samples, classes_used })
}

/// Scores `classifier` on `test`. With `holdout`, only those sample ids are
/// used (a model is scored on its own dataset through its validation fold).
///
/// Predictions are the arg-max over the classes in use, so the confusion
/// matrix is square over `classes_used` and sums to `n_test`.
pub fn evaluate_model(
    classifier: &mut dyn Classifier,
    handle: &TrainedModelHandle,
    test: &DatasetManifest,
    processed_root: &Path,
    holdout: Option<&BTreeSet<String>>,
) -> Result<EvalOutcome> {
    let skip = |reason: &str| {
        EvalOutcome::Skipped(MissingPair {
            architecture_id: handle.architecture_id.clone(),
            train_dataset: handle.train_dataset.clone(),
            fold_index: handle.fold_index,
            test_dataset: test.name.clone(),
            reason: reason.to_string(),
        })
    };
    let Some(filtered) = class_intersection_filter(&handle.class_set_trained, test) else {
        return Ok(skip("empty_class_intersection"));
    };
    let mut samples: Vec<&SampleRecord> = filtered
        .samples
        .into_iter()
        .filter(|s| holdout.is_none_or(|ids| ids.contains(&s.sample_id)))
        .collect();
    if samples.is_empty() {
        return Ok(skip("empty_test_set"));
    }
    samples.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));

    let paths: Vec<PathBuf> = samples
        .iter()
        .map(|s| {
            let p = processed_path(processed_root, &test.name, &s.sample_id);
            if p.exists() {
                Ok(p)
            } else {
                Err(Error::Data {
                    sample_id: s.sample_id.clone(),
                    message: format!("processed image {} is missing", p.display()),
                })
            }
        })
        .collect::<Result<_>>()?;

    let model_classes = classifier.classes().to_vec();
    let columns: Vec<(usize, ExpressionLabel)> = model_classes
        .iter()
        .enumerate()
        .filter(|(_, c)| filtered.classes_used.contains(c))
        .map(|(i, c)| (i, *c))
        .collect();
    if columns.len() != filtered.classes_used.len() {
        return Err(Error::Integrity(format!(
            "{} does not score every class it claims to be trained on",
            handle.model_id
        )));
    }

    let scores = classifier.predict_scores(&paths)?;
    if scores.len() != samples.len() {
        return Err(Error::Integrity(format!("{} returned {} score rows", handle.model_id, scores.len())));
    }
    let mut confusion = ConfusionMatrix::new(filtered.classes_used.iter().copied().collect());
    for (sample, row) in samples.iter().zip(&scores) {
        // First maximum wins on ties.
        let mut best = columns[0];
        for &(i, c) in &columns[1..] {
            if row[i] > row[best.0] {
                best = (i, c);
            }
        }
        confusion.record(sample.label.expect("filtered samples are labelled"), best.1);
    }

    let per_class: BTreeMap<ExpressionLabel, f64> = confusion
        .classes
        .iter()
        .zip(per_class_f1(&confusion.counts)?)
        .filter_map(|(c, f)| f.map(|f| (*c, f)))
        .collect();
    let macro_score = macro_f1(&confusion.counts)?;
    Ok(EvalOutcome::Evaluated(EvalResult {
        model_id: handle.model_id.clone(),
        architecture_id: handle.architecture_id.clone(),
        train_dataset: handle.train_dataset.clone(),
        fold_index: handle.fold_index,
        test_dataset: test.name.clone(),
        classes_used: filtered.classes_used,
        n_test: samples.len(),
        confusion,
        per_class_f1: per_class,
        macro_f1: macro_score,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Provenance;
    use crate::training::FixedClassifier;
    use ExpressionLabel::*;

    fn test_set(labels: &[(ExpressionLabel, usize)]) -> DatasetManifest {
        let mut m = DatasetManifest::new("T", Provenance::WebManual);
        for (label, n) in labels {
            for i in 0..*n {
                let mut r = SampleRecord::image("T", &format!("{label}_{i:02}"), "x.png", label.as_str());
                r.label = Some(*label);
                m.samples.push(r);
            }
        }
        m
    }

    fn handle(classes: &[ExpressionLabel]) -> TrainedModelHandle {
        TrainedModelHandle {
            model_id: "tiny/S/fold0".into(),
            architecture_id: "tiny".into(),
            train_dataset: "S".into(),
            fold_index: 0,
            class_set_trained: classes.iter().copied().collect(),
            artifact_path: PathBuf::new(),
            epochs_run: 1,
        }
    }

    fn write_blank_images(root: &Path, m: &DatasetManifest) {
        for s in &m.samples {
            let p = processed_path(root, &m.name, &s.sample_id);
            crate::media::save_png(&p, &image::GrayImage::new(4, 4)).unwrap();
        }
    }

    #[test]
    fn full_overlap_keeps_everything() {
        let m = test_set(&ExpressionLabel::ALL.iter().map(|l| (*l, 2)).collect::<Vec<_>>());
        let f = class_intersection_filter(&ExpressionLabel::ALL.iter().copied().collect(), &m).unwrap();
        assert_eq!(f.samples.len(), 14);
        assert_eq!(f.classes_used.len(), 7);
    }

    #[test]
    fn untrained_neutral_is_dropped() {
        let m = test_set(&[(Happiness, 3), (Neutral, 4)]);
        let trained: BTreeSet<_> = [Anger, Happiness, Sadness].into_iter().collect();
        let f = class_intersection_filter(&trained, &m).unwrap();
        assert_eq!(f.samples.len(), 3);
        assert!(f.samples.iter().all(|s| s.label == Some(Happiness)));
    }

    #[test]
    fn disjoint_classes_skip_the_pair() {
        let m = test_set(&[(Anger, 3), (Fear, 3)]);
        assert!(class_intersection_filter(&[Happiness].into_iter().collect(), &m).is_none());
        let mut c = FixedClassifier {
            classes: vec![Happiness],
            preferred: Happiness,
        };
        let out = evaluate_model(&mut c, &handle(&[Happiness]), &m, Path::new("/nonexistent"), None).unwrap();
        match out {
            EvalOutcome::Skipped(p) => assert_eq!(p.reason, "empty_class_intersection"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn constant_predictor_scores_one_third() {
        let dir = tempfile::tempdir().unwrap();
        let m = test_set(&[(Happiness, 10), (Sadness, 10)]);
        write_blank_images(dir.path(), &m);
        let mut c = FixedClassifier {
            classes: vec![Happiness, Sadness],
            preferred: Happiness,
        };
        let EvalOutcome::Evaluated(r) = evaluate_model(&mut c, &handle(&[Happiness, Sadness]), &m, dir.path(), None).unwrap() else {
            panic!("skipped")
        };
        assert_eq!(r.confusion.counts, vec![vec![10, 0], vec![10, 0]]);
        assert_eq!(r.n_test, 20);
        assert_eq!(r.confusion.total(), 20);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class_f1[&Happiness] - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_class_f1[&Sadness], 0.0);
    }

    #[test]
    fn missing_processed_image_names_the_sample() {
        let m = test_set(&[(Happiness, 1), (Sadness, 1)]);
        let mut c = FixedClassifier {
            classes: vec![Happiness, Sadness],
            preferred: Happiness,
        };
        let err = evaluate_model(&mut c, &handle(&[Happiness, Sadness]), &m, Path::new("/nonexistent"), None).unwrap_err();
        assert!(matches!(err, Error::Data { .. }));
    }

    #[test]
    fn holdout_restricts_samples() {
        let dir = tempfile::tempdir().unwrap();
        let m = test_set(&[(Happiness, 4), (Sadness, 4)]);
        write_blank_images(dir.path(), &m);
        let ids: BTreeSet<String> = ["happiness_00", "sadness_01"].iter().map(|s| s.to_string()).collect();
        let mut c = FixedClassifier {
            classes: vec![Happiness, Sadness],
            preferred: Sadness,
        };
        let EvalOutcome::Evaluated(r) = evaluate_model(&mut c, &handle(&[Happiness, Sadness]), &m, dir.path(), Some(&ids)).unwrap() else {
            panic!("skipped")
        };
        assert_eq!(r.n_test, 2);
    }
}

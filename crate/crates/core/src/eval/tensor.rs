//! Fold-averaged performance tensor indexed by (architecture, train, test).

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::evaluate::MissingPair;
use super::results::{EvalKey, EvalRow};
use crate::error::{Error, Result};
use crate::fsutil::read_to_string;

pub type TensorKey = (String, String, String);

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PerformanceTensor {
    pub scores: BTreeMap<TensorKey, f64>,
    pub fold_counts: BTreeMap<TensorKey, usize>,
    /// Triples with at least one skipped fold and no scored fold.
    pub missing: BTreeSet<TensorKey>,
}

impl PerformanceTensor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a single-fold entry; handy for fixtures.
    pub fn insert(&mut self, arch: &str, train: &str, test: &str, score: f64) {
        let key = (arch.to_string(), train.to_string(), test.to_string());
        self.missing.remove(&key);
        self.scores.insert(key.clone(), score);
        self.fold_counts.insert(key, 1);
    }

    pub fn get(&self, arch: &str, train: &str, test: &str) -> Option<f64> {
        self.scores
            .get(&(arch.to_string(), train.to_string(), test.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn architectures(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.scores.keys().chain(&self.missing).map(|k| &k.0).collect();
        set.into_iter().cloned().collect()
    }

    /// Every dataset seen as train or test, sorted.
    pub fn datasets(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self
            .scores
            .keys()
            .chain(&self.missing)
            .flat_map(|k| [&k.1, &k.2])
            .collect();
        set.into_iter().cloned().collect()
    }

    pub fn restrict_to_architecture(&self, arch: &str) -> PerformanceTensor {
        let keep = |k: &TensorKey| k.0 == arch;
        PerformanceTensor {
            scores: self.scores.iter().filter(|(k, _)| keep(k)).map(|(k, v)| (k.clone(), *v)).collect(),
            fold_counts: self
                .fold_counts
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
            missing: self.missing.iter().filter(|k| keep(k)).cloned().collect(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["architecture_id", "train_dataset", "test_dataset", "score", "fold_count"])
            .expect("writing to memory");
        for (k, v) in &self.scores {
            w.write_record([&k.0, &k.1, &k.2, &v.to_string(), &self.fold_counts[k].to_string()])
                .expect("writing to memory");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 input")
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let mut t = PerformanceTensor::new();
        for (idx, record) in reader.records().enumerate() {
            let record = record?;
            let line = idx + 2;
            if record.len() < 4 {
                return Err(Error::input(origin, line, "expected architecture_id,train_dataset,test_dataset,score"));
            }
            let score: f64 = record[3]
                .parse()
                .map_err(|_| Error::input(origin, line, format!("bad score `{}`", &record[3])))?;
            if !(0.0..=1.0).contains(&score) {
                return Err(Error::input(origin, line, format!("score {score} outside [0, 1]")));
            }
            let folds: usize = match record.get(4) {
                Some(s) if !s.is_empty() => s
                    .parse()
                    .map_err(|_| Error::input(origin, line, format!("bad fold_count `{s}`")))?,
                _ => 1,
            };
            let key = (record[0].to_string(), record[1].to_string(), record[2].to_string());
            if t.scores.insert(key.clone(), score).is_some() {
                return Err(Error::input(origin, line, "duplicate tensor entry"));
            }
            t.fold_counts.insert(key, folds);
        }
        Ok(t)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv_str(&read_to_string(path)?, path)
    }
}

/// Averages macro F1 over folds per (architecture, train, test).
///
/// Exact duplicate rows collapse; rows sharing a key with different scores
/// are an integrity error.
pub fn build_performance_tensor(rows: &[EvalRow], skipped: &[MissingPair]) -> Result<PerformanceTensor> {
    let mut by_key: BTreeMap<EvalKey, &EvalRow> = BTreeMap::new();
    for r in rows {
        if !(0.0..=1.0).contains(&r.macro_f1) {
            return Err(Error::Integrity(format!("{} on {}: macro F1 {} outside [0, 1]", r.model_id, r.test_dataset, r.macro_f1)));
        }
        if let Some(prev) = by_key.insert(r.key(), r) {
            if prev != r {
                return Err(Error::Integrity(format!(
                    "conflicting results for {}/{}/fold{} on {}",
                    r.architecture_id, r.train_dataset, r.fold_index, r.test_dataset
                )));
            }
        }
    }
    let mut sums: BTreeMap<TensorKey, (f64, usize)> = BTreeMap::new();
    for (k, r) in &by_key {
        let e = sums
            .entry((k.architecture_id.clone(), k.train_dataset.clone(), k.test_dataset.clone()))
            .or_default();
        e.0 += r.macro_f1;
        e.1 += 1;
    }
    let mut t = PerformanceTensor::new();
    for (k, (sum, n)) in sums {
        t.scores.insert(k.clone(), sum / n as f64);
        t.fold_counts.insert(k, n);
    }
    for m in skipped {
        let k = (m.architecture_id.clone(), m.train_dataset.clone(), m.test_dataset.clone());
        if !t.scores.contains_key(&k) {
            t.missing.insert(k);
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::ExpressionLabel;

    fn row(arch: &str, train: &str, fold: usize, test: &str, f1: f64) -> EvalRow {
        EvalRow {
            model_id: format!("{arch}/{train}/fold{fold}"),
            architecture_id: arch.into(),
            train_dataset: train.into(),
            fold_index: fold,
            test_dataset: test.into(),
            n_test: 4,
            classes_used: [ExpressionLabel::Anger].into_iter().collect(),
            macro_f1: f1,
            per_class_f1: [(ExpressionLabel::Anger, f1)].into_iter().collect(),
        }
    }

    #[test]
    fn averages_folds() {
        let t = build_performance_tensor(&[row("a", "X", 0, "Y", 0.8), row("a", "X", 1, "Y", 0.9)], &[]).unwrap();
        assert!((t.get("a", "X", "Y").unwrap() - 0.85).abs() < 1e-12);
        assert_eq!(t.fold_counts[&("a".into(), "X".into(), "Y".into())], 2);
    }

    #[test]
    fn single_fold() {
        let t = build_performance_tensor(&[row("a", "X", 3, "Y", 0.42)], &[]).unwrap();
        assert_eq!(t.get("a", "X", "Y"), Some(0.42));
        assert_eq!(t.fold_counts.values().copied().collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn grid_cardinality() {
        let mut rows = Vec::new();
        for arch in ["a", "b"] {
            for train in ["X", "Y"] {
                for test in ["X", "Y"] {
                    for fold in 0..2 {
                        rows.push(row(arch, train, fold, test, 0.5));
                    }
                }
            }
        }
        assert_eq!(rows.len(), 16);
        let t = build_performance_tensor(&rows, &[]).unwrap();
        assert_eq!(t.len(), 8);
        assert!(t.fold_counts.values().all(|&n| n == 2));
    }

    #[test]
    fn conflicting_duplicate_is_rejected() {
        let err = build_performance_tensor(&[row("a", "X", 0, "Y", 0.8), row("a", "X", 0, "Y", 0.7)], &[]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
        let ok = build_performance_tensor(&[row("a", "X", 0, "Y", 0.8), row("a", "X", 0, "Y", 0.8)], &[]).unwrap();
        assert_eq!(ok.fold_counts.values().sum::<usize>(), 1);
    }

    #[test]
    fn skipped_pairs_stay_missing() {
        let skip = MissingPair {
            architecture_id: "a".into(),
            train_dataset: "X".into(),
            fold_index: 0,
            test_dataset: "Z".into(),
            reason: "empty_class_intersection".into(),
        };
        let t = build_performance_tensor(&[row("a", "X", 0, "Y", 0.8)], &[skip]).unwrap();
        assert_eq!(t.get("a", "X", "Z"), None);
        assert!(t.missing.contains(&("a".into(), "X".into(), "Z".into())));
        assert_eq!(t.datasets(), vec!["X", "Y", "Z"]);
    }

    #[test]
    fn csv_round_trip() {
        let t = build_performance_tensor(&[row("a", "X", 0, "Y", 0.8), row("a", "X", 1, "Y", 0.7)], &[]).unwrap();
        let back = PerformanceTensor::from_csv_str(&t.to_csv(), Path::new("t.csv")).unwrap();
        assert_eq!(back.scores, t.scores);
        assert_eq!(back.fold_counts, t.fold_counts);
    }
}

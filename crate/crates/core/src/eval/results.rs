//! The evaluation results store.
//!
//! Each evaluation job writes one JSON file under `evals/`, keyed by
//! (arch, train, fold, test), with write-then-rename. `results.csv` and
//! `missing_pairs.csv` are regenerated from those files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::evaluate::{EvalOutcome, EvalResult, MissingPair};
use crate::error::{Error, Result};
use crate::fsutil::{read_to_string, write_string_atomic};
use crate::labels::ExpressionLabel;
use crate::media::sanitize;

pub const RESULTS_CSV: &str = "results.csv";
pub const MISSING_CSV: &str = "missing_pairs.csv";
pub const RESULTS_HEADER: &str =
    "model_id,architecture_id,train_dataset,fold_index,test_dataset,n_test,classes_used,macro_f1,per_class_f1";

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub model_id: String,
    pub architecture_id: String,
    pub train_dataset: String,
    pub fold_index: usize,
    pub test_dataset: String,
    pub n_test: usize,
    pub classes_used: BTreeSet<ExpressionLabel>,
    pub macro_f1: f64,
    pub per_class_f1: BTreeMap<ExpressionLabel, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EvalKey {
    pub architecture_id: String,
    pub train_dataset: String,
    pub fold_index: usize,
    pub test_dataset: String,
}

impl EvalRow {
    pub fn key(&self) -> EvalKey {
        EvalKey {
            architecture_id: self.architecture_id.clone(),
            train_dataset: self.train_dataset.clone(),
            fold_index: self.fold_index,
            test_dataset: self.test_dataset.clone(),
        }
    }
}

impl From<&EvalResult> for EvalRow {
    fn from(r: &EvalResult) -> Self {
        EvalRow {
            model_id: r.model_id.clone(),
            architecture_id: r.architecture_id.clone(),
            train_dataset: r.train_dataset.clone(),
            fold_index: r.fold_index,
            test_dataset: r.test_dataset.clone(),
            n_test: r.n_test,
            classes_used: r.classes_used.clone(),
            macro_f1: r.macro_f1,
            per_class_f1: r.per_class_f1.clone(),
        }
    }
}

impl MissingPair {
    pub fn key(&self) -> EvalKey {
        EvalKey {
            architecture_id: self.architecture_id.clone(),
            train_dataset: self.train_dataset.clone(),
            fold_index: self.fold_index,
            test_dataset: self.test_dataset.clone(),
        }
    }
}

fn join_classes(classes: &BTreeSet<ExpressionLabel>) -> String {
    classes.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(";")
}

fn join_f1(f1: &BTreeMap<ExpressionLabel, f64>) -> String {
    f1.iter().map(|(c, v)| format!("{c}={v}")).collect::<Vec<_>>().join(";")
}

/// Rows sorted by key. Floats use the shortest round-tripping form.
pub fn results_to_csv(rows: &[EvalRow]) -> String {
    let mut sorted: Vec<&EvalRow> = rows.iter().collect();
    sorted.sort_by_key(|r| r.key());
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in sorted {
        w.write_record([
            r.model_id.clone(),
            r.architecture_id.clone(),
            r.train_dataset.clone(),
            r.fold_index.to_string(),
            r.test_dataset.clone(),
            r.n_test.to_string(),
            join_classes(&r.classes_used),
            r.macro_f1.to_string(),
            join_f1(&r.per_class_f1),
        ])
        .expect("writing to memory");
    }
    let body = String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8 input");
    format!("{RESULTS_HEADER}\n{body}")
}

pub fn parse_results_csv(text: &str, origin: &Path) -> Result<Vec<EvalRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(String::from).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::input(origin, 1, format!("unexpected header `{}`", header.join(","))));
    }
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record?;
        let bad = |what: &str| Error::input(origin, line, format!("bad {what}"));
        let label = |s: &str| s.parse::<ExpressionLabel>().map_err(|_| bad("class label"));
        let classes_used = record[6]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(label)
            .collect::<Result<_>>()?;
        let per_class_f1 = record[8]
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|pair| {
                let (c, v) = pair.split_once('=').ok_or_else(|| bad("per_class_f1"))?;
                Ok((label(c)?, v.parse::<f64>().map_err(|_| bad("per_class_f1"))?))
            })
            .collect::<Result<_>>()?;
        rows.push(EvalRow {
            model_id: record[0].to_string(),
            architecture_id: record[1].to_string(),
            train_dataset: record[2].to_string(),
            fold_index: record[3].parse().map_err(|_| bad("fold_index"))?,
            test_dataset: record[4].to_string(),
            n_test: record[5].parse().map_err(|_| bad("n_test"))?,
            classes_used,
            macro_f1: record[7].parse().map_err(|_| bad("macro_f1"))?,
            per_class_f1,
        });
    }
    Ok(rows)
}

pub fn read_results_csv(path: &Path) -> Result<Vec<EvalRow>> {
    parse_results_csv(&read_to_string(path)?, path)
}

pub fn missing_to_csv(missing: &[MissingPair]) -> String {
    let mut sorted: Vec<&MissingPair> = missing.iter().collect();
    sorted.sort_by_key(|m| m.key());
    let mut out = String::from("architecture_id,train_dataset,fold_index,test_dataset,reason\n");
    for m in sorted {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            m.architecture_id, m.train_dataset, m.fold_index, m.test_dataset, m.reason
        );
    }
    out
}

pub fn parse_missing_csv(text: &str) -> Result<Vec<MissingPair>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record?;
        out.push(MissingPair {
            architecture_id: record[0].to_string(),
            train_dataset: record[1].to_string(),
            fold_index: record[2]
                .parse()
                .map_err(|_| Error::Integrity(format!("bad fold index `{}`", &record[2])))?,
            test_dataset: record[3].to_string(),
            reason: record[4].to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
enum StoredOutcome {
    Evaluated(EvalResult),
    Skipped(MissingPair),
}

/// Directory-backed store: `<dir>/evals/*.json` plus the two summary CSVs.
#[derive(Debug, Clone)]
pub struct ResultsStore {
    pub dir: PathBuf,
}

impl ResultsStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResultsStore { dir: dir.into() }
    }

    fn evals_dir(&self) -> PathBuf {
        self.dir.join("evals")
    }

    fn entry_path(&self, key: &EvalKey) -> PathBuf {
        self.evals_dir().join(format!(
            "{}__{}__{}__{}.json",
            sanitize(&key.architecture_id),
            sanitize(&key.train_dataset),
            key.fold_index,
            sanitize(&key.test_dataset)
        ))
    }

    pub fn results_csv(&self) -> PathBuf {
        self.dir.join(RESULTS_CSV)
    }

    pub fn missing_csv(&self) -> PathBuf {
        self.dir.join(MISSING_CSV)
    }

    /// Stores one outcome; an existing entry under the same key is replaced.
    pub fn put(&self, outcome: &EvalOutcome) -> Result<PathBuf> {
        let (key, stored) = match outcome {
            EvalOutcome::Evaluated(r) => (EvalRow::from(r).key(), StoredOutcome::Evaluated(r.clone())),
            EvalOutcome::Skipped(m) => (m.key(), StoredOutcome::Skipped(m.clone())),
        };
        let path = self.entry_path(&key);
        let json = serde_json::to_string_pretty(&stored).expect("outcomes serialize");
        write_string_atomic(&path, &(json + "\n"))?;
        Ok(path)
    }

    pub fn load_all(&self) -> Result<(Vec<EvalResult>, Vec<MissingPair>)> {
        let dir = self.evals_dir();
        let mut results = Vec::new();
        let mut missing = Vec::new();
        if !dir.exists() {
            return Ok((results, missing));
        }
        let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        files.sort();
        for path in files {
            let text = read_to_string(&path)?;
            match serde_json::from_str(&text).map_err(|e| Error::input(&path, e.line(), e.to_string()))? {
                StoredOutcome::Evaluated(r) => results.push(r),
                StoredOutcome::Skipped(m) => missing.push(m),
            }
        }
        Ok((results, missing))
    }

    /// Rewrites `results.csv` and `missing_pairs.csv` from the stored entries.
    pub fn compact(&self) -> Result<(Vec<EvalRow>, Vec<MissingPair>)> {
        let (results, missing) = self.load_all()?;
        let rows: Vec<EvalRow> = results.iter().map(EvalRow::from).collect();
        write_string_atomic(&self.results_csv(), &results_to_csv(&rows))?;
        write_string_atomic(&self.missing_csv(), &missing_to_csv(&missing))?;
        Ok((rows, missing))
    }

    pub fn read_rows(&self) -> Result<Vec<EvalRow>> {
        read_results_csv(&self.results_csv())
    }

    pub fn read_missing(&self) -> Result<Vec<MissingPair>> {
        let path = self.missing_csv();
        if !path.exists() {
            return Ok(Vec::new());
        }
        parse_missing_csv(&read_to_string(&path)?)
    }
}

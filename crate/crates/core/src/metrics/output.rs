use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{Cell, SimilarityReport, SimilarityTable};
use crate::error::Result;
use crate::fsutil::write_string_atomic;

/// `NA` for missing, `undefined` for a zero denominator, else full precision.
pub fn cell_field(c: Cell) -> String {
    match c {
        Cell::Value(v) => v.to_string(),
        Cell::Missing => "NA".into(),
        Cell::Undefined => "undefined".into(),
    }
}

fn rounded(c: Cell) -> String {
    match c {
        Cell::Value(v) => format!("{v:.4}"),
        other => cell_field(other),
    }
}

fn csv_name(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn local_global(datasets: &[String], ls: &[Cell], gs: &[Cell], fmt: fn(Cell) -> String) -> String {
    let mut out = String::from("dataset,local_similarity,global_similarity\n");
    for (i, d) in datasets.iter().enumerate() {
        let _ = writeln!(out, "{},{},{}", csv_name(d), fmt(ls[i]), fmt(gs[i]));
    }
    out
}

fn matrix(datasets: &[String], m: &[Vec<Cell>], corner: &str) -> String {
    let mut out = String::from(corner);
    for d in datasets {
        out.push(',');
        out.push_str(&csv_name(d));
    }
    out.push('\n');
    for (i, d) in datasets.iter().enumerate() {
        out.push_str(&csv_name(d));
        for c in &m[i] {
            out.push(',');
            out.push_str(&cell_field(*c));
        }
        out.push('\n');
    }
    out
}

/// Table of LS and GS rounded to four decimals.
pub fn render_local_global_table(report: &SimilarityReport) -> String {
    local_global(&report.datasets, &report.ls, &report.gs, rounded)
}

pub fn render_local_global_markdown(report: &SimilarityReport) -> String {
    let mut out = String::from("| Dataset | Local Similarity | Global Similarity |\n|---|---|---|\n");
    for (i, d) in report.datasets.iter().enumerate() {
        let _ = writeln!(out, "| {d} | {} | {} |", rounded(report.ls[i]), rounded(report.gs[i]));
    }
    out
}

impl SimilarityTable {
    pub fn local_global_csv(&self, datasets: &[String]) -> String {
        local_global(datasets, &self.ls, &self.gs, cell_field)
    }

    pub fn paired_similarity_csv(&self, datasets: &[String]) -> String {
        matrix(datasets, &self.ps, "train_dataset")
    }

    pub fn cross_similarity_csv(&self, datasets: &[String]) -> String {
        matrix(datasets, &self.cs, "train_dataset")
    }
}

impl SimilarityReport {
    pub fn local_global_csv(&self) -> String {
        self.aggregate().local_global_csv(&self.datasets)
    }

    pub fn paired_similarity_csv(&self) -> String {
        self.aggregate().paired_similarity_csv(&self.datasets)
    }

    pub fn cross_similarity_csv(&self) -> String {
        self.aggregate().cross_similarity_csv(&self.datasets)
    }

    pub fn missing_pairs_csv(&self) -> String {
        let mut out = String::from("train_dataset,test_dataset\n");
        for (a, b) in &self.missing_pairs {
            let _ = writeln!(out, "{},{}", csv_name(a), csv_name(b));
        }
        out
    }

    /// Aggregate CSVs plus `<name>_<arch>.csv` per architecture.
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut files = vec![
            ("local_global.csv".to_string(), self.local_global_csv()),
            ("paired_similarity.csv".to_string(), self.paired_similarity_csv()),
            ("cross_similarity.csv".to_string(), self.cross_similarity_csv()),
            ("similarity_missing_pairs.csv".to_string(), self.missing_pairs_csv()),
        ];
        for (arch, table) in &self.per_model {
            let tag = crate::media::sanitize(arch);
            files.push((format!("local_global_{tag}.csv"), table.local_global_csv(&self.datasets)));
            files.push((format!("paired_similarity_{tag}.csv"), table.paired_similarity_csv(&self.datasets)));
            files.push((format!("cross_similarity_{tag}.csv"), table.cross_similarity_csv(&self.datasets)));
        }
        let mut written = Vec::new();
        for (name, body) in files {
            let path = dir.join(name);
            write_string_atomic(&path, &body)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::PerformanceTensor;
    use crate::metrics::build_similarity_report;

    #[test]
    fn hand_tensor_files() {
        let mut t = PerformanceTensor::new();
        for (m, a, b, v) in [
            ("m1", "A", "A", 0.9),
            ("m1", "A", "B", 0.5),
            ("m1", "B", "A", 0.4),
            ("m1", "B", "B", 0.8),
            ("m2", "A", "A", 0.7),
            ("m2", "A", "B", 0.3),
            ("m2", "B", "A", 0.6),
            ("m2", "B", "B", 0.6),
        ] {
            t.insert(m, a, b, v);
        }
        let r = build_similarity_report(&t);
        assert_eq!(render_local_global_table(&r), "dataset,local_similarity,global_similarity\nA,0.8000,0.4000\nB,0.7000,0.5000\n");
        let ps = r.paired_similarity_csv();
        let rows: Vec<&str> = ps.lines().collect();
        assert_eq!(rows[0], "train_dataset,A,B");
        assert!(rows[1].starts_with("A,1,0.571428"));
        assert!(rows[2].starts_with("B,0.625"));
        assert!(rows[2].ends_with(",1"));

        let dir = tempfile::tempdir().unwrap();
        let written = r.write_csvs(dir.path()).unwrap();
        assert_eq!(written.len(), 4 + 3 * 2);
        assert!(dir.path().join("local_global_m2.csv").exists());
    }

    #[test]
    fn markers() {
        assert_eq!(cell_field(Cell::Missing), "NA");
        assert_eq!(cell_field(Cell::Undefined), "undefined");
        assert_eq!(rounded(Cell::Value(0.56224)), "0.5622");
    }
}

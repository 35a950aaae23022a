//! Cross, Local, Global and Paired Similarity over a performance tensor.
//!
//! CS(d1, d2) averages θ̂(m, d1, d2) over the models that have the pair.
//! LS(d) = CS(d, d). GS(d) averages CS(d, t) over the present t ≠ d.
//! PS(a, b) = CS(a, b) / CS(b, b).

mod output;

use std::collections::BTreeMap;

use serde::Serialize;

use crate::eval::PerformanceTensor;

pub use output::{cell_field, render_local_global_table, render_local_global_markdown};

/// A metric value, or why there is none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Value(f64),
    /// No model has the required pair(s).
    Missing,
    /// The denominator is zero.
    Undefined,
}

impl Cell {
    pub fn value(self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_value(self) -> bool {
        matches!(self, Cell::Value(_))
    }
}

/// CS(d1, d2) together with |M'|, the number of models averaged.
pub fn cross_similarity_counted(tensor: &PerformanceTensor, d1: &str, d2: &str) -> Option<(f64, usize)> {
    let mut sum = 0.0;
    let mut n = 0;
    for ((_, train, test), score) in &tensor.scores {
        if train == d1 && test == d2 {
            sum += score;
            n += 1;
        }
    }
    (n > 0).then(|| (sum / n as f64, n))
}

pub fn cross_similarity(tensor: &PerformanceTensor, d1: &str, d2: &str) -> Cell {
    match cross_similarity_counted(tensor, d1, d2) {
        Some((v, _)) => Cell::Value(v),
        None => Cell::Missing,
    }
}

pub fn local_similarity(tensor: &PerformanceTensor, d: &str) -> Cell {
    cross_similarity(tensor, d, d)
}

pub fn global_similarity(tensor: &PerformanceTensor, d_train: &str) -> Cell {
    let values: Vec<f64> = tensor
        .datasets()
        .iter()
        .filter(|t| t.as_str() != d_train)
        .filter_map(|t| cross_similarity(tensor, d_train, t).value())
        .collect();
    if values.is_empty() {
        Cell::Missing
    } else {
        Cell::Value(values.iter().sum::<f64>() / values.len() as f64)
    }
}

pub fn paired_similarity(tensor: &PerformanceTensor, d_train: &str, d_test: &str) -> Cell {
    ps_from(cross_similarity(tensor, d_train, d_test), local_similarity(tensor, d_test), d_train == d_test)
}

fn ps_from(numerator: Cell, denominator: Cell, diagonal: bool) -> Cell {
    match (numerator, denominator) {
        (Cell::Value(_), Cell::Value(den)) if den == 0.0 => Cell::Undefined,
        (Cell::Value(_), Cell::Value(_)) if diagonal => Cell::Value(1.0),
        (Cell::Value(num), Cell::Value(den)) => Cell::Value(num / den),
        (_, Cell::Value(den)) if den == 0.0 => Cell::Undefined,
        _ => Cell::Missing,
    }
}

/// CS, LS, GS and PS over one dataset list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityTable {
    pub cs: Vec<Vec<Cell>>,
    /// Models averaged into each CS cell.
    pub cs_model_counts: Vec<Vec<usize>>,
    pub ls: Vec<Cell>,
    pub gs: Vec<Cell>,
    /// Rows are training datasets, columns test datasets.
    pub ps: Vec<Vec<Cell>>,
}

fn similarity_table(tensor: &PerformanceTensor, datasets: &[String]) -> SimilarityTable {
    let n = datasets.len();
    let mut cs = vec![vec![Cell::Missing; n]; n];
    let mut counts = vec![vec![0; n]; n];
    for (i, a) in datasets.iter().enumerate() {
        for (j, b) in datasets.iter().enumerate() {
            if let Some((v, m)) = cross_similarity_counted(tensor, a, b) {
                cs[i][j] = Cell::Value(v);
                counts[i][j] = m;
            }
        }
    }
    let ls: Vec<Cell> = (0..n).map(|i| cs[i][i]).collect();
    let gs = (0..n)
        .map(|i| {
            let off: Vec<f64> = (0..n).filter(|&j| j != i).filter_map(|j| cs[i][j].value()).collect();
            if off.is_empty() {
                Cell::Missing
            } else {
                Cell::Value(off.iter().sum::<f64>() / off.len() as f64)
            }
        })
        .collect();
    let ps = (0..n)
        .map(|i| (0..n).map(|j| ps_from(cs[i][j], ls[j], i == j)).collect())
        .collect();
    SimilarityTable {
        cs,
        cs_model_counts: counts,
        ls,
        gs,
        ps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityReport {
    /// Architecture ids, sorted.
    pub models: Vec<String>,
    /// Dataset names, sorted.
    pub datasets: Vec<String>,
    pub cs: Vec<Vec<Cell>>,
    pub cs_model_counts: Vec<Vec<usize>>,
    pub ls: Vec<Cell>,
    pub gs: Vec<Cell>,
    pub ps: Vec<Vec<Cell>>,
    /// Same formulas restricted to one architecture, over the same datasets.
    pub per_model: BTreeMap<String, SimilarityTable>,
    /// (train, test) pairs without any model entry.
    pub missing_pairs: Vec<(String, String)>,
}

impl SimilarityReport {
    pub fn index_of(&self, dataset: &str) -> Option<usize> {
        self.datasets.iter().position(|d| d == dataset)
    }

    pub fn ls_of(&self, dataset: &str) -> Cell {
        self.index_of(dataset).map_or(Cell::Missing, |i| self.ls[i])
    }

    pub fn gs_of(&self, dataset: &str) -> Cell {
        self.index_of(dataset).map_or(Cell::Missing, |i| self.gs[i])
    }

    pub fn ps_of(&self, train: &str, test: &str) -> Cell {
        match (self.index_of(train), self.index_of(test)) {
            (Some(i), Some(j)) => self.ps[i][j],
            _ => Cell::Missing,
        }
    }

    pub fn cs_of(&self, d1: &str, d2: &str) -> Cell {
        match (self.index_of(d1), self.index_of(d2)) {
            (Some(i), Some(j)) => self.cs[i][j],
            _ => Cell::Missing,
        }
    }

    pub fn aggregate(&self) -> SimilarityTable {
        SimilarityTable {
            cs: self.cs.clone(),
            cs_model_counts: self.cs_model_counts.clone(),
            ls: self.ls.clone(),
            gs: self.gs.clone(),
            ps: self.ps.clone(),
        }
    }
}

pub fn build_similarity_report(tensor: &PerformanceTensor) -> SimilarityReport {
    let datasets = tensor.datasets();
    let models = tensor.architectures();
    let table = similarity_table(tensor, &datasets);
    let per_model = models
        .iter()
        .map(|m| (m.clone(), similarity_table(&tensor.restrict_to_architecture(m), &datasets)))
        .collect();
    let mut missing_pairs = Vec::new();
    for (i, a) in datasets.iter().enumerate() {
        for (j, b) in datasets.iter().enumerate() {
            if !table.cs[i][j].is_value() {
                missing_pairs.push((a.clone(), b.clone()));
            }
        }
    }
    SimilarityReport {
        models,
        datasets,
        cs: table.cs,
        cs_model_counts: table.cs_model_counts,
        ls: table.ls,
        gs: table.gs,
        ps: table.ps,
        per_model,
        missing_pairs,
    }
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::labels::ExpressionLabel;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub weights: BTreeMap<ExpressionLabel, f64>,
    /// Classes listed with a zero count; they cannot be learned from this split.
    pub dropped: Vec<ExpressionLabel>,
}

/// Inverse-frequency weights `N / (K * n_c)` over classes with a nonzero
/// count. A balanced split gets weight 1 everywhere.
pub fn compute_class_weights(class_counts: &BTreeMap<ExpressionLabel, usize>) -> Result<ClassWeights> {
    let dropped: Vec<_> = class_counts.iter().filter(|(_, n)| **n == 0).map(|(c, _)| *c).collect();
    let present: Vec<_> = class_counts.iter().filter(|(_, n)| **n > 0).collect();
    if present.len() < 2 {
        return Err(Error::FoldConstruction(format!(
            "training split has {} class(es); at least 2 are needed",
            present.len()
        )));
    }
    let total: usize = present.iter().map(|(_, n)| **n).sum();
    let k = present.len() as f64;
    let weights = present
        .into_iter()
        .map(|(c, n)| (*c, total as f64 / (k * *n as f64)))
        .collect();
    Ok(ClassWeights { weights, dropped })
}

//! Confusion matrices and macro-averaged F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ExpressionLabel;

/// Square count matrix; rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<ExpressionLabel>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<ExpressionLabel>) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn record(&mut self, truth: ExpressionLabel, predicted: ExpressionLabel) {
        let t = self.position(truth).expect("true label outside the matrix");
        let p = self.position(predicted).expect("prediction outside the matrix");
        self.counts[t][p] += 1;
    }

    pub fn position(&self, label: ExpressionLabel) -> Option<usize> {
        self.classes.iter().position(|c| *c == label)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Per-class F1, `None` for classes without true samples.
///
/// Precision with an empty predicted column is 0, and F1 is 0 when both
/// precision and recall are 0.
pub fn per_class_f1(counts: &[Vec<u64>]) -> Result<Vec<Option<f64>>> {
    let k = counts.len();
    if counts.iter().any(|row| row.len() != k) {
        return Err(Error::Precondition(format!("confusion matrix is not square ({k} rows)")));
    }
    Ok((0..k)
        .map(|c| {
            let support: u64 = counts[c].iter().sum();
            if support == 0 {
                return None;
            }
            let tp = counts[c][c] as f64;
            let predicted: u64 = counts.iter().map(|row| row[c]).sum();
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = tp / support as f64;
            Some(if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            })
        })
        .collect())
}

/// Unweighted mean of per-class F1 over classes with support.
pub fn macro_f1(counts: &[Vec<u64>]) -> Result<f64> {
    let scores: Vec<f64> = per_class_f1(counts)?.into_iter().flatten().collect();
    if scores.is_empty() {
        return Err(Error::UndefinedScore("no class has any true sample".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_diagonal() {
        assert_eq!(macro_f1(&[vec![5, 0], vec![0, 5]]).unwrap(), 1.0);
    }

    #[test]
    fn worked_matrix() {
        let m = [vec![3, 1], vec![2, 4]];
        let per = per_class_f1(&m).unwrap();
        assert!((per[0].unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert!((per[1].unwrap() - 8.0 / 11.0).abs() < 1e-12);
        assert!((macro_f1(&m).unwrap() - 0.697).abs() < 0.001);
    }

    #[test]
    fn unsupported_class_is_left_out() {
        assert_eq!(macro_f1(&[vec![0, 0], vec![0, 5]]).unwrap(), 1.0);
    }

    #[test]
    fn constant_predictor() {
        let v = macro_f1(&[vec![10, 0], vec![10, 0]]).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_support_is_undefined() {
        assert!(matches!(macro_f1(&[vec![0, 0], vec![0, 0]]), Err(Error::UndefinedScore(_))));
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        assert!(macro_f1(&[vec![1, 0], vec![1]]).is_err());
    }

    fn matrix() -> impl Strategy<Value = Vec<Vec<u64>>> {
        (1usize..=7).prop_flat_map(|k| proptest::collection::vec(proptest::collection::vec(0u64..20, k), k))
    }

    proptest! {
        #[test]
        fn invariant_under_relabeling(m in matrix(), seed in any::<u64>()) {
            prop_assume!(m.iter().flatten().any(|v| *v > 0));
            let k = m.len();
            let mut perm: Vec<usize> = (0..k).collect();
            perm.sort_by_key(|i| (seed.rotate_left(*i as u32 * 7) ^ *i as u64) % 1009);
            let permuted: Vec<Vec<u64>> = perm.iter().map(|&r| perm.iter().map(|&c| m[r][c]).collect()).collect();
            let a = macro_f1(&m).unwrap();
            let b = macro_f1(&permuted).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }
    }
}

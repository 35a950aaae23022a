use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopDecision {
    Continue,
    Stop,
}

/// Absolute-gain early stopping on validation accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarlyStopping {
    pub min_delta: f64,
    pub patience: usize,
    pub max_epochs: usize,
}

impl Default for EarlyStopping {
    fn default() -> Self {
        EarlyStopping {
            min_delta: 0.01,
            patience: 5,
            max_epochs: 20,
        }
    }
}

// Absorbs representation error in `best + min_delta`, e.g. 0.50 + 0.01.
const TOLERANCE: f64 = 1e-12;

impl EarlyStopping {
    /// Number of trailing epochs that did not improve on the running best.
    pub fn stale_epochs(&self, history: &[f64]) -> usize {
        let mut best = f64::NEG_INFINITY;
        let mut stale = 0;
        for &acc in history {
            if acc + TOLERANCE >= best + self.min_delta {
                stale = 0;
            } else {
                stale += 1;
            }
            best = best.max(acc);
        }
        stale
    }

    /// Decision after the last epoch in `history` (one entry per epoch).
    pub fn decide(&self, history: &[f64]) -> StopDecision {
        if history.len() >= self.max_epochs || self.stale_epochs(history) >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}

/// Decision with the protocol defaults (gain of 0.01 within 5 epochs, 20 epochs max).
pub fn early_stop_decision(val_accuracy_history: &[f64]) -> StopDecision {
    EarlyStopping::default().decide(val_accuracy_history)
}

//! Cross-validation folds: subject-disjoint when user ids cover the dataset,
//! class-stratified otherwise. Deterministic in (manifest, fold_count, seed).

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

/// Share of samples that must carry a user id for subject-disjoint folds.
pub const SUBJECT_COVERAGE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_ids: BTreeSet<String>,
    pub val_ids: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    SubjectDisjoint,
    Stratified,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub dataset: String,
    pub seed: u64,
    pub kind: FoldKind,
    pub folds: Vec<FoldSplit>,
}

impl FoldPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fold plan serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid fold file: {e}")))
    }

    pub fn fold(&self, index: usize) -> Option<&FoldSplit> {
        self.folds.iter().find(|f| f.fold_index == index)
    }
}

fn rng_for(seed: u64, dataset: &str) -> ChaCha8Rng {
    // Mix the dataset name in so datasets sharing a seed get unrelated shuffles.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in dataset.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

pub fn make_folds(manifest: &DatasetManifest, fold_count: usize, seed: u64) -> Result<FoldPlan> {
    if fold_count < 2 {
        return Err(Error::FoldConstruction(format!("fold_count {fold_count} < 2")));
    }
    let samples: Vec<_> = manifest.included().collect();
    if samples.len() < fold_count {
        return Err(Error::FoldConstruction(format!(
            "{} has {} usable samples, fewer than {fold_count} folds",
            manifest.name,
            samples.len()
        )));
    }
    let mut rng = rng_for(seed, &manifest.name);
    let with_user = samples.iter().filter(|s| s.user_id.is_some()).count();
    let subject_disjoint = with_user as f64 >= SUBJECT_COVERAGE * samples.len() as f64;

    let mut assignment: Vec<Vec<String>> = vec![Vec::new(); fold_count];
    let kind = if subject_disjoint {
        // Samples without a user id form singleton groups.
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for s in &samples {
            let key = match &s.user_id {
                Some(u) => format!("u:{u}"),
                None => format!("s:{}", s.sample_id),
            };
            groups.entry(key).or_default().push(s.sample_id.clone());
        }
        let largest = groups.values().map(Vec::len).max().unwrap_or(0);
        let limit = (1.0 - 1.0 / fold_count as f64) * samples.len() as f64;
        if largest as f64 > limit {
            return Err(Error::FoldConstruction(format!(
                "{}: one user holds {largest} of {} samples",
                manifest.name,
                samples.len()
            )));
        }
        if groups.len() < fold_count {
            return Err(Error::FoldConstruction(format!(
                "{}: {} subjects cannot fill {fold_count} disjoint folds",
                manifest.name,
                groups.len()
            )));
        }
        let mut groups: Vec<Vec<String>> = groups.into_values().collect();
        groups.shuffle(&mut rng);
        groups.sort_by(|a, b| b.len().cmp(&a.len()));
        for group in groups {
            let target = (0..fold_count)
                .min_by_key(|&f| (assignment[f].len(), f))
                .expect("fold_count >= 2");
            assignment[target].extend(group);
        }
        FoldKind::SubjectDisjoint
    } else {
        let mut by_class: BTreeMap<Option<crate::labels::ExpressionLabel>, Vec<String>> = BTreeMap::new();
        for s in &samples {
            by_class.entry(s.label).or_default().push(s.sample_id.clone());
        }
        let mut next = 0;
        for (_, mut ids) in by_class {
            ids.sort();
            ids.shuffle(&mut rng);
            for id in ids {
                assignment[next % fold_count].push(id);
                next += 1;
            }
        }
        FoldKind::Stratified
    };

    let all: BTreeSet<String> = samples.iter().map(|s| s.sample_id.clone()).collect();
    let folds = assignment
        .into_iter()
        .enumerate()
        .map(|(fold_index, ids)| {
            let val_ids: BTreeSet<String> = ids.into_iter().collect();
            let train_ids = all.difference(&val_ids).cloned().collect();
            FoldSplit {
                fold_index,
                train_ids,
                val_ids,
            }
        })
        .collect();
    Ok(FoldPlan {
        dataset: manifest.name.clone(),
        seed,
        kind,
        folds,
    })
}

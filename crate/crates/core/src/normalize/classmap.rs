use std::collections::HashMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::ExpressionLabel;

/// Matches any dataset in the `dataset` column.
pub const DATASET_WILDCARD: &str = "*";

/// Identity mappings for the canonical names plus every known per-dataset merge.
pub const DEFAULT_CLASS_MAP_CSV: &str = include_str!("../../data/class_map.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassMapEntry {
    pub raw_label: String,
    pub dataset: String,
    pub canonical_label: ExpressionLabel,
}

/// Outcome of looking a raw label up; unmapped labels keep the original text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Unified {
    Label(ExpressionLabel),
    Unmapped(String),
}

impl Unified {
    pub fn label(&self) -> Option<ExpressionLabel> {
        match self {
            Unified::Label(l) => Some(*l),
            Unified::Unmapped(_) => None,
        }
    }
}

fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, Default)]
pub struct ClassMap {
    entries: Vec<ClassMapEntry>,
    lookup: HashMap<(String, String), ExpressionLabel>,
}

impl ClassMap {
    pub fn from_entries(entries: Vec<ClassMapEntry>) -> Result<Self> {
        let mut lookup = HashMap::new();
        for entry in &entries {
            let key = (fold(&entry.raw_label), fold(&entry.dataset));
            if let Some(prev) = lookup.insert(key, entry.canonical_label) {
                if prev != entry.canonical_label {
                    return Err(Error::Config(format!(
                        "class map maps `{}` in `{}` to both {prev} and {}",
                        entry.raw_label, entry.dataset, entry.canonical_label
                    )));
                }
            }
        }
        Ok(ClassMap { entries, lookup })
    }

    pub fn from_csv_str(text: &str, origin: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut entries = Vec::new();
        for (idx, row) in reader.deserialize::<ClassMapEntry>().enumerate() {
            // header is line 1
            let entry = row.map_err(|e| Error::input(origin, idx + 2, e.to_string()))?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::fsutil::read_to_string(path)?;
        Self::from_csv_str(&text, path)
    }

    pub fn entries(&self) -> &[ClassMapEntry] {
        &self.entries
    }

    /// Case-folds and trims both inputs, prefers a dataset-specific entry and
    /// falls back to the wildcard row.
    pub fn unify(&self, label_raw: &str, dataset: &str) -> Unified {
        let raw = fold(label_raw);
        let specific = (raw.clone(), fold(dataset));
        if let Some(label) = self.lookup.get(&specific) {
            return Unified::Label(*label);
        }
        match self.lookup.get(&(raw, DATASET_WILDCARD.to_string())) {
            Some(label) => Unified::Label(*label),
            None => Unified::Unmapped(label_raw.to_string()),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        for entry in &self.entries {
            writer.serialize(entry).expect("in-memory csv");
        }
        String::from_utf8(writer.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

impl ClassMap {
    /// The bundled map.
    pub fn standard() -> &'static ClassMap {
        static MAP: OnceLock<ClassMap> = OnceLock::new();
        MAP.get_or_init(|| {
            ClassMap::from_csv_str(DEFAULT_CLASS_MAP_CSV, Path::new("class_map.csv")).expect("bundled class map")
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ExpressionLabel::*;

    #[test]
    fn merge_table_is_complete() {
        let golden = [
            ("arrabbiato", "FEGA", Anger),
            ("annoyed", "Lifespan", Anger),
            ("grumpy", "Lifespan", Anger),
            ("disgusto", "FEGA", Disgust),
            ("afraid", "DDCF", Fear),
            ("afraid", "NIMH-ChEFS", Fear),
            ("afraid", "KDEF", Fear),
            ("fearful", "RaFD", Fear),
            ("paura", "FEGA", Fear),
            ("joy", "WSEFEP", Happiness),
            ("allegria", "FEGA", Happiness),
            ("amusement", "BioVidEmo", Happiness),
            ("tristezza", "FEGA", Sadness),
            ("sorpresa", "FEGA", Surprise),
            ("neutra", "FEGA", Neutral),
            ("profile", "Lifespan", Neutral),
        ];
        let map = ClassMap::standard();
        for (raw, dataset, expected) in golden {
            assert_eq!(map.unify(raw, dataset), Unified::Label(expected), "{raw} ({dataset})");
        }
    }

    #[test]
    fn identity_mappings_hold_for_any_dataset() {
        let map = ClassMap::standard();
        for label in ExpressionLabel::ALL {
            assert_eq!(map.unify(label.as_str(), "anything"), Unified::Label(*label));
        }
        assert_eq!(map.unify("happiness", "KDEF"), Unified::Label(Happiness));
    }

    #[test]
    fn lookup_folds_case_and_whitespace() {
        let map = ClassMap::standard();
        assert_eq!(map.unify("  Arrabbiato ", "fega"), Unified::Label(Anger));
    }

    #[test]
    fn merges_are_dataset_scoped() {
        let map = ClassMap::standard();
        assert_eq!(map.unify("joy", "FEGA"), Unified::Unmapped("joy".into()));
        assert_eq!(map.unify("boredom", "MMI"), Unified::Unmapped("boredom".into()));
    }

    #[test]
    fn conflicting_entries_are_rejected() {
        let text = "raw_label,dataset,canonical_label\nx,*,anger\nX,*,fear\n";
        assert!(ClassMap::from_csv_str(text, Path::new("m.csv")).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let map = ClassMap::standard();
        let again = ClassMap::from_csv_str(&map.to_csv(), Path::new("m.csv")).unwrap();
        assert_eq!(again.entries(), map.entries());
    }
}

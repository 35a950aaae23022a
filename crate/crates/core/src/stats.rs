//! Dataset-level statistics over non-excluded samples.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::Result;
use crate::fsutil::write_string_atomic;
use crate::labels::{AgeGroup, ExpressionLabel, Gender};
use crate::manifest::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenderSplit {
    pub male: f64,
    pub female: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StatisticsBundle {
    /// Non-excluded samples per dataset.
    pub image_count_per_dataset: BTreeMap<String, usize>,
    /// Distinct users; datasets without any user id are absent.
    pub user_count_per_dataset: BTreeMap<String, usize>,
    pub images_per_user: BTreeMap<String, f64>,
    /// Combined over all datasets, 1-year bins keyed by the floored age.
    pub age_histogram: BTreeMap<i64, usize>,
    pub gender_distribution: BTreeMap<String, GenderSplit>,
    pub age_group_distribution: BTreeMap<String, BTreeMap<AgeGroup, f64>>,
    pub class_counts: BTreeMap<String, BTreeMap<ExpressionLabel, usize>>,
    pub class_distribution: BTreeMap<String, BTreeMap<ExpressionLabel, f64>>,
}

fn fractions<K: Ord + Copy>(counts: &BTreeMap<K, usize>) -> BTreeMap<K, f64> {
    let total: usize = counts.values().sum();
    counts.iter().map(|(k, n)| (*k, *n as f64 / total as f64)).collect()
}

pub fn compute_statistics(manifests: &[DatasetManifest]) -> StatisticsBundle {
    let mut bundle = StatisticsBundle::default();
    // Merge manifests sharing a name so dataset order never matters.
    let mut by_name: BTreeMap<&str, Vec<&DatasetManifest>> = BTreeMap::new();
    for m in manifests {
        by_name.entry(m.name.as_str()).or_default().push(m);
    }

    for (name, parts) in by_name {
        let samples: Vec<_> = parts.iter().flat_map(|m| m.included()).collect();
        bundle.image_count_per_dataset.insert(name.to_string(), samples.len());

        let with_user: Vec<&str> = samples.iter().filter_map(|s| s.user_id.as_deref()).collect();
        if !with_user.is_empty() {
            let users: BTreeSet<&str> = with_user.iter().copied().collect();
            bundle.user_count_per_dataset.insert(name.to_string(), users.len());
            bundle
                .images_per_user
                .insert(name.to_string(), with_user.len() as f64 / users.len() as f64);
        }

        let mut genders: BTreeMap<Gender, usize> = BTreeMap::new();
        let mut groups: BTreeMap<AgeGroup, usize> = BTreeMap::new();
        let mut classes: BTreeMap<ExpressionLabel, usize> = BTreeMap::new();
        for s in &samples {
            if let Some(age) = s.age_years {
                *bundle.age_histogram.entry(age.floor() as i64).or_default() += 1;
            }
            if let Some(g) = s.gender {
                *genders.entry(g).or_default() += 1;
            }
            if let Some(g) = s.age_group {
                *groups.entry(g).or_default() += 1;
            }
            if let Some(l) = s.label {
                *classes.entry(l).or_default() += 1;
            }
        }
        if !genders.is_empty() {
            let f = fractions(&genders);
            bundle.gender_distribution.insert(
                name.to_string(),
                GenderSplit {
                    male: f.get(&Gender::Male).copied().unwrap_or(0.0),
                    female: f.get(&Gender::Female).copied().unwrap_or(0.0),
                },
            );
        }
        if !groups.is_empty() {
            bundle.age_group_distribution.insert(name.to_string(), fractions(&groups));
        }
        if !classes.is_empty() {
            bundle.class_distribution.insert(name.to_string(), fractions(&classes));
            bundle.class_counts.insert(name.to_string(), classes);
        }
    }
    bundle
}

impl StatisticsBundle {
    pub fn image_counts_csv(&self) -> String {
        let mut out = String::from("dataset,images_after_exclusion\n");
        for (name, n) in &self.image_count_per_dataset {
            out.push_str(&format!("{name},{n}\n"));
        }
        out
    }

    pub fn user_counts_csv(&self) -> String {
        let mut out = String::from("dataset,users,images_per_user\n");
        for (name, n) in &self.user_count_per_dataset {
            out.push_str(&format!("{name},{n},{}\n", self.images_per_user[name]));
        }
        out
    }

    pub fn age_histogram_csv(&self) -> String {
        let mut out = String::from("age_years_bin_start,bin_width_years,count\n");
        for (age, n) in &self.age_histogram {
            out.push_str(&format!("{age},1,{n}\n"));
        }
        out
    }

    pub fn gender_distribution_csv(&self) -> String {
        let mut out = String::from("dataset,male,female\n");
        for (name, g) in &self.gender_distribution {
            out.push_str(&format!("{name},{},{}\n", g.male, g.female));
        }
        out
    }

    pub fn age_group_distribution_csv(&self) -> String {
        let mut out = String::from("dataset,child,adult,elderly\n");
        for (name, f) in &self.age_group_distribution {
            let get = |g| f.get(&g).copied().unwrap_or(0.0);
            out.push_str(&format!(
                "{name},{},{},{}\n",
                get(AgeGroup::Child),
                get(AgeGroup::Adult),
                get(AgeGroup::Elderly)
            ));
        }
        out
    }

    pub fn class_distribution_csv(&self) -> String {
        let mut out = String::from("dataset");
        for l in ExpressionLabel::ALL {
            out.push(',');
            out.push_str(l.as_str());
        }
        out.push('\n');
        for (name, f) in &self.class_distribution {
            out.push_str(name);
            for l in ExpressionLabel::ALL {
                out.push_str(&format!(",{}", f.get(l).copied().unwrap_or(0.0)));
            }
            out.push('\n');
        }
        out
    }

    /// One CSV per statistic under `dir`; rows ordered by dataset name.
    pub fn write_csvs(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        let files = [
            ("image_counts.csv", self.image_counts_csv()),
            ("user_counts.csv", self.user_counts_csv()),
            ("age_histogram.csv", self.age_histogram_csv()),
            ("gender_distribution.csv", self.gender_distribution_csv()),
            ("age_group_distribution.csv", self.age_group_distribution_csv()),
            ("class_distribution.csv", self.class_distribution_csv()),
        ];
        let mut written = Vec::new();
        for (file, body) in files {
            let path = dir.join(file);
            write_string_atomic(&path, &body)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Provenance;
    use crate::manifest::SampleRecord;

    fn record(ds: &str, id: &str, user: Option<&str>) -> SampleRecord {
        let mut r = SampleRecord::image(ds, id, id, "happiness");
        r.label = Some(ExpressionLabel::Happiness);
        r.user_id = user.map(String::from);
        r
    }

    #[test]
    fn users_and_images_per_user() {
        let mut m = DatasetManifest::new("A", Provenance::LabControlled);
        m.samples = vec![
            record("A", "1", Some("u1")),
            record("A", "2", Some("u1")),
            record("A", "3", Some("u1")),
            record("A", "4", Some("u2")),
        ];
        let b = compute_statistics(&[m]);
        assert_eq!(b.user_count_per_dataset["A"], 2);
        assert_eq!(b.images_per_user["A"], 2.0);
        assert_eq!(b.image_count_per_dataset["A"], 4);
    }

    #[test]
    fn all_male_dataset() {
        let mut m = DatasetManifest::new("A", Provenance::LabControlled);
        let mut r = record("A", "1", None);
        r.gender = Some(Gender::Male);
        m.samples = vec![r.clone(), SampleRecord { sample_id: "2".into(), ..r }];
        let b = compute_statistics(&[m]);
        assert_eq!(b.gender_distribution["A"], GenderSplit { male: 1.0, female: 0.0 });
        assert!(b.user_count_per_dataset.is_empty());
    }

    #[test]
    fn combined_age_histogram() {
        let mut a = DatasetManifest::new("A", Provenance::LabControlled);
        let mut b = DatasetManifest::new("B", Provenance::LabControlled);
        for (i, age) in [10.0, 10.0, 30.0].iter().enumerate() {
            let mut r = record("A", &i.to_string(), None);
            r.age_years = Some(*age);
            a.samples.push(r);
        }
        let mut r = record("B", "x", None);
        r.age_years = Some(60.0);
        b.samples.push(r);
        let s = compute_statistics(&[a, b]);
        let expected: BTreeMap<i64, usize> = [(10, 2), (30, 1), (60, 1)].into_iter().collect();
        assert_eq!(s.age_histogram, expected);
    }

    #[test]
    fn excluded_samples_do_not_count() {
        let mut m = DatasetManifest::new("A", Provenance::WebAutomatic);
        let mut r = record("A", "1", None);
        r.excluded = true;
        r.exclusion_reason = Some("no_face".into());
        m.samples = vec![r, record("A", "2", None)];
        let s = compute_statistics(&[m]);
        assert_eq!(s.image_count_per_dataset["A"], 1);
        assert_eq!(s.class_counts["A"].values().sum::<usize>(), 1);
    }
}

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::labels::{AgeGroup, Gender};

/// One per-image automatic estimate belonging to a single user.
#[derive(Debug, Clone, PartialEq)]
pub struct DemographicEstimate {
    pub sample_id: String,
    pub age_years: Option<f64>,
    pub gender: Option<Gender>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserDemographics {
    pub age_years: Option<f64>,
    pub gender: Option<Gender>,
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 0 {
        (values[mid - 1] + values[mid]) / 2.0
    } else {
        values[mid]
    })
}

/// Fuses per-image estimates of one user: median age and modal gender.
///
/// Absent fields are dropped before aggregating. A gender tie goes to the
/// gender of the tied image with the lowest `sample_id`.
pub fn aggregate_user_demographics(estimates: &[DemographicEstimate]) -> Result<UserDemographics> {
    if estimates.is_empty() {
        return Err(Error::Precondition("no estimates to aggregate".into()));
    }
    let mut ages: Vec<f64> = estimates.iter().filter_map(|e| e.age_years).collect();

    // gender -> (count, lowest sample_id carrying it)
    let mut tally: BTreeMap<Gender, (usize, &str)> = BTreeMap::new();
    for e in estimates {
        if let Some(g) = e.gender {
            let slot = tally.entry(g).or_insert((0, e.sample_id.as_str()));
            slot.0 += 1;
            if e.sample_id.as_str() < slot.1 {
                slot.1 = e.sample_id.as_str();
            }
        }
    }
    let gender = tally
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then_with(|| b.1 .1.cmp(a.1 .1)))
        .map(|(g, _)| *g);

    Ok(UserDemographics {
        age_years: median(&mut ages),
        gender,
    })
}

/// Maps an age in years to its group; fractional ages are floored first.
pub fn age_group_for_years(age_years: f64) -> AgeGroup {
    let years = age_years.floor();
    if years <= 17.0 {
        AgeGroup::Child
    } else if years <= 59.0 {
        AgeGroup::Adult
    } else {
        AgeGroup::Elderly
    }
}

/// Sources of age information, in decreasing priority.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AgeEvidence {
    pub dataset_age: Option<f64>,
    pub dataset_group: Option<AgeGroup>,
    pub estimated_age: Option<f64>,
}

pub fn assign_age_group(evidence: AgeEvidence) -> Option<AgeGroup> {
    if let Some(age) = evidence.dataset_age {
        return Some(age_group_for_years(age));
    }
    if let Some(group) = evidence.dataset_group {
        return Some(group);
    }
    evidence.estimated_age.map(age_group_for_years)
}

use std::fmt;

use crate::manifest::SampleRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExclusionReason {
    NoFace,
    PoseFullOrBack,
    PoseMissing,
    UnmappedLabel,
}

impl ExclusionReason {
    pub const ALL: [ExclusionReason; 4] = [
        ExclusionReason::NoFace,
        ExclusionReason::PoseFullOrBack,
        ExclusionReason::PoseMissing,
        ExclusionReason::UnmappedLabel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::NoFace => "no_face",
            ExclusionReason::PoseFullOrBack => "pose_full_or_back",
            ExclusionReason::PoseMissing => "pose_missing",
            ExclusionReason::UnmappedLabel => "unmapped_label",
        }
    }

    /// The first failing criterion, checked in declaration order.
    pub fn evaluate(record: &SampleRecord) -> Option<ExclusionReason> {
        if record.face_bbox.is_none() {
            return Some(ExclusionReason::NoFace);
        }
        match record.head_pose {
            Some(pose) if pose.is_full_or_back() => return Some(ExclusionReason::PoseFullOrBack),
            None => return Some(ExclusionReason::PoseMissing),
            Some(_) => {}
        }
        if record.label.is_none() {
            return Some(ExclusionReason::UnmappedLabel);
        }
        None
    }
}

impl fmt::Display for ExclusionReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Recomputes `excluded`/`exclusion_reason` from the record's annotations.
/// Idempotent: the previous exclusion state is ignored.
pub fn apply_exclusion(mut record: SampleRecord) -> SampleRecord {
    let reason = ExclusionReason::evaluate(&record);
    record.excluded = reason.is_some();
    record.exclusion_reason = reason.map(|r| r.as_str().to_string());
    record
}

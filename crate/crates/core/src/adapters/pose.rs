use crate::error::{Error, Result};
use crate::labels::HeadPose;

/// Discretizes yaw (degrees, positive toward image right) into the six
/// orientation classes using the midpoints between the 0/45/90 anchors.
pub fn bin_head_pose(yaw: f64) -> Result<HeadPose> {
    if !(-180.0..=180.0).contains(&yaw) {
        return Err(Error::Precondition(format!("yaw {yaw} outside [-180, 180]")));
    }
    let magnitude = yaw.abs();
    let right = yaw > 0.0;
    Ok(if magnitude <= 22.5 {
        HeadPose::Front
    } else if magnitude <= 67.5 {
        if right {
            HeadPose::HalfRight
        } else {
            HeadPose::HalfLeft
        }
    } else if magnitude <= 112.5 {
        if right {
            HeadPose::FullRight
        } else {
            HeadPose::FullLeft
        }
    } else {
        HeadPose::Back
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_angles() {
        assert_eq!(bin_head_pose(0.0).unwrap(), HeadPose::Front);
        assert_eq!(bin_head_pose(-45.0).unwrap(), HeadPose::HalfLeft);
        assert_eq!(bin_head_pose(45.0).unwrap(), HeadPose::HalfRight);
        assert_eq!(bin_head_pose(100.0).unwrap(), HeadPose::FullRight);
        assert_eq!(bin_head_pose(-90.0).unwrap(), HeadPose::FullLeft);
        assert_eq!(bin_head_pose(180.0).unwrap(), HeadPose::Back);
    }

    #[test]
    fn boundaries_belong_to_the_inner_bin() {
        assert_eq!(bin_head_pose(22.5).unwrap(), HeadPose::Front);
        assert_eq!(bin_head_pose(22.5001).unwrap(), HeadPose::HalfRight);
        assert_eq!(bin_head_pose(-67.5).unwrap(), HeadPose::HalfLeft);
        assert_eq!(bin_head_pose(112.5).unwrap(), HeadPose::FullRight);
        assert_eq!(bin_head_pose(-112.51).unwrap(), HeadPose::Back);
    }

    #[test]
    fn out_of_range_is_a_contract_error() {
        assert!(bin_head_pose(180.5).is_err());
        assert!(bin_head_pose(f64::NAN).is_err());
    }

    #[test]
    fn sweep_partitions_and_mirrors() {
        let mut yaw = -180.0;
        while yaw <= 180.0 {
            let pose = bin_head_pose(yaw).unwrap();
            assert_eq!(bin_head_pose(-yaw).unwrap(), pose.mirrored(), "yaw {yaw}");
            let m = yaw.abs();
            let expected_bins = [m <= 22.5, m > 22.5 && m <= 67.5, m > 67.5 && m <= 112.5, m > 112.5];
            assert_eq!(expected_bins.iter().filter(|b| **b).count(), 1);
            yaw += 0.5;
        }
    }
}

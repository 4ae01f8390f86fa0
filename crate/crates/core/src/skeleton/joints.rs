//! Joint taxonomy: the 16-joint skeleton, its index order, the DOF groups,
//! and the canonical rest pose used by the synthetic generator.

use serde::{Deserialize, Serialize};

/// The 16 joints in fixed index order. The index order is part of the
/// on-disk contract; never reorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(usize)]
pub enum JointId {
    RAnkle = 0,
    RKnee = 1,
    RHip = 2,
    LHip = 3,
    LKnee = 4,
    LAnkle = 5,
    Pelvis = 6,
    Thorax = 7,
    Neck = 8,
    Head = 9,
    RWrist = 10,
    RElbow = 11,
    RShoulder = 12,
    LShoulder = 13,
    LElbow = 14,
    LWrist = 15,
}

/// Number of joints in a pose.
pub const NUM_JOINTS: usize = 16;

/// All joints in index order.
pub const ALL_JOINTS: [JointId; NUM_JOINTS] = [
    JointId::RAnkle,
    JointId::RKnee,
    JointId::RHip,
    JointId::LHip,
    JointId::LKnee,
    JointId::LAnkle,
    JointId::Pelvis,
    JointId::Thorax,
    JointId::Neck,
    JointId::Head,
    JointId::RWrist,
    JointId::RElbow,
    JointId::RShoulder,
    JointId::LShoulder,
    JointId::LElbow,
    JointId::LWrist,
];

impl JointId {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(idx: usize) -> Option<JointId> {
        ALL_JOINTS.get(idx).copied()
    }

    /// Short lowercase name, stable for CSV headers and reports.
    pub fn name(self) -> &'static str {
        match self {
            JointId::RAnkle => "r-ankle",
            JointId::RKnee => "r-knee",
            JointId::RHip => "r-hip",
            JointId::LHip => "l-hip",
            JointId::LKnee => "l-knee",
            JointId::LAnkle => "l-ankle",
            JointId::Pelvis => "pelvis",
            JointId::Thorax => "thorax",
            JointId::Neck => "neck",
            JointId::Head => "head",
            JointId::RWrist => "r-wrist",
            JointId::RElbow => "r-elbow",
            JointId::RShoulder => "r-shoulder",
            JointId::LShoulder => "l-shoulder",
            JointId::LElbow => "l-elbow",
            JointId::LWrist => "l-wrist",
        }
    }
}

/// DOF tier of a joint: the torso moves least, distal limb joints most.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JointGroup {
    Torso,
    Proximal,
    Distal,
}

/// Torso joints in ascending index order.
pub const TORSO_JOINTS: [JointId; 7] = [
    JointId::RHip,
    JointId::LHip,
    JointId::Pelvis,
    JointId::Thorax,
    JointId::Neck,
    JointId::RShoulder,
    JointId::LShoulder,
];

/// Proximal limb joints (head, elbows, knees) in ascending index order.
pub const PROXIMAL_JOINTS: [JointId; 5] = [
    JointId::RKnee,
    JointId::LKnee,
    JointId::Head,
    JointId::RElbow,
    JointId::LElbow,
];

/// Distal limb joints (wrists, ankles) in ascending index order.
pub const DISTAL_JOINTS: [JointId; 4] = [
    JointId::RAnkle,
    JointId::LAnkle,
    JointId::RWrist,
    JointId::LWrist,
];

/// Fixed membership map from joint to DOF group.
pub fn group_of(joint: JointId) -> JointGroup {
    match joint {
        JointId::Pelvis
        | JointId::RHip
        | JointId::LHip
        | JointId::Thorax
        | JointId::Neck
        | JointId::RShoulder
        | JointId::LShoulder => JointGroup::Torso,
        JointId::Head | JointId::RElbow | JointId::LElbow | JointId::RKnee | JointId::LKnee => {
            JointGroup::Proximal
        }
        JointId::RWrist | JointId::LWrist | JointId::RAnkle | JointId::LAnkle => JointGroup::Distal,
    }
}

/// Joints of a group in ascending index order.
pub fn group_members(group: JointGroup) -> &'static [JointId] {
    match group {
        JointGroup::Torso => &TORSO_JOINTS,
        JointGroup::Proximal => &PROXIMAL_JOINTS,
        JointGroup::Distal => &DISTAL_JOINTS,
    }
}

/// Kinematic parent of each joint; the pelvis is the root (None).
/// Used for bone-length validation and by the synthetic generator.
pub fn parent_of(joint: JointId) -> Option<JointId> {
    match joint {
        JointId::Pelvis => None,
        JointId::RHip | JointId::LHip | JointId::Thorax => Some(JointId::Pelvis),
        JointId::RKnee => Some(JointId::RHip),
        JointId::LKnee => Some(JointId::LHip),
        JointId::RAnkle => Some(JointId::RKnee),
        JointId::LAnkle => Some(JointId::LKnee),
        JointId::Neck | JointId::RShoulder | JointId::LShoulder => Some(JointId::Thorax),
        JointId::Head => Some(JointId::Neck),
        JointId::RElbow => Some(JointId::RShoulder),
        JointId::LElbow => Some(JointId::LShoulder),
        JointId::RWrist => Some(JointId::RElbow),
        JointId::LWrist => Some(JointId::LElbow),
    }
}

/// Canonical rest-pose joint positions in millimeters, body frame:
/// +y up, +z the facing direction, +x the subject's left. Pelvis at the
/// origin, arms hanging at the sides, legs straight. All joints lie in
/// the z = 0 plane.
pub const CANONICAL_REST_POSE: [[f64; 3]; NUM_JOINTS] = [
    [-120.0, -890.0, 0.0], // r-ankle
    [-120.0, -450.0, 0.0], // r-knee
    [-120.0, 0.0, 0.0],    // r-hip
    [120.0, 0.0, 0.0],     // l-hip
    [120.0, -450.0, 0.0],  // l-knee
    [120.0, -890.0, 0.0],  // l-ankle
    [0.0, 0.0, 0.0],       // pelvis
    [0.0, 450.0, 0.0],     // thorax
    [0.0, 550.0, 0.0],     // neck
    [0.0, 730.0, 0.0],     // head
    [-180.0, 0.0, 0.0],    // r-wrist
    [-180.0, 250.0, 0.0],  // r-elbow
    [-180.0, 530.0, 0.0],  // r-shoulder
    [180.0, 530.0, 0.0],   // l-shoulder
    [180.0, 250.0, 0.0],   // l-elbow
    [180.0, 0.0, 0.0],     // l-wrist
];

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn groups_partition_all_sixteen_joints() {
        let mut seen = HashSet::new();
        for &j in TORSO_JOINTS
            .iter()
            .chain(PROXIMAL_JOINTS.iter())
            .chain(DISTAL_JOINTS.iter())
        {
            assert!(seen.insert(j), "{:?} appears in two groups", j);
        }
        let all: HashSet<_> = ALL_JOINTS.iter().copied().collect();
        assert_eq!(seen, all);
    }

    #[test]
    fn group_of_matches_membership_lists() {
        for &j in &ALL_JOINTS {
            let g = group_of(j);
            assert!(group_members(g).contains(&j));
        }
        assert_eq!(group_of(JointId::LWrist), JointGroup::Distal);
        assert_eq!(group_of(JointId::Head), JointGroup::Proximal);
        assert_eq!(group_of(JointId::Pelvis), JointGroup::Torso);
    }

    #[test]
    fn indices_are_stable() {
        assert_eq!(JointId::RAnkle.index(), 0);
        assert_eq!(JointId::Pelvis.index(), 6);
        assert_eq!(JointId::LWrist.index(), 15);
        for (i, &j) in ALL_JOINTS.iter().enumerate() {
            assert_eq!(j.index(), i);
            assert_eq!(JointId::from_index(i), Some(j));
        }
        assert_eq!(JointId::from_index(16), None);
    }

    #[test]
    fn parent_map_reaches_pelvis_from_every_joint() {
        for &j in &ALL_JOINTS {
            let mut cur = j;
            let mut hops = 0;
            while let Some(p) = parent_of(cur) {
                cur = p;
                hops += 1;
                assert!(hops <= NUM_JOINTS, "cycle in parent map at {:?}", j);
            }
            assert_eq!(cur, JointId::Pelvis);
        }
    }

    #[test]
    fn canonical_rest_pose_bones_are_positive() {
        for &j in &ALL_JOINTS {
            if let Some(p) = parent_of(j) {
                let a = CANONICAL_REST_POSE[j.index()];
                let b = CANONICAL_REST_POSE[p.index()];
                let d2: f64 = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum();
                assert!(d2.sqrt() > 0.0, "zero-length bone {:?}->{:?}", p, j);
            }
        }
    }
}

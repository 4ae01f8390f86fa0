//! Joint taxonomy, pose containers, dataset file format, synthetic data
//! generation, dataset statistics, and mixed-domain batching.

mod batch;
mod dataset;
mod generate;
mod joints;
mod pose;
mod stats;

pub use batch::{BatchError, MixedBatch, MixedBatcher};
pub use dataset::{
    load_dataset, parse_dataset, save_dataset, Dataset, DatasetError, DatasetMeta, Domain,
    SampleRecord, FORMAT_VERSION,
};
pub use generate::{
    synth_generate, AngleConfig, CameraConfig, GeneratorConfig, GeneratorError, PlacementConfig,
};
pub use joints::{
    group_members, group_of, parent_of, JointGroup, JointId, ALL_JOINTS, CANONICAL_REST_POSE,
    DISTAL_JOINTS, NUM_JOINTS, PROXIMAL_JOINTS, TORSO_JOINTS,
};
pub use pose::{Pose2D, Pose3D};
pub use stats::{joint_std, JointStdReport, StatsError};

/// Euclidean distance between two 3D points.
pub fn pose_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    pose::dist3(a, b)
}

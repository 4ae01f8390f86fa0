//! The pose networks: multi-task attribute/domain head and the
//! bi-directional progressive 3D regressor, with the ablation baseline,
//! their losses, training stages, and inference.

mod evidence;
mod nets;
mod train;

pub use evidence::{
    encode_evidence, normalized_coords, one_hot_attrs, EvidenceError, EvidenceVector,
    ATTR_PROB_DIM, COORD_DIM, EVIDENCE_DIM,
};
pub use nets::{
    assemble_pose, groups_flat, loss_3d, loss_3d_single, loss_attr, loss_domain, split_groups,
    BaselineNet, Block1Out, GrlMode, GroupValues, ModelError, MultiTaskHead, NetConfig, PoseNet,
    ProgressiveNet, RegressorG, DISTAL_DIM, GROUPS_DIM, MM_SCALE, PROXIMAL_DIM, TORSO_DIM,
};
pub use train::{
    evidence_rows, head_attr_probs, head_domain_accuracy, predict, predict_rows, probs_to_labels,
    train_finetune, train_multitask, train_pose_stage2, AttrSource, MultitaskEpoch, PoseEpoch,
    TrainConfig,
};

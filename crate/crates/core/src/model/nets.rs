//! Network architectures: the six-module bi-directional progressive
//! regressor, the independent-groups baseline, and the multi-task
//! attribute/domain head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::evidence::{ATTR_PROB_DIM, COORD_DIM};
use crate::autodiff::{
    init_linear, AutodiffError, CheckpointHeader, ParamError, Params, Tape, Value,
    CHECKPOINT_VERSION,
};
use crate::geometry::AttributeVector;
use crate::skeleton::{JointId, Pose3D, DISTAL_JOINTS, PROXIMAL_JOINTS, TORSO_JOINTS};

/// 3 coordinates per torso joint.
pub const TORSO_DIM: usize = TORSO_JOINTS.len() * 3;
pub const PROXIMAL_DIM: usize = PROXIMAL_JOINTS.len() * 3;
pub const DISTAL_DIM: usize = DISTAL_JOINTS.len() * 3;
pub const GROUPS_DIM: usize = TORSO_DIM + PROXIMAL_DIM + DISTAL_DIM;

/// Network-internal unit: millimeters divided by this factor, keeping
/// activations O(1); rescaled at the public boundary.
pub const MM_SCALE: f64 = 1000.0;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),
}

/// Width/depth of the group regressors and whether attribute
/// probabilities are part of the evidence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetConfig {
    pub use_attributes: bool,
    pub width: usize,
    pub depth: usize,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            use_attributes: true,
            width: 256,
            depth: 2,
        }
    }
}

impl NetConfig {
    pub fn evidence_dim(&self) -> usize {
        if self.use_attributes {
            COORD_DIM + ATTR_PROB_DIM
        } else {
            COORD_DIM
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.width == 0 {
            return Err(ModelError::Config("width must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

impl Linear {
    fn new(
        params: &mut Params,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
    ) -> Result<Self, ModelError> {
        let (w, b) = init_linear(params, rng, prefix, fan_in, fan_out)?;
        Ok(Self { w, b })
    }

    fn new_with_gain(
        params: &mut Params,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        fan_in: usize,
        fan_out: usize,
        gain: f64,
    ) -> Result<Self, ModelError> {
        let (w, b) = init_linear_with_gain(params, rng, prefix, fan_in, fan_out, gain)?;
        Ok(Self { w, b })
    }

    fn forward(&self, tape: &mut Tape, leaves: &[Value], x: Value) -> Result<Value, ModelError> {
        let y = tape.matmul(x, leaves[self.w])?;
        Ok(tape.add_bias(y, leaves[self.b])?)
    }

    fn offset(self, delta: usize) -> Self {
        Self {
            w: self.w + delta,
            b: self.b + delta,
        }
    }
}

/// Residual multilayer perceptron regressing one body-part group:
/// input linear to the working width, `depth` residual blocks
/// (linear -> relu -> linear with additive skip), output linear.
#[derive(Debug, Clone)]
pub struct RegressorG {
    pub in_dim: usize,
    pub out_dim: usize,
    input: Linear,
    blocks: Vec<(Linear, Linear)>,
    output: Linear,
}

impl RegressorG {
    pub fn new(
        params: &mut Params,
        rng: &mut ChaCha8Rng,
        prefix: &str,
        in_dim: usize,
        width: usize,
        depth: usize,
        out_dim: usize,
    ) -> Result<Self, ModelError> {
        let input = Linear::new(params, rng, &format!("{prefix}.in"), in_dim, width)?;
        let mut blocks = Vec::with_capacity(depth);
        for d in 0..depth {
            let l1 = Linear::new(params, rng, &format!("{prefix}.res{d}.0"), width, width)?;
            let l2 = Linear::new(params, rng, &format!("{prefix}.res{d}.1"), width, width)?;
            blocks.push((l1, l2));
        }
        // damped output init: predictions start near the origin instead of
        // meters away once the mm boundary scale is applied
        let output =
            Linear::new_with_gain(params, rng, &format!("{prefix}.out"), width, out_dim, 0.1)?;
        Ok(Self {
            in_dim,
            out_dim,
            input,
            blocks,
            output,
        })
    }

    /// x: [m, in_dim] -> [m, out_dim], network units.
    pub fn forward(&self, tape: &mut Tape, leaves: &[Value], x: Value) -> Result<Value, ModelError> {
        let mut h = self.input.forward(tape, leaves, x)?;
        for (l1, l2) in &self.blocks {
            let t = l1.forward(tape, leaves, h)?;
            let t = tape.relu(t)?;
            let t = l2.forward(tape, leaves, t)?;
            h = tape.add(h, t)?;
        }
        self.output.forward(tape, leaves, h)
    }

    fn offset(&self, delta: usize) -> Self {
        Self {
            in_dim: self.in_dim,
            out_dim: self.out_dim,
            input: self.input.offset(delta),
            blocks: self
                .blocks
                .iter()
                .map(|(a, b)| (a.offset(delta), b.offset(delta)))
                .collect(),
            output: self.output.offset(delta),
        }
    }
}

/// Group predictions of one block in millimeters: [m, 21], [m, 15], [m, 12].
#[derive(Debug, Clone, Copy)]
pub struct GroupValues {
    pub torso: Value,
    pub proximal: Value,
    pub distal: Value,
}

/// Block-I outputs plus the network-unit values Block-II consumes.
#[derive(Debug, Clone, Copy)]
pub struct Block1Out {
    pub mm: GroupValues,
    pub net_units: GroupValues,
}

/// The six-module progressive regressor. Block-I predicts torso, then
/// proximal from (X, torso), then distal from (X, proximal, torso);
/// Block-II re-predicts every group from the opposite direction.
#[derive(Debug, Clone)]
pub struct ProgressiveNet {
    pub cfg: NetConfig,
    pub params: Params,
    pub seed: u64,
    g11: RegressorG,
    g12: RegressorG,
    g13: RegressorG,
    g21: RegressorG,
    g22: RegressorG,
    g23: RegressorG,
}

impl ProgressiveNet {
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut params = Params::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cfg.evidence_dim();
        let (w, d) = (cfg.width, cfg.depth);
        let g11 = RegressorG::new(&mut params, &mut rng, "g11", x, w, d, TORSO_DIM)?;
        let g12 = RegressorG::new(&mut params, &mut rng, "g12", x + TORSO_DIM, w, d, PROXIMAL_DIM)?;
        let g13 = RegressorG::new(
            &mut params,
            &mut rng,
            "g13",
            x + TORSO_DIM + PROXIMAL_DIM,
            w,
            d,
            DISTAL_DIM,
        )?;
        let g21 = RegressorG::new(
            &mut params,
            &mut rng,
            "g21",
            x + PROXIMAL_DIM + DISTAL_DIM,
            w,
            d,
            TORSO_DIM,
        )?;
        let g22 = RegressorG::new(
            &mut params,
            &mut rng,
            "g22",
            x + TORSO_DIM + DISTAL_DIM,
            w,
            d,
            PROXIMAL_DIM,
        )?;
        let g23 = RegressorG::new(
            &mut params,
            &mut rng,
            "g23",
            x + TORSO_DIM + PROXIMAL_DIM,
            w,
            d,
            DISTAL_DIM,
        )?;
        Ok(Self {
            cfg,
            params,
            seed,
            g11,
            g12,
            g13,
            g21,
            g22,
            g23,
        })
    }

    /// The six regressors in (11, 12, 13, 21, 22, 23) order.
    pub fn regressors(&self) -> [&RegressorG; 6] {
        [&self.g11, &self.g12, &self.g13, &self.g21, &self.g22, &self.g23]
    }

    /// Block-I: torso from X, proximal from (X, torso), distal from
    /// (X, proximal, torso).
    pub fn forward_block1(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        x: Value,
    ) -> Result<Block1Out, ModelError> {
        let y11 = self.g11.forward(tape, leaves, x)?;
        let in12 = tape.concat(1, &[x, y11])?;
        let y12 = self.g12.forward(tape, leaves, in12)?;
        let in13 = tape.concat(1, &[x, y12, y11])?;
        let y13 = self.g13.forward(tape, leaves, in13)?;
        Ok(Block1Out {
            mm: GroupValues {
                torso: tape.mul_scalar(y11, MM_SCALE)?,
                proximal: tape.mul_scalar(y12, MM_SCALE)?,
                distal: tape.mul_scalar(y13, MM_SCALE)?,
            },
            net_units: GroupValues {
                torso: y11,
                proximal: y12,
                distal: y13,
            },
        })
    }

    /// Block-II: the dependency runs in the reversed direction; Block-I's
    /// torso prediction is not an input here.
    pub fn forward_block2(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        x: Value,
        block1: &Block1Out,
    ) -> Result<GroupValues, ModelError> {
        let y12 = block1.net_units.proximal;
        let y13 = block1.net_units.distal;
        let in21 = tape.concat(1, &[x, y12, y13])?;
        let y21 = self.g21.forward(tape, leaves, in21)?;
        let in22 = tape.concat(1, &[x, y21, y13])?;
        let y22 = self.g22.forward(tape, leaves, in22)?;
        let in23 = tape.concat(1, &[x, y21, y22])?;
        let y23 = self.g23.forward(tape, leaves, in23)?;
        Ok(GroupValues {
            torso: tape.mul_scalar(y21, MM_SCALE)?,
            proximal: tape.mul_scalar(y22, MM_SCALE)?,
            distal: tape.mul_scalar(y23, MM_SCALE)?,
        })
    }

    pub fn checkpoint_header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            model: "progressive".into(),
            layer_sizes: vec![
                self.cfg.evidence_dim(),
                self.cfg.width,
                self.cfg.depth,
            ],
            seed: self.seed,
        }
    }

    pub fn from_checkpoint(header: &CheckpointHeader, params: Params) -> Result<Self, ModelError> {
        let cfg = config_from_header(header, "progressive")?;
        let mut net = Self::new(cfg, header.seed)?;
        adopt_params(&mut net.params, params)?;
        Ok(net)
    }

    fn offset(&self, delta: usize) -> Self {
        Self {
            cfg: self.cfg,
            params: Params::new(),
            seed: self.seed,
            g11: self.g11.offset(delta),
            g12: self.g12.offset(delta),
            g13: self.g13.offset(delta),
            g21: self.g21.offset(delta),
            g22: self.g22.offset(delta),
            g23: self.g23.offset(delta),
        }
    }
}

/// Ablation baseline: three independent regressors, each reading only X.
#[derive(Debug, Clone)]
pub struct BaselineNet {
    pub cfg: NetConfig,
    pub params: Params,
    pub seed: u64,
    g1: RegressorG,
    g2: RegressorG,
    g3: RegressorG,
}

impl BaselineNet {
    pub fn new(cfg: NetConfig, seed: u64) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut params = Params::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = cfg.evidence_dim();
        let (w, d) = (cfg.width, cfg.depth);
        let g1 = RegressorG::new(&mut params, &mut rng, "g1", x, w, d, TORSO_DIM)?;
        let g2 = RegressorG::new(&mut params, &mut rng, "g2", x, w, d, PROXIMAL_DIM)?;
        let g3 = RegressorG::new(&mut params, &mut rng, "g3", x, w, d, DISTAL_DIM)?;
        Ok(Self {
            cfg,
            params,
            seed,
            g1,
            g2,
            g3,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        x: Value,
    ) -> Result<GroupValues, ModelError> {
        let y1 = self.g1.forward(tape, leaves, x)?;
        let y2 = self.g2.forward(tape, leaves, x)?;
        let y3 = self.g3.forward(tape, leaves, x)?;
        Ok(GroupValues {
            torso: tape.mul_scalar(y1, MM_SCALE)?,
            proximal: tape.mul_scalar(y2, MM_SCALE)?,
            distal: tape.mul_scalar(y3, MM_SCALE)?,
        })
    }

    pub fn checkpoint_header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            model: "baseline".into(),
            layer_sizes: vec![self.cfg.evidence_dim(), self.cfg.width, self.cfg.depth],
            seed: self.seed,
        }
    }

    pub fn from_checkpoint(header: &CheckpointHeader, params: Params) -> Result<Self, ModelError> {
        let cfg = config_from_header(header, "baseline")?;
        let mut net = Self::new(cfg, header.seed)?;
        adopt_params(&mut net.params, params)?;
        Ok(net)
    }

    fn offset(&self, delta: usize) -> Self {
        Self {
            cfg: self.cfg,
            params: Params::new(),
            seed: self.seed,
            g1: self.g1.offset(delta),
            g2: self.g2.offset(delta),
            g3: self.g3.offset(delta),
        }
    }
}

/// Either 3D regressor behind one interface.
#[derive(Debug, Clone)]
pub enum PoseNet {
    Progressive(ProgressiveNet),
    Baseline(BaselineNet),
}

impl PoseNet {
    pub fn cfg(&self) -> &NetConfig {
        match self {
            PoseNet::Progressive(n) => &n.cfg,
            PoseNet::Baseline(n) => &n.cfg,
        }
    }

    pub fn params(&self) -> &Params {
        match self {
            PoseNet::Progressive(n) => &n.params,
            PoseNet::Baseline(n) => &n.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut Params {
        match self {
            PoseNet::Progressive(n) => &mut n.params,
            PoseNet::Baseline(n) => &mut n.params,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PoseNet::Progressive(_) => "progressive",
            PoseNet::Baseline(_) => "baseline",
        }
    }

    pub fn checkpoint_header(&self) -> CheckpointHeader {
        match self {
            PoseNet::Progressive(n) => n.checkpoint_header(),
            PoseNet::Baseline(n) => n.checkpoint_header(),
        }
    }

    pub fn from_checkpoint(
        header: &CheckpointHeader,
        params: Params,
    ) -> Result<Self, ModelError> {
        match header.model.as_str() {
            "progressive" => Ok(PoseNet::Progressive(ProgressiveNet::from_checkpoint(
                header, params,
            )?)),
            "baseline" => Ok(PoseNet::Baseline(BaselineNet::from_checkpoint(
                header, params,
            )?)),
            other => Err(ModelError::Checkpoint(format!(
                "unknown model kind {other:?}"
            ))),
        }
    }

    /// Final mm-scale group predictions: Block-II for the progressive
    /// net, the single block for the baseline.
    pub fn forward_final(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        x: Value,
    ) -> Result<GroupValues, ModelError> {
        match self {
            PoseNet::Progressive(n) => {
                let b1 = n.forward_block1(tape, leaves, x)?;
                n.forward_block2(tape, leaves, x, &b1)
            }
            PoseNet::Baseline(n) => n.forward(tape, leaves, x),
        }
    }

    pub(crate) fn offset(&self, delta: usize) -> Self {
        match self {
            PoseNet::Progressive(n) => PoseNet::Progressive(n.offset(delta)),
            PoseNet::Baseline(n) => PoseNet::Baseline(n.offset(delta)),
        }
    }
}

fn config_from_header(header: &CheckpointHeader, kind: &str) -> Result<NetConfig, ModelError> {
    if header.model != kind {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint is for model {:?}, expected {:?}",
            header.model, kind
        )));
    }
    if header.layer_sizes.len() != 3 {
        return Err(ModelError::Checkpoint(format!(
            "expected 3 layer sizes [evidence, width, depth], got {:?}",
            header.layer_sizes
        )));
    }
    let use_attributes = match header.layer_sizes[0] {
        x if x == COORD_DIM + ATTR_PROB_DIM => true,
        x if x == COORD_DIM => false,
        other => {
            return Err(ModelError::Checkpoint(format!(
                "evidence dim {other} matches neither {} nor {}",
                COORD_DIM,
                COORD_DIM + ATTR_PROB_DIM
            )))
        }
    };
    Ok(NetConfig {
        use_attributes,
        width: header.layer_sizes[1],
        depth: header.layer_sizes[2],
    })
}

/// Replace freshly initialized parameters with checkpointed ones; every
/// name and shape must line up.
fn adopt_params(own: &mut Params, loaded: Params) -> Result<(), ModelError> {
    if own.len() != loaded.len() {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint has {} tensors, model needs {}",
            loaded.len(),
            own.len()
        )));
    }
    for i in 0..loaded.len() {
        let name = loaded.name(i).to_string();
        let value = loaded.value(i).clone();
        let target = own.get(&name).map_err(|_| {
            ModelError::Checkpoint(format!("unexpected tensor {name:?} in checkpoint"))
        })?;
        if target.shape() != value.shape() {
            return Err(ModelError::Checkpoint(format!(
                "tensor {name:?}: checkpoint shape {:?}, model shape {:?}",
                value.shape(),
                target.shape()
            )));
        }
        own.set(&name, value)?;
    }
    Ok(())
}

/// Multi-task head over the normalized 2D pose: shared feature MLP,
/// 9x3 attribute logits, and a 2-way domain classifier behind a gradient
/// control (reversal or stop).
#[derive(Debug, Clone)]
pub struct MultiTaskHead {
    pub width: usize,
    pub params: Params,
    pub seed: u64,
    shared1: Linear,
    shared2: Linear,
    attr_out: Linear,
    dom1: Linear,
    dom2: Linear,
}

/// How gradients reach the shared features from the domain classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GrlMode {
    /// Adversarial: backward multiplies by -lambda.
    Reversal(f64),
    /// Domain adaptation off: the domain loss trains only the classifier.
    Stop,
}

const DOMAIN_HIDDEN: usize = 32;

impl MultiTaskHead {
    pub fn new(width: usize, seed: u64) -> Result<Self, ModelError> {
        if width == 0 {
            return Err(ModelError::Config("head width must be positive".into()));
        }
        let mut params = Params::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shared1 = Linear::new(&mut params, &mut rng, "shared1", COORD_DIM, width)?;
        let shared2 = Linear::new(&mut params, &mut rng, "shared2", width, width)?;
        let attr_out = Linear::new(&mut params, &mut rng, "attr_out", width, ATTR_PROB_DIM)?;
        let dom1 = Linear::new(&mut params, &mut rng, "dom1", width, DOMAIN_HIDDEN)?;
        let dom2 = Linear::new(&mut params, &mut rng, "dom2", DOMAIN_HIDDEN, 2)?;
        Ok(Self {
            width,
            params,
            seed,
            shared1,
            shared2,
            attr_out,
            dom1,
            dom2,
        })
    }

    /// x: [m, 32] normalized coordinates -> shared feature [m, width].
    pub fn forward_features(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        x: Value,
    ) -> Result<Value, ModelError> {
        let h = self.shared1.forward(tape, leaves, x)?;
        let h = tape.relu(h)?;
        let h = self.shared2.forward(tape, leaves, h)?;
        Ok(tape.relu(h)?)
    }

    /// Shared feature -> attribute logits [m, 27].
    pub fn attr_logits(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        features: Value,
    ) -> Result<Value, ModelError> {
        self.attr_out.forward(tape, leaves, features)
    }

    /// Shared feature -> domain logits [m, 2], gradients gated by `mode`.
    pub fn domain_logits(
        &self,
        tape: &mut Tape,
        leaves: &[Value],
        features: Value,
        mode: GrlMode,
    ) -> Result<Value, ModelError> {
        let gated = match mode {
            GrlMode::Reversal(lambda) => tape.grad_reversal(features, lambda)?,
            GrlMode::Stop => tape.detach(features)?,
        };
        let h = self.dom1.forward(tape, leaves, gated)?;
        let h = tape.relu(h)?;
        self.dom2.forward(tape, leaves, h)
    }

    /// Attribute logits [m, 27] -> probabilities [m, 27], each joint
    /// triple a distribution.
    pub fn attr_probs(
        &self,
        tape: &mut Tape,
        logits: Value,
    ) -> Result<Value, ModelError> {
        let m = tape.tensor(logits)?.shape()[0];
        let per_joint = tape.reshape(logits, vec![m * 9, 3])?;
        let probs = tape.softmax_rows(per_joint)?;
        Ok(tape.reshape(probs, vec![m, ATTR_PROB_DIM])?)
    }

    pub fn checkpoint_header(&self) -> CheckpointHeader {
        CheckpointHeader {
            format_version: CHECKPOINT_VERSION,
            model: "multitask_head".into(),
            layer_sizes: vec![COORD_DIM, self.width, ATTR_PROB_DIM, DOMAIN_HIDDEN, 2],
            seed: self.seed,
        }
    }

    pub fn from_checkpoint(header: &CheckpointHeader, params: Params) -> Result<Self, ModelError> {
        if header.model != "multitask_head" {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint is for model {:?}, expected \"multitask_head\"",
                header.model
            )));
        }
        if header.layer_sizes.len() != 5 {
            return Err(ModelError::Checkpoint(format!(
                "expected 5 layer sizes, got {:?}",
                header.layer_sizes
            )));
        }
        let mut head = Self::new(header.layer_sizes[1], header.seed)?;
        adopt_params(&mut head.params, params)?;
        Ok(head)
    }

    pub(crate) fn offset(&self, delta: usize) -> Self {
        Self {
            width: self.width,
            params: Params::new(),
            seed: self.seed,
            shared1: self.shared1.offset(delta),
            shared2: self.shared2.offset(delta),
            attr_out: self.attr_out.offset(delta),
            dom1: self.dom1.offset(delta),
            dom2: self.dom2.offset(delta),
        }
    }
}

/// Scatter group predictions into the 16-joint layout; the pelvis is
/// forced to the origin (root-relative convention).
pub fn assemble_pose(torso: &[f64], proximal: &[f64], distal: &[f64]) -> Pose3D {
    assert_eq!(torso.len(), TORSO_DIM);
    assert_eq!(proximal.len(), PROXIMAL_DIM);
    assert_eq!(distal.len(), DISTAL_DIM);
    let mut coords = [[0.0; 3]; crate::skeleton::NUM_JOINTS];
    let scatter = |coords: &mut [[f64; 3]], joints: &[JointId], vals: &[f64]| {
        for (g, &j) in joints.iter().enumerate() {
            coords[j.index()] = [vals[3 * g], vals[3 * g + 1], vals[3 * g + 2]];
        }
    };
    scatter(&mut coords, &TORSO_JOINTS, torso);
    scatter(&mut coords, &PROXIMAL_JOINTS, proximal);
    scatter(&mut coords, &DISTAL_JOINTS, distal);
    coords[JointId::Pelvis.index()] = [0.0, 0.0, 0.0];
    Pose3D::new(coords)
}

/// Gather a pose into per-group coordinate vectors (torso, proximal,
/// distal), each joint contributing (x, y, z) in group order.
pub fn split_groups(p: &Pose3D) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let gather = |joints: &[JointId]| -> Vec<f64> {
        let mut out = Vec::with_capacity(joints.len() * 3);
        for &j in joints {
            out.extend_from_slice(&p.coords[j.index()]);
        }
        out
    };
    (
        gather(&TORSO_JOINTS),
        gather(&PROXIMAL_JOINTS),
        gather(&DISTAL_JOINTS),
    )
}

/// Pose as one 48-value row in group order, the target layout of the
/// 3D loss.
pub fn groups_flat(p: &Pose3D) -> [f64; GROUPS_DIM] {
    let (t, pr, d) = split_groups(p);
    let mut out = [0.0; GROUPS_DIM];
    out[..TORSO_DIM].copy_from_slice(&t);
    out[TORSO_DIM..TORSO_DIM + PROXIMAL_DIM].copy_from_slice(&pr);
    out[TORSO_DIM + PROXIMAL_DIM..].copy_from_slice(&d);
    out
}

/// 3D supervision: mean-|.| of both blocks' group concatenations against
/// the same targets, in millimeters. `gt` is [m, 48] in group order.
pub fn loss_3d(
    tape: &mut Tape,
    block1: &GroupValues,
    block2: &GroupValues,
    gt: Value,
) -> Result<Value, ModelError> {
    let cat1 = tape.concat(1, &[block1.torso, block1.proximal, block1.distal])?;
    let cat2 = tape.concat(1, &[block2.torso, block2.proximal, block2.distal])?;
    let l1 = tape.l1_loss(cat1, gt)?;
    let l2 = tape.l1_loss(cat2, gt)?;
    Ok(tape.add(l1, l2)?)
}

/// Single-block variant of the 3D loss (the ablation baseline).
pub fn loss_3d_single(
    tape: &mut Tape,
    block: &GroupValues,
    gt: Value,
) -> Result<Value, ModelError> {
    let cat = tape.concat(1, &[block.torso, block.proximal, block.distal])?;
    Ok(tape.l1_loss(cat, gt)?)
}

/// Attribute supervision: softmax cross-entropy per labeled joint,
/// averaged over the 9 joints (and the batch). `logits` is [m, 27].
pub fn loss_attr(
    tape: &mut Tape,
    logits: Value,
    labels: &[AttributeVector],
) -> Result<Value, ModelError> {
    let m = tape.tensor(logits)?.shape()[0];
    if m != labels.len() {
        return Err(ModelError::Config(format!(
            "{} label vectors for a batch of {m}",
            labels.len()
        )));
    }
    let per_joint = tape.reshape(logits, vec![m * 9, 3])?;
    let probs = tape.softmax_rows(per_joint)?;
    let mut targets = Vec::with_capacity(m * 9);
    for av in labels {
        for l in &av.labels {
            targets.push(l.class_index());
        }
    }
    Ok(tape.cross_entropy(probs, &targets)?)
}

/// Domain supervision: softmax cross-entropy of the 2-way classifier.
pub fn loss_domain(
    tape: &mut Tape,
    logits: Value,
    targets: &[usize],
) -> Result<Value, ModelError> {
    let probs = tape.softmax_rows(logits)?;
    Ok(tape.cross_entropy(probs, targets)?)
}

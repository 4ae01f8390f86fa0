//! Three-stage training: the multi-task head, the 3D regressor on
//! ground-truth attributes, and the joint fine-tune that connects them.
//! Every stage is single-threaded and bitwise deterministic per seed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::evidence::{encode_evidence, normalized_coords, one_hot_attrs, COORD_DIM};
use super::nets::{
    assemble_pose, groups_flat, loss_3d, loss_3d_single, loss_attr, loss_domain, GrlMode,
    GroupValues, ModelError, MultiTaskHead, PoseNet, DISTAL_DIM, GROUPS_DIM, PROXIMAL_DIM,
    TORSO_DIM,
};
use crate::autodiff::{Params, Tape, Tensor, Value};
use crate::geometry::{root_relative, Attribute, AttributeVector};
use crate::skeleton::{Dataset, MixedBatcher, Pose2D, Pose3D, SampleRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
    /// Gradient path from the domain loss into the shared features.
    pub grl: GrlMode,
    /// Stage-3 weight on the attribute loss.
    pub lambda_attr: f64,
    /// Stage-3 weight on the domain loss.
    pub lambda_domain: f64,
    pub rmsprop_alpha: f64,
    pub rmsprop_eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            lr: 5e-4,
            batch_size: 12,
            seed: 0,
            grl: GrlMode::Reversal(1.0),
            lambda_attr: 1.0,
            lambda_domain: 0.1,
            rmsprop_alpha: 0.99,
            rmsprop_eps: 1e-8,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 {
            return Err(ModelError::Config("epochs must be >= 1".into()));
        }
        if !(self.lr > 0.0) {
            return Err(ModelError::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Per-epoch record of the multi-task stage.
#[derive(Debug, Clone, PartialEq)]
pub struct MultitaskEpoch {
    pub epoch: usize,
    pub attr_loss: f64,
    pub domain_loss: f64,
    pub domain_accuracy: f64,
}

/// Per-epoch record of the 3D regression stages.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEpoch {
    pub epoch: usize,
    pub loss_3d: f64,
    pub attr_loss: f64,
    pub domain_loss: f64,
    pub domain_accuracy: f64,
}

fn coords_tensor(records: &[&SampleRecord]) -> Tensor {
    let m = records.len();
    let mut data = Vec::with_capacity(m * COORD_DIM);
    for r in records {
        data.extend_from_slice(&normalized_coords(&r.pose2d));
    }
    Tensor::new(vec![m, COORD_DIM], data)
}

fn gt_attrs(records: &[&SampleRecord]) -> Result<Vec<AttributeVector>, ModelError> {
    records
        .iter()
        .map(|r| {
            r.attributes.ok_or_else(|| {
                ModelError::Config(format!("record {:?} has no attribute labels", r.id))
            })
        })
        .collect()
}

/// Root-relative mm targets, [m, 48] in group order.
fn gt_groups_tensor(records: &[&SampleRecord]) -> Result<Tensor, ModelError> {
    let m = records.len();
    let mut data = Vec::with_capacity(m * GROUPS_DIM);
    for r in records {
        let p = r
            .pose3d
            .as_ref()
            .ok_or_else(|| ModelError::Config(format!("record {:?} has no pose3d", r.id)))?;
        data.extend_from_slice(&groups_flat(&root_relative(p)));
    }
    Ok(Tensor::new(vec![m, GROUPS_DIM], data))
}

/// Evidence rows from stored 2D poses and ground-truth attribute one-hots.
fn oracle_evidence_tensor(
    records: &[&SampleRecord],
    use_attributes: bool,
) -> Result<Tensor, ModelError> {
    let m = records.len();
    if !use_attributes {
        return Ok(coords_tensor(records));
    }
    let dim = COORD_DIM + super::evidence::ATTR_PROB_DIM;
    let mut data = Vec::with_capacity(m * dim);
    for r in records {
        let attrs = r.attributes.ok_or_else(|| {
            ModelError::Config(format!("record {:?} has no attribute labels", r.id))
        })?;
        let ev = encode_evidence(&r.pose2d, &one_hot_attrs(&attrs))
            .map_err(|e| ModelError::Config(e.to_string()))?;
        data.extend_from_slice(&ev.values);
    }
    Ok(Tensor::new(vec![m, dim], data))
}

fn argmax2(row: &[f64]) -> usize {
    if row[1] > row[0] {
        1
    } else {
        0
    }
}

/// Stage 1: train the attribute and domain heads on mixed batches.
/// The attribute loss sees only the 3D-labeled half; the domain loss sees
/// both halves through the configured gradient gate.
pub fn train_multitask(
    head: &mut MultiTaskHead,
    ds_3d: &Dataset,
    ds_2d: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<MultitaskEpoch>, ModelError> {
    cfg.validate()?;
    let batcher = MixedBatcher::new(ds_3d, ds_2d, cfg.batch_size, cfg.seed)
        .map_err(|e| ModelError::Config(e.to_string()))?;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut attr_sum = 0.0;
        let mut dom_sum = 0.0;
        let mut dom_hits = 0usize;
        let mut dom_total = 0usize;
        let batches = batcher.epoch(epoch);
        let n_batches = batches.len().max(1);
        for batch in &batches {
            let recs_a: Vec<&SampleRecord> = batch.a.iter().map(|&i| &ds_3d.records[i]).collect();
            let recs_b: Vec<&SampleRecord> = batch.b.iter().map(|&i| &ds_2d.records[i]).collect();
            let labels_a = gt_attrs(&recs_a)?;

            let mut tape = Tape::new();
            let leaves = tape.bind_params(&head.params);
            let xa = tape.constant(coords_tensor(&recs_a));
            let xb = tape.constant(coords_tensor(&recs_b));
            let feat_a = head.forward_features(&mut tape, &leaves, xa)?;
            let feat_b = head.forward_features(&mut tape, &leaves, xb)?;

            let logits_a = head.attr_logits(&mut tape, &leaves, feat_a)?;
            let l_attr = loss_attr(&mut tape, logits_a, &labels_a)?;

            let feats = tape.concat(0, &[feat_a, feat_b])?;
            let dom_logits = head.domain_logits(&mut tape, &leaves, feats, cfg.grl)?;
            let mut targets = vec![0usize; recs_a.len()];
            targets.extend(std::iter::repeat(1).take(recs_b.len()));
            let l_dom = loss_domain(&mut tape, dom_logits, &targets)?;

            let total = tape.add(l_attr, l_dom)?;
            let grads = tape.backward(total)?;

            attr_sum += tape.tensor(l_attr)?.scalar_value();
            dom_sum += tape.tensor(l_dom)?.scalar_value();
            let dl = tape.tensor(dom_logits)?;
            for (i, &t) in targets.iter().enumerate() {
                if argmax2(&dl.data()[i * 2..i * 2 + 2]) == t {
                    dom_hits += 1;
                }
            }
            dom_total += targets.len();

            head.params
                .rmsprop_step(&grads, cfg.lr, cfg.rmsprop_alpha, cfg.rmsprop_eps)?;
        }
        history.push(MultitaskEpoch {
            epoch,
            attr_loss: attr_sum / n_batches as f64,
            domain_loss: dom_sum / n_batches as f64,
            domain_accuracy: dom_hits as f64 / dom_total.max(1) as f64,
        });
    }
    Ok(history)
}

/// Attribute probabilities of the head for a batch of 2D poses.
pub fn head_attr_probs(
    head: &MultiTaskHead,
    poses: &[&Pose2D],
) -> Result<Vec<[[f64; 3]; 9]>, ModelError> {
    if poses.is_empty() {
        return Ok(Vec::new());
    }
    let m = poses.len();
    let mut data = Vec::with_capacity(m * COORD_DIM);
    for p in poses {
        data.extend_from_slice(&normalized_coords(p));
    }
    let mut tape = Tape::new();
    let leaves = tape.bind_params(&head.params);
    let x = tape.constant(Tensor::new(vec![m, COORD_DIM], data));
    let feat = head.forward_features(&mut tape, &leaves, x)?;
    let logits = head.attr_logits(&mut tape, &leaves, feat)?;
    let probs = head.attr_probs(&mut tape, logits)?;
    let pt = tape.tensor(probs)?;
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let mut rec = [[0.0; 3]; 9];
        for j in 0..9 {
            for c in 0..3 {
                rec[j][c] = pt.data()[i * 27 + j * 3 + c];
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Hard labels from head probabilities (argmax per joint).
pub fn probs_to_labels(probs: &[[f64; 3]; 9]) -> AttributeVector {
    let mut labels = [Attribute::OnPlane; 9];
    for (j, triple) in probs.iter().enumerate() {
        let mut best = 0;
        for c in 1..3 {
            if triple[c] > triple[best] {
                best = c;
            }
        }
        labels[j] = Attribute::from_class_index(best).unwrap();
    }
    AttributeVector::new(labels)
}

/// Domain-classifier accuracy of the head on held-out samples
/// (domain 0 = first slice, domain 1 = second).
pub fn head_domain_accuracy(
    head: &MultiTaskHead,
    domain0: &[&Pose2D],
    domain1: &[&Pose2D],
) -> Result<f64, ModelError> {
    let m = domain0.len() + domain1.len();
    if m == 0 {
        return Ok(0.0);
    }
    let mut data = Vec::with_capacity(m * COORD_DIM);
    for p in domain0.iter().chain(domain1.iter()) {
        data.extend_from_slice(&normalized_coords(p));
    }
    let mut tape = Tape::new();
    let leaves = tape.bind_params(&head.params);
    let x = tape.constant(Tensor::new(vec![m, COORD_DIM], data));
    let feat = head.forward_features(&mut tape, &leaves, x)?;
    let logits = head.domain_logits(&mut tape, &leaves, feat, GrlMode::Stop)?;
    let lt = tape.tensor(logits)?;
    let mut hits = 0usize;
    for i in 0..m {
        let want = usize::from(i >= domain0.len());
        if argmax2(&lt.data()[i * 2..i * 2 + 2]) == want {
            hits += 1;
        }
    }
    Ok(hits as f64 / m as f64)
}

/// Deterministic shuffled full batches over one dataset.
fn epoch_batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9e3779b97f4a7c15));
    idx.shuffle(&mut rng);
    idx.chunks(batch_size)
        .filter(|c| c.len() == batch_size)
        .map(|c| c.to_vec())
        .collect()
}

/// Stage 2: train the 3D regressor on stored 2D poses and ground-truth
/// attribute one-hots.
pub fn train_pose_stage2(
    net: &mut PoseNet,
    ds: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<PoseEpoch>, ModelError> {
    cfg.validate()?;
    if ds.len() < cfg.batch_size {
        return Err(ModelError::Config(format!(
            "batch_size {} exceeds dataset size {}",
            cfg.batch_size,
            ds.len()
        )));
    }
    let use_attrs = net.cfg().use_attributes;
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let batches = epoch_batches(ds.len(), cfg.batch_size, cfg.seed, epoch);
        let mut loss_sum = 0.0;
        let n_batches = batches.len().max(1);
        for batch in &batches {
            let recs: Vec<&SampleRecord> = batch.iter().map(|&i| &ds.records[i]).collect();
            let x_data = oracle_evidence_tensor(&recs, use_attrs)?;
            let gt = gt_groups_tensor(&recs)?;

            let mut tape = Tape::new();
            let leaves = tape.bind_params(net.params());
            let x = tape.constant(x_data);
            let gt_v = tape.constant(gt);
            let loss = forward_loss_3d(net, &mut tape, &leaves, x, gt_v)?;
            let grads = tape.backward(loss)?;
            loss_sum += tape.tensor(loss)?.scalar_value();
            net.params_mut()
                .rmsprop_step(&grads, cfg.lr, cfg.rmsprop_alpha, cfg.rmsprop_eps)?;
        }
        history.push(PoseEpoch {
            epoch,
            loss_3d: loss_sum / n_batches as f64,
            attr_loss: 0.0,
            domain_loss: 0.0,
            domain_accuracy: 0.0,
        });
    }
    Ok(history)
}

fn forward_loss_3d(
    net: &PoseNet,
    tape: &mut Tape,
    leaves: &[Value],
    x: Value,
    gt: Value,
) -> Result<Value, ModelError> {
    match net {
        PoseNet::Progressive(n) => {
            let b1 = n.forward_block1(tape, leaves, x)?;
            let b2 = n.forward_block2(tape, leaves, x, &b1)?;
            loss_3d(tape, &b1.mm, &b2, gt)
        }
        PoseNet::Baseline(n) => {
            let b = n.forward(tape, leaves, x)?;
            loss_3d_single(tape, &b, gt)
        }
    }
}

/// Stage 3: connect head and regressor and fine-tune jointly with
/// total = L3D + lambda_attr * Lattr + lambda_domain * Ldomain.
/// The head's soft attribute probabilities feed the evidence, so 3D
/// supervision reaches the head.
pub fn train_finetune(
    net: &mut PoseNet,
    head: &mut MultiTaskHead,
    ds_3d: &Dataset,
    ds_2d: &Dataset,
    cfg: &TrainConfig,
) -> Result<Vec<PoseEpoch>, ModelError> {
    cfg.validate()?;
    let batcher = MixedBatcher::new(ds_3d, ds_2d, cfg.batch_size, cfg.seed)
        .map_err(|e| ModelError::Config(e.to_string()))?;

    // single merged parameter set so one backward pass covers both models
    let mut merged = Params::new();
    for i in 0..head.params.len() {
        merged.register(&format!("head.{}", head.params.name(i)), head.params.value(i).clone())?;
    }
    let head_len = head.params.len();
    for i in 0..net.params().len() {
        merged.register(
            &format!("net.{}", net.params().name(i)),
            net.params().value(i).clone(),
        )?;
    }
    let head_arch = head.offset(0);
    let net_arch = net.offset(head_len);
    let use_attrs = net.cfg().use_attributes;

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut sums = (0.0, 0.0, 0.0);
        let mut dom_hits = 0usize;
        let mut dom_total = 0usize;
        let batches = batcher.epoch(epoch);
        let n_batches = batches.len().max(1);
        for batch in &batches {
            let recs_a: Vec<&SampleRecord> = batch.a.iter().map(|&i| &ds_3d.records[i]).collect();
            let recs_b: Vec<&SampleRecord> = batch.b.iter().map(|&i| &ds_2d.records[i]).collect();
            let labels_a = gt_attrs(&recs_a)?;

            let mut tape = Tape::new();
            let leaves = tape.bind_params(&merged);
            let xa = tape.constant(coords_tensor(&recs_a));
            let xb = tape.constant(coords_tensor(&recs_b));
            let feat_a = head_arch.forward_features(&mut tape, &leaves, xa)?;
            let feat_b = head_arch.forward_features(&mut tape, &leaves, xb)?;

            let logits_a = head_arch.attr_logits(&mut tape, &leaves, feat_a)?;
            let l_attr = loss_attr(&mut tape, logits_a, &labels_a)?;

            let feats = tape.concat(0, &[feat_a, feat_b])?;
            let dom_logits = head_arch.domain_logits(&mut tape, &leaves, feats, cfg.grl)?;
            let mut targets = vec![0usize; recs_a.len()];
            targets.extend(std::iter::repeat(1).take(recs_b.len()));
            let l_dom = loss_domain(&mut tape, dom_logits, &targets)?;

            // predicted soft attributes feed the regressor's evidence
            let evidence = if use_attrs {
                let probs_a = head_arch.attr_probs(&mut tape, logits_a)?;
                tape.concat(1, &[xa, probs_a])?
            } else {
                xa
            };
            let gt = tape.constant(gt_groups_tensor(&recs_a)?);
            let l3d = forward_loss_3d_arch(&net_arch, &mut tape, &leaves, evidence, gt)?;

            let wa = tape.mul_scalar(l_attr, cfg.lambda_attr)?;
            let wd = tape.mul_scalar(l_dom, cfg.lambda_domain)?;
            let t1 = tape.add(l3d, wa)?;
            let total = tape.add(t1, wd)?;
            let grads = tape.backward(total)?;

            sums.0 += tape.tensor(l3d)?.scalar_value();
            sums.1 += tape.tensor(l_attr)?.scalar_value();
            sums.2 += tape.tensor(l_dom)?.scalar_value();
            let dl = tape.tensor(dom_logits)?;
            for (i, &t) in targets.iter().enumerate() {
                if argmax2(&dl.data()[i * 2..i * 2 + 2]) == t {
                    dom_hits += 1;
                }
            }
            dom_total += targets.len();

            merged.rmsprop_step(&grads, cfg.lr, cfg.rmsprop_alpha, cfg.rmsprop_eps)?;
        }
        history.push(PoseEpoch {
            epoch,
            loss_3d: sums.0 / n_batches as f64,
            attr_loss: sums.1 / n_batches as f64,
            domain_loss: sums.2 / n_batches as f64,
            domain_accuracy: dom_hits as f64 / dom_total.max(1) as f64,
        });
    }

    // write merged values back into the owning models
    for i in 0..head_len {
        let v = merged.value(i).clone();
        *head.params.value_mut(i) = v;
    }
    for i in 0..net.params().len() {
        let v = merged.value(head_len + i).clone();
        *net.params_mut().value_mut(i) = v;
    }
    Ok(history)
}

fn forward_loss_3d_arch(
    net_arch: &PoseNet,
    tape: &mut Tape,
    leaves: &[Value],
    x: Value,
    gt: Value,
) -> Result<Value, ModelError> {
    match net_arch {
        PoseNet::Progressive(n) => {
            let b1 = n.forward_block1(tape, leaves, x)?;
            let b2 = n.forward_block2(tape, leaves, x, &b1)?;
            loss_3d(tape, &b1.mm, &b2, gt)
        }
        PoseNet::Baseline(n) => {
            let b = n.forward(tape, leaves, x)?;
            loss_3d_single(tape, &b, gt)
        }
    }
}

/// Where inference takes its attribute probabilities from.
pub enum AttrSource<'a> {
    /// Predicted by the multi-task head.
    Head(&'a MultiTaskHead),
    /// Ground-truth one-hot labels.
    Oracle(&'a AttributeVector),
    /// The regressor runs on coordinates alone.
    None,
}

/// End-to-end inference for one 2D pose: attribute probabilities (when a
/// source provides them), evidence encoding, both regression blocks, and
/// the final assembly. Root-relative millimeters.
pub fn predict(
    net: &PoseNet,
    attrs: AttrSource,
    p2d: &Pose2D,
) -> Result<(Pose3D, Option<[[f64; 3]; 9]>), ModelError> {
    let probs = match attrs {
        AttrSource::Head(head) => Some(head_attr_probs(head, &[p2d])?.remove(0)),
        AttrSource::Oracle(av) => Some(one_hot_attrs(av)),
        AttrSource::None => None,
    };
    let use_attrs = net.cfg().use_attributes;
    let x_row: Vec<f64> = if use_attrs {
        let pr = probs.as_ref().ok_or_else(|| {
            ModelError::Config("this regressor needs attribute probabilities".into())
        })?;
        encode_evidence(p2d, pr)
            .map_err(|e| ModelError::Config(e.to_string()))?
            .values
            .to_vec()
    } else {
        normalized_coords(p2d).to_vec()
    };

    let mut tape = Tape::new();
    let leaves = tape.bind_params(net.params());
    let x = tape.constant(Tensor::new(vec![1, x_row.len()], x_row));
    let out = net.forward_final(&mut tape, &leaves, x)?;
    let pose = groups_to_pose(&tape, &out, 0)?;
    Ok((pose, probs))
}

/// Batched inference over prebuilt evidence rows; one pose per row.
pub fn predict_rows(net: &PoseNet, rows: &Tensor) -> Result<Vec<Pose3D>, ModelError> {
    let m = rows.shape()[0];
    let mut tape = Tape::new();
    let leaves = tape.bind_params(net.params());
    let x = tape.constant(rows.clone());
    let out = net.forward_final(&mut tape, &leaves, x)?;
    (0..m).map(|i| groups_to_pose(&tape, &out, i)).collect()
}

/// Evidence rows for a whole record list under one attribute source.
pub fn evidence_rows(
    net: &PoseNet,
    records: &[&SampleRecord],
    attrs_from_head: Option<&MultiTaskHead>,
) -> Result<Tensor, ModelError> {
    let use_attrs = net.cfg().use_attributes;
    if !use_attrs {
        return Ok(coords_tensor(records));
    }
    match attrs_from_head {
        Some(head) => {
            let poses: Vec<&Pose2D> = records.iter().map(|r| &r.pose2d).collect();
            let probs = head_attr_probs(head, &poses)?;
            let dim = COORD_DIM + super::evidence::ATTR_PROB_DIM;
            let mut data = Vec::with_capacity(records.len() * dim);
            for (r, pr) in records.iter().zip(&probs) {
                let ev = encode_evidence(&r.pose2d, pr)
                    .map_err(|e| ModelError::Config(e.to_string()))?;
                data.extend_from_slice(&ev.values);
            }
            Ok(Tensor::new(vec![records.len(), dim], data))
        }
        None => oracle_evidence_tensor(records, true),
    }
}

fn groups_to_pose(tape: &Tape, out: &GroupValues, row: usize) -> Result<Pose3D, ModelError> {
    let t = tape.tensor(out.torso)?;
    let p = tape.tensor(out.proximal)?;
    let d = tape.tensor(out.distal)?;
    Ok(assemble_pose(
        &t.data()[row * TORSO_DIM..(row + 1) * TORSO_DIM],
        &p.data()[row * PROXIMAL_DIM..(row + 1) * PROXIMAL_DIM],
        &d.data()[row * DISTAL_DIM..(row + 1) * DISTAL_DIM],
    ))
}

//! `train`: the three-step procedure. Stage 1 fits the multi-task head on
//! mixed batches, stage 2 fits the 3D regressor on stored 2D poses and
//! ground-truth attributes, stage 3 connects them and fine-tunes jointly.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use poselift::autodiff::{load_checkpoint, save_checkpoint};
use poselift::model::{
    train_finetune, train_multitask, train_pose_stage2, BaselineNet, GrlMode, MultiTaskHead,
    MultitaskEpoch, NetConfig, PoseEpoch, PoseNet, ProgressiveNet, TrainConfig,
};
use poselift::skeleton::{load_dataset, Dataset};

use crate::config::{write_resolved, ModelKind, TrainRunConfig};

pub const HISTORY_HEADER: &str = "epoch,loss_3d,attr_loss,domain_loss,domain_accuracy";

pub fn run(cfg: TrainRunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_resolved(
        &cfg,
        &cfg.out,
        &format!("train_config_stage{}.json", cfg.stage),
    )?;

    let tc = TrainConfig {
        epochs: cfg.stage_epochs(),
        lr: cfg.stage_lr(),
        batch_size: cfg.stage_batch_size(),
        seed: cfg.seed,
        grl: if cfg.lambda_grl > 0.0 {
            GrlMode::Reversal(cfg.lambda_grl)
        } else {
            GrlMode::Stop
        },
        lambda_attr: cfg.lambda_attr,
        lambda_domain: cfg.lambda_domain,
        ..TrainConfig::default()
    };

    match cfg.stage {
        1 => stage1(&cfg, &tc),
        2 => stage2(&cfg, &tc),
        3 => stage3(&cfg, &tc),
        other => bail!("config: stage must be 1, 2, or 3, got {other}"),
    }
}

fn load_3d(cfg: &TrainRunConfig) -> Result<Dataset> {
    let path = cfg.resolve_data("train.jsonl", &cfg.train_3d)?;
    load_dataset(&path).with_context(|| format!("loading {}", path.display()))
}

fn load_2d(cfg: &TrainRunConfig) -> Result<Dataset> {
    let path = cfg.resolve_data("train_2d.jsonl", &cfg.train_2d)?;
    load_dataset(&path).with_context(|| format!("loading {}", path.display()))
}

fn head_ckpt_path(out: &Path) -> PathBuf {
    out.join("stage1_head.ckpt")
}

fn net_ckpt_path(out: &Path, stage: u32) -> PathBuf {
    out.join(format!("stage{stage}_net.ckpt"))
}

fn stage1(cfg: &TrainRunConfig, tc: &TrainConfig) -> Result<()> {
    let ds3 = load_3d(cfg)?;
    let ds2 = load_2d(cfg)?;
    let mut head = MultiTaskHead::new(cfg.head_width, cfg.seed)?;
    let history = train_multitask(&mut head, &ds3, &ds2, tc)?;
    write_multitask_history(&cfg.out.join("stage1_history.csv"), &history)?;
    let path = head_ckpt_path(&cfg.out);
    save_checkpoint(&path, &head.checkpoint_header(), &head.params)?;
    let last = history.last().expect("at least one epoch");
    println!(
        "stage 1 done: attr_loss {:.4}, domain_loss {:.4}, domain_acc {:.3}",
        last.attr_loss, last.domain_loss, last.domain_accuracy
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn build_net(cfg: &TrainRunConfig) -> Result<PoseNet> {
    let net_cfg = NetConfig {
        use_attributes: cfg.use_attributes,
        width: cfg.width,
        depth: cfg.depth,
    };
    Ok(match cfg.model_kind {
        ModelKind::Progressive => PoseNet::Progressive(ProgressiveNet::new(net_cfg, cfg.seed)?),
        ModelKind::Baseline => PoseNet::Baseline(BaselineNet::new(net_cfg, cfg.seed)?),
    })
}

fn stage2(cfg: &TrainRunConfig, tc: &TrainConfig) -> Result<()> {
    let head_ckpt = head_ckpt_path(&cfg.out);
    if !head_ckpt.exists() {
        bail!(
            "train: stage 2 requires the stage-1 checkpoint at {} (run --stage 1 first)",
            head_ckpt.display()
        );
    }
    let ds3 = load_3d(cfg)?;
    let mut net = build_net(cfg)?;
    let history = train_pose_stage2(&mut net, &ds3, tc)?;
    write_pose_history(&cfg.out.join("stage2_history.csv"), &history)?;
    let path = net_ckpt_path(&cfg.out, 2);
    save_checkpoint(&path, &net.checkpoint_header(), net.params())?;
    println!(
        "stage 2 done: loss_3d {:.3} mm",
        history.last().expect("epochs").loss_3d
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn stage3(cfg: &TrainRunConfig, tc: &TrainConfig) -> Result<()> {
    let head_ckpt = head_ckpt_path(&cfg.out);
    if !head_ckpt.exists() {
        bail!(
            "train: stage 3 requires the stage-1 checkpoint at {}",
            head_ckpt.display()
        );
    }
    let net_ckpt = net_ckpt_path(&cfg.out, 2);
    if !net_ckpt.exists() {
        bail!(
            "train: stage 3 requires the stage-2 checkpoint at {}",
            net_ckpt.display()
        );
    }
    let (hh, hp) = load_checkpoint(&head_ckpt)?;
    let mut head = MultiTaskHead::from_checkpoint(&hh, hp)?;
    let (nh, np) = load_checkpoint(&net_ckpt)?;
    let mut net = PoseNet::from_checkpoint(&nh, np)?;

    let ds3 = load_3d(cfg)?;
    let ds2 = load_2d(cfg)?;
    let history = train_finetune(&mut net, &mut head, &ds3, &ds2, tc)?;
    write_pose_history(&cfg.out.join("stage3_history.csv"), &history)?;
    let net_path = net_ckpt_path(&cfg.out, 3);
    save_checkpoint(&net_path, &net.checkpoint_header(), net.params())?;
    let head_path = cfg.out.join("stage3_head.ckpt");
    save_checkpoint(&head_path, &head.checkpoint_header(), &head.params)?;
    let last = history.last().expect("epochs");
    println!(
        "stage 3 done: loss_3d {:.3} mm, attr_loss {:.4}, domain_acc {:.3}",
        last.loss_3d, last.attr_loss, last.domain_accuracy
    );
    println!("wrote {}", net_path.display());
    println!("wrote {}", head_path.display());
    Ok(())
}

fn write_pose_history(path: &Path, history: &[PoseEpoch]) -> Result<()> {
    let mut csv = String::from(HISTORY_HEADER);
    csv.push('\n');
    for e in history {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            e.epoch, e.loss_3d, e.attr_loss, e.domain_loss, e.domain_accuracy
        ));
    }
    fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

fn write_multitask_history(path: &Path, history: &[MultitaskEpoch]) -> Result<()> {
    let mut csv = String::from(HISTORY_HEADER);
    csv.push('\n');
    for e in history {
        csv.push_str(&format!(
            "{},0,{},{},{}\n",
            e.epoch, e.attr_loss, e.domain_loss, e.domain_accuracy
        ));
    }
    fs::write(path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

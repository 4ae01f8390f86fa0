//! `eval`: accuracy report, PCK curve plot, and the optional three-model
//! ablation table.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

use poselift::autodiff::load_checkpoint;
use poselift::geometry::AttributeVector;
use poselift::metrics::{attribute_accuracy, pck_curve, pose_report, EvalReport};
use poselift::model::{
    evidence_rows, head_attr_probs, probs_to_labels, predict_rows, MultiTaskHead, PoseNet,
};
use poselift::skeleton::{load_dataset, Dataset, Pose2D, Pose3D, SampleRecord, ALL_JOINTS};

use crate::config::{eval_threads, write_resolved, AttrSourceKind, EvalRunConfig};
use crate::svg::pck_curve_svg;

const PREDICT_CHUNK: usize = 512;

pub fn run(cfg: EvalRunConfig) -> Result<()> {
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_resolved(&cfg, &cfg.out, "eval_config.json")?;

    let test_path = cfg
        .test
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config: eval needs a test dataset path"))?;
    let test = load_dataset(test_path)
        .with_context(|| format!("loading {}", test_path.display()))?;
    if test.records.iter().any(|r| r.pose3d.is_none()) {
        bail!("data: evaluation needs 3D ground truth on every record");
    }

    let head = match &cfg.head_checkpoint {
        Some(p) => {
            let (h, params) = load_checkpoint(p)?;
            Some(MultiTaskHead::from_checkpoint(&h, params)?)
        }
        None => None,
    };

    if let Some(ablation) = cfg.ablation.clone() {
        let mut rows = Vec::new();
        for (label, path) in [
            ("baseline", &ablation.baseline),
            ("progressive", &ablation.progressive),
            ("progressive_attr", &ablation.progressive_attr),
        ] {
            let net = load_net(path)?;
            let report = eval_net(&net, head.as_ref(), &test, &cfg)?;
            println!(
                "{label:<17} mpjpe_p1 {:.2} mm, p2 {:.2} mm",
                report.mpjpe_p1_mm, report.mpjpe_p2_mm
            );
            rows.push((label, report));
        }
        let mut csv = String::from("method");
        for &j in &ALL_JOINTS {
            csv.push_str(&format!(",{}", j.name()));
        }
        csv.push_str(",avg\n");
        for (label, report) in &rows {
            csv.push_str(label);
            for &j in &ALL_JOINTS {
                csv.push_str(&format!(",{}", report.per_joint_mpjpe_mm[j.index()]));
            }
            csv.push_str(&format!(",{}\n", report.mpjpe_p1_mm));
        }
        let path = cfg.out.join("ablation.csv");
        fs::write(&path, csv)?;
        println!("wrote {}", path.display());
        return Ok(());
    }

    let ckpt = cfg
        .checkpoint
        .as_ref()
        .ok_or_else(|| anyhow::anyhow!("config: eval needs a checkpoint path"))?;
    let net = load_net(ckpt)?;
    let report = eval_net(&net, head.as_ref(), &test, &cfg)?;

    fs::write(cfg.out.join("report.csv"), report.to_csv())?;
    fs::write(cfg.out.join("report.json"), report.to_json())?;

    let preds = predictions(&net, head.as_ref(), &test, &cfg)?;
    let gts: Vec<Pose3D> = test
        .records
        .iter()
        .map(|r| r.pose3d.clone().expect("checked"))
        .collect();
    let curve = pck_curve(&preds, &gts)?;
    fs::write(cfg.out.join("pck_curve.svg"), pck_curve_svg(&curve))?;

    println!(
        "mpjpe_p1 {:.2} mm | mpjpe_p2 {:.2} mm | pck@{:.0} {:.3} | auc {:.3} | samples {}",
        report.mpjpe_p1_mm,
        report.mpjpe_p2_mm,
        report.pck_threshold_mm,
        report.pck3d,
        report.auc,
        report.samples
    );
    if let Some(a) = report.attr_mean {
        println!("attr accuracy {:.3}", a);
    }
    println!("wrote {}", cfg.out.join("report.csv").display());
    println!("wrote {}", cfg.out.join("report.json").display());
    println!("wrote {}", cfg.out.join("pck_curve.svg").display());
    Ok(())
}

fn load_net(path: &Path) -> Result<PoseNet> {
    let (header, params) =
        load_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    Ok(PoseNet::from_checkpoint(&header, params)?)
}

fn predictions(
    net: &PoseNet,
    head: Option<&MultiTaskHead>,
    test: &Dataset,
    cfg: &EvalRunConfig,
) -> Result<Vec<Pose3D>> {
    let recs: Vec<&SampleRecord> = test.records.iter().collect();
    if net.cfg().use_attributes {
        match cfg.attr_source {
            AttrSourceKind::Predicted if head.is_none() => {
                bail!("config: attr_source=predicted needs a head checkpoint")
            }
            AttrSourceKind::None => {
                bail!("config: this regressor consumes attributes; use predicted or oracle")
            }
            _ => {}
        }
    }
    let mut preds = Vec::with_capacity(recs.len());
    for chunk in recs.chunks(PREDICT_CHUNK) {
        let rows = match cfg.attr_source {
            AttrSourceKind::Predicted => evidence_rows(net, chunk, head)?,
            _ => evidence_rows(net, chunk, None)?,
        };
        preds.extend(predict_rows(net, &rows)?);
    }
    Ok(preds)
}

fn eval_net(
    net: &PoseNet,
    head: Option<&MultiTaskHead>,
    test: &Dataset,
    cfg: &EvalRunConfig,
) -> Result<EvalReport> {
    let preds = predictions(net, head, test, cfg)?;
    let gts: Vec<Pose3D> = test
        .records
        .iter()
        .map(|r| r.pose3d.clone().expect("checked"))
        .collect();
    let mut report = pose_report(&preds, &gts, cfg.pck_threshold_mm, eval_threads())?;

    // attribute accuracy of the head, when measurable
    if let Some(head) = head {
        let gt_attrs: Vec<AttributeVector> =
            test.records.iter().filter_map(|r| r.attributes).collect();
        if gt_attrs.len() == test.records.len() {
            let poses: Vec<&Pose2D> = test.records.iter().map(|r| &r.pose2d).collect();
            let probs = head_attr_probs(head, &poses)?;
            let pred_labels: Vec<AttributeVector> =
                probs.iter().map(probs_to_labels).collect();
            let (per_joint, mean) = attribute_accuracy(&pred_labels, &gt_attrs)?;
            report.attr_per_joint = Some(per_joint);
            report.attr_mean = Some(mean);
        }
    }
    Ok(report)
}

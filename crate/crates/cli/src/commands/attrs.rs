//! `attrs`: recompute front/on-plane/back labels for a 3D dataset and
//! report the per-joint class histogram.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use poselift::geometry::{compute_attributes_with, Attribute, Tau, ATTRIBUTE_JOINTS};
use poselift::skeleton::{load_dataset, save_dataset, Domain};

use crate::config::write_resolved;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttrsRunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
    pub tau: Tau,
}

#[derive(Serialize)]
struct SkippedRecord {
    id: String,
    error: String,
}

pub fn run(cfg: AttrsRunConfig) -> Result<()> {
    let mut ds = load_dataset(&cfg.data)
        .with_context(|| format!("loading {}", cfg.data.display()))?;
    if ds.records.iter().any(|r| r.domain != Domain::Labeled3D) {
        bail!("data: attribute labeling needs a 3D-labeled dataset");
    }

    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_resolved(&cfg, &cfg.out, "attrs_config.json")?;

    let mut skipped = Vec::new();
    let mut kept = Vec::with_capacity(ds.records.len());
    let mut histogram = [[0usize; 3]; 9];
    let mut tau_sum = 0.0;
    for mut rec in ds.records.into_iter() {
        let pose = rec.pose3d.as_ref().expect("validated 3d");
        match compute_attributes_with(pose, cfg.tau) {
            Ok(attrs) => {
                for (j, l) in attrs.labels.iter().enumerate() {
                    histogram[j][l.class_index()] += 1;
                }
                tau_sum += cfg.tau.resolve(pose).expect("resolved above");
                rec.attributes = Some(attrs);
                kept.push(rec);
            }
            Err(e) => skipped.push(SkippedRecord {
                id: rec.id.clone(),
                error: e.to_string(),
            }),
        }
    }

    let labeled = kept.len();
    ds.records = kept;
    // header tau: exact in absolute mode, mean resolved value otherwise
    ds.meta.tau_mm = match cfg.tau {
        Tau::AbsoluteMm(v) => v,
        Tau::Relative(_) => tau_sum / labeled.max(1) as f64,
    };
    let out_data = cfg.out.join("labeled.jsonl");
    save_dataset(&ds, &out_data)?;

    let mut csv = String::from("joint,front,on_plane,back\n");
    println!("{:<12} {:>8} {:>9} {:>8}", "joint", "front", "on-plane", "back");
    for (j, &joint) in ATTRIBUTE_JOINTS.iter().enumerate() {
        let h = histogram[j];
        println!(
            "{:<12} {:>8} {:>9} {:>8}",
            joint.name(),
            h[Attribute::Front.class_index()],
            h[Attribute::OnPlane.class_index()],
            h[Attribute::Back.class_index()]
        );
        csv.push_str(&format!(
            "{},{},{},{}\n",
            joint.name(),
            h[Attribute::Front.class_index()],
            h[Attribute::OnPlane.class_index()],
            h[Attribute::Back.class_index()]
        ));
    }
    fs::write(cfg.out.join("attr_histogram.csv"), csv)?;

    if !skipped.is_empty() {
        let report = cfg.out.join("attr_errors.json");
        fs::write(&report, serde_json::to_string_pretty(&skipped).unwrap())?;
        eprintln!(
            "poselift: warning: {} records skipped (degenerate torso plane); see {}",
            skipped.len(),
            report.display()
        );
    }
    println!(
        "wrote {} ({labeled} labeled, {} skipped)",
        out_data.display(),
        skipped.len()
    );
    Ok(())
}

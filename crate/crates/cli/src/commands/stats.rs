//! `stats`: per-joint positional standard deviation of a 3D dataset.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use poselift::skeleton::{joint_std, load_dataset, JointGroup, ALL_JOINTS};

use crate::config::write_resolved;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatsRunConfig {
    pub data: PathBuf,
    pub out: PathBuf,
}

pub fn run(cfg: StatsRunConfig) -> Result<()> {
    let ds = load_dataset(&cfg.data)
        .with_context(|| format!("loading {}", cfg.data.display()))?;
    let report = joint_std(&ds)?;

    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_resolved(&cfg, &cfg.out, "stats_config.json")?;

    let mut csv = String::from("joint,group,std_mm\n");
    println!("{:<12} {:<9} {:>10}", "joint", "group", "std (mm)");
    for &j in &ALL_JOINTS {
        let g = poselift::skeleton::group_of(j);
        let v = report.per_joint_mm[j.index()];
        println!("{:<12} {:<9} {:>10.2}", j.name(), format!("{g:?}"), v);
        csv.push_str(&format!("{},{:?},{}\n", j.name(), g, v));
    }
    for (label, val) in [
        ("mean", report.mean_mm),
        ("mean_torso", report.group_mean(JointGroup::Torso)),
        ("mean_proximal", report.group_mean(JointGroup::Proximal)),
        ("mean_distal", report.group_mean(JointGroup::Distal)),
    ] {
        println!("{label:<22} {val:>10.2}");
        csv.push_str(&format!("{label},,{val}\n"));
    }

    let path = cfg.out.join("joint_std.csv");
    fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

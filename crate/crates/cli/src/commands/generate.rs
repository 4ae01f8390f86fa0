//! `generate`: synthesize train/val/test splits plus the 2D-domain
//! companion set and a manifest.

use std::fs;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use poselift::skeleton::{save_dataset, synth_generate, Dataset, DatasetMeta};

use crate::config::{write_resolved, GenerateRunConfig};

#[derive(Serialize)]
struct ManifestFile {
    path: String,
    records: usize,
    domain: &'static str,
    seed: u64,
}

#[derive(Serialize)]
struct Manifest {
    seed: u64,
    tau_mm: f64,
    files: Vec<ManifestFile>,
}

pub fn run(cfg: GenerateRunConfig) -> Result<()> {
    let s = &cfg.split;
    for (name, v) in [("train", s.train), ("val", s.val), ("test", s.test)] {
        if !(0.0..=1.0).contains(&v) {
            bail!("config: split fraction {name} = {v} outside [0, 1]");
        }
    }
    if s.train + s.val + s.test > 1.0 + 1e-12 {
        bail!(
            "config: split fractions sum to {} > 1",
            s.train + s.val + s.test
        );
    }
    fs::create_dir_all(&cfg.out)
        .with_context(|| format!("cannot create {}", cfg.out.display()))?;
    write_resolved(&cfg, &cfg.out, "generate_config.json")?;

    let mut gen_cfg = cfg.generator.clone();
    gen_cfg.n = cfg.n;
    gen_cfg.labeled2d = false;
    let pool = synth_generate(&gen_cfg, cfg.seed)?;

    let n_val = (cfg.n as f64 * s.val).floor() as usize;
    let n_test = (cfg.n as f64 * s.test).floor() as usize;
    let n_train = cfg.n - n_val - n_test;

    let mut files = Vec::new();
    let mut offset = 0usize;
    for (name, count) in [("train", n_train), ("val", n_val), ("test", n_test)] {
        let mut ds = Dataset::new(DatasetMeta {
            name: format!("{}-{name}", pool.meta.name),
            seed: cfg.seed,
            tau_mm: pool.meta.tau_mm,
        });
        ds.records = pool.records[offset..offset + count].to_vec();
        offset += count;
        let path = cfg.out.join(format!("{name}.jsonl"));
        save_dataset(&ds, &path)?;
        files.push(ManifestFile {
            path: format!("{name}.jsonl"),
            records: count,
            domain: "3d",
            seed: cfg.seed,
        });
        println!("wrote {} ({count} records)", path.display());
    }

    if cfg.domain_b.enabled {
        let mut b_cfg = cfg.generator.clone();
        b_cfg.n = cfg.domain_b.n;
        b_cfg.labeled2d = true;
        b_cfg.name = format!("{}-2d", cfg.generator.name);
        b_cfg.scale_range = cfg.domain_b.scale_range;
        b_cfg.placement.depth_range = cfg.domain_b.depth_range;
        let seed_b = cfg.seed.wrapping_add(1);
        let ds_b = synth_generate(&b_cfg, seed_b)?;
        let path = cfg.out.join("train_2d.jsonl");
        save_dataset(&ds_b, &path)?;
        files.push(ManifestFile {
            path: "train_2d.jsonl".into(),
            records: ds_b.len(),
            domain: "2d",
            seed: seed_b,
        });
        println!("wrote {} ({} records)", path.display(), ds_b.len());
    }

    let manifest = Manifest {
        seed: cfg.seed,
        tau_mm: cfg.generator.tau_mm,
        files,
    };
    let mpath = cfg.out.join("manifest.json");
    fs::write(&mpath, serde_json::to_string_pretty(&manifest).unwrap())
        .with_context(|| format!("cannot write {}", mpath.display()))?;
    println!("wrote {}", mpath.display());
    Ok(())
}

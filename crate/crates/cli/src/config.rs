//! Run configuration: defaults, then the JSON config file, then command
//! line overrides. The fully resolved config is written beside every
//! command's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use poselift::geometry::Tau;
use poselift::skeleton::GeneratorConfig;

pub fn load_config_file<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("config: cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("config: bad JSON in {}", path.display()))
}

/// Write the resolved config next to the command outputs so every run is
/// reproducible from its artifacts alone.
pub fn write_resolved<T: Serialize>(cfg: &T, out_dir: &Path, name: &str) -> Result<()> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output dir {}", out_dir.display()))?;
    let path = out_dir.join(name);
    let text = serde_json::to_string_pretty(cfg).expect("config json");
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// The 2D-domain companion dataset: same skeleton, shifted subject scale
/// and camera distance, so the two domains are separable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DomainBConfig {
    pub enabled: bool,
    pub n: usize,
    pub scale_range: (f64, f64),
    pub depth_range: (f64, f64),
}

impl Default for DomainBConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            n: 5000,
            scale_range: (1.15, 1.35),
            depth_range: (2200.0, 3200.0),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerateRunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub n: usize,
    pub split: SplitConfig,
    pub generator: GeneratorConfig,
    pub domain_b: DomainBConfig,
}

impl Default for GenerateRunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("runs/data"),
            n: 6250,
            split: SplitConfig::default(),
            generator: GeneratorConfig::default(),
            domain_b: DomainBConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Progressive,
    Baseline,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainRunConfig {
    pub stage: u32,
    pub seed: u64,
    pub out: PathBuf,
    /// Dataset paths; `data_dir` fills unset ones with the generate
    /// command's file names.
    pub data_dir: Option<PathBuf>,
    pub train_3d: Option<PathBuf>,
    pub train_2d: Option<PathBuf>,
    pub model_kind: ModelKind,
    pub use_attributes: bool,
    /// Per-stage defaults apply when unset: epochs 60/60/40,
    /// lr 5e-4/2.5e-4/1e-4, batch_size 12/64/64.
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub batch_size: Option<usize>,
    pub lambda_grl: f64,
    /// Zero disables the reversal (the domain loss stops at the
    /// classifier).
    pub lambda_attr: f64,
    pub lambda_domain: f64,
    pub width: usize,
    pub depth: usize,
    pub head_width: usize,
    pub tau_mode: Tau,
    pub beta_softargmax: f64,
}

impl Default for TrainRunConfig {
    fn default() -> Self {
        Self {
            stage: 1,
            seed: 7,
            out: PathBuf::from("runs/train"),
            data_dir: None,
            train_3d: None,
            train_2d: None,
            model_kind: ModelKind::Progressive,
            use_attributes: true,
            epochs: None,
            lr: None,
            batch_size: None,
            lambda_grl: 1.0,
            lambda_attr: 1.0,
            lambda_domain: 0.1,
            width: 256,
            depth: 2,
            head_width: 128,
            tau_mode: Tau::Relative(0.1),
            beta_softargmax: 1.0,
        }
    }
}

impl TrainRunConfig {
    pub fn stage_epochs(&self) -> usize {
        self.epochs.unwrap_or(match self.stage {
            1 | 2 => 60,
            _ => 40,
        })
    }

    pub fn stage_lr(&self) -> f64 {
        self.lr.unwrap_or(match self.stage {
            1 => 5e-4,
            2 => 2.5e-4,
            _ => 1e-4,
        })
    }

    pub fn stage_batch_size(&self) -> usize {
        self.batch_size.unwrap_or(match self.stage {
            1 => 12,
            _ => 64,
        })
    }

    pub fn resolve_data(&self, name: &str, explicit: &Option<PathBuf>) -> Result<PathBuf> {
        if let Some(p) = explicit {
            return Ok(p.clone());
        }
        if let Some(dir) = &self.data_dir {
            return Ok(dir.join(name));
        }
        anyhow::bail!("config: no path for {name}; set data_dir or the explicit path")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttrSourceKind {
    Predicted,
    Oracle,
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalRunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub checkpoint: Option<PathBuf>,
    pub head_checkpoint: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub attr_source: AttrSourceKind,
    pub pck_threshold_mm: f64,
    /// Three-way comparison table from three checkpoints.
    pub ablation: Option<AblationConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationConfig {
    pub baseline: PathBuf,
    pub progressive: PathBuf,
    pub progressive_attr: PathBuf,
}

impl Default for EvalRunConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            out: PathBuf::from("runs/eval"),
            checkpoint: None,
            head_checkpoint: None,
            test: None,
            attr_source: AttrSourceKind::Predicted,
            pck_threshold_mm: 150.0,
            ablation: None,
        }
    }
}

/// POSELIFT_THREADS caps evaluation parallelism; defaults to 4.
pub fn eval_threads() -> usize {
    std::env::var("POSELIFT_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(4)
}

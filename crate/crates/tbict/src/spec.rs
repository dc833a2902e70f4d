//! Experiment configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tbict_core::consensus::DifficultyLevel;
use tbict_core::signal::LocalizationSetup;
use tbict_core::simulation::SimConfig;

use crate::error::{Error, Result};

/// Window sizes the mining benchmark accepts.
pub const BENCH_WINDOWS: [u8; 6] = [0, 20, 40, 60, 80, 100];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Easy blocks mined before any cell so that every window has history.
    pub base_blocks: u32,
    pub txs_per_block: usize,
    /// Trial cap per block; `None` searches until a nonce is found.
    pub max_trials: Option<u64>,
    /// Nonce-search threads; 0 uses the available parallelism.
    pub workers: usize,
    /// Windows tried by the hash-window attack experiment.
    pub attack_windows: Vec<u8>,
    pub attack_chain_len: usize,
    /// Repetitions per attack window; 0 skips the experiment.
    pub attack_reps: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            base_blocks: 100,
            txs_per_block: 4,
            max_trials: Some(1 << 24),
            workers: 0,
            attack_windows: vec![1, 4, 14],
            attack_chain_len: 30,
            attack_reps: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocEvalConfig {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    /// Adds a row without receiver noise.
    pub noiseless: bool,
    pub setup: LocalizationSetup,
    /// Writes every trial's angle image to `images.bin`.
    pub export_images: bool,
}

impl Default for LocEvalConfig {
    fn default() -> Self {
        LocEvalConfig {
            snr_db: vec![10.0, 12.0, 14.0, 16.0, 18.0, 20.0],
            trials: 100,
            noiseless: true,
            setup: LocalizationSetup::default(),
            export_images: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub sim: SimConfig,
    pub whash_values: Vec<u8>,
    pub levels: Vec<DifficultyLevel>,
    pub output_dir: PathBuf,
    pub bench: BenchConfig,
    pub localization: LocEvalConfig,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "default".into(),
            sim: SimConfig::default(),
            whash_values: BENCH_WINDOWS.to_vec(),
            levels: DifficultyLevel::ALL.to_vec(),
            output_dir: PathBuf::from("out"),
            bench: BenchConfig::default(),
            localization: LocEvalConfig::default(),
        }
    }
}

/// Command-line values that replace fields of a loaded spec.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub blocks: Option<u32>,
    pub whash: Option<Vec<u8>>,
    pub radius: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.sim.seed = seed;
        }
        if let Some(blocks) = o.blocks {
            self.sim.n_blocks = blocks;
        }
        if let Some(whash) = &o.whash {
            self.whash_values = whash.clone();
        }
        if let Some(radius) = o.radius {
            self.sim.infection_radius = radius;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.whash_values.is_empty() {
            return Err(Error::Config("whash_values must not be empty".into()));
        }
        if let Some(w) = self.whash_values.iter().find(|w| !BENCH_WINDOWS.contains(w)) {
            return Err(Error::Config(format!("whash value {w} is not one of {BENCH_WINDOWS:?}")));
        }
        if self.levels.is_empty() {
            return Err(Error::Config("levels must not be empty".into()));
        }
        if self.output_dir.as_os_str().is_empty() {
            return Err(Error::Config("output_dir must not be empty".into()));
        }
        if u64::from(self.bench.base_blocks) + 1 < u64::from(tbict_core::ledger::MAX_WHASH_WINDOW) {
            return Err(Error::Config("bench.base_blocks must be at least 99".into()));
        }
        if let Some(&w) = self.bench.attack_windows.iter().find(|&&w| usize::from(w) > self.bench.attack_chain_len) {
            return Err(Error::Config(format!(
                "attack window {w} needs more history than a {}-block chain",
                self.bench.attack_chain_len
            )));
        }
        if self.bench.max_trials == Some(0) {
            return Err(Error::Config("bench.max_trials must be positive".into()));
        }
        if self.localization.trials < 30 {
            return Err(Error::Config(format!(
                "localization.trials must be at least 30, got {}",
                self.localization.trials
            )));
        }
        if self.localization.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config("localization.snr_db entries must be finite".into()));
        }
        self.sim.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Creates the output directory and checks that it accepts files.
    pub fn prepare_output(&self) -> Result<&Path> {
        let dir = self.output_dir.as_path();
        fs::create_dir_all(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
        let probe = dir.join(".write-probe");
        fs::write(&probe, b"").map_err(|e| Error::Config(format!("{} is not writable: {e}", dir.display())))?;
        fs::remove_file(&probe).map_err(|e| Error::io(&probe, e))?;
        Ok(dir)
    }
}

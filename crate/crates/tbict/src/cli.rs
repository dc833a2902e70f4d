//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use tbict_core::consensus::verify_chain;

use crate::bench::{run_mining_benchmark, window_attack_experiment, BenchOutput, WindowAttackRow};
use crate::ct::run_ct_experiment;
use crate::error::{Error, Result};
use crate::io::{self, OutputDir, RegistryFile};
use crate::loc::{run_localization_eval, LocOutput};
use crate::spec::{ExperimentSpec, Overrides};

#[derive(Debug, Parser)]
#[command(name = "tbict", version, about = "Contact-tracing ledger experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mining time per W-Hash window and difficulty level.
    MineBench {
        #[command(flatten)]
        spec: SpecArgs,
        /// Nonce-search threads (0 = all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Trial cap per block.
        #[arg(long)]
        max_trials: Option<u64>,
    },
    /// Venue simulation with credits, ledger and tracing.
    CtRun {
        #[command(flatten)]
        spec: SpecArgs,
        /// Simulated ticks.
        #[arg(long)]
        ticks: Option<u64>,
    },
    /// Localization error versus SNR.
    LocEval {
        #[command(flatten)]
        spec: SpecArgs,
        /// Comma-separated SNR values in dB.
        #[arg(long, value_delimiter = ',')]
        snr: Option<Vec<f64>>,
        /// Monte Carlo trials per SNR.
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Revalidates a persisted chain.jsonl end to end.
    VerifyChain {
        chain: PathBuf,
        /// registry.json whose manager signature should also be checked.
        #[arg(long)]
        registry: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// JSON experiment spec; defaults apply to missing fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Blocks per benchmark cell, or the simulation's block budget.
    #[arg(long)]
    pub blocks: Option<u32>,
    /// Comma-separated W-Hash windows.
    #[arg(long, value_delimiter = ',')]
    pub whash: Option<Vec<u8>>,
    /// Infection radius in metres.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SpecArgs {
    pub fn resolve(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        spec.apply(&Overrides {
            seed: self.seed,
            blocks: self.blocks,
            whash: self.whash.clone(),
            radius: self.radius,
            out: self.out.clone(),
        });
        Ok(spec)
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 3 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::MineBench { spec, workers, max_trials } => {
            let mut spec = spec.resolve()?;
            if let Some(w) = workers {
                spec.bench.workers = w;
            }
            if max_trials.is_some() {
                spec.bench.max_trials = max_trials;
            }
            let (bench, attack) = mine_bench(&spec)?;
            for (c, t) in bench.summary.iter().zip(&bench.timing_summary) {
                println!(
                    "whash={:<3} {}  blocks={:<4} truncated={:<3} mean_trials={:<10.1} median_trials={:<8} mean_s={:.6}",
                    c.whash, c.level, c.blocks, c.truncated, c.mean, c.median, t.mean
                );
            }
            for r in &attack {
                println!(
                    "attack n_wh={:<3} measured_ratio={:.3} model_ratio={:.1}",
                    r.n_wh,
                    r.measured_ratio(),
                    r.model_ratio()
                );
            }
            Ok(())
        }
        Command::CtRun { spec, ticks } => {
            let mut spec = spec.resolve()?;
            if let Some(t) = ticks {
                spec.sim.ticks = t;
            }
            let output = run_ct_experiment(&spec)?;
            let summary = std::fs::read_to_string(spec.output_dir.join("summary.json"))
                .map_err(|e| Error::io(spec.output_dir.join("summary.json"), e))?;
            print!("{summary}");
            eprintln!("wrote {} blocks to {}", output.chain.len(), spec.output_dir.display());
            Ok(())
        }
        Command::LocEval { spec, snr, trials } => {
            let mut spec = spec.resolve()?;
            if let Some(snr) = snr {
                spec.localization.snr_db = snr;
            }
            if let Some(t) = trials {
                spec.localization.trials = t;
            }
            for r in &loc_eval(&spec)?.summary {
                let snr = r.snr_db.map_or("noiseless".to_string(), |s| format!("{s} dB"));
                println!(
                    "{snr:>10}: azimuth error {:.3} deg, position rmse {:.3} m, dropped {}",
                    r.mean_abs_azimuth_error_deg, r.position_rmse_m, r.dropped
                );
            }
            Ok(())
        }
        Command::VerifyChain { chain, registry } => verify(&chain, registry.as_deref()),
    }
}

/// Runs `body`, leaving a `.partial` marker in the output directory if it
/// fails.
fn with_output<T>(spec: &ExperimentSpec, body: impl FnOnce(&mut OutputDir) -> Result<T>) -> Result<T> {
    spec.validate()?;
    let mut out = OutputDir::open(spec.prepare_output()?)?;
    let result = io::write_json(&out.track("spec.json"), spec).and_then(|()| body(&mut out));
    if let Err(e) = &result {
        out.mark_partial(e)?;
    }
    result
}

/// Runs the mining benchmark and the window attack experiment and writes
/// their tables.
pub fn mine_bench(spec: &ExperimentSpec) -> Result<(BenchOutput, Vec<WindowAttackRow>)> {
    with_output(spec, |out| {
        let bench = run_mining_benchmark(spec)?;
        io::write_csv(&out.track("mining.csv"), &bench.rows)?;
        io::write_csv(&out.track("mining_summary.csv"), &bench.summary)?;
        io::write_csv(&out.track("mining_timing.csv"), &bench.timings)?;
        io::write_csv(&out.track("mining_timing_summary.csv"), &bench.timing_summary)?;
        let cfg = &spec.bench;
        let mut attack = Vec::new();
        if cfg.attack_reps > 0 && !cfg.attack_windows.is_empty() {
            attack =
                window_attack_experiment(&cfg.attack_windows, cfg.attack_chain_len, cfg.attack_reps, spec.sim.seed)?;
            io::write_csv(&out.track("window_attack.csv"), &attack)?;
        }
        Ok((bench, attack))
    })
}

/// Runs the localization evaluation and writes its tables and images.
pub fn loc_eval(spec: &ExperimentSpec) -> Result<LocOutput> {
    with_output(spec, |out| {
        let result = run_localization_eval(spec)?;
        io::write_csv(&out.track("loc_eval.csv"), &result.summary)?;
        io::write_csv(&out.track("loc_trials.csv"), &result.trials)?;
        if spec.localization.export_images {
            out.track("images.bin");
            out.track("manifest.json");
            io::write_images(out.dir(), &result.images)?;
        }
        Ok(result)
    })
}

pub fn verify(chain: &Path, registry: Option<&Path>) -> Result<()> {
    let blocks = io::read_chain(chain)?;
    if blocks.is_empty() {
        return Err(Error::Validation(format!("{} holds no blocks", chain.display())));
    }
    let report = verify_chain(&blocks);
    for issue in &report.issues {
        eprintln!("block {}: {}", issue.index, issue.rejection);
    }
    if !report.is_valid() {
        return Err(Error::Validation(format!(
            "{} of {} blocks rejected",
            report.issues.iter().map(|i| i.index).collect::<std::collections::BTreeSet<_>>().len(),
            report.blocks_checked
        )));
    }
    if let Some(path) = registry {
        let file: RegistryFile = io::read_json(path)?;
        file.verify()?;
    }
    println!("ok: {} blocks verified", report.blocks_checked);
    Ok(())
}

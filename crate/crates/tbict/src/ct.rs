//! Contact-tracing simulation runs and their artifacts.

use serde::{Deserialize, Serialize};
use tbict_core::consensus::{verify_chain, DifficultyLevel};
use tbict_core::identity::NodeId;
use tbict_core::simulation::{
    check_trace_consistency, interaction_stats, CreditRow, InteractionStats, SimOutput, Simulation,
};

use crate::error::{Error, Result};
use crate::io::{self, OutputDir, RegistryFile};
use crate::spec::ExperimentSpec;

/// Row of `credits.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreditCsvRow {
    pub tick: u64,
    pub agent: usize,
    pub node_id: NodeId,
    pub prox_credit: f64,
    pub neg_credit: f64,
    pub total: f64,
    pub level: DifficultyLevel,
}

impl From<&CreditRow> for CreditCsvRow {
    fn from(r: &CreditRow) -> Self {
        CreditCsvRow {
            tick: r.tick,
            agent: r.agent,
            node_id: r.node_id,
            prox_credit: r.prox_credit,
            neg_credit: r.neg_credit,
            total: r.total_credit,
            level: r.level,
        }
    }
}

/// `summary.json` of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtSummary {
    pub name: String,
    pub seed: u64,
    pub ticks: u64,
    pub chain_length: usize,
    pub transactions: usize,
    pub infected_2m: usize,
    pub infected_5m: usize,
    pub diagnosed: usize,
    pub security_events: usize,
    pub interactions: Option<InteractionStats>,
}

pub const CT_FILES: [&str; 9] = [
    "spec.json",
    "metrics.csv",
    "credits.csv",
    "contacts.jsonl",
    "events.jsonl",
    "chain.jsonl",
    "iup.json",
    "registry.json",
    "summary.json",
];

/// Runs the simulation in `spec` and writes its artifacts.
///
/// If a tick fails, everything recorded up to that tick is still written and
/// the directory gets a `.partial` marker.
pub fn run_ct_experiment(spec: &ExperimentSpec) -> Result<SimOutput> {
    spec.validate()?;
    let dir = spec.prepare_output()?;
    let mut out = OutputDir::open(dir)?;
    io::write_json(&out.track("spec.json"), spec)?;

    let mut sim = Simulation::new(spec.sim.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let mut failure = None;
    for _ in 0..spec.sim.ticks {
        if let Err(e) = sim.run_epoch() {
            failure = Some(Error::Simulation(e));
            break;
        }
    }
    let output = sim.finish();
    let written = write_artifacts(spec, &output, &mut out);
    let failure = match (failure, written) {
        (Some(e), _) | (None, Err(e)) => Some(e),
        (None, Ok(())) => check_output(&output).err(),
    };
    match failure {
        Some(e) => {
            out.mark_partial(&e)?;
            Err(e)
        }
        None => Ok(output),
    }
}

fn write_artifacts(spec: &ExperimentSpec, output: &SimOutput, out: &mut OutputDir) -> Result<()> {
    io::write_csv(&out.track("metrics.csv"), &output.metrics)?;
    let credits: Vec<CreditCsvRow> = output.credits.iter().map(CreditCsvRow::from).collect();
    io::write_csv(&out.track("credits.csv"), &credits)?;
    io::write_jsonl(&out.track("contacts.jsonl"), &output.contacts)?;
    io::write_jsonl(&out.track("events.jsonl"), &output.events)?;
    io::write_chain(&out.track("chain.jsonl"), output.chain.blocks())?;
    io::write_iup(&out.track("iup.json"), &output.iup)?;
    let registry = RegistryFile { manager: output.manager.clone(), registry: output.registry.clone() };
    io::write_json(&out.track("registry.json"), &registry)?;
    io::write_json(&out.track("summary.json"), &summarize(spec, output))?;
    Ok(())
}

fn summarize(spec: &ExperimentSpec, output: &SimOutput) -> CtSummary {
    let last = output.metrics.last();
    CtSummary {
        name: spec.name.clone(),
        seed: spec.sim.seed,
        ticks: last.map_or(0, |m| m.tick + 1),
        chain_length: output.chain.len(),
        transactions: output.chain.blocks().iter().map(|b| b.transactions.len()).sum(),
        infected_2m: last.map_or(0, |m| m.infected_count_2m),
        infected_5m: last.map_or(0, |m| m.infected_count_5m),
        diagnosed: output.contacts.iter().filter(|a| a.accepted).count(),
        security_events: output.events.len(),
        interactions: interaction_stats(&output.interactions).ok(),
    }
}

/// Checks the finished chain and that every trace on it matches the world's
/// contact log.
pub fn check_output(output: &SimOutput) -> Result<()> {
    let report = verify_chain(output.chain.blocks());
    if let Some(issue) = report.issues.first() {
        return Err(Error::Validation(format!("chain block {}: {}", issue.index, issue.rejection)));
    }
    let policy = &output.config.policy;
    let mismatches = check_trace_consistency(
        output.chain.blocks(),
        &output.contacts,
        policy.immediate_threshold,
        output.config.retention_ticks(),
    );
    if let Some(m) = mismatches.first() {
        return Err(Error::Validation(format!("{} trace mismatches, first: {m:?}", mismatches.len())));
    }
    Ok(())
}

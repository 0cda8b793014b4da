//! Scenario files, seeded batch runs, on-disk artifacts and their summaries.
//!
//! A run directory holds CSV data plus JSON metadata; `manifest.json` is
//! written last and echoes the scenario with its model inlined, so a
//! manifest is itself a runnable scenario source.
//!
//! CSV schema (version [`SCHEMA_VERSION`]):
//!
//! | file | columns |
//! |------|---------|
//! | `beliefs.csv` | `trial,t,agent,state,belief,log_belief` |
//! | `signals.csv` | `trial,t,agent,signal` |
//! | `choices.csv` | `trial,t,agent,neighbor` (random-neighbor mode, `t ≥ 1`) |
//! | `global_stats.csv` | `trial,t,false_state,Phi,Lambda` |
//! | `actions.csv` | `trial,t,agent,action` |
//! | `near_ties.csv` | `trial,t,agent,argument` |
//! | `kernel.csv` | `src,dst_0,…` (at most 8 agents) |
//!
//! `state` and `false_state` hold state labels. Floats use the shortest
//! representation that parses back to the same value.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::belief::{
    default_window, detect_learning, learning_rates, pooled_rate, simulate_beliefs, BeliefMode, BeliefTrajectory,
    LearningVerdict, NeighborChoice, RateReport, DEFAULT_THRESHOLD,
};
use crate::chain::{chain_report, kernel_csv, transition_kernel, KERNEL_CAP};
use crate::error::{Error, Result};
use crate::exec::{Execution, RunConfig};
use crate::format::{load_model, ModelFile};
use crate::ising::{ising_constants, simulate_actions, ActionTrajectory};
use crate::model::ModelSpec;
use crate::scenarios::{example1_model, ising_consensus_model, theorem1_model};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOLKIT_VERSION: &str = env!("CARGO_PKG_VERSION");
const KERNEL_CSV_MAX_AGENTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    Actions,
    BeliefsFull,
    BeliefsCircle,
    BeliefsRandomNeighbor,
    BeliefsBayes,
}

impl Dynamics {
    pub fn belief_mode(self) -> Option<BeliefMode> {
        match self {
            Dynamics::Actions => None,
            Dynamics::BeliefsFull => Some(BeliefMode::Full),
            Dynamics::BeliefsCircle => Some(BeliefMode::Circle),
            Dynamics::BeliefsRandomNeighbor => Some(BeliefMode::RandomNeighbor),
            Dynamics::BeliefsBayes => Some(BeliefMode::Bayes),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    Trajectories,
    GlobalStats,
    Rates,
    ChainAnalysis,
}

fn default_outputs() -> Vec<Output> {
    vec![Output::Trajectories, Output::GlobalStats, Output::Rates]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Inline model; exactly one of `model` and `model_file` is required.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFile>,
    /// Path to a model file, relative to the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_file: Option<PathBuf>,
    pub dynamics: Dynamics,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Output>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neighbor_choice: Option<NeighborChoice>,
}

impl Scenario {
    /// Reads a scenario file and inlines its model. Also accepts a manifest,
    /// whose `scenario` field is used.
    pub fn load(path: &Path) -> Result<Scenario> {
        let ctx = |e: Error| e.context(path.display().to_string());
        let text = std::fs::read_to_string(path).map_err(|e| ctx(e.into()))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ctx(e.into()))?;
        let value = match value.get("scenario") {
            Some(inner) if value.get("schema_version").is_some() => inner.clone(),
            _ => value,
        };
        let mut scenario: Scenario = serde_json::from_value(value).map_err(|e| ctx(e.into()))?;
        if let Some(file) = scenario.model_file.take() {
            if scenario.model.is_some() {
                return Err(ctx(Error::Precondition("scenario gives both model and model_file".into())));
            }
            let base = path.parent().unwrap_or(Path::new("."));
            let model = load_model(&base.join(&file)).map_err(ctx)?;
            scenario.model = Some(ModelFile::from_model(&model));
        }
        Ok(scenario)
    }

    pub fn model(&self) -> Result<ModelSpec> {
        match (&self.model, &self.model_file) {
            (Some(m), None) => m.clone().into_model(),
            (None, Some(path)) => load_model(path),
            (Some(_), Some(_)) => Err(Error::Precondition("scenario gives both model and model_file".into())),
            (None, None) => Err(Error::Precondition("scenario has no model".into())),
        }
    }

    pub fn config(&self, execution: Execution) -> RunConfig {
        RunConfig {
            horizon: self.horizon,
            trials: self.trials,
            seed: self.seed,
            execution,
        }
    }
}

pub const BUILTINS: [&str; 3] = ["example1", "theorem1-demo", "ising-consensus-demo"];

pub fn builtin(name: &str) -> Option<Scenario> {
    let (model, dynamics, horizon, trials, outputs) = match name {
        "example1" => (example1_model(), Dynamics::BeliefsCircle, 2000, 20, default_outputs()),
        "theorem1-demo" => (theorem1_model(), Dynamics::BeliefsFull, 60, 50, default_outputs()),
        "ising-consensus-demo" => (
            ising_consensus_model(),
            Dynamics::Actions,
            200,
            100,
            vec![Output::Trajectories, Output::Rates, Output::ChainAnalysis],
        ),
        _ => return None,
    };
    Some(Scenario {
        name: name.to_string(),
        model: Some(ModelFile::from_model(&model)),
        model_file: None,
        dynamics,
        horizon,
        trials,
        seed: 0,
        outputs,
        neighbor_choice: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub file: String,
    /// Data rows (excluding the header) for CSV files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub toolkit_version: String,
    pub scenario: Scenario,
    pub states: Vec<String>,
    pub truth: String,
    pub agents: usize,
    /// `[from, to]`, `from` an in-neighbor of `to`.
    pub edges: Vec<[usize; 2]>,
    pub artifacts: Vec<ArtifactEntry>,
    #[serde(default)]
    pub notes: Vec<String>,
    pub execution: Execution,
    pub started_unix_ms: u128,
    pub wall_clock_seconds: f64,
}

struct CsvSink<W: Write> {
    writer: csv::Writer<W>,
    rows: usize,
}

impl<W: Write> CsvSink<W> {
    fn new(out: W, header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(header)?;
        Ok(CsvSink { writer, rows: 0 })
    }

    fn row(&mut self, fields: &[&str]) -> Result<()> {
        self.writer.write_record(fields)?;
        self.rows += 1;
        Ok(())
    }

    fn finish(mut self) -> Result<usize> {
        self.writer.flush()?;
        Ok(self.rows)
    }
}

fn create(dir: &Path, file: &str) -> Result<BufWriter<File>> {
    let path = dir.join(file);
    let handle = File::create(&path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(BufWriter::new(handle))
}

fn csv_file(dir: &Path, file: &str, emit: impl FnOnce(BufWriter<File>) -> Result<usize>) -> Result<ArtifactEntry> {
    let rows = emit(create(dir, file)?)?;
    Ok(ArtifactEntry {
        file: file.to_string(),
        rows: Some(rows),
    })
}

fn write_json<T: Serialize>(dir: &Path, file: &str, value: &T) -> Result<ArtifactEntry> {
    let path = dir.join(file);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(ArtifactEntry {
        file: file.to_string(),
        rows: None,
    })
}

fn write_text(dir: &Path, file: &str, text: &str) -> Result<ArtifactEntry> {
    let path = dir.join(file);
    std::fs::write(&path, text).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    Ok(ArtifactEntry {
        file: file.to_string(),
        rows: None,
    })
}

fn num(x: f64) -> String {
    x.to_string()
}

/// `trial,t,agent,state,belief,log_belief`; returns the row count.
pub fn write_beliefs_csv<W: Write>(out: W, model: &ModelSpec, trials: &[BeliefTrajectory]) -> Result<usize> {
    let mut sink = CsvSink::new(out, &["trial", "t", "agent", "state", "belief", "log_belief"])?;
    for (k, traj) in trials.iter().enumerate() {
        let trial = k.to_string();
        for t in 0..traj.steps() {
            let ts = t.to_string();
            for i in 0..traj.agents {
                let agent = i.to_string();
                let b = traj.belief(t, i);
                let probs = b.probabilities();
                for (state, label) in model.states.labels.iter().enumerate() {
                    sink.row(&[&trial, &ts, &agent, label, &num(probs[state]), &num(b.log()[state])])?;
                }
            }
        }
    }
    sink.finish()
}

fn write_signals_csv<W: Write>(out: W, trials: &[BeliefTrajectory]) -> Result<usize> {
    let mut sink = CsvSink::new(out, &["trial", "t", "agent", "signal"])?;
    for (k, traj) in trials.iter().enumerate() {
        for (idx, s) in traj.signals.iter().enumerate() {
            let (t, i) = (idx / traj.agents, idx % traj.agents);
            sink.row(&[&k.to_string(), &t.to_string(), &i.to_string(), &s.to_string()])?;
        }
    }
    sink.finish()
}

fn write_choices_csv<W: Write>(out: W, trials: &[BeliefTrajectory]) -> Result<usize> {
    let mut sink = CsvSink::new(out, &["trial", "t", "agent", "neighbor"])?;
    for (k, traj) in trials.iter().enumerate() {
        for (idx, j) in traj.choices.iter().flatten().enumerate() {
            let (t, i) = (idx / traj.agents + 1, idx % traj.agents);
            sink.row(&[&k.to_string(), &t.to_string(), &i.to_string(), &j.to_string()])?;
        }
    }
    sink.finish()
}

/// `trial,t,false_state,Phi,Lambda`; returns the row count.
pub fn write_global_stats_csv<W: Write>(out: W, model: &ModelSpec, trials: &[BeliefTrajectory]) -> Result<usize> {
    let mut sink = CsvSink::new(out, &["trial", "t", "false_state", "Phi", "Lambda"])?;
    for (k, traj) in trials.iter().enumerate() {
        for (t, g) in traj.global.iter().flatten().enumerate() {
            for (idx, &f) in g.false_states.iter().enumerate() {
                sink.row(&[
                    &k.to_string(),
                    &t.to_string(),
                    &model.states.labels[f],
                    &num(g.phi[idx]),
                    &num(g.lambda[idx]),
                ])?;
            }
        }
    }
    sink.finish()
}

/// `trial,t,agent,action`; returns the row count.
pub fn write_actions_csv<W: Write>(out: W, trials: &[ActionTrajectory]) -> Result<usize> {
    let mut sink = CsvSink::new(out, &["trial", "t", "agent", "action"])?;
    for (k, traj) in trials.iter().enumerate() {
        let trial = k.to_string();
        for t in 0..traj.steps() {
            let ts = t.to_string();
            for (i, a) in traj.profile(t).iter().enumerate() {
                sink.row(&[&trial, &ts, &i.to_string(), &a.to_string()])?;
            }
        }
    }
    sink.finish()
}

fn write_near_ties_csv<W: Write>(out: W, trials: &[ActionTrajectory]) -> Result<usize> {
    let mut sink = CsvSink::new(out, &["trial", "t", "agent", "argument"])?;
    for (k, traj) in trials.iter().enumerate() {
        for tie in &traj.near_ties {
            sink.row(&[&k.to_string(), &tie.t.to_string(), &tie.agent.to_string(), &num(tie.argument)])?;
        }
    }
    sink.finish()
}

/// `beliefs.csv`, `signals.csv` and, for random-neighbor runs, `choices.csv`.
pub fn write_belief_trajectories(dir: &Path, model: &ModelSpec, trials: &[BeliefTrajectory]) -> Result<Vec<ArtifactEntry>> {
    let mut out = vec![
        csv_file(dir, "beliefs.csv", |w| write_beliefs_csv(w, model, trials))?,
        csv_file(dir, "signals.csv", |w| write_signals_csv(w, trials))?,
    ];
    if trials.first().is_some_and(|t| t.choices.is_some()) {
        out.push(csv_file(dir, "choices.csv", |w| write_choices_csv(w, trials))?);
    }
    Ok(out)
}

pub fn write_global_stats(dir: &Path, model: &ModelSpec, trials: &[BeliefTrajectory]) -> Result<ArtifactEntry> {
    csv_file(dir, "global_stats.csv", |w| write_global_stats_csv(w, model, trials))
}

/// `actions.csv` and `near_ties.csv`.
pub fn write_action_trajectories(dir: &Path, trials: &[ActionTrajectory]) -> Result<Vec<ArtifactEntry>> {
    Ok(vec![
        csv_file(dir, "actions.csv", |w| write_actions_csv(w, trials))?,
        csv_file(dir, "near_ties.csv", |w| write_near_ties_csv(w, trials))?,
    ])
}

#[derive(Serialize)]
struct SpectralArtifact<'a> {
    rho: f64,
    alpha: &'a [f64],
    /// Prior bias per false state.
    beta: Vec<(String, f64)>,
}

/// Executes a scenario and writes its artifacts into `out`.
pub fn run(scenario: &Scenario, out: &Path, execution: Execution) -> Result<Manifest> {
    let started = Instant::now();
    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let model = scenario.model()?;
    let config = scenario.config(execution);
    std::fs::create_dir_all(out).map_err(|e| Error::from(e).context(out.display().to_string()))?;
    let wants = |o: Output| scenario.outputs.contains(&o);
    let mut artifacts = Vec::new();
    let mut notes = Vec::new();

    match scenario.dynamics.belief_mode() {
        Some(mode) => {
            let sim = simulate_beliefs(&model, mode, scenario.neighbor_choice.as_ref(), &config)?;
            if wants(Output::Trajectories) {
                artifacts.extend(write_belief_trajectories(out, &model, &sim.trials)?);
            }
            if wants(Output::GlobalStats) {
                match &sim.spectral {
                    Some(sp) => {
                        artifacts.push(write_global_stats(out, &model, &sim.trials)?);
                        let beta = model
                            .false_states()
                            .into_iter()
                            .map(|f| {
                                let b = sp
                                    .alpha
                                    .iter()
                                    .enumerate()
                                    .map(|(i, a)| a * (model.prior(i)[f] / model.prior(i)[model.truth]).ln())
                                    .sum();
                                (model.states.labels[f].clone(), b)
                            })
                            .collect();
                        artifacts.push(write_json(
                            out,
                            "spectral.json",
                            &SpectralArtifact {
                                rho: sp.rho,
                                alpha: &sp.alpha,
                                beta,
                            },
                        )?);
                    }
                    None => notes.push("global-stats skipped: network is not strongly connected".into()),
                }
            }
        }
        None => {
            let constants = ising_constants(&model)?;
            let trials = simulate_actions(&model, &constants, &config)?;
            if wants(Output::Trajectories) {
                artifacts.extend(write_action_trajectories(out, &trials)?);
            }
            if wants(Output::GlobalStats) {
                notes.push("global-stats not defined for action dynamics".into());
            }
        }
    }
    if wants(Output::Rates) {
        artifacts.push(write_json(out, "rates.json", &learning_rates(&model, scenario.neighbor_choice.as_ref())?)?);
    }
    if wants(Output::ChainAnalysis) {
        let constants = ising_constants(&model)?;
        artifacts.push(write_json(out, "constants.json", &constants)?);
        artifacts.push(write_json(out, "chain_analysis.json", &chain_report(&model, &constants)?)?);
        if model.agents() <= KERNEL_CSV_MAX_AGENTS {
            artifacts.push(write_text(out, "kernel.csv", &kernel_csv(&transition_kernel(&model, &constants)?))?);
        }
    }

    let mut echoed = scenario.clone();
    echoed.model = Some(ModelFile::from_model(&model));
    echoed.model_file = None;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        toolkit_version: TOOLKIT_VERSION.to_string(),
        scenario: echoed,
        states: model.states.labels.clone(),
        truth: model.states.labels[model.truth].clone(),
        agents: model.agents(),
        edges: model.network.edges().into_iter().map(|(j, i)| [j, i]).collect(),
        artifacts,
        notes,
        execution,
        started_unix_ms,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(out, "manifest.json", &manifest)?;
    Ok(manifest)
}

/// [`run`] on a scenario file, with the file path attached to any error.
pub fn run_file(path: &Path, out: &Path, execution: Execution) -> Result<Manifest> {
    let scenario = Scenario::load(path)?;
    run(&scenario, out, execution).map_err(|e| e.context(path.display().to_string()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentSummary {
    pub agent: usize,
    pub learning_frequency: f64,
    pub pooled_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RootCircleSummary {
    pub agents: Vec<usize>,
    pub pooled_rate: Option<f64>,
    pub predicted_rate: f64,
    pub relative_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BeliefSummary {
    pub threshold: f64,
    pub window: usize,
    pub agents: Vec<AgentSummary>,
    /// Fraction of trials in which every agent learns.
    pub all_learning_frequency: f64,
    pub per_trial: Vec<Vec<LearningVerdict>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_circle: Option<RootCircleSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub final_profile: Vec<i8>,
    /// Whether the final profile is absorbing; absent beyond the kernel cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorbing: Option<bool>,
    /// First step from which the trial sits in its final absorbing profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorbed_at: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActionSummary {
    pub outcomes: Vec<TrialOutcome>,
    pub plus_consensus_frequency: f64,
    pub minus_consensus_frequency: f64,
    /// Consensus on the action that matches the true state.
    pub truth_consensus_frequency: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub absorbed_frequency: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub dynamics: Dynamics,
    pub trials: usize,
    pub horizon: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beliefs: Option<BeliefSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actions: Option<ActionSummary>,
}

fn malformed(path: &Path, reason: impl Into<String>) -> Error {
    Error::MalformedArtifact {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

fn read_rows(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| malformed(path, e.to_string()))?;
    let found = reader.headers().map_err(|e| malformed(path, e.to_string()))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(malformed(path, format!("header {:?}, expected {:?}", found, header)));
    }
    reader
        .records()
        .map(|r| r.map_err(|e| malformed(path, e.to_string())))
        .collect()
}

fn field<T: std::str::FromStr>(path: &Path, row: &csv::StringRecord, k: usize, line: usize) -> Result<T> {
    row.get(k)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| malformed(path, format!("row {line}: bad field {k}")))
}

pub fn read_belief_trajectories(path: &Path, model: &ModelSpec, trials: usize, horizon: usize) -> Result<Vec<BeliefTrajectory>> {
    let rows = read_rows(path, &["trial", "t", "agent", "state", "belief", "log_belief"])?;
    let (n, m, steps) = (model.agents(), model.state_count(), horizon + 1);
    let per_trial = steps * n * m;
    if rows.len() != trials * per_trial {
        return Err(malformed(path, format!("{} rows, expected {}", rows.len(), trials * per_trial)));
    }
    let mut out: Vec<BeliefTrajectory> = (0..trials)
        .map(|_| BeliefTrajectory {
            agents: n,
            states: m,
            log_beliefs: vec![f64::NAN; per_trial],
            signals: Vec::new(),
            choices: None,
            global: None,
        })
        .collect();
    for (line, row) in rows.iter().enumerate() {
        let trial: usize = field(path, row, 0, line)?;
        let t: usize = field(path, row, 1, line)?;
        let agent: usize = field(path, row, 2, line)?;
        let state = row
            .get(3)
            .and_then(|l| model.states.index_of(l))
            .ok_or_else(|| malformed(path, format!("row {line}: unknown state")))?;
        let log: f64 = field(path, row, 5, line)?;
        if trial >= trials || t >= steps || agent >= n {
            return Err(malformed(path, format!("row {line}: index out of range")));
        }
        out[trial].log_beliefs[(t * n + agent) * m + state] = log;
    }
    if out.iter().any(|t| t.log_beliefs.iter().any(|x| x.is_nan())) {
        return Err(malformed(path, "missing or duplicated rows"));
    }
    Ok(out)
}

pub fn read_action_trajectories(path: &Path, agents: usize, trials: usize, horizon: usize) -> Result<Vec<ActionTrajectory>> {
    let rows = read_rows(path, &["trial", "t", "agent", "action"])?;
    let steps = horizon + 1;
    if rows.len() != trials * steps * agents {
        return Err(malformed(path, format!("{} rows, expected {}", rows.len(), trials * steps * agents)));
    }
    let mut out: Vec<ActionTrajectory> = (0..trials)
        .map(|_| ActionTrajectory {
            agents,
            actions: vec![0; steps * agents],
            near_ties: Vec::new(),
        })
        .collect();
    for (line, row) in rows.iter().enumerate() {
        let trial: usize = field(path, row, 0, line)?;
        let t: usize = field(path, row, 1, line)?;
        let agent: usize = field(path, row, 2, line)?;
        let action: i8 = field(path, row, 3, line)?;
        if trial >= trials || t >= steps || agent >= agents || !(action == 1 || action == -1) {
            return Err(malformed(path, format!("row {line}: value out of range")));
        }
        out[trial].actions[t * agents + agent] = action;
    }
    if out.iter().any(|t| t.actions.contains(&0)) {
        return Err(malformed(path, "missing or duplicated rows"));
    }
    Ok(out)
}

pub fn summarize_beliefs(model: &ModelSpec, trials: &[BeliefTrajectory], threshold: f64, window: usize) -> Result<BeliefSummary> {
    let per_trial = trials
        .iter()
        .map(|t| detect_learning(t, model.truth, threshold, window))
        .collect::<Result<Vec<_>>>()?;
    let count = per_trial.len().max(1) as f64;
    let agents = (0..model.agents())
        .map(|i| AgentSummary {
            agent: i,
            learning_frequency: per_trial.iter().filter(|v| v[i].learning).count() as f64 / count,
            pooled_rate: pooled_rate(&per_trial, &[i]),
        })
        .collect();
    let all_learning_frequency = per_trial.iter().filter(|v| v.iter().all(|a| a.learning)).count() as f64 / count;
    let rates: RateReport = learning_rates(model, None)?;
    let root_circle = match (rates.root_circle, rates.root_circle_rate) {
        (Some(agents), Some(predicted)) => {
            let pooled = pooled_rate(&per_trial, &agents);
            Some(RootCircleSummary {
                relative_error: pooled
                    .filter(|_| predicted.rate > 0.0)
                    .map(|p| (p - predicted.rate).abs() / predicted.rate),
                agents,
                pooled_rate: pooled,
                predicted_rate: predicted.rate,
            })
        }
        _ => None,
    };
    Ok(BeliefSummary {
        threshold,
        window,
        agents,
        all_learning_frequency,
        per_trial,
        root_circle,
    })
}

pub fn summarize_actions(model: &ModelSpec, trials: &[ActionTrajectory]) -> Result<ActionSummary> {
    let absorbing = if model.agents() <= KERNEL_CAP {
        let constants = ising_constants(model)?;
        Some(transition_kernel(model, &constants)?.absorbing())
    } else {
        None
    };
    let truth_action: i8 = if model.truth == 0 { 1 } else { -1 };
    let outcomes: Vec<TrialOutcome> = trials
        .iter()
        .enumerate()
        .map(|(k, traj)| {
            let last = traj.steps() - 1;
            let final_mask = traj.mask(last);
            let is_absorbing = absorbing.as_ref().map(|a| a.contains(&final_mask));
            let absorbed_at = is_absorbing.filter(|x| *x).map(|_| {
                let mut t = last;
                while t > 0 && traj.mask(t - 1) == final_mask {
                    t -= 1;
                }
                t
            });
            TrialOutcome {
                trial: k,
                final_profile: traj.last().to_vec(),
                absorbing: is_absorbing,
                absorbed_at,
            }
        })
        .collect();
    let count = outcomes.len().max(1) as f64;
    let freq = |a: i8| outcomes.iter().filter(|o| o.final_profile.iter().all(|x| *x == a)).count() as f64 / count;
    let absorbed_frequency = absorbing
        .as_ref()
        .map(|_| outcomes.iter().filter(|o| o.absorbing == Some(true)).count() as f64 / count);
    Ok(ActionSummary {
        plus_consensus_frequency: freq(1),
        minus_consensus_frequency: freq(-1),
        truth_consensus_frequency: freq(truth_action),
        absorbed_frequency,
        outcomes,
    })
}

/// Reads a run directory and produces the summary. Depends only on the
/// directory's bytes.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let manifest_path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::from(e).context(manifest_path.display().to_string()))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| malformed(&manifest_path, e.to_string()))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(malformed(
            &manifest_path,
            format!("schema version {}, expected {SCHEMA_VERSION}", manifest.schema_version),
        ));
    }
    let scenario = &manifest.scenario;
    let model = scenario.model().map_err(|e| e.context(manifest_path.display().to_string()))?;
    let mut summary = Summary {
        scenario: scenario.name.clone(),
        dynamics: scenario.dynamics,
        trials: scenario.trials,
        horizon: scenario.horizon,
        beliefs: None,
        actions: None,
    };
    match scenario.dynamics {
        Dynamics::Actions => {
            let trials = read_action_trajectories(&dir.join("actions.csv"), model.agents(), scenario.trials, scenario.horizon)?;
            summary.actions = Some(summarize_actions(&model, &trials)?);
        }
        _ => {
            let trials = read_belief_trajectories(&dir.join("beliefs.csv"), &model, scenario.trials, scenario.horizon)?;
            let window = default_window(scenario.horizon + 1);
            summary.beliefs = Some(summarize_beliefs(&model, &trials, DEFAULT_THRESHOLD, window)?);
        }
    }
    Ok(summary)
}

/// Writes `value` as pretty JSON to `w`.
pub fn print_json<T: Serialize, W: Write>(w: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w)?;
    Ok(())
}

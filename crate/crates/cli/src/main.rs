use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bwr::belief::{learning_rates, simulate_beliefs, BeliefMode, NeighborChoice};
use bwr::chain::{chain_report, kernel_csv, transition_kernel};
use bwr::format::load_model;
use bwr::harness::{
    self, builtin, print_json, write_action_trajectories, write_actions_csv, write_belief_trajectories,
    write_beliefs_csv, write_global_stats, Scenario, Summary, BUILTINS,
};
use bwr::ising::{ising_constants, simulate_actions};
use bwr::{Error, Execution, Result, RunConfig};
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bwr", version, about = "Simulate and analyze memoryless Bayesian social learning")]
struct Cli {
    /// Base seed; trial k uses stream k of this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    #[arg(long, global = true)]
    horizon: Option<usize>,
    /// Output directory; commands that print data write files here instead.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Run trials on one thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Full,
    Circle,
    RandomNeighbor,
    Bayes,
}

impl From<Mode> for BeliefMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Full => BeliefMode::Full,
            Mode::Circle => BeliefMode::Circle,
            Mode::RandomNeighbor => BeliefMode::RandomNeighbor,
            Mode::Bayes => BeliefMode::Bayes,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file (or `builtin:<name>`) and write its artifacts.
    Run { scenario: String },
    /// Run the built-in eight-agent example and summarize it.
    Example1,
    /// Topology, strong connectivity and Perron data of a model's network.
    AnalyzeGraph { model: PathBuf },
    /// Exact analysis of the action chain of a binary model.
    AnalyzeChain { model: PathBuf },
    /// Monte Carlo runs of the action dynamics.
    SimulateActions { model: PathBuf },
    /// Monte Carlo runs of the belief dynamics.
    SimulateBeliefs {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        mode: Mode,
        /// JSON file with per-agent neighbor-choice weights.
        #[arg(long)]
        choice: Option<PathBuf>,
    },
    /// Asymptotic learning rates.
    Rates {
        model: PathBuf,
        #[arg(long)]
        choice: Option<PathBuf>,
    },
    /// Learning verdicts and outcomes from a run directory.
    Summarize { dir: PathBuf },
}

impl Cli {
    fn execution(&self) -> Execution {
        if self.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    fn config(&self) -> RunConfig {
        RunConfig {
            horizon: self.horizon.unwrap_or(100),
            trials: self.trials.unwrap_or(1),
            seed: self.seed.unwrap_or(0),
            execution: self.execution(),
        }
    }

    fn apply_overrides(&self, scenario: &mut Scenario) {
        if let Some(seed) = self.seed {
            scenario.seed = seed;
        }
        if let Some(trials) = self.trials {
            scenario.trials = trials;
        }
        if let Some(horizon) = self.horizon {
            scenario.horizon = horizon;
        }
    }
}

fn load_choice(path: &Option<PathBuf>) -> Result<Option<NeighborChoice>> {
    path.as_ref()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|e| Error::from(e).context(p.display().to_string()))?;
            serde_json::from_str(&text).map_err(|e| Error::from(e).context(p.display().to_string()))
        })
        .transpose()
}

fn stdout() -> io::BufWriter<io::StdoutLock<'static>> {
    io::BufWriter::new(io::stdout().lock())
}

fn resolve_scenario(arg: &str) -> Result<Scenario> {
    match arg.strip_prefix("builtin:") {
        Some(name) => builtin(name).ok_or_else(|| {
            Error::Precondition(format!("unknown built-in scenario {name:?}; available: {}", BUILTINS.join(", ")))
        }),
        None => Scenario::load(Path::new(arg)),
    }
}

fn print_summary(summary: &Summary, format: Format) -> Result<()> {
    let mut out = stdout();
    match format {
        Format::Json => print_json(&mut out, summary)?,
        Format::Csv => {
            if let Some(b) = &summary.beliefs {
                writeln!(out, "agent,learning_frequency,pooled_rate")?;
                for a in &b.agents {
                    let rate = a.pooled_rate.map(|r| r.to_string()).unwrap_or_default();
                    writeln!(out, "{},{},{}", a.agent, a.learning_frequency, rate)?;
                }
            }
            if let Some(a) = &summary.actions {
                writeln!(out, "trial,final_profile,absorbing,absorbed_at")?;
                for o in &a.outcomes {
                    let profile: Vec<String> = o.final_profile.iter().map(i8::to_string).collect();
                    let absorbing = o.absorbing.map(|x| x.to_string()).unwrap_or_default();
                    let at = o.absorbed_at.map(|x| x.to_string()).unwrap_or_default();
                    writeln!(out, "{},{},{},{}", o.trial, profile.join(" "), absorbing, at)?;
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn run_and_summarize(cli: &Cli, scenario: &Scenario, default_out: &str) -> Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from(default_out));
    let manifest = harness::run(scenario, &out, cli.execution())?;
    eprintln!(
        "wrote {} artifacts to {} in {:.2}s",
        manifest.artifacts.len() + 1,
        out.display(),
        manifest.wall_clock_seconds
    );
    print_summary(&harness::summarize(&out)?, cli.format.unwrap_or(Format::Json))
}

fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run { scenario } => {
            let mut s = resolve_scenario(scenario)?;
            cli.apply_overrides(&mut s);
            let default_out = format!("runs/{}", s.name);
            run_and_summarize(cli, &s, &default_out)
                .map_err(|e| if scenario.starts_with("builtin:") { e } else { e.context(scenario.clone()) })
        }
        Command::Example1 => {
            let mut s = builtin("example1").expect("built-in scenario");
            cli.apply_overrides(&mut s);
            run_and_summarize(cli, &s, "runs/example1")
        }
        Command::AnalyzeGraph { model } => {
            let model = load_model(model)?;
            let report = bwr::graph::analyze(&model.network)?;
            let mut out = stdout();
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => print_json(&mut out, &report)?,
                Format::Csv => {
                    writeln!(out, "agent,in_degree,out_degree,alpha")?;
                    for i in 0..report.agents {
                        let alpha = report.spectral.as_ref().map(|s| s.alpha[i].to_string()).unwrap_or_default();
                        writeln!(out, "{i},{},{},{alpha}", report.in_degree[i], report.out_degree[i])?;
                    }
                }
            }
            out.flush()?;
            Ok(())
        }
        Command::AnalyzeChain { model } => {
            let model = load_model(model)?;
            let constants = ising_constants(&model)?;
            let mut out = stdout();
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => print_json(&mut out, &chain_report(&model, &constants)?)?,
                Format::Csv => out.write_all(kernel_csv(&transition_kernel(&model, &constants)?).as_bytes())?,
            }
            out.flush()?;
            Ok(())
        }
        Command::SimulateActions { model } => {
            let model = load_model(model)?;
            let constants = ising_constants(&model)?;
            let trials = simulate_actions(&model, &constants, &cli.config())?;
            match (&cli.out, cli.format.unwrap_or(Format::Csv)) {
                (Some(dir), _) => {
                    std::fs::create_dir_all(dir)?;
                    write_action_trajectories(dir, &trials)?;
                }
                (None, Format::Csv) => {
                    write_actions_csv(stdout(), &trials)?;
                }
                (None, Format::Json) => {
                    let data: Vec<Vec<Vec<i8>>> = trials
                        .iter()
                        .map(|t| (0..t.steps()).map(|k| t.profile(k).to_vec()).collect())
                        .collect();
                    let mut out = stdout();
                    print_json(&mut out, &serde_json::json!({ "actions": data }))?;
                    out.flush()?;
                }
            }
            Ok(())
        }
        Command::SimulateBeliefs { model, mode, choice } => {
            let model = load_model(model)?;
            let choice = load_choice(choice)?;
            let sim = simulate_beliefs(&model, (*mode).into(), choice.as_ref(), &cli.config())?;
            match (&cli.out, cli.format.unwrap_or(Format::Csv)) {
                (Some(dir), _) => {
                    std::fs::create_dir_all(dir)?;
                    write_belief_trajectories(dir, &model, &sim.trials)?;
                    if sim.spectral.is_some() {
                        write_global_stats(dir, &model, &sim.trials)?;
                    }
                }
                (None, Format::Csv) => {
                    write_beliefs_csv(stdout(), &model, &sim.trials)?;
                }
                (None, Format::Json) => {
                    let data: Vec<Vec<Vec<Vec<f64>>>> = sim
                        .trials
                        .iter()
                        .map(|t| {
                            (0..t.steps())
                                .map(|k| (0..t.agents).map(|i| t.belief(k, i).probabilities()).collect())
                                .collect()
                        })
                        .collect();
                    let mut out = stdout();
                    print_json(&mut out, &serde_json::json!({ "states": model.states.labels, "beliefs": data }))?;
                    out.flush()?;
                }
            }
            Ok(())
        }
        Command::Rates { model, choice } => {
            let model = load_model(model)?;
            let choice = load_choice(choice)?;
            let report = learning_rates(&model, choice.as_ref())?;
            let mut out = stdout();
            match cli.format.unwrap_or(Format::Json) {
                Format::Json => print_json(&mut out, &report)?,
                Format::Csv => {
                    writeln!(out, "kind,agent,rate,binding_state")?;
                    let label = |k: usize| &report.states[k];
                    let c = &report.centralized;
                    writeln!(out, "centralized,,{},{}", c.rate, label(c.binding_state))?;
                    writeln!(out, "circle,,{},{}", report.circle.rate, label(report.circle.binding_state))?;
                    if let Some(r) = &report.random_walk {
                        writeln!(out, "random_walk,,{},{}", r.rate, label(r.binding_state))?;
                    }
                    if let Some(r) = &report.root_circle_rate {
                        writeln!(out, "root_circle,,{},{}", r.rate, label(r.binding_state))?;
                    }
                    for (i, r) in report.individual.iter().enumerate() {
                        writeln!(out, "individual,{i},{},{}", r.rate, label(r.binding_state))?;
                    }
                }
            }
            out.flush()?;
            Ok(())
        }
        Command::Summarize { dir } => print_summary(&harness::summarize(dir)?, cli.format.unwrap_or(Format::Json)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error [{}]: {e}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}

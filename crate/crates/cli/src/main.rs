use std::collections::HashSet;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use screenagent::backend::HttpConfig;
use screenagent::compact::compact;
use screenagent::dom::{DomTree, Handle};
use screenagent::env::TASKS;
use screenagent::harness::{read_report, replay_episode, run_matrix, BackendSpec, MatrixConfig, PlannerMode, Report};

#[derive(Parser)]
#[command(name = "screenagent", version, about = "Run and inspect the screen agent on simulated UI tasks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Scripted,
    Http,
    Replay,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Staged,
    Iterative,
}

#[derive(Subcommand)]
enum Command {
    /// Run a task x seed matrix and report completion rates.
    Run {
        /// Task to run; repeat for several. Defaults to every built-in task.
        #[arg(long = "task")]
        tasks: Vec<String>,
        /// Inclusive seed range `A..B`, or a single seed.
        #[arg(long, default_value = "1000..1024", value_parser = parse_seeds)]
        seeds: SeedRange,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        #[arg(long, default_value_t = 20)]
        max_steps: usize,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: BackendKind,
        #[arg(long, value_enum, default_value = "staged")]
        mode: Mode,
        /// Directory for report.json, CSV files, traces and transcripts.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Inject the seed-dependent fault grid into the scripted planner.
        #[arg(long)]
        faults: bool,
        /// Episode directory (`DIR/{task}/{seed}.transcript.jsonl`) for `--backend replay`.
        #[arg(long)]
        transcripts: Option<PathBuf>,
        /// Context budget in estimated tokens.
        #[arg(long, default_value_t = screenagent::backend::DEFAULT_CONTEXT_BUDGET)]
        context_budget: usize,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// List built-in tasks.
    ListTasks,
    /// Replay one recorded episode against its transcript.
    Replay {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
    },
    /// Print a summary table for a report.json.
    Report { file: PathBuf },
    /// Print the compact screen for a DOM snapshot JSON file.
    Compact {
        file: PathBuf,
        /// Comma-separated element ids to show as disabled.
        #[arg(long, value_delimiter = ',')]
        disabled: Vec<u32>,
    },
}

#[derive(Clone, Debug)]
struct SeedRange(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedRange, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
    match s.split_once("..") {
        Some((a, b)) => {
            let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
            if a > b {
                return Err(format!("empty seed range {s}"));
            }
            Ok(SeedRange((a..=b).collect()))
        }
        None => Ok(SeedRange(vec![num(s)?])),
    }
}

fn print_table(report: &Report) {
    println!(
        "{:<18} {:<16} {:>5} {:>28} {:>10} {:>7}",
        "task", "category", "seeds", "completion by T", "plan/ep", "errored"
    );
    for (name, t) in &report.tasks {
        let rates: Vec<String> = t
            .completion_rate_by_t
            .iter()
            .map(|(k, r)| match r {
                Some(r) => format!("T{k}={:.0}%", r * 100.0),
                None => format!("T{k}=n/a"),
            })
            .collect();
        let calls = t.mean_planner_calls.map(|c| format!("{c:.2}")).unwrap_or_else(|| "n/a".into());
        println!(
            "{:<18} {:<16} {:>5} {:>28} {:>10} {:>7}",
            name,
            t.category.as_str(),
            t.seeds.len(),
            rates.join(" "),
            calls,
            t.errored
        );
    }
}

fn run(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            tasks,
            seeds,
            trials,
            max_steps,
            backend,
            mode,
            out,
            faults,
            transcripts,
            context_budget,
            jobs,
        } => {
            let tasks = if tasks.is_empty() { TASKS.iter().map(|t| t.name.to_string()).collect() } else { tasks };
            let spec = match backend {
                BackendKind::Scripted => BackendSpec::Scripted { faults },
                BackendKind::Http => BackendSpec::Http(HttpConfig::from_env()?),
                BackendKind::Replay => {
                    let Some(dir) = transcripts else { bail!("--backend replay needs --transcripts DIR") };
                    BackendSpec::Replay { dir }
                }
            };
            let mut cfg = MatrixConfig::new(tasks, seeds.0, spec);
            cfg.trials = trials;
            cfg.max_steps = max_steps;
            cfg.mode = match mode {
                Mode::Staged => PlannerMode::Staged,
                Mode::Iterative => PlannerMode::Iterative,
            };
            cfg.context_budget = context_budget;
            cfg.out = out;
            cfg.jobs = jobs;
            let report = run_matrix(&cfg)?;
            print_table(&report);
            Ok(!report.any_errored())
        }
        Command::ListTasks => {
            for t in TASKS {
                println!("{:<18} {:<16} {}", t.name, t.category.as_str(), t.brief);
            }
            Ok(true)
        }
        Command::Replay { trace, transcript } => {
            let result = replay_episode(&trace, &transcript)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
            Ok(true)
        }
        Command::Report { file } => {
            let report = read_report(&file).with_context(|| format!("reading {}", file.display()))?;
            print_table(&report);
            Ok(!report.any_errored())
        }
        Command::Compact { file, disabled } => {
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let tree = DomTree::from_json(&text).context("parsing DOM snapshot")?;
            tree.validate()?;
            let disabled: HashSet<Handle> = disabled.into_iter().map(Handle).collect();
            println!("{}", compact(&tree, &disabled).to_text());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

//! Episode runner, task x seed matrices and their reports.

mod report;
mod trace;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{
    BackendError, CompletionBackend, Fault, HttpBackend, HttpConfig, RecordingBackend, ReplayBackend, ScriptedBackend,
    DEFAULT_CONTEXT_BUDGET,
};
use crate::env::{instantiate, EnvError};
use crate::planner::{run_iterative_trial, run_trial, EndingStatus, TrialConfig, TrialTrace, DEFAULT_MAX_STEPS};
use crate::reflection::{reflect, ReflectError, ReflectionMemory};

pub use report::{completion_rate, read_report, Report, TaskReport};
pub use trace::{read_trace, write_trace, TraceLine};

/// Consecutive unparsable reflections tolerated before the episode stops.
pub const MAX_PARSE_FAILURES: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PlannerMode {
    #[default]
    Staged,
    Iterative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeConfig {
    pub task: String,
    pub seed: u64,
    pub trials: usize,
    pub max_steps: usize,
    pub mode: PlannerMode,
    pub context_budget: usize,
}

impl EpisodeConfig {
    pub fn new(task: impl Into<String>, seed: u64) -> Self {
        EpisodeConfig {
            task: task.into(),
            seed,
            trials: 5,
            max_steps: DEFAULT_MAX_STEPS,
            mode: PlannerMode::Staged,
            context_budget: DEFAULT_CONTEXT_BUDGET,
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_mode(mut self, mode: PlannerMode) -> Self {
        self.mode = mode;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeResult {
    pub trial_statuses: Vec<EndingStatus>,
    pub completed: bool,
    /// 1-based.
    pub first_success_trial: Option<usize>,
    pub planner_calls: usize,
    pub reflector_calls: usize,
    /// Backend failure that stopped the episode; such episodes are kept out
    /// of completion rates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errored: Option<String>,
}

#[derive(Debug)]
pub struct Episode {
    pub config: EpisodeConfig,
    pub result: EpisodeResult,
    pub traces: Vec<TrialTrace>,
    pub memory: ReflectionMemory,
    pub error: Option<BackendError>,
}

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("replay diverged: {0}")]
    Diverged(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Runs up to `cfg.trials` trials on fresh instances of the same seed,
/// sharing one reflection memory and reflecting between failed trials.
pub fn run_episode(cfg: &EpisodeConfig, backend: &mut dyn CompletionBackend) -> Result<Episode, HarnessError> {
    if cfg.trials == 0 || cfg.max_steps == 0 {
        return Err(HarnessError::Config("trials and max_steps must be at least 1".into()));
    }
    let mut memory = ReflectionMemory::new(cfg.max_steps);
    let trial_cfg = TrialConfig { max_steps: cfg.max_steps, context_budget: cfg.context_budget };
    let mut traces: Vec<TrialTrace> = Vec::new();
    let mut parse_failures = 0;
    let mut error = None;

    for t in 1..=cfg.trials {
        backend.begin_trial(t);
        let mut instance = instantiate(&cfg.task, cfg.seed)?;
        let run = match cfg.mode {
            PlannerMode::Staged => run_trial(backend, &mut instance, &memory, t, trial_cfg),
            PlannerMode::Iterative => run_iterative_trial(backend, &mut instance, &memory, t, trial_cfg),
        };
        let mut trace = match run {
            Ok(trace) => trace,
            Err(e) => {
                error = Some(e);
                break;
            }
        };
        let status = trace.status;
        if status == EndingStatus::Correct || t == cfg.trials {
            traces.push(trace);
            break;
        }
        trace.reflector_calls += 1;
        match reflect(backend, &instance.task_name, &instance.goal, &trace, cfg.context_budget) {
            Ok((j, entry)) => {
                memory.record_reflection(j, entry);
                parse_failures = 0;
            }
            Err(ReflectError::Parse(_)) => parse_failures += 1,
            Err(ReflectError::Backend(e)) => {
                traces.push(trace);
                error = Some(e);
                break;
            }
        }
        traces.push(trace);
        if parse_failures >= MAX_PARSE_FAILURES {
            break;
        }
    }

    let trial_statuses: Vec<EndingStatus> = traces.iter().map(|t| t.status).collect();
    let first_success_trial = trial_statuses.iter().position(|s| *s == EndingStatus::Correct).map(|i| i + 1);
    let result = EpisodeResult {
        completed: first_success_trial.is_some(),
        first_success_trial,
        planner_calls: traces.iter().map(|t| t.planner_calls).sum(),
        reflector_calls: traces.iter().map(|t| t.reflector_calls).sum(),
        errored: error.as_ref().map(ToString::to_string),
        trial_statuses,
    };
    Ok(Episode { config: cfg.clone(), result, traces, memory, error })
}

/// Faults used by the degraded scripted runs: `1 + seed % 4` consecutive
/// trials each receive one perturbed action at a seed-dependent step.
pub fn fault_grid(seed: u64) -> Vec<Fault> {
    let k = 1 + (seed % 4) as usize;
    (1..=k).map(|trial| Fault { trial, step: (seed as usize / 4 + trial) % 3, wrong: None }).collect()
}

#[derive(Debug, Clone)]
pub enum BackendSpec {
    /// Oracle backend, optionally with the seed's fault grid.
    Scripted {
        faults: bool,
    },
    Http(HttpConfig),
    /// Transcripts laid out as `DIR/{task}/{seed}.transcript.jsonl`.
    Replay {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone)]
pub struct MatrixConfig {
    pub tasks: Vec<String>,
    pub seeds: Vec<u64>,
    pub trials: usize,
    pub max_steps: usize,
    pub mode: PlannerMode,
    pub context_budget: usize,
    pub backend: BackendSpec,
    /// Where report, traces and transcripts go.
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl MatrixConfig {
    pub fn new(tasks: Vec<String>, seeds: Vec<u64>, backend: BackendSpec) -> Self {
        MatrixConfig {
            tasks,
            seeds,
            trials: 5,
            max_steps: DEFAULT_MAX_STEPS,
            mode: PlannerMode::Staged,
            context_budget: DEFAULT_CONTEXT_BUDGET,
            backend,
            out: None,
            jobs: None,
        }
    }
}

pub fn episode_paths(dir: &Path, task: &str, seed: u64) -> (PathBuf, PathBuf) {
    let base = dir.join(task);
    (base.join(format!("{seed}.trace.jsonl")), base.join(format!("{seed}.transcript.jsonl")))
}

fn make_backend(spec: &BackendSpec, task: &str, seed: u64) -> Result<Box<dyn CompletionBackend>, BackendError> {
    Ok(match spec {
        BackendSpec::Scripted { faults } => {
            let blueprint = instantiate(task, seed).map_err(|e| BackendError::Config(e.to_string()))?;
            let faults = if *faults { fault_grid(seed) } else { Vec::new() };
            Box::new(ScriptedBackend::with_faults(blueprint, faults))
        }
        BackendSpec::Http(cfg) => Box::new(HttpBackend::new(cfg.clone())),
        BackendSpec::Replay { dir } => Box::new(ReplayBackend::from_file(&episode_paths(dir, task, seed).1)?),
    })
}

fn errored_result(message: String) -> EpisodeResult {
    EpisodeResult {
        trial_statuses: Vec::new(),
        completed: false,
        first_success_trial: None,
        planner_calls: 0,
        reflector_calls: 0,
        errored: Some(message),
    }
}

fn run_one(cfg: &MatrixConfig, task: &str, seed: u64) -> Result<EpisodeResult, HarnessError> {
    let ep_cfg = EpisodeConfig {
        task: task.to_string(),
        seed,
        trials: cfg.trials,
        max_steps: cfg.max_steps,
        mode: cfg.mode,
        context_budget: cfg.context_budget,
    };
    let inner = match make_backend(&cfg.backend, task, seed) {
        Ok(b) => b,
        Err(e) => return Ok(errored_result(e.to_string())),
    };
    let mut backend = RecordingBackend::new(inner);
    let episode = run_episode(&ep_cfg, &mut backend)?;
    if let Some(out) = &cfg.out {
        let (trace_path, transcript_path) = episode_paths(&out.join("episodes"), task, seed);
        std::fs::create_dir_all(trace_path.parent().expect("episode dir"))?;
        write_trace(&trace_path, &episode)?;
        crate::backend::write_transcript(&transcript_path, backend.entries())?;
    }
    Ok(episode.result)
}

/// Runs every (task, seed) episode, in parallel, and aggregates a report.
/// Writes `report.json`, `report.csv` and `rates.csv` under `out` if set.
pub fn run_matrix(cfg: &MatrixConfig) -> Result<Report, HarnessError> {
    for task in &cfg.tasks {
        crate::env::task_info(task).ok_or_else(|| EnvError::UnknownTask(task.clone()))?;
    }
    let seeds: Vec<u64> = cfg.seeds.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let jobs: Vec<(&str, u64)> = cfg.tasks.iter().flat_map(|t| seeds.iter().map(move |s| (t.as_str(), *s))).collect();
    let work = || -> Result<Vec<(String, u64, EpisodeResult)>, HarnessError> {
        jobs.par_iter().map(|(task, seed)| Ok((task.to_string(), *seed, run_one(cfg, task, *seed)?))).collect()
    };
    let results = match cfg.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| HarnessError::Config(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let report = Report::from_results(cfg.trials, cfg.mode, results);
    if let Some(out) = &cfg.out {
        std::fs::create_dir_all(out)?;
        report.write_dir(out)?;
    }
    Ok(report)
}

/// Re-runs a recorded episode against its transcript and checks that the
/// outcome matches the recording.
pub fn replay_episode(trace_file: &Path, transcript_file: &Path) -> Result<EpisodeResult, HarnessError> {
    let lines = read_trace(trace_file)?;
    let Some(TraceLine::Episode { config, result: recorded, .. }) = lines.last().cloned() else {
        return Err(HarnessError::Corrupt { path: trace_file.to_path_buf(), reason: "missing episode trailer".into() });
    };
    let mut backend = ReplayBackend::from_file(transcript_file)?;
    let episode = run_episode(&config, &mut backend)?;
    if let Some(e) = episode.error {
        return Err(e.into());
    }
    if episode.result != recorded {
        return Err(HarnessError::Diverged(format!(
            "recorded {:?}, replayed {:?}",
            recorded.trial_statuses, episode.result.trial_statuses
        )));
    }
    if backend.remaining() != 0 {
        return Err(HarnessError::Diverged(format!("{} recorded calls were never made", backend.remaining())));
    }
    Ok(episode.result)
}

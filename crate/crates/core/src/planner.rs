//! Trial execution: staged planning, strict execution, summaries and ending
//! status classification. Also the one-action-per-call iterative baseline.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::action::{format_action, ground, parse_plan, ActionCommand, KeyboardState, ParseError};
use crate::backend::prompt::{build_iterative_prompt, build_plan_prompt, build_summarize_prompt, PromptError};
use crate::backend::{BackendError, CompletionBackend, DEFAULT_CONTEXT_BUDGET};
use crate::compact::{compact, CompactScreen};
use crate::dom::Handle;
use crate::env::{TaskInstance, Verdict};
use crate::reflection::{disabled_handles_for_step, force_or_plan, Decision, ReflectionMemory};

pub const DEFAULT_MAX_STEPS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EndingStatus {
    Correct,
    Cycle,
    NoChange,
    Incomplete,
    Exception,
    Failed,
    InProgress,
}

impl EndingStatus {
    pub const ALL: [EndingStatus; 7] = [
        EndingStatus::Correct,
        EndingStatus::Cycle,
        EndingStatus::NoChange,
        EndingStatus::Incomplete,
        EndingStatus::Exception,
        EndingStatus::Failed,
        EndingStatus::InProgress,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EndingStatus::Correct => "CORRECT",
            EndingStatus::Cycle => "CYCLE",
            EndingStatus::NoChange => "NO_CHANGE",
            EndingStatus::Incomplete => "INCOMPLETE",
            EndingStatus::Exception => "EXCEPTION",
            EndingStatus::Failed => "FAILED",
            EndingStatus::InProgress => "IN_PROGRESS",
        }
    }
}

impl std::fmt::Display for EndingStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub index: usize,
    /// Screen shown to the planner, disabled ids already stripped.
    pub screen: CompactScreen,
    /// Full tree before the action.
    pub raw_snapshot: String,
    pub action: ActionCommand,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialTrace {
    /// 1-based trial number within the episode.
    pub trial_index: usize,
    pub steps: Vec<StepRecord>,
    pub status: EndingStatus,
    pub planner_calls: usize,
    pub reflector_calls: usize,
    pub summary_calls: usize,
    /// Why the trial ended in EXCEPTION, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub max_steps: usize,
    pub context_budget: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig { max_steps: DEFAULT_MAX_STEPS, context_budget: DEFAULT_CONTEXT_BUDGET }
    }
}

/// Everything the status rules look at.
#[derive(Debug, Clone, Copy)]
pub struct StatusContext<'a> {
    /// Raw snapshots `S_0..=S_k`: the initial tree and the tree after each
    /// executed action.
    pub snapshots: &'a [String],
    pub verdict: Option<Verdict>,
    pub exception: bool,
    pub steps_taken: usize,
    pub max_steps: usize,
    pub plan_exhausted: bool,
}

/// First matching rule wins: CORRECT, FAILED, EXCEPTION, NO_CHANGE, CYCLE,
/// IN_PROGRESS, INCOMPLETE. `None` means keep going.
pub fn classify_status(ctx: &StatusContext) -> Option<EndingStatus> {
    match ctx.verdict {
        Some(Verdict { success: true }) => return Some(EndingStatus::Correct),
        Some(Verdict { success: false }) => return Some(EndingStatus::Failed),
        None => {}
    }
    if ctx.exception {
        return Some(EndingStatus::Exception);
    }
    if let [earlier @ .., prev, last] = ctx.snapshots {
        if last == prev {
            return Some(EndingStatus::NoChange);
        }
        if earlier.contains(last) {
            return Some(EndingStatus::Cycle);
        }
    }
    if ctx.steps_taken >= ctx.max_steps {
        return Some(EndingStatus::InProgress);
    }
    if ctx.plan_exhausted {
        return Some(EndingStatus::Incomplete);
    }
    None
}

#[derive(Debug, thiserror::Error)]
pub enum StageError {
    #[error("plan line {line}: {error}")]
    Parse { line: usize, error: ParseError },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// One planning call for the current screen. An empty list means the
/// planner has nothing further to do.
pub fn run_stage(
    backend: &mut dyn CompletionBackend,
    goal: &str,
    screen: &CompactScreen,
    history: &[String],
    budget: usize,
) -> Result<Vec<ActionCommand>, StageError> {
    let prompt = build_plan_prompt(goal, screen, history, budget)?;
    let reply = backend.complete(&prompt)?;
    parse_plan(&reply).map_err(|(line, error)| StageError::Parse { line, error })
}

/// One-line description of an executed action. Falls back to the canonical
/// action string when the backend fails or says nothing.
pub fn summarize_action(
    backend: &mut dyn CompletionBackend,
    screen: &CompactScreen,
    action: &ActionCommand,
    budget: usize,
) -> Result<String, BackendError> {
    let prompt = build_summarize_prompt(screen, action, budget);
    let reply = match backend.complete(&prompt) {
        Ok(r) => r,
        Err(e @ BackendError::ReplayMismatch { .. }) => return Err(e),
        Err(_) => String::new(),
    };
    let flat = reply.split_whitespace().collect::<Vec<_>>().join(" ");
    Ok(if flat.is_empty() { format_action(action) } else { flat })
}

/// Shared per-trial bookkeeping for both planning modes.
struct Runner<'a> {
    instance: &'a mut TaskInstance,
    memory: &'a ReflectionMemory,
    cfg: TrialConfig,
    keys: KeyboardState,
    snapshots: Vec<String>,
    trace: TrialTrace,
}

enum StepOutcome {
    Continue,
    Done,
}

impl<'a> Runner<'a> {
    fn new(instance: &'a mut TaskInstance, memory: &'a ReflectionMemory, trial_index: usize, cfg: TrialConfig) -> Self {
        let snapshots = vec![instance.tree.canonical()];
        Runner {
            instance,
            memory,
            cfg,
            keys: KeyboardState::default(),
            snapshots,
            trace: TrialTrace {
                trial_index,
                steps: Vec::new(),
                status: EndingStatus::Incomplete,
                planner_calls: 0,
                reflector_calls: 0,
                summary_calls: 0,
                detail: None,
            },
        }
    }

    fn step_index(&self) -> usize {
        self.trace.steps.len()
    }

    fn screen(&self) -> CompactScreen {
        let disabled: HashSet<Handle> =
            disabled_handles_for_step(self.memory, self.step_index(), |id| Some(Handle(id)));
        compact(&self.instance.tree, &disabled)
    }

    fn status(&self, exception: bool, plan_exhausted: bool) -> Option<EndingStatus> {
        classify_status(&StatusContext {
            snapshots: &self.snapshots,
            verdict: self.instance.evaluate(),
            exception,
            steps_taken: self.trace.steps.len(),
            max_steps: self.cfg.max_steps,
            plan_exhausted,
        })
    }

    fn end(mut self, status: EndingStatus, detail: Option<String>) -> TrialTrace {
        self.trace.status = status;
        self.trace.detail = detail;
        self.trace
    }

    /// Grounds and applies `action`, records the step and classifies.
    fn execute(
        &mut self,
        backend: &mut dyn CompletionBackend,
        screen: CompactScreen,
        action: ActionCommand,
        summarize: bool,
    ) -> Result<(StepOutcome, Option<String>), BackendError> {
        let raw_snapshot = self.snapshots.last().cloned().unwrap_or_default();
        let index = self.step_index();
        let applied = ground(&action, &screen)
            .and_then(|events| self.keys.admit(&events).map(|_| events))
            .map_err(|e| e.to_string())
            .and_then(|events| self.instance.apply(&events).map_err(|e| e.to_string()));
        if let Err(detail) = applied {
            let summary = format_action(&action);
            self.trace.steps.push(StepRecord { index, screen, raw_snapshot, action, summary });
            return Ok((StepOutcome::Done, Some(detail)));
        }
        self.snapshots.push(self.instance.tree.canonical());
        let summary = if summarize {
            self.trace.summary_calls += 1;
            summarize_action(backend, &screen, &action, self.cfg.context_budget)?
        } else {
            format_action(&action)
        };
        self.trace.steps.push(StepRecord { index, screen, raw_snapshot, action, summary });
        Ok((if self.status(false, false).is_some() { StepOutcome::Done } else { StepOutcome::Continue }, None))
    }
}

/// Runs one staged plan-and-follow trial on a fresh `instance`.
pub fn run_trial(
    backend: &mut dyn CompletionBackend,
    instance: &mut TaskInstance,
    memory: &ReflectionMemory,
    trial_index: usize,
    cfg: TrialConfig,
) -> Result<TrialTrace, BackendError> {
    let goal = instance.goal.clone();
    let mut run = Runner::new(instance, memory, trial_index, cfg);
    let mut pending: VecDeque<ActionCommand> = VecDeque::new();
    loop {
        let i = run.step_index();
        let screen = run.screen();
        let decision = force_or_plan(memory, i, || -> Result<Option<ActionCommand>, StageError> {
            if pending.is_empty() {
                run.trace.planner_calls += 1;
                let history: Vec<String> = run.trace.steps.iter().map(|s| s.summary.clone()).collect();
                pending.extend(run_stage(backend, &goal, &screen, &history, cfg.context_budget)?);
            }
            Ok(pending.pop_front())
        });
        let action = match decision {
            Decision::Forced(a) => {
                // A replayed suggestion invalidates the rest of the stage.
                pending.clear();
                a
            }
            Decision::Planned(Ok(Some(a))) => a,
            Decision::Planned(Ok(None)) => {
                let status = run.status(false, true).unwrap_or(EndingStatus::Incomplete);
                return Ok(run.end(status, None));
            }
            Decision::Planned(Err(StageError::Backend(e))) => return Err(e),
            Decision::Planned(Err(e)) => return Ok(run.end(EndingStatus::Exception, Some(e.to_string()))),
        };
        let (outcome, detail) = run.execute(backend, screen, action, true)?;
        if let StepOutcome::Done = outcome {
            let status = if detail.is_some() { Some(EndingStatus::Exception) } else { run.status(false, false) };
            return Ok(run.end(status.expect("done implies a status"), detail));
        }
    }
}

/// Iterative planning: one call per atomic action, each prompt carrying
/// every prior screen and action. Honors reflection memory the same way
/// staged trials do.
pub fn run_iterative_trial(
    backend: &mut dyn CompletionBackend,
    instance: &mut TaskInstance,
    memory: &ReflectionMemory,
    trial_index: usize,
    cfg: TrialConfig,
) -> Result<TrialTrace, BackendError> {
    let goal = instance.goal.clone();
    let mut run = Runner::new(instance, memory, trial_index, cfg);
    loop {
        let i = run.step_index();
        let screen = run.screen();
        let decision = force_or_plan(memory, i, || -> Result<Option<ActionCommand>, StageError> {
            run.trace.planner_calls += 1;
            let history: Vec<(CompactScreen, ActionCommand)> =
                run.trace.steps.iter().map(|s| (s.screen.clone(), s.action.clone())).collect();
            let prompt = build_iterative_prompt(&goal, &history, &screen, cfg.context_budget)?;
            let reply = backend.complete(&prompt)?;
            let first = reply.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
            let plan = parse_plan(first).map_err(|(line, error)| StageError::Parse { line, error })?;
            Ok(plan.into_iter().next())
        });
        let action = match decision {
            Decision::Forced(a) => a,
            Decision::Planned(Ok(Some(a))) => a,
            Decision::Planned(Ok(None)) => {
                let status = run.status(false, true).unwrap_or(EndingStatus::Incomplete);
                return Ok(run.end(status, None));
            }
            Decision::Planned(Err(StageError::Backend(e))) => return Err(e),
            Decision::Planned(Err(e)) => return Ok(run.end(EndingStatus::Exception, Some(e.to_string()))),
        };
        let (outcome, detail) = run.execute(backend, screen, action, false)?;
        if let StepOutcome::Done = outcome {
            let status = if detail.is_some() { Some(EndingStatus::Exception) } else { run.status(false, false) };
            return Ok(run.end(status.expect("done implies a status"), detail));
        }
    }
}

/// Single iterative trial without reflection memory, for call accounting.
pub fn run_iterative_baseline(
    backend: &mut dyn CompletionBackend,
    instance: &mut TaskInstance,
    max_steps: usize,
) -> Result<TrialTrace, BackendError> {
    let memory = ReflectionMemory::new(max_steps);
    let cfg = TrialConfig { max_steps, ..TrialConfig::default() };
    run_iterative_trial(backend, instance, &memory, 1, cfg)
}

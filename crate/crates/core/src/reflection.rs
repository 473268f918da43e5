//! Structured reflection memory.
//!
//! `R[i]` holds at most one `(wrong, suggested)` pair per step and `D[i]` the
//! canonical strings of actions already known to fail at step `i`. At step
//! `i` a stored suggestion is replayed instead of planning, unless it is
//! itself disabled. Recording a reflection at step `j` moves the previous
//! wrong action at `j` into `D[j]` and forgets everything after `j`.

use std::collections::{BTreeSet, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::action::{format_action, parse_action, ActionCommand, ParseError};
use crate::backend::prompt::build_reflect_prompt;
use crate::backend::{BackendError, CompletionBackend};
use crate::dom::Handle;
use crate::planner::TrialTrace;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionEntry {
    pub wrong: ActionCommand,
    pub suggested: ActionCommand,
}

impl ReflectionEntry {
    pub fn new(wrong: ActionCommand, suggested: ActionCommand) -> Result<Self, ReflectionParseError> {
        if format_action(&wrong) == format_action(&suggested) {
            return Err(ReflectionParseError::SameAction(format_action(&wrong)));
        }
        Ok(ReflectionEntry { wrong, suggested })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReflectionParseError {
    #[error("no `For action index=A, you should B.` sentence in reply")]
    Unrecognized,
    #[error("action index {index} outside a {len}-step trace")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("suggested action does not parse: {0}")]
    BadAction(#[from] ParseError),
    #[error("suggestion repeats the executed action `{0}`")]
    SameAction(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionMemory {
    r: Vec<Option<ReflectionEntry>>,
    d: Vec<BTreeSet<String>>,
}

impl ReflectionMemory {
    /// Memory for trials of at most `n` steps.
    pub fn new(n: usize) -> Self {
        ReflectionMemory { r: vec![None; n], d: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.iter().all(Option::is_none) && self.d.iter().all(BTreeSet::is_empty)
    }

    pub fn entry(&self, i: usize) -> Option<&ReflectionEntry> {
        self.r.get(i).and_then(Option::as_ref)
    }

    pub fn disabled(&self, i: usize) -> Option<&BTreeSet<String>> {
        self.d.get(i)
    }

    /// The suggestion to replay at step `i`, if one exists and is not disabled.
    pub fn forced(&self, i: usize) -> Option<&ActionCommand> {
        let entry = self.entry(i)?;
        let blocked = self.d[i].contains(&format_action(&entry.suggested));
        (!blocked).then_some(&entry.suggested)
    }

    pub fn record_reflection(&mut self, j: usize, entry: ReflectionEntry) {
        assert!(j < self.len(), "reflection step {j} outside memory of {}", self.len());
        if let Some(prev) = self.r[j].take() {
            self.d[j].insert(format_action(&prev.wrong));
        }
        self.r[j] = Some(entry);
        for k in j + 1..self.len() {
            self.r[k] = None;
            self.d[k].clear();
        }
    }
}

/// Outcome of consulting memory before step `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Decision<T> {
    Forced(ActionCommand),
    Planned(T),
}

/// Returns the stored suggestion for step `i` when allowed, otherwise runs
/// `plan_fn`. `plan_fn` is not called on the forced path.
pub fn force_or_plan<T>(memory: &ReflectionMemory, i: usize, plan_fn: impl FnOnce() -> T) -> Decision<T> {
    match memory.forced(i) {
        Some(a) => Decision::Forced(a.clone()),
        None => Decision::Planned(plan_fn()),
    }
}

/// Handles of the elements clicked by the disabled actions of step `i`.
pub fn disabled_handles_for_step(
    memory: &ReflectionMemory,
    i: usize,
    id_to_handle: impl Fn(u32) -> Option<Handle>,
) -> HashSet<Handle> {
    memory
        .disabled(i)
        .into_iter()
        .flatten()
        .filter_map(|s| match parse_action(s) {
            Ok(ActionCommand::Click { id }) => id_to_handle(id),
            _ => None,
        })
        .collect()
}

static SUGGESTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)for action index\s*=\s*(\d+)\s*,\s*you should\s+(.+)").expect("valid regex"));

/// Parses `For action index=A, you should B.` against a trace of `len` steps.
pub fn parse_reflection(reply: &str, len: usize) -> Result<(usize, ActionCommand), ReflectionParseError> {
    let flat = reply.replace(['\n', '\r'], " ");
    let caps = SUGGESTION.captures(&flat).ok_or(ReflectionParseError::Unrecognized)?;
    let index: usize = caps[1].parse().map_err(|_| ReflectionParseError::Unrecognized)?;
    if index >= len {
        return Err(ReflectionParseError::IndexOutOfRange { index, len });
    }
    let body = caps[2].trim();
    let body = body.strip_suffix('.').unwrap_or(body);
    Ok((index, parse_action(body)?))
}

#[derive(Debug, thiserror::Error)]
pub enum ReflectError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Parse(#[from] ReflectionParseError),
}

/// One reflector call over a failed trial. Returns the step to amend and
/// the entry to store there.
pub fn reflect(
    backend: &mut dyn CompletionBackend,
    task_name: &str,
    goal: &str,
    trace: &TrialTrace,
    budget: usize,
) -> Result<(usize, ReflectionEntry), ReflectError> {
    let prompt = build_reflect_prompt(task_name, goal, &trace.steps, trace.status, budget);
    let reply = backend.complete(&prompt)?;
    let (j, suggested) = parse_reflection(&reply, trace.steps.len())?;
    let entry = ReflectionEntry::new(trace.steps[j].action.clone(), suggested)?;
    Ok((j, entry))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn click(id: u32) -> ActionCommand {
        ActionCommand::Click { id }
    }

    fn entry(a: u32, b: u32) -> ReflectionEntry {
        ReflectionEntry::new(click(a), click(b)).unwrap()
    }

    #[test]
    fn parses_suggestion() {
        assert_eq!(parse_reflection("For action index=0, you should click id=4.", 3), Ok((0, click(4))));
        assert_eq!(
            parse_reflection("Sure.\nFor action index=1, you should enter \"a.b.\" to id=2.", 3),
            Ok((1, ActionCommand::Type { id: 2, text: "a.b.".into() }))
        );
        assert_eq!(parse_reflection("You should try harder.", 3), Err(ReflectionParseError::Unrecognized));
        assert_eq!(
            parse_reflection("For action index=5, you should click id=1.", 3),
            Err(ReflectionParseError::IndexOutOfRange { index: 5, len: 3 })
        );
        assert!(matches!(
            parse_reflection("For action index=0, you should dance.", 3),
            Err(ReflectionParseError::BadAction(_))
        ));
    }

    #[test]
    fn entry_rejects_identical_actions() {
        assert!(ReflectionEntry::new(click(1), click(1)).is_err());
    }

    #[test]
    fn disabled_handles_only_from_clicks() {
        let mut m = ReflectionMemory::new(3);
        m.record_reflection(1, entry(5, 6));
        m.record_reflection(
            1,
            ReflectionEntry::new(ActionCommand::Type { id: 2, text: "x".into() }, click(7)).unwrap(),
        );
        m.record_reflection(1, entry(8, 9));
        let got = disabled_handles_for_step(&m, 1, |id| Some(Handle(id)));
        assert_eq!(got, HashSet::from([Handle(5)]));
        assert_eq!(m.disabled(1).unwrap().len(), 2);
    }
}

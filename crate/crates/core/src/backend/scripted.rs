//! Deterministic backend that answers every prompt kind from the task oracle.
//!
//! Planning replies are oracle plans, optionally corrupted by configured
//! faults. Summaries come from behavior-keyed templates. Reflections replay
//! the reported trajectory on a fresh instance and point at the first action
//! the oracle would not have taken.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::prompt::{parse_plan_prompt, parse_reflect_prompt, parse_summarize_prompt, PromptKind};
use super::{BackendError, CompletionBackend, PromptBundle};
use crate::action::{ground, ActionCommand, Key};
use crate::compact::{compact, CompactScreen};
use crate::dom::{Behavior, Handle};
use crate::env::oracle::oracle_plan;
use crate::env::TaskInstance;

/// One wrong action to emit instead of the oracle's at `step` of `trial`.
/// `wrong: None` picks a perturbation of the oracle action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fault {
    pub trial: usize,
    pub step: usize,
    pub wrong: Option<ActionCommand>,
}

pub struct ScriptedBackend {
    blueprint: TaskInstance,
    faults: Vec<Fault>,
    fired: HashSet<usize>,
    trial: usize,
}

impl ScriptedBackend {
    pub fn new(blueprint: TaskInstance) -> Self {
        Self::with_faults(blueprint, Vec::new())
    }

    pub fn with_faults(blueprint: TaskInstance, faults: Vec<Fault>) -> Self {
        ScriptedBackend { blueprint, faults, fired: HashSet::new(), trial: 1 }
    }

    fn plan(&mut self, text: &str) -> String {
        let Some(view) = parse_plan_prompt(text) else { return String::new() };
        let mut plan = oracle_plan(&self.blueprint, &view.screen);
        if view.iterative {
            plan.truncate(1);
        }
        let first = view.steps_done;
        let hit = self.faults.iter().enumerate().find(|(i, f)| {
            f.trial == self.trial && !self.fired.contains(i) && (first..first + plan.len()).contains(&f.step)
        });
        if let Some((i, fault)) = hit {
            let k = fault.step - first;
            let wrong = fault.wrong.clone().unwrap_or_else(|| perturb(&plan[k], &view.screen));
            plan.truncate(k);
            plan.push(wrong);
            self.fired.insert(i);
        }
        plan.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n")
    }

    fn summarize(&self, text: &str) -> String {
        match parse_summarize_prompt(text) {
            Some((screen, action)) => self.describe(&screen, &action),
            None => String::new(),
        }
    }

    fn describe(&self, screen: &CompactScreen, action: &ActionCommand) -> String {
        let times = |n: u32| if n == 1 { "once".to_string() } else { format!("{n} times") };
        match action {
            ActionCommand::Click { id } => {
                let node = self.blueprint.tree.get(Handle(*id));
                let on_screen = screen.element(*id);
                let text = on_screen.and_then(|e| e.text.clone()).unwrap_or_default();
                match node.and_then(|n| n.behavior.clone()) {
                    Some(Behavior::TogglesCheckbox) => {
                        let was = on_screen.and_then(|e| e.value.as_deref()) == Some("true");
                        let verb = if was { "Unchecked" } else { "Checked" };
                        format!("{verb} the checkbox labeled {text}")
                    }
                    Some(Behavior::FocusesInput | Behavior::OpensAutocomplete) => {
                        let field = on_screen.and_then(|e| e.placeholder.clone()).unwrap_or("text".into());
                        format!("Focused the {field} field")
                    }
                    Some(Behavior::CommitsCompletion) => format!("Selected {text} from the completion list"),
                    Some(Behavior::ActivatesTab { .. }) => {
                        let n = text.trim_start_matches("Tab ").to_string();
                        format!("Switched to tab {n} to reveal its links")
                    }
                    Some(Behavior::RunsSearch) => "Ran the search for the typed query".to_string(),
                    Some(Behavior::ShowsPage { page }) => format!("Opened page {page} of the search results"),
                    Some(Behavior::SubmitsForm) => format!("Submitted the form with the {text} button"),
                    Some(Behavior::EndsWithChoice) => match node.map(|n| n.tag.as_str()) {
                        Some("a") => format!("Clicked the link {text}"),
                        Some("button") => format!("Clicked the {text} button"),
                        Some(tag) => format!("Clicked the {tag} widget"),
                        None => format!("Clicked element {id}"),
                    },
                    None if text.is_empty() => format!("Clicked element {id}"),
                    None => format!("Clicked the text {text}"),
                }
            }
            ActionCommand::Type { id, text } => match screen.element(*id).and_then(|e| e.placeholder.clone()) {
                Some(field) => format!("Entered the {field} {text} into the {field} field"),
                None => format!("Entered {text} into the text field"),
            },
            ActionCommand::KeyPress { key: Key::ArrowDown, count } => {
                format!("Moved the list highlight down {}", times(*count))
            }
            ActionCommand::KeyPress { key: Key::ArrowUp, count } => {
                format!("Moved the list highlight up {}", times(*count))
            }
            ActionCommand::KeyPress { key: Key::Enter, .. } => "Pressed ENTER to pick the highlighted item".to_string(),
            ActionCommand::KeyPress { key: Key::Backspace, count } => {
                format!("Erased {count} character{}", if *count == 1 { "" } else { "s" })
            }
            ActionCommand::KeyPress { key, count } => format!("Pressed {key} {}", times(*count)),
            ActionCommand::Hold { key } => format!("Held down {key}"),
            ActionCommand::Release { key } => format!("Released {key}"),
        }
    }

    fn reflect(&self, text: &str) -> String {
        let Some(view) = parse_reflect_prompt(text) else { return String::new() };
        let mut live = self.blueprint.clone();
        let mut last = None;
        for (k, action) in view.actions.iter().enumerate() {
            if live.is_terminal() {
                break;
            }
            let screen = compact(&live.tree, &HashSet::new());
            let Some(expected) = oracle_plan(&self.blueprint, &screen).into_iter().next() else { break };
            if *action != expected {
                return format!("For action index={k}, you should {expected}.");
            }
            last = Some((k, expected));
            match ground(action, &screen) {
                Ok(events) if live.apply(&events).is_ok() => {}
                _ => break,
            }
        }
        // No divergence found; point at the last step anyway.
        match last {
            Some((k, a)) => format!("For action index={k}, you should {a}."),
            None => "I could not find a mistake.".to_string(),
        }
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(&mut self, prompt: &PromptBundle) -> Result<String, BackendError> {
        Ok(match prompt.kind {
            PromptKind::Plan => self.plan(&prompt.text),
            PromptKind::Summarize => self.summarize(&prompt.text),
            PromptKind::Reflect => self.reflect(&prompt.text),
        })
    }

    fn begin_trial(&mut self, trial: usize) {
        self.trial = trial;
    }

    fn identity(&self) -> String {
        format!("scripted:{}:{}", self.blueprint.task_name, self.blueprint.seed)
    }
}

/// A plausible but wrong variant of `action` on `screen`.
pub fn perturb(action: &ActionCommand, screen: &CompactScreen) -> ActionCommand {
    match action {
        ActionCommand::Click { id } => {
            let tag = screen.element(*id).map(|e| e.tag.as_str());
            let ids: Vec<u32> = screen.ids().collect();
            let pos = ids.iter().position(|i| i == id).unwrap_or(0);
            let rotated = ids.iter().cycle().skip(pos + 1).take(ids.len()).copied();
            let same_tag = rotated.clone().find(|i| i != id && screen.element(*i).map(|e| e.tag.as_str()) == tag);
            let other = same_tag.or_else(|| rotated.clone().find(|i| i != id));
            ActionCommand::Click { id: other.unwrap_or(id + 1000) }
        }
        ActionCommand::Type { id, text } => {
            let mut wrong = text.clone();
            if wrong.chars().count() > 1 {
                wrong.pop();
            } else {
                wrong.push('x');
            }
            ActionCommand::Type { id: *id, text: wrong }
        }
        ActionCommand::KeyPress { key, count } => ActionCommand::KeyPress { key: *key, count: count + 1 },
        ActionCommand::Hold { key } | ActionCommand::Release { key } => ActionCommand::KeyPress { key: *key, count: 1 },
    }
}

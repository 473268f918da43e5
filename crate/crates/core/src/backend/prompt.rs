//! Prompt templates and their inverse parsers.
//!
//! The builders are pure functions of their inputs. The `parse_*` helpers
//! recover the structured inputs from prompt text; the scripted backends use
//! them so they can answer from the prompt alone.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::action::{parse_action, ActionCommand};
use crate::compact::CompactScreen;
use crate::planner::{EndingStatus, StepRecord};

pub const DEFAULT_CONTEXT_BUDGET: usize = 8000;

pub const ACTION_SPACE_PREFIX: &str = "You can generate a series of atomic actions to fulfill a top-level goal. There are three types of atomic actions you can perform. Firstly, you can click an object by referring to its id, such as \"click id=...\". Secondly, you can enter text to an input field, such as \"enter \"...\" to id=...\". Specifically, you should always wrap the text you want to type in with double quotes. Lastly, you can operate special keys on the keyboard, such as \"hold CTRL\" and \"release CTRL\" before and after multiple selections. If dropdown list is available, you can \"press ARROWUP x N\" or \"press ARROWDOWN x N\" to press the arrow key N times to iterate over list items, and then \"press ENTER\" to select the current item.";

pub const STAGED_PLAN_SUFFIX: &str = "Now, you need to plan actions that are executable on and only on this screen. For actions that are not executable on this screen, you should leave them to future planning. Your plan should consist of a list of atomic actions on the screen. Please separate them by newline.";

pub const ITERATIVE_PLAN_SUFFIX: &str =
    "Now, you need to decide the next atomic action on this screen. Reply with exactly one action.";

const SUMMARIZE_HEAD: &str = "You are capable of describing actions taken on a computer. The computer screen is represented by the following HTML pseudo code:";
const SUMMARIZE_TAIL: &str = "Now, in plain language, please summarize what has been done. You should describe the specific purpose for the action, instead of simply referring to the element id or position of the element.\nSummary:";

const REFLECT_FORMAT: &str = "Your suggestion should be in this format: \"For action index=A, you should B.\", where A is the action index, and B is the suggested action you should have taken.\nYour suggestion:";

const GOAL_LINE: &str = "The top-level goal is: ";
const HISTORY_HEAD: &str = "You have already done the following:";
const CURRENT_SCREEN: &str = "The current screen is:";
const REFLECT_GOAL_LINE: &str = "You conducted the above actions for the top-level goal: ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PromptKind {
    Plan,
    Summarize,
    Reflect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub kind: PromptKind,
    pub text: String,
    pub context_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("prompt needs about {needed} tokens, budget is {budget}")]
    OverBudget { needed: usize, budget: usize },
}

/// Token estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

/// Reply text for a status, used to open the reflection question.
pub fn status_sentence(status: EndingStatus) -> Option<&'static str> {
    Some(match status {
        EndingStatus::Correct => return None,
        EndingStatus::Failed => "However, your actions did not complete the goal. Now, you need to identify the earliest critical step where you made a mistake, and suggest a correction.",
        EndingStatus::Cycle => "However, your actions led you to a loop that did not progress the task. Now, you need to identify the earliest critical step where you made a mistake, and suggest a correction.",
        EndingStatus::NoChange => "However, your last action did not cause anything to change on the last screen. You probably used the wrong action type. Now, you need to identify the earliest critical step where you made a mistake, and suggest a correction.",
        EndingStatus::Incomplete => "However, your actions did not finish the task, likely more steps are needed. Now, you need to identify the earliest critical step where you made a mistake, and suggest a correction.",
        EndingStatus::InProgress => "However, you took too many steps and yet still did not finish the task. Now, you need to identify the earliest critical step where you made a mistake, and suggest a correction.",
        EndingStatus::Exception => "However, your last action is invalid. You should avoid doing that again and try a different action.",
    })
}

fn screen_block(out: &mut String, screen: &CompactScreen) {
    out.push_str("<screen>\n");
    out.push_str(&screen.to_text());
    if !screen.elements.is_empty() {
        out.push('\n');
    }
    out.push_str("</screen>\n");
}

fn checked(kind: PromptKind, text: String, budget: usize) -> Result<PromptBundle, PromptError> {
    let needed = estimate_tokens(&text);
    if needed > budget {
        return Err(PromptError::OverBudget { needed, budget });
    }
    Ok(PromptBundle { kind, text, context_budget: budget })
}

/// Staged planning prompt: action space, goal, current screen, summaries of
/// what was already done, then the staged instruction.
pub fn build_plan_prompt(
    goal: &str,
    screen: &CompactScreen,
    history: &[String],
    budget: usize,
) -> Result<PromptBundle, PromptError> {
    let mut text = String::new();
    text.push_str(ACTION_SPACE_PREFIX);
    text.push('\n');
    let _ = writeln!(text, "{GOAL_LINE}{goal}");
    let _ = writeln!(text, "{CURRENT_SCREEN}");
    screen_block(&mut text, screen);
    if !history.is_empty() {
        let _ = writeln!(text, "{HISTORY_HEAD}");
        for summary in history {
            let _ = writeln!(text, "- {summary}");
        }
    }
    text.push_str(STAGED_PLAN_SUFFIX);
    checked(PromptKind::Plan, text, budget)
}

/// One-action-at-a-time baseline prompt. Carries every prior screen and action.
pub fn build_iterative_prompt(
    goal: &str,
    history: &[(CompactScreen, ActionCommand)],
    screen: &CompactScreen,
    budget: usize,
) -> Result<PromptBundle, PromptError> {
    let mut text = String::new();
    text.push_str(ACTION_SPACE_PREFIX);
    text.push('\n');
    let _ = writeln!(text, "{GOAL_LINE}{goal}");
    for (k, (s, a)) in history.iter().enumerate() {
        let _ = writeln!(text, "The index={k} screen:");
        screen_block(&mut text, s);
        let _ = writeln!(text, "Your index={k} action: {a}");
    }
    let _ = writeln!(text, "{CURRENT_SCREEN}");
    screen_block(&mut text, screen);
    text.push_str(ITERATIVE_PLAN_SUFFIX);
    checked(PromptKind::Plan, text, budget)
}

pub fn build_summarize_prompt(screen: &CompactScreen, action: &ActionCommand, budget: usize) -> PromptBundle {
    let mut text = String::new();
    let _ = writeln!(text, "{SUMMARIZE_HEAD}");
    screen_block(&mut text, screen);
    let _ = writeln!(text, "And the action taken is:\n{action}");
    text.push_str(SUMMARIZE_TAIL);
    PromptBundle { kind: PromptKind::Summarize, text, context_budget: budget }
}

fn reflect_text(task_name: &str, goal: &str, steps: &[StepRecord], sentence: &str, all_screens: bool) -> String {
    let mut text = format!(
        "You are operating a computer for a task: {task_name}. You went over a series of screens and executed actions to fulfill a top-level goal.\nYour action trajectory is as follows:\n"
    );
    for (k, step) in steps.iter().enumerate() {
        if all_screens || k == 0 {
            let _ = writeln!(text, "The index={k} screen:");
            screen_block(&mut text, &step.screen);
        }
        let _ = writeln!(text, "Your index={k} action: {}", step.action);
        let _ = writeln!(text, "Summary of the index={k} action: {}", step.summary);
    }
    let _ = writeln!(text, "{REFLECT_GOAL_LINE}{goal}");
    let _ = writeln!(text, "{sentence}");
    text.push_str(REFLECT_FORMAT);
    text
}

/// Reflection prompt over a finished trial. When the full trajectory would
/// exceed the budget, only the first screen is kept; every action line stays.
pub fn build_reflect_prompt(
    task_name: &str,
    goal: &str,
    steps: &[StepRecord],
    status: EndingStatus,
    budget: usize,
) -> PromptBundle {
    let sentence = status_sentence(status).unwrap_or(status_sentence(EndingStatus::Failed).expect("failed"));
    let mut text = reflect_text(task_name, goal, steps, sentence, true);
    if estimate_tokens(&text) > budget {
        text = reflect_text(task_name, goal, steps, sentence, false);
    }
    PromptBundle { kind: PromptKind::Reflect, text, context_budget: budget }
}

/// Structured view of a planning prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanView {
    pub goal: String,
    pub screen: CompactScreen,
    /// Steps already executed in this trial.
    pub steps_done: usize,
    pub iterative: bool,
}

/// Contents of every `<screen>` block, in order.
fn screen_blocks(text: &str) -> Vec<&str> {
    let mut blocks = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("<screen>\n") {
        let body = &rest[start + "<screen>\n".len()..];
        let Some(end) = body.find("</screen>") else { break };
        blocks.push(body[..end].trim_end_matches('\n'));
        rest = &body[end..];
    }
    blocks
}

fn line_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.lines().find_map(|l| l.strip_prefix(marker))
}

pub fn parse_plan_prompt(text: &str) -> Option<PlanView> {
    let goal = line_after(text, GOAL_LINE)?.to_string();
    let screen = CompactScreen::parse(screen_blocks(text).last()?).ok()?;
    let iterative = text.ends_with(ITERATIVE_PLAN_SUFFIX);
    let steps_done = if iterative {
        text.lines().filter(|l| l.starts_with("Your index=")).count()
    } else {
        let after = text.split_once(HISTORY_HEAD).map(|(_, h)| h).unwrap_or("");
        after.lines().filter(|l| l.starts_with("- ")).count()
    };
    Some(PlanView { goal, screen, steps_done, iterative })
}

pub fn parse_summarize_prompt(text: &str) -> Option<(CompactScreen, ActionCommand)> {
    let screen = CompactScreen::parse(screen_blocks(text).first()?).ok()?;
    let (_, after) = text.split_once("And the action taken is:\n")?;
    let action = parse_action(after.lines().next()?).ok()?;
    Some((screen, action))
}

/// Structured view of a reflection prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectView {
    pub task_name: String,
    pub goal: String,
    pub actions: Vec<ActionCommand>,
}

pub fn parse_reflect_prompt(text: &str) -> Option<ReflectView> {
    let head = line_after(text, "You are operating a computer for a task: ")?;
    let task_name = head.split_once(". You went over")?.0.to_string();
    let goal = line_after(text, REFLECT_GOAL_LINE)?.to_string();
    let mut actions = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix("Your index=") else { continue };
        let (_, action) = rest.split_once(" action: ")?;
        actions.push(parse_action(action).ok()?);
    }
    Some(ReflectView { task_name, goal, actions })
}

//! Reference policy used by the scripted backends.
//!
//! The oracle sees the task blueprint (seeded content and handles, never live
//! widget state) plus the compact screen the agent would see, and returns the
//! actions executable on that screen alone: anything that needs an element
//! not yet shown is left for the next screen. On a finished screen it returns
//! nothing.

use crate::action::{ActionCommand, Key};
use crate::compact::CompactScreen;
use crate::dom::Handle;

use super::{TaskData, TaskInstance};

fn click(h: Handle) -> ActionCommand {
    ActionCommand::Click { id: h.0 }
}

fn enter(h: Handle, text: &str) -> ActionCommand {
    ActionCommand::Type { id: h.0, text: text.to_string() }
}

fn press(key: Key, count: usize) -> ActionCommand {
    ActionCommand::KeyPress { key, count: count as u32 }
}

fn value_on(screen: &CompactScreen, h: Handle) -> String {
    screen.element(h.0).and_then(|e| e.value.clone()).unwrap_or_default()
}

/// Steps that turn the field's current value into `want`. `focused` says
/// whether key presses already reach the field.
fn fill(field: Handle, have: &str, want: &str, focused: bool, plan: &mut Vec<ActionCommand>) {
    if have == want {
        return;
    }
    if let Some(rest) = want.strip_prefix(have) {
        plan.push(enter(field, rest));
        return;
    }
    if !focused {
        plan.push(click(field));
    }
    plan.push(press(Key::Backspace, have.chars().count()));
    plan.push(enter(field, want));
}

pub fn oracle_plan(blueprint: &TaskInstance, screen: &CompactScreen) -> Vec<ActionCommand> {
    if screen.contains_id(blueprint.banner.0) || screen.elements.is_empty() {
        return Vec::new();
    }
    let mut plan = Vec::new();
    match &blueprint.data {
        TaskData::ClickButton { target } | TaskData::ClickWidget { target } => plan.push(click(*target)),
        TaskData::ClickCheckboxes { boxes, goal, submit } => {
            for b in boxes {
                let checked = screen.element(b.0).and_then(|e| e.value.as_deref()) == Some("true");
                if checked != goal.contains(b) {
                    plan.push(click(*b));
                }
            }
            plan.push(click(*submit));
        }
        TaskData::LoginUser { username, password, user_field, pass_field, submit } => {
            fill(*user_field, &value_on(screen, *user_field), username, false, &mut plan);
            fill(*pass_field, &value_on(screen, *pass_field), password, false, &mut plan);
            plan.push(click(*submit));
        }
        TaskData::ClickTab { tabs, target } => {
            if screen.contains_id(target.0) {
                plan.push(click(*target));
            } else if let Some((header, _, _)) = tabs.iter().find(|(_, _, links)| links.contains(target)) {
                plan.push(click(*header));
            }
        }
        TaskData::SearchEngine { query, input, header, results, page_links, target, .. } => {
            let heading = screen.element(header.0).and_then(|e| e.text.clone());
            if heading.as_deref() != Some(format!("Results for {query}").as_str()) {
                // Only typing gives the box a value, and typing leaves it focused.
                let have = value_on(screen, *input);
                fill(*input, &have, query, !have.is_empty(), &mut plan);
                plan.push(click(Handle(input.0 + 1)));
                return plan;
            }
            let goal = results[*target];
            if screen.contains_id(goal.0) {
                plan.push(click(goal));
            } else {
                plan.push(click(page_links[*target / super::tasks::RESULTS_PER_PAGE]));
            }
        }
        TaskData::Autocomplete { input, items, submit, target, prefix, .. } => {
            let goal_item = items
                .iter()
                .copied()
                .find(|h| blueprint.tree.get(*h).and_then(|n| n.attrs.text.as_deref()) == Some(target.as_str()))
                .expect("target is a completion item");
            let open: Vec<_> =
                screen.elements.iter().filter(|e| e.id.is_some_and(|id| items.contains(&Handle(id)))).collect();
            let have = value_on(screen, *input);
            if have == *target && open.is_empty() {
                plan.push(click(*submit));
            } else if let Some(p) = open.iter().position(|e| e.id == Some(goal_item.0)) {
                let current =
                    open.iter().position(|e| e.class.as_deref().is_some_and(|c| c.contains("ui-state-active")));
                match current {
                    None => plan.push(press(Key::ArrowDown, p + 1)),
                    Some(i) if p > i => plan.push(press(Key::ArrowDown, p - i)),
                    Some(i) if p < i => plan.push(press(Key::ArrowUp, i - p)),
                    Some(_) => {}
                }
                plan.push(press(Key::Enter, 1));
                plan.push(click(*submit));
            } else {
                fill(*input, &have, prefix, !have.is_empty(), &mut plan);
            }
        }
    }
    plan
}

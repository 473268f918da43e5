//! Deterministic, seeded task environments.
//!
//! Every task is a small state machine over a [`DomTree`]. Content that a user
//! could only see after a UI action (inactive tab panes, unrequested search
//! results, the completion list) exists in the tree but stays hidden until the
//! revealing event is applied.

mod layout;
pub mod oracle;
mod tasks;
pub mod words;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::action::{GroundedEvent, Key};
use crate::dom::{Behavior, DomTree, Handle, Rect};

pub use tasks::click_checkboxes_with;

/// Default viewport, width x height in px.
pub const VIEWPORT: Rect = Rect::new(0.0, 0.0, 160.0, 210.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskCategory {
    #[serde(rename = "1-screen-1-step")]
    OneScreenOneStep,
    #[serde(rename = "1-screen-n-step")]
    OneScreenNStep,
    #[serde(rename = "n-screen-n-step")]
    NScreenNStep,
}

impl TaskCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskCategory::OneScreenOneStep => "1-screen-1-step",
            TaskCategory::OneScreenNStep => "1-screen-n-step",
            TaskCategory::NScreenNStep => "n-screen-n-step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub success: bool,
}

/// Seeded content and live widget state of one task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskData {
    ClickButton {
        target: Handle,
    },
    ClickWidget {
        target: Handle,
    },
    ClickCheckboxes {
        boxes: Vec<Handle>,
        goal: BTreeSet<Handle>,
        submit: Handle,
    },
    LoginUser {
        username: String,
        password: String,
        user_field: Handle,
        pass_field: Handle,
        submit: Handle,
    },
    ClickTab {
        /// (tab header, pane, links in pane)
        tabs: Vec<(Handle, Handle, Vec<Handle>)>,
        target: Handle,
    },
    SearchEngine {
        query: String,
        input: Handle,
        results_box: Handle,
        header: Handle,
        results: Vec<Handle>,
        page_links: Vec<Handle>,
        /// 0-based position of the goal result.
        target: usize,
        searched: Option<String>,
    },
    Autocomplete {
        input: Handle,
        list: Handle,
        items: Vec<Handle>,
        submit: Handle,
        target: String,
        prefix: String,
        suffix: String,
        highlight: Option<Handle>,
        committed: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("unknown task {0:?}")]
    UnknownTask(String),
    #[error("task instance already reached a terminal state")]
    AlreadyTerminal,
}

/// Registry entry for a built-in task.
pub struct TaskInfo {
    pub name: &'static str,
    pub category: TaskCategory,
    pub brief: &'static str,
    generate: fn(u64) -> TaskInstance,
}

pub static TASKS: &[TaskInfo] = &[
    TaskInfo {
        name: "click-button",
        category: TaskCategory::OneScreenOneStep,
        brief: "click the button whose label the goal names",
        generate: tasks::click_button,
    },
    TaskInfo {
        name: "click-widget",
        category: TaskCategory::OneScreenOneStep,
        brief: "click the widget of the requested kind",
        generate: tasks::click_widget,
    },
    TaskInfo {
        name: "click-checkboxes",
        category: TaskCategory::OneScreenNStep,
        brief: "check exactly the named boxes, then submit",
        generate: tasks::click_checkboxes,
    },
    TaskInfo {
        name: "login-user",
        category: TaskCategory::OneScreenNStep,
        brief: "fill username and password, then press login",
        generate: tasks::login_user,
    },
    TaskInfo {
        name: "click-tab-2",
        category: TaskCategory::NScreenNStep,
        brief: "switch tabs to find and click a named link",
        generate: tasks::click_tab_2,
    },
    TaskInfo {
        name: "search-engine",
        category: TaskCategory::NScreenNStep,
        brief: "search a query and click the n-th result across pages",
        generate: tasks::search_engine,
    },
    TaskInfo {
        name: "use-autocomplete",
        category: TaskCategory::NScreenNStep,
        brief: "type a prefix and pick the matching completion",
        generate: tasks::use_autocomplete,
    },
];

pub fn task_info(name: &str) -> Option<&'static TaskInfo> {
    TASKS.iter().find(|t| t.name == name)
}

/// Builds the `(task, seed)` instance. Reproducible bit-for-bit.
pub fn instantiate(task_name: &str, seed: u64) -> Result<TaskInstance, EnvError> {
    let info = task_info(task_name).ok_or_else(|| EnvError::UnknownTask(task_name.to_string()))?;
    Ok((info.generate)(seed))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskInstance {
    pub task_name: String,
    pub seed: u64,
    pub category: TaskCategory,
    pub goal: String,
    pub tree: DomTree,
    pub data: TaskData,
    /// Container holding all task widgets; hidden once the episode ends.
    pub(crate) area: Handle,
    /// "Done" banner revealed once the episode ends.
    pub(crate) banner: Handle,
    terminal: Option<Verdict>,
}

impl TaskInstance {
    pub(crate) fn new(
        task_name: &str,
        seed: u64,
        goal: String,
        tree: DomTree,
        data: TaskData,
        area: Handle,
        banner: Handle,
    ) -> Self {
        let category = task_info(task_name).map(|t| t.category).expect("registered task");
        TaskInstance {
            task_name: task_name.to_string(),
            seed,
            category,
            goal,
            tree,
            data,
            area,
            banner,
            terminal: None,
        }
    }

    pub fn viewport(&self) -> Rect {
        self.tree.viewport
    }

    pub fn is_terminal(&self) -> bool {
        self.terminal.is_some()
    }

    /// Terminal verdict, if a submit or commit behavior has fired.
    pub fn evaluate(&self) -> Option<Verdict> {
        self.terminal
    }

    /// Applies events in order. Events after the one that ends the episode are
    /// dropped.
    pub fn apply(&mut self, events: &[GroundedEvent]) -> Result<(), EnvError> {
        if self.is_terminal() {
            return Err(EnvError::AlreadyTerminal);
        }
        for ev in events {
            if self.is_terminal() {
                break;
            }
            match *ev {
                GroundedEvent::ElementClick { handle } => self.click(handle),
                GroundedEvent::KeyDown { key } => self.key_down(key),
                GroundedEvent::KeyUp { .. } => {}
                GroundedEvent::CharInput { ch } => self.char_input(ch),
            }
        }
        Ok(())
    }

    fn finish(&mut self, success: bool) {
        self.terminal = Some(Verdict { success });
        self.tree.focus = None;
        if let Some(area) = self.tree.get_mut(self.area) {
            area.hidden = true;
        }
        if let Some(banner) = self.tree.get_mut(self.banner) {
            banner.hidden = false;
        }
    }

    fn click(&mut self, handle: Handle) {
        if !self.tree.is_visible(handle) {
            return;
        }
        let Some(behavior) = self.tree.get(handle).and_then(|n| n.behavior.clone()) else {
            return;
        };
        match behavior {
            Behavior::TogglesCheckbox => {
                let node = self.tree.get_mut(handle).expect("visible node exists");
                let checked = node.attrs.value.as_deref() == Some("true");
                node.attrs.value = Some(if checked { "false" } else { "true" }.to_string());
            }
            Behavior::FocusesInput | Behavior::OpensAutocomplete => self.tree.focus = Some(handle),
            Behavior::CommitsCompletion => self.commit_completion(handle),
            Behavior::ActivatesTab { pane } => self.activate_tab(handle, pane),
            Behavior::RunsSearch => self.run_search(),
            Behavior::ShowsPage { page } => self.show_page(page),
            Behavior::SubmitsForm => {
                let ok = self.form_success();
                self.finish(ok);
            }
            Behavior::EndsWithChoice => {
                let ok = self.choice_success(handle);
                self.finish(ok);
            }
        }
    }

    fn key_down(&mut self, key: Key) {
        let Some(focus) = self.tree.focus else { return };
        let behavior = self.tree.get(focus).and_then(|n| n.behavior.clone());
        match (key, behavior) {
            (Key::Backspace, Some(Behavior::FocusesInput | Behavior::OpensAutocomplete)) => {
                let mut value = self.value_of(focus);
                if value.pop().is_some() {
                    self.set_value(focus, value);
                }
            }
            (Key::Tab, _) => {
                let inputs: Vec<Handle> = self
                    .tree
                    .nodes()
                    .into_iter()
                    .filter(|n| matches!(n.behavior, Some(Behavior::FocusesInput | Behavior::OpensAutocomplete)))
                    .map(|n| n.handle)
                    .filter(|h| self.tree.is_visible(*h))
                    .collect();
                if let Some(pos) = inputs.iter().position(|h| *h == focus) {
                    self.tree.focus = Some(inputs[(pos + 1) % inputs.len()]);
                }
            }
            (Key::ArrowDown | Key::ArrowUp | Key::Enter, Some(Behavior::OpensAutocomplete)) => {
                self.autocomplete_key(key)
            }
            _ => {}
        }
    }

    fn char_input(&mut self, ch: char) {
        let Some(focus) = self.tree.focus else { return };
        let editable = matches!(
            self.tree.get(focus).and_then(|n| n.behavior.as_ref()),
            Some(Behavior::FocusesInput | Behavior::OpensAutocomplete)
        );
        if editable {
            let mut value = self.value_of(focus);
            value.push(ch);
            self.set_value(focus, value);
        }
    }

    fn value_of(&self, handle: Handle) -> String {
        self.tree.get(handle).and_then(|n| n.attrs.value.clone()).unwrap_or_default()
    }

    // Empty values are stored as absent so they never render.
    fn set_value(&mut self, handle: Handle, value: String) {
        if let Some(node) = self.tree.get_mut(handle) {
            node.attrs.value = (!value.is_empty()).then_some(value);
        }
        if let TaskData::Autocomplete { input, committed, .. } = &mut self.data {
            if *input == handle {
                *committed = None;
                self.refilter_completions();
            }
        }
    }

    fn activate_tab(&mut self, header: Handle, pane: Handle) {
        let parent_of =
            |tree: &DomTree, h: Handle| tree.ancestry(h).and_then(|path| path.len().checked_sub(2).map(|i| path[i]));
        if let Some(header_row) = parent_of(&self.tree, header) {
            for sibling in &mut self.tree.get_mut(header_row).expect("parent exists").children {
                if matches!(sibling.behavior, Some(Behavior::ActivatesTab { .. })) {
                    let active = sibling.handle == header;
                    sibling.attrs.class = Some(if active { "tab active" } else { "tab" }.to_string());
                }
            }
        }
        if let Some(pane_row) = parent_of(&self.tree, pane) {
            for sibling in &mut self.tree.get_mut(pane_row).expect("parent exists").children {
                sibling.hidden = sibling.handle != pane;
            }
        }
    }

    fn run_search(&mut self) {
        let TaskData::SearchEngine { input, results_box, header, searched, .. } = &mut self.data else {
            return;
        };
        let (input, results_box, header) = (*input, *results_box, *header);
        let typed = self.tree.get(input).and_then(|n| n.attrs.value.clone()).unwrap_or_default();
        if typed.trim().is_empty() {
            return;
        }
        *searched = Some(typed.clone());
        if let Some(node) = self.tree.get_mut(header) {
            node.attrs.text = Some(format!("Results for {typed}"));
        }
        if let Some(node) = self.tree.get_mut(results_box) {
            node.hidden = false;
        }
        self.show_page(1);
    }

    fn show_page(&mut self, page: usize) {
        let TaskData::SearchEngine { results, page_links, .. } = &self.data else { return };
        let (results, page_links) = (results.clone(), page_links.clone());
        for (i, h) in results.iter().enumerate() {
            if let Some(node) = self.tree.get_mut(*h) {
                node.hidden = i / tasks::RESULTS_PER_PAGE + 1 != page;
            }
        }
        for (i, h) in page_links.iter().enumerate() {
            if let Some(node) = self.tree.get_mut(*h) {
                node.attrs.class = Some(if i + 1 == page { "page active" } else { "page" }.to_string());
            }
        }
    }

    fn refilter_completions(&mut self) {
        let TaskData::Autocomplete { input, list, items, highlight, .. } = &mut self.data else {
            return;
        };
        *highlight = None;
        let (input, list, items) = (*input, *list, items.clone());
        let typed = self.value_of(input).to_lowercase();
        let mut shown = 0usize;
        for h in &items {
            let node = self.tree.get_mut(*h).expect("completion item exists");
            let text = node.attrs.text.clone().unwrap_or_default().to_lowercase();
            let visible = !typed.is_empty() && text.starts_with(&typed);
            node.hidden = !visible;
            node.attrs.class = Some("ui-menu-item".to_string());
            if visible {
                node.bbox = layout::completion_slot(shown);
                shown += 1;
            }
        }
        if let Some(node) = self.tree.get_mut(list) {
            node.hidden = shown == 0;
        }
    }

    fn autocomplete_key(&mut self, key: Key) {
        let TaskData::Autocomplete { list, items, highlight, .. } = &self.data else { return };
        if !self.tree.is_visible(*list) {
            return;
        }
        let visible: Vec<Handle> = items.iter().copied().filter(|h| self.tree.is_visible(*h)).collect();
        let current = highlight.and_then(|h| visible.iter().position(|v| *v == h));
        let next = match (key, current) {
            (Key::ArrowDown, None) => visible.first().copied(),
            (Key::ArrowDown, Some(i)) => Some(visible[(i + 1).min(visible.len() - 1)]),
            (Key::ArrowUp, None) => None,
            (Key::ArrowUp, Some(i)) => Some(visible[i.saturating_sub(1)]),
            (Key::Enter, _) => {
                if let Some(h) = *highlight {
                    self.commit_completion(h);
                }
                return;
            }
            _ => return,
        };
        for h in &visible {
            let node = self.tree.get_mut(*h).expect("completion item exists");
            let active = Some(*h) == next;
            node.attrs.class = Some(if active { "ui-menu-item ui-state-active" } else { "ui-menu-item" }.to_string());
        }
        if let TaskData::Autocomplete { highlight, .. } = &mut self.data {
            *highlight = next;
        }
    }

    fn commit_completion(&mut self, item: Handle) {
        let TaskData::Autocomplete { input, .. } = &self.data else { return };
        let input = *input;
        let text = self.tree.get(item).and_then(|n| n.attrs.text.clone()).unwrap_or_default();
        self.set_value(input, text.clone());
        if let TaskData::Autocomplete { list, items, committed, .. } = &mut self.data {
            *committed = Some(text);
            for h in items.iter().chain(std::iter::once(&*list)) {
                if let Some(node) = self.tree.get_mut(*h) {
                    node.hidden = true;
                    if *h != *list {
                        node.attrs.class = Some("ui-menu-item".to_string());
                    }
                }
            }
        }
    }

    fn form_success(&self) -> bool {
        match &self.data {
            TaskData::ClickCheckboxes { boxes, goal, .. } => {
                let checked: BTreeSet<Handle> = boxes
                    .iter()
                    .copied()
                    .filter(|h| self.tree.get(*h).and_then(|n| n.attrs.value.as_deref()) == Some("true"))
                    .collect();
                &checked == goal
            }
            TaskData::LoginUser { username, password, user_field, pass_field, .. } => {
                self.value_of(*user_field) == *username && self.value_of(*pass_field) == *password
            }
            TaskData::Autocomplete { input, target, committed, .. } => {
                committed.as_deref() == Some(target.as_str()) && self.value_of(*input) == *target
            }
            _ => false,
        }
    }

    fn choice_success(&self, chosen: Handle) -> bool {
        match &self.data {
            TaskData::ClickButton { target } | TaskData::ClickWidget { target } => chosen == *target,
            TaskData::ClickTab { target, .. } => chosen == *target,
            TaskData::SearchEngine { query, results, target, searched, .. } => {
                results.get(*target) == Some(&chosen) && searched.as_deref().map(str::trim) == Some(query.as_str())
            }
            _ => false,
        }
    }

    /// Strings that must stay out of the visible tree until revealed: inactive
    /// tab links, unrequested or off-page results, closed completions.
    pub fn hidden_payloads(&self) -> Vec<String> {
        let texts = |hs: &mut dyn Iterator<Item = Handle>| -> Vec<String> {
            hs.filter(|h| !self.tree.is_visible(*h))
                .filter_map(|h| self.tree.get(h).and_then(|n| n.attrs.text.clone()))
                .collect()
        };
        match &self.data {
            TaskData::ClickTab { tabs, .. } => texts(&mut tabs.iter().flat_map(|(_, _, links)| links.iter().copied())),
            TaskData::SearchEngine { results, .. } => texts(&mut results.iter().copied()),
            TaskData::Autocomplete { items, .. } => texts(&mut items.iter().copied()),
            _ => Vec::new(),
        }
    }
}

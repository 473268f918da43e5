//! Ground-truth element tree behind every screen.
//!
//! A [`DomTree`] is what the simulator mutates; the agent never sees it
//! directly, only the compact rendering produced by [`crate::compact`].

use std::fmt;

use serde::{Deserialize, Serialize};

/// Stable element handle. Assigned once per task instance, in document order,
/// and reused as the element id shown to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Handle(pub u32);

impl fmt::Display for Handle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "h{}", self.0)
    }
}

/// Axis-aligned rectangle in CSS pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, width: f64, height: f64) -> Self {
        Rect { x, y, width, height }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.width / 2.0, self.y + self.height / 2.0)
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Rect {
        Rect::new(self.x + dx, self.y + dy, self.width, self.height)
    }
}

/// The attribute subset the compactor cares about.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attrs {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placeholder: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
}

/// Event-handler token attached to interactive nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Behavior {
    /// Flips the node's `value` between `"false"` and `"true"`.
    TogglesCheckbox,
    /// Text field; takes focus when clicked.
    FocusesInput,
    /// Text field that drives a completion list once it holds a character.
    OpensAutocomplete,
    /// Entry of a completion list; clicking commits it.
    CommitsCompletion,
    /// Tab header; reveals `pane` and hides the sibling panes.
    ActivatesTab { pane: Handle },
    /// Runs the search in the task's query field and reveals results.
    RunsSearch,
    /// Pagination link for a result list (1-based page number).
    ShowsPage { page: usize },
    /// Ends the episode and evaluates the task predicate over form state.
    SubmitsForm,
    /// Ends the episode; success iff this node is the one the goal names.
    EndsWithChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomNode {
    pub tag: String,
    pub handle: Handle,
    #[serde(default)]
    pub attrs: Attrs,
    #[serde(default)]
    pub hidden: bool,
    pub bbox: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub behavior: Option<Behavior>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<DomNode>,
}

impl DomNode {
    pub fn new(tag: impl Into<String>, handle: Handle, bbox: Rect) -> Self {
        DomNode {
            tag: tag.into(),
            handle,
            attrs: Attrs::default(),
            hidden: false,
            bbox,
            behavior: None,
            children: Vec::new(),
        }
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.attrs.text = Some(text.into());
        self
    }

    pub fn with_class(mut self, class: impl Into<String>) -> Self {
        self.attrs.class = Some(class.into());
        self
    }

    pub fn with_placeholder(mut self, placeholder: impl Into<String>) -> Self {
        self.attrs.placeholder = Some(placeholder.into());
        self
    }

    pub fn with_value(mut self, value: impl Into<String>) -> Self {
        self.attrs.value = Some(value.into());
        self
    }

    pub fn with_behavior(mut self, behavior: Behavior) -> Self {
        self.behavior = Some(behavior);
        self
    }

    pub fn hidden(mut self, hidden: bool) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_children(mut self, children: Vec<DomNode>) -> Self {
        self.children = children;
        self
    }

    fn find(&self, handle: Handle) -> Option<&DomNode> {
        if self.handle == handle {
            return Some(self);
        }
        self.children.iter().find_map(|c| c.find(handle))
    }

    fn find_mut(&mut self, handle: Handle) -> Option<&mut DomNode> {
        if self.handle == handle {
            return Some(self);
        }
        self.children.iter_mut().find_map(|c| c.find_mut(handle))
    }

    fn visit<'a>(&'a self, out: &mut Vec<&'a DomNode>) {
        out.push(self);
        for c in &self.children {
            c.visit(out);
        }
    }

    fn visible_clone(&self) -> Option<DomNode> {
        if self.hidden {
            return None;
        }
        let mut node = self.clone();
        node.children = self.children.iter().filter_map(DomNode::visible_clone).collect();
        Some(node)
    }

    fn path_to(&self, handle: Handle, path: &mut Vec<Handle>) -> bool {
        path.push(self.handle);
        if self.handle == handle || self.children.iter().any(|c| c.path_to(handle, path)) {
            return true;
        }
        path.pop();
        false
    }
}

/// A full element tree plus the page-level state that is part of the raw
/// screen (viewport geometry and keyboard focus).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomTree {
    pub viewport: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub focus: Option<Handle>,
    pub root: DomNode,
}

impl DomTree {
    pub fn new(viewport: Rect, root: DomNode) -> Self {
        DomTree { viewport, focus: None, root }
    }

    pub fn get(&self, handle: Handle) -> Option<&DomNode> {
        self.root.find(handle)
    }

    pub fn get_mut(&mut self, handle: Handle) -> Option<&mut DomNode> {
        self.root.find_mut(handle)
    }

    /// All nodes in document (pre-)order.
    pub fn nodes(&self) -> Vec<&DomNode> {
        let mut out = Vec::new();
        self.root.visit(&mut out);
        out
    }

    /// Handles from the root down to `handle`, inclusive. `None` if absent.
    pub fn ancestry(&self, handle: Handle) -> Option<Vec<Handle>> {
        let mut path = Vec::new();
        self.root.path_to(handle, &mut path).then_some(path)
    }

    /// A node is visible iff neither it nor any ancestor is hidden.
    pub fn is_visible(&self, handle: Handle) -> bool {
        match self.ancestry(handle) {
            Some(path) => path.iter().all(|h| self.get(*h).is_some_and(|n| !n.hidden)),
            None => false,
        }
    }

    /// Byte-stable serialization of the whole tree, hidden parts included.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("dom trees always serialize")
    }

    /// The tree with every hidden subtree pruned.
    pub fn visible_tree(&self) -> Option<DomTree> {
        let root = self.root.visible_clone()?;
        Some(DomTree { viewport: self.viewport, focus: self.focus, root })
    }

    /// Canonical serialization of [`DomTree::visible_tree`]; empty if the root
    /// itself is hidden.
    pub fn visible_canonical(&self) -> String {
        self.visible_tree().map(|t| t.canonical()).unwrap_or_default()
    }

    pub fn from_json(text: &str) -> Result<DomTree, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Checks handle uniqueness.
    pub fn validate(&self) -> Result<(), DomError> {
        let mut seen = std::collections::HashSet::new();
        for node in self.nodes() {
            if !seen.insert(node.handle) {
                return Err(DomError::DuplicateHandle(node.handle));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DomError {
    #[error("handle {0} appears more than once")]
    DuplicateHandle(Handle),
}

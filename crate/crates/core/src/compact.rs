//! Compact screen representation: one pseudo-HTML line per visible leaf.
//!
//! Each line has the form
//!
//! ```text
//! <tag id=N class="..." text="..." placeholder="..." value="..." position=ROW-COL>
//! ```
//!
//! with attributes in that fixed order and absent attributes omitted. Ids are
//! the stable element handles, so a rendering of the same tree is byte-identical
//! across calls. Elements listed in the disabled set keep every attribute except
//! `id`, which leaves them readable but not addressable.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dom::{DomNode, DomTree, Handle, Rect};
use crate::quoting::{quote, read_quoted};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Row {
    Top,
    Middle,
    Bottom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Col {
    Left,
    Center,
    Right,
}

/// One cell of the 3x3 screen grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GridPosition {
    pub row: Row,
    pub col: Col,
}

impl GridPosition {
    pub fn row_index(&self) -> usize {
        self.row as usize
    }

    pub fn col_index(&self) -> usize {
        self.col as usize
    }
}

impl fmt::Display for GridPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = match self.row {
            Row::Top => "top",
            Row::Middle => "middle",
            Row::Bottom => "bottom",
        };
        let col = match self.col {
            Col::Left => "left",
            Col::Center => "center",
            Col::Right => "right",
        };
        write!(f, "{row}-{col}")
    }
}

impl std::str::FromStr for GridPosition {
    type Err = CompactParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || CompactParseError::BadPosition(s.to_string());
        let (row, col) = s.split_once('-').ok_or_else(bad)?;
        let row = match row {
            "top" => Row::Top,
            "middle" => Row::Middle,
            "bottom" => Row::Bottom,
            _ => return Err(bad()),
        };
        let col = match col {
            "left" => Col::Left,
            "center" => Col::Center,
            "right" => Col::Right,
            _ => return Err(bad()),
        };
        Ok(GridPosition { row, col })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("viewport has zero area ({width}x{height})")]
    EmptyViewport { width: f64, height: f64 },
}

// Cell index along one axis. Points exactly on a cell boundary belong to the
// lower-index cell.
fn cell(offset: f64, extent: f64) -> usize {
    let scaled = (3.0 * offset / extent).ceil() - 1.0;
    scaled.clamp(0.0, 2.0) as usize
}

/// Grid cell holding the center of `bbox` within `viewport`.
pub fn assign_grid(bbox: &Rect, viewport: &Rect) -> Result<GridPosition, GridError> {
    if viewport.width <= 0.0 || viewport.height <= 0.0 {
        return Err(GridError::EmptyViewport { width: viewport.width, height: viewport.height });
    }
    let (cx, cy) = bbox.center();
    let row = [Row::Top, Row::Middle, Row::Bottom][cell(cy - viewport.y, viewport.height)];
    let col = [Col::Left, Col::Center, Col::Right][cell(cx - viewport.x, viewport.width)];
    Ok(GridPosition { row, col })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactElement {
    pub id: Option<u32>,
    pub tag: String,
    pub class: Option<String>,
    pub text: Option<String>,
    pub placeholder: Option<String>,
    pub value: Option<String>,
    pub position: GridPosition,
}

impl CompactElement {
    pub fn handle(&self) -> Option<Handle> {
        self.id.map(Handle)
    }
}

impl fmt::Display for CompactElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}", self.tag)?;
        if let Some(id) = self.id {
            write!(f, " id={id}")?;
        }
        for (name, value) in
            [("class", &self.class), ("text", &self.text), ("placeholder", &self.placeholder), ("value", &self.value)]
        {
            if let Some(v) = value {
                write!(f, " {name}={}", quote(v))?;
            }
        }
        write!(f, " position={}>", self.position)
    }
}

/// The agent-facing screen.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompactScreen {
    pub elements: Vec<CompactElement>,
}

impl CompactScreen {
    pub fn element(&self, id: u32) -> Option<&CompactElement> {
        self.elements.iter().find(|e| e.id == Some(id))
    }

    pub fn contains_id(&self, id: u32) -> bool {
        self.element(id).is_some()
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.elements.iter().filter_map(|e| e.id)
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Parses the canonical text form back into elements.
    pub fn parse(text: &str) -> Result<CompactScreen, CompactParseError> {
        let elements =
            text.lines().map(str::trim).filter(|l| !l.is_empty()).map(parse_element).collect::<Result<_, _>>()?;
        Ok(CompactScreen { elements })
    }
}

impl fmt::Display for CompactScreen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CompactParseError {
    #[error("malformed element line: {0}")]
    BadLine(String),
    #[error("bad grid position {0:?}")]
    BadPosition(String),
}

fn parse_element(line: &str) -> Result<CompactElement, CompactParseError> {
    let bad = || CompactParseError::BadLine(line.to_string());
    let body = line.strip_prefix('<').ok_or_else(bad)?;
    let tag_end = body.find([' ', '>']).ok_or_else(bad)?;
    let tag = &body[..tag_end];
    if tag.is_empty() {
        return Err(bad());
    }
    let mut el = CompactElement {
        id: None,
        tag: tag.to_string(),
        class: None,
        text: None,
        placeholder: None,
        value: None,
        position: GridPosition { row: Row::Top, col: Col::Left },
    };
    let mut rest = body[tag_end..].trim_start();
    let mut saw_position = false;
    while !rest.starts_with('>') {
        let (name, after) = rest.split_once('=').ok_or_else(bad)?;
        if after.starts_with('"') {
            let (value, tail) = read_quoted(after).map_err(|_| bad())?;
            match name {
                "class" => el.class = Some(value),
                "text" => el.text = Some(value),
                "placeholder" => el.placeholder = Some(value),
                "value" => el.value = Some(value),
                _ => return Err(bad()),
            }
            rest = tail.trim_start();
        } else {
            let end = after.find([' ', '>']).ok_or_else(bad)?;
            let raw = &after[..end];
            match name {
                "id" => el.id = Some(raw.parse().map_err(|_| bad())?),
                "position" => {
                    el.position = raw.parse()?;
                    saw_position = true;
                }
                _ => return Err(bad()),
            }
            rest = after[end..].trim_start();
        }
    }
    if !saw_position || rest != ">" {
        return Err(bad());
    }
    Ok(el)
}

fn flatten(text: &Option<String>) -> Option<String> {
    text.as_ref().map(|t| t.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn collect_leaves(node: &DomNode, viewport: &Rect, disabled: &HashSet<Handle>, out: &mut Vec<CompactElement>) {
    if node.hidden {
        return;
    }
    let visible_children: Vec<&DomNode> = node.children.iter().filter(|c| !c.hidden).collect();
    if visible_children.is_empty() {
        // Geometry never hides an element; a bbox outside the viewport clamps
        // to the nearest edge cell.
        let position = assign_grid(&node.bbox, viewport).unwrap_or(GridPosition { row: Row::Top, col: Col::Left });
        out.push(CompactElement {
            id: (!disabled.contains(&node.handle)).then_some(node.handle.0),
            tag: node.tag.clone(),
            class: flatten(&node.attrs.class),
            text: flatten(&node.attrs.text),
            placeholder: flatten(&node.attrs.placeholder),
            value: flatten(&node.attrs.value),
            position,
        });
        return;
    }
    for child in visible_children {
        collect_leaves(child, viewport, disabled, out);
    }
}

/// Renders the visible leaves of `tree`; handles in `disabled` lose their id.
pub fn compact(tree: &DomTree, disabled: &HashSet<Handle>) -> CompactScreen {
    let mut elements = Vec::new();
    collect_leaves(&tree.root, &tree.viewport, disabled, &mut elements);
    CompactScreen { elements }
}

/// Raw-screen equality: compares the full trees, hidden parts and typed
/// values included.
pub fn screens_equal(a: &DomTree, b: &DomTree) -> bool {
    a.canonical() == b.canonical()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dom::Behavior;

    const VP: Rect = Rect::new(0.0, 0.0, 160.0, 210.0);

    fn at(cx: f64, cy: f64) -> Rect {
        Rect::new(cx - 1.0, cy - 1.0, 2.0, 2.0)
    }

    fn ok_tree() -> DomTree {
        let root =
            DomNode::new("body", Handle(0), VP)
                .with_children(vec![DomNode::new("button", Handle(5), at(80.0, 105.0)).with_text("OK")]);
        DomTree::new(VP, root)
    }

    #[test]
    fn single_button() {
        let screen = compact(&ok_tree(), &HashSet::new());
        assert_eq!(screen.to_text(), r#"<button id=5 text="OK" position=middle-center>"#);
    }

    #[test]
    fn disabled_button_loses_only_its_id() {
        let screen = compact(&ok_tree(), &HashSet::from([Handle(5)]));
        assert_eq!(screen.to_text(), r#"<button text="OK" position=middle-center>"#);
    }

    #[test]
    fn stale_disabled_handles_are_ignored() {
        let screen = compact(&ok_tree(), &HashSet::from([Handle(99)]));
        assert_eq!(screen, compact(&ok_tree(), &HashSet::new()));
    }

    #[test]
    fn grid_examples() {
        let g = |cx, cy| assign_grid(&at(cx, cy), &VP).unwrap().to_string();
        assert_eq!(g(80.0, 105.0), "middle-center");
        assert_eq!(g(0.0, 0.0), "top-left");
        assert_eq!(g(159.0, 10.0), "top-right");
        assert_eq!(g(159.0, 209.0), "bottom-right");
    }

    #[test]
    fn grid_boundaries_go_to_lower_cell() {
        let vp = Rect::new(0.0, 0.0, 150.0, 300.0);
        let g = |cx, cy| assign_grid(&at(cx, cy), &vp).unwrap().to_string();
        assert_eq!(g(50.0, 100.0), "top-left");
        assert_eq!(g(100.0, 200.0), "middle-center");
        assert_eq!(g(150.0, 300.0), "bottom-right");
        assert_eq!(g(50.000001, 100.000001), "middle-center");
    }

    #[test]
    fn zero_area_viewport_rejected() {
        let err = assign_grid(&at(1.0, 1.0), &Rect::new(0.0, 0.0, 0.0, 10.0));
        assert!(matches!(err, Err(GridError::EmptyViewport { .. })));
    }

    #[test]
    fn multi_line_text_flattened() {
        let root =
            DomNode::new("body", Handle(0), VP).with_children(vec![
                DomNode::new("span", Handle(1), at(10.0, 10.0)).with_text("  two\n   lines\there ")
            ]);
        let screen = compact(&DomTree::new(VP, root), &HashSet::new());
        assert_eq!(screen.elements[0].text.as_deref(), Some("two lines here"));
    }

    #[test]
    fn container_with_hidden_children_is_a_leaf() {
        let root =
            DomNode::new("body", Handle(0), VP).with_children(vec![DomNode::new("ul", Handle(1), at(10.0, 10.0))
                .with_children(vec![DomNode::new("li", Handle(2), at(10.0, 10.0)).with_text("hidden").hidden(true)])]);
        let screen = compact(&DomTree::new(VP, root), &HashSet::new());
        assert_eq!(screen.to_text(), "<ul id=1 position=top-left>");
    }

    #[test]
    fn parse_round_trip_with_escapes() {
        let root = DomNode::new("body", Handle(0), VP).with_children(vec![
            DomNode::new("input", Handle(3), at(20.0, 20.0))
                .with_class("field")
                .with_placeholder("say \"hi\"")
                .with_value("a > b \\ c")
                .with_behavior(Behavior::FocusesInput),
            DomNode::new("span", Handle(4), at(100.0, 190.0)),
        ]);
        let screen = compact(&DomTree::new(VP, root), &HashSet::from([Handle(4)]));
        let parsed = CompactScreen::parse(&screen.to_text()).unwrap();
        assert_eq!(parsed, screen);
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(CompactScreen::parse("<button id=x position=top-left>").is_err());
        assert!(CompactScreen::parse("<button id=1>").is_err());
        assert!(CompactScreen::parse("button id=1 position=top-left").is_err());
        assert!(CompactScreen::parse(r#"<a text="open position=top-left>"#).is_err());
    }

    #[test]
    fn screens_equal_sees_hidden_state() {
        let a = ok_tree();
        let mut b = ok_tree();
        assert!(screens_equal(&a, &b));
        b.root.children[0].hidden = true;
        assert!(!screens_equal(&a, &b));
    }
}

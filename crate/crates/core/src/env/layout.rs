use crate::dom::{DomNode, DomTree, Handle, Rect};

use super::VIEWPORT;

/// Task widgets live below the 50px goal strip.
pub const AREA: Rect = Rect::new(0.0, 50.0, 160.0, 160.0);
const MARGIN: f64 = 4.0;

/// Hands out handles in document order.
#[derive(Debug, Default)]
pub struct HandleAlloc {
    next: u32,
}

impl HandleAlloc {
    pub fn next(&mut self) -> Handle {
        let h = Handle(self.next);
        self.next += 1;
        h
    }
}

/// `n` full-width rows stacked evenly inside `within`.
pub fn rows(within: Rect, n: usize) -> Vec<Rect> {
    if n == 0 {
        return Vec::new();
    }
    let pitch = (within.height - MARGIN) / n as f64;
    let height = (pitch - 2.0).clamp(1.0, 20.0);
    (0..n)
        .map(|i| {
            Rect::new(within.x + MARGIN, within.y + MARGIN + pitch * i as f64, within.width - 2.0 * MARGIN, height)
        })
        .collect()
}

/// `n` cells side by side inside `row`.
pub fn columns(row: Rect, n: usize) -> Vec<Rect> {
    let width = row.width / n.max(1) as f64;
    (0..n).map(|i| Rect::new(row.x + width * i as f64, row.y, width - 1.0, row.height)).collect()
}

/// Slot for the i-th visible completion under the autocomplete field.
pub fn completion_slot(i: usize) -> Rect {
    let top = AREA.y + 30.0;
    let y = (top + 12.0 * i as f64).min(VIEWPORT.height - 40.0);
    Rect::new(AREA.x + MARGIN, y, 100.0, 11.0)
}

/// Wraps task widgets into the common page skeleton:
/// `body > [div.area > widgets, div.done(hidden)]`.
/// The caller allocates `body` and `area` handles before its widgets; the
/// banner handle comes last to keep document order.
pub fn page(alloc: &mut HandleAlloc, body: Handle, area: Handle, widgets: Vec<DomNode>) -> (DomTree, Handle) {
    let banner = alloc.next();
    let root = DomNode::new("body", body, VIEWPORT).with_children(vec![
        DomNode::new("div", area, AREA).with_class("area").with_children(widgets),
        DomNode::new("div", banner, AREA).with_class("done").with_text("Done").hidden(true),
    ]);
    (DomTree::new(VIEWPORT, root), banner)
}

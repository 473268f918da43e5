//! Seeded generators for the built-in tasks.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::layout::{self, columns, page, rows, HandleAlloc, AREA};
use super::words::{COUNTRIES, NAMES, WORDS};
use super::{TaskData, TaskInstance};
use crate::dom::{Behavior, DomNode, Rect};

pub(crate) const RESULTS_PER_PAGE: usize = 3;
const RESULT_COUNT: usize = 9;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sample<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let mut v = pool.to_vec();
    v.shuffle(rng);
    v.truncate(n);
    v
}

fn capitalize(word: &str) -> String {
    let mut c = word.chars();
    match c.next() {
        Some(first) => first.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn ordinal(n: usize) -> String {
    let suffix = match (n % 10, n % 100) {
        (1, r) if r != 11 => "st",
        (2, r) if r != 12 => "nd",
        (3, r) if r != 13 => "rd",
        _ => "th",
    };
    format!("{n}{suffix}")
}

pub(crate) fn click_button(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let n = rng.gen_range(2..=5);
    let words = sample(&mut rng, WORDS, n + 3);
    let (labels, filler) = words.split_at(n);
    let target_idx = rng.gen_range(0..n);

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let slots = rows(AREA, n + 1);
    let mut widgets = vec![DomNode::new("span", alloc.next(), slots[0]).with_text(filler.join(" "))];
    let mut target = None;
    for (i, label) in labels.iter().enumerate() {
        let h = alloc.next();
        if i == target_idx {
            target = Some(h);
        }
        widgets.push(
            DomNode::new("button", h, slots[i + 1])
                .with_text(capitalize(label))
                .with_behavior(Behavior::EndsWithChoice),
        );
    }
    let (tree, banner) = page(&mut alloc, body, area, widgets);
    let goal = format!("Click on the \"{}\" button.", capitalize(labels[target_idx]));
    TaskInstance::new(
        "click-button",
        seed,
        goal,
        tree,
        TaskData::ClickButton { target: target.expect("target allocated") },
        area,
        banner,
    )
}

const WIDGET_KINDS: [&str; 5] = ["button", "checkbox", "radio", "text", "textarea"];

pub(crate) fn click_widget(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let count = rng.gen_range(3..=5);
    let kinds = sample(&mut rng, &WIDGET_KINDS, count);
    let labels = sample(&mut rng, WORDS, count);
    let target_idx = rng.gen_range(0..count);

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let slots = rows(AREA, count);
    let mut widgets = Vec::new();
    let mut target = None;
    for (i, (kind, label)) in kinds.iter().zip(&labels).enumerate() {
        let h = alloc.next();
        if i == target_idx {
            target = Some(h);
        }
        let node = match *kind {
            "button" => DomNode::new("button", h, slots[i]).with_text(capitalize(label)),
            "checkbox" => DomNode::new("checkbox", h, slots[i]).with_text(*label),
            "radio" => DomNode::new("radio", h, slots[i]).with_text(*label),
            "text" => DomNode::new("input", h, slots[i]).with_class("text"),
            _ => DomNode::new("textarea", h, slots[i]),
        };
        widgets.push(node.with_behavior(Behavior::EndsWithChoice));
    }
    let (tree, banner) = page(&mut alloc, body, area, widgets);
    let goal = format!("Click on a \"{}\" widget.", kinds[target_idx]);
    TaskInstance::new(
        "click-widget",
        seed,
        goal,
        tree,
        TaskData::ClickWidget { target: target.expect("target allocated") },
        area,
        banner,
    )
}

pub(crate) fn click_checkboxes(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let total = rng.gen_range(3..=6);
    let goal_count = rng.gen_range(0..=total);
    click_checkboxes_with(seed.wrapping_add(0x9e37_79b9), total, goal_count)
}

/// A click-checkboxes instance with a chosen box count and goal size.
pub fn click_checkboxes_with(seed: u64, total: usize, goal_count: usize) -> TaskInstance {
    assert!(goal_count <= total && total <= 12, "unsupported checkbox layout");
    let mut rng = rng_for(seed);
    let labels = sample(&mut rng, WORDS, total);
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng);
    let goal_idx: BTreeSet<usize> = order[..goal_count].iter().copied().collect();

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let slots = rows(AREA, total + 1);
    let mut widgets = Vec::new();
    let mut boxes = Vec::new();
    let mut goal = BTreeSet::new();
    for (i, label) in labels.iter().enumerate() {
        let h = alloc.next();
        boxes.push(h);
        if goal_idx.contains(&i) {
            goal.insert(h);
        }
        widgets.push(
            DomNode::new("checkbox", h, slots[i])
                .with_text(*label)
                .with_value("false")
                .with_behavior(Behavior::TogglesCheckbox),
        );
    }
    let submit = alloc.next();
    widgets.push(DomNode::new("button", submit, slots[total]).with_text("Submit").with_behavior(Behavior::SubmitsForm));
    let (tree, banner) = page(&mut alloc, body, area, widgets);

    // Goal words listed in the shuffled order.
    let named: Vec<&str> = order[..goal_count].iter().map(|&i| labels[i]).collect();
    let goal_text = if named.is_empty() {
        "Select nothing and click Submit.".to_string()
    } else {
        format!("Select {} and click Submit.", named.join(", "))
    };
    TaskInstance::new(
        "click-checkboxes",
        seed,
        goal_text,
        tree,
        TaskData::ClickCheckboxes { boxes, goal, submit },
        area,
        banner,
    )
}

pub(crate) fn login_user(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let username = NAMES.choose(&mut rng).expect("names").to_string();
    const ALNUM: &[u8] = b"abcdefghijkmnpqrstuvwxyzABCDEFGHJKLMNPQRSTUVWXYZ23456789";
    let password: String = (0..rng.gen_range(4..=6)).map(|_| ALNUM[rng.gen_range(0..ALNUM.len())] as char).collect();

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let slots = rows(AREA, 5);
    let user_label = alloc.next();
    let user_field = alloc.next();
    let pass_label = alloc.next();
    let pass_field = alloc.next();
    let submit = alloc.next();
    let widgets = vec![
        DomNode::new("label", user_label, slots[0]).with_text("Username"),
        DomNode::new("input", user_field, slots[1]).with_placeholder("username").with_behavior(Behavior::FocusesInput),
        DomNode::new("label", pass_label, slots[2]).with_text("Password"),
        DomNode::new("input", pass_field, slots[3]).with_placeholder("password").with_behavior(Behavior::FocusesInput),
        DomNode::new("button", submit, slots[4]).with_text("Login").with_behavior(Behavior::SubmitsForm),
    ];
    let (tree, banner) = page(&mut alloc, body, area, widgets);
    let goal = format!(
        "Enter the username \"{username}\" and the password \"{password}\" into the text fields and press login."
    );
    TaskInstance::new(
        "login-user",
        seed,
        goal,
        tree,
        TaskData::LoginUser { username, password, user_field, pass_field, submit },
        area,
        banner,
    )
}

pub(crate) fn click_tab_2(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let k = rng.gen_range(2..=4);
    let per_pane: Vec<usize> = (0..k).map(|_| rng.gen_range(3..=5)).collect();
    let words = sample(&mut rng, WORDS, per_pane.iter().sum());
    let target_pane = rng.gen_range(1..k);
    let target_link = rng.gen_range(0..per_pane[target_pane]);

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let tab_row = alloc.next();
    let headers: Vec<_> = (0..k).map(|_| alloc.next()).collect();
    let panes_box = alloc.next();
    let mut panes = Vec::new();
    for &m in &per_pane {
        let pane = alloc.next();
        let links: Vec<_> = (0..m).map(|_| alloc.next()).collect();
        panes.push((pane, links));
    }

    let header_rect = Rect::new(AREA.x + 4.0, AREA.y + 4.0, AREA.width - 8.0, 16.0);
    let pane_rect = Rect::new(AREA.x, AREA.y + 24.0, AREA.width, AREA.height - 24.0);
    let header_nodes = headers
        .iter()
        .zip(columns(header_rect, k))
        .enumerate()
        .map(|(i, (&h, rect))| {
            DomNode::new("li", h, rect)
                .with_class(if i == 0 { "tab active" } else { "tab" })
                .with_text(format!("Tab {}", i + 1))
                .with_behavior(Behavior::ActivatesTab { pane: panes[i].0 })
        })
        .collect();
    let mut word_iter = words.iter();
    let mut target = None;
    let mut tabs = Vec::new();
    let pane_nodes = panes
        .iter()
        .enumerate()
        .map(|(i, (pane, links))| {
            let link_nodes = links
                .iter()
                .zip(rows(pane_rect, links.len()))
                .enumerate()
                .map(|(j, (&h, rect))| {
                    if i == target_pane && j == target_link {
                        target = Some(h);
                    }
                    DomNode::new("a", h, rect)
                        .with_text(*word_iter.next().expect("enough words"))
                        .with_behavior(Behavior::EndsWithChoice)
                })
                .collect();
            tabs.push((headers[i], *pane, links.clone()));
            DomNode::new("div", *pane, pane_rect).with_class("pane").hidden(i != 0).with_children(link_nodes)
        })
        .collect();
    let widgets = vec![
        DomNode::new("ul", tab_row, header_rect).with_class("tabs").with_children(header_nodes),
        DomNode::new("div", panes_box, pane_rect).with_children(pane_nodes),
    ];
    let (tree, banner) = page(&mut alloc, body, area, widgets);
    let target = target.expect("target allocated");
    let word = tree.get(target).and_then(|n| n.attrs.text.clone()).expect("link text");
    let goal = format!("Switch between the tabs to find and click on the link \"{word}\".");
    TaskInstance::new("click-tab-2", seed, goal, tree, TaskData::ClickTab { tabs, target }, area, banner)
}

pub(crate) fn search_engine(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let query = capitalize(NAMES.choose(&mut rng).expect("names"));
    let titles: Vec<String> = sample(&mut rng, WORDS, RESULT_COUNT).into_iter().map(capitalize).collect();
    let target = rng.gen_range(0..RESULT_COUNT);

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let input = alloc.next();
    let button = alloc.next();
    let results_box = alloc.next();
    let header = alloc.next();
    let results: Vec<_> = (0..RESULT_COUNT).map(|_| alloc.next()).collect();
    let pages_row = alloc.next();
    let pages = RESULT_COUNT.div_ceil(RESULTS_PER_PAGE);
    let page_links: Vec<_> = (0..pages).map(|_| alloc.next()).collect();

    let search_row = Rect::new(AREA.x + 4.0, AREA.y + 4.0, AREA.width - 8.0, 18.0);
    let results_rect = Rect::new(AREA.x, AREA.y + 26.0, AREA.width, AREA.height - 26.0);
    let slots = rows(results_rect, RESULTS_PER_PAGE + 2);
    let result_nodes = results.iter().zip(&titles).enumerate().map(|(i, (&h, title))| {
        DomNode::new("a", h, slots[1 + i % RESULTS_PER_PAGE])
            .with_class("result")
            .with_text(title.clone())
            .with_behavior(Behavior::EndsWithChoice)
            .hidden(i >= RESULTS_PER_PAGE)
    });
    let page_nodes = page_links
        .iter()
        .zip(columns(slots[RESULTS_PER_PAGE + 1], pages))
        .enumerate()
        .map(|(i, (&h, rect))| {
            DomNode::new("a", h, rect)
                .with_class(if i == 0 { "page active" } else { "page" })
                .with_text((i + 1).to_string())
                .with_behavior(Behavior::ShowsPage { page: i + 1 })
        })
        .collect();
    let mut results_children = vec![DomNode::new("span", header, slots[0]).with_class("results-header")];
    results_children.extend(result_nodes);
    results_children.push(DomNode::new("div", pages_row, slots[RESULTS_PER_PAGE + 1]).with_children(page_nodes));
    let [input_rect, button_rect]: [Rect; 2] = {
        let c = columns(search_row, 3);
        [Rect::new(c[0].x, c[0].y, c[0].width * 2.0, c[0].height), c[2]]
    };
    let widgets = vec![
        DomNode::new("input", input, input_rect).with_behavior(Behavior::FocusesInput),
        DomNode::new("button", button, button_rect).with_text("Search").with_behavior(Behavior::RunsSearch),
        DomNode::new("div", results_box, results_rect)
            .with_class("results")
            .hidden(true)
            .with_children(results_children),
    ];
    let (tree, banner) = page(&mut alloc, body, area, widgets);
    let goal = format!(
        "Use the textbox to enter \"{query}\" and press \"Search\", then find and click the {} search result.",
        ordinal(target + 1)
    );
    TaskInstance::new(
        "search-engine",
        seed,
        goal,
        tree,
        TaskData::SearchEngine { query, input, results_box, header, results, page_links, target, searched: None },
        area,
        banner,
    )
}

pub(crate) fn use_autocomplete(seed: u64) -> TaskInstance {
    let mut rng = rng_for(seed);
    let mut groups: BTreeMap<String, Vec<&str>> = BTreeMap::new();
    for c in COUNTRIES {
        groups.entry(c[..2].to_lowercase()).or_default().push(c);
    }
    let shared: Vec<&Vec<&str>> = groups.values().filter(|g| g.len() >= 2).collect();
    let group = shared.choose(&mut rng).expect("shared prefixes exist");
    let target = *group.choose(&mut rng).expect("non-empty group");
    let prefix = target[..2].to_string();
    let suffix_len = (2..=target.len())
        .find(|&len| {
            let tail = target[target.len() - len..].to_lowercase();
            group.iter().filter(|c| c.to_lowercase().ends_with(&tail)).count() == 1
        })
        .unwrap_or(target.len());
    let suffix = target[target.len() - suffix_len..].to_string();

    let mut alloc = HandleAlloc::default();
    let (body, area) = (alloc.next(), alloc.next());
    let label = alloc.next();
    let input = alloc.next();
    let list = alloc.next();
    let items: Vec<_> = COUNTRIES.iter().map(|_| alloc.next()).collect();
    let submit = alloc.next();

    let item_nodes = items
        .iter()
        .zip(COUNTRIES)
        .map(|(&h, name)| {
            DomNode::new("li", h, layout::completion_slot(0))
                .with_class("ui-menu-item")
                .with_text(*name)
                .with_behavior(Behavior::CommitsCompletion)
                .hidden(true)
        })
        .collect();
    let widgets = vec![
        DomNode::new("label", label, Rect::new(4.0, 54.0, 30.0, 18.0)).with_text("Tags:"),
        DomNode::new("input", input, Rect::new(36.0, 54.0, 110.0, 18.0)).with_behavior(Behavior::OpensAutocomplete),
        DomNode::new("ul", list, Rect::new(4.0, 80.0, 100.0, 90.0))
            .with_class("ui-autocomplete")
            .hidden(true)
            .with_children(item_nodes),
        DomNode::new("button", submit, Rect::new(4.0, 180.0, 60.0, 20.0))
            .with_text("Submit")
            .with_behavior(Behavior::SubmitsForm),
    ];
    let (tree, banner) = page(&mut alloc, body, area, widgets);
    let goal = format!("Enter an item that starts with \"{prefix}\" and ends with \"{suffix}\".");
    TaskInstance::new(
        "use-autocomplete",
        seed,
        goal,
        tree,
        TaskData::Autocomplete {
            input,
            list,
            items,
            submit,
            target: target.to_string(),
            prefix,
            suffix,
            highlight: None,
            committed: None,
        },
        area,
        banner,
    )
}

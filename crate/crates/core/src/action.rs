//! Agent action commands: parsing, canonical formatting and grounding into
//! primitive environment events.
//!
//! Grammar (keywords case-insensitive, quoted text exact):
//!
//! ```text
//! click id=N
//! enter "TEXT" to id=N
//! press KEY [x COUNT]
//! hold KEY
//! release KEY
//! ```

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::compact::CompactScreen;
use crate::dom::Handle;
use crate::quoting::{quote, read_quoted, QuoteError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Key {
    ArrowUp,
    ArrowDown,
    ArrowLeft,
    ArrowRight,
    Enter,
    Ctrl,
    Tab,
    Backspace,
}

impl Key {
    pub const ALL: [Key; 8] = [
        Key::ArrowUp,
        Key::ArrowDown,
        Key::ArrowLeft,
        Key::ArrowRight,
        Key::Enter,
        Key::Ctrl,
        Key::Tab,
        Key::Backspace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Key::ArrowUp => "ARROWUP",
            Key::ArrowDown => "ARROWDOWN",
            Key::ArrowLeft => "ARROWLEFT",
            Key::ArrowRight => "ARROWRIGHT",
            Key::Enter => "ENTER",
            Key::Ctrl => "CTRL",
            Key::Tab => "TAB",
            Key::Backspace => "BACKSPACE",
        }
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Key {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Key::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ParseError::UnknownKey(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionCommand {
    Click { id: u32 },
    Type { id: u32, text: String },
    KeyPress { key: Key, count: u32 },
    Hold { key: Key },
    Release { key: Key },
}

impl ActionCommand {
    /// The element id the command addresses, if any.
    pub fn target_id(&self) -> Option<u32> {
        match self {
            ActionCommand::Click { id } | ActionCommand::Type { id, .. } => Some(*id),
            _ => None,
        }
    }

    pub fn is_click(&self) -> bool {
        matches!(self, ActionCommand::Click { .. })
    }
}

impl fmt::Display for ActionCommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionCommand::Click { id } => write!(f, "click id={id}"),
            ActionCommand::Type { id, text } => write!(f, "enter {} to id={id}", quote(text)),
            ActionCommand::KeyPress { key, count: 1 } => write!(f, "press {key}"),
            ActionCommand::KeyPress { key, count } => write!(f, "press {key} x {count}"),
            ActionCommand::Hold { key } => write!(f, "hold {key}"),
            ActionCommand::Release { key } => write!(f, "release {key}"),
        }
    }
}

impl FromStr for ActionCommand {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_action(s)
    }
}

/// Canonical string form; the identity used for reflection-memory equality.
pub fn format_action(cmd: &ActionCommand) -> String {
    cmd.to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("empty action")]
    Empty,
    #[error("unknown action verb {0:?}")]
    UnknownVerb(String),
    #[error("missing `id=` target")]
    MissingId,
    #[error("invalid element id {0:?}")]
    BadId(String),
    #[error("expected quoted text: {0}")]
    Quote(#[from] QuoteError),
    #[error("expected `to id=` after the text")]
    MissingTo,
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("invalid repeat count {0:?}")]
    BadCount(String),
    #[error("unexpected trailing input {0:?}")]
    Trailing(String),
}

fn split_word(s: &str) -> (&str, &str) {
    let s = s.trim_start();
    match s.find(char::is_whitespace) {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    }
}

fn strip_keyword<'a>(s: &'a str, kw: &str) -> Option<&'a str> {
    let s = s.trim_start();
    let head = s.get(..kw.len())?;
    head.eq_ignore_ascii_case(kw).then(|| &s[kw.len()..])
}

// Parses `id = N` (spaces around `=` tolerated) and returns the rest.
fn parse_id(s: &str) -> Result<(u32, &str), ParseError> {
    let rest = strip_keyword(s, "id").ok_or(ParseError::MissingId)?;
    let rest = rest.trim_start().strip_prefix('=').ok_or(ParseError::MissingId)?;
    let rest = rest.trim_start();
    let end = rest.find(|c: char| !c.is_ascii_digit()).unwrap_or(rest.len());
    let digits = &rest[..end];
    if digits.is_empty() {
        let (word, _) = split_word(rest);
        return Err(ParseError::BadId(word.to_string()));
    }
    let id = digits.parse().map_err(|_| ParseError::BadId(digits.to_string()))?;
    Ok((id, &rest[end..]))
}

fn expect_end(rest: &str) -> Result<(), ParseError> {
    let rest = rest.trim();
    if rest.is_empty() {
        Ok(())
    } else {
        Err(ParseError::Trailing(rest.to_string()))
    }
}

fn parse_count(rest: &str) -> Result<u32, ParseError> {
    let rest = rest.trim();
    if rest.is_empty() {
        return Ok(1);
    }
    let bad = || ParseError::BadCount(rest.to_string());
    let n = rest.strip_prefix(['x', 'X']).ok_or_else(|| ParseError::Trailing(rest.to_string()))?.trim();
    let count: u32 = n.parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(bad());
    }
    Ok(count)
}

/// Parses one action line.
pub fn parse_action(line: &str) -> Result<ActionCommand, ParseError> {
    let line = line.trim();
    if line.is_empty() {
        return Err(ParseError::Empty);
    }
    let (verb, rest) = split_word(line);
    match verb.to_ascii_lowercase().as_str() {
        "click" => {
            let (id, rest) = parse_id(rest)?;
            expect_end(rest)?;
            Ok(ActionCommand::Click { id })
        }
        "enter" => {
            let (text, rest) = read_quoted(rest.trim_start())?;
            let rest = strip_keyword(rest, "to").ok_or(ParseError::MissingTo)?;
            let (id, rest) = parse_id(rest)?;
            expect_end(rest)?;
            Ok(ActionCommand::Type { id, text })
        }
        "press" => {
            let (key, rest) = split_word(rest);
            let key = key.parse()?;
            Ok(ActionCommand::KeyPress { key, count: parse_count(rest)? })
        }
        "hold" | "release" => {
            let (key, rest) = split_word(rest);
            let key = key.parse()?;
            expect_end(rest)?;
            Ok(if verb.eq_ignore_ascii_case("hold") {
                ActionCommand::Hold { key }
            } else {
                ActionCommand::Release { key }
            })
        }
        _ => Err(ParseError::UnknownVerb(verb.to_string())),
    }
}

/// Splits multi-line planner output into commands, skipping blank lines.
/// Errors carry the 1-based line number.
pub fn parse_plan(text: &str) -> Result<Vec<ActionCommand>, (usize, ParseError)> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_action(l).map_err(|e| (i + 1, e)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum GroundedEvent {
    ElementClick { handle: Handle },
    KeyDown { key: Key },
    KeyUp { key: Key },
    CharInput { ch: char },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GroundingError {
    #[error("no element with id={0} on the current screen")]
    MissingId(u32),
    #[error("{0} released while not held")]
    KeyNotHeld(Key),
}

/// Decomposes a command into primitive events against the screen the agent
/// was shown. Ids stripped by disabling are as absent as unknown ids.
pub fn ground(cmd: &ActionCommand, screen: &CompactScreen) -> Result<Vec<GroundedEvent>, GroundingError> {
    let click = |id: u32| {
        if screen.contains_id(id) {
            Ok(GroundedEvent::ElementClick { handle: Handle(id) })
        } else {
            Err(GroundingError::MissingId(id))
        }
    };
    Ok(match cmd {
        ActionCommand::Click { id } => vec![click(*id)?],
        ActionCommand::Type { id, text } => {
            std::iter::once(click(*id)?).chain(text.chars().map(|ch| GroundedEvent::CharInput { ch })).collect()
        }
        ActionCommand::KeyPress { key, count } => (0..*count)
            .flat_map(|_| [GroundedEvent::KeyDown { key: *key }, GroundedEvent::KeyUp { key: *key }])
            .collect(),
        ActionCommand::Hold { key } => vec![GroundedEvent::KeyDown { key: *key }],
        ActionCommand::Release { key } => vec![GroundedEvent::KeyUp { key: *key }],
    })
}

/// Held-key bookkeeping for one trial; rejects a `KeyUp` with no matching
/// `KeyDown` earlier in the trial.
#[derive(Debug, Clone, Default)]
pub struct KeyboardState {
    held: BTreeSet<Key>,
}

impl KeyboardState {
    pub fn admit(&mut self, events: &[GroundedEvent]) -> Result<(), GroundingError> {
        let mut held = self.held.clone();
        for ev in events {
            match ev {
                GroundedEvent::KeyDown { key } => {
                    held.insert(*key);
                }
                GroundedEvent::KeyUp { key } if !held.remove(key) => {
                    return Err(GroundingError::KeyNotHeld(*key));
                }
                _ => {}
            }
        }
        self.held = held;
        Ok(())
    }

    pub fn held(&self) -> &BTreeSet<Key> {
        &self.held
    }
}

#![allow(dead_code)]

use std::collections::HashSet;

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use screenagent::action::{ActionCommand, Key};
use screenagent::compact::{compact, CompactScreen};
use screenagent::env::TaskInstance;

pub const SEEDS: std::ops::RangeInclusive<u64> = 1000..=1024;

pub fn key() -> impl Strategy<Value = Key> {
    proptest::sample::select(Key::ALL.to_vec())
}

pub fn action_command() -> impl Strategy<Value = ActionCommand> {
    prop_oneof![
        any::<u32>().prop_map(|id| ActionCommand::Click { id }),
        (any::<u32>(), "[ -~]{0,12}|\\PC{0,6}").prop_map(|(id, text)| ActionCommand::Type { id, text }),
        (key(), 1u32..=500).prop_map(|(key, count)| ActionCommand::KeyPress { key, count }),
        key().prop_map(|key| ActionCommand::Hold { key }),
        key().prop_map(|key| ActionCommand::Release { key }),
    ]
}

pub fn screen_of(inst: &TaskInstance) -> CompactScreen {
    compact(&inst.tree, &HashSet::new())
}

/// A random but always groundable action on `screen`: clicks, typing into
/// any element, or key presses.
pub fn random_action(rng: &mut ChaCha8Rng, screen: &CompactScreen) -> ActionCommand {
    let ids: Vec<u32> = screen.ids().collect();
    let roll = rng.gen_range(0..10);
    if ids.is_empty() || roll >= 8 {
        let keys = [Key::ArrowDown, Key::ArrowUp, Key::Enter, Key::Backspace, Key::Tab];
        return ActionCommand::KeyPress { key: keys[rng.gen_range(0..keys.len())], count: rng.gen_range(1..=2) };
    }
    let id = ids[rng.gen_range(0..ids.len())];
    if roll >= 6 {
        let pool = ["a", "Ma", "x", "Po", "alice"];
        return ActionCommand::Type { id, text: pool[rng.gen_range(0..pool.len())].to_string() };
    }
    ActionCommand::Click { id }
}

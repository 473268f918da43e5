//! A zero-shot UI agent: compact screens, a small action language, staged
//! planning and structured self-reflection over simulated DOM tasks.

pub mod action;
pub mod backend;
pub mod compact;
pub mod dom;
pub mod env;
pub mod harness;
pub mod planner;
pub mod quoting;
pub mod reflection;

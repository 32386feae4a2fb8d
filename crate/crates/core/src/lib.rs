//! Headless 2-vs-2 robot combat arena with a multi-agent learning stack.

pub mod arena;
pub mod bench;
pub mod bots;
pub mod dynamics;
pub mod env;
pub mod geometry;
pub mod marl;
pub mod planning;
pub mod referee;
pub mod rollout;
pub mod server;
pub mod trainer;
pub mod world;

//! Multi-agent Q-learning: networks, mixers, replay, optimizer, learners,
//! policies and checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod learner;
pub mod mixer;
pub mod net;
pub mod policy;
pub mod replay;

pub use learner::{Algo, HyperParams, Learner};
pub use policy::{BotPolicy, Policy, QPolicy, RandomPolicy};
pub use replay::{ReplayBuffer, Transition};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("replay holds {available} transitions, {needed} requested")]
    InsufficientData { needed: usize, available: usize },
    #[error("loss became non-finite ({0})")]
    NonFiniteLoss(f64),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

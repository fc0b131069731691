//! Core of the arena judge: data model, journal-backed store, guest sandbox,
//! judging pipeline and collective scoring.

pub mod arena;
pub mod bytes_b64;
pub mod error;
pub mod eval;
pub mod format;
pub mod judge;
pub mod model;
pub mod parallel;
pub mod queue;
pub mod sandbox;
pub mod score;
pub mod store;

pub use arena::{Arena, ArenaOptions};
pub use error::{Error, Result};
pub use score::Score;

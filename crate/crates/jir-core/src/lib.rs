//! Desk-scale restoration planning engine.
//!
//! The crate synthesizes coupled weather degradations on small image grids,
//! executes restoration plans built from a registry of parametric tools,
//! scores results with a z-score unified reward, finds oracle-optimal plans
//! by exhaustive search, and trains a compact autoregressive plan policy in
//! two stages (supervised fine-tuning, then ranking-based alignment with
//! hybrid offline/online candidate generation and entropy regularization).
//!
//! Everything is deterministic under a single master seed: randomness flows
//! through counter-based streams ([`rng::SeedSpec`]), and all parallel code
//! paths reduce in a fixed order, so results are independent of thread count.

pub mod degrade;
pub mod harness;
pub mod imaging;
pub mod par;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod search;
pub mod tools;
pub mod train;

mod error;

pub use error::{Error, Result};

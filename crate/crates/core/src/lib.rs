//! Deviation-proof slotted medium access control built from repeated-game
//! review strategies.
//!
//! Nodes share a slotted Aloha channel. Each node reviews the channel for `L`
//! slots, runs a statistical test on what it observed, and punishes for `M`
//! slots when the test fails. This crate holds the closed-form analysis of
//! such protocols under private (ACK) and public (idle/success/collision)
//! signals, their constructions, the complexity-constrained designer, and a
//! seeded slot-level simulator.
//!
//! The crate is `no_std` and only needs `alloc`. All transcendental functions
//! go through `libm` so results are identical across targets.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;

pub mod designer;
pub mod game;
pub mod private;
pub mod public;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use game::{pareto_payoff, stage_payoff, MixedProfile, NetworkConfig};

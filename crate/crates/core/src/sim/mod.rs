//! Seeded slot-level Monte-Carlo simulation of review strategies.
//!
//! Each replication draws from its own ChaCha8 stream: the generator is
//! seeded with `master_seed` and switched to stream number `replication`.
//! Per-replication tallies are integer sums, so merging them is exact and
//! independent of order.

mod automaton;
mod compare;
mod engine;

use alloc::format;
use alloc::vec::Vec;

pub use automaton::{step_signals, AckSignal, Action, Automaton, ChannelSignal, Phase, SignalMode, Signals, Step};
pub use compare::{compare_to_analytic, Analytic, Comparison};
pub use engine::{prepare, run_replication, simulate, Prepared, Tally};

use crate::error::{Error, Result};
use crate::game::NetworkConfig;
use crate::public::DecisionTable;

/// Strategy followed by a deviating node.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case"))]
pub enum DeviantPolicy {
    /// Transmit with `p` in every slot.
    Constant { p: f64 },
    /// Follow the protocol during reviews, transmit with `p_d` during
    /// cooperation phases and with `p_r` during punishment.
    PunishAware { p_d: f64, p_r: f64 },
    /// Review-phase decision table over (slot, idle count); public mode only.
    Adaptive { table: DecisionTable },
    /// Optimal stationary deviation against the public protocol.
    BestResponse,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviantSpec {
    pub node_index: usize,
    pub policy: DeviantPolicy,
}

impl DeviantSpec {
    pub fn constant(node_index: usize, p: f64) -> Self {
        Self {
            node_index,
            policy: DeviantPolicy::Constant { p },
        }
    }
}

fn default_replications() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    pub network: NetworkConfig,
    pub signal: SignalMode,
    pub margin: f64,
    pub review_len: u64,
    /// Reciprocation length (private) or punishment length (public).
    pub recip_len: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub deviants: Vec<DeviantSpec>,
    /// Total epochs across all replications.
    pub epochs: u64,
    #[cfg_attr(feature = "serde", serde(default = "default_replications"))]
    pub replications: u32,
    pub master_seed: u64,
}

impl SimConfig {
    pub fn new(network: NetworkConfig, signal: SignalMode, margin: f64, review_len: u64, recip_len: u64) -> Self {
        Self {
            network,
            signal,
            margin,
            review_len,
            recip_len,
            deviants: Vec::new(),
            epochs: 100_000,
            replications: default_replications(),
            master_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        automaton::validate_params(self.signal, self.network, self.margin, self.review_len, self.recip_len)?;
        if self.epochs == 0 {
            return Err(Error::ZeroLength { what: "epoch count" });
        }
        if self.replications == 0 {
            return Err(Error::ZeroLength {
                what: "replication count",
            });
        }
        let n = self.network.n_nodes();
        let mut taken = alloc::vec![false; n];
        for d in &self.deviants {
            if d.node_index >= n {
                return Err(Error::Deviant(format!("node index {} out of range for {n} nodes", d.node_index)));
            }
            if core::mem::replace(&mut taken[d.node_index], true) {
                return Err(Error::Deviant(format!("node {} listed twice", d.node_index)));
            }
            let prob = |what: &str, p: f64| {
                if (0.0..=1.0).contains(&p) {
                    Ok(())
                } else {
                    Err(Error::Deviant(format!("{what} = {p} is not a probability")))
                }
            };
            match &d.policy {
                DeviantPolicy::Constant { p } => prob("p", *p)?,
                DeviantPolicy::PunishAware { p_d, p_r } => {
                    prob("p_d", *p_d)?;
                    prob("p_r", *p_r)?;
                }
                DeviantPolicy::Adaptive { table } => {
                    self.require_public("adaptive")?;
                    if table.review_len() != self.review_len {
                        return Err(Error::Deviant(format!(
                            "decision table covers {} slots but the review has {}",
                            table.review_len(),
                            self.review_len
                        )));
                    }
                }
                DeviantPolicy::BestResponse => self.require_public("best_response")?,
            }
        }
        Ok(())
    }

    fn require_public(&self, kind: &str) -> Result<()> {
        match self.signal {
            SignalMode::Public => Ok(()),
            SignalMode::Private => Err(Error::Deviant(format!("{kind} deviants need the public signal"))),
        }
    }

    /// Epochs simulated by replication `index`.
    pub fn epochs_for(&self, index: u32) -> u64 {
        let r = self.replications as u64;
        self.epochs / r + u64::from((index as u64) < self.epochs % r)
    }

    pub fn is_deviant(&self, node: usize) -> bool {
        self.deviants.iter().any(|d| d.node_index == node)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct SimReport {
    pub config: SimConfig,
    pub epochs: u64,
    pub slots: u64,
    /// Long-run success rate of each node.
    pub node_payoffs: Vec<Estimate>,
    /// Per-node payoff averaged over compliant nodes.
    pub compliant_payoff: Option<Estimate>,
    /// Fraction of epochs with a failed test, when nobody deviates.
    pub false_punishment: Option<Estimate>,
    /// Fraction of epochs where every compliant node passes, with exactly one
    /// deviant.
    pub miss_detection: Option<Estimate>,
    /// Review count histograms: one per node (ACKs) in private mode, a single
    /// shared one (idle slots) in public mode. Entry `c` counts reviews that
    /// ended with `c` events.
    pub review_histograms: Vec<Vec<u64>>,
}

//! The one-slot random access game and its symmetric Pareto benchmark.

use alloc::vec::Vec;

use crate::error::{check_probability, Error, Result};
use crate::math::powi;

/// Network size and the prescribed cooperation probability.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawNetwork"))]
pub struct NetworkConfig {
    n_nodes: usize,
    coop_prob: f64,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawNetwork {
    n_nodes: usize,
    coop_prob: Option<f64>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawNetwork> for NetworkConfig {
    type Error = Error;

    fn try_from(raw: RawNetwork) -> Result<Self> {
        match raw.coop_prob {
            Some(p) => NetworkConfig::with_coop_prob(raw.n_nodes, p),
            None => NetworkConfig::new(raw.n_nodes),
        }
    }
}

impl NetworkConfig {
    /// `n_nodes` nodes cooperating at the symmetric optimum `1/N`.
    pub fn new(n_nodes: usize) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::TooFewNodes(n_nodes));
        }
        Ok(Self {
            n_nodes,
            coop_prob: 1.0 / n_nodes as f64,
        })
    }

    pub fn with_coop_prob(n_nodes: usize, coop_prob: f64) -> Result<Self> {
        if n_nodes < 2 {
            return Err(Error::TooFewNodes(n_nodes));
        }
        if !(coop_prob > 0.0 && coop_prob < 1.0) {
            return Err(Error::OutOfRange {
                what: "cooperation probability",
                range: "(0, 1)",
                value: coop_prob,
            });
        }
        Ok(Self { n_nodes, coop_prob })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn coop_prob(&self) -> f64 {
        self.coop_prob
    }

    /// True when the cooperation probability is exactly `1/N`.
    pub fn at_symmetric_optimum(&self) -> bool {
        self.coop_prob == 1.0 / self.n_nodes as f64
    }

    /// Probability that `k` given nodes all wait when each transmits with `p_c`.
    fn all_wait(&self, k: usize) -> f64 {
        powi(1.0 - self.coop_prob, k)
    }

    /// `(1-p_c)^(N-1)`: chance that every other node waits.
    pub fn others_wait(&self) -> f64 {
        self.all_wait(self.n_nodes - 1)
    }

    /// `q_c`: per-slot ACK probability of a node when everyone cooperates.
    pub fn ack_rate(&self) -> f64 {
        self.coop_prob * self.others_wait()
    }

    /// `q_d`: per-slot ACK probability of a compliant node when exactly one
    /// other node transmits with `p_d`.
    pub fn ack_rate_with_deviant(&self, p_d: f64) -> f64 {
        self.coop_prob * self.all_wait(self.n_nodes - 2) * (1.0 - p_d)
    }

    /// Per-slot success probability of a node transmitting with `p_d` while
    /// the others cooperate.
    pub fn deviant_success_rate(&self, p_d: f64) -> f64 {
        p_d * self.others_wait()
    }

    /// Per-slot idle probability when everyone cooperates.
    pub fn idle_rate(&self) -> f64 {
        self.all_wait(self.n_nodes)
    }

    /// Per-slot idle probability with exactly one node transmitting with `p_d`.
    pub fn idle_rate_with_deviant(&self, p_d: f64) -> f64 {
        (1.0 - p_d) * self.others_wait()
    }

    /// The all-`p_c` mixed profile.
    pub fn cooperative_profile(&self) -> MixedProfile {
        MixedProfile {
            probs: alloc::vec![self.coop_prob; self.n_nodes],
        }
    }
}

/// Transmission probability of every node in one slot.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct MixedProfile {
    probs: Vec<f64>,
}

impl MixedProfile {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::TooFewNodes(probs.len()));
        }
        for &p in &probs {
            check_probability("transmission probability", p)?;
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Probability that `node_index` is the sole transmitter under `profile`.
pub fn stage_payoff(profile: &MixedProfile, node_index: usize) -> Result<f64> {
    let probs = profile.probs();
    if node_index >= probs.len() {
        return Err(Error::NodeIndex {
            index: node_index,
            n_nodes: probs.len(),
        });
    }
    let others: f64 = probs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != node_index)
        .map(|(_, &p)| 1.0 - p)
        .product();
    Ok(probs[node_index] * others)
}

/// Symmetric Pareto-optimal payoff `(1 - 1/N)^(N-1) / N`.
pub fn pareto_payoff(n_nodes: usize) -> Result<f64> {
    if n_nodes < 2 {
        return Err(Error::TooFewNodes(n_nodes));
    }
    let n = n_nodes as f64;
    Ok(powi(1.0 - 1.0 / n, n_nodes - 1) / n)
}

use crate::error::Result;
use crate::private::{state_count_for, PrivateReviewProtocol};
use crate::public::PublicReviewProtocol;

/// Which signal the nodes observe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SignalMode {
    /// Per-node ACK: `S` to a lone transmitter, `F` to everyone else.
    Private,
    /// Shared ternary channel state.
    Public,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Transmit,
    Wait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckSignal {
    Success,
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSignal {
    Idle,
    Success,
    Collision,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Signals {
    Private(alloc::vec::Vec<AckSignal>),
    Public(ChannelSignal),
}

/// Signals produced by one slot of pure actions.
pub fn step_signals(actions: &[Action], mode: SignalMode) -> Signals {
    let transmitters = actions.iter().filter(|&&a| a == Action::Transmit).count();
    match mode {
        SignalMode::Private => Signals::Private(
            actions
                .iter()
                .map(|&a| {
                    if a == Action::Transmit && transmitters == 1 {
                        AckSignal::Success
                    } else {
                        AckSignal::Failure
                    }
                })
                .collect(),
        ),
        SignalMode::Public => Signals::Public(match transmitters {
            0 => ChannelSignal::Idle,
            1 => ChannelSignal::Success,
            _ => ChannelSignal::Collision,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// `slot` review slots done, `count` counted events (capped).
    Review { slot: u64, count: u64 },
    Cooperate { slot: u64 },
    Punish { slot: u64 },
}

/// What a single transition completed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Step {
    /// Test outcome when the slot closed a review.
    pub review_passed: Option<bool>,
    /// Whether the automaton is back at the start of a review.
    pub epoch_end: bool,
}

/// Minimal state machine of a review strategy.
///
/// Review counts stop at `threshold + 1`: once there, the test is passed
/// whatever follows, so higher counts need no states of their own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Automaton {
    mode: SignalMode,
    review_len: u64,
    recip_len: u64,
    threshold: i64,
    phase: Phase,
}

impl Automaton {
    pub fn new(mode: SignalMode, review_len: u64, recip_len: u64, threshold: i64) -> Self {
        Self {
            mode,
            review_len,
            recip_len,
            threshold,
            phase: Phase::Review { slot: 0, count: 0 },
        }
    }

    pub fn private(proto: &PrivateReviewProtocol) -> Self {
        Self::new(SignalMode::Private, proto.review_len(), proto.recip_len(), proto.threshold())
    }

    pub fn public(proto: &PublicReviewProtocol) -> Self {
        Self::new(SignalMode::Public, proto.review_len(), proto.punish_len(), proto.threshold())
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn mode(&self) -> SignalMode {
        self.mode
    }

    pub fn count_cap(&self) -> u64 {
        self.threshold.max(0) as u64 + 1
    }

    /// Advances one slot; `counted` is whether the slot carried the event the
    /// test counts (own ACK in private mode, an idle slot in public mode).
    pub fn observe(&mut self, counted: bool) -> Step {
        let mut step = Step::default();
        self.phase = match self.phase {
            Phase::Review { slot, count } => {
                let count = (count + counted as u64).min(self.count_cap());
                if slot + 1 < self.review_len {
                    Phase::Review { slot: slot + 1, count }
                } else {
                    let passed = count as i64 > self.threshold;
                    step.review_passed = Some(passed);
                    match (self.mode, passed) {
                        (SignalMode::Private, true) => Phase::Cooperate { slot: 0 },
                        (SignalMode::Public, true) => {
                            step.epoch_end = true;
                            Phase::Review { slot: 0, count: 0 }
                        }
                        (_, false) => Phase::Punish { slot: 0 },
                    }
                }
            }
            Phase::Cooperate { slot } | Phase::Punish { slot } if slot + 1 >= self.recip_len => {
                step.epoch_end = true;
                Phase::Review { slot: 0, count: 0 }
            }
            Phase::Cooperate { slot } => Phase::Cooperate { slot: slot + 1 },
            Phase::Punish { slot } => Phase::Punish { slot: slot + 1 },
        };
        step
    }

    /// Transmission probability prescribed in the current state.
    pub fn prescribed_prob(&self, coop_prob: f64) -> f64 {
        match self.phase {
            Phase::Review { .. } | Phase::Cooperate { .. } => coop_prob,
            Phase::Punish { .. } => 1.0,
        }
    }

    fn review_states(&self) -> u64 {
        let k = self.count_cap() + 1;
        (0..self.review_len).map(|t| (t + 1).min(k)).sum()
    }

    /// Number of distinct states.
    pub fn state_space(&self) -> u64 {
        let per_slot = match self.mode {
            SignalMode::Private => 2,
            SignalMode::Public => 1,
        };
        state_count_for(self.review_len, self.recip_len, self.threshold, per_slot).states
    }

    /// Dense index of the current state in `0..state_space()`.
    pub fn state_index(&self) -> u64 {
        let k = self.count_cap() + 1;
        match self.phase {
            Phase::Review { slot, count } => (0..slot).map(|t| (t + 1).min(k)).sum::<u64>() + count,
            Phase::Cooperate { slot } => self.review_states() + slot,
            Phase::Punish { slot } => match self.mode {
                SignalMode::Private => self.review_states() + self.recip_len + slot,
                SignalMode::Public => self.review_states() + slot,
            },
        }
    }
}

/// Checks that an automaton can be built for the given parameters.
pub(crate) fn validate_params(mode: SignalMode, network: crate::NetworkConfig, margin: f64, l: u64, m: u64) -> Result<i64> {
    Ok(match mode {
        SignalMode::Private => PrivateReviewProtocol::new(network, margin, l, m)?.threshold(),
        SignalMode::Public => PublicReviewProtocol::new(network, margin, l, m)?.threshold(),
    })
}

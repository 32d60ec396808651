//! Review strategies with private ACK signals.
//!
//! Every node transmits with `p_c` for a review phase of `L` slots and counts
//! its own ACKs. It then spends `M` slots in a reciprocation phase: cooperating
//! with `p_c` when its ACK ratio exceeded `q_c - B`, or punishing by
//! transmitting every slot otherwise. Reciprocation happens whatever the test
//! outcome, because a node cannot see the other nodes' test results.

use crate::error::{check_positive, Error, Result};
use crate::game::NetworkConfig;
use crate::math::{ceil, powf};
use crate::stats::{ack_error_probs, AckTestConfig, ErrorProbabilities};

/// `sigma^r(B, L, M)` built on the ACK ratio test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PrivateReviewProtocol {
    network: NetworkConfig,
    margin: f64,
    review_len: u64,
    recip_len: u64,
}

impl PrivateReviewProtocol {
    pub fn new(network: NetworkConfig, margin: f64, review_len: u64, recip_len: u64) -> Result<Self> {
        AckTestConfig::new(network, margin, review_len, None)?;
        if recip_len == 0 {
            return Err(Error::ZeroLength {
                what: "reciprocation length",
            });
        }
        Ok(Self {
            network,
            margin,
            review_len,
            recip_len,
        })
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn review_len(&self) -> u64 {
        self.review_len
    }

    pub fn recip_len(&self) -> u64 {
        self.recip_len
    }

    pub fn with_recip_len(&self, recip_len: u64) -> Result<Self> {
        Self::new(self.network, self.margin, self.review_len, recip_len)
    }

    /// Largest ACK count that fails the test.
    pub fn threshold(&self) -> i64 {
        crate::stats::review_threshold(self.review_len, self.network.ack_rate(), self.margin)
    }

    pub fn error_probs(&self, p_d: Option<f64>) -> Result<ErrorProbabilities> {
        ack_error_probs(&AckTestConfig::new(
            self.network,
            self.margin,
            self.review_len,
            p_d,
        )?)
    }
}

/// Closed-form payoffs and deviation-proofness of a private protocol against
/// one constant deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PrivateAnalysis {
    pub protocol: PrivateReviewProtocol,
    pub deviation_prob: f64,
    pub errors: ErrorProbabilities,
    pub payoff_compliant: f64,
    pub payoff_deviator: f64,
    pub deviation_gain: f64,
    /// `g`: per-slot loss rate the reciprocation phase inflicts on a deviant.
    pub deterrence_margin: f64,
    /// `M_min`; `+inf` when `g <= 0`.
    pub min_recip_len: f64,
    pub efficiency_loss: f64,
    pub is_dp: bool,
    /// Whether `p_c = 1/N`, under which the loss is known to be nonnegative.
    pub at_symmetric_optimum: bool,
}

/// `g = (1-P_f)^((N-1)/N) - (1-p_c)(1-P_f) - p_d P_m`.
pub fn deterrence_margin(network: &NetworkConfig, pf: f64, pm: f64, p_d: f64) -> f64 {
    let n = network.n_nodes() as f64;
    let pass = 1.0 - pf;
    powf(pass, (n - 1.0) / n) - (1.0 - network.coop_prob()) * pass - p_d * pm
}

/// `M_min = (p_d - p_c) L / g`, or `+inf` when `g <= 0`.
pub fn min_recip_len(network: &NetworkConfig, review_len: u64, g: f64, p_d: f64) -> f64 {
    if g > 0.0 {
        (p_d - network.coop_prob()) * review_len as f64 / g
    } else {
        f64::INFINITY
    }
}

/// Smallest admissible integer length not below `min_len`.
pub fn ceil_len(min_len: f64) -> Option<u64> {
    if min_len.is_finite() {
        Some((ceil(min_len) as u64).max(1))
    } else {
        None
    }
}

pub fn compliant_payoff(network: &NetworkConfig, review_len: u64, recip_len: u64, pf: f64) -> f64 {
    let n = network.n_nodes() as f64;
    let p_c = network.coop_prob();
    let (l, m) = (review_len as f64, recip_len as f64);
    let pass = 1.0 - pf;
    let lone_punisher = powf(pass, (n - 1.0) / n) * (1.0 - powf(pass, 1.0 / n));
    network.others_wait() / (l + m) * (p_c * l + p_c * pass * m + lone_punisher * m)
}

pub fn deviator_payoff(network: &NetworkConfig, review_len: u64, recip_len: u64, pm: f64, p_d: f64) -> f64 {
    let (l, m) = (review_len as f64, recip_len as f64);
    network.deviant_success_rate(p_d) * (l + pm * m) / (l + m)
}

/// Review-phase gain minus reciprocation-phase loss.
pub fn deviation_gain(network: &NetworkConfig, review_len: u64, recip_len: u64, g: f64, p_d: f64) -> f64 {
    let (l, m) = (review_len as f64, recip_len as f64);
    network.others_wait() / (l + m) * ((p_d - network.coop_prob()) * l - g * m)
}

/// Efficiency loss relative to `N q_c`, which equals `N u^PO` when `p_c = 1/N`.
pub fn efficiency_loss(network: &NetworkConfig, review_len: u64, recip_len: u64, pf: f64) -> f64 {
    let n = network.n_nodes() as f64;
    let (l, m) = (review_len as f64, recip_len as f64);
    let pass = 1.0 - pf;
    n * m / (l + m)
        * network.others_wait()
        * (network.coop_prob() * pf - powf(pass, (n - 1.0) / n) + pass)
}

pub fn analyze_private(proto: &PrivateReviewProtocol, p_d: f64) -> Result<PrivateAnalysis> {
    check_deviation(proto.network(), p_d)?;
    let errors = proto.error_probs(Some(p_d))?;
    analyze_private_with_errors(proto, p_d, errors)
}

/// Analysis with externally supplied error probabilities.
pub fn analyze_private_with_errors(
    proto: &PrivateReviewProtocol,
    p_d: f64,
    errors: ErrorProbabilities,
) -> Result<PrivateAnalysis> {
    let net = proto.network();
    check_deviation(net, p_d)?;
    let pf = errors.false_punishment;
    let pm = errors.miss_detection.unwrap_or(0.0);
    let (l, m) = (proto.review_len(), proto.recip_len());
    let g = deterrence_margin(net, pf, pm, p_d);
    let m_min = min_recip_len(net, l, g, p_d);
    Ok(PrivateAnalysis {
        protocol: *proto,
        deviation_prob: p_d,
        errors,
        payoff_compliant: compliant_payoff(net, l, m, pf),
        payoff_deviator: deviator_payoff(net, l, m, pm, p_d),
        deviation_gain: deviation_gain(net, l, m, g, p_d),
        deterrence_margin: g,
        min_recip_len: m_min,
        efficiency_loss: efficiency_loss(net, l, m, pf),
        is_dp: g > 0.0 && m as f64 >= m_min,
        at_symmetric_optimum: net.at_symmetric_optimum(),
    })
}

pub(crate) fn check_deviation(network: &NetworkConfig, p_d: f64) -> Result<()> {
    if p_d > network.coop_prob() && p_d <= 1.0 {
        Ok(())
    } else {
        Err(Error::DeviationNotAbove {
            p_d,
            p_c: network.coop_prob(),
        })
    }
}

/// Size of the smallest automaton implementing the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct StateCount {
    pub states: u64,
    /// `k >= 2` with `k - 2 <= L (q_c - B) < k - 1`.
    pub k: u64,
}

/// `N_s = k L - k (k-1) / 2 + 2 M`.
pub fn state_count(proto: &PrivateReviewProtocol) -> StateCount {
    state_count_for(proto.review_len(), proto.recip_len(), proto.threshold(), 2)
}

/// State count of a review automaton with `phases_per_slot` states per
/// reciprocation slot (2 for private signals, 1 for public).
pub(crate) fn state_count_for(review_len: u64, recip_len: u64, threshold: i64, phases_per_slot: u64) -> StateCount {
    let k = threshold.max(0) as u64 + 2;
    let review_states = k * review_len - k * (k - 1) / 2;
    StateCount {
        states: review_states + phases_per_slot * recip_len,
        k,
    }
}

/// Outcome of a review-length sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Construction {
    pub protocol: PrivateReviewProtocol,
    pub deviation_prob: f64,
    pub deterrence_margin: f64,
    pub efficiency_loss: f64,
}

/// Smallest `L <= l_cap` such that `sigma^r(B, L, ceil(M_min))` is DP against
/// `p_d` with efficiency loss at most `delta`.
///
/// The sweep is linear: `P_f` and `P_m` jump whenever `floor(L (q_c - B))`
/// does, so neither `g` nor the loss is monotone in `L`.
pub fn construct_near_optimal_private(
    p_d: f64,
    delta: f64,
    margin: f64,
    network: &NetworkConfig,
    l_cap: u64,
) -> Result<Construction> {
    check_positive("delta", delta)?;
    check_deviation(network, p_d)?;
    let mut best: Option<f64> = None;
    for l in 1..=l_cap {
        let proto = PrivateReviewProtocol::new(*network, margin, l, 1)?;
        let errors = proto.error_probs(Some(p_d))?;
        let pm = errors.miss_detection.unwrap_or(0.0);
        let g = deterrence_margin(network, errors.false_punishment, pm, p_d);
        let Some(m) = ceil_len(min_recip_len(network, l, g, p_d)) else {
            continue;
        };
        let loss = efficiency_loss(network, l, m, errors.false_punishment);
        if loss <= delta {
            return Ok(Construction {
                protocol: proto.with_recip_len(m)?,
                deviation_prob: p_d,
                deterrence_margin: g,
                efficiency_loss: loss,
            });
        }
        best = Some(best.map_or(loss, |b: f64| b.min(loss)));
    }
    Err(Error::CapExhausted {
        l_cap,
        best_loss: best,
    })
}

/// Spacing of the deviation-probability grid used to certify robustness.
pub const ROBUSTNESS_GRID_STEP: f64 = 1e-3;

/// Robust epsilon-DP protocol with its certification record.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct RobustConstruction {
    pub protocol: PrivateReviewProtocol,
    /// `p_eps = p_c + eps / (1-p_c)^(N-1)`: smallest deviation gaining `eps`
    /// per slot against cooperators.
    pub p_eps: f64,
    /// Upper end of the admissible margin interval.
    pub margin_upper: f64,
    /// `g^(B, L)`: deterrence margin with miss detection evaluated at `p_eps`
    /// and weight 1 in place of `p_d`.
    pub g_hat: f64,
    pub efficiency_loss: f64,
    pub grid_points: usize,
    pub max_gain: f64,
    pub worst_deviation: f64,
}

/// Deviation probabilities `p_c + j * step` in `(p_c, 1)`, followed by 1.
pub fn deviation_grid(p_c: f64, step: f64) -> impl Iterator<Item = f64> {
    let count = ((1.0 - p_c) / step - 1e-9) as u64;
    (1..=count)
        .map(move |j| p_c + j as f64 * step)
        .filter(|&p| p < 1.0)
        .chain(core::iter::once(1.0))
}

/// Largest deviation gain of `proto` over the deviation grid.
pub fn max_gain_on_grid(proto: &PrivateReviewProtocol, step: f64) -> Result<(f64, f64, usize)> {
    let mut worst = (f64::NEG_INFINITY, f64::NAN, 0usize);
    for p_d in deviation_grid(proto.network().coop_prob(), step) {
        let a = analyze_private(proto, p_d)?;
        if a.deviation_gain > worst.0 {
            worst.0 = a.deviation_gain;
            worst.1 = p_d;
        }
        worst.2 += 1;
    }
    Ok(worst)
}

/// Protocol gaining at most `epsilon` against every constant deviation with
/// efficiency loss at most `delta`.
///
/// Uses the midpoint margin of `(0, min(eps/(N-1), q_c - q_d(p_eps)))` (the two
/// bounds coincide when `p_c = 1/N`) and `M^(L) = ceil((1-p_c) L / g^)`.
/// Candidates are certified on a deviation grid of step
/// [`ROBUSTNESS_GRID_STEP`]; a candidate that fails certification is skipped.
pub fn construct_robust_eps_dp(
    epsilon: f64,
    delta: f64,
    network: &NetworkConfig,
    l_cap: u64,
) -> Result<RobustConstruction> {
    check_positive("epsilon", epsilon)?;
    check_positive("delta", delta)?;
    let n = network.n_nodes() as f64;
    let p_c = network.coop_prob();
    let p_eps = (p_c + epsilon / network.others_wait()).min(1.0);
    let q_c = network.ack_rate();
    let margin_upper = (epsilon / (n - 1.0))
        .min(q_c - network.ack_rate_with_deviant(p_eps))
        .min(q_c);
    let margin = margin_upper / 2.0;

    let mut best: Option<f64> = None;
    for l in 1..=l_cap {
        let test = PrivateReviewProtocol::new(*network, margin, l, 1)?;
        let errors = if p_eps > p_c {
            test.error_probs(Some(p_eps))?
        } else {
            test.error_probs(None)?
        };
        let pf = errors.false_punishment;
        let pm = errors.miss_detection.unwrap_or(0.0);
        let g_hat = deterrence_margin(network, pf, pm, 1.0);
        if g_hat <= 0.0 {
            continue;
        }
        let m = (ceil((1.0 - p_c) * l as f64 / g_hat) as u64).max(1);
        let loss = efficiency_loss(network, l, m, pf);
        best = Some(best.map_or(loss, |b: f64| b.min(loss)));
        if loss > delta {
            continue;
        }
        let proto = test.with_recip_len(m)?;
        let (max_gain, worst_deviation, grid_points) = max_gain_on_grid(&proto, ROBUSTNESS_GRID_STEP)?;
        if max_gain <= epsilon {
            return Ok(RobustConstruction {
                protocol: proto,
                p_eps,
                margin_upper,
                g_hat,
                efficiency_loss: loss,
                grid_points,
                max_gain,
                worst_deviation,
            });
        }
    }
    Err(Error::CapExhausted {
        l_cap,
        best_loss: best,
    })
}

//! Review strategies with public ternary signals (idle / success / collision).
//!
//! All nodes see the same signal, so they reach the same test verdict and
//! stay in the same phase. A passed review is followed directly by the next
//! review; a failed one by `M` punishment slots.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{check_positive, Error, Result};
use crate::game::NetworkConfig;
use crate::math::{ceil, powf};
use crate::private::{check_deviation, ceil_len, StateCount};
use crate::stats::{chebyshev_pf_bound, idle_error_probs, ErrorProbabilities, IdleTestConfig};

/// `sigma~^r(B, L, M)` built on the idle slot ratio test.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PublicReviewProtocol {
    network: NetworkConfig,
    margin: f64,
    review_len: u64,
    punish_len: u64,
}

impl PublicReviewProtocol {
    pub fn new(network: NetworkConfig, margin: f64, review_len: u64, punish_len: u64) -> Result<Self> {
        IdleTestConfig::new(network, margin, review_len, None)?;
        if punish_len == 0 {
            return Err(Error::ZeroLength {
                what: "punishment length",
            });
        }
        Ok(Self {
            network,
            margin,
            review_len,
            punish_len,
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

    pub fn punish_len(&self) -> u64 {
        self.punish_len
    }

    pub fn with_punish_len(&self, punish_len: u64) -> Result<Self> {
        Self::new(self.network, self.margin, self.review_len, punish_len)
    }

    /// Largest idle count that triggers punishment.
    pub fn threshold(&self) -> i64 {
        crate::stats::review_threshold(self.review_len, self.network.idle_rate(), self.margin)
    }

    pub fn error_probs(&self, p_d: Option<f64>) -> Result<ErrorProbabilities> {
        idle_error_probs(&IdleTestConfig::new(
            self.network,
            self.margin,
            self.review_len,
            p_d,
        )?)
    }

    /// Automaton size: capped review states plus one state per punishment slot.
    pub fn state_count(&self) -> StateCount {
        crate::private::state_count_for(self.review_len, self.punish_len, self.threshold(), 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct PublicAnalysis {
    pub protocol: PublicReviewProtocol,
    pub deviation_prob: f64,
    pub errors: ErrorProbabilities,
    /// `L q_c / (L + P~_f M)`.
    pub payoff_compliant: f64,
    /// `L p_d (1-p_c)^(N-1) / (L + (1 - P~_m) M)`.
    pub payoff_deviator: f64,
    pub deviation_gain: f64,
    /// `g~ = p_c (1 - P~_m) - p_d P~_f`.
    pub deterrence_margin: f64,
    pub min_punish_len: f64,
    pub efficiency_loss: f64,
    pub is_dp: bool,
}

pub fn deterrence_margin(network: &NetworkConfig, pf: f64, pm: f64, p_d: f64) -> f64 {
    network.coop_prob() * (1.0 - pm) - p_d * pf
}

/// `C = N P~_f M q_c / (L + P~_f M)`; nonnegative for any `p_c`.
pub fn efficiency_loss(network: &NetworkConfig, review_len: u64, punish_len: u64, pf: f64) -> f64 {
    let n = network.n_nodes() as f64;
    let (l, m) = (review_len as f64, punish_len as f64);
    n * pf * m * network.ack_rate() / (l + pf * m)
}

pub fn analyze_public(proto: &PublicReviewProtocol, p_d: f64) -> Result<PublicAnalysis> {
    check_deviation(proto.network(), p_d)?;
    let errors = proto.error_probs(Some(p_d))?;
    analyze_public_with_errors(proto, p_d, errors)
}

/// Analysis with externally supplied error probabilities.
pub fn analyze_public_with_errors(
    proto: &PublicReviewProtocol,
    p_d: f64,
    errors: ErrorProbabilities,
) -> Result<PublicAnalysis> {
    let net = proto.network();
    check_deviation(net, p_d)?;
    let pf = errors.false_punishment;
    let pm = errors.miss_detection.unwrap_or(0.0);
    let (l, m) = (proto.review_len() as f64, proto.punish_len() as f64);
    let g = deterrence_margin(net, pf, pm, p_d);
    let m_min = crate::private::min_recip_len(net, proto.review_len(), g, p_d);
    let payoff_compliant = l * net.ack_rate() / (l + pf * m);
    let payoff_deviator = l * net.deviant_success_rate(p_d) / (l + (1.0 - pm) * m);
    Ok(PublicAnalysis {
        protocol: *proto,
        deviation_prob: p_d,
        errors,
        payoff_compliant,
        payoff_deviator,
        deviation_gain: payoff_deviator - payoff_compliant,
        deterrence_margin: g,
        min_punish_len: m_min,
        efficiency_loss: efficiency_loss(net, proto.review_len(), proto.punish_len(), pf),
        is_dp: g > 0.0 && m >= m_min,
    })
}

/// Smallest DP punishment length, `None` when `g~ <= 0`.
pub fn min_dp_punish_len(proto: &PublicReviewProtocol, p_d: f64) -> Result<Option<u64>> {
    Ok(ceil_len(analyze_public(proto, p_d)?.min_punish_len))
}

/// Upper bound on any strategy's payoff given its punishment probability
/// `pf_star`: `(L q_c + P* (1-p_c)^N L + (1-P*) B L) / (L + P* M)`.
pub fn deviation_payoff_upper_bound(proto: &PublicReviewProtocol, pf_star: f64) -> Result<f64> {
    crate::error::check_probability("punishment probability", pf_star)?;
    let net = proto.network();
    let (l, m) = (proto.review_len() as f64, proto.punish_len() as f64);
    let num = l * net.ack_rate() + pf_star * net.idle_rate() * l + (1.0 - pf_star) * proto.margin() * l;
    Ok(num / (l + pf_star * m))
}

/// `B = beta L^(rho-1)`, `M = ceil(mu L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpsNeSchedule {
    pub beta: f64,
    pub rho: f64,
    pub mu: f64,
}

impl EpsNeSchedule {
    pub fn validate(&self, network: &NetworkConfig) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Schedule(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.rho > 0.5 && self.rho < 1.0) {
            return Err(Error::Schedule(format!("rho must lie in (1/2, 1), got {}", self.rho)));
        }
        let floor = (network.n_nodes() - 1) as f64;
        if !(self.mu > floor && self.mu.is_finite()) {
            return Err(Error::Schedule(format!("mu must exceed N-1 = {floor}, got {}", self.mu)));
        }
        Ok(())
    }

    pub fn margin(&self, review_len: u64) -> f64 {
        self.beta * powf(review_len as f64, self.rho - 1.0)
    }

    pub fn punish_len(&self, review_len: u64) -> u64 {
        ceil(self.mu * review_len as f64) as u64
    }

    /// Efficiency loss with `P~_f` replaced by its Chebyshev bound (clamped
    /// to 1), using the `M = mu L` idealization.
    pub fn chebyshev_loss_bound(&self, network: &NetworkConfig, review_len: u64) -> f64 {
        let b = self.margin(review_len);
        let pf = chebyshev_pf_bound(network, b, review_len).unwrap_or(1.0).min(1.0);
        let n = network.n_nodes() as f64;
        n * pf * self.mu * network.ack_rate() / (1.0 + pf * self.mu)
    }

    /// `(2 beta / eps)^(1 / (1 - rho))`, the review length at which the
    /// margin drops to `eps / 2`.
    pub fn margin_bound(&self, epsilon: f64) -> f64 {
        powf(2.0 * self.beta / epsilon, 1.0 / (1.0 - self.rho))
    }

    /// Smallest `L` whose Chebyshev loss bound is at most `target`, found by
    /// doubling then bisection (the bound is decreasing in `L`).
    pub fn min_len_for_loss(&self, network: &NetworkConfig, target: f64) -> u64 {
        let ok = |l: u64| self.chebyshev_loss_bound(network, l) <= target;
        if ok(1) {
            return 1;
        }
        let mut hi = 2u64;
        while !ok(hi) {
            hi = hi.saturating_mul(2);
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if ok(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// An epsilon-NE, delta-PO protocol and the three lower bounds on `L`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct EpsNeConstruction {
    pub protocol: PublicReviewProtocol,
    pub schedule: EpsNeSchedule,
    pub len_for_delta: u64,
    pub len_for_half_eps: u64,
    pub len_for_margin: u64,
    /// Chebyshev bound on `P~_f` at the chosen `L`.
    pub pf_bound: f64,
    pub loss_bound: f64,
}

pub fn construct_eps_ne(
    epsilon: f64,
    delta: f64,
    schedule: EpsNeSchedule,
    network: &NetworkConfig,
) -> Result<EpsNeConstruction> {
    check_positive("epsilon", epsilon)?;
    check_positive("delta", delta)?;
    schedule.validate(network)?;
    let n = network.n_nodes() as f64;
    let len_for_delta = schedule.min_len_for_loss(network, delta);
    let len_for_half_eps = schedule.min_len_for_loss(network, n * epsilon / 2.0);
    let margin_bound = schedule.margin_bound(epsilon);
    if !(margin_bound < u64::MAX as f64) {
        return Err(Error::Schedule(format!("review length bound {margin_bound} overflows")));
    }
    let len_for_margin = (ceil(margin_bound) as u64).max(1);
    let l = len_for_delta.max(len_for_half_eps).max(len_for_margin);
    let margin = schedule.margin(l);
    let protocol = PublicReviewProtocol::new(*network, margin, l, schedule.punish_len(l))
        .map_err(|e| Error::Schedule(format!("schedule yields an invalid protocol: {e}")))?;
    Ok(EpsNeConstruction {
        protocol,
        schedule,
        len_for_delta,
        len_for_half_eps,
        len_for_margin,
        pf_bound: chebyshev_pf_bound(network, margin, l)?,
        loss_bound: schedule.chebyshev_loss_bound(network, l),
    })
}

/// Default cap on the review length accepted by the best-response solver.
pub const BEST_RESPONSE_MAX_REVIEW: u64 = 400;

/// Convergence tolerance on the long-run value.
const VALUE_TOLERANCE: f64 = 1e-10;

/// Deterministic review-phase policy indexed by slot position and the number
/// of idle slots observed so far in the review.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "RawDecisionTable"))]
pub struct DecisionTable {
    review_len: u64,
    /// Row `t` has `t + 1` entries, one per possible idle count.
    rows: Vec<Vec<f64>>,
}

#[cfg(feature = "serde")]
#[derive(serde::Deserialize)]
struct RawDecisionTable {
    rows: Vec<Vec<f64>>,
}

#[cfg(feature = "serde")]
impl TryFrom<RawDecisionTable> for DecisionTable {
    type Error = Error;

    fn try_from(raw: RawDecisionTable) -> Result<Self> {
        Self::new(raw.rows)
    }
}

impl DecisionTable {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (t, row) in rows.iter().enumerate() {
            if row.len() != t + 1 {
                return Err(Error::Deviant(format!(
                    "decision table row {t} has {} entries, expected {}",
                    row.len(),
                    t + 1
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::Deviant(format!("decision table row {t} has a non-probability")));
            }
        }
        Ok(Self {
            review_len: rows.len() as u64,
            rows,
        })
    }

    /// Transmit with `base` until the review's idle count already exceeds
    /// `threshold` (so the test is passed whatever follows), then with
    /// `greedy`.
    pub fn pass_then_greedy(review_len: u64, threshold: i64, base: f64, greedy: f64) -> Result<Self> {
        let rows = (0..review_len as usize)
            .map(|t| {
                (0..=t)
                    .map(|i| if i as i64 > threshold { greedy } else { base })
                    .collect()
            })
            .collect();
        Self::new(rows)
    }

    pub fn review_len(&self) -> u64 {
        self.review_len
    }

    pub fn prob(&self, slot: usize, idle: usize) -> f64 {
        self.rows[slot][idle]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

/// Optimal long-run payoff of a single deviant against a public protocol,
/// with the maximizing stationary policy.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct BestResponse {
    pub value: f64,
    /// Punishment probability per epoch under the optimal policy.
    pub punish_prob: f64,
    pub policy: DecisionTable,
    pub iterations: u32,
}

/// Best response of one node to `proto` under the limit-of-means criterion.
pub fn best_response_value_public(proto: &PublicReviewProtocol) -> Result<f64> {
    Ok(best_response_public(proto)?.value)
}

pub fn best_response_public(proto: &PublicReviewProtocol) -> Result<BestResponse> {
    best_response_with_threshold(
        proto.network(),
        proto.review_len(),
        proto.punish_len(),
        proto.threshold(),
        BEST_RESPONSE_MAX_REVIEW,
    )
}

/// Best response against a review phase that punishes when the idle count is
/// `<= threshold`. A negative threshold never punishes.
///
/// Epochs (a review plus its punishment, if any) are renewal cycles, so the
/// long-run payoff of a stationary policy is `E[reward] / E[length]` per
/// epoch. The ratio is maximized by Dinkelbach iteration: for a guess `v`,
/// backward induction over `(slot, idle count)` maximizes
/// `E[reward - v * length]`, and `v` is reset to the ratio of the maximizing
/// policy until it stops moving.
///
/// Per slot, the reward and the idle-transition probability are affine in the
/// deviant's transmission probability, so each backward-induction step has an
/// optimum at 0 or 1 and deterministic policies suffice. Punishment slots pay
/// the deviant nothing whatever it does, since every compliant node transmits.
pub fn best_response_with_threshold(
    network: &NetworkConfig,
    review_len: u64,
    punish_len: u64,
    threshold: i64,
    max_review: u64,
) -> Result<BestResponse> {
    if review_len == 0 {
        return Err(Error::ZeroLength {
            what: "review length",
        });
    }
    if review_len > max_review {
        return Err(Error::StateSpaceCap {
            review_len,
            cap: max_review,
        });
    }
    let l = review_len as usize;
    let solo = network.others_wait();
    let m = punish_len as f64;

    let mut v = 0.0;
    let mut policy = alloc::vec![Vec::new(); l];
    let mut iterations = 0;
    let mut punish_prob;
    loop {
        iterations += 1;
        solve_for_rate(l, solo, m, threshold, v, &mut policy);
        let reward;
        (reward, punish_prob) = evaluate_policy(l, solo, threshold, &policy);
        let next = reward / (l as f64 + punish_prob * m);
        let delta = (next - v).abs();
        v = next;
        if delta <= VALUE_TOLERANCE || iterations >= 200 {
            break;
        }
    }
    Ok(BestResponse {
        value: v,
        punish_prob,
        policy: DecisionTable::new(policy)?,
        iterations,
    })
}

/// Backward induction maximizing `E[reward - rate * length]` over one epoch.
fn solve_for_rate(l: usize, solo: f64, m: f64, threshold: i64, rate: f64, policy: &mut [Vec<f64>]) {
    // value of the state at the end of the review, by idle count
    let mut next: Vec<f64> = (0..=l)
        .map(|i| if (i as i64) <= threshold { -rate * m } else { 0.0 })
        .collect();
    for t in (0..l).rev() {
        let mut cur = alloc::vec![0.0; t + 1];
        let row = &mut policy[t];
        row.clear();
        for i in 0..=t {
            // transmit: success w.p. solo, never idle
            let transmit = solo - rate + next[i];
            // wait: no reward, idle w.p. solo
            let wait = -rate + solo * next[i + 1] + (1.0 - solo) * next[i];
            if transmit >= wait {
                cur[i] = transmit;
                row.push(1.0);
            } else {
                cur[i] = wait;
                row.push(0.0);
            }
        }
        next = cur;
    }
}

/// Expected review reward and punishment probability of a (possibly mixed)
/// review policy, by forward propagation of the idle-count distribution.
fn evaluate_policy(l: usize, solo: f64, threshold: i64, policy: &[Vec<f64>]) -> (f64, f64) {
    let mut dist = alloc::vec![1.0];
    let mut reward = 0.0;
    for (t, row) in policy.iter().enumerate().take(l) {
        let mut nd = alloc::vec![0.0; t + 2];
        for (i, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let p = row[i];
            reward += mass * p * solo;
            let idle = (1.0 - p) * solo;
            nd[i + 1] += mass * idle;
            nd[i] += mass * (1.0 - idle);
        }
        dist = nd;
    }
    let punish: f64 = dist
        .iter()
        .enumerate()
        .filter(|&(i, _)| (i as i64) <= threshold)
        .map(|(_, &p)| p)
        .sum();
    (reward, punish)
}

/// Long-run payoff of a fixed review policy against the public protocol.
pub fn policy_value(
    network: &NetworkConfig,
    punish_len: u64,
    threshold: i64,
    policy: &DecisionTable,
) -> f64 {
    let l = policy.review_len() as usize;
    let (reward, punish) = evaluate_policy(l, network.others_wait(), threshold, policy.rows());
    reward / (l as f64 + punish * punish_len as f64)
}

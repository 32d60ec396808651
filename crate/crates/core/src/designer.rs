//! Complexity-constrained design of private review protocols.
//!
//! Minimizes efficiency loss over `(B, L, M)` subject to deviation-proofness
//! against a given `p_d` and a budget on the number of automaton states:
//!
//! 1. take a finite set of margins `B`;
//! 2. for each `B`, keep the review lengths `L` whose review states leave room
//!    for at least one reciprocation slot;
//! 3. set `M` to `ceil(M_min(B, L))` and drop the pair if `g <= 0` or the
//!    state count exceeds the budget;
//! 4. return the candidate with the smallest loss.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::game::NetworkConfig;
use crate::private::{
    analyze_private, ceil_len, check_deviation, deterrence_margin, efficiency_loss, min_recip_len, state_count,
    PrivateReviewProtocol, StateCount,
};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DesignProblem {
    b_grid: Vec<f64>,
    ns_budget: u64,
    p_d: f64,
    network: NetworkConfig,
}

impl DesignProblem {
    pub fn new(network: NetworkConfig, b_grid: Vec<f64>, ns_budget: u64, p_d: f64) -> Result<Self> {
        if b_grid.is_empty() {
            return Err(Error::Infeasible("empty margin grid".into()));
        }
        let q_c = network.ack_rate();
        for &b in &b_grid {
            if !(b > 0.0 && b < q_c) {
                return Err(Error::Margin { margin: b, upper: q_c });
            }
        }
        if ns_budget == 0 {
            return Err(Error::ZeroLength { what: "state budget" });
        }
        check_deviation(&network, p_d)?;
        Ok(Self {
            b_grid,
            ns_budget,
            p_d,
            network,
        })
    }

    pub fn b_grid(&self) -> &[f64] {
        &self.b_grid
    }

    pub fn ns_budget(&self) -> u64 {
        self.ns_budget
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    pub fn network(&self) -> &NetworkConfig {
        &self.network
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct DesignResult {
    pub protocol: PrivateReviewProtocol,
    pub deviation_prob: f64,
    pub efficiency_loss: f64,
    pub state_count: StateCount,
    /// Number of `(B, L, M)` triples meeting both constraints.
    pub feasible_count: u64,
}

/// One DP candidate that fits the budget.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct Candidate {
    pub margin: f64,
    pub review_len: u64,
    pub recip_len: u64,
    pub efficiency_loss: f64,
    pub states: u64,
}

/// Every feasible candidate, ordered by margin then review length.
pub fn feasible_candidates(problem: &DesignProblem) -> Result<Vec<Candidate>> {
    let net = &problem.network;
    let mut out = Vec::new();
    for &b in &problem.b_grid {
        for l in 1..=problem.ns_budget {
            let probe = PrivateReviewProtocol::new(*net, b, l, 1)?;
            let review_states = state_count(&probe).states - 2;
            if review_states + 2 > problem.ns_budget {
                // review states grow with L
                break;
            }
            let errors = probe.error_probs(Some(problem.p_d))?;
            let pm = errors.miss_detection.unwrap_or(0.0);
            let g = deterrence_margin(net, errors.false_punishment, pm, problem.p_d);
            let Some(m) = ceil_len(min_recip_len(net, l, g, problem.p_d)) else {
                continue;
            };
            let states = review_states + 2 * m;
            if states > problem.ns_budget {
                continue;
            }
            out.push(Candidate {
                margin: b,
                review_len: l,
                recip_len: m,
                efficiency_loss: efficiency_loss(net, l, m, errors.false_punishment),
                states,
            });
        }
    }
    Ok(out)
}

/// Minimum-loss candidate; ties go to the smaller `L`, then the smaller `M`.
pub fn solve_design(problem: &DesignProblem) -> Result<DesignResult> {
    let candidates = feasible_candidates(problem)?;
    let best = candidates.iter().min_by(|a, b| {
        a.efficiency_loss
            .total_cmp(&b.efficiency_loss)
            .then(a.review_len.cmp(&b.review_len))
            .then(a.recip_len.cmp(&b.recip_len))
    });
    let Some(best) = best else {
        return Err(Error::Infeasible(infeasibility_report(problem)?));
    };
    let protocol = PrivateReviewProtocol::new(problem.network, best.margin, best.review_len, best.recip_len)?;
    let check = analyze_private(&protocol, problem.p_d)?;
    let sc = state_count(&protocol);
    if !check.is_dp || sc.states > problem.ns_budget {
        return Err(Error::Infeasible(format!(
            "selected protocol (B={}, L={}, M={}) failed re-verification",
            best.margin, best.review_len, best.recip_len
        )));
    }
    Ok(DesignResult {
        protocol,
        deviation_prob: problem.p_d,
        efficiency_loss: best.efficiency_loss,
        state_count: sc,
        feasible_count: candidates.len() as u64,
    })
}

fn infeasibility_report(problem: &DesignProblem) -> Result<alloc::string::String> {
    let net = &problem.network;
    let (mut fitting, mut positive, mut smallest_needed) = (0u64, 0u64, None::<u64>);
    for &b in &problem.b_grid {
        for l in 1..=problem.ns_budget {
            let probe = PrivateReviewProtocol::new(*net, b, l, 1)?;
            let review_states = state_count(&probe).states - 2;
            if review_states + 2 > problem.ns_budget {
                break;
            }
            fitting += 1;
            let errors = probe.error_probs(Some(problem.p_d))?;
            let pm = errors.miss_detection.unwrap_or(0.0);
            let g = deterrence_margin(net, errors.false_punishment, pm, problem.p_d);
            if let Some(m) = ceil_len(min_recip_len(net, l, g, problem.p_d)) {
                positive += 1;
                let need = review_states + 2 * m;
                smallest_needed = Some(smallest_needed.map_or(need, |s| s.min(need)));
            }
        }
    }
    Ok(format!(
        "budget {} states: {fitting} (B, L) pairs fit with M = 1, {positive} have g > 0, smallest DP automaton needs {}",
        problem.ns_budget,
        smallest_needed.map_or_else(|| "n/a".into(), |s| format!("{s} states"))
    ))
}

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::automaton::{validate_params, Automaton, Phase, SignalMode};
use super::{DeviantPolicy, Estimate, SimConfig, SimReport};
use crate::error::Result;
use crate::math::sqrt;
use crate::public::{best_response_public, DecisionTable, PublicReviewProtocol};

#[derive(Debug, Clone, PartialEq)]
enum Behavior {
    Compliant,
    Constant(f64),
    PunishAware { p_d: f64, p_r: f64 },
    Table(DecisionTable),
}

/// A validated configuration with deviant strategies resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    cfg: SimConfig,
    threshold: i64,
    behaviors: Vec<Behavior>,
}

impl Prepared {
    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn report(&self, tally: &Tally) -> SimReport {
        tally.report(&self.cfg)
    }
}

pub fn prepare(cfg: &SimConfig) -> Result<Prepared> {
    cfg.validate()?;
    let threshold = validate_params(cfg.signal, cfg.network, cfg.margin, cfg.review_len, cfg.recip_len)?;
    let mut behaviors = vec![Behavior::Compliant; cfg.network.n_nodes()];
    for d in &cfg.deviants {
        behaviors[d.node_index] = match &d.policy {
            DeviantPolicy::Constant { p } => Behavior::Constant(*p),
            DeviantPolicy::PunishAware { p_d, p_r } => Behavior::PunishAware { p_d: *p_d, p_r: *p_r },
            DeviantPolicy::Adaptive { table } => Behavior::Table(table.clone()),
            DeviantPolicy::BestResponse => {
                let proto = PublicReviewProtocol::new(cfg.network, cfg.margin, cfg.review_len, cfg.recip_len)?;
                Behavior::Table(best_response_public(&proto)?.policy)
            }
        };
    }
    Ok(Prepared {
        cfg: cfg.clone(),
        threshold,
        behaviors,
    })
}

/// Integer sums over the epochs of one or more replications.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tally {
    pub epochs: u64,
    pub slots: u64,
    pub len_sq: u128,
    pub reward: Vec<u64>,
    pub reward_sq: Vec<u128>,
    pub reward_len: Vec<u128>,
    pub compliant_reward: u64,
    pub compliant_reward_sq: u128,
    pub compliant_reward_len: u128,
    /// Epochs in which at least one compliant node failed its test.
    pub punished: u64,
    pub histograms: Vec<Vec<u64>>,
}

impl Tally {
    pub fn empty(cfg: &SimConfig) -> Self {
        let n = cfg.network.n_nodes();
        let hists = match cfg.signal {
            SignalMode::Private => n,
            SignalMode::Public => 1,
        };
        Self {
            epochs: 0,
            slots: 0,
            len_sq: 0,
            reward: vec![0; n],
            reward_sq: vec![0; n],
            reward_len: vec![0; n],
            compliant_reward: 0,
            compliant_reward_sq: 0,
            compliant_reward_len: 0,
            punished: 0,
            histograms: vec![vec![0; cfg.review_len as usize + 1]; hists],
        }
    }

    pub fn merge(&mut self, other: &Tally) {
        self.epochs += other.epochs;
        self.slots += other.slots;
        self.len_sq += other.len_sq;
        for i in 0..self.reward.len() {
            self.reward[i] += other.reward[i];
            self.reward_sq[i] += other.reward_sq[i];
            self.reward_len[i] += other.reward_len[i];
        }
        self.compliant_reward += other.compliant_reward;
        self.compliant_reward_sq += other.compliant_reward_sq;
        self.compliant_reward_len += other.compliant_reward_len;
        self.punished += other.punished;
        for (mine, theirs) in self.histograms.iter_mut().zip(&other.histograms) {
            for (a, b) in mine.iter_mut().zip(theirs) {
                *a += b;
            }
        }
    }

    fn record_epoch(&mut self, rewards: &[u64], compliant: &[bool], len: u64, punished: bool) {
        let l = len as u128;
        self.epochs += 1;
        self.slots += len;
        self.len_sq += l * l;
        let mut c = 0u64;
        for (i, &r) in rewards.iter().enumerate() {
            self.reward[i] += r;
            self.reward_sq[i] += (r as u128) * (r as u128);
            self.reward_len[i] += r as u128 * l;
            if compliant[i] {
                c += r;
            }
        }
        self.compliant_reward += c;
        self.compliant_reward_sq += (c as u128) * (c as u128);
        self.compliant_reward_len += c as u128 * l;
        self.punished += punished as u64;
    }

    fn ratio(&self, sum_r: u64, sum_r2: u128, sum_rl: u128, scale: f64) -> Estimate {
        let n = self.epochs as f64;
        let (sr, sl) = (sum_r as f64, self.slots as f64);
        let r = sr / sl;
        let ss = sum_r2 as f64 - 2.0 * r * sum_rl as f64 + r * r * self.len_sq as f64;
        let mean_len = sl / n;
        let se = if self.epochs > 1 {
            sqrt(ss.max(0.0) / (n * (n - 1.0))) / mean_len
        } else {
            f64::NAN
        };
        Estimate {
            mean: r / scale,
            se: se / scale,
        }
    }

    fn proportion(&self, hits: u64) -> Estimate {
        let n = self.epochs as f64;
        let p = hits as f64 / n;
        Estimate {
            mean: p,
            se: sqrt(p * (1.0 - p) / n),
        }
    }

    pub fn report(&self, cfg: &SimConfig) -> SimReport {
        let n = cfg.network.n_nodes();
        let node_payoffs = (0..n)
            .map(|i| self.ratio(self.reward[i], self.reward_sq[i], self.reward_len[i], 1.0))
            .collect();
        let n_compliant = (0..n).filter(|&i| !cfg.is_deviant(i)).count();
        let compliant_payoff = (n_compliant > 0).then(|| {
            self.ratio(
                self.compliant_reward,
                self.compliant_reward_sq,
                self.compliant_reward_len,
                n_compliant as f64,
            )
        });
        let false_punishment = cfg.deviants.is_empty().then(|| self.proportion(self.punished));
        let miss_detection = (cfg.deviants.len() == 1).then(|| self.proportion(self.epochs - self.punished));
        SimReport {
            config: cfg.clone(),
            epochs: self.epochs,
            slots: self.slots,
            node_payoffs,
            compliant_payoff,
            false_punishment,
            miss_detection,
            review_histograms: self.histograms.clone(),
        }
    }
}

fn draw(rng: &mut ChaCha8Rng, p: f64) -> bool {
    if p >= 1.0 {
        true
    } else if p <= 0.0 {
        false
    } else {
        rng.random::<f64>() < p
    }
}

fn replication_rng(master_seed: u64, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index as u64);
    rng
}

/// Simulates the epochs assigned to replication `index`.
pub fn run_replication(prep: &Prepared, index: u32) -> Tally {
    let cfg = &prep.cfg;
    let mut rng = replication_rng(cfg.master_seed, index);
    let epochs = cfg.epochs_for(index);
    match cfg.signal {
        SignalMode::Private => run_private(prep, &mut rng, epochs),
        SignalMode::Public => run_public(prep, &mut rng, epochs),
    }
}

fn run_private(prep: &Prepared, rng: &mut ChaCha8Rng, epochs: u64) -> Tally {
    let cfg = &prep.cfg;
    let n = cfg.network.n_nodes();
    let p_c = cfg.network.coop_prob();
    let compliant: Vec<bool> = (0..n).map(|i| !cfg.is_deviant(i)).collect();
    let mut tally = Tally::empty(cfg);
    let mut automata = vec![Automaton::new(SignalMode::Private, cfg.review_len, cfg.recip_len, prep.threshold); n];
    let mut transmit = vec![false; n];
    let mut rewards = vec![0u64; n];
    let mut acks = vec![0u64; n];
    let mut passed = vec![true; n];
    let epoch_len = cfg.review_len + cfg.recip_len;
    for _ in 0..epochs {
        rewards.fill(0);
        acks.fill(0);
        for slot in 0..epoch_len {
            for i in 0..n {
                let a = &automata[i];
                let p = match &prep.behaviors[i] {
                    Behavior::Compliant => a.prescribed_prob(p_c),
                    Behavior::Constant(p) => *p,
                    Behavior::PunishAware { p_d, p_r } => match a.phase() {
                        Phase::Review { .. } => p_c,
                        Phase::Cooperate { .. } => *p_d,
                        Phase::Punish { .. } => *p_r,
                    },
                    Behavior::Table(_) => unreachable!("rejected by validation"),
                };
                transmit[i] = draw(rng, p);
            }
            let mut senders = transmit.iter().enumerate().filter(|(_, &t)| t).map(|(i, _)| i);
            let lone = match (senders.next(), senders.next()) {
                (Some(i), None) => Some(i),
                _ => None,
            };
            if let Some(i) = lone {
                rewards[i] += 1;
            }
            let in_review = slot < cfg.review_len;
            for (i, a) in automata.iter_mut().enumerate() {
                let ack = lone == Some(i);
                if in_review {
                    acks[i] += ack as u64;
                }
                let step = a.observe(ack);
                if let Some(p) = step.review_passed {
                    passed[i] = p;
                }
                debug_assert_eq!(step.epoch_end, slot + 1 == epoch_len);
            }
        }
        for (h, &c) in tally.histograms.iter_mut().zip(&acks) {
            h[c as usize] += 1;
        }
        let punished = (0..n).any(|i| compliant[i] && !passed[i]);
        tally.record_epoch(&rewards, &compliant, epoch_len, punished);
    }
    tally
}

fn run_public(prep: &Prepared, rng: &mut ChaCha8Rng, epochs: u64) -> Tally {
    let cfg = &prep.cfg;
    let n = cfg.network.n_nodes();
    let p_c = cfg.network.coop_prob();
    let compliant: Vec<bool> = (0..n).map(|i| !cfg.is_deviant(i)).collect();
    let mut tally = Tally::empty(cfg);
    // one automaton stands for every node: they all see the same signal
    let mut automaton = Automaton::new(SignalMode::Public, cfg.review_len, cfg.recip_len, prep.threshold);
    let mut rewards = vec![0u64; n];
    for _ in 0..epochs {
        rewards.fill(0);
        let mut idle = 0u64;
        let mut len = 0u64;
        let mut punished = false;
        loop {
            let phase = automaton.phase();
            let mut senders = 0usize;
            let mut last = 0usize;
            for i in 0..n {
                let p = match (&prep.behaviors[i], phase) {
                    (Behavior::Compliant, _) => automaton.prescribed_prob(p_c),
                    (Behavior::Constant(p), _) => *p,
                    (Behavior::PunishAware { p_r, .. }, Phase::Punish { .. }) => *p_r,
                    (Behavior::PunishAware { p_d, .. }, Phase::Cooperate { .. }) => *p_d,
                    (Behavior::PunishAware { .. }, Phase::Review { .. }) => p_c,
                    (Behavior::Table(t), Phase::Review { slot, .. }) => t.prob(slot as usize, idle as usize),
                    (Behavior::Table(_), _) => 1.0,
                };
                if draw(rng, p) {
                    senders += 1;
                    last = i;
                }
            }
            if senders == 1 {
                rewards[last] += 1;
            }
            let is_idle = senders == 0;
            if matches!(phase, Phase::Review { .. }) {
                idle += is_idle as u64;
            }
            len += 1;
            let step = automaton.observe(is_idle);
            if let Some(p) = step.review_passed {
                tally.histograms[0][idle as usize] += 1;
                punished = !p;
            }
            if step.epoch_end {
                break;
            }
        }
        tally.record_epoch(&rewards, &compliant, len, punished);
    }
    tally
}

/// Runs every replication in order and merges the tallies.
pub fn simulate(cfg: &SimConfig) -> Result<SimReport> {
    let prep = prepare(cfg)?;
    let mut total = Tally::empty(cfg);
    for index in 0..cfg.replications {
        total.merge(&run_replication(&prep, index));
    }
    Ok(prep.report(&total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::private::{analyze_private, PrivateReviewProtocol};
    use crate::public::analyze_public;
    use crate::sim::{DeviantSpec, SimConfig};
    use crate::NetworkConfig;

    fn public_cfg(epochs: u64) -> SimConfig {
        let mut cfg = SimConfig::new(NetworkConfig::new(5).unwrap(), SignalMode::Public, 0.1, 50, 125);
        cfg.epochs = epochs;
        cfg.master_seed = 7;
        cfg
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = public_cfg(3000);
        assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        let mut other = cfg.clone();
        other.master_seed = 8;
        assert_ne!(simulate(&cfg).unwrap(), simulate(&other).unwrap());
    }

    #[test]
    fn merge_order_is_irrelevant() {
        let mut cfg = public_cfg(4001);
        cfg.replications = 4;
        let prep = prepare(&cfg).unwrap();
        let parts: Vec<Tally> = (0..4).map(|i| run_replication(&prep, i)).collect();
        let mut fwd = Tally::empty(&cfg);
        for p in &parts {
            fwd.merge(p);
        }
        let mut rev = Tally::empty(&cfg);
        for p in parts.iter().rev() {
            rev.merge(p);
        }
        assert_eq!(fwd, rev);
        assert_eq!(fwd.epochs, 4001);
    }

    #[test]
    fn public_compliant_rates_match() {
        let cfg = public_cfg(20_000);
        let r = simulate(&cfg).unwrap();
        let proto = PublicReviewProtocol::new(cfg.network, 0.1, 50, 125).unwrap();
        let a = analyze_public(&proto, 1.0).unwrap();
        let fp = r.false_punishment.unwrap();
        assert!((fp.mean - a.errors.false_punishment).abs() < 4.0 * fp.se);
        let pay = r.compliant_payoff.unwrap();
        assert!((pay.mean - a.payoff_compliant).abs() < 4.0 * pay.se);
        assert!(r.miss_detection.is_none());
        assert_eq!(r.review_histograms.len(), 1);
        assert_eq!(r.review_histograms[0].iter().sum::<u64>(), 20_000);
    }

    #[test]
    fn punish_aware_deviant_gains_in_private_mode() {
        let net = NetworkConfig::new(5).unwrap();
        let mut cfg = SimConfig::new(net, SignalMode::Private, 0.04, 23, 94);
        cfg.epochs = 4000;
        cfg.master_seed = 11;
        cfg.deviants = vec![DeviantSpec {
            node_index: 2,
            policy: DeviantPolicy::PunishAware { p_d: 0.7, p_r: 1.0 },
        }];
        let r = simulate(&cfg).unwrap();
        let dev = r.node_payoffs[2];
        let comp = r.compliant_payoff.unwrap();
        assert!(dev.mean > comp.mean + 3.0 * (dev.se + comp.se), "{dev:?} vs {comp:?}");
        // the constant deviation is deterred by the same protocol
        let proto = PrivateReviewProtocol::new(net, 0.04, 23, 94).unwrap();
        assert!(analyze_private(&proto, 0.7).unwrap().is_dp);
    }

    #[test]
    fn invalid_deviants_rejected() {
        let mut cfg = public_cfg(10);
        cfg.deviants = vec![DeviantSpec::constant(5, 0.5)];
        assert!(prepare(&cfg).is_err());
        cfg.deviants = vec![DeviantSpec::constant(1, 0.5), DeviantSpec::constant(1, 0.7)];
        assert!(prepare(&cfg).is_err());
        cfg.deviants = vec![DeviantSpec::constant(1, 1.5)];
        assert!(prepare(&cfg).is_err());
        let mut private = cfg.clone();
        private.signal = SignalMode::Private;
        private.margin = 0.04;
        private.deviants = vec![DeviantSpec {
            node_index: 0,
            policy: DeviantPolicy::BestResponse,
        }];
        assert!(prepare(&private).is_err());
    }

    #[test]
    fn private_epochs_are_aligned() {
        let net = NetworkConfig::new(3).unwrap();
        let mut cfg = SimConfig::new(net, SignalMode::Private, 0.05, 12, 9);
        cfg.epochs = 500;
        let r = simulate(&cfg).unwrap();
        assert_eq!(r.slots, 500 * 21);
        assert_eq!(r.review_histograms.len(), 3);
        for h in &r.review_histograms {
            assert_eq!(h.iter().sum::<u64>(), 500);
        }
        let total: f64 = r.node_payoffs.iter().map(|e| e.mean).sum();
        assert!(total <= 1.0);
    }
}

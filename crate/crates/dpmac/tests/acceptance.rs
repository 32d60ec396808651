//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::process::Command;
use std::time::Instant;

use dpmac_core::private::{
    analyze_private, construct_robust_eps_dp, deviation_grid, PrivateReviewProtocol, ROBUSTNESS_GRID_STEP,
};
use dpmac_core::public::{
    analyze_public, best_response_public, construct_eps_ne, deviation_payoff_upper_bound, policy_value, DecisionTable,
    EpsNeSchedule, PublicReviewProtocol,
};
use dpmac_core::sim::{compare_to_analytic, Analytic, DeviantSpec, SignalMode, SimConfig};
use dpmac_core::stats::{binom_pmf, chebyshev_pf_bound, chi_square_gof};
use dpmac_core::{Error, NetworkConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn net5() -> NetworkConfig {
    NetworkConfig::new(5).unwrap()
}

fn dpmac(args: &[&str]) -> (i32, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_dpmac"))
        .args(args)
        .env_remove("DPMAC_OUT_DIR")
        .output()
        .expect("run dpmac");
    (out.status.code().unwrap_or(-1), out.stdout)
}

fn design_table() -> Outcome {
    const TABLE: [(f64, u64, u64, f64); 9] = [
        (0.6, 22, 101, 0.0570),
        (0.65, 23, 101, 0.0490),
        (0.7, 23, 94, 0.0483),
        (0.75, 23, 91, 0.0480),
        (0.8, 23, 90, 0.0479),
        (0.85, 23, 92, 0.0481),
        (0.9, 23, 96, 0.0485),
        (0.95, 23, 102, 0.0490),
        (1.0, 22, 106, 0.0575),
    ];
    let start = Instant::now();
    let mut errs = Vec::new();
    for (p_d, l, m, c) in TABLE {
        let pd = p_d.to_string();
        let (code, stdout) = dpmac(&["design", "--signal", "private", "--n", "5", "--b", "0.04", "--ns-budget", "256", "--pd", &pd]);
        if code != 0 {
            errs.push(format!("p_d={p_d}: exit {code}"));
            continue;
        }
        let doc: Value = serde_json::from_slice(&stdout).map_err(|e| e.to_string())?;
        let r = &doc["results"][0];
        let got = (r["L"].as_u64(), r["M"].as_u64(), r["efficiency_loss"].as_f64().unwrap_or(f64::NAN));
        if got.0 != Some(l) || got.1 != Some(m) || (got.2 - c).abs() > 5e-4 {
            errs.push(format!("p_d={p_d}: got {got:?}, want ({l}, {m}, {c})"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        errs.push(format!("took {secs:.1} s"));
    }
    if errs.is_empty() {
        Ok(format!("9/9 columns match, {secs:.2} s"))
    } else {
        Err(errs.join("; "))
    }
}

fn threshold_constants() -> Outcome {
    let net = net5();
    let ack = net.ack_rate() - net.ack_rate_with_deviant(0.7);
    let idle = net.idle_rate() - net.idle_rate_with_deviant(0.7);
    if (ack - 0.0512).abs() <= 1e-12 && (idle - 0.2048).abs() <= 1e-12 {
        Ok(format!("q_c - q_d = {ack}, q~_c - q~_d = {idle}"))
    } else {
        Err(format!("q_c - q_d = {ack}, q~_c - q~_d = {idle}"))
    }
}

fn asymptotic_tests() -> Outcome {
    let net = net5();
    let private = |b: f64, l: u64| {
        let e = PrivateReviewProtocol::new(net, b, l, 1).unwrap().error_probs(Some(0.7)).unwrap();
        (e.false_punishment, e.miss_detection.unwrap())
    };
    let public = |b: f64, l: u64| {
        let e = PublicReviewProtocol::new(net, b, l, 1).unwrap().error_probs(Some(0.7)).unwrap();
        (e.false_punishment, e.miss_detection.unwrap())
    };
    let first = |cap: u64, ok: &dyn Fn(u64) -> bool| (1..=cap).find(|&l| ok(l));
    let checks = [
        ("ack B=0.04 both <= 1e-3", first(4096, &|l| { let (f, m) = private(0.04, l); f <= 1e-3 && m <= 1e-3 })),
        ("ack B=0.06 P_m >= 0.99", first(8192, &|l| private(0.06, l).1 >= 0.99)),
        ("idle B=0.15 both <= 1e-3", first(4096, &|l| { let (f, m) = public(0.15, l); f <= 1e-3 && m <= 1e-3 })),
        ("idle B=0.25 P_m >= 0.99", first(8192, &|l| public(0.25, l).1 >= 0.99)),
    ];
    let text: Vec<String> = checks.iter().map(|(n, l)| format!("{n} at L={l:?}")).collect();
    if checks.iter().all(|(_, l)| l.is_some()) {
        Ok(text.join(", "))
    } else {
        Err(text.join(", "))
    }
}

fn random_network(rng: &mut ChaCha8Rng) -> NetworkConfig {
    let n = rng.random_range(2..=8);
    if rng.random_bool(0.5) {
        NetworkConfig::new(n).unwrap()
    } else {
        NetworkConfig::with_coop_prob(n, rng.random_range(0.02..0.6)).unwrap()
    }
}

fn boundary_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut private_done, mut public_done, mut violations, mut below_checked) = (0, 0, Vec::new(), 0);
    let mut attempts = 0;
    while (private_done < 1000 || public_done < 1000) && attempts < 200_000 {
        attempts += 1;
        let net = random_network(&mut rng);
        let l = rng.random_range(1..=200u64);
        let p_d = rng.random_range(net.coop_prob()..=1.0);
        if p_d <= net.coop_prob() {
            continue;
        }
        let private_turn = private_done < 1000 && (public_done >= 1000 || rng.random_bool(0.5));
        let (g, m_min, gain_at): (f64, f64, Box<dyn Fn(u64) -> f64>) = if private_turn {
            let b = rng.random_range(0.0..1.0) * net.ack_rate();
            let Ok(p) = PrivateReviewProtocol::new(net, b, l, 1) else { continue };
            let a = analyze_private(&p, p_d).unwrap();
            (a.deterrence_margin, a.min_recip_len, Box::new(move |m| {
                analyze_private(&p.with_recip_len(m).unwrap(), p_d).unwrap().deviation_gain
            }))
        } else {
            let b = rng.random_range(0.0..1.0) * net.idle_rate();
            let Ok(p) = PublicReviewProtocol::new(net, b, l, 1) else { continue };
            let a = analyze_public(&p, p_d).unwrap();
            (a.deterrence_margin, a.min_punish_len, Box::new(move |m| {
                analyze_public(&p.with_punish_len(m).unwrap(), p_d).unwrap().deviation_gain
            }))
        };
        if !(g > 0.0) || m_min > 1e9 {
            continue;
        }
        let m = (m_min.ceil() as u64).max(1);
        if gain_at(m) > 1e-15 {
            violations.push(format!("gain {} > 0 at M={m} (M_min={m_min})", gain_at(m)));
        }
        let below = if m_min.fract() == 0.0 { m_min as u64 - 1 } else { m_min.floor() as u64 };
        if below >= 1 {
            below_checked += 1;
            if !(gain_at(below) > 0.0) {
                violations.push(format!("gain {} <= 0 at M={below} (M_min={m_min})", gain_at(below)));
            }
        }
        if private_turn {
            private_done += 1;
        } else {
            public_done += 1;
        }
    }
    let summary = format!(
        "{private_done} private + {public_done} public instances, {below_checked} below-threshold checks, {} violations",
        violations.len()
    );
    if violations.is_empty() && private_done == 1000 && public_done == 1000 {
        Ok(summary)
    } else {
        Err(format!("{summary}: {}", violations.iter().take(3).cloned().collect::<Vec<_>>().join("; ")))
    }
}

fn monotonicity_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bad = Vec::new();
    // nonnegative loss at p_c = 1/N
    for _ in 0..1000 {
        let net = NetworkConfig::new(rng.random_range(2..=8)).unwrap();
        let b = rng.random_range(0.001..0.999) * net.ack_rate();
        let p = PrivateReviewProtocol::new(net, b, rng.random_range(1..=400), rng.random_range(1..=2000)).unwrap();
        let c = analyze_private(&p, 1.0).unwrap().efficiency_loss;
        if c < -1e-15 {
            bad.push(format!("loss {c} at {p:?}"));
        }
    }
    // error probabilities monotone in the margin
    for public in [false, true] {
        for _ in 0..1000 {
            let net = random_network(&mut rng);
            let l = rng.random_range(1..=2000u64);
            let p_d = net.coop_prob() + rng.random_range(0.01..1.0) * (1.0 - net.coop_prob());
            let upper = if public { net.idle_rate() } else { net.ack_rate() };
            let (mut b1, mut b2) = (rng.random_range(0.001..0.999) * upper, rng.random_range(0.001..0.999) * upper);
            if b1 > b2 {
                std::mem::swap(&mut b1, &mut b2);
            }
            let probs = |b: f64| {
                let e = if public {
                    PublicReviewProtocol::new(net, b, l, 1).unwrap().error_probs(Some(p_d)).unwrap()
                } else {
                    PrivateReviewProtocol::new(net, b, l, 1).unwrap().error_probs(Some(p_d)).unwrap()
                };
                (e.false_punishment, e.miss_detection.unwrap())
            };
            let ((f1, m1), (f2, m2)) = (probs(b1), probs(b2));
            if f1 < f2 - 1e-15 || m1 > m2 + 1e-15 {
                bad.push(format!("public={public} N={} L={l} B {b1}->{b2}: pf {f1}->{f2}, pm {m1}->{m2}", net.n_nodes()));
            }
        }
    }
    if bad.is_empty() {
        Ok("3 x 1000 instances, 0 violations".into())
    } else {
        Err(format!("{} violations: {}", bad.len(), bad.iter().take(3).cloned().collect::<Vec<_>>().join("; ")))
    }
}

fn public_monte_carlo() -> Outcome {
    let start = Instant::now();
    let net = net5();
    let proto = PublicReviewProtocol::new(net, 0.1, 50, 125).unwrap();
    let analysis = Analytic::Public(analyze_public(&proto, 1.0).unwrap());
    let mut cfg = SimConfig::new(net, SignalMode::Public, 0.1, 50, 125);
    cfg.epochs = 100_000;
    cfg.replications = 16;
    cfg.master_seed = 6;
    let mut records = compare_to_analytic(&dpmac::run(&cfg).unwrap(), &analysis).unwrap();
    cfg.deviants = vec![DeviantSpec::constant(0, 1.0)];
    records.extend(compare_to_analytic(&dpmac::run(&cfg).unwrap(), &analysis).unwrap());
    let secs = start.elapsed().as_secs_f64();
    let text: Vec<String> = records.iter().map(|r| format!("{} z={:.2}", r.quantity, r.z)).collect();
    let wanted = ["false_punishment", "compliant_payoff", "deviator_payoff"];
    let all_there = wanted.iter().all(|w| records.iter().any(|r| r.quantity == *w));
    if all_there && records.iter().all(|r| !r.flagged) && secs < 120.0 {
        Ok(format!("{}, {secs:.1} s", text.join(", ")))
    } else {
        Err(format!("{}, {secs:.1} s", text.join(", ")))
    }
}

fn private_marginals() -> Outcome {
    let net = net5();
    let (l, m) = (23u64, 94u64);
    let mut cfg = SimConfig::new(net, SignalMode::Private, 0.04, l, m);
    cfg.epochs = 100_000;
    cfg.replications = 16;
    cfg.master_seed = 7;
    let report = dpmac::run(&cfg).unwrap();
    let probs: Vec<f64> = (0..=l).map(|k| binom_pmf(k, l, net.ack_rate())).collect();
    let tests: Vec<_> = report.review_histograms.iter().map(|h| chi_square_gof(h, &probs, 5.0)).collect();
    let proto = PrivateReviewProtocol::new(net, 0.04, l, m).unwrap();
    let analysis = Analytic::Private(analyze_private(&proto, 1.0).unwrap());
    let recs = compare_to_analytic(&report, &analysis).unwrap();
    let pf = recs.iter().find(|r| r.quantity == "false_punishment").unwrap();
    let pay = recs.iter().find(|r| r.quantity == "compliant_payoff").unwrap();
    let pvals: Vec<String> = tests.iter().map(|t| format!("{:.3}", t.p_value)).collect();
    let text = format!(
        "chi-square p-values [{}]; joint P_f empirical {:.4} vs independence formula {:.4} (z={:.1}, informational); \
         compliant payoff {:.5} vs {:.5} (z={:.1}, informational)",
        pvals.join(", "),
        pf.empirical,
        pf.analytic,
        pf.z,
        pay.empirical,
        pay.analytic,
        pay.z
    );
    if tests.iter().all(|t| t.p_value >= 0.01) {
        Ok(text)
    } else {
        Err(text)
    }
}

fn robust_construction() -> Outcome {
    let net = net5();
    let (eps, delta) = (0.02, 0.05);
    let c = construct_robust_eps_dp(eps, delta, &net, 100_000).map_err(|e| e.to_string())?;
    let mut worst = f64::NEG_INFINITY;
    let mut points = 0;
    for p_d in deviation_grid(net.coop_prob(), ROBUSTNESS_GRID_STEP) {
        worst = worst.max(analyze_private(&c.protocol, p_d).unwrap().deviation_gain);
        points += 1;
    }
    let p_eps_err = (c.p_eps - (0.2 + eps / 0.4096)).abs();
    let text = format!(
        "L={}, M={}, B={}, max gain {worst:.3e} over {points} points, C={:.4}, |p_eps error|={p_eps_err:.1e}",
        c.protocol.review_len(),
        c.protocol.recip_len(),
        c.protocol.margin(),
        c.efficiency_loss
    );
    if worst <= eps && c.efficiency_loss <= delta && p_eps_err <= 1e-12 {
        Ok(text)
    } else {
        Err(text)
    }
}

fn enumerate_best(net: &NetworkConfig, l: usize, m: u64, threshold: i64) -> f64 {
    let states = l * (l + 1) / 2;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1 << states) {
        let mut bit = 0;
        let rows = (0..l)
            .map(|t| {
                (0..=t)
                    .map(|_| {
                        bit += 1;
                        ((mask >> (bit - 1)) & 1) as f64
                    })
                    .collect()
            })
            .collect();
        best = best.max(policy_value(net, m, threshold, &DecisionTable::new(rows).unwrap()));
    }
    best
}

fn best_response_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut bad = Vec::new();
    let mut bounded = 0;
    for _ in 0..50 {
        let net = NetworkConfig::new(rng.random_range(2..=6)).unwrap();
        let l = rng.random_range(1..=100u64);
        let b = rng.random_range(0.05..0.95) * net.idle_rate();
        let n1 = (net.n_nodes() - 1) as u64;
        let m = if rng.random_bool(0.5) {
            n1 * l + rng.random_range(1..=3 * l)
        } else {
            rng.random_range(1..=5 * l)
        };
        let proto = PublicReviewProtocol::new(net, b, l, m).unwrap();
        let v = best_response_public(&proto).unwrap().value;
        let best_const = deviation_grid(net.coop_prob(), ROBUSTNESS_GRID_STEP)
            .map(|p| analyze_public(&proto, p).unwrap().payoff_deviator)
            .fold(f64::NEG_INFINITY, f64::max);
        if v < best_const - 1e-12 {
            bad.push(format!("L={l} M={m}: value {v} below constant {best_const}"));
        }
        if m as f64 / l as f64 > n1 as f64 {
            bounded += 1;
            let sup = deviation_payoff_upper_bound(&proto, 0.0).unwrap();
            if v > sup + 1e-12 {
                bad.push(format!("L={l} M={m}: value {v} above q_c + B = {sup}"));
            }
        }
    }
    let mut enumerated = 0;
    for _ in 0..6 {
        let net = NetworkConfig::new(rng.random_range(2..=6)).unwrap();
        let l = rng.random_range(1..=6u64);
        let b = rng.random_range(0.05..0.95) * net.idle_rate();
        let m = rng.random_range(1..=40u64);
        let proto = PublicReviewProtocol::new(net, b, l, m).unwrap();
        let v = best_response_public(&proto).unwrap().value;
        let brute = enumerate_best(&net, l as usize, m, proto.threshold());
        enumerated += 1;
        if (v - brute).abs() > 1e-9 {
            bad.push(format!("L={l} M={m}: DP {v} vs enumeration {brute}"));
        }
    }
    // schedule arithmetic at a long review length
    let sched = EpsNeSchedule { beta: 1.0, rho: 0.75, mu: 5.0 };
    if (sched.margin_bound(0.05) - 2.56e6).abs() > 1e-6 || (sched.margin(10_000) - 0.1).abs() > 1e-15 {
        bad.push("schedule arithmetic".into());
    }
    for mu in [3.0, 4.0] {
        if !matches!(construct_eps_ne(0.05, 0.05, EpsNeSchedule { mu, ..sched }, &net5()), Err(Error::Schedule(_))) {
            bad.push(format!("mu={mu} accepted"));
        }
    }
    match construct_eps_ne(0.05, 0.05, sched, &net5()) {
        Ok(c) if c.protocol.review_len() == 2_560_000 && c.loss_bound <= 0.05 => {}
        other => bad.push(format!("eps-NE construction: {other:?}")),
    }
    for _ in 0..1000 {
        let l = rng.random_range(1..=3000u64);
        let b = rng.random_range(0.01..0.99) * net5().idle_rate();
        let pf = PublicReviewProtocol::new(net5(), b, l, 1).unwrap().error_probs(None).unwrap().false_punishment;
        if pf > chebyshev_pf_bound(&net5(), b, l).unwrap() + 1e-15 {
            bad.push(format!("Chebyshev bound violated at L={l} B={b}"));
        }
    }
    let text = format!(
        "50 protocols ({bounded} with M/L > N-1), {enumerated} enumerations, schedule + 1000 Chebyshev checks, {} violations",
        bad.len()
    );
    if bad.is_empty() {
        Ok(text)
    } else {
        Err(format!("{text}: {}", bad.iter().take(3).cloned().collect::<Vec<_>>().join("; ")))
    }
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("sim.json");
    let out = out.to_str().unwrap();
    let config = dir.path().join("cfg.json");
    std::fs::write(
        &config,
        r#"{"network": {"n_nodes": 4}, "signal": "public", "margin": 0.1, "review_len": 30, "recip_len": 100,
            "deviants": [{"node_index": 1, "policy": {"kind": "best_response"}}],
            "epochs": 20000, "replications": 4, "master_seed": 5}"#,
    )
    .map_err(|e| e.to_string())?;
    let config = config.to_str().unwrap();
    let runs: [&[&str]; 3] = [
        &["simulate", "--signal", "public", "--b", "0.1", "--l", "50", "--m", "125", "--epochs", "100000", "--seed", "42"],
        &["simulate", "--signal", "private", "--b", "0.04", "--l", "23", "--m", "94", "--epochs", "20000", "--seed", "42", "--deviant", "2:punish_aware:0.7"],
        &["simulate", "--config", config],
    ];
    for args in runs {
        let mut bytes = Vec::new();
        for _ in 0..2 {
            let mut full = args.to_vec();
            full.extend(["--out", out]);
            let (code, _) = dpmac(&full);
            if code != 0 {
                return Err(format!("{args:?} exited {code}"));
            }
            bytes.push(std::fs::read(out).map_err(|e| e.to_string())?);
        }
        if bytes[0] != bytes[1] {
            return Err(format!("{args:?}: outputs differ"));
        }
        let (_, a) = dpmac(args);
        let (_, b) = dpmac(args);
        if a != b {
            return Err(format!("{args:?}: stdout differs"));
        }
    }
    Ok("3 simulate invocations byte-identical across repeats (file and stdout)".into())
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("1 design table reproduction", design_table),
        ("2 threshold constants", threshold_constants),
        ("3 asymptotic test behaviour", asymptotic_tests),
        ("4 DP boundary at M_min", boundary_suite),
        ("5 monotonicity and nonnegativity", monotonicity_suite),
        ("6 public Monte-Carlo agreement", public_monte_carlo),
        ("7 private marginal agreement", private_marginals),
        ("8 robust epsilon-DP construction", robust_construction),
        ("9 best-response consistency", best_response_suite),
        ("10 simulate determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

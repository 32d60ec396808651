//! Regularized incomplete gamma and the chi-square goodness-of-fit test.

use alloc::vec::Vec;

use crate::math::{exp, ln, ln_gamma};

const MAX_ITER: u32 = 100_000;

/// Lower regularized incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_series(a, x)
    } else {
        1.0 - gamma_continued_fraction(a, x)
    }
}

/// Upper regularized incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_continued_fraction(a, x)
    }
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * f64::EPSILON {
            break;
        }
    }
    sum * exp(-x + a * ln(x) - ln_gamma(a))
}

fn gamma_continued_fraction(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let i = i as f64;
        let an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() <= f64::EPSILON {
            break;
        }
    }
    exp(-x + a * ln(x) - ln_gamma(a)) * h
}

/// Survival function of the chi-square distribution.
pub fn chi_square_sf(statistic: f64, dof: f64) -> f64 {
    gamma_q(dof / 2.0, statistic / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize))]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness-of-fit of `observed` counts against `expected_probs`.
///
/// Adjacent cells are pooled left to right until each pooled cell expects at
/// least `min_expected` observations; a short trailing remainder joins the
/// last pooled cell.
pub fn chi_square_gof(observed: &[u64], expected_probs: &[f64], min_expected: f64) -> ChiSquare {
    assert_eq!(observed.len(), expected_probs.len());
    let total: u64 = observed.iter().sum();
    let total = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp_count) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(expected_probs) {
        obs += o as f64;
        exp_count += p * total;
        if exp_count >= min_expected {
            cells.push((obs, exp_count));
            obs = 0.0;
            exp_count = 0.0;
        }
    }
    if exp_count > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += obs;
                last.1 += exp_count;
            }
            None => cells.push((obs, exp_count)),
        }
    }
    let statistic: f64 = cells
        .iter()
        .map(|&(o, e)| if e > 0.0 { (o - e) * (o - e) / e } else { 0.0 })
        .sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        chi_square_sf(statistic, dof as f64)
    };
    ChiSquare {
        statistic,
        dof,
        p_value,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_limits() {
        assert_eq!(gamma_p(2.0, 0.0), 0.0);
        assert_eq!(gamma_q(2.0, 0.0), 1.0);
        // P(1, x) = 1 - e^{-x}
        for &x in &[0.1, 1.0, 3.0, 20.0] {
            assert!((gamma_p(1.0, x) - (1.0 - libm::exp(-x))).abs() < 1e-14);
        }
    }

    #[test]
    fn chi_square_critical_values() {
        // upper 1% points: dof 1 -> 6.634896601, dof 10 -> 23.20925116
        assert!((chi_square_sf(6.634_896_601_021_214, 1.0) - 0.01).abs() < 1e-10);
        assert!((chi_square_sf(23.209_251_158_954_36, 10.0) - 0.01).abs() < 1e-10);
        assert!((chi_square_sf(2.0, 2.0) - libm::exp(-1.0)).abs() < 1e-14);
    }

    #[test]
    fn pooling_keeps_totals() {
        let obs = [1u64, 2, 50, 40, 5, 2];
        let probs = [0.01, 0.02, 0.5, 0.4, 0.05, 0.02];
        let r = chi_square_gof(&obs, &probs, 5.0);
        assert!(r.dof >= 1);
        assert!(r.p_value > 0.5);
    }
}

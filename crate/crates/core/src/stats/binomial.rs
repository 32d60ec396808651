//! Binomial pmf and cdf.
//!
//! The pmf uses Loader's saddle-point form (Stirling error plus the deviance
//! term `bd0`), which keeps full relative precision far into the tails. The
//! cdf sums pmf terms with compensated summation for `n <= DIRECT_SUM_MAX`
//! and switches to the regularized incomplete beta continued fraction above.

use crate::error::{check_probability, Error, Result};
use crate::math::{exp, floor, ln, ln_1p, ln_gamma, CompensatedSum};

/// Largest `n` for which [`binom_cdf`] sums pmf terms directly.
pub const DIRECT_SUM_MAX: u64 = 10_000;

const LN_2PI: f64 = 1.837_877_066_409_345_5;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

// stirlerr(n) for n = 1..=15.
const STIRLERR_SMALL: [f64; 15] = [
    0.081_061_466_795_327_26,
    0.041_340_695_955_409_29,
    0.027_677_925_684_998_34,
    0.020_790_672_103_765_09,
    0.016_644_691_189_821_19,
    0.013_876_128_823_070_75,
    0.011_896_709_945_891_77,
    0.010_411_265_261_972_1,
    0.009_255_462_182_712_733,
    0.008_330_563_433_362_871,
    0.007_573_675_487_951_841,
    0.006_942_840_107_209_53,
    0.006_408_994_188_004_207,
    0.005_951_370_112_758_848,
    0.005_554_733_551_962_801,
];

/// `ln(n!) - [(n + 1/2) ln n - n + ln sqrt(2 pi)]`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        if n >= 1.0 && floor(n) == n {
            return STIRLERR_SMALL[n as usize - 1];
        }
        return ln_gamma(n + 1.0) - (n + 0.5) * ln(n) + n - LN_SQRT_2PI;
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x/np) + np - x`, computed without cancellation.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        let mut j = 1.0;
        loop {
            ej *= v;
            let s1 = s + ej / (2.0 * j + 1.0);
            if s1 == s {
                return s1;
            }
            s = s1;
            j += 1.0;
        }
    }
    x * ln(x / np) + np - x
}

/// Natural log of the binomial pmf at `k` (may be `-inf`).
pub fn binom_ln_pmf(k: u64, n: u64, p: f64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if k == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let nf = n as f64;
    if k == 0 {
        if n == 0 {
            return 0.0;
        }
        return if p < 0.1 {
            -bd0(nf, nf * q) - nf * p
        } else {
            nf * ln(q)
        };
    }
    if k == n {
        return if q < 0.1 {
            -bd0(nf, nf * p) - nf * q
        } else {
            nf * ln(p)
        };
    }
    let x = k as f64;
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = LN_2PI + ln(x) + ln_1p(-x / nf);
    lc - 0.5 * lf
}

pub fn binom_pmf(k: u64, n: u64, p: f64) -> f64 {
    exp(binom_ln_pmf(k, n, p))
}

fn validate(n: u64, p: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::ZeroLength {
            what: "number of trials",
        });
    }
    check_probability("success probability", p)?;
    Ok(())
}

/// `F(y; n, p) = sum_{m=0}^{floor(y)} C(n,m) p^m (1-p)^(n-m)`.
///
/// Returns 0 when `floor(y) < 0` and 1 when `floor(y) >= n`.
pub fn binom_cdf(y: f64, n: u64, p: f64) -> Result<f64> {
    validate(n, p)?;
    if y.is_nan() {
        return Err(Error::OutOfRange {
            what: "cdf argument",
            range: "a number",
            value: y,
        });
    }
    let k = floor(y);
    if k < 0.0 {
        return Ok(0.0);
    }
    if k >= n as f64 {
        return Ok(1.0);
    }
    let k = k as u64;
    Ok(if n <= DIRECT_SUM_MAX {
        cdf_by_summation(k, n, p)
    } else {
        cdf_by_beta(k, n, p)
    })
}

/// Lower tail by compensated summation of pmf terms; `k < n`.
pub fn cdf_by_summation(k: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let mut acc = CompensatedSum::default();
    for m in 0..=k {
        acc.add(binom_pmf(m, n, p));
    }
    acc.value().min(1.0)
}

/// Lower tail through `F(k;n,p) = I_{1-p}(n-k, k+1)`; `k < n`.
pub fn cdf_by_beta(k: u64, n: u64, p: f64) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    if p == 1.0 {
        return 0.0;
    }
    let a = (n - k) as f64;
    let b = (k + 1) as f64;
    let x = 1.0 - p;
    if x < (a + 1.0) / (a + b + 2.0) {
        // x^a (1-x)^b / (a B(a,b)) = p * pmf(k)
        (p * binom_pmf(k, n, p) * beta_continued_fraction(a, b, x)).min(1.0)
    } else {
        // 1 - I_p(k+1, n-k), prefactor (1-p) * pmf(k+1)
        let upper = (1.0 - p) * binom_pmf(k + 1, n, p) * beta_continued_fraction(b, a, p);
        (1.0 - upper).max(0.0)
    }
}

/// Continued fraction for the regularized incomplete beta (modified Lentz).
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const MAX_ITER: u32 = 1_000_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
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
    h
}

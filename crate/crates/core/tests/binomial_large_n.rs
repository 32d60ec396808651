use dpmac_core::stats::binomial::{cdf_by_beta, DIRECT_SUM_MAX};
use dpmac_core::stats::binom_cdf;

// exact values from a 60-digit pmf recurrence
const ORACLE: &[(u64, f64, u64, f64)] = &[
    (100000, 0.08192, 7900, 0.0003649576203365802),
    (100000, 0.08192, 8192, 0.50294112525935665),
    (100000, 0.08192, 8300, 0.89438834505410689),
    (100000, 0.08192, 8500, 0.99979908343109133),
    (100000, 0.32768, 32000, 1.1034068427325583e-7),
    (100000, 0.32768, 32768, 0.50149828189019065),
    (100000, 0.32768, 33200, 0.99819873271149864),
    (2500000, 0.08192, 204000, 0.032550034395124234),
    (2500000, 0.08192, 204800, 0.50058823385715216),
    (2500000, 0.08192, 205500, 0.94684124439104818),
    (20000, 0.5, 9800, 0.0023904447279513218),
    (20000, 0.5, 10000, 0.50282091265611021),
    (20000, 0.5, 10100, 0.92238386273589669),
    (50000, 0.001, 30, 0.0015872640573796235),
    (50000, 0.001, 50, 0.53751669555159617),
    (50000, 0.001, 70, 0.99704288668705991),
];

#[test]
fn large_n_matches_high_precision_oracle() {
    for &(n, p, k, want) in ORACLE {
        assert!(n > DIRECT_SUM_MAX);
        let got = binom_cdf(k as f64, n, p).unwrap();
        let tol = 1e-12f64.max(1e-10 * want);
        assert!((got - want).abs() <= tol, "F({k}; {n}, {p}) = {got}, want {want}");
        assert_eq!(got, cdf_by_beta(k, n, p));
    }
}

#[test]
fn monotone_in_k_for_large_n() {
    let (n, p) = (300_000u64, 0.32768);
    let mut prev = 0.0;
    for k in (97_000..99_700).step_by(50) {
        let f = binom_cdf(k as f64, n, p).unwrap();
        assert!(f >= prev, "k={k}");
        prev = f;
    }
}

//! Binomial machinery and the error probabilities of the two review tests.

pub mod binomial;
pub mod special;

pub use binomial::{binom_cdf, binom_pmf};
pub use review_test::{
    ack_error_probs, chebyshev_pf_bound, idle_error_probs, review_threshold, AckTestConfig,
    ErrorProbabilities, IdleTestConfig,
};
pub use special::{chi_square_gof, ChiSquare};

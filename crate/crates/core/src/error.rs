use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[non_exhaustive]
pub enum Error {
    #[error("a network needs at least two nodes, got {0}")]
    TooFewNodes(usize),

    #[error("{what} must lie in {range}, got {value}")]
    OutOfRange {
        what: &'static str,
        range: &'static str,
        value: f64,
    },

    #[error("node index {index} out of range for {n_nodes} nodes")]
    NodeIndex { index: usize, n_nodes: usize },

    #[error("profile has {got} entries but the network has {expected} nodes")]
    ProfileLength { expected: usize, got: usize },

    #[error("margin {margin} must lie in (0, {upper})")]
    Margin { margin: f64, upper: f64 },

    #[error("{what} must be at least 1")]
    ZeroLength { what: &'static str },

    #[error("deviation probability {p_d} must exceed the cooperation probability {p_c}")]
    DeviationNotAbove { p_d: f64, p_c: f64 },

    #[error("no review length up to {l_cap} satisfies the requirements (best loss {best_loss:?})")]
    CapExhausted { l_cap: u64, best_loss: Option<f64> },

    #[error("design problem is infeasible: {0}")]
    Infeasible(String),

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("review length {review_len} exceeds the dynamic-programming cap {cap}")]
    StateSpaceCap { review_len: u64, cap: u64 },

    #[error("invalid deviant configuration: {0}")]
    Deviant(String),

    #[error("report and analysis do not describe the same configuration: {0}")]
    Mismatch(String),
}

impl Error {
    /// Whether the error reports an infeasible search rather than bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::CapExhausted { .. } | Error::Infeasible(_))
    }
}

pub(crate) fn check_probability(what: &'static str, value: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            what,
            range: "[0, 1]",
            value,
        })
    }
}

pub(crate) fn check_positive(what: &'static str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::OutOfRange {
            what,
            range: "(0, inf)",
            value,
        })
    }
}

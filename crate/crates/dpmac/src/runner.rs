//! Replications in parallel.

use dpmac_core::sim::{prepare, run_replication, SimConfig, SimReport, Tally};
use dpmac_core::Result;
use rayon::prelude::*;

/// Same report as [`dpmac_core::sim::simulate`], with replications spread
/// over the rayon pool. Tallies are merged in replication order.
pub fn run(cfg: &SimConfig) -> Result<SimReport> {
    let prep = prepare(cfg)?;
    let parts: Vec<Tally> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| run_replication(&prep, i))
        .collect();
    let mut total = Tally::empty(cfg);
    for p in &parts {
        total.merge(p);
    }
    Ok(prep.report(&total))
}

//! Fixtures shared by the benchmarks.

use std::collections::BTreeSet;

use fdc_core::topology::compose_star;
use fdc_core::{BranchSpec, Edge, Network, Result};

/// Eight ten-node palms around a hub: 81 nodes.
pub fn palm_star() -> Result<Network> {
    compose_star(&BranchSpec::palm(6, 3), 8)
}

/// A small star with every edge free, sized for one optimizer run.
pub fn small_free_star() -> Result<(Network, BTreeSet<Edge>)> {
    let net = compose_star(&BranchSpec::lollipop(4, 2), 3)?;
    let free = net.edges.iter().copied().collect();
    Ok((net, free))
}

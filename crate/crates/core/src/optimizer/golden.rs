use serde::{Deserialize, Serialize};

use super::objective;
use crate::error::{FdcError, Result};
use crate::topology::Network;
use crate::weighting::EdgeWeights;

/// Golden-section search for the minimum of a unimodal function on
/// `[lo, hi]`. Returns `(argmin, min)` once the bracket is narrower than `tol`.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(FdcError::InvalidSpec(format!(
            "golden section needs lo < hi and tol > 0 (got [{lo}, {hi}], {tol})"
        )));
    }
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc <= fd { (c, fc) } else { (d, fd) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeOptimum {
    pub bridge_weight: f64,
    pub slem: f64,
}

/// Sets every bridge edge to one common weight and minimizes the SLEM over
/// it on `[0, 1]`. `weights` must cover every other edge.
pub fn optimize_common_bridge(network: &Network, weights: &EdgeWeights, tol: f64) -> Result<BridgeOptimum> {
    let bridges = network.bridge_edges();
    if bridges.is_empty() {
        return Err(FdcError::InvalidSpec("network has no bridge edges".into()));
    }
    let mut w = EdgeWeights::new();
    for e in &network.edges {
        if !bridges.contains(e) {
            let v = weights
                .get(e)
                .ok_or_else(|| FdcError::MissingWeight(format!("edge {e}")))?;
            w.insert(*e, *v);
        }
    }
    let (bridge_weight, slem) = golden_section(
        |b| {
            for e in &bridges {
                w.insert(*e, b);
            }
            objective(network.node_count, &w)
        },
        0.0,
        1.0,
        tol,
    )?;
    Ok(BridgeOptimum { bridge_weight, slem })
}

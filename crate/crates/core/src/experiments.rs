//! Reproducible experiment drivers shared by the CLI, the acceptance suite
//! and the benches.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::Result;
use crate::optimizer::{
    certify_optimality, closed_form_candidate, minimize_slem, optimize_common_bridge, CertificationReport,
    OptConfig,
};
use crate::sim::{monte_carlo_matrices, SimConfig, SimResult, WeightingMethod, BRIDGE_TOL};
use crate::spectral::{
    closed_form_slem, eigenvalues_desc, multiset_deviation, slem_from_eigenvalues, ClosedFormNetwork,
};
use crate::topology::{attach_branch, compose_star, random_connected_core, BranchKind, BranchSpec, Edge, Network};
use crate::weighting::{
    closed_form_barbell, closed_form_internal_edges, closed_form_semicomplete_network, EdgeWeights, WeightMatrix,
};

/// Branches per star in the published comparison.
pub const STAR_BRANCHES: usize = 8;

/// Extra-edge probability of the random cores used for certification.
pub const CORE_EDGE_PROB: f64 = 0.5;

/// The five ten-node branches of the published comparison.
pub fn table1_specs() -> [BranchSpec; 5] {
    [
        BranchSpec::path(10),
        BranchSpec::lollipop(5, 5),
        BranchSpec::semi_complete(5, 2, 3),
        BranchSpec::ladder(1, 2, 2),
        BranchSpec::palm(4, 5),
    ]
}

/// Published SLEM values, columns in [`WeightingMethod::ALL`] order
/// (optimal, Metropolis, max-degree, best-constant).
pub fn published_table1(kind: BranchKind) -> [f64; 4] {
    match kind {
        BranchKind::Path => [0.99138, 0.99468, 0.9972, 0.99512],
        BranchKind::Lollipop => [0.99091, 0.9947, 0.99691, 0.994616],
        BranchKind::SemiComplete => [0.98939, 0.99412, 0.99587, 0.9928],
        BranchKind::Ladder => [0.98947, 0.99396, 0.99593, 0.9929],
        BranchKind::Palm => [0.99043, 0.9947, 0.99662, 0.99411],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Cell {
    pub branch: String,
    pub method: WeightingMethod,
    pub computed: f64,
    pub published: f64,
    /// `computed - published`, unclamped.
    pub deviation: f64,
    /// Common bridge weight, optimal column only.
    pub bridge_weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub cells: Vec<Table1Cell>,
}

impl Table1 {
    pub fn cell(&self, kind: BranchKind, method: WeightingMethod) -> Option<&Table1Cell> {
        let spec = table1_specs().into_iter().find(|s| s.kind == kind)?;
        let name = spec.to_string();
        self.cells.iter().find(|c| c.branch == name && c.method == method)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("branch,method,computed,published,deviation,bridge_weight\n");
        for c in &self.cells {
            let bridge = c.bridge_weight.map(|b| format!("{b:.12e}")).unwrap_or_default();
            out.push_str(&format!(
                "\"{}\",{},{:.12e},{},{:.6e},{}\n",
                c.branch, c.method, c.computed, c.published, c.deviation, bridge
            ));
        }
        out
    }
}

/// Optimal weights on a star of identical branches: closed forms inside the
/// branches and one common bridge weight.
pub fn star_optimal(network: &Network) -> Result<(WeightMatrix, f64, f64)> {
    let mut weights = closed_form_internal_edges(network);
    let opt = optimize_common_bridge(network, &weights, BRIDGE_TOL)?;
    for e in network.bridge_edges() {
        weights.insert(e, opt.bridge_weight);
    }
    Ok((
        WeightMatrix::from_edge_weights(network.node_count, &weights)?,
        opt.bridge_weight,
        opt.slem,
    ))
}

/// SLEM of every method on a star of eight copies of every table branch.
pub fn table1() -> Result<Table1> {
    let mut cells = Vec::new();
    for spec in table1_specs() {
        let net = compose_star(&spec, STAR_BRANCHES)?;
        let published = published_table1(spec.kind);
        for (method, paper) in WeightingMethod::ALL.into_iter().zip(published) {
            let (computed, bridge_weight) = match method {
                WeightingMethod::Optimal => {
                    let (_, bridge, slem) = star_optimal(&net)?;
                    (slem, Some(bridge))
                }
                other => {
                    let w = other.matrix(&net)?;
                    (slem_from_eigenvalues(&eigenvalues_desc(w.entries())?)?.slem, None)
                }
            };
            cells.push(Table1Cell {
                branch: spec.to_string(),
                method,
                computed,
                published: paper,
                deviation: computed - paper,
                bridge_weight,
            });
        }
    }
    Ok(Table1 { cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCheck {
    pub network: ClosedFormNetwork,
    pub predicted_slem: f64,
    pub computed_slem: f64,
    pub slem_deviation: f64,
    pub multiset_deviation: f64,
    pub predicted_zeros: usize,
    /// Zeros in the whole predicted multiset, path part included.
    pub predicted_total_zeros: usize,
    /// Eigenvalues with `|λ| ≤ 1e-9`.
    pub observed_zeros: usize,
    /// SLEM after optimizing every edge weight, when requested.
    pub optimized_slem: Option<f64>,
}

/// Zero threshold for counting decoupled eigenvalues.
pub const ZERO_EIGENVALUE_TOL: f64 = 1e-9;

pub fn default_spectrum_sweep() -> Vec<ClosedFormNetwork> {
    vec![
        ClosedFormNetwork::Barbell { m1: 5, m2: 4, n: 3 },
        ClosedFormNetwork::Barbell { m1: 4, m2: 4, n: 2 },
        ClosedFormNetwork::Barbell { m1: 6, m2: 5, n: 4 },
        ClosedFormNetwork::Barbell { m1: 2, m2: 2, n: 1 },
        ClosedFormNetwork::SemiComplete { m: 5, n1: 2, n2: 3 },
        ClosedFormNetwork::SemiComplete { m: 4, n1: 1, n2: 2 },
    ]
}

/// Network and closed-form weights of a network with a published spectrum.
pub fn closed_form_network(kind: ClosedFormNetwork) -> Result<(Network, EdgeWeights)> {
    match kind {
        ClosedFormNetwork::Barbell { m1, m2, n } => closed_form_barbell(m1, m2, n),
        ClosedFormNetwork::SemiComplete { m, n1, n2 } => closed_form_semicomplete_network(m, n1, n2),
    }
}

/// Compares computed spectra under closed-form weights with the predicted
/// multisets. With `optimize`, also reports the SLEM reached when every
/// weight is free, which tells a wrong formula apart from wrong weights.
pub fn verify_spectra(sweep: &[ClosedFormNetwork], optimize: bool) -> Result<Vec<SpectrumCheck>> {
    sweep
        .iter()
        .map(|&kind| {
            let predicted = closed_form_slem(kind)?;
            let (net, weights) = closed_form_network(kind)?;
            let w = WeightMatrix::from_edge_weights(net.node_count, &weights)?;
            let ev = eigenvalues_desc(w.entries())?;
            let computed = slem_from_eigenvalues(&ev)?.slem;
            let optimized_slem = if optimize {
                let free: BTreeSet<Edge> = net.edges.iter().copied().collect();
                Some(minimize_slem(&net, &EdgeWeights::new(), &free, &OptConfig::default())?.slem)
            } else {
                None
            };
            Ok(SpectrumCheck {
                network: kind,
                predicted_slem: predicted.slem,
                computed_slem: computed,
                slem_deviation: (computed - predicted.slem).abs(),
                multiset_deviation: multiset_deviation(&ev, &predicted.eigenvalues)?,
                predicted_zeros: predicted.zero_multiplicity,
                predicted_total_zeros: predicted
                    .eigenvalues
                    .iter()
                    .filter(|v| v.abs() <= ZERO_EIGENVALUE_TOL)
                    .count(),
                observed_zeros: ev.iter().filter(|v| v.abs() <= ZERO_EIGENVALUE_TOL).count(),
                optimized_slem,
            })
        })
        .collect()
}

/// One certification experiment: a branch on a seeded random core.
#[derive(Debug, Clone)]
pub struct CertifyOutcome {
    pub network: Network,
    pub candidate: EdgeWeights,
    pub report: CertificationReport,
}

impl CertifyOutcome {
    pub fn to_json(&self) -> serde_json::Value {
        let mut v = self.report.to_json(&self.network);
        v["nodes"] = json!(self.network.node_count);
        v["core_nodes"] = json!(self.network.core_nodes.len());
        v
    }
}

/// Attaches `spec` to node 0 of a seeded random core, builds the
/// closed-form candidate and certifies it. A nonzero `tamper` is added to
/// every branch-internal weight of the candidate before certification.
pub fn certify_branch(
    spec: &BranchSpec,
    core_nodes: usize,
    seed: u64,
    tol: f64,
    tamper: f64,
    config: &OptConfig,
) -> Result<CertifyOutcome> {
    let core = random_connected_core(core_nodes, CORE_EDGE_PROB, seed)?;
    let network = attach_branch(&core, spec, 0)?;
    let (candidate, free) = closed_form_candidate(&network, config)?;
    let mut weights = candidate.weights;
    if tamper != 0.0 {
        for e in network.internal_edges() {
            if let Some(w) = weights.get_mut(&e) {
                *w += tamper;
            }
        }
    }
    let report = certify_optimality(&network, &weights, &free, tol, config)?;
    Ok(CertifyOutcome {
        network,
        candidate: weights,
        report,
    })
}

/// Monte-Carlo curves of the given methods on a star of `count` branches.
pub fn simulate_star(
    spec: &BranchSpec,
    count: usize,
    methods: &[WeightingMethod],
    config: &SimConfig,
) -> Result<SimResult> {
    let net = compose_star(spec, count)?;
    crate::sim::monte_carlo(&net, methods, config)
}

/// Optimal-weight curves of all five table branches, each on its own star
/// of eight. All stars have 81 nodes, so every trial feeds the same initial
/// vector to every branch type.
pub fn fig15(config: &SimConfig) -> Result<SimResult> {
    let matrices = table1_specs()
        .iter()
        .map(|spec| {
            let net = compose_star(spec, STAR_BRANCHES)?;
            Ok((spec.kind.name().to_string(), star_optimal(&net)?.0))
        })
        .collect::<Result<Vec<_>>>()?;
    monte_carlo_matrices(&matrices, config)
}

/// Header lines recorded at the top of every output file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
}

impl Provenance {
    pub fn new(command: impl Into<String>, seed: Option<u64>) -> Self {
        Provenance {
            tool: "fdc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
        }
    }

    /// `#` comment lines for CSV output.
    pub fn comment_header(&self) -> String {
        let seed = self.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
        format!(
            "# {} {}\n# command: {}\n# seed: {}\n",
            self.tool, self.version, self.command, seed
        )
    }

    /// Wraps a JSON payload with a leading provenance object.
    pub fn wrap_json(&self, payload: serde_json::Value) -> serde_json::Value {
        json!({ "provenance": self, "result": payload })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_values_are_indexed_by_method() {
        assert_eq!(published_table1(BranchKind::Palm)[1], 0.9947);
        assert_eq!(published_table1(BranchKind::SemiComplete)[0], 0.98939);
    }

    #[test]
    fn provenance_header_has_three_comment_lines() {
        let p = Provenance::new("fdc table1", Some(7));
        let h = p.comment_header();
        assert_eq!(h.lines().count(), 3);
        assert!(h.lines().all(|l| l.starts_with('#')));
        assert!(h.contains("seed: 7"));
        let v = p.wrap_json(json!({"x": 1}));
        assert_eq!(v["provenance"]["seed"], 7);
    }

    #[test]
    fn small_barbell_matches_its_formula() {
        let checks = verify_spectra(&[ClosedFormNetwork::Barbell { m1: 2, m2: 2, n: 1 }], false).unwrap();
        assert_eq!(checks[0].predicted_zeros, 0);
        assert_eq!(checks[0].observed_zeros, checks[0].predicted_total_zeros);
        assert!(checks[0].slem_deviation < 1e-12);
    }
}

//! Edge weights: closed forms per branch orbit, the three heuristic
//! baselines, and assembly of the symmetric stochastic weight matrix.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FdcError, Result};
use crate::spectral;
use crate::topology::{
    build_barbell, build_branch, Branch, BranchKind, BranchSpec, Edge, EdgeRole, Network,
    OrbitRole,
};

/// Weight per edge, ordered for deterministic iteration.
pub type EdgeWeights = BTreeMap<Edge, f64>;

/// Weight per orbit label of one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitWeights {
    pub values: BTreeMap<usize, f64>,
    pub free: BTreeSet<usize>,
}

impl OrbitWeights {
    pub fn get(&self, label: usize) -> Option<f64> {
        self.values.get(&label).copied()
    }

    /// Every orbit of `branch` must be either valued or free, never both.
    pub fn check_covers(&self, branch: &Branch) -> Result<()> {
        for label in 0..branch.orbit_count() {
            let valued = self.values.contains_key(&label);
            let free = self.free.contains(&label);
            if valued == free {
                return Err(FdcError::MissingWeight(format!(
                    "orbit {label} of {} must be exactly one of valued/free",
                    branch.spec
                )));
            }
        }
        if let Some(&extra) = self
            .values
            .keys()
            .chain(self.free.iter())
            .find(|&&l| l >= branch.orbit_count())
        {
            return Err(FdcError::InvalidSpec(format!(
                "orbit label {extra} does not exist in {}",
                branch.spec
            )));
        }
        Ok(())
    }
}

/// Dense symmetric weight matrix whose diagonal completes each row to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
}

impl WeightMatrix {
    /// Builds W from off-diagonal edge weights; the diagonal is
    /// `1 - (off-diagonal row sum)`.
    pub fn from_edge_weights(dimension: usize, weights: &EdgeWeights) -> Result<Self> {
        let mut entries = DMatrix::<f64>::zeros(dimension, dimension);
        for (e, &w) in weights {
            if e.v >= dimension {
                return Err(FdcError::DimensionMismatch {
                    expected: dimension,
                    found: e.v + 1,
                });
            }
            entries[(e.u, e.v)] = w;
            entries[(e.v, e.u)] = w;
        }
        for i in 0..dimension {
            let off: f64 = (0..dimension).filter(|&j| j != i).map(|j| entries[(i, j)]).sum();
            entries[(i, i)] = 1.0 - off;
        }
        Ok(WeightMatrix { entries })
    }

    pub fn identity(dimension: usize) -> Self {
        WeightMatrix {
            entries: DMatrix::identity(dimension, dimension),
        }
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.row_iter().map(|r| r.sum()).collect()
    }

    /// Off-diagonal weight of every edge of `network`.
    pub fn edge_weights(&self, network: &Network) -> EdgeWeights {
        network
            .edges
            .iter()
            .map(|e| (*e, self.entries[(e.u, e.v)]))
            .collect()
    }

    /// `W - (1/n) 11ᵀ`.
    pub fn deviation_from_average(&self) -> DMatrix<f64> {
        let n = self.dimension();
        let mut a = self.entries.clone();
        a.add_scalar_mut(-1.0 / n as f64);
        a
    }

    /// CSV of the dense matrix with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.entries.row_iter() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Closed-form optimal weights for a branch's orbits. The network bridge is
/// left free. Ladder rungs default to zero; see [`closed_form_weights_with_rungs`].
pub fn closed_form_weights(branch: &Branch) -> OrbitWeights {
    let s = &branch.spec;
    let m = s.m as f64;
    let mut values = BTreeMap::new();
    let mut free = BTreeSet::new();
    for (label, role) in branch.orbit_roles.iter().enumerate() {
        let w = match role {
            OrbitRole::NetworkBridge => {
                free.insert(label);
                continue;
            }
            OrbitRole::PathEdge => 0.5,
            OrbitRole::CliqueInner | OrbitRole::CliqueJoint => 1.0 / m,
            OrbitRole::OuterInner => 1.0 / (m - 1.0),
            // (1 - 2/(m-1)) / (m-2): the inner value that pins the decoupled
            // eigenvalue at zero given outer-inner weights 1/(m-1).
            OrbitRole::InnerInner => (m - 3.0) / ((m - 1.0) * (m - 2.0)),
            OrbitRole::LadderCross { .. } => 0.25,
            OrbitRole::LadderBridge => 1.0 / 3.0,
            OrbitRole::LadderRung { .. } => 0.0,
            OrbitRole::Star => 1.0 / (s.k as f64 + 1.0),
        };
        values.insert(label, w);
    }
    OrbitWeights { values, free }
}

/// Closed forms with explicit ladder rung weights, one per level.
pub fn closed_form_weights_with_rungs(branch: &Branch, rungs: &[f64]) -> Result<OrbitWeights> {
    if branch.spec.kind != BranchKind::Ladder {
        return Err(FdcError::UnsupportedKind(format!(
            "rung weights only apply to ladders, not {}",
            branch.spec
        )));
    }
    if rungs.len() != branch.spec.m + 1 {
        return Err(FdcError::DimensionMismatch {
            expected: branch.spec.m + 1,
            found: rungs.len(),
        });
    }
    let mut weights = closed_form_weights(branch);
    for (label, role) in branch.orbit_roles.iter().enumerate() {
        if let OrbitRole::LadderRung { level } = role {
            weights.values.insert(label, rungs[*level]);
        }
    }
    Ok(weights)
}

/// Sum of non-rung weights at one node of each ladder level, in level order.
fn ladder_level_loads(branch: &Branch, weights: &OrbitWeights) -> Result<Vec<f64>> {
    let levels = branch.ladder_levels();
    let mut loads = Vec::with_capacity(levels.len());
    for (x, _) in levels {
        let mut load = 0.0;
        for (e, &label) in &branch.orbit_of_edge {
            if !e.touches(x) || matches!(branch.orbit_roles[label], OrbitRole::LadderRung { .. }) {
                continue;
            }
            load += weights
                .get(label)
                .ok_or_else(|| FdcError::MissingWeight(format!("orbit {label}")))?;
        }
        loads.push(load);
    }
    Ok(loads)
}

/// Decoupled eigenvalue of each ladder level: `1 - load - 2 w'`.
pub fn ladder_rung_eigenvalues(branch: &Branch, weights: &OrbitWeights) -> Result<Vec<f64>> {
    let loads = ladder_level_loads(branch, weights)?;
    let mut out = Vec::with_capacity(loads.len());
    for (label, role) in branch.orbit_roles.iter().enumerate() {
        if let OrbitRole::LadderRung { level } = role {
            let rung = weights
                .get(label)
                .ok_or_else(|| FdcError::MissingWeight(format!("rung orbit {label}")))?;
            out.push((*level, 1.0 - loads[*level] - 2.0 * rung));
        }
    }
    out.sort_by_key(|(level, _)| *level);
    Ok(out.into_iter().map(|(_, v)| v).collect())
}

/// Interval of rung weights per level that keeps the level's decoupled
/// eigenvalue within `[-slem, slem]`.
pub fn ladder_rung_window(
    branch: &Branch,
    weights: &OrbitWeights,
    slem: f64,
) -> Result<Vec<(f64, f64)>> {
    if branch.spec.kind != BranchKind::Ladder {
        return Err(FdcError::UnsupportedKind(branch.spec.to_string()));
    }
    let loads = ladder_level_loads(branch, weights)?;
    Ok(loads
        .into_iter()
        .map(|load| ((1.0 - load - slem) / 2.0, (1.0 - load + slem) / 2.0))
        .collect())
}

/// True when every rung weight lies inside its window.
pub fn rungs_feasible(branch: &Branch, weights: &OrbitWeights, slem: f64) -> Result<bool> {
    Ok(ladder_rung_eigenvalues(branch, weights)?
        .iter()
        .all(|v| v.abs() <= slem))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicMethod {
    Metropolis,
    MaxDegree,
    BestConstant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeuristicParams {
    pub method: HeuristicMethod,
    /// Only meaningful for best-constant; `None` means use the optimal α.
    pub alpha: Option<f64>,
}

impl HeuristicParams {
    pub fn metropolis() -> Self {
        HeuristicParams {
            method: HeuristicMethod::Metropolis,
            alpha: None,
        }
    }

    pub fn max_degree() -> Self {
        HeuristicParams {
            method: HeuristicMethod::MaxDegree,
            alpha: None,
        }
    }

    pub fn best_constant() -> Self {
        HeuristicParams {
            method: HeuristicMethod::BestConstant,
            alpha: None,
        }
    }

    fn validate(&self) -> Result<()> {
        match (self.method, self.alpha) {
            (HeuristicMethod::BestConstant, Some(a)) if !(a > 0.0) => Err(FdcError::InvalidSpec(
                format!("best-constant alpha must be positive, got {a}"),
            )),
            (HeuristicMethod::BestConstant, _) => Ok(()),
            (_, Some(_)) => Err(FdcError::InvalidSpec(
                "alpha is only accepted for best-constant weights".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Graph Laplacian `D - A`.
pub fn laplacian(network: &Network) -> DMatrix<f64> {
    let n = network.node_count;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for e in &network.edges {
        l[(e.u, e.v)] = -1.0;
        l[(e.v, e.u)] = -1.0;
        l[(e.u, e.u)] += 1.0;
        l[(e.v, e.v)] += 1.0;
    }
    l
}

/// `2 / (λ1(L) + λ_{n-1}(L))`, the best constant edge weight.
pub fn best_constant_alpha(network: &Network) -> Result<f64> {
    if !network.is_connected() {
        return Err(FdcError::Disconnected);
    }
    let n = network.node_count;
    if n < 2 {
        return Err(FdcError::InvalidSpec("best-constant needs at least two nodes".into()));
    }
    let ev = spectral::eigenvalues_desc(&laplacian(network))?;
    let fiedler = ev[n - 2];
    if fiedler <= 1e-12 {
        return Err(FdcError::Disconnected);
    }
    Ok(2.0 / (ev[0] + fiedler))
}

pub fn heuristic_weights(network: &Network, params: HeuristicParams) -> Result<WeightMatrix> {
    params.validate()?;
    if !network.is_connected() {
        return Err(FdcError::Disconnected);
    }
    let deg = network.degrees();
    let weights: EdgeWeights = match params.method {
        HeuristicMethod::Metropolis => network
            .edges
            .iter()
            .map(|e| (*e, 1.0 / (1.0 + deg[e.u].max(deg[e.v]) as f64)))
            .collect(),
        HeuristicMethod::MaxDegree => {
            let max = *deg.iter().max().unwrap_or(&1) as f64;
            network.edges.iter().map(|e| (*e, 1.0 / max)).collect()
        }
        HeuristicMethod::BestConstant => {
            let alpha = match params.alpha {
                Some(a) => a,
                None => best_constant_alpha(network)?,
            };
            network.edges.iter().map(|e| (*e, alpha)).collect()
        }
    };
    WeightMatrix::from_edge_weights(network.node_count, &weights)
}

/// Per-edge weights of a network from per-branch orbit weights, bridge
/// values keyed by branch index, and core edge values.
pub fn assemble_edges(
    network: &Network,
    branch_weights: &[OrbitWeights],
    bridge_values: &BTreeMap<usize, f64>,
    core_values: &EdgeWeights,
) -> Result<EdgeWeights> {
    if branch_weights.len() != network.branches.len() {
        return Err(FdcError::DimensionMismatch {
            expected: network.branches.len(),
            found: branch_weights.len(),
        });
    }
    for (eb, ow) in network.branches.iter().zip(branch_weights) {
        ow.check_covers(&eb.branch)?;
    }
    let mut out = EdgeWeights::new();
    for (e, role) in network.edge_roles() {
        let w = match role {
            EdgeRole::Internal { branch, orbit } => {
                branch_weights[branch].get(orbit).ok_or_else(|| {
                    FdcError::MissingWeight(format!("edge {e} (branch {branch}, orbit {orbit})"))
                })?
            }
            EdgeRole::Bridge { branch } => bridge_values
                .get(&branch)
                .copied()
                .ok_or_else(|| FdcError::MissingWeight(format!("bridge of branch {branch}")))?,
            EdgeRole::Core => core_values
                .get(&e)
                .copied()
                .ok_or_else(|| FdcError::MissingWeight(format!("core edge {e}")))?,
        };
        out.insert(e, w);
    }
    if let Some(e) = core_values.keys().find(|e| !network.core_edges.contains(e)) {
        return Err(FdcError::InvalidSpec(format!("{e} is not a core edge")));
    }
    Ok(out)
}

pub fn assemble(
    network: &Network,
    branch_weights: &[OrbitWeights],
    bridge_values: &BTreeMap<usize, f64>,
    core_values: &EdgeWeights,
) -> Result<WeightMatrix> {
    let edges = assemble_edges(network, branch_weights, bridge_values, core_values)?;
    WeightMatrix::from_edge_weights(network.node_count, &edges)
}

/// Closed-form weights on every branch-internal edge of the network.
pub fn closed_form_internal_edges(network: &Network) -> EdgeWeights {
    let mut out = EdgeWeights::new();
    for eb in &network.branches {
        let ow = closed_form_weights(&eb.branch);
        for (local, label) in &eb.branch.orbit_of_edge {
            out.insert(eb.global_edge(*local), ow.values[label]);
        }
    }
    out
}

/// Closed-form weights on a barbell built by [`build_barbell`]: clique edges
/// `1/m1` and `1/m2`, path edges `1/2`.
pub fn closed_form_barbell(m1: usize, m2: usize, n: usize) -> Result<(Network, EdgeWeights)> {
    let net = build_barbell(m1, m2, n)?;
    let weights = net
        .edges
        .iter()
        .map(|e| {
            let w = if e.v < m1 {
                1.0 / m1 as f64
            } else if e.u >= m1 && e.v < m1 + m2 {
                1.0 / m2 as f64
            } else {
                0.5
            };
            (*e, w)
        })
        .collect();
    Ok((net, weights))
}

/// Closed-form weights on a semi-complete graph with two path arms.
pub fn closed_form_semicomplete_network(
    m: usize,
    n1: usize,
    n2: usize,
) -> Result<(Network, EdgeWeights)> {
    let net = Network::standalone(&BranchSpec::semi_complete(m, n1, n2))?;
    let weights = closed_form_internal_edges(&net);
    Ok((net, weights))
}

/// Weight exchange format:
/// `{"orbits": {"<label>": w}, "bridge": w, "core": {"i-j": w}}`.
///
/// Orbit values apply to every branch of the network, the bridge value to
/// every bridge. `edges` optionally pins individual edges and wins over the rest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WeightFile {
    #[serde(default)]
    pub orbits: BTreeMap<String, f64>,
    #[serde(default)]
    pub bridge: Option<f64>,
    #[serde(default)]
    pub core: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub edges: BTreeMap<String, f64>,
}

impl WeightFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Summarizes per-edge weights of a network in this format. Orbit values
    /// are taken from the first branch; every edge is also listed in `edges`.
    pub fn from_edge_weights(network: &Network, weights: &EdgeWeights) -> Self {
        let mut file = WeightFile::default();
        if let Some(eb) = network.branches.first() {
            for (local, label) in &eb.branch.orbit_of_edge {
                if let Some(w) = weights.get(&eb.global_edge(*local)) {
                    file.orbits.entry(label.to_string()).or_insert(*w);
                }
            }
            file.bridge = eb.bridge_edge().and_then(|b| weights.get(&b).copied());
        }
        for e in &network.core_edges {
            if let Some(w) = weights.get(e) {
                file.core.insert(e.key(), *w);
            }
        }
        file.edges = weights.iter().map(|(e, w)| (e.key(), *w)).collect();
        file
    }

    pub fn to_edge_weights(&self, network: &Network) -> Result<EdgeWeights> {
        let mut pinned = EdgeWeights::new();
        for (key, w) in &self.edges {
            pinned.insert(Edge::parse_key(key)?, *w);
        }
        let mut orbits = BTreeMap::new();
        for (key, w) in &self.orbits {
            let label: usize = key
                .parse()
                .map_err(|_| FdcError::InvalidSpec(format!("bad orbit label {key:?}")))?;
            orbits.insert(label, *w);
        }
        let mut core = EdgeWeights::new();
        for (key, w) in &self.core {
            core.insert(Edge::parse_key(key)?, *w);
        }
        let mut out = EdgeWeights::new();
        for (e, role) in network.edge_roles() {
            let w = if let Some(w) = pinned.get(&e) {
                Some(*w)
            } else {
                match role {
                    EdgeRole::Internal { orbit, .. } => orbits.get(&orbit).copied(),
                    EdgeRole::Bridge { .. } => self.bridge,
                    EdgeRole::Core => core.get(&e).copied(),
                }
            };
            let w = w.ok_or_else(|| FdcError::MissingWeight(format!("edge {e}")))?;
            out.insert(e, w);
        }
        Ok(out)
    }
}

/// Builds a branch and its closed-form weights in one step.
pub fn branch_with_closed_forms(spec: &BranchSpec) -> Result<(Branch, OrbitWeights)> {
    let branch = build_branch(spec)?;
    let weights = closed_form_weights(&branch);
    Ok((branch, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::compose_star;

    const EPS: f64 = 1e-15;

    fn roles_value(branch: &Branch, ow: &OrbitWeights, pick: OrbitRole) -> f64 {
        let label = branch.orbit_roles.iter().position(|r| *r == pick).unwrap();
        ow.values[&label]
    }

    #[test]
    fn semicomplete_closed_forms() {
        let (b, ow) = branch_with_closed_forms(&BranchSpec::semi_complete(5, 2, 3)).unwrap();
        assert!((roles_value(&b, &ow, OrbitRole::InnerInner) - 1.0 / 6.0).abs() < EPS);
        assert!((roles_value(&b, &ow, OrbitRole::OuterInner) - 0.25).abs() < EPS);
        assert_eq!(roles_value(&b, &ow, OrbitRole::PathEdge), 0.5);
        assert_eq!(ow.free, BTreeSet::from([b.bridge_orbit]));

        let (b, ow) = branch_with_closed_forms(&BranchSpec::semi_complete(3, 1, 1)).unwrap();
        assert_eq!(roles_value(&b, &ow, OrbitRole::InnerInner), 0.0);
    }

    #[test]
    fn inner_weight_matches_decoupling_relation() {
        for m in 3..12 {
            let (b, ow) = branch_with_closed_forms(&BranchSpec::semi_complete(m, 1, 1)).unwrap();
            let outer = roles_value(&b, &ow, OrbitRole::OuterInner);
            let inner = roles_value(&b, &ow, OrbitRole::InnerInner);
            let relation = (1.0 - 2.0 * outer) / (m as f64 - 2.0);
            assert!((inner - relation).abs() < 1e-15, "m = {m}");
        }
    }

    #[test]
    fn lollipop_and_palm_closed_forms() {
        let (b, ow) = branch_with_closed_forms(&BranchSpec::lollipop(5, 3)).unwrap();
        assert_eq!(roles_value(&b, &ow, OrbitRole::CliqueInner), 0.2);
        assert_eq!(roles_value(&b, &ow, OrbitRole::CliqueJoint), 0.2);
        assert_eq!(roles_value(&b, &ow, OrbitRole::PathEdge), 0.5);

        let (b, ow) = branch_with_closed_forms(&BranchSpec::palm(3, 4)).unwrap();
        assert_eq!(roles_value(&b, &ow, OrbitRole::Star), 0.2);
        assert_eq!(roles_value(&b, &ow, OrbitRole::PathEdge), 0.5);
    }

    #[test]
    fn closed_forms_are_in_unit_interval() {
        for spec in [
            BranchSpec::path(4),
            BranchSpec::lollipop(2, 1),
            BranchSpec::lollipop(7, 3),
            BranchSpec::semi_complete(4, 1, 2),
            BranchSpec::semi_complete(9, 2, 2),
            BranchSpec::ladder(3, 0, 2),
            BranchSpec::palm(1, 1),
            BranchSpec::palm(5, 7),
        ] {
            let (b, ow) = branch_with_closed_forms(&spec).unwrap();
            ow.check_covers(&b).unwrap();
            for (label, w) in &ow.values {
                let rung = matches!(b.orbit_roles[*label], OrbitRole::LadderRung { .. });
                let inner_empty = b.orbit_roles[*label] == OrbitRole::InnerInner && spec.m == 3;
                if rung || inner_empty {
                    continue;
                }
                assert!(*w > 0.0 && *w <= 1.0, "{spec} orbit {label} = {w}");
            }
        }
    }

    #[test]
    fn ladder_rung_window_and_feasibility() {
        let b = build_branch(&BranchSpec::ladder(2, 1, 1)).unwrap();
        let ow = closed_form_weights(&b);
        let eig = ladder_rung_eigenvalues(&b, &ow).unwrap();
        assert_eq!(eig.len(), 3);
        assert!((eig[0] - 1.0 / 6.0).abs() < 1e-15);
        assert!(eig[1].abs() < 1e-15);
        assert!((eig[2] - 1.0 / 6.0).abs() < 1e-15);
        let window = ladder_rung_window(&b, &ow, 0.9).unwrap();
        assert!((window[1].0 + 0.45).abs() < 1e-15 && (window[1].1 - 0.45).abs() < 1e-15);
        assert!(rungs_feasible(&b, &ow, 0.9).unwrap());
        let bad = closed_form_weights_with_rungs(&b, &[0.0, 0.6, 0.0]).unwrap();
        assert!(!rungs_feasible(&b, &bad, 0.9).unwrap());
        assert!(closed_form_weights_with_rungs(&b, &[0.0]).is_err());
    }

    #[test]
    fn metropolis_two_node_path() {
        let net = Network::from_core(2, &[Edge::new(0, 1)]).unwrap();
        let w = heuristic_weights(&net, HeuristicParams::metropolis()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(w.get(i, j), 0.5);
            }
        }
    }

    #[test]
    fn max_degree_three_node_path() {
        let net = Network::from_core(3, &[Edge::new(0, 1), Edge::new(1, 2)]).unwrap();
        let w = heuristic_weights(&net, HeuristicParams::max_degree()).unwrap();
        assert_eq!(w.get(0, 1), 0.5);
        assert_eq!(w.get(1, 2), 0.5);
        assert_eq!(w.get(1, 1), 0.0);
        assert_eq!(w.get(0, 0), 0.5);
    }

    #[test]
    fn best_constant_on_triangle() {
        let tri = Network::from_core(3, &[Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)]).unwrap();
        let alpha = best_constant_alpha(&tri).unwrap();
        assert!((alpha - 1.0 / 3.0).abs() < 1e-14);
        let w = heuristic_weights(&tri, HeuristicParams::best_constant()).unwrap();
        let s = spectral::slem_of(&w).unwrap();
        assert!(s.abs() < 1e-14);
    }

    #[test]
    fn heuristic_param_validation() {
        let net = Network::from_core(2, &[Edge::new(0, 1)]).unwrap();
        let bad = HeuristicParams {
            method: HeuristicMethod::Metropolis,
            alpha: Some(0.2),
        };
        assert!(heuristic_weights(&net, bad).is_err());
        let bad = HeuristicParams {
            method: HeuristicMethod::BestConstant,
            alpha: Some(-1.0),
        };
        assert!(heuristic_weights(&net, bad).is_err());
        let fixed = HeuristicParams {
            method: HeuristicMethod::BestConstant,
            alpha: Some(0.25),
        };
        assert_eq!(heuristic_weights(&net, fixed).unwrap().get(0, 1), 0.25);
    }

    #[test]
    fn assemble_two_node_and_zero_weights() {
        let net = Network::from_core(2, &[Edge::new(0, 1)]).unwrap();
        let core = EdgeWeights::from([(Edge::new(0, 1), 0.5)]);
        let w = assemble(&net, &[], &BTreeMap::new(), &core).unwrap();
        assert_eq!(w.entries(), &DMatrix::from_element(2, 2, 0.5));

        let star = compose_star(&BranchSpec::palm(2, 3), 3).unwrap();
        let b = &star.branches[0].branch;
        let zero = OrbitWeights {
            values: (0..b.orbit_count()).map(|l| (l, 0.0)).collect(),
            free: BTreeSet::new(),
        };
        let bridges: BTreeMap<usize, f64> = (0..3).map(|i| (i, 0.0)).collect();
        let mut zero_no_bridge = zero.clone();
        zero_no_bridge.values.remove(&b.bridge_orbit);
        zero_no_bridge.free.insert(b.bridge_orbit);
        let w = assemble(&star, &vec![zero_no_bridge; 3], &bridges, &EdgeWeights::new()).unwrap();
        assert_eq!(w.entries(), &DMatrix::identity(star.node_count, star.node_count));
    }

    #[test]
    fn assemble_reports_missing_weights() {
        let star = compose_star(&BranchSpec::path(3), 2).unwrap();
        let ow = closed_form_weights(&star.branches[0].branch);
        let partial = BTreeMap::from([(0usize, 0.4)]);
        let err = assemble(&star, &[ow.clone(), ow.clone()], &partial, &EdgeWeights::new());
        assert!(matches!(err, Err(FdcError::MissingWeight(_))));
        let err = assemble(&star, &[ow], &partial, &EdgeWeights::new());
        assert!(matches!(err, Err(FdcError::DimensionMismatch { .. })));
    }

    #[test]
    fn star_of_paths_rows_sum_to_one() {
        let star = compose_star(&BranchSpec::path(10), 8).unwrap();
        let ow = closed_form_weights(&star.branches[0].branch);
        let bridges: BTreeMap<usize, f64> = (0..8).map(|i| (i, 0.4)).collect();
        let w = assemble(&star, &vec![ow; 8], &bridges, &EdgeWeights::new()).unwrap();
        for s in w.row_sums() {
            assert!((s - 1.0).abs() <= 1e-12);
        }
        assert_eq!(w.entries(), &w.entries().transpose());
    }

    #[test]
    fn weight_file_round_trip_through_network() {
        let star = compose_star(&BranchSpec::lollipop(4, 2), 3).unwrap();
        let json = r#"{"orbits": {"0": 0.25, "1": 0.25, "2": 0.5, "3": 0.5}, "bridge": 0.3, "core": {}}"#;
        let file = WeightFile::from_json(json).unwrap();
        let weights = file.to_edge_weights(&star).unwrap();
        assert_eq!(weights.len(), star.edges.len());
        let back = WeightFile::from_edge_weights(&star, &weights);
        assert_eq!(back.bridge, Some(0.3));
        assert_eq!(back.orbits, file.orbits);
        let missing = WeightFile::from_json(r#"{"orbits": {"0": 0.25}}"#).unwrap();
        assert!(missing.to_edge_weights(&star).is_err());
    }

    #[test]
    fn csv_has_seventeen_significant_digits() {
        let w = WeightMatrix::from_edge_weights(2, &EdgeWeights::from([(Edge::new(0, 1), 1.0 / 3.0)]))
            .unwrap();
        let csv = w.to_csv();
        let first: f64 = csv.split([',', '\n']).next().unwrap().parse().unwrap();
        assert_eq!(first, 1.0 - 1.0 / 3.0);
        assert!(csv.starts_with("6.6666666666666674e-1,3.3333333333333331e-1"));
    }
}

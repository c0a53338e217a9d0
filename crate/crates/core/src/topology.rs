//! Branch families and composite networks.
//!
//! Every branch is built with a fixed, documented local node order and its
//! edges carry orbit labels derived from the construction. The five families
//! have known automorphism groups, so orbits never need to be discovered.
//!
//! Local node order per kind:
//!
//! ```text
//! Path(n)               0 - 1 - ... - (n-1)                  attachment n-1
//! Lollipop(m, n)        clique 0..m-1 (0 is the joint),
//!                       path m..m+n-1 (m touches the joint)  attachment m+n-1
//! SemiComplete(m,n1,n2) arm 1: 0..n1-1, outer A = n1,
//!                       inner n1+1..n1+m-2, outer B = n1+m-1,
//!                       arm 2: n1+m..n1+m+n2-1               attachment 0
//! Ladder(m, n1, n2)     arm 1: 0..n1, level i = (n1+1+2i, n1+2+2i),
//!                       arm 2: n1+2m+3..n1+2m+n2+3           attachment 0
//! Palm(m, k)            center 0, leaves 1..k,
//!                       path k+1..k+m                        attachment k+m
//! ```

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{FdcError, Result};

/// Unordered edge stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
}

impl Edge {
    pub fn new(a: usize, b: usize) -> Self {
        assert_ne!(a, b, "self loops are not edges");
        if a < b {
            Edge { u: a, v: b }
        } else {
            Edge { u: b, v: a }
        }
    }

    /// Key used by the JSON formats, `"i-j"` with `i < j`.
    pub fn key(&self) -> String {
        format!("{}-{}", self.u, self.v)
    }

    pub fn parse_key(key: &str) -> Result<Self> {
        let (a, b) = key
            .split_once('-')
            .ok_or_else(|| FdcError::InvalidSpec(format!("bad edge key {key:?}")))?;
        let a: usize = a
            .trim()
            .parse()
            .map_err(|_| FdcError::InvalidSpec(format!("bad edge key {key:?}")))?;
        let b: usize = b
            .trim()
            .parse()
            .map_err(|_| FdcError::InvalidSpec(format!("bad edge key {key:?}")))?;
        if a == b {
            return Err(FdcError::InvalidSpec(format!("self loop in edge key {key:?}")));
        }
        Ok(Edge::new(a, b))
    }

    pub fn touches(&self, node: usize) -> bool {
        self.u == node || self.v == node
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.u, self.v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchKind {
    Path,
    Lollipop,
    SemiComplete,
    Ladder,
    Palm,
}

impl BranchKind {
    pub const ALL: [BranchKind; 5] = [
        BranchKind::Path,
        BranchKind::Lollipop,
        BranchKind::SemiComplete,
        BranchKind::Ladder,
        BranchKind::Palm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BranchKind::Path => "path",
            BranchKind::Lollipop => "lollipop",
            BranchKind::SemiComplete => "semi-complete",
            BranchKind::Ladder => "ladder",
            BranchKind::Palm => "palm",
        }
    }
}

impl std::str::FromStr for BranchKind {
    type Err = FdcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "path" => Ok(BranchKind::Path),
            "lollipop" => Ok(BranchKind::Lollipop),
            "semi-complete" | "semicomplete" | "semi" => Ok(BranchKind::SemiComplete),
            "ladder" => Ok(BranchKind::Ladder),
            "palm" => Ok(BranchKind::Palm),
            other => Err(FdcError::InvalidSpec(format!("unknown branch kind {other:?}"))),
        }
    }
}

/// Parametric description of one branch. Parameters a kind does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BranchSpec {
    pub kind: BranchKind,
    #[serde(default)]
    pub m: usize,
    #[serde(default)]
    pub n: usize,
    #[serde(default)]
    pub n1: usize,
    #[serde(default)]
    pub n2: usize,
    #[serde(default)]
    pub k: usize,
}

impl BranchSpec {
    fn raw(kind: BranchKind) -> Self {
        BranchSpec {
            kind,
            m: 0,
            n: 0,
            n1: 0,
            n2: 0,
            k: 0,
        }
    }

    pub fn path(n: usize) -> Self {
        BranchSpec { n, ..Self::raw(BranchKind::Path) }
    }

    pub fn lollipop(m: usize, n: usize) -> Self {
        BranchSpec { m, n, ..Self::raw(BranchKind::Lollipop) }
    }

    pub fn semi_complete(m: usize, n1: usize, n2: usize) -> Self {
        BranchSpec { m, n1, n2, ..Self::raw(BranchKind::SemiComplete) }
    }

    pub fn ladder(m: usize, n1: usize, n2: usize) -> Self {
        BranchSpec { m, n1, n2, ..Self::raw(BranchKind::Ladder) }
    }

    pub fn palm(m: usize, k: usize) -> Self {
        BranchSpec { m, k, ..Self::raw(BranchKind::Palm) }
    }

    /// Builds a spec from optional CLI-style parameters, rejecting any
    /// parameter the kind does not use.
    pub fn from_parts(
        kind: BranchKind,
        m: Option<usize>,
        n: Option<usize>,
        n1: Option<usize>,
        n2: Option<usize>,
        k: Option<usize>,
    ) -> Result<Self> {
        let spec = BranchSpec {
            kind,
            m: m.unwrap_or(0),
            n: n.unwrap_or(0),
            n1: n1.unwrap_or(0),
            n2: n2.unwrap_or(0),
            k: k.unwrap_or(0),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(FdcError::InvalidSpec(format!("{self}: {msg}")));
        let unused = |names: &[(&str, usize)]| -> Result<()> {
            for (name, value) in names {
                if *value != 0 {
                    return Err(FdcError::InvalidSpec(format!(
                        "{}: parameter {name} is not used by this kind",
                        self.kind.name()
                    )));
                }
            }
            Ok(())
        };
        match self.kind {
            BranchKind::Path => {
                unused(&[("m", self.m), ("n1", self.n1), ("n2", self.n2), ("k", self.k)])?;
                if self.n < 1 {
                    return bad("n must be at least 1");
                }
            }
            BranchKind::Lollipop => {
                unused(&[("n1", self.n1), ("n2", self.n2), ("k", self.k)])?;
                if self.m < 2 {
                    return bad("m must be at least 2");
                }
                if self.n < 1 {
                    return bad("n must be at least 1");
                }
            }
            BranchKind::SemiComplete => {
                unused(&[("n", self.n), ("k", self.k)])?;
                if self.m < 3 {
                    return bad("m must be at least 3");
                }
                if self.n1 < 1 || self.n2 < 1 {
                    return bad("n1 and n2 must be at least 1");
                }
            }
            BranchKind::Ladder => {
                unused(&[("n", self.n), ("k", self.k)])?;
                if self.m < 1 {
                    return bad("m must be at least 1");
                }
            }
            BranchKind::Palm => {
                unused(&[("n", self.n), ("n1", self.n1), ("n2", self.n2)])?;
                if self.m < 1 {
                    return bad("m must be at least 1");
                }
                if self.k < 1 {
                    return bad("k must be at least 1");
                }
            }
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        match self.kind {
            BranchKind::Path => self.n,
            BranchKind::Lollipop => self.m + self.n,
            BranchKind::SemiComplete => self.n1 + self.m + self.n2,
            BranchKind::Ladder => self.n1 + self.n2 + 2 * self.m + 4,
            BranchKind::Palm => 1 + self.k + self.m,
        }
    }

    /// Number of branch-internal edges (the network bridge excluded).
    pub fn internal_edge_count(&self) -> usize {
        let (m, n, n1, n2, k) = (self.m, self.n, self.n1, self.n2, self.k);
        match self.kind {
            BranchKind::Path => n - 1,
            BranchKind::Lollipop => m * (m - 1) / 2 + n,
            BranchKind::SemiComplete => m * (m - 1) / 2 - 1 + n1 + n2,
            BranchKind::Ladder => n1 + n2 + 4 + (m + 1) + 4 * m,
            BranchKind::Palm => k + m,
        }
    }
}

impl fmt::Display for BranchSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            BranchKind::Path => write!(f, "Path({})", self.n),
            BranchKind::Lollipop => write!(f, "Lollipop({},{})", self.m, self.n),
            BranchKind::SemiComplete => {
                write!(f, "SemiComplete({},{},{})", self.m, self.n1, self.n2)
            }
            BranchKind::Ladder => write!(f, "Ladder({},{},{})", self.m, self.n1, self.n2),
            BranchKind::Palm => write!(f, "Palm({},{})", self.m, self.k),
        }
    }
}

/// What an orbit is, structurally. Closed-form weights are keyed on this.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "role")]
pub enum OrbitRole {
    /// A single edge on a path or arm.
    PathEdge,
    /// Lollipop edges among the m-1 clique nodes away from the joint.
    CliqueInner,
    /// Lollipop edges from the joint to the rest of the clique.
    CliqueJoint,
    /// Semi-complete edges between an outer node and the inner nodes.
    OuterInner,
    /// Semi-complete edges among the inner nodes.
    InnerInner,
    /// Ladder edges between two neighbouring levels.
    LadderCross { level: usize },
    /// Ladder edge joining the two nodes of one level.
    LadderRung { level: usize },
    /// The two edges joining an arm end to an end level of the ladder.
    LadderBridge,
    /// Palm edges from the star center to its leaves.
    Star,
    /// The edge from the attachment node into the rest of the network.
    NetworkBridge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitClass {
    pub label: usize,
    pub role: OrbitRole,
    pub edges: Vec<Edge>,
}

/// Concrete realization of a [`BranchSpec`] in local node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub spec: BranchSpec,
    pub node_count: usize,
    pub edges: Vec<Edge>,
    pub orbit_of_edge: BTreeMap<Edge, usize>,
    /// Role of each orbit label, indexed by label. The last entry is the bridge.
    pub orbit_roles: Vec<OrbitRole>,
    pub attachment_node: usize,
    pub bridge_orbit: usize,
}

impl Branch {
    pub fn orbit_count(&self) -> usize {
        self.orbit_roles.len()
    }

    /// Local nodes that form the symmetric set acted on by the branch's
    /// automorphisms (non-joint clique nodes, inner nodes, leaves), if any.
    pub fn symmetric_nodes(&self) -> Vec<usize> {
        let s = &self.spec;
        match s.kind {
            BranchKind::Path | BranchKind::Ladder => Vec::new(),
            BranchKind::Lollipop => (1..s.m).collect(),
            BranchKind::SemiComplete => (s.n1 + 1..s.n1 + s.m - 1).collect(),
            BranchKind::Palm => (1..=s.k).collect(),
        }
    }

    /// Node pairs of each ladder level, empty for other kinds.
    pub fn ladder_levels(&self) -> Vec<(usize, usize)> {
        if self.spec.kind != BranchKind::Ladder {
            return Vec::new();
        }
        let base = self.spec.n1 + 1;
        (0..=self.spec.m)
            .map(|i| (base + 2 * i, base + 2 * i + 1))
            .collect()
    }
}

struct BranchBuilder {
    edges: Vec<Edge>,
    orbit_of_edge: BTreeMap<Edge, usize>,
    roles: Vec<OrbitRole>,
}

impl BranchBuilder {
    fn new() -> Self {
        BranchBuilder {
            edges: Vec::new(),
            orbit_of_edge: BTreeMap::new(),
            roles: Vec::new(),
        }
    }

    fn orbit(&mut self, role: OrbitRole) -> usize {
        self.roles.push(role);
        self.roles.len() - 1
    }

    fn edge(&mut self, a: usize, b: usize, label: usize) {
        let e = Edge::new(a, b);
        let fresh = self.orbit_of_edge.insert(e, label).is_none();
        debug_assert!(fresh, "duplicate edge {e}");
        self.edges.push(e);
    }

    /// Chain of edges through `nodes`, each edge in its own orbit.
    fn chain(&mut self, nodes: &[usize]) {
        for pair in nodes.windows(2) {
            let label = self.orbit(OrbitRole::PathEdge);
            self.edge(pair[0], pair[1], label);
        }
    }

    fn finish(mut self, spec: BranchSpec, attachment_node: usize) -> Branch {
        let bridge_orbit = self.orbit(OrbitRole::NetworkBridge);
        self.edges.sort();
        Branch {
            spec,
            node_count: spec.node_count(),
            edges: self.edges,
            orbit_of_edge: self.orbit_of_edge,
            orbit_roles: self.roles,
            attachment_node,
            bridge_orbit,
        }
    }
}

/// Builds the branch described by `spec` with its canonical local indexing.
pub fn build_branch(spec: &BranchSpec) -> Result<Branch> {
    spec.validate()?;
    let mut b = BranchBuilder::new();
    let branch = match spec.kind {
        BranchKind::Path => {
            let nodes: Vec<usize> = (0..spec.n).collect();
            b.chain(&nodes);
            b.finish(*spec, spec.n - 1)
        }
        BranchKind::Lollipop => {
            let m = spec.m;
            let inner = b.orbit(OrbitRole::CliqueInner);
            let joint = b.orbit(OrbitRole::CliqueJoint);
            for i in 1..m {
                b.edge(0, i, joint);
                for j in i + 1..m {
                    b.edge(i, j, inner);
                }
            }
            let mut nodes = vec![0];
            nodes.extend(m..m + spec.n);
            b.chain(&nodes);
            b.finish(*spec, m + spec.n - 1)
        }
        BranchKind::SemiComplete => {
            let (m, n1, n2) = (spec.m, spec.n1, spec.n2);
            let outer_a = n1;
            let outer_b = n1 + m - 1;
            let inner: Vec<usize> = (n1 + 1..outer_b).collect();
            let arm1: Vec<usize> = (0..=n1).collect();
            b.chain(&arm1);
            let a_inner = b.orbit(OrbitRole::OuterInner);
            let inner_inner = b.orbit(OrbitRole::InnerInner);
            let inner_b = b.orbit(OrbitRole::OuterInner);
            for (idx, &x) in inner.iter().enumerate() {
                b.edge(outer_a, x, a_inner);
                b.edge(x, outer_b, inner_b);
                for &y in &inner[idx + 1..] {
                    b.edge(x, y, inner_inner);
                }
            }
            let arm2: Vec<usize> = (outer_b..outer_b + n2 + 1).collect();
            b.chain(&arm2);
            b.finish(*spec, 0)
        }
        BranchKind::Ladder => {
            let (m, n1, n2) = (spec.m, spec.n1, spec.n2);
            let base = n1 + 1;
            let level = |i: usize| (base + 2 * i, base + 2 * i + 1);
            let arm1: Vec<usize> = (0..=n1).collect();
            b.chain(&arm1);
            let bridge1 = b.orbit(OrbitRole::LadderBridge);
            let (l0a, l0b) = level(0);
            b.edge(n1, l0a, bridge1);
            b.edge(n1, l0b, bridge1);
            for i in 0..=m {
                let rung = b.orbit(OrbitRole::LadderRung { level: i });
                let (x, y) = level(i);
                b.edge(x, y, rung);
            }
            for i in 0..m {
                let cross = b.orbit(OrbitRole::LadderCross { level: i });
                let (x, y) = level(i);
                let (p, q) = level(i + 1);
                for a in [x, y] {
                    for c in [p, q] {
                        b.edge(a, c, cross);
                    }
                }
            }
            let arm2_start = base + 2 * (m + 1);
            let bridge2 = b.orbit(OrbitRole::LadderBridge);
            let (lma, lmb) = level(m);
            b.edge(lma, arm2_start, bridge2);
            b.edge(lmb, arm2_start, bridge2);
            let arm2: Vec<usize> = (arm2_start..=arm2_start + n2).collect();
            b.chain(&arm2);
            b.finish(*spec, 0)
        }
        BranchKind::Palm => {
            let (m, k) = (spec.m, spec.k);
            let star = b.orbit(OrbitRole::Star);
            for leaf in 1..=k {
                b.edge(0, leaf, star);
            }
            let mut nodes = vec![0];
            nodes.extend(k + 1..=k + m);
            b.chain(&nodes);
            b.finish(*spec, k + m)
        }
    };
    debug_assert_eq!(branch.edges.len(), spec.internal_edge_count());
    Ok(branch)
}

/// Partition of the branch-internal edges by orbit label, in label order.
/// The bridge orbit is not included; it has no branch-internal edge.
pub fn edge_orbits(branch: &Branch) -> Vec<OrbitClass> {
    let mut classes: Vec<OrbitClass> = branch
        .orbit_roles
        .iter()
        .enumerate()
        .filter(|(label, _)| *label != branch.bridge_orbit)
        .map(|(label, role)| OrbitClass {
            label,
            role: *role,
            edges: Vec::new(),
        })
        .collect();
    for (edge, &label) in &branch.orbit_of_edge {
        classes[label].edges.push(*edge);
    }
    classes
}

/// A branch placed inside a network.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedBranch {
    pub branch: Branch,
    /// Global index of each local node.
    pub embedding: Vec<usize>,
    /// Core node the bridge connects to; `None` for a standalone branch.
    pub target: Option<usize>,
}

impl EmbeddedBranch {
    pub fn global_edge(&self, local: Edge) -> Edge {
        Edge::new(self.embedding[local.u], self.embedding[local.v])
    }

    pub fn attachment(&self) -> usize {
        self.embedding[self.branch.attachment_node]
    }

    pub fn bridge_edge(&self) -> Option<Edge> {
        self.target.map(|t| Edge::new(self.attachment(), t))
    }
}

/// How an edge of a network came to be there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeRole {
    Internal { branch: usize, orbit: usize },
    Bridge { branch: usize },
    Core,
}

/// A composite graph: a core ("unknown part") plus attached branches.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub node_count: usize,
    /// All edges, sorted, without duplicates.
    pub edges: Vec<Edge>,
    pub branches: Vec<EmbeddedBranch>,
    pub core_nodes: Vec<usize>,
    pub core_edges: Vec<Edge>,
    pub labels: Vec<Option<String>>,
}

impl Network {
    /// A network made only of core nodes and edges.
    pub fn from_core(node_count: usize, edges: &[Edge]) -> Result<Self> {
        let mut sorted: Vec<Edge> = edges.to_vec();
        sorted.sort();
        let before = sorted.len();
        sorted.dedup();
        if sorted.len() != before {
            return Err(FdcError::InvalidSpec("duplicate edges in core".into()));
        }
        if let Some(e) = sorted.iter().find(|e| e.v >= node_count) {
            return Err(FdcError::NodeOutOfRange {
                node: e.v,
                node_count,
            });
        }
        let net = Network {
            node_count,
            edges: sorted.clone(),
            branches: Vec::new(),
            core_nodes: (0..node_count).collect(),
            core_edges: sorted,
            labels: vec![None; node_count],
        };
        if !net.is_connected() {
            return Err(FdcError::Disconnected);
        }
        Ok(net)
    }

    /// The branch on its own, without a bridge or core.
    pub fn standalone(spec: &BranchSpec) -> Result<Self> {
        let branch = build_branch(spec)?;
        let node_count = branch.node_count;
        let edges = branch.edges.clone();
        let label = format!("{spec}");
        Ok(Network {
            node_count,
            edges,
            branches: vec![EmbeddedBranch {
                branch,
                embedding: (0..node_count).collect(),
                target: None,
            }],
            core_nodes: Vec::new(),
            core_edges: Vec::new(),
            labels: vec![Some(label); node_count],
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.node_count];
        for e in &self.edges {
            deg[e.u] += 1;
            deg[e.v] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.node_count];
        for e in &self.edges {
            adj[e.u].push(e.v);
            adj[e.v].push(e.u);
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.node_count == 0 {
            return false;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.node_count
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    /// Role of every edge, keyed by edge.
    pub fn edge_roles(&self) -> BTreeMap<Edge, EdgeRole> {
        let mut roles = BTreeMap::new();
        for e in &self.core_edges {
            roles.insert(*e, EdgeRole::Core);
        }
        for (idx, eb) in self.branches.iter().enumerate() {
            for (local, &orbit) in &eb.branch.orbit_of_edge {
                roles.insert(eb.global_edge(*local), EdgeRole::Internal { branch: idx, orbit });
            }
            if let Some(bridge) = eb.bridge_edge() {
                roles.insert(bridge, EdgeRole::Bridge { branch: idx });
            }
        }
        roles
    }

    /// Global branch-internal edges (all branches).
    pub fn internal_edges(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = self
            .branches
            .iter()
            .flat_map(|eb| eb.branch.edges.iter().map(|e| eb.global_edge(*e)))
            .collect();
        out.sort();
        out
    }

    pub fn bridge_edges(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = self.branches.iter().filter_map(|eb| eb.bridge_edge()).collect();
        out.sort();
        out
    }

    /// Network-wide orbit labels. Internal orbits of branches with the same
    /// spec share labels, bridges of identical branches hanging from the same
    /// core node share one label, and each core edge is its own class.
    pub fn orbit_labels(&self) -> BTreeMap<Edge, usize> {
        #[derive(PartialEq, Eq, PartialOrd, Ord)]
        enum Key {
            Internal(String, usize),
            Bridge(String, usize),
            Core(Edge),
        }
        let mut assigned: BTreeMap<Key, usize> = BTreeMap::new();
        let mut next = 0usize;
        let mut label_of = |key: Key| -> usize {
            *assigned.entry(key).or_insert_with(|| {
                next += 1;
                next - 1
            })
        };
        let mut out = BTreeMap::new();
        for eb in &self.branches {
            let spec = eb.branch.spec.to_string();
            let mut locals: Vec<(&Edge, &usize)> = eb.branch.orbit_of_edge.iter().collect();
            locals.sort_by_key(|(e, l)| (**l, **e));
            for (local, &orbit) in locals {
                let label = label_of(Key::Internal(spec.clone(), orbit));
                out.insert(eb.global_edge(*local), label);
            }
            if let (Some(bridge), Some(target)) = (eb.bridge_edge(), eb.target) {
                let label = label_of(Key::Bridge(spec.clone(), target));
                out.insert(bridge, label);
            }
        }
        for e in &self.core_edges {
            let label = label_of(Key::Core(*e));
            out.insert(*e, label);
        }
        out
    }

    fn push_branch(&mut self, branch: Branch, target: Option<usize>) -> usize {
        let offset = self.node_count;
        let embedding: Vec<usize> = (offset..offset + branch.node_count).collect();
        let label = branch.spec.to_string();
        self.node_count += branch.node_count;
        self.labels
            .extend(std::iter::repeat_n(Some(label), branch.node_count));
        let eb = EmbeddedBranch {
            branch,
            embedding,
            target,
        };
        self.edges
            .extend(eb.branch.edges.iter().map(|e| eb.global_edge(*e)));
        if let Some(bridge) = eb.bridge_edge() {
            self.edges.push(bridge);
        }
        self.edges.sort();
        self.branches.push(eb);
        self.branches.len() - 1
    }
}

/// Embeds a fresh copy of the branch and bridges its attachment node to `node`.
pub fn attach_branch(core: &Network, spec: &BranchSpec, node: usize) -> Result<Network> {
    if node >= core.node_count || !core.core_nodes.contains(&node) {
        return Err(FdcError::NodeOutOfRange {
            node,
            node_count: core.node_count,
        });
    }
    let branch = build_branch(spec)?;
    let mut net = core.clone();
    net.push_branch(branch, Some(node));
    Ok(net)
}

/// `count` copies of one branch, each bridged to a single central node 0.
pub fn compose_star(spec: &BranchSpec, count: usize) -> Result<Network> {
    if count < 1 {
        return Err(FdcError::InvalidSpec("star needs at least one branch".into()));
    }
    let branch = build_branch(spec)?;
    let mut net = Network {
        node_count: 1,
        edges: Vec::new(),
        branches: Vec::new(),
        core_nodes: vec![0],
        core_edges: Vec::new(),
        labels: vec![Some("hub".into())],
    };
    for _ in 0..count {
        net.push_branch(branch.clone(), Some(0));
    }
    Ok(net)
}

/// Two cliques K_{m1}, K_{m2} joined by a path with `n` edges.
///
/// Nodes `0..m1` form the first clique (joint 0), `m1..m1+m2` the second
/// (joint m1), and `m1+m2..m1+m2+n-1` are the path interior in order.
pub fn build_barbell(m1: usize, m2: usize, n: usize) -> Result<Network> {
    if m1 < 2 || m2 < 2 || n < 1 {
        return Err(FdcError::InvalidSpec(format!(
            "barbell({m1},{m2},{n}) needs m1, m2 >= 2 and n >= 1"
        )));
    }
    let node_count = m1 + m2 + n - 1;
    let mut edges = Vec::new();
    for (start, size) in [(0, m1), (m1, m2)] {
        for i in start..start + size {
            for j in i + 1..start + size {
                edges.push(Edge::new(i, j));
            }
        }
    }
    let mut path = vec![0];
    path.extend(m1 + m2..node_count);
    path.push(m1);
    for pair in path.windows(2) {
        edges.push(Edge::new(pair[0], pair[1]));
    }
    let mut net = Network::from_core(node_count, &edges)?;
    for (i, label) in net.labels.iter_mut().enumerate() {
        let tag = if i < m1 {
            "clique-1"
        } else if i < m1 + m2 {
            "clique-2"
        } else {
            "path"
        };
        *label = Some(tag.to_string());
    }
    Ok(net)
}

/// Semi-complete graph with its two path arms and nothing else attached.
pub fn build_semicomplete_network(m: usize, n1: usize, n2: usize) -> Result<Network> {
    Network::standalone(&BranchSpec::semi_complete(m, n1, n2))
}

/// A seeded random connected graph: a random spanning tree plus extra edges
/// kept with probability `extra_prob`.
pub fn random_connected_core(node_count: usize, extra_prob: f64, seed: u64) -> Result<Network> {
    if node_count < 1 {
        return Err(FdcError::InvalidSpec("core needs at least one node".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = BTreeSet::new();
    for i in 1..node_count {
        let j = rng.random_range(0..i);
        edges.insert(Edge::new(i, j));
    }
    for i in 0..node_count {
        for j in i + 1..node_count {
            let e = Edge::new(i, j);
            if !edges.contains(&e) && rng.random::<f64>() < extra_prob {
                edges.insert(e);
            }
        }
    }
    let edges: Vec<Edge> = edges.into_iter().collect();
    let mut net = Network::from_core(node_count, &edges)?;
    for label in &mut net.labels {
        *label = Some("core".into());
    }
    Ok(net)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchJson {
    pub spec: BranchSpec,
    pub nodes: Vec<usize>,
    pub attachment: usize,
    pub bridge: Option<[usize; 2]>,
}

/// Graph exchange format. Edge keys are `"i-j"` with `i < j`, indices 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub orbits: BTreeMap<String, usize>,
    pub branches: Vec<BranchJson>,
}

impl GraphJson {
    pub fn from_network(net: &Network) -> Self {
        GraphJson {
            nodes: net.node_count,
            edges: net.edges.iter().map(|e| [e.u, e.v]).collect(),
            orbits: net
                .orbit_labels()
                .into_iter()
                .map(|(e, l)| (e.key(), l))
                .collect(),
            branches: net
                .branches
                .iter()
                .map(|eb| BranchJson {
                    spec: eb.branch.spec,
                    nodes: eb.embedding.clone(),
                    attachment: eb.attachment(),
                    bridge: eb.bridge_edge().map(|e| [e.u, e.v]),
                })
                .collect(),
        }
    }

    /// Rebuilds the network. Branch internals are regenerated from their specs
    /// and must agree with the listed edges.
    pub fn to_network(&self) -> Result<Network> {
        let mut all: Vec<Edge> = Vec::with_capacity(self.edges.len());
        for &[a, b] in &self.edges {
            if a == b || a >= self.nodes || b >= self.nodes {
                return Err(FdcError::InvalidSpec(format!("bad edge [{a},{b}]")));
            }
            all.push(Edge::new(a, b));
        }
        all.sort();
        all.dedup();
        let mut claimed = BTreeSet::new();
        let mut branch_nodes = BTreeSet::new();
        let mut branches = Vec::new();
        for bj in &self.branches {
            let branch = build_branch(&bj.spec)?;
            if bj.nodes.len() != branch.node_count {
                return Err(FdcError::DimensionMismatch {
                    expected: branch.node_count,
                    found: bj.nodes.len(),
                });
            }
            for &g in &bj.nodes {
                if g >= self.nodes || !branch_nodes.insert(g) {
                    return Err(FdcError::InvalidSpec(format!(
                        "branch node {g} out of range or shared"
                    )));
                }
            }
            let target = match bj.bridge {
                Some([a, b]) => {
                    let att = bj.nodes[branch.attachment_node];
                    if a == att {
                        Some(b)
                    } else if b == att {
                        Some(a)
                    } else {
                        return Err(FdcError::InvalidSpec(
                            "bridge does not touch the attachment node".into(),
                        ));
                    }
                }
                None => None,
            };
            let eb = EmbeddedBranch {
                branch,
                embedding: bj.nodes.clone(),
                target,
            };
            for local in &eb.branch.edges {
                claimed.insert(eb.global_edge(*local));
            }
            if let Some(bridge) = eb.bridge_edge() {
                claimed.insert(bridge);
            }
            branches.push(eb);
        }
        let all_set: BTreeSet<Edge> = all.iter().copied().collect();
        if !claimed.is_subset(&all_set) {
            return Err(FdcError::InvalidSpec(
                "branch edges missing from the edge list".into(),
            ));
        }
        let core_edges: Vec<Edge> = all.iter().filter(|e| !claimed.contains(e)).copied().collect();
        let core_nodes: Vec<usize> = (0..self.nodes).filter(|i| !branch_nodes.contains(i)).collect();
        let net = Network {
            node_count: self.nodes,
            edges: all,
            branches,
            core_nodes,
            core_edges,
            labels: vec![None; self.nodes],
        };
        if !net.is_connected() {
            return Err(FdcError::Disconnected);
        }
        Ok(net)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bridge_incl_edges(spec: BranchSpec) -> usize {
        build_branch(&spec).unwrap().edges.len() + 1
    }

    #[test]
    fn ten_node_branches_have_published_edge_counts() {
        let cases = [
            (BranchSpec::path(10), 10),
            (BranchSpec::lollipop(5, 5), 16),
            (BranchSpec::semi_complete(5, 2, 3), 15),
            (BranchSpec::ladder(1, 2, 2), 15),
            (BranchSpec::palm(4, 5), 10),
        ];
        for (spec, edges) in cases {
            let b = build_branch(&spec).unwrap();
            assert_eq!(b.node_count, 10, "{spec}");
            assert_eq!(bridge_incl_edges(spec), edges, "{spec}");
        }
    }

    #[test]
    fn orbit_counts_and_sizes() {
        let lol = build_branch(&BranchSpec::lollipop(5, 3)).unwrap();
        let classes = edge_orbits(&lol);
        assert_eq!(classes.len(), 3 + 2);
        let clique: usize = classes
            .iter()
            .filter(|c| matches!(c.role, OrbitRole::CliqueInner | OrbitRole::CliqueJoint))
            .map(|c| c.edges.len())
            .sum();
        assert_eq!(clique, 10);

        let semi = build_branch(&BranchSpec::semi_complete(5, 2, 4)).unwrap();
        let classes = edge_orbits(&semi);
        assert_eq!(classes.len(), 2 + 4 + 3);
        let inner = classes.iter().find(|c| c.role == OrbitRole::InnerInner).unwrap();
        assert_eq!(inner.edges.len(), 3 * 2 / 2);

        let palm = build_branch(&BranchSpec::palm(3, 4)).unwrap();
        let classes = edge_orbits(&palm);
        assert_eq!(classes.len(), 3 + 1);
        assert_eq!(classes[0].edges.len(), 4);

        let ladder = build_branch(&BranchSpec::ladder(3, 1, 2)).unwrap();
        let classes = edge_orbits(&ladder);
        assert_eq!(classes.len(), 1 + 2 + 2 * 3 + 3);
        for c in &classes {
            let want = match c.role {
                OrbitRole::LadderCross { .. } => 4,
                OrbitRole::LadderRung { .. } => 1,
                OrbitRole::LadderBridge => 2,
                OrbitRole::PathEdge => 1,
                other => panic!("unexpected role {other:?}"),
            };
            assert_eq!(c.edges.len(), want);
        }
    }

    #[test]
    fn semicomplete_m3_keeps_an_empty_inner_orbit() {
        let b = build_branch(&BranchSpec::semi_complete(3, 1, 1)).unwrap();
        let classes = edge_orbits(&b);
        assert_eq!(classes.len(), 1 + 1 + 3);
        let inner = classes.iter().find(|c| c.role == OrbitRole::InnerInner).unwrap();
        assert!(inner.edges.is_empty());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        for spec in [
            BranchSpec::path(0),
            BranchSpec::lollipop(1, 3),
            BranchSpec::semi_complete(2, 1, 1),
            BranchSpec::semi_complete(4, 0, 1),
            BranchSpec::ladder(0, 1, 1),
            BranchSpec::palm(0, 3),
            BranchSpec::palm(2, 0),
            BranchSpec { k: 3, ..BranchSpec::path(4) },
        ] {
            assert!(
                matches!(build_branch(&spec), Err(FdcError::InvalidSpec(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn star_counts() {
        let net = compose_star(&BranchSpec::path(10), 8).unwrap();
        assert_eq!((net.node_count, net.edges.len()), (81, 80));
        let net = compose_star(&BranchSpec::palm(4, 5), 8).unwrap();
        assert_eq!((net.node_count, net.edges.len()), (81, 80));
        let net = compose_star(&BranchSpec::path(1), 2).unwrap();
        assert_eq!(net.node_count, 3);
        assert_eq!(net.edges, vec![Edge::new(0, 1), Edge::new(0, 2)]);
        assert!(compose_star(&BranchSpec::path(3), 0).is_err());
    }

    #[test]
    fn star_bridges_share_one_orbit() {
        let net = compose_star(&BranchSpec::lollipop(4, 2), 3).unwrap();
        let labels = net.orbit_labels();
        let bridge_labels: BTreeSet<usize> =
            net.bridge_edges().iter().map(|e| labels[e]).collect();
        assert_eq!(bridge_labels.len(), 1);
        let internal: BTreeSet<usize> = net.internal_edges().iter().map(|e| labels[e]).collect();
        assert_eq!(internal.len(), edge_orbits(&net.branches[0].branch).len());
    }

    #[test]
    fn attach_to_triangle() {
        let tri = Network::from_core(3, &[Edge::new(0, 1), Edge::new(1, 2), Edge::new(0, 2)]).unwrap();
        let net = attach_branch(&tri, &BranchSpec::path(3), 0).unwrap();
        assert_eq!((net.node_count, net.edges.len()), (6, 6));
        assert!(net.has_edge(Edge::new(0, 5)));

        let twice = attach_branch(&net, &BranchSpec::path(3), 0).unwrap();
        assert_eq!(twice.node_count, 9);
        assert_eq!(twice.bridge_edges().len(), 2);
        let a: BTreeSet<usize> = twice.branches[0].embedding.iter().copied().collect();
        let b: BTreeSet<usize> = twice.branches[1].embedding.iter().copied().collect();
        assert!(a.is_disjoint(&b));

        assert!(matches!(
            attach_branch(&tri, &BranchSpec::path(2), 7),
            Err(FdcError::NodeOutOfRange { .. })
        ));
        // attaching at a branch node is not allowed
        assert!(attach_branch(&net, &BranchSpec::path(2), 4).is_err());
    }

    #[test]
    fn attach_to_single_node_core() {
        let single = Network::from_core(1, &[]).unwrap();
        let net = attach_branch(&single, &BranchSpec::palm(2, 3), 0).unwrap();
        assert_eq!(net.node_count, 1 + 6);
        assert_eq!(net.edges.len(), 5 + 1);
        assert!(net.is_connected());
    }

    #[test]
    fn barbell_counts() {
        let b = build_barbell(5, 4, 3).unwrap();
        assert_eq!(b.node_count, 11);
        let b = build_barbell(2, 2, 1).unwrap();
        assert_eq!((b.node_count, b.edges.len()), (4, 3));
        let b = build_barbell(4, 4, 2).unwrap();
        assert_eq!((b.node_count, b.edges.len()), (9, 14));
        assert!(build_barbell(1, 4, 2).is_err());
        assert!(build_barbell(3, 4, 0).is_err());
    }

    #[test]
    fn disconnected_core_is_rejected() {
        assert!(matches!(
            Network::from_core(4, &[Edge::new(0, 1), Edge::new(2, 3)]),
            Err(FdcError::Disconnected)
        ));
    }

    #[test]
    fn random_core_is_connected_and_seeded() {
        for seed in 0..20 {
            let a = random_connected_core(6, 0.3, seed).unwrap();
            let b = random_connected_core(6, 0.3, seed).unwrap();
            assert!(a.is_connected());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn graph_json_round_trip() {
        let core = random_connected_core(5, 0.3, 3).unwrap();
        let net = attach_branch(&core, &BranchSpec::ladder(2, 1, 0), 2).unwrap();
        let json = GraphJson::from_network(&net);
        let text = serde_json::to_string(&json).unwrap();
        let back: GraphJson = serde_json::from_str(&text).unwrap();
        let rebuilt = back.to_network().unwrap();
        assert_eq!(rebuilt.edges, net.edges);
        assert_eq!(rebuilt.core_edges, net.core_edges);
        assert_eq!(rebuilt.edge_roles(), net.edge_roles());
        assert!(json.orbits.keys().all(|k| {
            let e = Edge::parse_key(k).unwrap();
            e.key() == *k
        }));
    }
}

//! Linear consensus iteration and Monte-Carlo error curves.
//!
//! Trial `i` draws its initial vector from `ChaCha8Rng::seed_from_u64(seed)`
//! on stream `i`, so every trial is reproducible on its own. Trials run in
//! fixed-size chunks that may execute in parallel; partial sums are merged in
//! chunk order with compensated summation, which makes the averaged curves
//! bit-identical for any thread count.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FdcError, Result};
use crate::optimizer::{closed_form_candidate, optimize_common_bridge, OptConfig};
use crate::topology::Network;
use crate::weighting::{closed_form_internal_edges, heuristic_weights, HeuristicParams, WeightMatrix};

const CHUNK: usize = 64;

/// Tolerance of the golden-section bridge search used for optimal weights.
pub const BRIDGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitDistribution {
    Uniform01,
    StandardNormal,
    /// Every node starts at the same value.
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub init: InitDistribution,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            steps: 500,
            trials: 10_000,
            seed: 42,
            init: InitDistribution::Uniform01,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 || self.trials < 1 {
            return Err(FdcError::InvalidSpec("steps and trials must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingMethod {
    Optimal,
    Metropolis,
    MaxDegree,
    BestConstant,
}

impl WeightingMethod {
    pub const ALL: [WeightingMethod; 4] = [
        WeightingMethod::Optimal,
        WeightingMethod::Metropolis,
        WeightingMethod::MaxDegree,
        WeightingMethod::BestConstant,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WeightingMethod::Optimal => "optimal",
            WeightingMethod::Metropolis => "metropolis",
            WeightingMethod::MaxDegree => "maxdeg",
            WeightingMethod::BestConstant => "bestconst",
        }
    }

    /// The weight matrix this method assigns to `network`.
    ///
    /// Optimal weights use the closed forms on branch-internal edges. When
    /// the core has no edges of its own, all bridges share one weight found
    /// by golden-section search; otherwise bridges and core edges are
    /// optimized jointly.
    pub fn matrix(&self, network: &Network) -> Result<WeightMatrix> {
        match self {
            WeightingMethod::Metropolis => heuristic_weights(network, HeuristicParams::metropolis()),
            WeightingMethod::MaxDegree => heuristic_weights(network, HeuristicParams::max_degree()),
            WeightingMethod::BestConstant => heuristic_weights(network, HeuristicParams::best_constant()),
            WeightingMethod::Optimal => {
                let mut weights = closed_form_internal_edges(network);
                let bridges = network.bridge_edges();
                if network.core_edges.is_empty() && !bridges.is_empty() {
                    let opt = optimize_common_bridge(network, &weights, BRIDGE_TOL)?;
                    for e in bridges {
                        weights.insert(e, opt.bridge_weight);
                    }
                } else if weights.len() < network.edges.len() {
                    let (result, _) = closed_form_candidate(network, &OptConfig::default())?;
                    weights = result.weights;
                }
                WeightMatrix::from_edge_weights(network.node_count, &weights)
            }
        }
    }
}

impl fmt::Display for WeightingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightingMethod {
    type Err = FdcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "optimal" => Ok(WeightingMethod::Optimal),
            "metropolis" | "mh" => Ok(WeightingMethod::Metropolis),
            "maxdeg" | "max-degree" | "maxdegree" => Ok(WeightingMethod::MaxDegree),
            "bestconst" | "best-constant" | "bestconstant" => Ok(WeightingMethod::BestConstant),
            other => Err(FdcError::InvalidSpec(format!("unknown weighting method {other:?}"))),
        }
    }
}

/// Row-compressed copy of a weight matrix for the iteration.
#[derive(Debug, Clone)]
pub struct SparseWeights {
    row_start: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseWeights {
    pub fn from_matrix(w: &WeightMatrix) -> Self {
        let n = w.dimension();
        let mut row_start = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_start.push(0);
        for i in 0..n {
            for j in 0..n {
                let v = w.get(i, j);
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_start.push(cols.len());
        }
        SparseWeights { row_start, cols, vals }
    }

    pub fn dimension(&self) -> usize {
        self.row_start.len() - 1
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_start[i], self.row_start[i + 1]);
            *o = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&j, &v)| v * x[j]).sum();
        }
    }
}

fn distance_to_mean(x: &[f64], mean: f64) -> f64 {
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>().sqrt()
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusRun {
    /// `x(0), ..., x(T)`.
    pub trajectory: Vec<Vec<f64>>,
    /// `‖x(t) - x̄ 1‖₂` with `x̄ = mean(x(0))`.
    pub errors: Vec<f64>,
}

/// Iterates `x(t+1) = W x(t)` for `steps` steps.
pub fn run_consensus(w: &WeightMatrix, x0: &[f64], steps: usize) -> Result<ConsensusRun> {
    if x0.len() != w.dimension() {
        return Err(FdcError::DimensionMismatch {
            expected: w.dimension(),
            found: x0.len(),
        });
    }
    let sparse = SparseWeights::from_matrix(w);
    let avg = mean(x0);
    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut errors = Vec::with_capacity(steps + 1);
    trajectory.push(x0.to_vec());
    errors.push(distance_to_mean(x0, avg));
    let mut next = vec![0.0; x0.len()];
    for t in 0..steps {
        sparse.apply(&trajectory[t], &mut next);
        errors.push(distance_to_mean(&next, avg));
        trajectory.push(next.clone());
    }
    Ok(ConsensusRun { trajectory, errors })
}

/// Initial vector of one trial.
pub fn initial_values(config: &SimConfig, trial: usize, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(trial as u64);
    match config.init {
        InitDistribution::Uniform01 => (0..n).map(|_| rng.random::<f64>()).collect(),
        InitDistribution::StandardNormal => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        InitDistribution::Constant(c) => vec![c; n],
    }
}

/// Neumaier running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    comp: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub methods: Vec<String>,
    /// One curve per method, each of length `steps + 1`.
    pub mean_error: Vec<Vec<f64>>,
    pub seed: u64,
    pub trials: usize,
    pub steps: usize,
}

impl SimResult {
    pub fn curve(&self, method: &str) -> Option<&[f64]> {
        self.methods
            .iter()
            .position(|m| m == method)
            .map(|i| self.mean_error[i].as_slice())
    }

    /// Convergence CSV `t,<method>,...` with 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = format!("t,{}\n", self.methods.join(","));
        for t in 0..=self.steps {
            out.push_str(&t.to_string());
            for curve in &self.mean_error {
                out.push_str(&format!(",{:.11e}", curve[t]));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs every trial on every named matrix with shared initial vectors and
/// averages the error curves over trials.
pub fn monte_carlo_matrices(matrices: &[(String, WeightMatrix)], config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    let n = matrices
        .first()
        .map(|(_, w)| w.dimension())
        .ok_or_else(|| FdcError::InvalidSpec("no methods to simulate".into()))?;
    if let Some((_, w)) = matrices.iter().find(|(_, w)| w.dimension() != n) {
        return Err(FdcError::DimensionMismatch {
            expected: n,
            found: w.dimension(),
        });
    }
    let sparse: Vec<SparseWeights> = matrices.iter().map(|(_, w)| SparseWeights::from_matrix(w)).collect();
    let steps = config.steps;
    let chunks = config.trials.div_ceil(CHUNK);
    let partials: Vec<Vec<Vec<Compensated>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![vec![Compensated::default(); steps + 1]; sparse.len()];
            let mut x = vec![0.0; n];
            let mut next = vec![0.0; n];
            for trial in c * CHUNK..((c + 1) * CHUNK).min(config.trials) {
                let x0 = initial_values(config, trial, n);
                let avg = mean(&x0);
                for (m, w) in sparse.iter().enumerate() {
                    x.copy_from_slice(&x0);
                    acc[m][0].add(distance_to_mean(&x, avg));
                    for slot in acc[m].iter_mut().skip(1) {
                        w.apply(&x, &mut next);
                        std::mem::swap(&mut x, &mut next);
                        slot.add(distance_to_mean(&x, avg));
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = vec![vec![Compensated::default(); steps + 1]; sparse.len()];
    for chunk in &partials {
        for (tm, cm) in total.iter_mut().zip(chunk) {
            for (t, c) in tm.iter_mut().zip(cm) {
                t.add(c.sum);
                t.add(c.comp);
            }
        }
    }
    let trials = config.trials as f64;
    Ok(SimResult {
        methods: matrices.iter().map(|(name, _)| name.clone()).collect(),
        mean_error: total
            .iter()
            .map(|curve| curve.iter().map(|c| c.value() / trials).collect())
            .collect(),
        seed: config.seed,
        trials: config.trials,
        steps,
    })
}

/// Monte-Carlo comparison of weighting methods on one network.
pub fn monte_carlo(network: &Network, methods: &[WeightingMethod], config: &SimConfig) -> Result<SimResult> {
    let unique: BTreeSet<WeightingMethod> = methods.iter().copied().collect();
    if unique.len() != methods.len() {
        return Err(FdcError::InvalidSpec("duplicate weighting method".into()));
    }
    let matrices = methods
        .iter()
        .map(|m| Ok((m.name().to_string(), m.matrix(network)?)))
        .collect::<Result<Vec<_>>>()?;
    monte_carlo_matrices(&matrices, config)
}

/// Least-squares slope of `ln(curve[t])` over `t` in `[t0, t1]`.
pub fn log_slope(curve: &[f64], t0: usize, t1: usize) -> Result<f64> {
    if t1 <= t0 || t1 >= curve.len() {
        return Err(FdcError::InvalidSpec(format!(
            "slope window [{t0}, {t1}] does not fit a curve of length {}",
            curve.len()
        )));
    }
    if curve[t0..=t1].iter().any(|v| *v <= 0.0) {
        return Err(FdcError::InvalidSpec("log slope of a non-positive curve".into()));
    }
    let k = (t1 - t0 + 1) as f64;
    let tm = (t0 + t1) as f64 / 2.0;
    let ym = curve[t0..=t1].iter().map(|v| v.ln()).sum::<f64>() / k;
    let mut num = 0.0;
    let mut den = 0.0;
    for (t, v) in (t0..=t1).zip(&curve[t0..=t1]) {
        let dt = t as f64 - tm;
        num += dt * (v.ln() - ym);
        den += dt * dt;
    }
    Ok(num / den)
}

/// Largest deviation of `mean(x(t))` from `mean(x(0))` along a run.
pub fn average_drift(run: &ConsensusRun) -> f64 {
    let m0 = mean(&run.trajectory[0]);
    run.trajectory
        .iter()
        .map(|x| (mean(x) - m0).abs())
        .fold(0.0, f64::max)
}

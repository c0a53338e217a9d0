//! Convex minimization of the SLEM over free edge weights.
//!
//! The weight matrix is parametrized as `W(w) = I - Σ w_e (e_i - e_j)(e_i - e_j)ᵀ`
//! and the objective is `f(w) = ‖W(w) - 11ᵀ/n‖₂`, convex in `w`. A projected
//! spectral subgradient method runs first; an interior-point polish on the
//! equivalent semidefinite program then drives the gap below `1e-10`.

mod barrier;
mod certify;
mod golden;

pub use certify::{certify_optimality, closed_form_candidate, CertificationReport, StartKind, StartSummary};
pub use golden::{golden_section, optimize_common_bridge, BridgeOptimum};

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FdcError, Result};
use crate::spectral::{eig_sym_matrix, eigenvalues_desc, SLEM_TIE_TOL};
use crate::topology::{Edge, Network};
use crate::weighting::{heuristic_weights, EdgeWeights, HeuristicParams, WeightFile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptConfig {
    pub max_iters: usize,
    /// Subgradient step at iteration t is `step0 / sqrt(t)`.
    pub step0: f64,
    pub stall_window: usize,
    pub stall_tol: f64,
    pub record_history: bool,
    /// Run the interior-point polish after the subgradient phase.
    pub polish: bool,
    /// Target bound on `f(w) - f*` for the polish.
    pub gap_tol: f64,
}

impl Default for OptConfig {
    fn default() -> Self {
        OptConfig {
            max_iters: 50_000,
            step0: 1.0,
            stall_window: 200,
            stall_tol: 1e-9,
            record_history: false,
            polish: true,
            gap_tol: 1e-10,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(FdcError::InvalidSpec("max_iters must be at least 1".into()));
        }
        if !(self.step0 > 0.0) {
            return Err(FdcError::InvalidSpec("step0 must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    /// Weight of every network edge, fixed ones included.
    pub weights: EdgeWeights,
    pub slem: f64,
    /// Subgradient iterations plus Newton steps.
    pub iterations: usize,
    pub converged: bool,
    pub best_history: Option<Vec<f64>>,
}

impl OptResult {
    /// Result JSON: the weight exchange format plus solver status.
    pub fn to_json(&self, network: &Network) -> serde_json::Value {
        let file = WeightFile::from_edge_weights(network, &self.weights);
        serde_json::json!({
            "weights": file,
            "slem": self.slem,
            "iterations": self.iterations,
            "converged": self.converged,
        })
    }

    /// Trace CSV `iter,best_slem`.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("iter,best_slem\n");
        for (i, v) in self.best_history.iter().flatten().enumerate() {
            out.push_str(&format!("{i},{v:.16e}\n"));
        }
        out
    }
}

/// `W(w) - 11ᵀ/n` for the given edge weights.
pub(crate) fn deviation_matrix(n: usize, weights: &EdgeWeights) -> DMatrix<f64> {
    let mut a = DMatrix::<f64>::identity(n, n);
    a.add_scalar_mut(-1.0 / n as f64);
    for (e, &w) in weights {
        a[(e.u, e.u)] -= w;
        a[(e.v, e.v)] -= w;
        a[(e.u, e.v)] += w;
        a[(e.v, e.u)] += w;
    }
    a
}

/// `f(w) = ‖W(w) - 11ᵀ/n‖₂`, which equals the SLEM for symmetric stochastic W.
pub fn objective(n: usize, weights: &EdgeWeights) -> Result<f64> {
    let ev = eigenvalues_desc(&deviation_matrix(n, weights))?;
    Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
}

/// Free edges in a fixed order together with the full weight map.
pub(crate) struct Problem<'a> {
    pub n: usize,
    pub free: Vec<Edge>,
    pub weights: EdgeWeights,
    pub history: Option<&'a mut Vec<f64>>,
}

impl Problem<'_> {
    pub fn set_free(&mut self, x: &[f64]) {
        for (e, v) in self.free.iter().zip(x) {
            self.weights.insert(*e, *v);
        }
    }

    pub fn free_values(&self) -> Vec<f64> {
        self.free.iter().map(|e| self.weights[e]).collect()
    }
}

fn check_inputs(network: &Network, fixed: &EdgeWeights, free: &BTreeSet<Edge>) -> Result<()> {
    if !network.is_connected() {
        return Err(FdcError::Disconnected);
    }
    for e in free.iter().chain(fixed.keys()) {
        if !network.has_edge(*e) {
            return Err(FdcError::InvalidSpec(format!("{e} is not an edge of the network")));
        }
    }
    if let Some(e) = network.edges.iter().find(|e| !free.contains(e) && !fixed.contains_key(e)) {
        return Err(FdcError::MissingWeight(format!("edge {e} is neither fixed nor free")));
    }
    Ok(())
}

/// Minimizes the SLEM over `free` edges, starting the free weights at their
/// Metropolis values.
pub fn minimize_slem(
    network: &Network,
    fixed: &EdgeWeights,
    free: &BTreeSet<Edge>,
    config: &OptConfig,
) -> Result<OptResult> {
    check_inputs(network, fixed, free)?;
    let metropolis = heuristic_weights(network, HeuristicParams::metropolis())?.edge_weights(network);
    minimize_slem_from(network, fixed, free, &metropolis, config)
}

/// Minimizes the SLEM over `free` edges from the free values in `start`.
/// Fixed values win over `start`.
pub fn minimize_slem_from(
    network: &Network,
    fixed: &EdgeWeights,
    free: &BTreeSet<Edge>,
    start: &EdgeWeights,
    config: &OptConfig,
) -> Result<OptResult> {
    config.validate()?;
    check_inputs(network, fixed, free)?;
    let mut weights = EdgeWeights::new();
    for e in &network.edges {
        let w = if let Some(w) = fixed.get(e).filter(|_| !free.contains(e)) {
            *w
        } else {
            *start
                .get(e)
                .ok_or_else(|| FdcError::MissingWeight(format!("start value for {e}")))?
        };
        weights.insert(*e, w);
    }
    let mut history = Vec::new();
    let mut problem = Problem {
        n: network.node_count,
        free: free.iter().copied().collect(),
        weights,
        history: config.record_history.then_some(&mut history),
    };

    let (mut best_x, mut best_f, sub_iters, stalled) = subgradient(&mut problem, config)?;
    let mut iterations = sub_iters;
    let mut converged = stalled;
    if config.polish && !problem.free.is_empty() {
        problem.set_free(&best_x);
        let polish = barrier::polish(&mut problem, best_f, config.gap_tol)?;
        iterations += polish.newton_steps;
        if polish.best_f <= best_f {
            best_f = polish.best_f;
            best_x = polish.best_x;
        }
        converged = polish.reached_gap;
    } else if problem.free.is_empty() {
        converged = true;
    }
    problem.set_free(&best_x);
    let slem = objective(problem.n, &problem.weights)?;
    debug_assert!((slem - best_f).abs() <= 1e-12);
    Ok(OptResult {
        weights: problem.weights,
        slem,
        iterations,
        converged,
        best_history: config.record_history.then_some(history),
    })
}

/// Subgradient of f at the current weights, one component per free edge.
fn subgradient_at(problem: &Problem) -> Result<(f64, Vec<f64>)> {
    let a = deviation_matrix(problem.n, &problem.weights);
    let spec = eig_sym_matrix(&a)?;
    let n = problem.n;
    let top = spec.eigenvalues[0];
    let bottom = spec.eigenvalues[n - 1];
    let f = top.abs().max(bottom.abs());
    let u = spec.eigenvectors.column(0);
    let v = spec.eigenvectors.column(n - 1);
    let top_side = |e: &Edge| -(u[e.u] - u[e.v]).powi(2);
    let bottom_side = |e: &Edge| (v[e.u] - v[e.v]).powi(2);
    let g = problem
        .free
        .iter()
        .map(|e| {
            if (top + bottom).abs() <= SLEM_TIE_TOL {
                0.5 * (top_side(e) + bottom_side(e))
            } else if top >= -bottom {
                top_side(e)
            } else {
                bottom_side(e)
            }
        })
        .collect();
    Ok((f, g))
}

/// Returns the best free values, their objective, the iteration count and
/// whether the run stopped on the stall criterion.
fn subgradient(problem: &mut Problem, config: &OptConfig) -> Result<(Vec<f64>, f64, usize, bool)> {
    let mut x = problem.free_values();
    let mut best_x = x.clone();
    let mut best_f = f64::INFINITY;
    let mut last_improvement = (0usize, f64::INFINITY);
    if problem.free.is_empty() {
        best_f = objective(problem.n, &problem.weights)?;
        if let Some(h) = problem.history.as_deref_mut() {
            h.push(best_f);
        }
        return Ok((best_x, best_f, 0, true));
    }
    for t in 1..=config.max_iters {
        problem.set_free(&x);
        let (f, g) = subgradient_at(problem)?;
        if f < best_f {
            best_f = f;
            best_x.clone_from(&x);
        }
        if let Some(h) = problem.history.as_deref_mut() {
            h.push(best_f);
        }
        if last_improvement.1 - best_f > config.stall_tol {
            last_improvement = (t, best_f);
        } else if t - last_improvement.0 >= config.stall_window {
            return Ok((best_x, best_f, t, true));
        }
        let step = config.step0 / (t as f64).sqrt();
        for (xi, gi) in x.iter_mut().zip(&g) {
            *xi -= step * gi;
        }
    }
    Ok((best_x, best_f, config.max_iters, false))
}

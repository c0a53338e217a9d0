//! Orthonormal change of basis that block-diagonalizes a branch's weight
//! matrix along its automorphism orbits.
//!
//! Complex roots-of-unity combinations over a symmetric node set are replaced
//! by the real Helmert contrasts on that set. Any orthonormal basis of the
//! complement of the uniform vector gives the same (scalar) block, so the
//! choice inside that subspace is immaterial and the arithmetic stays real.

use std::ops::Range;

use nalgebra::DMatrix;
use serde_json::json;

use super::{eigenvalues_desc, multiset_deviation};
use crate::error::{FdcError, Result};
use crate::topology::{Branch, BranchKind, Edge, OrbitRole};
use crate::weighting::{ladder_rung_eigenvalues, EdgeWeights, OrbitWeights, WeightMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedForm {
    /// Weight matrix of the branch plus a one-node stub behind the bridge.
    pub matrix: WeightMatrix,
    /// Rows are the new basis vectors.
    pub basis: DMatrix<f64>,
    /// `basis · W · basisᵀ`.
    pub transformed: DMatrix<f64>,
    /// Decoupled eigenvalues with their multiplicities.
    pub decoupled: Vec<(f64, usize)>,
    pub block_boundaries: Vec<Range<usize>>,
}

impl StratifiedForm {
    pub fn decoupled_multiplicity(&self) -> usize {
        self.decoupled.iter().map(|(_, k)| k).sum()
    }

    /// The residual block left after removing the decoupled rows.
    pub fn residual_block(&self) -> DMatrix<f64> {
        let start = self.decoupled_multiplicity();
        let n = self.transformed.nrows();
        self.transformed.view((start, start), (n - start, n - start)).into_owned()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let basis: Vec<Vec<f64>> = self.basis.row_iter().map(|r| r.iter().copied().collect()).collect();
        let blocks: Vec<[usize; 2]> = self.block_boundaries.iter().map(|r| [r.start, r.end]).collect();
        let decoupled: Vec<serde_json::Value> = self
            .decoupled
            .iter()
            .map(|(v, k)| json!({"eigenvalue": v, "multiplicity": k}))
            .collect();
        json!({
            "dimension": self.basis.nrows(),
            "basis": basis,
            "block_boundaries": blocks,
            "decoupled": decoupled,
        })
    }
}

/// Orthonormal contrasts on `nodes` (Helmert), `nodes.len() - 1` rows.
fn helmert_rows(nodes: &[usize], dim: usize) -> Vec<Vec<f64>> {
    let p = nodes.len();
    (1..p)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            let mut row = vec![0.0; dim];
            for &node in &nodes[..k] {
                row[node] = 1.0 / norm;
            }
            row[nodes[k]] = -(k as f64) / norm;
            row
        })
        .collect()
}

fn unit(node: usize, dim: usize) -> Vec<f64> {
    let mut row = vec![0.0; dim];
    row[node] = 1.0;
    row
}

fn orbit_value(branch: &Branch, weights: &OrbitWeights, role: OrbitRole, nth: usize) -> Result<f64> {
    let label = branch
        .orbit_roles
        .iter()
        .enumerate()
        .filter(|(_, r)| **r == role)
        .nth(nth)
        .map(|(l, _)| l)
        .ok_or_else(|| FdcError::MissingWeight(format!("{role:?} orbit")))?;
    weights
        .get(label)
        .ok_or_else(|| FdcError::MissingWeight(format!("orbit {label}")))
}

/// Stratifies a standalone branch whose bridge leads into a one-node stub.
///
/// The returned basis puts the decoupled combinations first (each a 1×1
/// block), followed by one residual block holding the uniform combination of
/// the symmetric set (or the symmetric level combinations of a ladder) and the
/// remaining nodes in local order, with the stub last. A path has no
/// non-trivial symmetry and gets the identity basis with a single block.
pub fn stratify(branch: &Branch, weights: &OrbitWeights, bridge: f64) -> Result<StratifiedForm> {
    let dim = branch.node_count + 1;
    let stub = branch.node_count;
    let mut edge_weights = EdgeWeights::new();
    for (e, label) in &branch.orbit_of_edge {
        let w = weights
            .get(*label)
            .ok_or_else(|| FdcError::MissingWeight(format!("orbit {label}")))?;
        edge_weights.insert(*e, w);
    }
    edge_weights.insert(Edge::new(branch.attachment_node, stub), bridge);
    let matrix = WeightMatrix::from_edge_weights(dim, &edge_weights)?;

    let spec = &branch.spec;
    let mut decoupled_rows: Vec<Vec<f64>> = Vec::new();
    let mut residual_rows: Vec<Vec<f64>> = Vec::new();
    let mut decoupled: Vec<(f64, usize)> = Vec::new();

    match spec.kind {
        BranchKind::Path => {
            residual_rows.extend((0..dim).map(|i| unit(i, dim)));
        }
        BranchKind::Lollipop | BranchKind::SemiComplete | BranchKind::Palm => {
            let sym = branch.symmetric_nodes();
            decoupled_rows = helmert_rows(&sym, dim);
            let value = match spec.kind {
                BranchKind::Lollipop => {
                    let w_joint = orbit_value(branch, weights, OrbitRole::CliqueJoint, 0)?;
                    let w_inner = orbit_value(branch, weights, OrbitRole::CliqueInner, 0)?;
                    1.0 - w_joint - (spec.m as f64 - 1.0) * w_inner
                }
                BranchKind::SemiComplete => {
                    let w_a = orbit_value(branch, weights, OrbitRole::OuterInner, 0)?;
                    let w_b = orbit_value(branch, weights, OrbitRole::OuterInner, 1)?;
                    let w_ii = orbit_value(branch, weights, OrbitRole::InnerInner, 0)?;
                    1.0 - w_a - w_b - (spec.m as f64 - 2.0) * w_ii
                }
                _ => 1.0 - orbit_value(branch, weights, OrbitRole::Star, 0)?,
            };
            if !decoupled_rows.is_empty() {
                decoupled.push((value, decoupled_rows.len()));
            }
            let first = sym.first().copied();
            let norm = (sym.len() as f64).sqrt();
            for i in 0..dim {
                if Some(i) == first {
                    let mut row = vec![0.0; dim];
                    for &s in &sym {
                        row[s] = 1.0 / norm;
                    }
                    residual_rows.push(row);
                } else if !sym.contains(&i) {
                    residual_rows.push(unit(i, dim));
                }
            }
        }
        BranchKind::Ladder => {
            let levels = branch.ladder_levels();
            let h = std::f64::consts::FRAC_1_SQRT_2;
            for &(a, b) in &levels {
                let mut row = vec![0.0; dim];
                row[a] = h;
                row[b] = -h;
                decoupled_rows.push(row);
            }
            decoupled.extend(ladder_rung_eigenvalues(branch, weights)?.into_iter().map(|v| (v, 1)));
            for i in 0..dim {
                if let Some(&(a, b)) = levels.iter().find(|(a, _)| *a == i) {
                    let mut row = vec![0.0; dim];
                    row[a] = h;
                    row[b] = h;
                    residual_rows.push(row);
                } else if !levels.iter().any(|(_, b)| *b == i) {
                    residual_rows.push(unit(i, dim));
                }
            }
        }
    }

    let k = decoupled_rows.len();
    let rows: Vec<f64> = decoupled_rows.into_iter().chain(residual_rows).flatten().collect();
    debug_assert_eq!(rows.len(), dim * dim);
    let basis = DMatrix::from_row_slice(dim, dim, &rows);
    let transformed = &basis * matrix.entries() * basis.transpose();
    let mut block_boundaries: Vec<Range<usize>> = (0..k).map(|i| i..i + 1).collect();
    block_boundaries.push(k..dim);

    Ok(StratifiedForm {
        matrix,
        basis,
        transformed,
        decoupled,
        block_boundaries,
    })
}

/// Residuals of a stratified form checked against a weight matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockResidual {
    /// Largest magnitude of `basis · W · basisᵀ` outside the declared blocks.
    pub max_off_block: f64,
    /// Largest elementwise gap between the sorted spectra of W and the transform.
    pub spectrum_deviation: f64,
    /// `max |basis · basisᵀ - I|`.
    pub orthonormality: f64,
}

pub fn verify_block_structure(form: &StratifiedForm, w: &WeightMatrix) -> Result<BlockResidual> {
    let n = form.basis.nrows();
    if w.dimension() != n {
        return Err(FdcError::DimensionMismatch {
            expected: n,
            found: w.dimension(),
        });
    }
    let transformed = &form.basis * w.entries() * form.basis.transpose();
    let mut block_of = vec![usize::MAX; n];
    for (b, range) in form.block_boundaries.iter().enumerate() {
        for i in range.clone() {
            block_of[i] = b;
        }
    }
    let mut max_off_block: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if block_of[i] != block_of[j] || block_of[i] == usize::MAX {
                max_off_block = max_off_block.max(transformed[(i, j)].abs());
            }
        }
    }
    let gram = &form.basis * form.basis.transpose() - DMatrix::<f64>::identity(n, n);
    let orthonormality = gram.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
    // symmetrize before the eigensolver; rounding breaks exact symmetry
    let sym = (&transformed + transformed.transpose()) * 0.5;
    let spectrum_deviation =
        multiset_deviation(&eigenvalues_desc(w.entries())?, &eigenvalues_desc(&sym)?)?;
    Ok(BlockResidual {
        max_off_block,
        spectrum_deviation,
        orthonormality,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{build_branch, BranchSpec};
    use crate::weighting::closed_form_weights;

    fn closed(spec: BranchSpec, bridge: f64) -> StratifiedForm {
        let b = build_branch(&spec).unwrap();
        let w = closed_form_weights(&b);
        stratify(&b, &w, bridge).unwrap()
    }

    #[test]
    fn palm_decouples_leaf_contrasts() {
        let form = closed(BranchSpec::palm(3, 4), 0.4);
        assert_eq!(form.decoupled.len(), 1);
        let (value, mult) = form.decoupled[0];
        assert!((value - 0.8).abs() < 1e-15);
        assert_eq!(mult, 3);
        for i in 0..3 {
            assert!((form.transformed[(i, i)] - 0.8).abs() < 1e-14);
        }
        let r = verify_block_structure(&form, &form.matrix).unwrap();
        assert!(r.max_off_block <= 1e-12);
        assert!(r.spectrum_deviation <= 1e-12);
    }

    #[test]
    fn palm_residual_has_sqrt_k_coupling() {
        let form = closed(BranchSpec::palm(3, 4), 0.4);
        let res = form.residual_block();
        // residual order: center, uniform leaves, path..., stub
        assert!((res[(0, 1)] - 2.0 * 0.2).abs() < 1e-14);
        assert!((res[(1, 1)] - 0.8).abs() < 1e-14);
        assert!((res[(0, 0)] - (1.0 - 4.0 * 0.2 - 0.5)).abs() < 1e-14);
    }

    #[test]
    fn semicomplete_closed_forms_decouple_at_zero() {
        let form = closed(BranchSpec::semi_complete(5, 2, 3), 0.3);
        assert_eq!(form.decoupled.len(), 1);
        assert!(form.decoupled[0].0.abs() < 1e-15);
        assert_eq!(form.decoupled[0].1, 2);
    }

    #[test]
    fn lollipop_multiplicity_is_m_minus_two() {
        for m in 2..8 {
            let form = closed(BranchSpec::lollipop(m, 2), 0.5);
            assert_eq!(form.decoupled_multiplicity(), m - 2, "m = {m}");
        }
    }

    #[test]
    fn ladder_levels_decouple() {
        let form = closed(BranchSpec::ladder(2, 1, 1), 0.5);
        assert_eq!(form.decoupled.len(), 3);
        assert!((form.decoupled[0].0 - 1.0 / 6.0).abs() < 1e-15);
        assert!(form.decoupled[1].0.abs() < 1e-15);
        let r = verify_block_structure(&form, &form.matrix).unwrap();
        assert!(r.max_off_block <= 1e-12);
    }

    #[test]
    fn path_gets_identity_basis() {
        let form = closed(BranchSpec::path(4), 0.5);
        assert_eq!(form.basis, DMatrix::<f64>::identity(5, 5));
        assert_eq!(form.block_boundaries, vec![0..5]);
        assert!(form.decoupled.is_empty());
        let r = verify_block_structure(&form, &form.matrix).unwrap();
        assert_eq!(r.max_off_block, 0.0);
        assert!(r.spectrum_deviation <= 1e-14);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let form = closed(BranchSpec::palm(1, 2), 0.5);
        assert!(matches!(
            verify_block_structure(&form, &WeightMatrix::identity(3)),
            Err(FdcError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn json_dump_lists_blocks() {
        let form = closed(BranchSpec::palm(1, 3), 0.5);
        let v = form.to_json();
        assert_eq!(v["dimension"], 6);
        assert_eq!(v["block_boundaries"].as_array().unwrap().len(), 3);
    }
}

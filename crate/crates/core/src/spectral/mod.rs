//! Symmetric eigendecomposition, SLEM evaluation and closed-form spectra.

mod stratify;

pub use stratify::{stratify, verify_block_structure, BlockResidual, StratifiedForm};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{FdcError, Result};
use crate::weighting::WeightMatrix;

/// Iteration cap per eigenvalue for the implicit-shift QR sweeps.
const SWEEPS_PER_EIGENVALUE: usize = 50;

/// Eigenvalues sorted descending with orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// CSV `index,eigenvalue`, descending.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (i, v) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{i},{v:.16e}\n"));
        }
        out
    }
}

fn decompose(matrix: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    let n = matrix.nrows();
    if n != matrix.ncols() {
        return Err(FdcError::DimensionMismatch {
            expected: n,
            found: matrix.ncols(),
        });
    }
    let cap = SWEEPS_PER_EIGENVALUE * n.max(1);
    SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, cap).ok_or(FdcError::ConvergenceFailure { residual: f64::NAN })
}

fn check_symmetric(matrix: &DMatrix<f64>) -> Result<()> {
    let n = matrix.nrows();
    for i in 0..n {
        for j in i + 1..n {
            if matrix[(i, j)] != matrix[(j, i)] {
                return Err(FdcError::InvalidSpec(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    Ok(())
}

/// Full symmetric eigendecomposition of an arbitrary symmetric matrix.
///
/// Eigenpairs are sorted by descending eigenvalue (ties keep solver order)
/// and each eigenvector is signed so its first non-negligible entry is
/// positive, which makes the output reproducible.
pub fn eig_sym_matrix(matrix: &DMatrix<f64>) -> Result<Spectrum> {
    check_symmetric(matrix)?;
    let eig = decompose(matrix)?;
    let n = matrix.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut eigenvectors = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = col
            .iter()
            .find(|x| x.abs() > 1e-12)
            .map_or(1.0, |x| x.signum());
        eigenvectors.set_column(dst, &(col * sign));
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors,
    })
}

pub fn eig_sym(w: &WeightMatrix) -> Result<Spectrum> {
    eig_sym_matrix(w.entries())
}

/// Eigenvalues only, descending.
pub fn eigenvalues_desc(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(matrix)?;
    let mut ev: Vec<f64> = matrix.symmetric_eigenvalues().iter().copied().collect();
    if ev.iter().any(|v| !v.is_finite()) {
        return Err(FdcError::ConvergenceFailure { residual: f64::NAN });
    }
    ev.sort_by(|a, b| b.total_cmp(a));
    Ok(ev)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlemSide {
    SecondLargest,
    MostNegative,
    Tie,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlemReport {
    pub slem: f64,
    pub side: SlemSide,
    pub spectral_gap: f64,
}

/// `|λ2 + λn|` at or below this counts as a tie between the two sides.
pub const SLEM_TIE_TOL: f64 = 1e-12;

pub fn slem_from_eigenvalues(eigenvalues: &[f64]) -> Result<SlemReport> {
    let n = eigenvalues.len();
    if n == 0 {
        return Err(FdcError::DimensionMismatch { expected: 1, found: 0 });
    }
    let top = eigenvalues[0];
    if (top - 1.0).abs() > 1e-8 {
        return Err(FdcError::NotStochasticSpectrum(top));
    }
    if n == 1 {
        return Ok(SlemReport {
            slem: 0.0,
            side: SlemSide::Tie,
            spectral_gap: 1.0,
        });
    }
    let second = eigenvalues[1];
    let last = eigenvalues[n - 1];
    let side = if (second + last).abs() <= SLEM_TIE_TOL {
        SlemSide::Tie
    } else if second > -last {
        SlemSide::SecondLargest
    } else {
        SlemSide::MostNegative
    };
    let slem = second.max(-last);
    Ok(SlemReport {
        slem,
        side,
        spectral_gap: 1.0 - slem,
    })
}

pub fn slem(spectrum: &Spectrum) -> Result<SlemReport> {
    slem_from_eigenvalues(&spectrum.eigenvalues)
}

/// SLEM of a weight matrix.
pub fn slem_of(w: &WeightMatrix) -> Result<f64> {
    Ok(slem_from_eigenvalues(&eigenvalues_desc(w.entries())?)?.slem)
}

/// Networks whose spectrum under closed-form weights has a published formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ClosedFormNetwork {
    Barbell { m1: usize, m2: usize, n: usize },
    SemiComplete { m: usize, n1: usize, n2: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedFormSpectrum {
    pub slem: f64,
    /// Predicted eigenvalue multiset, descending.
    pub eigenvalues: Vec<f64>,
    pub zero_multiplicity: usize,
}

/// Predicted SLEM and eigenvalue multiset: the stratified network is a path
/// on `N` nodes with eigenvalues `cos(kπ/N)`, plus `z` decoupled zeros.
pub fn closed_form_slem(kind: ClosedFormNetwork) -> Result<ClosedFormSpectrum> {
    let (path_nodes, zeros) = match kind {
        ClosedFormNetwork::Barbell { m1, m2, n } => {
            if m1 < 2 || m2 < 2 || n < 1 {
                return Err(FdcError::InvalidSpec(format!("{kind:?}")));
            }
            (n + 3, m1 + m2 - 4)
        }
        ClosedFormNetwork::SemiComplete { m, n1, n2 } => {
            if m < 3 || n1 < 1 || n2 < 1 {
                return Err(FdcError::InvalidSpec(format!("{kind:?}")));
            }
            (n1 + n2 + 3, m - 3)
        }
    };
    let theta = std::f64::consts::PI / path_nodes as f64;
    let mut eigenvalues: Vec<f64> = (0..path_nodes).map(|k| (k as f64 * theta).cos()).collect();
    eigenvalues.extend(std::iter::repeat_n(0.0, zeros));
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(ClosedFormSpectrum {
        slem: theta.cos(),
        eigenvalues,
        zero_multiplicity: zeros,
    })
}

/// Largest elementwise gap between two multisets after sorting both descending.
pub fn multiset_deviation(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(FdcError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| y.total_cmp(x));
    b.sort_by(|x, y| y.total_cmp(x));
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

//! Optimal edge weights for fastest distributed consensus on the branches of
//! arbitrary sensor networks.
//!
//! * [`topology`] builds the five branch families and composite networks.
//! * [`weighting`] assigns closed-form and heuristic weights.
//! * [`spectral`] computes spectra, SLEM and the stratified block form.
//! * [`optimizer`] minimizes the SLEM numerically and certifies candidates.
//! * [`sim`] runs the consensus iteration and Monte-Carlo error curves.
//! * [`experiments`] drives the published comparisons.

pub mod error;
pub mod experiments;
pub mod optimizer;
pub mod sim;
pub mod spectral;
pub mod topology;
pub mod weighting;

pub use error::{FdcError, Result};
pub use optimizer::{certify_optimality, minimize_slem, CertificationReport, OptConfig, OptResult};
pub use sim::{monte_carlo, run_consensus, InitDistribution, SimConfig, SimResult, WeightingMethod};
pub use spectral::{eig_sym, slem, stratify, verify_block_structure, SlemReport, Spectrum, StratifiedForm};
pub use topology::{build_branch, Branch, BranchKind, BranchSpec, Edge, Network};
pub use weighting::{closed_form_weights, heuristic_weights, EdgeWeights, HeuristicParams, OrbitWeights, WeightMatrix};

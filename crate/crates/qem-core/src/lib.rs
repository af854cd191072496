//! Exact density-matrix engine for subspace-expansion quantum error
//! mitigation, with distillation and zero-noise-extrapolation baselines
//! and a Gaussian shot-noise model.
//!
//! The crate is organized bottom-up:
//!
//! * [`linalg`]: dense complex matrices, Hermitian and generalized
//!   eigensolvers, PSD square roots.
//! * [`pauli`]: Pauli strings, weighted Pauli sums, the transverse-field
//!   Ising Hamiltonian.
//! * [`state`]: density matrices, gate and depolarizing channels,
//!   fidelity and trace-distance metrics.
//! * [`ansatz`]: the hardware-efficient variational circuit and noisy
//!   state preparation.
//! * [`variational`]: VQE / subspace-search VQE optimization of circuit
//!   parameters.
//! * [`gse`]: subspace specification, small-matrix assembly, generalized
//!   eigenproblem solvers, and realization of the mitigated state.
//! * [`baselines`]: virtual distillation and Richardson extrapolation.
//! * [`shot_noise`]: single-shot variance formulas, sampling-cost bounds,
//!   matrix perturbation, and Monte-Carlo shot-noise trials.

/// Library version, recorded in experiment manifests for traceability.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod ansatz;
pub mod baselines;
pub mod gse;
pub mod linalg;
pub mod pauli;
pub mod shot_noise;
pub mod state;
pub mod variational;

pub use ansatz::{AnsatzCircuit, EntanglerLayout};
pub use baselines::{richardson_coefficients, vd_energy, VdResult};
pub use gse::{
    mitigate_ground, MitigationResult, SelectionMode, Subspace, SubspaceMatrices, SubspaceSpec,
};
pub use linalg::ComplexMatrix;
pub use pauli::{build_tfi_hamiltonian, PauliHamiltonian, PauliString};
pub use shot_noise::{EnergyDistribution, ShotBudget};
pub use state::DensityMatrix;
pub use variational::{optimize_ssvqe, optimize_vqe, OptimizedParameters};

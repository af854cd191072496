//! Density matrices, local channels, and state-comparison metrics.
//!
//! States are stored as full dense matrices; gates and single-qubit noise
//! are applied through index kernels that touch `O(4^n)` entries rather
//! than through dense `2^n x 2^n` conjugations.

use crate::linalg::{self, ComplexMatrix, LinalgError};
use crate::pauli::{PauliHamiltonian, PauliString};
use num_complex::Complex64;

/// Tolerance used when validating trace and positivity of states.
pub const STATE_TOL: f64 = 1e-9;

/// Mixed quantum state on `n_qubits` wires.
///
/// `physical` records whether the matrix passed Hermiticity, unit-trace,
/// and positivity checks on construction. Extrapolated pseudo-states are
/// deliberately constructed with `physical = false` when they fail the
/// positivity check.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    n_qubits: usize,
    matrix: ComplexMatrix,
    physical: bool,
}

impl DensityMatrix {
    /// Computational basis state `|index><index|`.
    pub fn pure_basis(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        assert!(index < dim, "basis index {index} out of range for {n_qubits} qubits");
        let mut m = ComplexMatrix::zeros(dim, dim);
        m.set(index, index, Complex64::new(1.0, 0.0));
        Self { n_qubits, matrix: m, physical: true }
    }

    /// Pure state from an amplitude vector (normalized internally).
    pub fn from_pure(n_qubits: usize, amplitudes: &[Complex64]) -> Self {
        let dim = 1usize << n_qubits;
        assert_eq!(amplitudes.len(), dim, "amplitude vector length mismatch");
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 0.0, "cannot normalize the zero vector");
        let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
            amplitudes[i] * amplitudes[j].conj() / (norm * norm)
        });
        Self { n_qubits, matrix: m, physical: true }
    }

    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let m = ComplexMatrix::identity(dim).scale(Complex64::new(1.0 / dim as f64, 0.0));
        Self { n_qubits, matrix: m, physical: true }
    }

    /// Wraps a matrix as a state, checking Hermiticity and unit trace and
    /// probing positivity. Positivity failures beyond tolerance mark the
    /// state unphysical instead of erroring, so extrapolated pseudo-states
    /// can flow through the same type.
    pub fn from_matrix(n_qubits: usize, matrix: ComplexMatrix) -> Result<Self, LinalgError> {
        let dim = 1usize << n_qubits;
        if matrix.rows() != dim || matrix.cols() != dim {
            return Err(LinalgError::DimensionMismatch(format!(
                "state for {n_qubits} qubits needs a {dim}x{dim} matrix, got {}x{}",
                matrix.rows(),
                matrix.cols()
            )));
        }
        let dev = matrix.hermiticity_deviation();
        if dev > 1e-8 {
            return Err(LinalgError::NotHermitian(dev));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > 1e-6 || tr.im.abs() > 1e-8 {
            return Err(LinalgError::InvalidInput(format!("state trace {tr} is not 1")));
        }
        let herm = matrix.hermitize();
        let (evals, _) = linalg::hermitian_eig(&herm)?;
        let physical = evals[0] >= -STATE_TOL;
        Ok(Self { n_qubits, matrix: herm, physical })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1usize << self.n_qubits
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn is_physical(&self) -> bool {
        self.physical
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// `Tr[rho^2]`.
    pub fn purity(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += (self.matrix.get(i, j) * self.matrix.get(j, i)).re;
            }
        }
        acc
    }

    /// `rho^k` as a dense matrix; `k = 0` is the identity.
    pub fn power(&self, k: usize) -> ComplexMatrix {
        self.matrix.pow(k)
    }

    pub fn eigen_decomposition(&self) -> (Vec<f64>, ComplexMatrix) {
        linalg::hermitian_eig(&self.matrix).expect("density matrix is Hermitian by construction")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen_decomposition().0[0]
    }

    pub fn expectation_pauli(&self, p: &PauliString) -> f64 {
        p.trace_with(&self.matrix).re
    }

    pub fn expectation_hamiltonian(&self, h: &PauliHamiltonian) -> f64 {
        h.terms().iter().map(|(c, s)| c * self.expectation_pauli(s)).sum()
    }

    pub fn expectation_matrix(&self, o: &ComplexMatrix) -> Complex64 {
        self.matrix.matmul(o).trace()
    }

    /// `<Z_a Z_b>` two-point correlator.
    pub fn zz_correlator(&self, a: usize, b: usize) -> f64 {
        use crate::pauli::Pauli;
        self.expectation_pauli(&PauliString::two(self.n_qubits, a, Pauli::Z, b, Pauli::Z))
    }

    /// In-place `rho -> U rho U^dag` for a single-qubit unitary `u` on
    /// `qubit` (row-major 2x2).
    pub fn apply_single_qubit(&mut self, qubit: usize, u: &[[Complex64; 2]; 2]) {
        assert!(qubit < self.n_qubits, "qubit {qubit} out of range");
        let dim = self.dim();
        let mask = 1usize << (self.n_qubits - 1 - qubit);
        // left multiply by U: mix row pairs
        for i in 0..dim {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            for c in 0..dim {
                let a = self.matrix.get(i, c);
                let b = self.matrix.get(j, c);
                self.matrix.set(i, c, u[0][0] * a + u[0][1] * b);
                self.matrix.set(j, c, u[1][0] * a + u[1][1] * b);
            }
        }
        // right multiply by U^dag: mix column pairs
        for c in 0..dim {
            if c & mask != 0 {
                continue;
            }
            let d = c | mask;
            for r in 0..dim {
                let a = self.matrix.get(r, c);
                let b = self.matrix.get(r, d);
                self.matrix.set(r, c, a * u[0][0].conj() + b * u[0][1].conj());
                self.matrix.set(r, d, a * u[1][0].conj() + b * u[1][1].conj());
            }
        }
    }

    /// In-place controlled-Z between two qubits. CZ is diagonal with a
    /// sign on `|11>`, so conjugation only flips element signs.
    pub fn apply_cz(&mut self, qa: usize, qb: usize) {
        assert!(qa != qb, "controlled-Z needs two distinct qubits");
        let ma = 1usize << (self.n_qubits - 1 - qa);
        let mb = 1usize << (self.n_qubits - 1 - qb);
        let dim = self.dim();
        let sign = |i: usize| -> f64 {
            if i & ma != 0 && i & mb != 0 {
                -1.0
            } else {
                1.0
            }
        };
        for i in 0..dim {
            let si = sign(i);
            for j in 0..dim {
                let s = si * sign(j);
                if s < 0.0 {
                    let v = self.matrix.get(i, j);
                    self.matrix.set(i, j, -v);
                }
            }
        }
    }

    /// In-place single-qubit depolarizing channel
    /// `rho -> (1 - p) rho + (p/3)(X rho X + Y rho Y + Z rho Z)`.
    pub fn apply_depolarizing(&mut self, qubit: usize, p: f64) {
        assert!((0.0..=0.75).contains(&p), "depolarizing strength {p} outside [0, 3/4]");
        if p == 0.0 {
            return;
        }
        let dim = self.dim();
        let mask = 1usize << (self.n_qubits - 1 - qubit);
        // Closed form per element class: bit-diagonal elements mix with the
        // flipped pair, bit-off-diagonal elements shrink by (1 - 4p/3).
        let keep = Complex64::new(1.0 - 2.0 * p / 3.0, 0.0);
        let swap = Complex64::new(2.0 * p / 3.0, 0.0);
        let shrink = Complex64::new(1.0 - 4.0 * p / 3.0, 0.0);
        for i in 0..dim {
            for j in 0..dim {
                let di = (i & mask != 0) as u8;
                let dj = (j & mask != 0) as u8;
                if di != dj {
                    let v = self.matrix.get(i, j);
                    self.matrix.set(i, j, v * shrink);
                } else if di == 0 {
                    // handle each (i, j) pair once from the bit-0 side
                    let v00 = self.matrix.get(i, j);
                    let v11 = self.matrix.get(i | mask, j | mask);
                    self.matrix.set(i, j, keep * v00 + swap * v11);
                    self.matrix.set(i | mask, j | mask, keep * v11 + swap * v00);
                }
            }
        }
    }
}

/// Uhlmann fidelity `F(a, b) = Tr sqrt(sqrt(a) b sqrt(a))`.
///
/// Negative eigenvalues inside the outer root (possible when `b` is an
/// unphysical extrapolated matrix) are clamped to zero, so `F` can exceed 1
/// exactly when the unphysical state over-weights `a`'s support.
pub fn fidelity(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let sa = linalg::psd_sqrt(a.matrix()).expect("state is Hermitian");
    let inner = sa.matmul(b.matrix()).matmul(&sa).hermitize();
    let (evals, _) = linalg::hermitian_eig(&inner).expect("hermitized product");
    evals.iter().map(|&e| e.max(0.0).sqrt()).sum()
}

/// Trace distance `T(a, b) = (1/2) ||a - b||_1`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let diff = a.matrix().sub(b.matrix()).hermitize();
    let (evals, _) = linalg::hermitian_eig(&diff).expect("difference of Hermitian matrices");
    0.5 * evals.iter().map(|e| e.abs()).sum::<f64>()
}

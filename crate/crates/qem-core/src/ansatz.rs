//! Hardware-efficient variational circuit with per-gate depolarizing noise.
//!
//! Layout: `depth` layers, each a wall of `Ry` rotations (one per qubit)
//! followed by controlled-Z entanglers on neighboring wires, closed by one
//! final `Ry` wall. Parameter count is `n * (depth + 1)`.
//!
//! Two entangler layouts are available. `Ladder` applies every neighboring
//! pair in each layer; since all the entanglers are diagonal, every layer
//! then repeats one fixed conjugation, and the gate set generates a proper
//! subalgebra of the real rotations, capping how well the circuit can
//! approximate a target state no matter the depth. `Brickwork` alternates
//! even and odd pairs between layers, which restores full real-state
//! controllability at sufficient depth.
//!
//! The noise model follows the circuit: after every gate, each qubit the
//! gate touched passes through a single-qubit depolarizing channel of
//! strength `p_dep`. The expected total error count of one preparation is
//! therefore `p_dep * noise_site_count`, and a target budget `n_tot`
//! (average number of faults per circuit run) maps to
//! `p_dep = n_tot / noise_site_count`.

use crate::linalg::ComplexMatrix;
use crate::state::DensityMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    /// Y-rotation on `qubit` driven by parameter slot `param`.
    Ry { qubit: usize, param: usize },
    /// Controlled-Z between neighboring wires.
    Cz { a: usize, b: usize },
}

impl Gate {
    fn touched(&self) -> (usize, Option<usize>) {
        match *self {
            Gate::Ry { qubit, .. } => (qubit, None),
            Gate::Cz { a, b } => (a, Some(b)),
        }
    }
}

/// Which neighboring pairs receive an entangler in each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntanglerLayout {
    /// Every pair (0,1), (1,2), ..., (n-2,n-1) in every layer.
    Ladder,
    /// Even pairs in even layers, odd pairs in odd layers.
    Brickwork,
}

/// Parameterized circuit together with its noise strength.
#[derive(Debug, Clone)]
pub struct AnsatzCircuit {
    n_qubits: usize,
    depth: usize,
    layout: EntanglerLayout,
    gates: Vec<Gate>,
    parameters: Vec<f64>,
    p_dep: f64,
}

impl AnsatzCircuit {
    /// Builds the hardware-efficient template with all parameters at zero
    /// and no noise, using the default `Ladder` entanglers.
    pub fn hardware_efficient(n_qubits: usize, depth: usize) -> Self {
        Self::with_layout(n_qubits, depth, EntanglerLayout::Ladder)
    }

    pub fn with_layout(n_qubits: usize, depth: usize, layout: EntanglerLayout) -> Self {
        assert!(n_qubits >= 1, "circuit needs at least one qubit");
        let mut gates = Vec::new();
        let mut param = 0usize;
        for layer in 0..depth {
            for q in 0..n_qubits {
                gates.push(Gate::Ry { qubit: q, param });
                param += 1;
            }
            let first = match layout {
                EntanglerLayout::Ladder => 0,
                EntanglerLayout::Brickwork => layer % 2,
            };
            let step = match layout {
                EntanglerLayout::Ladder => 1,
                EntanglerLayout::Brickwork => 2,
            };
            let mut q = first;
            while q + 1 < n_qubits {
                gates.push(Gate::Cz { a: q, b: q + 1 });
                q += step;
            }
        }
        for q in 0..n_qubits {
            gates.push(Gate::Ry { qubit: q, param });
            param += 1;
        }
        let parameters = vec![0.0; param];
        Self { n_qubits, depth, layout, gates, parameters, p_dep: 0.0 }
    }

    pub fn layout(&self) -> EntanglerLayout {
        self.layout
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters.len()
    }

    pub fn parameters(&self) -> &[f64] {
        &self.parameters
    }

    pub fn p_dep(&self) -> f64 {
        self.p_dep
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Number of single-qubit depolarizing insertions in one preparation:
    /// one per qubit touched per gate.
    pub fn noise_site_count(&self) -> usize {
        self.gates
            .iter()
            .map(|g| match g {
                Gate::Ry { .. } => 1,
                Gate::Cz { .. } => 2,
            })
            .sum()
    }

    pub fn with_parameters(mut self, parameters: &[f64]) -> Self {
        assert_eq!(parameters.len(), self.parameters.len(), "parameter count mismatch");
        self.parameters.copy_from_slice(parameters);
        self
    }

    pub fn set_parameters(&mut self, parameters: &[f64]) {
        assert_eq!(parameters.len(), self.parameters.len(), "parameter count mismatch");
        self.parameters.copy_from_slice(parameters);
    }

    pub fn with_p_dep(mut self, p_dep: f64) -> Self {
        assert!((0.0..=0.75).contains(&p_dep), "depolarizing strength {p_dep} outside [0, 3/4]");
        self.p_dep = p_dep;
        self
    }

    /// Sets `p_dep` so that the expected fault count per preparation equals
    /// `n_tot`.
    pub fn with_noise_budget(self, n_tot: f64) -> Self {
        assert!(n_tot >= 0.0, "noise budget must be nonnegative");
        let sites = self.noise_site_count() as f64;
        self.with_p_dep(n_tot / sites)
    }

    /// Expected fault count per preparation under the current `p_dep`.
    pub fn noise_budget(&self) -> f64 {
        self.p_dep * self.noise_site_count() as f64
    }

    /// Runs the circuit on `|initial><initial|`, interleaving depolarizing
    /// noise after each gate on each touched qubit.
    pub fn prepare(&self, initial: usize) -> DensityMatrix {
        let mut rho = DensityMatrix::pure_basis(self.n_qubits, initial);
        for gate in &self.gates {
            match *gate {
                Gate::Ry { qubit, param } => {
                    rho.apply_single_qubit(qubit, &ry_matrix(self.parameters[param]));
                }
                Gate::Cz { a, b } => rho.apply_cz(a, b),
            }
            if self.p_dep > 0.0 {
                let (first, second) = gate.touched();
                rho.apply_depolarizing(first, self.p_dep);
                if let Some(q) = second {
                    rho.apply_depolarizing(q, self.p_dep);
                }
            }
        }
        rho
    }

    /// Dense circuit unitary (noise ignored); test and oracle helper.
    pub fn unitary(&self) -> ComplexMatrix {
        let dim = 1usize << self.n_qubits;
        let mut u = ComplexMatrix::identity(dim);
        for gate in &self.gates {
            let g = match *gate {
                Gate::Ry { qubit, param } => {
                    let m = ry_matrix(self.parameters[param]);
                    let local =
                        ComplexMatrix::from_row_major(2, 2, vec![m[0][0], m[0][1], m[1][0], m[1][1]])
                            .unwrap();
                    let mut full = ComplexMatrix::identity(1);
                    for w in 0..self.n_qubits {
                        let factor =
                            if w == qubit { local.clone() } else { ComplexMatrix::identity(2) };
                        full = full.kron(&factor);
                    }
                    full
                }
                Gate::Cz { a, b } => {
                    let ma = 1usize << (self.n_qubits - 1 - a);
                    let mb = 1usize << (self.n_qubits - 1 - b);
                    let mut full = ComplexMatrix::zeros(dim, dim);
                    for i in 0..dim {
                        let s = if i & ma != 0 && i & mb != 0 { -1.0 } else { 1.0 };
                        full.set(i, i, Complex64::new(s, 0.0));
                    }
                    full
                }
            };
            u = g.matmul(&u);
        }
        u
    }
}

/// `Ry(theta) = exp(-i theta Y / 2)`, real-valued.
pub fn ry_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let (s, c) = (theta / 2.0).sin_cos();
    [
        [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
        [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn template_counts() {
        let c = AnsatzCircuit::hardware_efficient(4, 3);
        assert_eq!(c.parameter_count(), 4 * 4, "n (d + 1) rotation parameters");
        assert_eq!(c.gate_count(), 4 * 4 + 3 * 3, "rotations plus entanglers");
        assert_eq!(c.noise_site_count(), 4 * 4 + 2 * 3 * 3, "CZ touches two qubits");
    }

    #[test]
    fn brickwork_alternates_entangler_pairs() {
        let c = AnsatzCircuit::with_layout(4, 3, EntanglerLayout::Brickwork);
        assert_eq!(c.layout(), EntanglerLayout::Brickwork);
        assert_eq!(c.parameter_count(), 4 * 4, "layouts share the rotation template");
        let pairs: Vec<(usize, usize)> = c
            .gates
            .iter()
            .filter_map(|g| match g {
                Gate::Cz { a, b } => Some((*a, *b)),
                _ => None,
            })
            .collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (1, 2), (0, 1), (2, 3)]);
    }

    #[test]
    fn zero_parameters_fix_basis_states() {
        let c = AnsatzCircuit::hardware_efficient(3, 2);
        for initial in [0usize, 5] {
            let rho = c.prepare(initial);
            let expect = DensityMatrix::pure_basis(3, initial);
            assert!(
                rho.matrix().sub(expect.matrix()).max_abs() < 1e-14,
                "identity circuit moved |{initial}>"
            );
        }
    }

    #[test]
    fn noiseless_prepare_matches_dense_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut c = AnsatzCircuit::hardware_efficient(3, 2);
        let params: Vec<f64> =
            (0..c.parameter_count()).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        c.set_parameters(&params);
        let rho = c.prepare(1);
        let u = c.unitary();
        let psi0 = DensityMatrix::pure_basis(3, 1);
        let expected = u.matmul(psi0.matrix()).matmul(&u.adjoint());
        assert!(rho.matrix().sub(&expected).max_abs() < 1e-12);
        assert!((rho.purity() - 1.0).abs() < 1e-12, "noiseless preparation is pure");
    }

    #[test]
    fn noise_budget_sets_p_dep() {
        let c = AnsatzCircuit::hardware_efficient(4, 3).with_noise_budget(1.5);
        let sites = (4 * 4 + 2 * 3 * 3) as f64;
        assert!((c.p_dep() - 1.5 / sites).abs() < 1e-15);
        assert!((c.noise_budget() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn noisy_prepare_is_physical_and_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut c = AnsatzCircuit::hardware_efficient(3, 2).with_noise_budget(1.0);
        let params: Vec<f64> =
            (0..c.parameter_count()).map(|_| rng.gen::<f64>() * 4.0 - 2.0).collect();
        c.set_parameters(&params);
        let rho = c.prepare(0);
        assert!((rho.trace().re - 1.0).abs() < 1e-10);
        assert!(rho.min_eigenvalue() > -1e-12, "noisy state stays PSD");
        assert!(rho.purity() < 0.999, "noise must mix the state, purity {}", rho.purity());
    }

    #[test]
    fn depth_zero_is_a_single_rotation_wall() {
        let c = AnsatzCircuit::hardware_efficient(2, 0);
        assert_eq!(c.parameter_count(), 2);
        assert_eq!(c.gate_count(), 2);
    }
}

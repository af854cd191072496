//! Pauli strings, weighted Pauli sums, and the transverse-field Ising
//! Hamiltonian.
//!
//! A Pauli string acts as a signed permutation on computational basis
//! states, which keeps products, dense materialization, and traces against
//! arbitrary operators cheap: `Tr[M P]` costs `O(2^n)` instead of a dense
//! matrix product.
//!
//! Bit convention: qubit 0 is the leftmost tensor factor, i.e. the most
//! significant bit of a basis index.

use crate::linalg::ComplexMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Single-qubit Pauli product `a * b = phase * letter`.
fn mul_single(a: Pauli, b: Pauli) -> (Complex64, Pauli) {
    use Pauli::*;
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match (a, b) {
        (I, p) | (p, I) => (one, p),
        (X, X) | (Y, Y) | (Z, Z) => (one, I),
        (X, Y) => (i, Z),
        (Y, X) => (-i, Z),
        (Y, Z) => (i, X),
        (Z, Y) => (-i, X),
        (Z, X) => (i, Y),
        (X, Z) => (-i, Y),
    }
}

/// Tensor product of single-qubit Paulis over `n_qubits` wires.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PauliString {
    letters: Vec<Pauli>,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        Self { letters: vec![Pauli::I; n_qubits] }
    }

    pub fn new(letters: Vec<Pauli>) -> Self {
        Self { letters }
    }

    /// One non-identity letter on `qubit`, identity elsewhere.
    pub fn single(n_qubits: usize, qubit: usize, p: Pauli) -> Self {
        assert!(qubit < n_qubits, "qubit {qubit} out of range for {n_qubits} qubits");
        let mut letters = vec![Pauli::I; n_qubits];
        letters[qubit] = p;
        Self { letters }
    }

    /// Two non-identity letters, e.g. a ZZ bond.
    pub fn two(n_qubits: usize, qa: usize, pa: Pauli, qb: usize, pb: Pauli) -> Self {
        assert!(qa != qb, "two-qubit string needs distinct qubits");
        let mut s = Self::single(n_qubits, qa, pa);
        s.letters[qb] = pb;
        s
    }

    pub fn n_qubits(&self) -> usize {
        self.letters.len()
    }

    pub fn letters(&self) -> &[Pauli] {
        &self.letters
    }

    pub fn is_identity(&self) -> bool {
        self.letters.iter().all(|&p| p == Pauli::I)
    }

    /// Product with phase: `self * other = phase * string`.
    pub fn mul(&self, other: &Self) -> (Complex64, Self) {
        assert_eq!(self.n_qubits(), other.n_qubits(), "Pauli product width mismatch");
        let mut phase = Complex64::new(1.0, 0.0);
        let mut letters = Vec::with_capacity(self.letters.len());
        for (&a, &b) in self.letters.iter().zip(&other.letters) {
            let (ph, p) = mul_single(a, b);
            phase *= ph;
            letters.push(p);
        }
        (phase, Self { letters })
    }

    /// Action on a basis state: `P |b> = phase |b'>`.
    #[inline]
    pub fn apply_to_basis(&self, b: usize) -> (Complex64, usize) {
        let n = self.letters.len();
        let mut out = b;
        let mut phase = Complex64::new(1.0, 0.0);
        for (q, &p) in self.letters.iter().enumerate() {
            let pos = n - 1 - q;
            let bit = (b >> pos) & 1;
            match p {
                Pauli::I => {}
                Pauli::X => out ^= 1 << pos,
                Pauli::Y => {
                    out ^= 1 << pos;
                    phase *= if bit == 0 {
                        Complex64::new(0.0, 1.0)
                    } else {
                        Complex64::new(0.0, -1.0)
                    };
                }
                Pauli::Z => {
                    if bit == 1 {
                        phase = -phase;
                    }
                }
            }
        }
        (phase, out)
    }

    /// `Tr[M P]` computed through the signed-permutation structure.
    pub fn trace_with(&self, m: &ComplexMatrix) -> Complex64 {
        let dim = 1usize << self.n_qubits();
        assert_eq!(m.rows(), dim, "operator dimension does not match Pauli width");
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..dim {
            let (phase, row) = self.apply_to_basis(b);
            acc += m.get(b, row) * phase;
        }
        acc
    }

    pub fn dense(&self) -> ComplexMatrix {
        let dim = 1usize << self.n_qubits();
        let mut m = ComplexMatrix::zeros(dim, dim);
        for b in 0..dim {
            let (phase, row) = self.apply_to_basis(b);
            m.set(row, b, phase);
        }
        m
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &p in &self.letters {
            write!(f, "{}", p.symbol())?;
        }
        Ok(())
    }
}

/// Hermitian operator given as a real-weighted sum of Pauli strings.
#[derive(Debug, Clone)]
pub struct PauliHamiltonian {
    n_qubits: usize,
    terms: Vec<(f64, PauliString)>,
}

impl PauliHamiltonian {
    pub fn new(n_qubits: usize, terms: Vec<(f64, PauliString)>) -> Self {
        for (_, s) in &terms {
            assert_eq!(s.n_qubits(), n_qubits, "term width mismatch");
        }
        Self { n_qubits, terms }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(f64, PauliString)] {
        &self.terms
    }

    /// One-norm of the coefficients; the sampling-overhead factor.
    pub fn coefficient_one_norm(&self) -> f64 {
        self.terms.iter().map(|(c, _)| c.abs()).sum()
    }

    pub fn dense(&self) -> ComplexMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (c, s) in &self.terms {
            for b in 0..dim {
                let (phase, row) = s.apply_to_basis(b);
                m.add_to(row, b, phase * Complex64::new(*c, 0.0));
            }
        }
        m
    }

    /// Ascending exact spectrum via dense diagonalization.
    pub fn exact_eigenvalues(&self) -> Vec<f64> {
        let (evals, _) = crate::linalg::hermitian_eig(&self.dense())
            .expect("Pauli sum with real coefficients is Hermitian");
        evals
    }

    pub fn exact_ground_energy(&self) -> f64 {
        self.exact_eigenvalues()[0]
    }
}

/// Transverse-field Ising chain with open boundary:
/// `H = -sum_r Z_r Z_{r+1} + h * sum_r X_r`.
pub fn build_tfi_hamiltonian(n_qubits: usize, h: f64) -> PauliHamiltonian {
    assert!(n_qubits >= 1, "chain needs at least one site");
    let mut terms = Vec::new();
    for r in 0..n_qubits.saturating_sub(1) {
        terms.push((-1.0, PauliString::two(n_qubits, r, Pauli::Z, r + 1, Pauli::Z)));
    }
    for r in 0..n_qubits {
        terms.push((h, PauliString::single(n_qubits, r, Pauli::X)));
    }
    PauliHamiltonian::new(n_qubits, terms)
}

/// Weighted Pauli expansion with complex coefficients, used for symbolic
/// products such as powers of a Hamiltonian. Terms are kept consolidated
/// and sorted for deterministic iteration.
#[derive(Debug, Clone)]
pub struct PauliExpansion {
    n_qubits: usize,
    terms: Vec<(Complex64, PauliString)>,
}

impl PauliExpansion {
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: vec![(Complex64::new(1.0, 0.0), PauliString::identity(n_qubits))],
        }
    }

    pub fn from_hamiltonian(h: &PauliHamiltonian) -> Self {
        let mut map: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (c, s) in h.terms() {
            *map.entry(s.clone()).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(*c, 0.0);
        }
        Self::from_map(h.n_qubits(), map)
    }

    fn from_map(n_qubits: usize, map: BTreeMap<PauliString, Complex64>) -> Self {
        let terms = map
            .into_iter()
            .filter(|(_, c)| c.norm() > 1e-14)
            .map(|(s, c)| (c, s))
            .collect();
        Self { n_qubits, terms }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn terms(&self) -> &[(Complex64, PauliString)] {
        &self.terms
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n_qubits, other.n_qubits, "expansion width mismatch");
        let mut map: BTreeMap<PauliString, Complex64> = BTreeMap::new();
        for (ca, sa) in &self.terms {
            for (cb, sb) in &other.terms {
                let (phase, s) = sa.mul(sb);
                *map.entry(s).or_insert(Complex64::new(0.0, 0.0)) += ca * cb * phase;
            }
        }
        Self::from_map(self.n_qubits, map)
    }

    /// `H^k` as a consolidated Pauli expansion; `k = 0` is the identity.
    pub fn hamiltonian_power(h: &PauliHamiltonian, k: usize) -> Self {
        let base = Self::from_hamiltonian(h);
        let mut out = Self::identity(h.n_qubits());
        for _ in 0..k {
            out = out.mul(&base);
        }
        out
    }

    pub fn dense(&self) -> ComplexMatrix {
        let dim = 1usize << self.n_qubits;
        let mut m = ComplexMatrix::zeros(dim, dim);
        for (c, s) in &self.terms {
            for b in 0..dim {
                let (phase, row) = s.apply_to_basis(b);
                m.add_to(row, b, phase * c);
            }
        }
        m
    }
}

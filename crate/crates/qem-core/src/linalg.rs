//! Dense complex linear algebra for small operator matrices.
//!
//! Everything here operates on [`ComplexMatrix`], a row-major dense
//! matrix of `Complex64`. Sizes stay modest (subspace matrices are a few
//! by a few, operator matrices at most `2^n` by `2^n` for `n <= 10`
//! qubits), so clarity wins over blocked kernels.

use num_complex::Complex64;
use thiserror::Error;

/// Tolerance for treating an operator as Hermitian.
pub const HERMITICITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not Hermitian within tolerance (max deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("metric has no eigenvalue above the cutoff; subspace is empty")]
    EmptySubspace,
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Dense complex matrix, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from a row-major slice; length must equal `rows * cols`.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DimensionMismatch(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] += v;
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "matrix add shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "matrix sub shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let data = self.data.iter().map(|a| a * c).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// Matrix product; inner dimensions must agree.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        // i-k-j loop order keeps the inner loop contiguous in both operands.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                let orow = &other.data[k * other.cols..(k + 1) * other.cols];
                let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, b) in out_row.iter_mut().zip(orow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn trace(&self) -> Complex64 {
        assert!(self.is_square(), "trace of non-square matrix");
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }

    /// `Tr[self * other]` without materializing the product.
    pub fn trace_product(&self, other: &Self) -> Complex64 {
        assert!(
            self.cols == other.rows && self.rows == other.cols,
            "trace of product needs compatible shapes, got {}x{} and {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.rows {
            for k in 0..self.cols {
                acc += self.get(i, k) * other.get(k, i);
            }
        }
        acc
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest elementwise deviation from the adjoint.
    pub fn hermiticity_deviation(&self) -> f64 {
        assert!(self.is_square(), "hermiticity of non-square matrix");
        let mut dev: f64 = 0.0;
        for i in 0..self.rows {
            for j in i..self.cols {
                dev = dev.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    pub fn is_hermitian_within(&self, tol: f64) -> bool {
        self.is_square() && self.hermiticity_deviation() <= tol
    }

    /// Hermitian part `(M + M^dag) / 2`.
    pub fn hermitize(&self) -> Self {
        self.add(&self.adjoint()).scale(Complex64::new(0.5, 0.0))
    }

    /// Kronecker product `self (x) other`.
    pub fn kron(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.rows * other.rows, self.cols * other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let a = self.get(i, j);
                if a.norm_sqr() == 0.0 {
                    continue;
                }
                for k in 0..other.rows {
                    for l in 0..other.cols {
                        out.set(i * other.rows + k, j * other.cols + l, a * other.get(k, l));
                    }
                }
            }
        }
        out
    }

    /// Integer matrix power by repeated multiplication; `pow(0)` is the identity.
    pub fn pow(&self, k: usize) -> Self {
        assert!(self.is_square(), "power of non-square matrix");
        let mut out = Self::identity(self.rows);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }
}

/// Result of a generalized eigenproblem `H a = E S a` restricted to the
/// numerically supported part of the metric `S`.
#[derive(Debug, Clone)]
pub struct GeneralizedEigenSolution {
    /// Ascending eigenvalues, one per kept direction.
    pub eigenvalues: Vec<f64>,
    /// Coefficient vectors as columns, normalized to `a^dag S a = 1`.
    pub eigenvectors: ComplexMatrix,
    /// Number of metric eigenvalues that survived the cutoff.
    pub kept_rank: usize,
    /// Relative cutoff that was applied to the metric spectrum.
    pub cutoff: f64,
}

fn to_nalgebra(m: &ComplexMatrix) -> nalgebra::DMatrix<Complex64> {
    nalgebra::DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

/// Eigendecomposition of a Hermitian matrix.
///
/// Returns eigenvalues in ascending order with orthonormal eigenvectors as
/// the columns of the returned matrix. The input must be Hermitian within
/// [`HERMITICITY_TOL`]; it is symmetrized before factorization so roundoff
/// asymmetry cannot leak into the result.
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix), LinalgError> {
    if !m.is_square() {
        return Err(LinalgError::DimensionMismatch(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let dev = m.hermiticity_deviation();
    let scale = m.max_abs().max(1.0);
    if dev > HERMITICITY_TOL * scale {
        return Err(LinalgError::NotHermitian(dev));
    }
    let sym = m.hermitize();
    let eig = to_nalgebra(&sym).symmetric_eigen();
    let n = m.rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = ComplexMatrix::from_fn(n, n, |i, j| eig.eigenvectors[(i, order[j])]);
    Ok((eigenvalues, eigenvectors))
}

/// Fixes the global phase of a coefficient vector: the entry of largest
/// modulus is made real and nonnegative. Purely cosmetic but makes results
/// reproducible down to the representation.
fn canonicalize_phase(column: &mut [Complex64]) {
    let mut best = 0usize;
    let mut best_norm = -1.0f64;
    for (k, z) in column.iter().enumerate() {
        let nz = z.norm();
        if nz > best_norm + 1e-15 {
            best_norm = nz;
            best = k;
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let phase = column[best] / column[best].norm();
    for z in column.iter_mut() {
        *z /= phase;
    }
}

/// Solves the generalized eigenproblem `H a = E S a` with a PSD Hermitian
/// metric `S` via canonical orthogonalization.
///
/// The metric is diagonalized, directions with eigenvalue at or below
/// `cutoff * max_eig` are dropped, the problem is mapped to an ordinary
/// Hermitian one on the kept subspace, and solutions are mapped back and
/// renormalized to `a^dag S a = 1`. Eigenvalues come out ascending; ties
/// are broken by the index of the dominant coefficient. Metric eigenvalues
/// below `-1e-10 * max_eig` indicate a non-PSD metric; this is logged and
/// the offending directions are dropped by the same filter.
pub fn solve_generalized_eig(
    h: &ComplexMatrix,
    s: &ComplexMatrix,
    cutoff: f64,
) -> Result<GeneralizedEigenSolution, LinalgError> {
    if !h.is_square() || !s.is_square() || h.rows() != s.rows() {
        return Err(LinalgError::DimensionMismatch(format!(
            "H is {}x{}, S is {}x{}",
            h.rows(),
            h.cols(),
            s.rows(),
            s.cols()
        )));
    }
    if !(cutoff > 0.0) {
        return Err(LinalgError::InvalidInput(format!("cutoff must be positive, got {cutoff}")));
    }
    let d = s.rows();
    let (s_eigs, s_vecs) = hermitian_eig(s)?;
    let max_eig = s_eigs.iter().cloned().fold(0.0f64, f64::max);
    if max_eig <= 0.0 {
        return Err(LinalgError::EmptySubspace);
    }
    if s_eigs[0] < -1e-10 * max_eig {
        log::warn!(
            "metric is not PSD (min eigenvalue {:.3e}, max {:.3e}); dropping negative directions",
            s_eigs[0],
            max_eig
        );
    }
    let threshold = cutoff * max_eig;
    let kept: Vec<usize> = (0..d).filter(|&k| s_eigs[k] > threshold).collect();
    let rank = kept.len();
    if rank == 0 {
        return Err(LinalgError::EmptySubspace);
    }

    // B = U_kept * diag(s^{-1/2}) maps the kept orthonormalized frame back
    // to original coordinates; the projected problem is B^dag H B.
    let b = ComplexMatrix::from_fn(d, rank, |i, j| {
        s_vecs.get(i, kept[j]) * Complex64::new(1.0 / s_eigs[kept[j]].sqrt(), 0.0)
    });
    let h_proj = b.adjoint().matmul(h).matmul(&b).hermitize();
    let (mut evals, w) = hermitian_eig(&h_proj)?;
    let mut alpha = b.matmul(&w);

    // Renormalize each column to a^dag S a = 1 and fix its phase.
    let mut columns: Vec<Vec<Complex64>> = Vec::with_capacity(rank);
    for j in 0..rank {
        let mut col: Vec<Complex64> = (0..d).map(|i| alpha.get(i, j)).collect();
        let sa: Complex64 = {
            let mut acc = Complex64::new(0.0, 0.0);
            for r in 0..d {
                for c in 0..d {
                    acc += col[r].conj() * s.get(r, c) * col[c];
                }
            }
            acc
        };
        let norm = sa.re.max(1e-300).sqrt();
        for z in col.iter_mut() {
            *z /= norm;
        }
        canonicalize_phase(&mut col);
        columns.push(col);
    }

    // Ascending eigenvalue order with a deterministic tie-break on the
    // index of the dominant coefficient.
    let mut order: Vec<usize> = (0..rank).collect();
    order.sort_by(|&a, &b| {
        evals[a]
            .total_cmp(&evals[b])
            .then_with(|| dominant_index(&columns[a]).cmp(&dominant_index(&columns[b])))
    });
    let evals_sorted: Vec<f64> = order.iter().map(|&k| evals[k]).collect();
    evals = evals_sorted;
    alpha = ComplexMatrix::from_fn(d, rank, |i, j| columns[order[j]][i]);

    Ok(GeneralizedEigenSolution { eigenvalues: evals, eigenvectors: alpha, kept_rank: rank, cutoff })
}

fn dominant_index(column: &[Complex64]) -> usize {
    let mut best = 0usize;
    let mut best_norm = -1.0f64;
    for (k, z) in column.iter().enumerate() {
        let nz = z.norm();
        if nz > best_norm + 1e-15 {
            best_norm = nz;
            best = k;
        }
    }
    best
}

/// PSD square root of a Hermitian matrix. Eigenvalues below zero (roundoff
/// or an unphysical input) are clamped to zero before the root.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix, LinalgError> {
    let (evals, vecs) = hermitian_eig(m)?;
    let n = m.rows();
    let mut out = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        let lam = evals[k].max(0.0).sqrt();
        if lam == 0.0 {
            continue;
        }
        for i in 0..n {
            let vik = vecs.get(i, k);
            if vik.norm_sqr() == 0.0 {
                continue;
            }
            for j in 0..n {
                out.add_to(i, j, vik * vecs.get(j, k).conj() * lam);
            }
        }
    }
    Ok(out)
}

//! Statistical model of finite measurement budgets.
//!
//! Each measured quantity (one matrix element restricted to one Pauli word)
//! carries a single-shot variance; estimating it with `n_s` shots adds
//! Gaussian noise of variance `var / n_s`. The module provides the
//! single-shot variance formulas for identical-copy products, state-pair
//! overlaps, and general operator/state chains, explicit tensor-space
//! oracles for validating them, Gaussian perturbation of assembled
//! subspace matrices, a first-order perturbation-theory predictor for the
//! resulting eigenvalue shifts, and the sampling loops that turn all of
//! this into empirical energy distributions.

use crate::baselines;
use crate::gse::{
    self, GseError, SelectionMode, Subspace, SubspaceMatrices, SubspaceSpec,
};
use crate::linalg::{
    hermitian_eig, solve_generalized_eig, ComplexMatrix, GeneralizedEigenSolution, LinalgError,
};
use crate::pauli::{PauliHamiltonian, PauliString};
use crate::state::DensityMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

/// Largest tensor-space dimension (2^total qubits) the explicit oracles
/// will materialize.
const ORACLE_DIM_LIMIT: usize = 1 << 12;

#[derive(Debug, Error)]
pub enum ShotNoiseError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("eigenvalue gap {gap:e} too small for nondegenerate perturbation theory")]
    DegenerateSpectrum { gap: f64 },
    #[error("invalid input: {0}")]
    Input(String),
}

/// Cached integer powers of one state, for repeated moment evaluation.
pub struct MomentCache {
    powers: Vec<ComplexMatrix>,
}

impl MomentCache {
    pub fn new(rho: &DensityMatrix, max_power: usize) -> Self {
        let dim = rho.dim();
        let mut powers = Vec::with_capacity(max_power + 1);
        powers.push(ComplexMatrix::identity(dim));
        for k in 1..=max_power {
            powers.push(powers[k - 1].matmul(rho.matrix()));
        }
        MomentCache { powers }
    }

    pub fn max_power(&self) -> usize {
        self.powers.len() - 1
    }

    /// `Tr[rho^m P]`
    pub fn moment(&self, m: usize, p: &PauliString) -> f64 {
        p.trace_with(&self.powers[m]).re
    }
}

/// Single-shot variance of estimating `Tr[rho^m O]` with `O` given as a
/// weighted Pauli sum, combined as `sum_k |c_k|^2 var_k`.
///
/// Per-word rules: zero copies means the value is a classically known
/// constant (variance 0); one copy is direct estimation with the standard
/// per-word variance `1 - Tr[rho P]^2` (the identity word is exactly
/// known); two or more copies follow the product-estimator formula
/// `Tr[rho P]^2 - Tr[rho^m P]^2`, identity word included. Negative
/// formula values are clamped to zero per word.
pub fn power_word_variance(
    cache: &MomentCache,
    copies: usize,
    terms: &[(Complex64, PauliString)],
) -> f64 {
    if copies == 0 {
        return 0.0;
    }
    let mut total = 0.0;
    for (c, p) in terms {
        let w = c.norm_sqr();
        if copies == 1 {
            if !p.is_identity() {
                let t = cache.moment(1, p);
                total += w * (1.0 - t * t).max(0.0);
            }
        } else {
            let t1 = cache.moment(1, p);
            let tm = cache.moment(copies, p);
            total += w * (t1 * t1 - tm * tm).max(0.0);
        }
    }
    total
}

/// Number of independently measured quantities behind one `Tr[rho^m O]`
/// element, under the same per-word rules as `power_word_variance`.
pub fn power_word_quantity_count(copies: usize, terms: &[(Complex64, PauliString)]) -> usize {
    match copies {
        0 => 0,
        1 => terms.iter().filter(|(_, p)| !p.is_identity()).count(),
        _ => terms.len(),
    }
}

/// Single-shot variance of estimating the chain trace
/// `Re Tr[G_1 rho_1 G_2 rho_2 ... G_M rho_M]`:
/// the second moment is `Re prod_m Tr[G_m G_{m+1} rho_m]` with the group
/// index cyclic, and the mean is subtracted squared. Returns the literal
/// formula value; callers clamp if they need nonnegativity.
pub fn chain_variance(states: &[&ComplexMatrix], groups: &[&ComplexMatrix]) -> f64 {
    let m = states.len();
    assert!(m >= 1, "chain needs at least one state");
    assert_eq!(groups.len(), m, "one group per state");
    let dim = states[0].rows();
    let mut word = ComplexMatrix::identity(dim);
    for k in 0..m {
        word = word.matmul(groups[k]).matmul(states[k]);
    }
    let mean = word.trace().re;
    let mut second = Complex64::new(1.0, 0.0);
    for k in 0..m {
        let pair = groups[k].matmul(groups[(k + 1) % m]);
        second *= pair.trace_product(states[k]);
    }
    second.re - mean * mean
}

/// Single-shot variances for the identical-copy product estimators of
/// `Tr[rho^m O]` (first element) and `Tr[rho^m]` (second element), with
/// the observable as a weighted Pauli sum. This is the literal
/// product-estimator formula at every order: at `m = 1` the numerator
/// variance degenerates to zero, which cannot model raw single-copy
/// estimation (the assembly model uses the standard per-word variance
/// there instead).
pub fn single_shot_variance_power(
    rho: &DensityMatrix,
    observable: &PauliHamiltonian,
    copies: usize,
) -> (f64, f64) {
    assert!(copies >= 1, "product estimator needs at least one copy");
    if copies == 1 {
        log::warn!(
            "single-copy product estimator has identically zero formula variance; \
             raw estimation is modeled separately"
        );
    }
    let cache = MomentCache::new(rho, copies);
    let mut var_numerator = 0.0;
    for (c, p) in observable.terms() {
        let t1 = cache.moment(1, p);
        let tm = cache.moment(copies, p);
        var_numerator += c * c * (t1 * t1 - tm * tm).max(0.0);
    }
    let tm = self::purity_moment(&cache, copies);
    let var_denominator = (1.0 - tm * tm).max(0.0);
    (var_numerator, var_denominator)
}

/// `Tr[rho^m]`
fn purity_moment(cache: &MomentCache, m: usize) -> f64 {
    cache.powers[m].trace().re
}

/// Single-shot variances for estimating `Tr[rho_i rho_j O]` (first) and
/// `Tr[rho_i rho_j]` (second) from one copy of each state. Per Pauli word
/// the first is `Tr[rho_i P] Tr[rho_j P] - Tr[rho_i rho_j P]^2`, combined
/// as `sum_k |c_k|^2 var_k` and clamped at zero per word; the second is
/// `1 - Tr[rho_i rho_j]^2`.
pub fn single_shot_variance_fault(
    rho_i: &DensityMatrix,
    rho_j: &DensityMatrix,
    observable: &PauliHamiltonian,
) -> (f64, f64) {
    assert_eq!(rho_i.n_qubits(), rho_j.n_qubits(), "state pair register sizes");
    let prod = rho_i.matrix().matmul(rho_j.matrix());
    let mut var_o = 0.0;
    for (c, p) in observable.terms() {
        let ti = rho_i.expectation_pauli(p);
        let tj = rho_j.expectation_pauli(p);
        let tij = p.trace_with(&prod).re;
        var_o += c * c * (ti * tj - tij * tij).max(0.0);
    }
    let overlap = prod.trace().re;
    let var_s = (1.0 - overlap * overlap).max(0.0);
    (var_o, var_s)
}

/// Single-shot variance of the chain estimator for
/// `Tr[O Q_1 rho_1 Q_2 rho_2 ... Q_M rho_M]`: the first group absorbs the
/// observable (`G_1 = O Q_1`), the rest are the bare `Q_m`. Returns the
/// literal product-of-traces expression minus the squared mean.
pub fn single_shot_variance_general(
    rhos: &[DensityMatrix],
    qs: &[PauliString],
    observable: &PauliString,
) -> f64 {
    assert_eq!(rhos.len(), qs.len(), "one operator per state");
    assert!(!rhos.is_empty(), "chain needs at least one state");
    let states: Vec<&ComplexMatrix> = rhos.iter().map(|r| r.matrix()).collect();
    let mut dense: Vec<ComplexMatrix> = qs.iter().map(|q| q.dense()).collect();
    dense[0] = observable.dense().matmul(&dense[0]);
    let groups: Vec<&ComplexMatrix> = dense.iter().collect();
    chain_variance(&states, &groups)
}

/// Permutation matrix cycling tensor copies: copy 1's slot receives copy
/// 2's vector and so on, with copy 1 the most significant factor. Its
/// defining property is `Tr[S (A_1 x ... x A_M)] = Tr[A_1 A_2 ... A_M]`.
pub fn cyclic_shift_matrix(dim_per_copy: usize, copies: usize) -> ComplexMatrix {
    assert!(copies >= 1, "cyclic shift needs at least one copy");
    let total: usize = dim_per_copy.pow(copies as u32);
    assert!(total <= ORACLE_DIM_LIMIT, "tensor space of dimension {total} too large");
    let lower = total / dim_per_copy;
    let mut s = ComplexMatrix::zeros(total, total);
    for col in 0..total {
        let leading = col / lower;
        let rest = col % lower;
        let row = rest * dim_per_copy + leading;
        s.set(row, col, Complex64::new(1.0, 0.0));
    }
    s
}

/// Deviation between the cyclic-permutation evaluation
/// `Tr[S (O rho_1 x rho_2 x ... x rho_M)]` and the directly multiplied
/// `Tr[rho_1 ... rho_M O]`. Materializes the full tensor space, so the
/// total qubit count `n * M` is capped at 12.
pub fn cyclic_shift_identity_check(rhos: &[DensityMatrix], observable: &ComplexMatrix) -> f64 {
    assert!(!rhos.is_empty(), "need at least one state");
    let n = rhos[0].n_qubits();
    assert!(rhos.iter().all(|r| r.n_qubits() == n), "states share one register size");
    assert!(n * rhos.len() <= 12, "tensor space of {} qubits too large", n * rhos.len());
    let dim = rhos[0].dim();
    let s = cyclic_shift_matrix(dim, rhos.len());

    let mut product = observable.clone();
    let mut tensored = observable.matmul(rhos[0].matrix());
    for rho in &rhos[..] {
        product = product.matmul(rho.matrix());
    }
    for rho in &rhos[1..] {
        tensored = tensored.kron(rho.matrix());
    }
    let lhs = s.trace_product(&tensored);
    // Tr[O rho_1 ... rho_M] = Tr[rho_1 ... rho_M O]
    let rhs = product.trace();
    (lhs - rhs).norm()
}

/// Explicit tensor-space moments of the chain estimator: builds
/// `W_1 = G_1 x ... x G_M` and its cycled partner `W_2 = G_2 x ... x G_1`
/// and returns `(mean, second_moment)` with
/// `mean = Re Tr[S W_1 (rho_1 x ...)]` and
/// `second = Re Tr[W_1 W_2 (rho_1 x ...)]`. Independent construction used
/// to validate `chain_variance`.
pub fn explicit_chain_moments(
    states: &[&ComplexMatrix],
    groups: &[&ComplexMatrix],
) -> (f64, f64) {
    let m = states.len();
    assert!(m >= 1 && groups.len() == m, "one group per state");
    let dim = states[0].rows();
    let total = dim.pow(m as u32);
    assert!(total <= ORACLE_DIM_LIMIT, "tensor space of dimension {total} too large");
    let kron_all = |mats: &[&ComplexMatrix]| {
        let mut out = mats[0].clone();
        for piece in &mats[1..] {
            out = out.kron(piece);
        }
        out
    };
    let w1 = kron_all(groups);
    let mut cycled: Vec<&ComplexMatrix> = groups[1..].to_vec();
    cycled.push(groups[0]);
    let w2 = kron_all(&cycled);
    let r = kron_all(states);
    let s = cyclic_shift_matrix(dim, m);
    let mean = s.matmul(&w1).trace_product(&r).re;
    let second = w1.matmul(&w2).trace_product(&r).re;
    (mean, second)
}

/// How a total measurement budget is spread over measured quantities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShotAllocation {
    UniformPerTerm,
}

/// Shots assigned to each measured quantity.
#[derive(Debug, Clone, Copy)]
pub struct ShotBudget {
    /// Shots per quantity; at least one.
    pub n_s: f64,
    pub allocation: ShotAllocation,
}

impl ShotBudget {
    pub fn per_quantity(n_s: f64) -> Self {
        assert!(n_s >= 1.0, "need at least one shot per quantity, got {n_s}");
        ShotBudget { n_s, allocation: ShotAllocation::UniformPerTerm }
    }

    /// Splits a total budget uniformly; a quantity never receives less
    /// than one shot.
    pub fn from_total(total: f64, quantity_count: usize) -> Self {
        assert!(quantity_count >= 1, "no measured quantities to allocate to");
        Self::per_quantity((total / quantity_count as f64).max(1.0))
    }

    pub fn total_shots(&self, quantity_count: usize) -> f64 {
        self.n_s * quantity_count as f64
    }
}

fn sample_normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    Normal::new(0.0, sd).expect("finite standard deviation").sample(rng)
}

/// Adds Gaussian estimation noise to the eigenproblem matrices: each
/// upper-triangle element of `H` and `S` receives noise of total variance
/// `var / n_s` (diagonal: real; off-diagonal: half the variance in each of
/// the real and imaginary parts), and the lower triangle mirrors the
/// conjugate so the output is exactly Hermitian. The stored second-moment
/// matrix is carried over unchanged and the variance operator is rebuilt
/// at the stored reference energy.
pub fn perturb_subspace_matrices(
    mats: &SubspaceMatrices,
    budget: &ShotBudget,
    rng: &mut ChaCha8Rng,
) -> SubspaceMatrices {
    let d = mats.dim;
    let mut h = mats.h.clone();
    let mut s = mats.s.clone();
    for i in 0..d {
        for j in i..d {
            if i == j {
                let dh = sample_normal(rng, (mats.var_h[i][i] / budget.n_s).sqrt());
                h.set(i, i, h.get(i, i) + Complex64::new(dh, 0.0));
                let ds = sample_normal(rng, (mats.var_s[i][i] / budget.n_s).sqrt());
                s.set(i, i, s.get(i, i) + Complex64::new(ds, 0.0));
            } else {
                let sd_h = (mats.var_h[i][j] / (2.0 * budget.n_s)).sqrt();
                let dh = Complex64::new(sample_normal(rng, sd_h), sample_normal(rng, sd_h));
                h.set(i, j, h.get(i, j) + dh);
                h.set(j, i, h.get(i, j).conj());
                let sd_s = (mats.var_s[i][j] / (2.0 * budget.n_s)).sqrt();
                let ds = Complex64::new(sample_normal(rng, sd_s), sample_normal(rng, sd_s));
                s.set(i, j, s.get(i, j) + ds);
                s.set(j, i, s.get(i, j).conj());
            }
        }
    }
    let v = mats
        .h2
        .add(&h.scale(Complex64::new(-2.0 * mats.omega, 0.0)))
        .add(&s.scale(Complex64::new(mats.omega * mats.omega, 0.0)));
    SubspaceMatrices {
        dim: d,
        h,
        s,
        v,
        h2: mats.h2.clone(),
        var_h: mats.var_h.clone(),
        var_s: mats.var_s.clone(),
        omega: mats.omega,
        quantity_count: mats.quantity_count,
    }
}

/// First-order prediction of how matrix perturbations shift one
/// generalized eigenpair, next to the exact re-solve.
#[derive(Debug, Clone)]
pub struct PerturbationReport {
    pub predicted_delta_e: f64,
    pub predicted_delta_alpha: Vec<Complex64>,
    pub actual_delta_e: f64,
    /// `|actual - predicted|`: the beyond-first-order remainder.
    pub remainder: f64,
}

fn bilinear(left: &[Complex64], m: &ComplexMatrix, right: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..left.len() {
        for j in 0..right.len() {
            acc += left[i].conj() * m.get(i, j) * right[j];
        }
    }
    acc
}

fn solution_column(sol: &GeneralizedEigenSolution, k: usize) -> Vec<Complex64> {
    (0..sol.eigenvectors.rows()).map(|i| sol.eigenvectors.get(i, k)).collect()
}

/// Predicts the eigenvalue and eigenvector shift of level `n` under
/// `(h0 + dh, s0 + ds)` to first order in the perturbation:
/// `dE = a_n^dag (dH - E_n dS) a_n` and
/// `da_n = sum_m eps_nm a_m` with
/// `eps_nm = a_m^dag (dH - E_n dS) a_n / (E_n - E_m)` off level and
/// `eps_nn = -1/2 a_n^dag dS a_n` on it. Also re-solves the perturbed
/// pencil exactly and reports the actual shift.
pub fn predict_first_order_shift(
    h0: &ComplexMatrix,
    s0: &ComplexMatrix,
    solution: &GeneralizedEigenSolution,
    dh: &ComplexMatrix,
    ds: &ComplexMatrix,
    level: usize,
) -> Result<PerturbationReport, ShotNoiseError> {
    let kept = solution.kept_rank;
    if level >= kept {
        return Err(ShotNoiseError::Input(format!(
            "level {level} outside the {kept} kept directions"
        )));
    }
    let e_n = solution.eigenvalues[level];
    let mut min_gap = f64::INFINITY;
    for m in 0..kept {
        if m != level {
            min_gap = min_gap.min((e_n - solution.eigenvalues[m]).abs());
        }
    }
    if kept > 1 && min_gap < 1e-8 {
        return Err(ShotNoiseError::DegenerateSpectrum { gap: min_gap });
    }

    let alpha_n = solution_column(solution, level);
    let d = alpha_n.len();
    let coupling = dh.add(&ds.scale(Complex64::new(-e_n, 0.0)));
    let predicted_delta_e = bilinear(&alpha_n, &coupling, &alpha_n).re;

    let mut predicted_delta_alpha = vec![Complex64::new(0.0, 0.0); d];
    for m in 0..kept {
        let alpha_m = solution_column(solution, m);
        let eps = if m == level {
            bilinear(&alpha_n, ds, &alpha_n) * Complex64::new(-0.5, 0.0)
        } else {
            bilinear(&alpha_m, &coupling, &alpha_n) / (e_n - solution.eigenvalues[m])
        };
        for i in 0..d {
            predicted_delta_alpha[i] += eps * alpha_m[i];
        }
    }

    let resolved = solve_generalized_eig(&h0.add(dh), &s0.add(ds), solution.cutoff)?;
    if level >= resolved.kept_rank {
        return Err(ShotNoiseError::Input(format!(
            "perturbation dropped level {level}: only {} directions kept",
            resolved.kept_rank
        )));
    }
    let actual_delta_e = resolved.eigenvalues[level] - e_n;
    let remainder = (actual_delta_e - predicted_delta_e).abs();
    let report = PerturbationReport {
        predicted_delta_e,
        predicted_delta_alpha,
        actual_delta_e,
        remainder,
    };
    assert!(
        report.predicted_delta_e.is_finite()
            && report.actual_delta_e.is_finite()
            && report.predicted_delta_alpha.iter().all(|c| c.re.is_finite() && c.im.is_finite()),
        "perturbation report must be finite"
    );
    Ok(report)
}

/// Measurement count sufficient to resolve the subspace problem to
/// accuracy `epsilon`: `16 gamma^2 D^4 ||S0^-1||^2 / epsilon^2`, with the
/// inverse-metric norm taken over the kept spectral directions.
pub fn sample_complexity_bound(
    gamma: f64,
    d: usize,
    s0: &ComplexMatrix,
    epsilon: f64,
) -> Result<f64, ShotNoiseError> {
    assert!(epsilon > 0.0, "target accuracy must be positive");
    let (evals, _) = hermitian_eig(s0)?;
    let max = evals.iter().cloned().fold(0.0f64, |a, b| a.max(b.abs()));
    let kept_min = evals
        .iter()
        .cloned()
        .filter(|&v| v > gse::DEFAULT_METRIC_CUTOFF * max)
        .fold(f64::INFINITY, f64::min);
    if !kept_min.is_finite() {
        return Err(ShotNoiseError::Linalg(LinalgError::EmptySubspace));
    }
    let inv_norm = 1.0 / kept_min;
    Ok(16.0 * gamma * gamma * (d as f64).powi(4) * inv_norm * inv_norm / (epsilon * epsilon))
}

/// Closed-form estimates of the inverse-metric norm from purity moments
/// `t_k = Tr[rho^k]`. Available for the two-base state-weighted metric
/// (`(t3 - t2^2)^-1`) and the uniform-weight power block of three bases
/// (`(t4 - t3^2 / t2)^-1`); both track the exact norm when the purity
/// moments are small against 1.
pub fn closed_form_inverse_metric_norm(rho: &DensityMatrix, d: usize, state_weighted: bool) -> f64 {
    let moment = |k: usize| rho.power(k).trace().re;
    match (d, state_weighted) {
        (2, true) => 1.0 / (moment(3) - moment(2) * moment(2)),
        (3, false) => {
            let (t2, t3, t4) = (moment(2), moment(3), moment(4));
            1.0 / (t4 - t3 * t3 / t2)
        }
        _ => panic!(
            "closed form available for (d = 2, state-weighted) and (d = 3, uniform), \
             got ({d}, {state_weighted})"
        ),
    }
}

/// Empirical distribution of mitigated energies over noise realizations.
#[derive(Debug, Clone)]
pub struct EnergyDistribution {
    pub samples: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (n - 1 denominator).
    pub std: f64,
}

impl EnergyDistribution {
    pub fn from_samples(samples: Vec<f64>) -> Self {
        assert!(!samples.is_empty(), "distribution needs at least one sample");
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let std = if samples.len() > 1 {
            (samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        EnergyDistribution { samples, mean, std }
    }

    /// Uniform-width bins spanning the sample range; the right edge of the
    /// last bin is inclusive.
    pub fn histogram(&self, bins: usize) -> Vec<(f64, f64, usize)> {
        assert!(bins >= 1, "histogram needs at least one bin");
        let lo = self.samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in &self.samples {
            let idx = if width > 0.0 {
                (((x - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, c)| (lo + k as f64 * width, lo + (k + 1) as f64 * width, c))
            .collect()
    }
}

/// Derives one independent stream seed per trial from the master seed.
pub fn derive_trial_seed(master: u64, trial: u64) -> u64 {
    let mut z = master.wrapping_add(trial.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Monte Carlo distribution of mitigated energies under the Gaussian shot
/// model: per trial, perturb the assembled matrices, solve the energy
/// principle with the spectral cutoff as regularization, and select one
/// candidate. Trials run concurrently with derived per-trial seeds, so
/// the result is independent of scheduling.
#[allow(clippy::too_many_arguments)]
pub fn estimate_with_shot_noise(
    spec: &SubspaceSpec,
    family: &[DensityMatrix],
    h: &PauliHamiltonian,
    budget: &ShotBudget,
    trials: usize,
    selection: SelectionMode,
    cutoff: f64,
    master_seed: u64,
) -> Result<EnergyDistribution, GseError> {
    assert!(trials >= 1, "need at least one trial");
    let sub = Subspace::build(spec, family, h)?;
    let omega = gse::default_omega(&sub, h);
    let mats = gse::assemble_matrices(&sub, h, omega)?;
    let drawn: Vec<Result<f64, GseError>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(master_seed, t as u64));
            let noisy = perturb_subspace_matrices(&mats, budget, &mut rng);
            let candidates = gse::solve_energy_principle(&noisy, cutoff)?;
            Ok(gse::select_candidate(&candidates, selection).energy)
        })
        .collect();
    let samples = drawn.into_iter().collect::<Result<Vec<f64>, GseError>>()?;
    Ok(EnergyDistribution::from_samples(samples))
}

/// Number of measured quantities behind a distilled trace-ratio energy at
/// the given order: the observable words of the numerator plus the purity
/// denominator (which is exactly known at order 1).
pub fn vd_quantity_count(h: &PauliHamiltonian, order: usize) -> usize {
    assert!(order >= 1, "distillation order starts at 1");
    let terms: Vec<(Complex64, PauliString)> = h
        .terms()
        .iter()
        .map(|(c, p)| (Complex64::new(*c, 0.0), p.clone()))
        .collect();
    let numerator = power_word_quantity_count(order, &terms);
    let denominator = if order >= 2 { 1 } else { 0 };
    numerator + denominator
}

/// Monte Carlo distribution of the distilled trace-ratio energy
/// `Tr[rho^M H] / Tr[rho^M]` under the Gaussian shot model. Order 1 is raw
/// estimation: the numerator carries the standard per-word variance and
/// the denominator is exactly 1.
pub fn vd_energy_with_shot_noise(
    rho: &DensityMatrix,
    order: usize,
    h: &PauliHamiltonian,
    budget: &ShotBudget,
    trials: usize,
    master_seed: u64,
) -> EnergyDistribution {
    assert!(trials >= 1, "need at least one trial");
    let exact = baselines::vd_energy(rho, order, h);
    let cache = MomentCache::new(rho, order);
    let terms: Vec<(Complex64, PauliString)> = h
        .terms()
        .iter()
        .map(|(c, p)| (Complex64::new(*c, 0.0), p.clone()))
        .collect();
    let var_num = power_word_variance(&cache, order, &terms);
    let var_den = if order >= 2 {
        let tm = cache.powers[order].trace().re;
        (1.0 - tm * tm).max(0.0)
    } else {
        0.0
    };
    let samples: Vec<f64> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(master_seed, t as u64));
            let num = exact.numerator + sample_normal(&mut rng, (var_num / budget.n_s).sqrt());
            let den = exact.denominator + sample_normal(&mut rng, (var_den / budget.n_s).sqrt());
            num / den
        })
        .collect();
    EnergyDistribution::from_samples(samples)
}

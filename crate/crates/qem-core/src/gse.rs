//! Subspace-expanded error mitigation.
//!
//! An expansion is a list of operator bases `sigma_i` plus a positive weight
//! operator `A`. Minimizing the energy (or the energy variance) of the
//! normalized state `P^dag A P / Tr[P^dag A P]` over `P = sum_i alpha_i
//! sigma_i` reduces to the generalized eigenproblem `H alpha = E S alpha`
//! with `H_ij = Tr[sigma_i^dag A sigma_j H]` and
//! `S_ij = Tr[sigma_i^dag A sigma_j]`. Matrix elements are evaluated by
//! exact dense algebra; the measurement cost of estimating each element is
//! tracked separately through single-shot variance tables so that finite
//! shot budgets can be modeled statistically.

use crate::baselines;
use crate::linalg::{solve_generalized_eig, ComplexMatrix, LinalgError};
use crate::pauli::{PauliExpansion, PauliHamiltonian, PauliString};
use crate::shot_noise;
use crate::state::DensityMatrix;
use num_complex::Complex64;
use thiserror::Error;

/// Relative metric-spectrum cutoff applied when none is configured.
pub const DEFAULT_METRIC_CUTOFF: f64 = 1e-8;
/// Default number of reference-energy updates in the variance principle.
pub const DEFAULT_OMEGA_ITERATIONS: usize = 2;
/// Allowed pre-symmetrization asymmetry of assembled matrices, relative to
/// their magnitude.
const ASYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum GseError {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("subspace specification invalid: {0}")]
    BadSpec(String),
    #[error("assembled {matrix} matrix deviates from Hermitian by {deviation:e}")]
    AssemblyAsymmetry { matrix: &'static str, deviation: f64 },
    #[error("realized state has vanishing weight Tr[P^dag A P] = {trace:e}")]
    DegenerateProjection { trace: f64 },
}

/// The positive weight operator sandwiched between expansion bases.
#[derive(Debug, Clone)]
pub enum AOperator {
    Identity,
    /// First state of the supplied family.
    Rho,
    /// Integer power of the first family state.
    RhoPower(usize),
    Explicit(ComplexMatrix),
}

/// Operator tag on one side of a general-subspace factor.
#[derive(Debug, Clone)]
pub enum OperatorTag {
    Identity,
    Pauli(PauliString),
    Explicit(ComplexMatrix),
}

/// State slot of a general-subspace factor: a family member, or the
/// identity matrix for bases that are pure operators (no state content).
#[derive(Debug, Clone, Copy)]
pub enum StateSlot {
    Family(usize),
    Identity,
}

/// One `U rho V` factor of a general-subspace term.
#[derive(Debug, Clone)]
pub struct GeneralFactor {
    pub left: OperatorTag,
    pub state: StateSlot,
    pub right: OperatorTag,
}

/// One weighted product of factors.
#[derive(Debug, Clone)]
pub struct GeneralTerm {
    pub coefficient: Complex64,
    pub factors: Vec<GeneralFactor>,
}

/// A general expansion base: a linear combination of factor products.
#[derive(Debug, Clone)]
pub struct GeneralBase {
    pub terms: Vec<GeneralTerm>,
}

impl GeneralBase {
    fn bare_factor(state: StateSlot) -> GeneralFactor {
        GeneralFactor { left: OperatorTag::Identity, state, right: OperatorTag::Identity }
    }

    /// The identity operator as a base.
    pub fn identity() -> Self {
        GeneralBase {
            terms: vec![GeneralTerm {
                coefficient: Complex64::new(1.0, 0.0),
                factors: vec![Self::bare_factor(StateSlot::Identity)],
            }],
        }
    }

    /// `rho_index^power` as a base.
    pub fn state_power(index: usize, power: usize) -> Self {
        assert!(power >= 1, "state power base needs power >= 1");
        GeneralBase {
            terms: vec![GeneralTerm {
                coefficient: Complex64::new(1.0, 0.0),
                factors: vec![Self::bare_factor(StateSlot::Family(index)); power],
            }],
        }
    }

    /// A Hamiltonian as a base, expanded into one Pauli factor per term so
    /// every operator tag stays a measurable Pauli word.
    pub fn hamiltonian(h: &PauliHamiltonian) -> Self {
        GeneralBase {
            terms: h
                .terms()
                .iter()
                .map(|(c, p)| GeneralTerm {
                    coefficient: Complex64::new(*c, 0.0),
                    factors: vec![GeneralFactor {
                        left: OperatorTag::Pauli(p.clone()),
                        state: StateSlot::Identity,
                        right: OperatorTag::Identity,
                    }],
                })
                .collect(),
        }
    }
}

/// Which family of expansion bases to build.
#[derive(Debug, Clone)]
pub enum SubspaceKind {
    /// `sigma_i = rho^i`; even copy budget `m` uses `i = 0..m/2` with
    /// `A = I`, odd uses `i = 0..(m-1)/2` with `A = rho`.
    Power { m: usize },
    /// Power bases plus `rho^j H` for `j = 0..floor(m/2)`.
    PowerPlus { m: usize },
    /// One base per family member: `sigma_i = rho(level_i)`, `A = I`.
    Fault,
    General { bases: Vec<GeneralBase> },
}

/// A subspace recipe: the base family plus an optional weight override.
#[derive(Debug, Clone)]
pub struct SubspaceSpec {
    pub kind: SubspaceKind,
    /// Replaces the kind's default weight operator when present.
    pub a_override: Option<AOperator>,
}

impl SubspaceSpec {
    pub fn power(m: usize) -> Self {
        SubspaceSpec { kind: SubspaceKind::Power { m }, a_override: None }
    }

    pub fn power_plus(m: usize) -> Self {
        SubspaceSpec { kind: SubspaceKind::PowerPlus { m }, a_override: None }
    }

    pub fn fault() -> Self {
        SubspaceSpec { kind: SubspaceKind::Fault, a_override: None }
    }

    pub fn general(bases: Vec<GeneralBase>) -> Self {
        SubspaceSpec { kind: SubspaceKind::General { bases }, a_override: None }
    }

    /// Conventional quantum subspace expansion: bases `{I, H}` weighted by
    /// the state itself.
    pub fn conventional_qse(h: &PauliHamiltonian) -> Self {
        SubspaceSpec {
            kind: SubspaceKind::General {
                bases: vec![GeneralBase::identity(), GeneralBase::hamiltonian(h)],
            },
            a_override: Some(AOperator::Rho),
        }
    }

    pub fn with_a(mut self, a: AOperator) -> Self {
        self.a_override = Some(a);
        self
    }
}

/// Distillation orders whose energies the power subspace of budget `m` can
/// reproduce with a single-base coefficient vector.
pub fn admissible_vd_orders(m: usize) -> Vec<usize> {
    let start = if m % 2 == 0 { 2 } else { 1 };
    (start..=m).step_by(2).collect()
}

/// Measurement-structure label for one base, used by the variance model.
#[derive(Debug, Clone)]
enum BaseMeta {
    /// `sigma = rho^p H^q` built from the first family state.
    PowerWord { rho_power: usize, h_power: usize },
    /// `sigma = rho_index`.
    FaultState(usize),
    /// Resolved general terms (dense operator tokens + state references).
    General(Vec<ResolvedTerm>),
}

#[derive(Debug, Clone)]
enum ChainToken {
    Op(ComplexMatrix),
    State(usize),
}

#[derive(Debug, Clone)]
struct ResolvedTerm {
    coefficient: Complex64,
    tokens: Vec<ChainToken>,
}

impl ResolvedTerm {
    fn adjoint(&self) -> ResolvedTerm {
        ResolvedTerm {
            coefficient: self.coefficient.conj(),
            tokens: self
                .tokens
                .iter()
                .rev()
                .map(|t| match t {
                    ChainToken::Op(m) => ChainToken::Op(m.adjoint()),
                    ChainToken::State(k) => ChainToken::State(*k),
                })
                .collect(),
        }
    }
}

/// Copies of `rho` the weight operator adds to each matrix element, when
/// that count is well defined.
fn a_state_copies(a: &AOperator) -> Option<usize> {
    match a {
        AOperator::Identity => Some(0),
        AOperator::Rho => Some(1),
        AOperator::RhoPower(k) => Some(*k),
        AOperator::Explicit(_) => None,
    }
}

/// Built subspace: dense bases, dense weight operator, and the metadata
/// needed to model the measurement cost of each matrix element.
#[derive(Debug, Clone)]
pub struct Subspace {
    n_qubits: usize,
    degree: Option<usize>,
    bases: Vec<ComplexMatrix>,
    meta: Vec<BaseMeta>,
    a: ComplexMatrix,
    a_op: AOperator,
    family: Vec<DensityMatrix>,
}

impl Subspace {
    /// Builds the dense bases and weight operator for `spec` around the
    /// given state family. The Hamiltonian supplies the `rho^j H` bases of
    /// the augmented power subspace.
    pub fn build(
        spec: &SubspaceSpec,
        family: &[DensityMatrix],
        h: &PauliHamiltonian,
    ) -> Result<Subspace, GseError> {
        let n_qubits = match family.first() {
            Some(f) => f.n_qubits(),
            None => h.n_qubits(),
        };
        if family.iter().any(|f| f.n_qubits() != n_qubits) {
            return Err(GseError::BadSpec("family states differ in register size".into()));
        }
        if h.n_qubits() != n_qubits {
            return Err(GseError::BadSpec(format!(
                "Hamiltonian acts on {} qubits but states use {}",
                h.n_qubits(),
                n_qubits
            )));
        }
        let dim = 1usize << n_qubits;

        let mut bases = Vec::new();
        let mut meta = Vec::new();
        let mut degree = None;
        match &spec.kind {
            SubspaceKind::Power { m } | SubspaceKind::PowerPlus { m } => {
                if *m < 1 {
                    return Err(GseError::BadSpec("copy budget must be at least 1".into()));
                }
                let rho = family
                    .first()
                    .ok_or_else(|| GseError::BadSpec("power subspace needs a state".into()))?;
                degree = Some(*m);
                let top = if m % 2 == 0 { m / 2 } else { (m - 1) / 2 };
                let mut powers = vec![ComplexMatrix::identity(dim)];
                for k in 1..=(m / 2).max(top) {
                    powers.push(powers[k - 1].matmul(rho.matrix()));
                }
                for (k, p) in powers.iter().enumerate().take(top + 1) {
                    bases.push(p.clone());
                    meta.push(BaseMeta::PowerWord { rho_power: k, h_power: 0 });
                }
                if matches!(spec.kind, SubspaceKind::PowerPlus { .. }) {
                    let h_dense = h.dense();
                    for (j, p) in powers.iter().enumerate().take(m / 2 + 1) {
                        bases.push(p.matmul(&h_dense));
                        meta.push(BaseMeta::PowerWord { rho_power: j, h_power: 1 });
                    }
                }
            }
            SubspaceKind::Fault => {
                if family.is_empty() {
                    return Err(GseError::BadSpec("fault subspace needs a state family".into()));
                }
                for (k, f) in family.iter().enumerate() {
                    bases.push(f.matrix().clone());
                    meta.push(BaseMeta::FaultState(k));
                }
            }
            SubspaceKind::General { bases: gens } => {
                if gens.is_empty() {
                    return Err(GseError::BadSpec("general subspace needs at least one base".into()));
                }
                for gen in gens {
                    let resolved = resolve_general_base(gen, family, dim)?;
                    let mut dense = ComplexMatrix::zeros(dim, dim);
                    for term in &resolved {
                        let mut prod = ComplexMatrix::identity(dim);
                        for token in &term.tokens {
                            prod = match token {
                                ChainToken::Op(m) => prod.matmul(m),
                                ChainToken::State(k) => prod.matmul(family[*k].matrix()),
                            };
                        }
                        dense = dense.add(&prod.scale(term.coefficient));
                    }
                    bases.push(dense);
                    meta.push(BaseMeta::General(resolved));
                }
            }
        }

        let default_a = match &spec.kind {
            SubspaceKind::Power { m } | SubspaceKind::PowerPlus { m } => {
                if m % 2 == 0 {
                    AOperator::Identity
                } else {
                    AOperator::Rho
                }
            }
            SubspaceKind::Fault | SubspaceKind::General { .. } => AOperator::Identity,
        };
        let a_op = spec.a_override.clone().unwrap_or(default_a);
        let a = match &a_op {
            AOperator::Identity => ComplexMatrix::identity(dim),
            AOperator::Rho => family
                .first()
                .ok_or_else(|| GseError::BadSpec("weight operator references a state".into()))?
                .matrix()
                .clone(),
            AOperator::RhoPower(k) => {
                if *k < 1 {
                    return Err(GseError::BadSpec("weight power must be at least 1".into()));
                }
                family
                    .first()
                    .ok_or_else(|| GseError::BadSpec("weight operator references a state".into()))?
                    .power(*k)
            }
            AOperator::Explicit(m) => {
                if m.rows() != dim || m.cols() != dim {
                    return Err(GseError::BadSpec(format!(
                        "explicit weight operator is {}x{}, expected {dim}x{dim}",
                        m.rows(),
                        m.cols()
                    )));
                }
                m.clone()
            }
        };

        Ok(Subspace {
            n_qubits,
            degree,
            bases,
            meta,
            a,
            a_op,
            family: family.to_vec(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Number of expansion bases.
    pub fn dimension(&self) -> usize {
        self.bases.len()
    }

    /// Copy budget of a power-family subspace.
    pub fn degree(&self) -> Option<usize> {
        self.degree
    }

    pub fn bases(&self) -> &[ComplexMatrix] {
        &self.bases
    }

    pub fn a(&self) -> &ComplexMatrix {
        &self.a
    }

    pub fn family(&self) -> &[DensityMatrix] {
        &self.family
    }
}

fn resolve_operator_tag(
    tag: &OperatorTag,
    n_qubits: usize,
    dim: usize,
) -> Result<Option<ComplexMatrix>, GseError> {
    match tag {
        OperatorTag::Identity => Ok(None),
        OperatorTag::Pauli(p) => {
            if p.n_qubits() != n_qubits {
                return Err(GseError::BadSpec(format!(
                    "Pauli tag acts on {} qubits, expected {n_qubits}",
                    p.n_qubits()
                )));
            }
            Ok(Some(p.dense()))
        }
        OperatorTag::Explicit(m) => {
            if m.rows() != dim || m.cols() != dim {
                return Err(GseError::BadSpec(format!(
                    "explicit operator tag is {}x{}, expected {dim}x{dim}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(Some(m.clone()))
        }
    }
}

fn resolve_general_base(
    base: &GeneralBase,
    family: &[DensityMatrix],
    dim: usize,
) -> Result<Vec<ResolvedTerm>, GseError> {
    if base.terms.is_empty() {
        return Err(GseError::BadSpec("general base has no terms".into()));
    }
    let n_qubits = dim.trailing_zeros() as usize;
    let mut out = Vec::with_capacity(base.terms.len());
    for term in &base.terms {
        if term.factors.is_empty() {
            return Err(GseError::BadSpec("general term has no factors".into()));
        }
        let mut tokens = Vec::new();
        for factor in &term.factors {
            if let Some(m) = resolve_operator_tag(&factor.left, n_qubits, dim)? {
                tokens.push(ChainToken::Op(m));
            }
            match factor.state {
                StateSlot::Family(k) => {
                    if k >= family.len() {
                        return Err(GseError::BadSpec(format!(
                            "state slot {k} out of range for family of {}",
                            family.len()
                        )));
                    }
                    tokens.push(ChainToken::State(k));
                }
                StateSlot::Identity => {}
            }
            if let Some(m) = resolve_operator_tag(&factor.right, n_qubits, dim)? {
                tokens.push(ChainToken::Op(m));
            }
        }
        out.push(ResolvedTerm { coefficient: term.coefficient, tokens });
    }
    Ok(out)
}

/// Assembled matrices of the generalized eigenproblem, together with the
/// stored second Hamiltonian moment (for rebuilding the variance operator
/// at a new reference energy without new measurements) and the single-shot
/// variance tables of the measured elements.
#[derive(Debug, Clone)]
pub struct SubspaceMatrices {
    pub dim: usize,
    /// `Tr[sigma_i^dag A sigma_j H]`
    pub h: ComplexMatrix,
    /// `Tr[sigma_i^dag A sigma_j]`
    pub s: ComplexMatrix,
    /// `Tr[sigma_i^dag A sigma_j (H - omega)^2]` at the stored `omega`.
    pub v: ComplexMatrix,
    /// `Tr[sigma_i^dag A sigma_j H^2]`
    pub h2: ComplexMatrix,
    /// Single-shot variance of estimating each element of `h`.
    pub var_h: Vec<Vec<f64>>,
    /// Single-shot variance of estimating each element of `s`.
    pub var_s: Vec<Vec<f64>>,
    /// Reference energy the stored `v` was built with.
    pub omega: f64,
    /// Number of distinct measured quantities behind `h` and `s`, used to
    /// split a total shot budget uniformly.
    pub quantity_count: usize,
}

impl SubspaceMatrices {
    /// `V(omega) = H2 - 2 omega H + omega^2 S`, rebuilt from stored moments.
    pub fn variance_matrix(&self, omega: f64) -> ComplexMatrix {
        self.h2
            .add(&self.h.scale(Complex64::new(-2.0 * omega, 0.0)))
            .add(&self.s.scale(Complex64::new(omega * omega, 0.0)))
    }
}

/// Reference energy the variance principle starts from: the distilled
/// energy at the full copy budget for power subspaces, the raw energy of
/// the first family state otherwise.
pub fn default_omega(sub: &Subspace, h: &PauliHamiltonian) -> f64 {
    match (sub.degree, sub.family.first()) {
        (Some(m), Some(rho)) => baselines::vd_energy(rho, m, h).energy,
        (None, Some(rho)) => rho.expectation_hamiltonian(h),
        (_, None) => 0.0,
    }
}

fn check_hermitian(
    m: &ComplexMatrix,
    label: &'static str,
) -> Result<ComplexMatrix, GseError> {
    let dev = m.hermiticity_deviation();
    if dev > ASYMMETRY_TOL * m.max_abs().max(1.0) {
        return Err(GseError::AssemblyAsymmetry { matrix: label, deviation: dev });
    }
    Ok(m.hermitize())
}

/// Walked chain structure of one measured trace: the states it threads
/// through and the merged operator groups between consecutive states.
/// `lead` collects operators before the first state, `trail` those after
/// the last; the observable closes the cycle between them.
struct ChainSkeleton {
    states: Vec<usize>,
    inner: Vec<ComplexMatrix>,
    lead: ComplexMatrix,
    trail: ComplexMatrix,
}

fn walk_chain(tokens: &[ChainToken], dim: usize) -> ChainSkeleton {
    let mut states = Vec::new();
    let mut inner = Vec::new();
    let mut lead = ComplexMatrix::identity(dim);
    let mut current = ComplexMatrix::identity(dim);
    let mut seen_state = false;
    for token in tokens {
        match token {
            ChainToken::Op(m) => current = current.matmul(m),
            ChainToken::State(k) => {
                if seen_state {
                    inner.push(current);
                } else {
                    lead = current;
                    seen_state = true;
                }
                states.push(*k);
                current = ComplexMatrix::identity(dim);
            }
        }
    }
    ChainSkeleton { states, inner, lead, trail: current }
}

/// Per-element measurement model for chains: each (term pair, Pauli word)
/// is an independently measured quantity; negative formula values (possible
/// for words with imaginary phase) are clamped to zero.
fn chain_element_variance(
    skeletons: &[(f64, ChainSkeleton)],
    observable: &[(f64, ComplexMatrix, bool)],
    family: &[DensityMatrix],
    dim: usize,
) -> (f64, usize) {
    let id = ComplexMatrix::identity(dim);
    let mut total = 0.0;
    let mut quantities = 0;
    for (weight, skel) in skeletons {
        if skel.states.is_empty() {
            // No state content: the trace is a classically known constant.
            continue;
        }
        let state_mats: Vec<&ComplexMatrix> =
            skel.states.iter().map(|k| family[*k].matrix()).collect();
        for (obs_weight, obs_dense, obs_is_identity) in observable {
            let g1 = if *obs_is_identity {
                skel.trail.matmul(&skel.lead)
            } else {
                skel.trail.matmul(obs_dense).matmul(&skel.lead)
            };
            if skel.states.len() == 1 && g1.sub(&id).max_abs() < 1e-12 {
                // Single copy of a trace-1 state measured against the
                // identity word: exactly known, nothing to estimate.
                continue;
            }
            let mut groups: Vec<&ComplexMatrix> = Vec::with_capacity(skel.states.len());
            groups.push(&g1);
            groups.extend(skel.inner.iter());
            let var = shot_noise::chain_variance(&state_mats, &groups).max(0.0);
            total += weight * obs_weight * var;
            quantities += 1;
        }
    }
    (total, quantities)
}

/// Computes the eigenproblem matrices, the stored moment matrices, and the
/// per-element single-shot variance tables for `sub`.
pub fn assemble_matrices(
    sub: &Subspace,
    h: &PauliHamiltonian,
    omega: f64,
) -> Result<SubspaceMatrices, GseError> {
    if h.n_qubits() != sub.n_qubits {
        return Err(GseError::BadSpec(format!(
            "Hamiltonian acts on {} qubits but subspace uses {}",
            h.n_qubits(),
            sub.n_qubits
        )));
    }
    let d = sub.bases.len();
    let dim = 1usize << sub.n_qubits;
    let h_dense = h.dense();
    let h2_dense = h_dense.matmul(&h_dense);

    let lefts: Vec<ComplexMatrix> =
        sub.bases.iter().map(|b| b.adjoint().matmul(&sub.a)).collect();
    let mut h_mat = ComplexMatrix::zeros(d, d);
    let mut s_mat = ComplexMatrix::zeros(d, d);
    let mut h2_mat = ComplexMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let prod = lefts[i].matmul(&sub.bases[j]);
            s_mat.set(i, j, prod.trace());
            h_mat.set(i, j, prod.trace_product(&h_dense));
            h2_mat.set(i, j, prod.trace_product(&h2_dense));
        }
    }
    let h_mat = check_hermitian(&h_mat, "H")?;
    let s_mat = check_hermitian(&s_mat, "S")?;
    let h2_mat = check_hermitian(&h2_mat, "H2")?;

    let mut var_h = vec![vec![0.0; d]; d];
    let mut var_s = vec![vec![0.0; d]; d];
    let mut quantity_count = 0usize;

    let a_copies = a_state_copies(&sub.a_op);
    let power_words: Option<Vec<(usize, usize)>> = sub
        .meta
        .iter()
        .map(|m| match m {
            BaseMeta::PowerWord { rho_power, h_power } => Some((*rho_power, *h_power)),
            _ => None,
        })
        .collect();

    if let (Some(words), Some(a_c)) = (power_words, a_copies) {
        // Power-family fast path: every element is Tr[rho^m H^k] and the
        // variance follows the identical-copy formula per Pauli word.
        let rho = &sub.family[0];
        let m_max =
            words.iter().map(|(p, _)| p).max().unwrap_or(&0) * 2 + a_c;
        let q_max = words.iter().map(|(_, q)| q).max().unwrap_or(&0) * 2 + 1;
        let cache = shot_noise::MomentCache::new(rho, m_max);
        let expansions: Vec<Vec<(Complex64, PauliString)>> = (0..=q_max)
            .map(|k| PauliExpansion::hamiltonian_power(h, k).terms().to_vec())
            .collect();
        for i in 0..d {
            for j in 0..d {
                let m = words[i].0 + words[j].0 + a_c;
                let q = words[i].1 + words[j].1;
                var_s[i][j] = shot_noise::power_word_variance(&cache, m, &expansions[q]);
                var_h[i][j] = shot_noise::power_word_variance(&cache, m, &expansions[q + 1]);
                if j >= i {
                    quantity_count +=
                        shot_noise::power_word_quantity_count(m, &expansions[q]);
                    quantity_count +=
                        shot_noise::power_word_quantity_count(m, &expansions[q + 1]);
                }
            }
        }
    } else {
        // General path: resolve each base into operator/state chains and
        // apply the product-of-traces variance formula per chain.
        let a_tokens: Vec<ChainToken> = match &sub.a_op {
            AOperator::Identity => vec![],
            AOperator::Rho => vec![ChainToken::State(0)],
            AOperator::RhoPower(k) => vec![ChainToken::State(0); *k],
            AOperator::Explicit(m) => vec![ChainToken::Op(m.clone())],
        };
        let terms_of = |idx: usize| -> Vec<ResolvedTerm> {
            match &sub.meta[idx] {
                BaseMeta::PowerWord { rho_power, h_power } => {
                    let mut tokens = vec![ChainToken::State(0); *rho_power];
                    tokens.extend(
                        std::iter::repeat_with(|| ChainToken::Op(h_dense.clone()))
                            .take(*h_power),
                    );
                    vec![ResolvedTerm { coefficient: Complex64::new(1.0, 0.0), tokens }]
                }
                BaseMeta::FaultState(k) => vec![ResolvedTerm {
                    coefficient: Complex64::new(1.0, 0.0),
                    tokens: vec![ChainToken::State(*k)],
                }],
                BaseMeta::General(terms) => terms.clone(),
            }
        };
        let obs_h: Vec<(f64, ComplexMatrix, bool)> = h
            .terms()
            .iter()
            .map(|(c, p)| (c * c, p.dense(), p.is_identity()))
            .collect();
        let obs_s = vec![(1.0, ComplexMatrix::identity(dim), true)];
        for i in 0..d {
            for j in 0..d {
                let left_terms: Vec<ResolvedTerm> =
                    terms_of(i).iter().map(ResolvedTerm::adjoint).collect();
                let right_terms = terms_of(j);
                let mut skeletons = Vec::new();
                for lt in &left_terms {
                    for rt in &right_terms {
                        let weight = (lt.coefficient * rt.coefficient).norm_sqr();
                        let mut tokens = lt.tokens.clone();
                        tokens.extend(a_tokens.iter().cloned());
                        tokens.extend(rt.tokens.iter().cloned());
                        skeletons.push((weight, walk_chain(&tokens, dim)));
                    }
                }
                let (vh, qh) = chain_element_variance(&skeletons, &obs_h, &sub.family, dim);
                let (vs, qs) = chain_element_variance(&skeletons, &obs_s, &sub.family, dim);
                var_h[i][j] = vh;
                var_s[i][j] = vs;
                if j >= i {
                    quantity_count += qh + qs;
                }
            }
        }
    }

    let v = h2_mat
        .add(&h_mat.scale(Complex64::new(-2.0 * omega, 0.0)))
        .add(&s_mat.scale(Complex64::new(omega * omega, 0.0)));
    Ok(SubspaceMatrices {
        dim: d,
        h: h_mat,
        s: s_mat,
        v,
        h2: h2_mat,
        var_h,
        var_s,
        omega,
        quantity_count,
    })
}

/// Which stationarity condition produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Principle {
    Energy,
    Variance,
}

/// One solved candidate: a coefficient vector on the subspace bases plus
/// the scalar diagnostics read from it.
#[derive(Debug, Clone)]
pub struct MitigationResult {
    pub energy: f64,
    pub coefficients: Vec<Complex64>,
    /// Energy spread `<(H - omega)^2>` of the realized state, evaluated at
    /// the final reference energy (the candidate's own energy).
    pub variance: f64,
    pub principle: Principle,
    /// Reference energies visited: the initial omega followed by one entry
    /// per update.
    pub omega_history: Vec<f64>,
    pub kept_rank: usize,
    /// Realized state, populated by `with_realized_state`.
    pub rho_em: Option<DensityMatrix>,
}

impl MitigationResult {
    /// Returns a copy carrying the realized mitigated state.
    pub fn with_realized_state(mut self, sub: &Subspace) -> Result<Self, GseError> {
        let state = realize_mitigated_state(sub, &self)?;
        self.rho_em = Some(state);
        Ok(self)
    }
}

fn quadratic_form(m: &ComplexMatrix, alpha: &[Complex64]) -> Complex64 {
    let d = alpha.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += alpha[i].conj() * m.get(i, j) * alpha[j];
        }
    }
    acc
}

fn column(m: &ComplexMatrix, k: usize) -> Vec<Complex64> {
    (0..m.rows()).map(|i| m.get(i, k)).collect()
}

/// Solves `H alpha = E S alpha` and returns every kept candidate in
/// ascending energy order.
pub fn solve_energy_principle(
    mats: &SubspaceMatrices,
    cutoff: f64,
) -> Result<Vec<MitigationResult>, GseError> {
    let sol = solve_generalized_eig(&mats.h, &mats.s, cutoff)?;
    let mut out = Vec::with_capacity(sol.kept_rank);
    for k in 0..sol.kept_rank {
        let alpha = column(&sol.eigenvectors, k);
        let s_norm = quadratic_form(&mats.s, &alpha);
        let e_full = quadratic_form(&mats.h, &alpha) / s_norm;
        if e_full.im.abs() > 1e-8 * e_full.re.abs().max(1.0) {
            log::warn!(
                "candidate {k} has imaginary energy residue {:e}; taking the real part",
                e_full.im
            );
        }
        let energy = e_full.re;
        let variance =
            (quadratic_form(&mats.variance_matrix(energy), &alpha) / s_norm).re;
        out.push(MitigationResult {
            energy,
            coefficients: alpha,
            variance,
            principle: Principle::Energy,
            omega_history: vec![mats.omega],
            kept_rank: sol.kept_rank,
            rho_em: None,
        });
    }
    Ok(out)
}

/// Solves `V(omega) alpha = lambda S alpha`, keeps the smallest-variance
/// candidate, then re-centers `omega` on that candidate's energy and
/// repeats. The variance operator is rebuilt from the stored moment
/// matrices, so iterating costs no further measurements.
pub fn solve_variance_principle(
    mats: &SubspaceMatrices,
    cutoff: f64,
    omega_iterations: usize,
) -> Result<MitigationResult, GseError> {
    assert!(omega_iterations >= 1, "variance principle needs at least one solve");
    let mut omega = mats.omega;
    let mut history = vec![omega];
    let mut alpha = Vec::new();
    let mut energy = 0.0;
    let mut kept_rank = 0;
    for _ in 0..omega_iterations {
        let v = mats.variance_matrix(omega);
        let sol = solve_generalized_eig(&v, &mats.s, cutoff)?;
        alpha = column(&sol.eigenvectors, 0);
        kept_rank = sol.kept_rank;
        let s_norm = quadratic_form(&mats.s, &alpha);
        energy = (quadratic_form(&mats.h, &alpha) / s_norm).re;
        omega = energy;
        history.push(energy);
    }
    let s_norm = quadratic_form(&mats.s, &alpha);
    let variance = (quadratic_form(&mats.variance_matrix(omega), &alpha) / s_norm).re;
    Ok(MitigationResult {
        energy,
        coefficients: alpha,
        variance,
        principle: Principle::Variance,
        omega_history: history,
        kept_rank,
        rho_em: None,
    })
}

/// How to pick one candidate out of a solved spectrum.
#[derive(Debug, Clone, Copy)]
pub enum SelectionMode {
    /// Smallest energy spread.
    MinVariance,
    /// Energy closest to a reference value.
    NearestTo(f64),
    /// Smallest energy (ground-state runs).
    LowestEnergy,
}

pub fn select_candidate<'a>(
    candidates: &'a [MitigationResult],
    mode: SelectionMode,
) -> &'a MitigationResult {
    assert!(!candidates.is_empty(), "no candidates to select from");
    let key = |r: &MitigationResult| match mode {
        SelectionMode::MinVariance => r.variance,
        SelectionMode::NearestTo(reference) => (r.energy - reference).abs(),
        SelectionMode::LowestEnergy => r.energy,
    };
    candidates
        .iter()
        .min_by(|a, b| key(a).total_cmp(&key(b)))
        .expect("nonempty candidate list")
}

/// `rho_EM = P^dag A P / Tr[P^dag A P]` with `P = sum_i alpha_i sigma_i`.
/// The positivity flag of the returned state records whether numerical
/// degeneracy spoiled physicality.
pub fn realize_mitigated_state(
    sub: &Subspace,
    result: &MitigationResult,
) -> Result<DensityMatrix, GseError> {
    assert_eq!(result.coefficients.len(), sub.bases.len(), "coefficient count");
    let dim = 1usize << sub.n_qubits;
    let mut p = ComplexMatrix::zeros(dim, dim);
    for (alpha, base) in result.coefficients.iter().zip(&sub.bases) {
        p = p.add(&base.scale(*alpha));
    }
    let raw = p.adjoint().matmul(&sub.a).matmul(&p).hermitize();
    let weight = raw.trace().re;
    if weight <= 1e-14 {
        return Err(GseError::DegenerateProjection { trace: weight });
    }
    let state = DensityMatrix::from_matrix(
        sub.n_qubits,
        raw.scale(Complex64::new(1.0 / weight, 0.0)),
    )?;
    Ok(state)
}

/// Mitigated expectation of an observable, evaluated as the ratio of
/// quadratic forms over the subspace without realizing the state.
pub fn mitigated_expectation(
    sub: &Subspace,
    result: &MitigationResult,
    observable: &PauliHamiltonian,
) -> f64 {
    let o_dense = observable.dense();
    let alpha = &result.coefficients;
    let d = sub.bases.len();
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = Complex64::new(0.0, 0.0);
    for i in 0..d {
        let left = sub.bases[i].adjoint().matmul(&sub.a);
        for j in 0..d {
            let prod = left.matmul(&sub.bases[j]);
            let w = alpha[i].conj() * alpha[j];
            num += w * prod.trace_product(&o_dense);
            den += w * prod.trace();
        }
    }
    (num / den).re
}

/// Builds, assembles, and solves a ground-state run in one call.
pub fn mitigate_ground(
    spec: &SubspaceSpec,
    family: &[DensityMatrix],
    h: &PauliHamiltonian,
    cutoff: f64,
) -> Result<(Subspace, SubspaceMatrices, MitigationResult), GseError> {
    let sub = Subspace::build(spec, family, h)?;
    let omega = default_omega(&sub, h);
    let mats = assemble_matrices(&sub, h, omega)?;
    let candidates = solve_energy_principle(&mats, cutoff)?;
    let best = select_candidate(&candidates, SelectionMode::LowestEnergy).clone();
    Ok((sub, mats, best))
}

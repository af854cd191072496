//! Baseline mitigation strategies: virtual distillation (purification by
//! state powers) and zero-noise Richardson extrapolation.

use crate::linalg::ComplexMatrix;
use crate::pauli::PauliHamiltonian;
use crate::state::DensityMatrix;
use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("noise scale factors must be distinct, found duplicate {0}")]
    DuplicateLambda(f64),
    #[error("need at least {needed} entries, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("scale factors and values must have matching lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("invalid extrapolation protocol: {0}")]
    InvalidSpec(String),
}

/// Distilled energy estimate from the `m`-th state power.
#[derive(Debug, Clone, Copy)]
pub struct VdResult {
    /// State copies consumed by the product.
    pub copies: usize,
    /// `Tr[rho^m H]`
    pub numerator: f64,
    /// `Tr[rho^m]`
    pub denominator: f64,
    pub energy: f64,
}

/// `E^(m) = Tr[rho^m H] / Tr[rho^m]`.
pub fn vd_energy(rho: &DensityMatrix, m: usize, h: &PauliHamiltonian) -> VdResult {
    assert!(m >= 1, "distillation order must be at least 1");
    let rho_m = rho.power(m);
    let numerator = h
        .terms()
        .iter()
        .map(|(c, s)| c * s.trace_with(&rho_m).re)
        .sum::<f64>();
    let denominator = rho_m.trace().re;
    assert!(
        denominator.abs() > 1e-300,
        "state power of order {m} has underflowed: trace {denominator:e}"
    );
    VdResult { copies: m, numerator, denominator, energy: numerator / denominator }
}

/// Descending-population eigenpair data of a state.
#[derive(Debug, Clone)]
pub struct DominantVector {
    /// Largest eigenvalue (population of the dominant vector).
    pub population: f64,
    /// Second-largest eigenvalue.
    pub second_population: f64,
    /// Dominant eigenvector amplitudes.
    pub amplitudes: Vec<Complex64>,
}

pub fn dominant_vector(rho: &DensityMatrix) -> DominantVector {
    let (evals, vecs) = rho.eigen_decomposition();
    let dim = rho.dim();
    let amplitudes = (0..dim).map(|i| vecs.get(i, dim - 1)).collect();
    DominantVector {
        population: evals[dim - 1],
        second_population: if dim >= 2 { evals[dim - 2] } else { 0.0 },
        amplitudes,
    }
}

/// Energy of the dominant eigenvector: the fixed point distillation
/// converges to as the power grows.
pub fn dominant_vector_energy(rho: &DensityMatrix, h: &PauliHamiltonian) -> f64 {
    let dom = dominant_vector(rho);
    let psi = DensityMatrix::from_pure(rho.n_qubits(), &dom.amplitudes);
    psi.expectation_hamiltonian(h)
}

/// `1 - |<dominant | ideal>|^2`: the part of the distillation error that
/// no amount of purification removes.
pub fn coherent_mismatch(rho: &DensityMatrix, ideal: &[Complex64]) -> f64 {
    assert_eq!(ideal.len(), rho.dim(), "ideal state dimension mismatch");
    let dom = dominant_vector(rho);
    let norm: f64 = ideal.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    let overlap: Complex64 = dom
        .amplitudes
        .iter()
        .zip(ideal)
        .map(|(a, b)| a.conj() * b / norm)
        .sum();
    1.0 - overlap.norm_sqr()
}

/// Richardson coefficients for noise scale factors `lambdas`:
/// `beta_i = prod_{j != i} lambda_j / (lambda_j - lambda_i)`.
///
/// They satisfy `sum beta_i = 1` and `sum beta_i lambda_i^k = 0` for
/// `k = 1 .. len - 1`, which cancels the error expansion order by order.
pub fn richardson_coefficients(lambdas: &[f64]) -> Result<Vec<f64>, BaselineError> {
    if lambdas.len() < 2 {
        return Err(BaselineError::TooFew { needed: 2, got: lambdas.len() });
    }
    for (i, &li) in lambdas.iter().enumerate() {
        for &lj in &lambdas[i + 1..] {
            if (li - lj).abs() < 1e-12 {
                return Err(BaselineError::DuplicateLambda(li));
            }
        }
    }
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            lambdas
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &lj)| lj / (lj - li))
                .product()
        })
        .collect())
}

/// Extrapolates scalar estimates measured at the given scale factors to
/// zero noise.
pub fn extrapolate_zero_noise(lambdas: &[f64], values: &[f64]) -> Result<f64, BaselineError> {
    if lambdas.len() != values.len() {
        return Err(BaselineError::LengthMismatch(lambdas.len(), values.len()));
    }
    let beta = richardson_coefficients(lambdas)?;
    Ok(beta.iter().zip(values).map(|(b, v)| b * v).sum())
}

/// The operator the extrapolated estimates implicitly refer to:
/// `sum beta_i rho_i`. Unit trace by construction, but not necessarily
/// positive; the returned state's `is_physical` flag records that.
pub fn extrapolated_effective_state(
    lambdas: &[f64],
    states: &[DensityMatrix],
) -> Result<DensityMatrix, BaselineError> {
    if lambdas.len() != states.len() {
        return Err(BaselineError::LengthMismatch(lambdas.len(), states.len()));
    }
    let beta = richardson_coefficients(lambdas)?;
    let n = states[0].n_qubits();
    let dim = states[0].dim();
    assert!(
        states.iter().all(|s| s.dim() == dim),
        "extrapolated states must share one register size"
    );
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (b, s) in beta.iter().zip(states) {
        m = m.add(&s.matrix().scale(Complex64::new(*b, 0.0)));
    }
    // Convex-affine combination of Hermitian unit-trace matrices stays
    // Hermitian unit-trace, so only positivity can fail and that is a flag.
    let state = DensityMatrix::from_matrix(n, m)
        .expect("affine combination of states stays Hermitian with unit trace");
    Ok(state)
}

/// Protocol for an imperfect-control extrapolation experiment: nominal
/// noise scale factors, the error unit they multiply, the relative control
/// fluctuation, and how many noisy state sets to generate.
#[derive(Debug, Clone)]
pub struct ExtrapolationSpec {
    pub lambdas: Vec<f64>,
    pub epsilon: f64,
    pub sigma: f64,
    pub trials: usize,
}

impl ExtrapolationSpec {
    pub fn new(
        lambdas: Vec<f64>,
        epsilon: f64,
        sigma: f64,
        trials: usize,
    ) -> Result<Self, BaselineError> {
        if lambdas.len() < 2 {
            return Err(BaselineError::TooFew { needed: 2, got: lambdas.len() });
        }
        for (i, &li) in lambdas.iter().enumerate() {
            for &lj in &lambdas[i + 1..] {
                if (li - lj).abs() < 1e-12 {
                    return Err(BaselineError::DuplicateLambda(li));
                }
            }
        }
        if !(epsilon > 0.0) || !(sigma >= 0.0) {
            return Err(BaselineError::InvalidSpec(format!(
                "error unit {epsilon} must be positive and fluctuation {sigma} nonnegative"
            )));
        }
        if trials < 1 {
            return Err(BaselineError::InvalidSpec("need at least one trial".into()));
        }
        Ok(ExtrapolationSpec { lambdas, epsilon, sigma, trials })
    }
}

/// Draws imperfect noise scale factors: `hat(lambda)_i` is normal with
/// mean `lambda_i` and variance `lambda_i * epsilon * sigma^2`, floored at
/// zero so the resulting noise strength stays meaningful. The
/// extrapolation keeps using the nominal factors; only the prepared states
/// see the perturbed ones.
pub fn sample_noisy_lambdas(spec: &ExtrapolationSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    use rand_distr::{Distribution, Normal};
    spec.lambdas
        .iter()
        .map(|&l| {
            let sd = (l * spec.epsilon).sqrt() * spec.sigma;
            if sd == 0.0 {
                return l;
            }
            let draw = Normal::new(l, sd).expect("valid normal").sample(rng);
            draw.max(0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::build_tfi_hamiltonian;
    use rand::{Rng, SeedableRng};

    #[test]
    fn richardson_reference_coefficient_sets() {
        let b2 = richardson_coefficients(&[1.0, 2.0]).unwrap();
        assert_eq!(b2, vec![2.0, -1.0]);
        let b3 = richardson_coefficients(&[1.0, 2.0, 3.0]).unwrap();
        for (got, want) in b3.iter().zip([3.0, -3.0, 1.0]) {
            assert!((got - want).abs() < 1e-12, "coefficients {b3:?}");
        }
    }

    #[test]
    fn richardson_identities_on_random_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let len = rng.gen_range(2..=6);
            let mut lambdas: Vec<f64> = Vec::new();
            while lambdas.len() < len {
                let cand = rng.gen::<f64>() * 4.0 + 0.2;
                if lambdas.iter().all(|l| (l - cand).abs() > 0.05) {
                    lambdas.push(cand);
                }
            }
            let beta = richardson_coefficients(&lambdas).unwrap();
            let total: f64 = beta.iter().sum();
            assert!((total - 1.0).abs() < 1e-10, "sum {total} for {lambdas:?}");
            for k in 1..len {
                let moment: f64 =
                    beta.iter().zip(&lambdas).map(|(b, l)| b * l.powi(k as i32)).sum();
                assert!(moment.abs() < 1e-9, "moment k={k} is {moment} for {lambdas:?}");
            }
        }
    }

    #[test]
    fn richardson_rejects_duplicates() {
        assert!(matches!(
            richardson_coefficients(&[1.0, 1.0, 2.0]),
            Err(BaselineError::DuplicateLambda(_))
        ));
    }

    #[test]
    fn vd_energy_two_level_closed_form() {
        // rho = p |0><0| + q |1><1| on one qubit, H = Z: E^(m) known exactly
        let p = 0.8;
        let q = 0.2;
        let mut m = ComplexMatrix::zeros(2, 2);
        m.set(0, 0, Complex64::new(p, 0.0));
        m.set(1, 1, Complex64::new(q, 0.0));
        let rho = DensityMatrix::from_matrix(1, m).unwrap();
        let h = PauliHamiltonian::new(
            1,
            vec![(1.0, crate::pauli::PauliString::single(1, 0, crate::pauli::Pauli::Z))],
        );
        for order in 1..=5 {
            let expect = (p.powi(order) - q.powi(order)) / (p.powi(order) + q.powi(order));
            let got = vd_energy(&rho, order as usize, &h).energy;
            assert!((got - expect).abs() < 1e-12, "order {order}: {got} vs {expect}");
        }
    }

    #[test]
    fn distillation_approaches_dominant_vector_energy() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let circuit = crate::ansatz::AnsatzCircuit::hardware_efficient(2, 2);
        let opt = crate::variational::optimize_vqe(&h, &circuit, 1);
        let rho = circuit
            .clone()
            .with_parameters(&opt.parameters)
            .with_noise_budget(1.0)
            .prepare(0);
        let e_dom = dominant_vector_energy(&rho, &h);
        let e8 = vd_energy(&rho, 8, &h).energy;
        let e2 = vd_energy(&rho, 2, &h).energy;
        assert!(
            (e8 - e_dom).abs() < (e2 - e_dom).abs(),
            "higher power converges toward the dominant energy"
        );
        assert!((e8 - e_dom).abs() < 1e-3, "order 8 close to the fixed point: {e8} vs {e_dom}");
    }

    #[test]
    fn coherent_mismatch_vanishes_for_pure_ideal() {
        let rho = DensityMatrix::pure_basis(2, 1);
        let mut ideal = vec![Complex64::new(0.0, 0.0); 4];
        ideal[1] = Complex64::new(1.0, 0.0);
        assert!(coherent_mismatch(&rho, &ideal).abs() < 1e-12);
    }

    #[test]
    fn extrapolated_state_keeps_trace_but_may_lose_positivity() {
        // two diagonal states whose linear extrapolation dips negative
        let mk = |p: f64| {
            let mut m = ComplexMatrix::zeros(2, 2);
            m.set(0, 0, Complex64::new(p, 0.0));
            m.set(1, 1, Complex64::new(1.0 - p, 0.0));
            DensityMatrix::from_matrix(1, m).unwrap()
        };
        let states = [mk(0.95), mk(0.85)];
        let ex = extrapolated_effective_state(&[1.0, 2.0], &states).unwrap();
        assert!((ex.trace().re - 1.0).abs() < 1e-12, "unit trace preserved");
        // beta = (2, -1): top population 2*0.95 - 0.85 = 1.05 > 1
        assert!(!ex.is_physical(), "extrapolation overshoots physicality");
    }

    #[test]
    fn noisy_lambdas_are_deterministic_centered_and_scaled() {
        let spec = ExtrapolationSpec::new(vec![1.0, 2.0, 3.0], 1.0, 0.1, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = sample_noisy_lambdas(&spec, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let b = sample_noisy_lambdas(&spec, &mut rng);
        assert_eq!(a, b, "same seed, same draws");

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 20_000;
        let mut sum = [0.0f64; 3];
        let mut sum_sq = [0.0f64; 3];
        for _ in 0..trials {
            let draw = sample_noisy_lambdas(&spec, &mut rng);
            for k in 0..3 {
                sum[k] += draw[k];
                sum_sq[k] += draw[k] * draw[k];
            }
        }
        for k in 0..3 {
            let l = spec.lambdas[k];
            let mean = sum[k] / trials as f64;
            let var = sum_sq[k] / trials as f64 - mean * mean;
            let want_var = l * spec.epsilon * spec.sigma * spec.sigma;
            let sd_of_mean = (want_var / trials as f64).sqrt();
            assert!((mean - l).abs() < 3.0 * sd_of_mean, "mean {mean} vs nominal {l}");
            assert!(
                (var - want_var).abs() < 0.05 * want_var,
                "variance {var} vs prescribed {want_var}"
            );
        }
    }

    #[test]
    fn noisy_lambdas_never_go_negative() {
        // a fluctuation large against the scale factors drives raw draws
        // negative; the sampler floors them at zero
        let spec = ExtrapolationSpec::new(vec![0.05, 0.1], 1.0, 5.0, 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut floored = 0usize;
        for _ in 0..200 {
            let draw = sample_noisy_lambdas(&spec, &mut rng);
            assert!(draw.iter().all(|&l| l >= 0.0), "draw {draw:?}");
            floored += draw.iter().filter(|&&l| l == 0.0).count();
        }
        assert!(floored > 0, "the test regime should actually hit the floor");
    }

    #[test]
    fn spec_validation_rejects_bad_protocols() {
        assert!(matches!(
            ExtrapolationSpec::new(vec![1.0, 1.0], 1.0, 0.1, 1),
            Err(BaselineError::DuplicateLambda(_))
        ));
        assert!(matches!(
            ExtrapolationSpec::new(vec![1.0], 1.0, 0.1, 1),
            Err(BaselineError::TooFew { .. })
        ));
        assert!(matches!(
            ExtrapolationSpec::new(vec![1.0, 2.0], 1.0, 0.1, 0),
            Err(BaselineError::InvalidSpec(_))
        ));
        assert!(matches!(
            ExtrapolationSpec::new(vec![1.0, 2.0], 1.0, -0.1, 5),
            Err(BaselineError::InvalidSpec(_))
        ));
    }

    #[test]
    fn extrapolation_is_exact_on_matched_polynomials() {
        // degree len-1 polynomials are reproduced exactly; one degree
        // higher leaves the cubic coefficient times sum(beta lambda^3)
        let lambdas = [1.0, 1.7, 2.6];
        let poly = |l: f64| 0.4 - 0.9 * l + 0.3 * l * l;
        let values: Vec<f64> = lambdas.iter().map(|&l| poly(&l * 1.0)).collect();
        let got = extrapolate_zero_noise(&lambdas, &values).unwrap();
        assert!((got - 0.4).abs() < 1e-12, "quadratic intercept {got}");

        let cubic = 0.2;
        let values3: Vec<f64> = lambdas.iter().map(|&l| poly(l) + cubic * l * l * l).collect();
        let beta = richardson_coefficients(&lambdas).unwrap();
        let leakage: f64 = beta.iter().zip(&lambdas).map(|(b, l)| b * l * l * l).sum();
        let got3 = extrapolate_zero_noise(&lambdas, &values3).unwrap();
        assert!(
            (got3 - (0.4 + cubic * leakage)).abs() < 1e-12,
            "cubic residual {} vs predicted {}",
            got3 - 0.4,
            cubic * leakage
        );

        assert!(matches!(
            extrapolate_zero_noise(&lambdas, &values3[..2]),
            Err(BaselineError::LengthMismatch(3, 2))
        ));
    }

    #[test]
    fn distillation_error_shrinks_with_the_population_ratio() {
        // rho mixes three eigenstates of H with populations p0 > p1 > p2;
        // the distilled error above the dominant energy decays per extra
        // copy by about p1/p0 once p2 has washed out
        let h = build_tfi_hamiltonian(2, 1.0);
        let (_, vecs) = crate::linalg::hermitian_eig(&h.dense()).unwrap();
        let populations = [(0usize, 0.6), (1usize, 0.3), (2usize, 0.1)];
        let mut m = ComplexMatrix::zeros(4, 4);
        for (k, p) in populations {
            for i in 0..4 {
                for j in 0..4 {
                    m.add_to(i, j, vecs.get(i, k) * vecs.get(j, k).conj() * p);
                }
            }
        }
        let rho = DensityMatrix::from_matrix(2, m).unwrap();
        let e_dom = dominant_vector_energy(&rho, &h);
        let err = |order: usize| (vd_energy(&rho, order, &h).energy - e_dom).abs();
        for order in [6usize, 7, 8] {
            let ratio = err(order + 1) / err(order);
            assert!(
                (ratio - 0.5).abs() < 0.05,
                "order {order}: error ratio {ratio} vs population ratio 0.5"
            );
        }
    }

    #[test]
    fn fault_expansion_beats_distilling_the_extrapolated_state() {
        // when the extrapolated combination happens to stay physical, the
        // expansion over the same noisy states reaches at least as low an
        // energy as squaring the extrapolated state
        let h = build_tfi_hamiltonian(2, 1.0);
        let circuit = crate::ansatz::AnsatzCircuit::hardware_efficient(2, 2);
        let opt = crate::variational::optimize_vqe(&h, &circuit, 3);
        let configured = circuit.with_parameters(&opt.parameters);
        let lambdas = [1.0, 2.0];
        let epsilon = 0.05;
        let states: Vec<DensityMatrix> = lambdas
            .iter()
            .map(|l| configured.clone().with_noise_budget(l * epsilon).prepare(0))
            .collect();
        let ex = extrapolated_effective_state(&lambdas, &states).unwrap();
        assert!(ex.is_physical(), "small error unit keeps the combination physical");
        let distilled = vd_energy(&ex, 2, &h).energy;
        let (_, _, fault) = crate::gse::mitigate_ground(
            &crate::gse::SubspaceSpec::fault(),
            &states,
            &h,
            crate::gse::DEFAULT_METRIC_CUTOFF,
        )
        .unwrap();
        assert!(
            fault.energy <= distilled + 1e-9,
            "fault expansion {} vs distilled extrapolation {distilled}",
            fault.energy
        );
    }
}

//! Variational preparation of ground and excited states.
//!
//! Circuit parameters are optimized on the noiseless circuit; noise enters
//! later, when states are prepared for mitigation studies. Excited states
//! use the subspace-search strategy: one circuit, several mutually
//! orthogonal input states, and a weighted cost whose optimum maps the
//! inputs onto the lowest energy eigenstates in order.

use crate::ansatz::AnsatzCircuit;
use crate::pauli::PauliHamiltonian;
use crate::state::DensityMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Finite-difference step for gradients.
const FD_STEP: f64 = 1e-6;
/// Infinity-norm gradient threshold for declaring convergence.
const GRAD_TOL: f64 = 1e-6;
/// Hard cap on quasi-Newton iterations.
const MAX_ITERATIONS: usize = 5000;
/// Number of independent random restarts; the best final cost wins.
const MULTISTARTS: u64 = 4;

/// Weighted multi-state optimization problem.
#[derive(Debug, Clone)]
pub struct SsvqeProblem {
    pub hamiltonian: PauliHamiltonian,
    pub circuit: AnsatzCircuit,
    pub k_levels: usize,
}

impl SsvqeProblem {
    pub fn new(hamiltonian: PauliHamiltonian, circuit: AnsatzCircuit, k_levels: usize) -> Self {
        assert!(k_levels >= 1, "need at least one level");
        assert!(
            k_levels <= 1usize << circuit.n_qubits(),
            "cannot track more levels than basis states"
        );
        assert_eq!(hamiltonian.n_qubits(), circuit.n_qubits(), "width mismatch");
        Self { hamiltonian, circuit, k_levels }
    }

    /// Strictly decreasing positive level weights `w_k = (K - k + 1) / K`
    /// for `k = 1..K`.
    pub fn weights(&self) -> Vec<f64> {
        let k = self.k_levels as f64;
        (1..=self.k_levels).map(|j| (k - j as f64 + 1.0) / k).collect()
    }

    /// The `K` computational input states: lowest Hamming weight first,
    /// ties in ascending index order.
    pub fn initial_states(&self) -> Vec<usize> {
        let dim = 1usize << self.circuit.n_qubits();
        let mut indices: Vec<usize> = (0..dim).collect();
        indices.sort_by_key(|&b| (b.count_ones(), b));
        indices.truncate(self.k_levels);
        indices
    }
}

/// Result of a parameter optimization, serializable for reuse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizedParameters {
    pub parameters: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    pub n_qubits: usize,
    pub depth: usize,
    pub k_levels: usize,
    pub seed: u64,
}

impl OptimizedParameters {
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("plain-old-data serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }
}

/// Minimizes the weighted level cost for `problem`, restarting from
/// `MULTISTARTS` random initializations derived from `seed` and keeping the
/// best result. Deterministic for a fixed seed.
pub fn optimize_ssvqe(problem: &SsvqeProblem, seed: u64) -> OptimizedParameters {
    let weights = problem.weights();
    let initials = problem.initial_states();
    let template = problem.circuit.clone().with_p_dep(0.0);
    let hamiltonian = problem.hamiltonian.clone();

    let cost = move |params: &[f64]| -> f64 {
        let circuit = template.clone().with_parameters(params);
        initials
            .iter()
            .zip(&weights)
            .map(|(&b, &w)| w * circuit.prepare(b).expectation_hamiltonian(&hamiltonian))
            .sum()
    };

    let n_params = problem.circuit.parameter_count();
    let mut best: Option<(Vec<f64>, f64, usize, bool, u64)> = None;
    for start in 0..MULTISTARTS {
        let start_seed = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(start);
        let mut rng = ChaCha8Rng::seed_from_u64(start_seed);
        let x0: Vec<f64> =
            (0..n_params).map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI)).collect();
        let run = minimize_bfgs(&cost, &x0, MAX_ITERATIONS, GRAD_TOL);
        let better = match &best {
            None => true,
            Some((_, c, _, _, _)) => run.cost < *c,
        };
        if better {
            best = Some((run.parameters, run.cost, run.iterations, run.converged, start_seed));
        }
    }
    let (parameters, cost_val, iterations, converged, _) = best.expect("at least one start");
    OptimizedParameters {
        parameters,
        cost: cost_val,
        iterations,
        converged,
        n_qubits: problem.circuit.n_qubits(),
        depth: problem.circuit.depth(),
        k_levels: problem.k_levels,
        seed,
    }
}

/// Ground-state-only convenience wrapper (one level, weight 1).
pub fn optimize_vqe(
    hamiltonian: &PauliHamiltonian,
    circuit: &AnsatzCircuit,
    seed: u64,
) -> OptimizedParameters {
    let problem = SsvqeProblem::new(hamiltonian.clone(), circuit.clone(), 1);
    optimize_ssvqe(&problem, seed)
}

/// Noiseless energies of the optimized levels, in input-state order.
pub fn level_energies(
    problem: &SsvqeProblem,
    params: &OptimizedParameters,
) -> Vec<f64> {
    let circuit = problem.circuit.clone().with_p_dep(0.0).with_parameters(&params.parameters);
    problem
        .initial_states()
        .iter()
        .map(|&b| circuit.prepare(b).expectation_hamiltonian(&problem.hamiltonian))
        .collect()
}

/// Prepares one noisy state per requested budget level, reusing the same
/// optimized parameters. `levels` are expected fault counts per run; each
/// maps to its own `p_dep`.
pub fn generate_noisy_family(
    circuit: &AnsatzCircuit,
    parameters: &[f64],
    initial: usize,
    levels: &[f64],
) -> Vec<DensityMatrix> {
    levels
        .iter()
        .map(|&n_tot| {
            circuit
                .clone()
                .with_parameters(parameters)
                .with_noise_budget(n_tot)
                .prepare(initial)
        })
        .collect()
}

struct BfgsRun {
    parameters: Vec<f64>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn gradient(f: &(impl Fn(&[f64]) -> f64 + Sync), x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .into_par_iter()
        .map(|i| {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[i] += FD_STEP;
            minus[i] -= FD_STEP;
            (f(&plus) - f(&minus)) / (2.0 * FD_STEP)
        })
        .collect()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Dense BFGS with Armijo backtracking. Dimensions stay near a hundred, so
/// the explicit inverse-Hessian update is fine.
fn minimize_bfgs(
    f: &(impl Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    max_iterations: usize,
    grad_tol: f64,
) -> BfgsRun {
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = gradient(f, &x);
    let mut h_inv = vec![0.0f64; n * n];
    let reset = |h: &mut Vec<f64>| {
        h.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..n {
            h[i * n + i] = 1.0;
        }
    };
    reset(&mut h_inv);

    let mut iterations = 0usize;
    let mut converged = norm_inf(&g) <= grad_tol;
    while !converged && iterations < max_iterations {
        iterations += 1;
        // d = -H_inv g
        let mut d = vec![0.0f64; n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += h_inv[i * n + j] * g[j];
            }
            d[i] = -acc;
        }
        let mut slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            // not a descent direction; fall back to steepest descent
            for i in 0..n {
                d[i] = -g[i];
            }
            slope = -g.iter().map(|v| v * v).sum::<f64>();
            reset(&mut h_inv);
        }

        // Armijo backtracking
        let mut t = 1.0f64;
        let c1 = 1e-4;
        let mut accepted = false;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..40 {
            for i in 0..n {
                x_new[i] = x[i] + t * d[i];
            }
            f_new = f(&x_new);
            if f_new <= fx + c1 * t * slope {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // no progress possible along this direction at any tried step
            break;
        }

        let g_new = gradient(f, &x_new);
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            // standard inverse-Hessian BFGS update
            let rho = 1.0 / sy;
            let mut hy = vec![0.0f64; n];
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += h_inv[i * n + j] * y[j];
                }
                hy[i] = acc;
            }
            let yhy: f64 = y.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[i * n + j] += (1.0 + rho * yhy) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        } else {
            reset(&mut h_inv);
        }

        x = x_new;
        fx = f_new;
        g = g_new;
        converged = norm_inf(&g) <= grad_tol;
    }

    BfgsRun { parameters: x, cost: fx, iterations, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::build_tfi_hamiltonian;

    #[test]
    fn weights_are_strictly_decreasing_and_positive() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let c = AnsatzCircuit::hardware_efficient(2, 1);
        let p = SsvqeProblem::new(h, c, 4);
        let w = p.weights();
        assert_eq!(w.len(), 4);
        assert!((w[0] - 1.0).abs() < 1e-15, "first weight is 1");
        for k in 1..w.len() {
            assert!(w[k] < w[k - 1] && w[k] > 0.0, "weights {w:?}");
        }
    }

    #[test]
    fn initial_states_sort_by_hamming_weight_then_index() {
        let h = build_tfi_hamiltonian(4, 1.0);
        let c = AnsatzCircuit::hardware_efficient(4, 1);
        let p = SsvqeProblem::new(h, c, 6);
        assert_eq!(p.initial_states(), vec![0, 1, 2, 4, 8, 3]);
    }

    #[test]
    fn bfgs_minimizes_a_quadratic_bowl() {
        let f = |x: &[f64]| (x[0] - 2.0).powi(2) + 3.0 * (x[1] + 1.0).powi(2) + 5.0;
        let run = minimize_bfgs(&f, &[7.0, 7.0], 200, 1e-8);
        assert!(run.converged, "quadratic must converge");
        assert!((run.parameters[0] - 2.0).abs() < 1e-6);
        assert!((run.parameters[1] + 1.0).abs() < 1e-6);
        assert!((run.cost - 5.0).abs() < 1e-10);
    }

    #[test]
    fn vqe_reaches_two_site_ground_energy() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let c = AnsatzCircuit::hardware_efficient(2, 2);
        let opt = optimize_vqe(&h, &c, 1);
        let exact = -(5.0f64.sqrt());
        assert!(
            (opt.cost - exact).abs() < 1e-6,
            "VQE energy {} vs exact {exact}",
            opt.cost
        );
    }

    #[test]
    fn ssvqe_resolves_the_lowest_two_levels() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let c = AnsatzCircuit::hardware_efficient(2, 3);
        let p = SsvqeProblem::new(h.clone(), c, 2);
        let opt = optimize_ssvqe(&p, 3);
        let energies = level_energies(&p, &opt);
        let exact = h.exact_eigenvalues();
        assert!((energies[0] - exact[0]).abs() < 1e-4, "ground {} vs {}", energies[0], exact[0]);
        assert!((energies[1] - exact[1]).abs() < 1e-4, "first excited {} vs {}", energies[1], exact[1]);
    }

    #[test]
    fn optimization_is_deterministic_per_seed() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let c = AnsatzCircuit::hardware_efficient(2, 1);
        let a = optimize_vqe(&h, &c, 9);
        let b = optimize_vqe(&h, &c, 9);
        assert_eq!(a.parameters, b.parameters, "same seed, same parameters");
        assert_eq!(a.cost, b.cost);
    }

    #[test]
    fn parameters_round_trip_through_text() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let c = AnsatzCircuit::hardware_efficient(2, 1);
        let opt = optimize_vqe(&h, &c, 5);
        let text = opt.to_toml();
        let back = OptimizedParameters::from_toml(&text).unwrap();
        assert_eq!(opt.parameters, back.parameters);
        assert_eq!(opt.cost, back.cost);
        assert_eq!(opt.k_levels, back.k_levels);
    }

    #[test]
    fn noisy_family_scales_with_budget() {
        let h = build_tfi_hamiltonian(2, 1.0);
        let c = AnsatzCircuit::hardware_efficient(2, 2);
        let opt = optimize_vqe(&h, &c, 1);
        let family = generate_noisy_family(&c, &opt.parameters, 0, &[0.5, 1.0, 2.0]);
        assert_eq!(family.len(), 3);
        // more faults, less purity
        assert!(family[0].purity() > family[1].purity());
        assert!(family[1].purity() > family[2].purity());
        // energies deteriorate monotonically toward the mixed-state value
        let e: Vec<f64> = family.iter().map(|r| r.expectation_hamiltonian(&h)).collect();
        assert!(e[0] < e[1] && e[1] < e[2], "energies {e:?}");
    }
}

//! Acceptance gate: eleven end-to-end criteria covering physicality of the
//! realized states, dominance and suppression orderings, robustness to
//! imperfect noise control, shot-noise trade-offs, and oracle agreement for
//! the closed-form estimators. Each test prints one `PASS` line with its
//! measured margins; run with `--nocapture` to see them.

use num_complex::Complex64;
use qem_core::ansatz::{AnsatzCircuit, EntanglerLayout};
use qem_core::baselines::{
    extrapolate_zero_noise, extrapolated_effective_state, richardson_coefficients,
    sample_noisy_lambdas, vd_energy, ExtrapolationSpec,
};
use qem_core::gse::{
    admissible_vd_orders, mitigate_ground, GeneralBase, SubspaceSpec, DEFAULT_METRIC_CUTOFF,
};
use qem_core::linalg::{self, ComplexMatrix};
use qem_core::pauli::{build_tfi_hamiltonian, Pauli, PauliHamiltonian, PauliString};
use qem_core::shot_noise::{
    cyclic_shift_identity_check, estimate_with_shot_noise, explicit_chain_moments,
    predict_first_order_shift, single_shot_variance_fault, single_shot_variance_general,
    single_shot_variance_power, vd_energy_with_shot_noise, vd_quantity_count, ShotBudget,
};
use qem_core::state::DensityMatrix;
use qem_core::variational::{generate_noisy_family, optimize_vqe};
use qem_core::SelectionMode;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

const N_QUBITS: usize = 4;
const FIELD: f64 = 1.0;

/// Shared expensive state: the test Hamiltonian, its exact ground data, and
/// optimized circuits at the two depths the criteria use.
struct Fixture {
    h: PauliHamiltonian,
    exact: f64,
    ground: Vec<Complex64>,
    deep: AnsatzCircuit,
    shallow: AnsatzCircuit,
}

fn fixture() -> &'static Fixture {
    static FIX: OnceLock<Fixture> = OnceLock::new();
    FIX.get_or_init(|| {
        let h = build_tfi_hamiltonian(N_QUBITS, FIELD);
        let exact = h.exact_ground_energy();
        let (_, vectors) = linalg::hermitian_eig(&h.dense()).expect("Hermitian Hamiltonian");
        let ground = (0..vectors.rows()).map(|i| vectors.get(i, 0)).collect();

        let deep_template =
            AnsatzCircuit::with_layout(N_QUBITS, 6, EntanglerLayout::Brickwork);
        let deep_opt = optimize_vqe(&h, &deep_template, 11);
        let deep = deep_template.clone().with_parameters(&deep_opt.parameters);

        let shallow_template =
            AnsatzCircuit::with_layout(N_QUBITS, 3, EntanglerLayout::Brickwork);
        let shallow_opt = optimize_vqe(&h, &shallow_template, 5);
        let shallow = shallow_template.clone().with_parameters(&shallow_opt.parameters);

        Fixture { h, exact, ground, deep, shallow }
    })
}

/// Squared overlap of a (possibly unphysical) state with a pure reference.
fn fidelity_with_pure(state: &ComplexMatrix, psi: &[Complex64]) -> f64 {
    let d = psi.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            acc += psi[i].conj() * state.get(i, j) * psi[j];
        }
    }
    acc.re
}

/// Random full-rank mixed state: random spectrum under a random eigenbasis.
fn random_mixed_state(rng: &mut ChaCha8Rng, n_qubits: usize) -> DensityMatrix {
    let dim = 1usize << n_qubits;
    let raw = random_hermitian(rng, dim, 1.0);
    let (_, basis) = linalg::hermitian_eig(&raw).expect("random Hermitian");
    let mut weights: Vec<f64> = (0..dim).map(|_| -rng.gen_range(0.001f64..1.0).ln()).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let mut m = ComplexMatrix::zeros(dim, dim);
    for (k, w) in weights.iter().enumerate() {
        for i in 0..dim {
            for j in 0..dim {
                let v = basis.get(i, k) * basis.get(j, k).conj() * w;
                m.set(i, j, m.get(i, j) + v);
            }
        }
    }
    DensityMatrix::from_matrix(n_qubits, m).expect("unit-trace PSD construction")
}

fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(dim, dim);
    for i in 0..dim {
        m.set(i, i, Complex64::new(rng.gen_range(-scale..scale), 0.0));
        for j in (i + 1)..dim {
            let v = Complex64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            m.set(i, j, v);
            m.set(j, i, v.conj());
        }
    }
    m
}

/// Borrowed-view adapter for the explicit tensor-product oracle.
fn chain_moments(states: &[DensityMatrix], groups: &[ComplexMatrix]) -> (f64, f64) {
    let state_refs: Vec<&ComplexMatrix> = states.iter().map(|s| s.matrix()).collect();
    let group_refs: Vec<&ComplexMatrix> = groups.iter().collect();
    explicit_chain_moments(&state_refs, &group_refs)
}

fn random_pauli_string(rng: &mut ChaCha8Rng, n_qubits: usize) -> PauliString {
    loop {
        let axes: Vec<Pauli> = (0..n_qubits)
            .map(|_| match rng.gen_range(0..4) {
                0 => Pauli::I,
                1 => Pauli::X,
                2 => Pauli::Y,
                _ => Pauli::Z,
            })
            .collect();
        let s = PauliString::new(axes);
        if !s.is_identity() {
            return s;
        }
    }
}

#[test]
fn criterion_01_realized_states_are_physical() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC01);
    let mut worst_eig = f64::INFINITY;
    let mut worst_trace = 0.0f64;

    for trial in 0..200u64 {
        let n = 2 + (trial as usize) % 3;
        let h = build_tfi_hamiltonian(n, FIELD);
        let circuit = AnsatzCircuit::hardware_efficient(n, 2);
        let params: Vec<f64> = (0..circuit.parameter_count())
            .map(|_| rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
            .collect();
        let p_dep = rng.gen_range(0.02f64..0.10);
        let prepared = circuit.clone().with_parameters(&params).with_p_dep(p_dep);

        let spec = match trial % 3 {
            0 => SubspaceSpec::power(1 + (trial as usize / 3) % 6),
            1 => SubspaceSpec::power_plus(1 + (trial as usize / 3) % 6),
            _ => SubspaceSpec::fault(),
        };
        let family: Vec<DensityMatrix> = if matches!(trial % 3, 2) {
            let levels = 2 + (trial as usize / 7) % 3;
            (1..=levels)
                .map(|k| prepared.clone().with_p_dep(p_dep * k as f64).prepare(0))
                .collect()
        } else {
            vec![prepared.prepare(0)]
        };

        let (sub, _, result) = mitigate_ground(&spec, &family, &h, DEFAULT_METRIC_CUTOFF)
            .unwrap_or_else(|e| panic!("trial {trial}: mitigation failed: {e}"));
        let realized = result
            .with_realized_state(&sub)
            .unwrap_or_else(|e| panic!("trial {trial}: realization failed: {e}"));
        let rho_em = realized.rho_em.as_ref().expect("realized state present");

        let min_eig = rho_em.min_eigenvalue();
        let trace_dev = (rho_em.trace().re - 1.0).abs();
        assert!(min_eig >= -1e-9, "trial {trial}: min eigenvalue {min_eig:e} below -1e-9");
        assert!(trace_dev <= 1e-9, "trial {trial}: trace deviation {trace_dev:e} above 1e-9");
        worst_eig = worst_eig.min(min_eig);
        worst_trace = worst_trace.max(trace_dev);
    }

    println!(
        "acceptance 01 physicality: PASS  200 specs, worst min eigenvalue {worst_eig:.2e}, \
         worst |trace-1| {worst_trace:.2e}  ({:.2} s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_02_power_subspace_dominates_distillation() {
    let start = Instant::now();
    let fix = fixture();
    let rho = fix.deep.clone().with_noise_budget(1.5).prepare(0);

    let mut worst_margin = f64::NEG_INFINITY;
    for m in 2..=8usize {
        let (_, _, result) = mitigate_ground(
            &SubspaceSpec::power(m),
            std::slice::from_ref(&rho),
            &fix.h,
            DEFAULT_METRIC_CUTOFF,
        )
        .expect("power subspace assembles");
        let best_vd = admissible_vd_orders(m)
            .into_iter()
            .map(|k| vd_energy(&rho, k, &fix.h).energy)
            .fold(f64::INFINITY, f64::min)
            .min(f64::INFINITY);
        let margin = result.energy - best_vd;
        assert!(
            margin <= 1e-9,
            "m={m}: subspace energy {:.12} exceeds best distilled energy {best_vd:.12}",
            result.energy
        );
        worst_margin = worst_margin.max(margin);
    }

    println!(
        "acceptance 02 power dominance: PASS  m=2..8, worst margin {worst_margin:.2e} \
         (tolerance 1e-9)  ({:.2} s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_03_error_suppression_is_monotone_and_ordered() {
    let start = Instant::now();
    let fix = fixture();
    let rho = fix.deep.clone().with_noise_budget(1.5).prepare(0);
    let family = [rho.clone()];

    // The default metric cutoff guards sampled moment matrices against shot
    // noise. Here the moments are exact, and a loose cutoff lets directions
    // near the threshold flicker in and out between consecutive orders,
    // breaking the nesting that makes the error monotone. Keep everything
    // numerically meaningful instead.
    let cutoff = 1e-12;
    let slack = 1e-10;
    let mut vd_err = Vec::new();
    let mut gse_err = Vec::new();
    let mut plus_err = Vec::new();
    for m in 1..=8usize {
        vd_err.push((vd_energy(&rho, m, &fix.h).energy - fix.exact).abs());
        let (_, _, gse) = mitigate_ground(&SubspaceSpec::power(m), &family, &fix.h, cutoff)
            .expect("power subspace assembles");
        gse_err.push((gse.energy - fix.exact).abs());
        let (_, _, plus) = mitigate_ground(&SubspaceSpec::power_plus(m), &family, &fix.h, cutoff)
            .expect("augmented subspace assembles");
        plus_err.push((plus.energy - fix.exact).abs());
    }

    for (name, errs) in [("distilled", &vd_err), ("subspace", &gse_err), ("augmented", &plus_err)]
    {
        for m in 1..errs.len() {
            assert!(
                errs[m] <= errs[m - 1] + slack,
                "{name} error rises from {:.3e} at m={} to {:.3e} at m={}",
                errs[m - 1],
                m,
                errs[m],
                m + 1
            );
        }
    }
    for m in 0..8 {
        assert!(
            gse_err[m] <= vd_err[m] + slack,
            "m={}: subspace error {:.3e} above distilled {:.3e}",
            m + 1,
            gse_err[m],
            vd_err[m]
        );
        assert!(
            plus_err[m] <= gse_err[m] + slack,
            "m={}: augmented error {:.3e} above plain subspace {:.3e}",
            m + 1,
            plus_err[m],
            gse_err[m]
        );
    }

    println!(
        "acceptance 03 suppression: PASS  m=1..8 errors distilled {:.1e}->{:.1e}, \
         subspace {:.1e}->{:.1e}, augmented {:.1e}->{:.1e}  ({:.2} s)",
        vd_err[0],
        vd_err[7],
        gse_err[0],
        gse_err[7],
        plus_err[0],
        plus_err[7],
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_04_augmentation_beats_the_algorithmic_floor() {
    let start = Instant::now();
    let fix = fixture();
    let noiseless = fix.shallow.clone().with_p_dep(0.0).prepare(0);
    let floor = (noiseless.expectation_hamiltonian(&fix.h) - fix.exact).abs();
    assert!(floor > 1e-6, "shallow circuit converged too well (floor {floor:.3e}) to test");

    let mut plateau = Vec::new();
    for n_tot in [1e-2, 1e-3] {
        let rho = fix.shallow.clone().with_noise_budget(n_tot).prepare(0);
        let vd_err = (vd_energy(&rho, 2, &fix.h).energy - fix.exact).abs();
        assert!(
            vd_err >= floor / 2.0 && vd_err <= floor * 2.0,
            "n_tot={n_tot:.0e}: distilled error {vd_err:.3e} not within factor 2 of the \
             noiseless floor {floor:.3e}"
        );
        plateau.push(vd_err);
    }

    let rho = fix.shallow.clone().with_noise_budget(1e-3).prepare(0);
    let (_, _, plus) = mitigate_ground(
        &SubspaceSpec::power_plus(2),
        std::slice::from_ref(&rho),
        &fix.h,
        DEFAULT_METRIC_CUTOFF,
    )
    .expect("augmented subspace assembles");
    let plus_err = (plus.energy - fix.exact).abs();
    assert!(
        plus_err * 10.0 <= plateau[1],
        "augmented error {plus_err:.3e} is not 10x below the distillation plateau {:.3e}",
        plateau[1]
    );

    println!(
        "acceptance 04 algorithmic floor: PASS  noiseless error {floor:.2e}, distillation \
         plateau {:.2e}, augmented error {plus_err:.2e} ({:.0}x below)  ({:.2} s)",
        plateau[1],
        plateau[1] / plus_err,
        start.elapsed().as_secs_f64()
    );
}

/// Criterion-5 trial set, shared with criterion 10: per trial, realized
/// stretch factors, the fault-subspace result, the distill-then-extrapolate
/// estimate, and the squared overlaps of both effective states with the
/// exact ground state.
struct FaultTrials {
    gse_energies: Vec<f64>,
    extrap_energies: Vec<f64>,
    gse_fidelities: Vec<f64>,
    extrap_fidelities: Vec<f64>,
}

fn fault_trials() -> &'static FaultTrials {
    static TRIALS: OnceLock<FaultTrials> = OnceLock::new();
    TRIALS.get_or_init(|| {
        let fix = fixture();
        let epsilon = 1.5;
        let lambdas = vec![1.0, 2.0, 3.0];
        let spec = ExtrapolationSpec::new(lambdas.clone(), epsilon, 0.1, 200)
            .expect("valid protocol");

        let mut out = FaultTrials {
            gse_energies: Vec::new(),
            extrap_energies: Vec::new(),
            gse_fidelities: Vec::new(),
            extrap_fidelities: Vec::new(),
        };
        for trial in 0..spec.trials as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(0xFA170000 + trial);
            let realized = sample_noisy_lambdas(&spec, &mut rng);
            let budgets: Vec<f64> = realized.iter().map(|l| l * epsilon).collect();
            let states =
                generate_noisy_family(&fixture().deep, fixture().deep.parameters(), 0, &budgets);

            let (sub, _, result) =
                mitigate_ground(&SubspaceSpec::fault(), &states, &fix.h, DEFAULT_METRIC_CUTOFF)
                    .expect("fault subspace assembles");
            let realized_state = result
                .clone()
                .with_realized_state(&sub)
                .expect("fault state realizes")
                .rho_em
                .expect("realized state present");
            out.gse_energies.push(result.energy);
            out.gse_fidelities.push(fidelity_with_pure(realized_state.matrix(), &fix.ground));

            let distilled: Vec<f64> =
                states.iter().map(|s| vd_energy(s, 2, &fix.h).energy).collect();
            out.extrap_energies.push(
                extrapolate_zero_noise(&lambdas, &distilled).expect("distinct nominal factors"),
            );
            let effective = extrapolated_effective_state(&lambdas, &states)
                .expect("states share the register");
            out.extrap_fidelities.push(fidelity_with_pure(effective.matrix(), &fix.ground));
        }
        out
    })
}

fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[test]
fn criterion_05_fault_subspace_resists_imprecise_noise_control() {
    let start = Instant::now();
    let fix = fixture();
    let trials = fault_trials();

    let (gse_mean, gse_std) = mean_and_std(&trials.gse_energies);
    let (ex_mean, ex_std) = mean_and_std(&trials.extrap_energies);
    let gse_bias = (gse_mean - fix.exact).abs();
    let ex_bias = (ex_mean - fix.exact).abs();

    assert!(
        gse_std <= 0.2 * ex_std,
        "fault-subspace spread {gse_std:.3e} above 0.2x extrapolation spread {ex_std:.3e}"
    );
    assert!(
        gse_bias <= ex_bias,
        "fault-subspace bias {gse_bias:.3e} above extrapolation bias {ex_bias:.3e}"
    );

    println!(
        "acceptance 05 fault robustness: PASS  200 trials, std {gse_std:.2e} vs {ex_std:.2e} \
         ({:.3}x), bias {gse_bias:.2e} vs {ex_bias:.2e}  ({:.2} s)",
        gse_std / ex_std,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_06_extrapolation_coefficient_identities() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC06);
    let mut worst = 0.0f64;

    for trial in 0..100 {
        let size = rng.gen_range(2usize..=6);
        let lambdas: Vec<f64> =
            (1..=size).map(|i| i as f64 * rng.gen_range(0.95..1.05)).collect();
        let beta = richardson_coefficients(&lambdas).expect("distinct factors");

        let sum_dev = (beta.iter().sum::<f64>() - 1.0).abs();
        assert!(sum_dev <= 1e-10, "trial {trial}: sum residual {sum_dev:e}");
        worst = worst.max(sum_dev);
        for k in 1..size {
            let moment: f64 =
                beta.iter().zip(&lambdas).map(|(b, l)| b * l.powi(k as i32)).sum();
            assert!(
                moment.abs() <= 1e-10,
                "trial {trial}: order-{k} residual {moment:e} for factors {lambdas:?}"
            );
            worst = worst.max(moment.abs());
        }
    }

    let closed = richardson_coefficients(&[1.0, 2.0, 3.0]).expect("distinct factors");
    assert_eq!(closed, vec![3.0, -3.0, 1.0], "closed-form coefficients for (1, 2, 3)");

    println!(
        "acceptance 06 extrapolation identities: PASS  100 sets sizes 2..6, worst residual \
         {worst:.2e}; (1,2,3) -> (3,-3,1) exactly  ({:.2} s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_07_cyclic_shift_and_variance_oracles() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC07);
    let mut worst_shift = 0.0f64;
    let mut worst_var = 0.0f64;

    for &copies in &[2usize, 3] {
        for &n in &[1usize, 2] {
            for _ in 0..50 {
                let states: Vec<DensityMatrix> =
                    (0..copies).map(|_| random_mixed_state(&mut rng, n)).collect();
                let obs = random_pauli_string(&mut rng, n).dense();
                let dev = cyclic_shift_identity_check(&states, &obs);
                assert!(
                    dev <= 1e-10,
                    "copies={copies} n={n}: shift contraction deviates by {dev:e}"
                );
                worst_shift = worst_shift.max(dev);
            }
        }
    }

    // Closed-form variances against explicit tensor-product constructions.
    for &copies in &[2usize, 3] {
        for _ in 0..20 {
            let n = rng.gen_range(1usize..=2);
            let dim = 1usize << n;
            let h = build_tfi_hamiltonian(n, rng.gen_range(0.5..1.5));
            let identity = ComplexMatrix::identity(dim);

            // Identical-copy product words.
            let rho = random_mixed_state(&mut rng, n);
            let copies_vec = vec![rho.clone(); copies];
            let (num_closed, den_closed) = single_shot_variance_power(&rho, &h, copies);
            let mut num_explicit = 0.0;
            for (c, p) in h.terms() {
                let mut groups = vec![identity.clone(); copies];
                groups[0] = p.dense();
                let (mean, second) = chain_moments(&copies_vec, &groups);
                num_explicit += c * c * (second - mean * mean).max(0.0);
            }
            let groups = vec![identity.clone(); copies];
            let (mean, second) = chain_moments(&copies_vec, &groups);
            let den_explicit = (second - mean * mean).max(0.0);
            let num_dev = (num_closed - num_explicit).abs();
            let den_dev = (den_closed - den_explicit).abs();
            assert!(num_dev <= 1e-10, "copies={copies}: numerator variance off by {num_dev:e}");
            assert!(den_dev <= 1e-10, "copies={copies}: denominator variance off by {den_dev:e}");
            worst_var = worst_var.max(num_dev).max(den_dev);

            // Distinct-state pair words.
            if copies == 2 {
                let other = random_mixed_state(&mut rng, n);
                let (pair_num, pair_den) = single_shot_variance_fault(&rho, &other, &h);
                let pair_states = vec![rho.clone(), other.clone()];
                let mut pair_num_explicit = 0.0;
                for (c, p) in h.terms() {
                    let groups = vec![p.dense(), identity.clone()];
                    let (mean, second) = chain_moments(&pair_states, &groups);
                    pair_num_explicit += c * c * (second - mean * mean).max(0.0);
                }
                let groups = vec![identity.clone(), identity.clone()];
                let (mean, second) = chain_moments(&pair_states, &groups);
                let pair_den_explicit = (second - mean * mean).max(0.0);
                let num_dev = (pair_num - pair_num_explicit).abs();
                let den_dev = (pair_den - pair_den_explicit).abs();
                assert!(num_dev <= 1e-10, "pair numerator variance off by {num_dev:e}");
                assert!(den_dev <= 1e-10, "pair denominator variance off by {den_dev:e}");
                worst_var = worst_var.max(num_dev).max(den_dev);
            }

            // General chain words with random Pauli groups.
            let states: Vec<DensityMatrix> =
                (0..copies).map(|_| random_mixed_state(&mut rng, n)).collect();
            let qs: Vec<PauliString> =
                (0..copies).map(|_| random_pauli_string(&mut rng, n)).collect();
            let obs = random_pauli_string(&mut rng, n);
            let closed = single_shot_variance_general(&states, &qs, &obs);
            let mut groups: Vec<ComplexMatrix> = qs.iter().map(|q| q.dense()).collect();
            groups[0] = obs.dense().matmul(&groups[0]);
            let (mean, second) = chain_moments(&states, &groups);
            let dev = (closed - (second - mean * mean)).abs();
            assert!(dev <= 1e-10, "general chain variance off by {dev:e}");
            worst_var = worst_var.max(dev);
        }
    }

    println!(
        "acceptance 07 shift oracle: PASS  200 contractions (worst {worst_shift:.2e}), \
         closed-form variances vs explicit constructions (worst {worst_var:.2e})  ({:.2} s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_08_first_order_prediction_scales_quadratically() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC08);
    let mut checked = 0usize;
    let mut floored = 0usize;
    let mut instances = 0usize;

    while instances < 100 {
        let d = rng.gen_range(2usize..=4);
        let h0 = random_hermitian(&mut rng, d, 1.0);
        let c = random_hermitian(&mut rng, d, 1.0);
        let s0 = c.matmul(&c.adjoint()).scale(Complex64::new(1.0 / d as f64, 0.0)).add(
            &ComplexMatrix::identity(d).scale(Complex64::new(0.3, 0.0)),
        );
        let solution =
            linalg::solve_generalized_eig(&h0, &s0, DEFAULT_METRIC_CUTOFF).expect("PD metric");
        let t = 1e-3;
        let dh = random_hermitian(&mut rng, d, t);
        let ds = random_hermitian(&mut rng, d, t);
        let half_dh = dh.scale(Complex64::new(0.5, 0.0));
        let half_ds = ds.scale(Complex64::new(0.5, 0.0));
        let level = rng.gen_range(0..solution.kept_rank);

        let full = match predict_first_order_shift(&h0, &s0, &solution, &dh, &ds, level) {
            Ok(report) => report,
            Err(_) => continue,
        };
        let half = predict_first_order_shift(&h0, &s0, &solution, &half_dh, &half_ds, level)
            .expect("half-size perturbation solves");
        instances += 1;

        if full.remainder < 1e-13 || half.remainder < 1e-13 {
            floored += 1;
            continue;
        }
        let ratio = full.remainder / half.remainder;
        assert!(
            (2.0..=8.0).contains(&ratio),
            "instance {instances}: remainder ratio {ratio:.3} outside [2, 8] \
             (remainders {:.3e} vs {:.3e})",
            full.remainder,
            half.remainder
        );
        checked += 1;
    }
    assert!(checked >= 50, "only {checked} of 100 instances rose above the remainder floor");

    println!(
        "acceptance 08 perturbation scaling: PASS  100 instances, {checked} quadratic-ratio \
         checks in [2, 8], {floored} at the remainder floor  ({:.2} s)",
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_09_shot_noise_bias_variance_tradeoff() {
    let start = Instant::now();
    let fix = fixture();
    let rho = fix.deep.clone().with_noise_budget(1.5).prepare(0);
    let family = [rho.clone()];
    let total_shots = 1e7;
    let trials = 300;

    let vd_budget = ShotBudget::from_total(total_shots, vd_quantity_count(&fix.h, 2));
    let vd = vd_energy_with_shot_noise(&rho, 2, &fix.h, &vd_budget, trials, 0xAC09);

    let run = |spec: &SubspaceSpec| {
        let (_, mats, _) =
            mitigate_ground(spec, &family, &fix.h, DEFAULT_METRIC_CUTOFF).expect("assembles");
        let budget = ShotBudget::from_total(total_shots, mats.quantity_count);
        estimate_with_shot_noise(
            spec,
            &family,
            &fix.h,
            &budget,
            trials,
            SelectionMode::LowestEnergy,
            DEFAULT_METRIC_CUTOFF,
            0xAC09,
        )
        .expect("perturbed trials solve")
    };
    let gse = run(&SubspaceSpec::power(2));
    let plus = run(&SubspaceSpec::power_plus(2));

    let vd_bias = (vd.mean - fix.exact).abs();
    let gse_bias = (gse.mean - fix.exact).abs();
    let plus_bias = (plus.mean - fix.exact).abs();
    assert!(
        plus_bias <= 1.1 * gse_bias,
        "augmented bias {plus_bias:.3e} above plain subspace bias {gse_bias:.3e}"
    );
    assert!(
        gse_bias <= 1.1 * vd_bias,
        "subspace bias {gse_bias:.3e} above distilled bias {vd_bias:.3e}"
    );
    assert!(
        vd.std <= 1.1 * gse.std,
        "distilled spread {:.3e} above subspace spread {:.3e}",
        vd.std,
        gse.std
    );
    assert!(
        gse.std <= 1.1 * plus.std,
        "subspace spread {:.3e} above augmented spread {:.3e}",
        gse.std,
        plus.std
    );

    println!(
        "acceptance 09 shot-noise trade-off: PASS  300 trials at 1e7 shots; bias {plus_bias:.2e} \
         < {gse_bias:.2e} < {vd_bias:.2e}, std {:.2e} <= {:.2e} <= {:.2e}  ({:.2} s)",
        vd.std,
        gse.std,
        plus.std,
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_10_extrapolation_breaks_physicality_where_fault_subspace_does_not() {
    let start = Instant::now();
    let trials = fault_trials();

    let over_unity =
        trials.extrap_fidelities.iter().filter(|&&f| f > 1.0).count();
    assert!(
        over_unity >= 1,
        "no extrapolated effective state exceeded unit overlap; max {:.12}",
        trials.extrap_fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    );
    let worst_gse =
        trials.gse_fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    assert!(
        worst_gse <= 1.0 + 1e-9,
        "a fault-subspace state exceeded unit overlap: {worst_gse:.12}"
    );

    println!(
        "acceptance 10 unphysical overlap detection: PASS  {over_unity}/200 extrapolation \
         trials with overlap > 1 (max {:.4}), fault-subspace max {worst_gse:.12}  ({:.2} s)",
        trials.extrap_fidelities.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        start.elapsed().as_secs_f64()
    );
}

#[test]
fn criterion_11_baseline_equivalences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xAC11);
    let mut worst_vd = 0.0f64;

    for trial in 0..20 {
        let n = rng.gen_range(2usize..=3);
        let h = build_tfi_hamiltonian(n, rng.gen_range(0.5..1.5));
        let rho = random_mixed_state(&mut rng, n);
        let k = rng.gen_range(1usize..=3);

        let spec = SubspaceSpec::general(vec![GeneralBase::state_power(0, k)]);
        let (_, _, result) =
            mitigate_ground(&spec, std::slice::from_ref(&rho), &h, DEFAULT_METRIC_CUTOFF)
                .expect("single-base subspace assembles");
        let distilled = vd_energy(&rho, 2 * k, &h).energy;
        let dev = (result.energy - distilled).abs();
        assert!(
            dev <= 1e-10,
            "trial {trial}: single-base energy {:.12} vs distilled order {} {distilled:.12}",
            result.energy,
            2 * k
        );
        worst_vd = worst_vd.max(dev);
    }

    // Conventional expansion versus a hand-assembled 2x2 pencil in the
    // moments m_k = Tr[rho H^k].
    let mut worst_qse = 0.0f64;
    for _ in 0..5 {
        let n = 3;
        let h = build_tfi_hamiltonian(n, rng.gen_range(0.5..1.5));
        let rho = random_mixed_state(&mut rng, n);
        let h_dense = h.dense();
        let moment = |k: usize| rho.expectation_matrix(&h_dense.pow(k)).re;
        let (m1, m2, m3) = (moment(1), moment(2), moment(3));
        let hand_h = ComplexMatrix::from_row_major(
            2,
            2,
            vec![m1, m2, m2, m3].into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        )
        .unwrap();
        let hand_s = ComplexMatrix::from_row_major(
            2,
            2,
            vec![1.0, m1, m1, m2].into_iter().map(|x| Complex64::new(x, 0.0)).collect(),
        )
        .unwrap();
        let hand = linalg::solve_generalized_eig(&hand_h, &hand_s, DEFAULT_METRIC_CUTOFF)
            .expect("2x2 pencil solves");

        let (_, _, result) = mitigate_ground(
            &SubspaceSpec::conventional_qse(&h),
            std::slice::from_ref(&rho),
            &h,
            DEFAULT_METRIC_CUTOFF,
        )
        .expect("conventional expansion assembles");
        let dev = (result.energy - hand.eigenvalues[0]).abs();
        assert!(
            dev <= 1e-12,
            "expansion energy {:.14} vs hand-assembled {:.14}",
            result.energy,
            hand.eigenvalues[0]
        );
        worst_qse = worst_qse.max(dev);
    }

    println!(
        "acceptance 11 baseline equivalences: PASS  20 distillation matches (worst \
         {worst_vd:.2e}), 5 hand-assembled pencils (worst {worst_qse:.2e})  ({:.2} s)",
        start.elapsed().as_secs_f64()
    );
}

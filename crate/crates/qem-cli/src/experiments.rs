//! The seven experiment pipelines. Each one prepares a system from the
//! resolved configuration, fills the result table in a deterministic row
//! order, and evaluates its acceptance assertion; parallel sections collect
//! into indexed buffers before the single collector stamps rows.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qem_core::baselines::{
    dominant_vector_energy, extrapolate_zero_noise, extrapolated_effective_state,
    sample_noisy_lambdas, vd_energy, ExtrapolationSpec,
};
use qem_core::gse::{
    assemble_matrices, default_omega, mitigate_ground, select_candidate, solve_energy_principle,
    SelectionMode, Subspace, SubspaceSpec,
};
use qem_core::linalg::{self, ComplexMatrix};
use qem_core::pauli::build_tfi_hamiltonian;
use qem_core::shot_noise::{
    closed_form_inverse_metric_norm, derive_trial_seed, estimate_with_shot_noise,
    predict_first_order_shift, vd_energy_with_shot_noise, vd_quantity_count, ShotBudget,
};
use qem_core::state::{fidelity, trace_distance};
use qem_core::variational::{generate_noisy_family, level_energies, optimize_ssvqe, SsvqeProblem};
use qem_core::{AnsatzCircuit, DensityMatrix, EntanglerLayout, PauliHamiltonian};

use crate::config::{ExperimentKind, Method, ResolvedConfig};
use crate::table::{histogram_csv, AssertionOutcome, ResultTable};

/// Runtime failure inside an experiment, carrying enough context to act on.
#[derive(Debug)]
pub struct RunError(pub String);

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "experiment failed: {}", self.0)
    }
}

impl std::error::Error for RunError {}

pub struct ExperimentOutput {
    pub table: ResultTable,
    pub assertions: Vec<AssertionOutcome>,
    /// Extra named outputs, for example per-method histogram CSVs.
    pub extra_files: Vec<(String, String)>,
}

impl ExperimentOutput {
    pub fn all_assertions_pass(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

// Independent seed streams, so adding trials to one stage never shifts the
// draws of another.
const STREAM_OPT: u64 = 1;
const STREAM_SAMPLER: u64 = 2;
const STREAM_FAULT: u64 = 3;
const STREAM_PERTURB: u64 = 4;

pub fn run_experiment(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    match cfg.kind {
        ExperimentKind::PowerConvergence => run_power_convergence(cfg),
        ExperimentKind::ShotNoiseHistogram => run_shot_noise_histogram(cfg),
        ExperimentKind::ErrorScaling => run_error_scaling(cfg),
        ExperimentKind::FaultVsExtrapolation => run_fault_vs_extrapolation(cfg),
        ExperimentKind::ExcitedSpectra => run_excited_spectra(cfg),
        ExperimentKind::ObservableErrors => run_observable_errors(cfg),
        ExperimentKind::PerturbationStudy => run_perturbation_study(cfg),
    }
}

fn err<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> RunError + '_ {
    move |e| RunError(format!("{context}: {e}"))
}

/// Optimized circuit plus exact references shared by the pipelines.
struct Workbench {
    h: PauliHamiltonian,
    circuit: AnsatzCircuit,
    parameters: Vec<f64>,
    /// Ascending exact eigenvalues of the Hamiltonian.
    exact_values: Vec<f64>,
    /// Matching eigenvectors, one column per level.
    exact_vectors: ComplexMatrix,
    /// Computational input state per variational level.
    initials: Vec<usize>,
    /// Total noise budget implied by the configuration.
    n_tot: f64,
}

impl Workbench {
    fn exact_state(&self, level: usize) -> DensityMatrix {
        let dim = self.exact_vectors.rows();
        let amps: Vec<Complex64> = (0..dim).map(|i| self.exact_vectors.get(i, level)).collect();
        DensityMatrix::from_pure(self.h.n_qubits(), &amps)
    }

    fn exact_amplitudes(&self, level: usize) -> Vec<Complex64> {
        let dim = self.exact_vectors.rows();
        (0..dim).map(|i| self.exact_vectors.get(i, level)).collect()
    }

    /// Noisy preparation of variational level `k` at an absolute budget.
    fn noisy_state(&self, level: usize, n_tot: f64) -> DensityMatrix {
        generate_noisy_family(&self.circuit, &self.parameters, self.initials[level], &[n_tot])
            .remove(0)
    }
}

fn layout_from(cfg: &ResolvedConfig) -> EntanglerLayout {
    match cfg.system.layout.as_str() {
        "ladder" => EntanglerLayout::Ladder,
        _ => EntanglerLayout::Brickwork,
    }
}

fn build_workbench(cfg: &ResolvedConfig) -> Result<Workbench, RunError> {
    let h = build_tfi_hamiltonian(cfg.system.n_qubits, cfg.system.field);
    let circuit =
        AnsatzCircuit::with_layout(cfg.system.n_qubits, cfg.system.depth, layout_from(cfg));
    let problem = SsvqeProblem::new(h.clone(), circuit.clone(), cfg.system.levels);
    log::info!(
        "optimizing {} levels of a depth-{} {} circuit on {} qubits",
        cfg.system.levels,
        cfg.system.depth,
        cfg.system.layout,
        cfg.system.n_qubits
    );
    let opt = optimize_ssvqe(&problem, derive_trial_seed(cfg.seed, STREAM_OPT));
    log::info!(
        "optimizer finished: cost {:.9}, {} iterations, converged {}",
        opt.cost,
        opt.iterations,
        opt.converged
    );
    let noiseless = level_energies(&problem, &opt);
    log::debug!("noiseless level energies: {noiseless:?}");
    let (exact_values, exact_vectors) =
        linalg::hermitian_eig(&h.dense()).map_err(err("exact spectrum"))?;
    let n_tot = if cfg.noise.p_dep > 0.0 {
        cfg.noise.p_dep * circuit.noise_site_count() as f64
    } else {
        cfg.noise.n_tot
    };
    Ok(Workbench {
        h,
        circuit,
        parameters: opt.parameters,
        exact_values,
        exact_vectors,
        initials: problem.initial_states(),
        n_tot,
    })
}

/// `<psi| rho |psi>` without assuming `rho` is positive, so extrapolated
/// pseudo-states are scored by the same rule as physical ones.
fn overlap_with_pure(state: &DensityMatrix, psi: &[Complex64]) -> f64 {
    let m = state.matrix();
    let dim = psi.len();
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..dim {
        for j in 0..dim {
            acc += psi[i].conj() * m.get(i, j) * psi[j];
        }
    }
    acc.re
}

fn spec_for(method: Method, m: usize, h: &PauliHamiltonian) -> SubspaceSpec {
    match method {
        Method::Gse => SubspaceSpec::power(m),
        Method::GsePlus => SubspaceSpec::power_plus(m),
        Method::Qse => SubspaceSpec::conventional_qse(h),
        Method::Vd | Method::Extrapolation => {
            unreachable!("{:?} does not define a subspace", method)
        }
    }
}

/// Mitigated ground-energy error per method and subspace degree on one
/// fixed state family.
fn run_power_convergence(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let wb = build_workbench(cfg)?;
    let rho = wb.noisy_state(0, wb.n_tot);
    let family = [rho.clone()];
    let exact = wb.exact_values[0];

    let mut table = ResultTable::new();
    table.push(id, "exact", 0, 0.0, "energy", exact, 0.0, cfg.seed);
    table.push(id, "raw", 0, 1.0, "energy", vd_energy(&rho, 1, &wb.h).energy, 0.0, cfg.seed);

    let mut gse_deltas: Vec<(usize, f64)> = Vec::new();
    for m in 1..=cfg.system.m_max {
        for &method in &cfg.methods {
            let energy = match method {
                Method::Vd => vd_energy(&rho, m, &wb.h).energy,
                Method::Gse | Method::GsePlus => {
                    let spec = spec_for(method, m, &wb.h);
                    let (_, _, best) = mitigate_ground(&spec, &family, &wb.h, cfg.cutoff)
                        .map_err(err("power subspace solve"))?;
                    best.energy
                }
                Method::Qse | Method::Extrapolation => continue,
            };
            let delta = (energy - exact).abs();
            table.push(id, method.id(), 0, m as f64, "energy", energy, 0.0, cfg.seed);
            table.push(id, method.id(), 0, m as f64, "delta_e", delta, 0.0, cfg.seed);
            if method == Method::Gse {
                gse_deltas.push((m, delta));
            }
        }
    }
    if cfg.has_method(Method::Qse) {
        let spec = SubspaceSpec::conventional_qse(&wb.h);
        let (_, _, best) =
            mitigate_ground(&spec, &family, &wb.h, cfg.cutoff).map_err(err("conventional qse"))?;
        table.push(id, "qse", 0, 1.0, "energy", best.energy, 0.0, cfg.seed);
        table.push(id, "qse", 0, 1.0, "delta_e", (best.energy - exact).abs(), 0.0, cfg.seed);
    }

    // The headline claim: the power-subspace error never rises with the
    // copy budget (up to numerical slack).
    let slack = 1e-10;
    let mut worst_rise = f64::NEG_INFINITY;
    let mut worst_pair = (0usize, 0usize);
    for pair in gse_deltas.windows(2) {
        let rise = pair[1].1 - pair[0].1;
        if rise > worst_rise {
            worst_rise = rise;
            worst_pair = (pair[0].0, pair[1].0);
        }
    }
    let passed = gse_deltas.len() < 2 || worst_rise <= slack;
    let assertions = vec![AssertionOutcome {
        name: "gse-error-monotone".into(),
        passed,
        detail: if gse_deltas.len() < 2 {
            "fewer than two degrees, nothing to compare".into()
        } else {
            format!(
                "worst adjacent change {worst_rise:+.3e} between m = {} and m = {} (slack {slack:e})",
                worst_pair.0, worst_pair.1
            )
        },
    }];

    Ok(ExperimentOutput { table, assertions, extra_files: Vec::new() })
}

/// Monte-Carlo energy distributions under a shared total shot budget, plus
/// per-method histogram files.
fn run_shot_noise_histogram(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let wb = build_workbench(cfg)?;
    let rho = wb.noisy_state(0, wb.n_tot);
    let family = [rho.clone()];
    let exact = wb.exact_values[0];
    let m = cfg.system.m_max;
    let sampler_master = derive_trial_seed(cfg.seed, STREAM_SAMPLER);

    let mut table = ResultTable::new();
    let mut extra_files = Vec::new();
    table.push(id, "exact", 0, 0.0, "energy", exact, 0.0, cfg.seed);

    let mut stats: Vec<(Method, f64, f64)> = Vec::new();
    for (index, &method) in cfg.methods.iter().enumerate() {
        let method_seed = derive_trial_seed(sampler_master, index as u64);
        let (dist, noiseless, quantities) = match method {
            Method::Vd => {
                let count = vd_quantity_count(&wb.h, m);
                let budget = ShotBudget::from_total(cfg.shots.total, count);
                let dist = vd_energy_with_shot_noise(
                    &rho,
                    m,
                    &wb.h,
                    &budget,
                    cfg.noise.trials,
                    method_seed,
                );
                (dist, vd_energy(&rho, m, &wb.h).energy, count)
            }
            Method::Gse | Method::GsePlus => {
                let spec = spec_for(method, m, &wb.h);
                let sub = Subspace::build(&spec, &family, &wb.h).map_err(err("subspace build"))?;
                let omega = default_omega(&sub, &wb.h);
                let mats =
                    assemble_matrices(&sub, &wb.h, omega).map_err(err("matrix assembly"))?;
                let budget = ShotBudget::from_total(cfg.shots.total, mats.quantity_count);
                let dist = estimate_with_shot_noise(
                    &spec,
                    &family,
                    &wb.h,
                    &budget,
                    cfg.noise.trials,
                    SelectionMode::LowestEnergy,
                    cfg.cutoff,
                    method_seed,
                )
                .map_err(err("shot-noise sampling"))?;
                let noiseless = mitigate_ground(&spec, &family, &wb.h, cfg.cutoff)
                    .map_err(err("noiseless reference"))?
                    .2
                    .energy;
                (dist, noiseless, mats.quantity_count)
            }
            Method::Qse | Method::Extrapolation => continue,
        };
        let bias = (dist.mean - exact).abs();
        table.push(id, method.id(), 0, m as f64, "energy", dist.mean, dist.std, cfg.seed);
        table.push(id, method.id(), 0, m as f64, "bias", bias, 0.0, cfg.seed);
        table.push(id, method.id(), 0, m as f64, "noiseless", noiseless, 0.0, cfg.seed);
        table.push(id, method.id(), 0, m as f64, "quantities", quantities as f64, 0.0, cfg.seed);
        extra_files.push((
            format!("histogram_{}.csv", method.id()),
            histogram_csv(&dist.histogram(cfg.shots.bins)),
        ));
        stats.push((method, bias, dist.std));
    }

    // Distillation concentrates shots on few quantities (small spread,
    // larger bias); wider subspaces trade spread for bias. Orderings get
    // 10 percent slack for Monte-Carlo wiggle.
    let find = |m: Method| stats.iter().find(|(mm, _, _)| *mm == m);
    let mut assertions = Vec::new();
    if let (Some((_, vd_bias, vd_std)), Some((_, gse_bias, gse_std)), Some((_, plus_bias, plus_std))) =
        (find(Method::Vd), find(Method::Gse), find(Method::GsePlus))
    {
        let bias_ok = *plus_bias <= 1.1 * gse_bias && *gse_bias <= 1.1 * vd_bias;
        assertions.push(AssertionOutcome {
            name: "bias-ordering".into(),
            passed: bias_ok,
            detail: format!(
                "bias gse-plus {plus_bias:.3e} <= gse {gse_bias:.3e} <= vd {vd_bias:.3e} \
                 within 10 percent slack"
            ),
        });
        let std_ok = *vd_std <= 1.1 * gse_std && *gse_std <= 1.1 * plus_std;
        assertions.push(AssertionOutcome {
            name: "spread-ordering".into(),
            passed: std_ok,
            detail: format!(
                "spread vd {vd_std:.3e} <= gse {gse_std:.3e} <= gse-plus {plus_std:.3e} \
                 within 10 percent slack"
            ),
        });
    }

    Ok(ExperimentOutput { table, assertions, extra_files })
}

/// Mitigated error against the total noise budget on a deliberately
/// shallow circuit, exposing the distillation floor.
fn run_error_scaling(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let wb = build_workbench(cfg)?;
    let exact = wb.exact_values[0];
    let m = cfg.system.m_max;

    let mut sweep = cfg.noise.sweep.clone();
    sweep.sort_by(|a, b| a.partial_cmp(b).expect("finite budgets"));

    let mut table = ResultTable::new();
    table.push(id, "exact", 0, 0.0, "energy", exact, 0.0, cfg.seed);

    // (budget, method, delta) for the assertion below.
    let mut deltas: Vec<(f64, Method, f64)> = Vec::new();
    for &budget in &sweep {
        let rho = wb.noisy_state(0, budget);
        let family = [rho.clone()];
        table.push(
            id,
            "raw",
            0,
            budget,
            "delta_e",
            (vd_energy(&rho, 1, &wb.h).energy - exact).abs(),
            0.0,
            cfg.seed,
        );
        for &method in &cfg.methods {
            let energy = match method {
                Method::Vd => vd_energy(&rho, m, &wb.h).energy,
                Method::Gse | Method::GsePlus => {
                    let spec = spec_for(method, m, &wb.h);
                    mitigate_ground(&spec, &family, &wb.h, cfg.cutoff)
                        .map_err(err("subspace solve"))?
                        .2
                        .energy
                }
                Method::Qse | Method::Extrapolation => continue,
            };
            let delta = (energy - exact).abs();
            table.push(id, method.id(), 0, budget, "energy", energy, 0.0, cfg.seed);
            table.push(id, method.id(), 0, budget, "delta_e", delta, 0.0, cfg.seed);
            deltas.push((budget, method, delta));
        }
    }

    // At the weakest noise the distilled error sits on its coherent floor
    // while the augmented subspace keeps improving.
    let smallest = sweep[0];
    let at = |method: Method| {
        deltas.iter().find(|(b, mm, _)| *b == smallest && *mm == method).map(|(_, _, d)| *d)
    };
    let assertions = match (at(Method::Vd), at(Method::GsePlus)) {
        (Some(vd), Some(plus)) => vec![AssertionOutcome {
            name: "floor-beaten-at-weak-noise".into(),
            passed: plus < vd,
            detail: format!(
                "at budget {smallest:e}: gse-plus error {plus:.3e} vs distillation floor {vd:.3e}"
            ),
        }],
        _ => Vec::new(),
    };

    Ok(ExperimentOutput { table, assertions, extra_files: Vec::new() })
}

struct FaultTrial {
    fault_energy: f64,
    fault_overlap: f64,
    extrap_energy: f64,
    extrap_overlap: f64,
}

/// Fault-subspace mitigation against Richardson extrapolation when the
/// realized noise amplification factors fluctuate around their nominal
/// values.
fn run_fault_vs_extrapolation(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let wb = build_workbench(cfg)?;
    let exact = wb.exact_values[0];
    let psi0 = wb.exact_amplitudes(0);
    let spec = ExtrapolationSpec::new(
        cfg.noise.lambdas.clone(),
        cfg.noise.epsilon,
        cfg.noise.sigma,
        cfg.noise.trials,
    )
    .map_err(err("extrapolation setup"))?;
    let fault_master = derive_trial_seed(cfg.seed, STREAM_FAULT);
    let m = cfg.system.m_max;

    let trials: Vec<FaultTrial> = (0..cfg.noise.trials)
        .into_par_iter()
        .map(|t| -> Result<FaultTrial, RunError> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(fault_master, t as u64));
            let realized = sample_noisy_lambdas(&spec, &mut rng);
            let budgets: Vec<f64> = realized.iter().map(|l| l * cfg.noise.epsilon).collect();
            let family =
                generate_noisy_family(&wb.circuit, &wb.parameters, wb.initials[0], &budgets);

            let (sub, _, best) =
                mitigate_ground(&SubspaceSpec::fault(), &family, &wb.h, cfg.cutoff)
                    .map_err(err("fault subspace solve"))?;
            let realized_state =
                best.clone().with_realized_state(&sub).map_err(err("state realization"))?;
            let fault_overlap = overlap_with_pure(
                realized_state.rho_em.as_ref().expect("realized state present"),
                &psi0,
            );

            // Richardson still believes the nominal factors; only the
            // prepared states carry the realized ones.
            let energies: Vec<f64> = family.iter().map(|s| vd_energy(s, m, &wb.h).energy).collect();
            let extrap_energy = extrapolate_zero_noise(&cfg.noise.lambdas, &energies)
                .map_err(err("zero-noise extrapolation"))?;
            let pseudo = extrapolated_effective_state(&cfg.noise.lambdas, &family)
                .map_err(err("extrapolated state"))?;
            let extrap_overlap = overlap_with_pure(&pseudo, &psi0);

            Ok(FaultTrial {
                fault_energy: best.energy,
                fault_overlap,
                extrap_energy,
                extrap_overlap,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let summarize = |values: &[f64]| -> (f64, f64) {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    let fault_e: Vec<f64> = trials.iter().map(|t| t.fault_energy).collect();
    let extrap_e: Vec<f64> = trials.iter().map(|t| t.extrap_energy).collect();
    let (fault_mean, fault_std) = summarize(&fault_e);
    let (extrap_mean, extrap_std) = summarize(&extrap_e);
    let fault_bias = (fault_mean - exact).abs();
    let extrap_bias = (extrap_mean - exact).abs();
    let max_over = |f: fn(&FaultTrial) -> f64| {
        trials.iter().map(f).fold(f64::NEG_INFINITY, f64::max)
    };
    let fault_overlap_max = max_over(|t| t.fault_overlap);
    let extrap_overlap_max = max_over(|t| t.extrap_overlap);
    let unphysical =
        trials.iter().filter(|t| t.extrap_overlap > 1.0 + 1e-9).count();

    let lambda_tag = cfg.noise.lambdas.len() as f64;
    let mut table = ResultTable::new();
    if unphysical > 0 {
        table.annotate(format!(
            "{unphysical} of {} extrapolation trials exceeded unit ground overlap",
            cfg.noise.trials
        ));
    }
    table.push(id, "exact", 0, 0.0, "energy", exact, 0.0, cfg.seed);
    table.push(id, "gse", 0, lambda_tag, "energy", fault_mean, fault_std, cfg.seed);
    table.push(id, "gse", 0, lambda_tag, "bias", fault_bias, 0.0, cfg.seed);
    table.push(id, "gse", 0, lambda_tag, "overlap_max", fault_overlap_max, 0.0, cfg.seed);
    table.push(id, "extrapolation", 0, lambda_tag, "energy", extrap_mean, extrap_std, cfg.seed);
    table.push(id, "extrapolation", 0, lambda_tag, "bias", extrap_bias, 0.0, cfg.seed);
    table.push(
        id,
        "extrapolation",
        0,
        lambda_tag,
        "overlap_max",
        extrap_overlap_max,
        0.0,
        cfg.seed,
    );
    table.push(
        id,
        "extrapolation",
        0,
        lambda_tag,
        "unphysical_trials",
        unphysical as f64,
        0.0,
        cfg.seed,
    );

    let assertions = vec![
        AssertionOutcome {
            name: "spread-advantage".into(),
            passed: fault_std < extrap_std,
            detail: format!("energy spread {fault_std:.3e} vs extrapolation {extrap_std:.3e}"),
        },
        AssertionOutcome {
            name: "bias-advantage".into(),
            passed: fault_bias <= extrap_bias,
            detail: format!("bias {fault_bias:.3e} vs extrapolation {extrap_bias:.3e}"),
        },
        AssertionOutcome {
            name: "physical-mitigated-state".into(),
            passed: fault_overlap_max <= 1.0 + 1e-9,
            detail: format!(
                "largest ground overlap {fault_overlap_max:.12} (extrapolation reaches \
                 {extrap_overlap_max:.12} on {unphysical} unphysical trials)"
            ),
        },
    ];

    Ok(ExperimentOutput { table, assertions, extra_files: Vec::new() })
}

/// Per-level energy errors of the distilled and subspace-expanded excited
/// states found by weighted subspace-search optimization.
fn run_excited_spectra(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let wb = build_workbench(cfg)?;
    let mut table = ResultTable::new();

    // (level, method, m, delta)
    let mut deltas: Vec<(usize, Method, usize, f64)> = Vec::new();
    let mut raw_deltas: Vec<f64> = Vec::new();
    for level in 0..cfg.system.levels {
        let exact = wb.exact_values[level];
        let rho = wb.noisy_state(level, wb.n_tot);
        let family = [rho.clone()];
        table.push(id, "exact", level, 0.0, "energy", exact, 0.0, cfg.seed);
        let raw = vd_energy(&rho, 1, &wb.h).energy;
        table.push(id, "raw", level, 1.0, "energy", raw, 0.0, cfg.seed);
        table.push(id, "raw", level, 1.0, "delta_e", (raw - exact).abs(), 0.0, cfg.seed);
        raw_deltas.push((raw - exact).abs());

        // Candidate picked nearest the distillation fixed point, so a
        // middle level is not dragged toward the ground state.
        let anchor = dominant_vector_energy(&rho, &wb.h);
        for m in 2..=cfg.system.m_max {
            for &method in &cfg.methods {
                let energy = match method {
                    Method::Vd => vd_energy(&rho, m, &wb.h).energy,
                    Method::Gse | Method::GsePlus => {
                        let spec = spec_for(method, m, &wb.h);
                        let sub = Subspace::build(&spec, &family, &wb.h)
                            .map_err(err("subspace build"))?;
                        let omega = default_omega(&sub, &wb.h);
                        let mats = assemble_matrices(&sub, &wb.h, omega)
                            .map_err(err("matrix assembly"))?;
                        let candidates = solve_energy_principle(&mats, cfg.cutoff)
                            .map_err(err("energy principle"))?;
                        select_candidate(&candidates, SelectionMode::NearestTo(anchor)).energy
                    }
                    Method::Qse | Method::Extrapolation => continue,
                };
                let delta = (energy - exact).abs();
                table.push(id, method.id(), level, m as f64, "energy", energy, 0.0, cfg.seed);
                table.push(id, method.id(), level, m as f64, "delta_e", delta, 0.0, cfg.seed);
                deltas.push((level, method, m, delta));
            }
        }
    }

    let median = |values: &mut Vec<f64>| -> f64 {
        values.sort_by(|a, b| a.partial_cmp(b).expect("finite deltas"));
        values[values.len() / 2]
    };
    let mut assertions = Vec::new();
    let mut vd2: Vec<f64> = deltas
        .iter()
        .filter(|(_, m, deg, _)| *m == Method::Vd && *deg == 2)
        .map(|(_, _, _, d)| *d)
        .collect();
    if !vd2.is_empty() && !raw_deltas.is_empty() {
        let vd_med = median(&mut vd2);
        let raw_med = median(&mut raw_deltas.clone());
        assertions.push(AssertionOutcome {
            name: "distillation-improves-median-level-error".into(),
            passed: vd_med <= raw_med,
            detail: format!(
                "median over {} levels: distilled {vd_med:.3e} vs raw {raw_med:.3e}",
                cfg.system.levels
            ),
        });
    }

    Ok(ExperimentOutput { table, assertions, extra_files: Vec::new() })
}

/// Energy, state, and correlator errors of each mitigated state, including
/// the trace-distance bound on observable errors.
fn run_observable_errors(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let wb = build_workbench(cfg)?;
    let exact = wb.exact_values[0];
    let exact_state = wb.exact_state(0);
    let rho = wb.noisy_state(0, wb.n_tot);
    let family = [rho.clone()];
    let m = cfg.system.m_max;

    let correlators: Vec<(usize, f64)> =
        (1..cfg.system.n_qubits).map(|r| (r, exact_state.zz_correlator(0, r))).collect();

    let mut table = ResultTable::new();
    table.push(id, "exact", 0, 0.0, "energy", exact, 0.0, cfg.seed);

    let mut worst_margin = f64::INFINITY;
    let emit = |table: &mut ResultTable,
                    method: &str,
                    state: &DensityMatrix,
                    energy: f64|
     -> f64 {
        let f = fidelity(state, &exact_state);
        let t = trace_distance(state, &exact_state);
        table.push(id, method, 0, m as f64, "energy", energy, 0.0, cfg.seed);
        table.push(id, method, 0, m as f64, "delta_e", (energy - exact).abs(), 0.0, cfg.seed);
        table.push(id, method, 0, m as f64, "fidelity", f, 0.0, cfg.seed);
        table.push(id, method, 0, m as f64, "trace_distance", t, 0.0, cfg.seed);
        let mut min_margin = f64::INFINITY;
        for &(r, exact_zz) in &correlators {
            let observed = state.zz_correlator(0, r);
            let error = (observed - exact_zz).abs();
            // `|Z_0 Z_r|` has unit norm, so observable errors are capped
            // by twice the trace distance.
            let margin = 2.0 * t - error;
            min_margin = min_margin.min(margin);
            table.push(id, method, 0, m as f64, &format!("zz_error_r{r}"), error, 0.0, cfg.seed);
            table.push(
                id,
                method,
                0,
                m as f64,
                &format!("holder_margin_r{r}"),
                margin,
                0.0,
                cfg.seed,
            );
        }
        min_margin
    };

    worst_margin = worst_margin.min(emit(&mut table, "raw", &rho, rho.expectation_hamiltonian(&wb.h)));
    for &method in &cfg.methods {
        match method {
            Method::Vd => {
                let power = rho.power(m);
                let tr = power.trace().re;
                let distilled = DensityMatrix::from_matrix(
                    cfg.system.n_qubits,
                    power.scale(Complex64::new(1.0 / tr, 0.0)),
                )
                .map_err(err("distilled state"))?;
                let energy = vd_energy(&rho, m, &wb.h).energy;
                worst_margin = worst_margin.min(emit(&mut table, "vd", &distilled, energy));
            }
            Method::Gse | Method::GsePlus => {
                let spec = spec_for(method, m, &wb.h);
                let (sub, _, best) = mitigate_ground(&spec, &family, &wb.h, cfg.cutoff)
                    .map_err(err("subspace solve"))?;
                let realized =
                    best.with_realized_state(&sub).map_err(err("state realization"))?;
                let state = realized.rho_em.clone().expect("realized state present");
                worst_margin =
                    worst_margin.min(emit(&mut table, method.id(), &state, realized.energy));
            }
            Method::Qse | Method::Extrapolation => continue,
        }
    }

    let assertions = vec![AssertionOutcome {
        name: "observable-error-within-trace-distance-bound".into(),
        passed: worst_margin >= -1e-12,
        detail: format!("smallest bound margin {worst_margin:.3e} across all methods and ranges"),
    }];

    Ok(ExperimentOutput { table, assertions, extra_files: Vec::new() })
}

pub(crate) fn random_hermitian(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> ComplexMatrix {
    ComplexMatrix::from_fn(d, d, |_, _| {
        Complex64::new(scale * (rng.gen::<f64>() - 0.5), scale * (rng.gen::<f64>() - 0.5))
    })
    .hermitize()
}

pub(crate) fn random_mixed_state(rng: &mut ChaCha8Rng, n: usize) -> DensityMatrix {
    let dim = 1usize << n;
    let g = ComplexMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    let raw = g.matmul(&g.adjoint());
    let tr = raw.trace().re;
    DensityMatrix::from_matrix(n, raw.scale(Complex64::new(1.0 / tr, 0.0)))
        .expect("Wishart construction is a valid state")
}

/// Diagonal state near maximal mixing, the regime where the moment closed
/// forms are valid: purity moments stay small against 1.
pub(crate) fn strongly_mixed_state(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> DensityMatrix {
    let dim = 1usize << n;
    let mut weights: Vec<f64> = (0..dim).map(|_| 1.0 + spread * (rng.gen::<f64>() - 0.5)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let m = ComplexMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            Complex64::new(weights[i], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    DensityMatrix::from_matrix(n, m).expect("normalized diagonal state")
}

/// First-order perturbation quality on random matrix pencils, plus the
/// closed-form inverse-metric norms against exact spectra.
fn run_perturbation_study(cfg: &ResolvedConfig) -> Result<ExperimentOutput, RunError> {
    let id = cfg.kind.id();
    let master = derive_trial_seed(cfg.seed, STREAM_PERTURB);
    let mut table = ResultTable::new();

    let mut checked = 0usize;
    let mut floored = 0usize;
    let mut ratios_ok = true;
    let mut worst_ratio = f64::NAN;
    let mut instance = 0usize;
    let mut attempts = 0u64;
    while instance < cfg.noise.trials {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(master, attempts));
        attempts += 1;
        let d = rng.gen_range(2usize..=4);
        let h0 = random_hermitian(&mut rng, d, 1.0);
        let c = random_hermitian(&mut rng, d, 1.0);
        let s0 = c
            .matmul(&c.adjoint())
            .scale(Complex64::new(1.0 / d as f64, 0.0))
            .add(&ComplexMatrix::identity(d).scale(Complex64::new(0.3, 0.0)));
        let solution = match linalg::solve_generalized_eig(&h0, &s0, cfg.cutoff) {
            Ok(s) => s,
            Err(_) => continue,
        };
        let t = 1e-3;
        let dh = random_hermitian(&mut rng, d, t);
        let ds = random_hermitian(&mut rng, d, t);
        let level = rng.gen_range(0..solution.kept_rank);
        let full = match predict_first_order_shift(&h0, &s0, &solution, &dh, &ds, level) {
            Ok(report) => report,
            Err(_) => continue,
        };
        let half = predict_first_order_shift(
            &h0,
            &s0,
            &solution,
            &dh.scale(Complex64::new(0.5, 0.0)),
            &ds.scale(Complex64::new(0.5, 0.0)),
            level,
        )
        .map_err(err("half-size perturbation"))?;
        instance += 1;

        if full.remainder < 1e-13 || half.remainder < 1e-13 {
            floored += 1;
            table.push(
                id,
                "gse",
                level,
                instance as f64,
                "remainder_floor",
                full.remainder,
                0.0,
                cfg.seed,
            );
            continue;
        }
        // Halving the perturbation shrinks the first-order remainder by
        // roughly four; [2, 8] tolerates third-order contamination.
        let ratio = full.remainder / half.remainder;
        table.push(id, "gse", level, instance as f64, "quadratic_ratio", ratio, 0.0, cfg.seed);
        checked += 1;
        if !(2.0..=8.0).contains(&ratio) {
            ratios_ok = false;
            worst_ratio = ratio;
        }
    }

    let mut closed_ok = true;
    let mut worst_closed = 0.0f64;
    for i in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(master, 1_000_000 + i));
        let rho = strongly_mixed_state(&mut rng, 4, 0.5);
        let moment = |k: usize| rho.power(k).trace().re;
        for (d, weighted, block) in [
            (2usize, true, [1.0, moment(2), moment(2), moment(3)]),
            (3usize, false, [moment(2), moment(3), moment(3), moment(4)]),
        ] {
            let m = ComplexMatrix::from_row_major(
                2,
                2,
                block.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            )
            .expect("2x2 block");
            let (evals, _) =
                linalg::hermitian_eig(&m).map_err(err("metric block spectrum"))?;
            let exact = 1.0 / evals[0];
            let closed = closed_form_inverse_metric_norm(&rho, d, weighted);
            let rel = (closed - exact).abs() / exact;
            worst_closed = worst_closed.max(rel);
            if rel > 0.1 {
                closed_ok = false;
            }
            table.push(
                id,
                "gse",
                0,
                i as f64,
                &format!("closed_form_rel_error_d{d}"),
                rel,
                0.0,
                cfg.seed,
            );
        }
    }

    let assertions = vec![
        AssertionOutcome {
            name: "quadratic-remainder-scaling".into(),
            passed: ratios_ok && checked >= cfg.noise.trials / 2,
            detail: if ratios_ok {
                format!(
                    "{checked} of {} instances in the [2, 8] band, {floored} at the \
                     remainder floor",
                    cfg.noise.trials
                )
            } else {
                format!("ratio {worst_ratio:.3} escaped the [2, 8] band")
            },
        },
        AssertionOutcome {
            name: "closed-form-inverse-metric-norms".into(),
            passed: closed_ok,
            detail: format!("worst relative error {worst_closed:.3e} against exact spectra"),
        },
    ];

    Ok(ExperimentOutput { table, assertions, extra_files: Vec::new() })
}

//! Experiment configuration: TOML schema, dotted-path overrides, per-kind
//! defaults, validation, and the canonical hash that ties every output row
//! back to the exact resolved settings.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Total-dimension guard for runs that may materialize multi-copy
/// operators: `2^n * m_max` must stay within this.
pub const RESOURCE_LIMIT: usize = 8_192;
/// Densest state the engine simulates exactly.
pub const MAX_QUBITS: usize = 10;
/// Largest subspace degree any experiment may request.
pub const MAX_DEGREE: usize = 10;

#[derive(Debug)]
pub enum ConfigError {
    /// Parse or schema violation (exit code 2).
    Schema(String),
    /// Resource estimate exceeds the limit (exit code 4).
    Resource(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Schema(msg) => write!(f, "config error: {msg}"),
            ConfigError::Resource(msg) => write!(f, "resource limit: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExperimentKind {
    PowerConvergence,
    ShotNoiseHistogram,
    ErrorScaling,
    FaultVsExtrapolation,
    ExcitedSpectra,
    ObservableErrors,
    PerturbationStudy,
}

impl ExperimentKind {
    /// Stable identifier used in the CSV `experiment_id` column and the
    /// default output directory name.
    pub fn id(&self) -> &'static str {
        match self {
            ExperimentKind::PowerConvergence => "power-convergence",
            ExperimentKind::ShotNoiseHistogram => "shot-noise-histogram",
            ExperimentKind::ErrorScaling => "error-scaling",
            ExperimentKind::FaultVsExtrapolation => "fault-vs-extrapolation",
            ExperimentKind::ExcitedSpectra => "excited-spectra",
            ExperimentKind::ObservableErrors => "observable-errors",
            ExperimentKind::PerturbationStudy => "perturbation-study",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Vd,
    Gse,
    GsePlus,
    Qse,
    Extrapolation,
}

impl Method {
    pub fn id(&self) -> &'static str {
        match self {
            Method::Vd => "vd",
            Method::Gse => "gse",
            Method::GsePlus => "gse-plus",
            Method::Qse => "qse",
            Method::Extrapolation => "extrapolation",
        }
    }
}

/// Raw deserialized file: everything optional except the experiment kind
/// and the seed, which reproducibility makes mandatory.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    kind: ExperimentKind,
    seed: u64,
    methods: Option<Vec<Method>>,
    output: Option<String>,
    cutoff: Option<f64>,
    #[serde(default)]
    system: RawSystem,
    #[serde(default)]
    noise: RawNoise,
    #[serde(default)]
    shots: RawShots,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    n_qubits: Option<usize>,
    field: Option<f64>,
    depth: Option<usize>,
    levels: Option<usize>,
    layout: Option<String>,
    m_max: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNoise {
    n_tot: Option<f64>,
    p_dep: Option<f64>,
    epsilon: Option<f64>,
    lambdas: Option<Vec<f64>>,
    sigma: Option<f64>,
    trials: Option<usize>,
    sweep: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawShots {
    infinite: Option<bool>,
    total: Option<f64>,
    bins: Option<usize>,
}

/// Fully resolved configuration: every default the engine filled in is a
/// concrete field here, and this struct is echoed verbatim into the run
/// manifest so no parameter stays hidden.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub output: String,
    /// Metric-spectrum cutoff passed to the generalized eigensolver.
    pub cutoff: f64,
    pub system: ResolvedSystem,
    pub noise: ResolvedNoise,
    pub shots: ResolvedShots,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSystem {
    pub n_qubits: usize,
    pub field: f64,
    pub depth: usize,
    pub levels: usize,
    pub layout: String,
    pub m_max: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedNoise {
    /// Total expected fault count; `p_dep` is derived from it unless the
    /// config pinned `p_dep` directly (then this echoes the equivalent).
    pub n_tot: f64,
    /// Per-site depolarizing probability when pinned directly; 0 means
    /// "derive from n_tot".
    pub p_dep: f64,
    pub epsilon: f64,
    pub lambdas: Vec<f64>,
    pub sigma: f64,
    pub trials: usize,
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedShots {
    pub infinite: bool,
    pub total: f64,
    pub bins: usize,
}

/// Parses `text` as TOML, applies `--set` dotted-path overrides, and
/// resolves per-kind defaults. Schema violations and invalid values are
/// `ConfigError::Schema`; an excessive resource estimate is
/// `ConfigError::Resource`.
pub fn load_config(
    text: &str,
    overrides: &[String],
    out_flag: Option<&str>,
) -> Result<ResolvedConfig, ConfigError> {
    let mut value: toml::Value =
        toml::from_str(text).map_err(|e| ConfigError::Schema(e.to_string()))?;
    for spec in overrides {
        apply_override(&mut value, spec)?;
    }
    let raw: RawConfig =
        value.try_into().map_err(|e: toml::de::Error| ConfigError::Schema(e.to_string()))?;
    resolve(raw, out_flag)
}

/// Applies one `path.to.field=value` override onto the parsed document,
/// creating intermediate tables as needed. The value is parsed as a TOML
/// literal (number, bool, array); anything that fails to parse is a string.
fn apply_override(doc: &mut toml::Value, spec: &str) -> Result<(), ConfigError> {
    let (path, text) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Schema(format!("override '{spec}' is not path=value")))?;
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::Schema(format!("override path '{path}' has an empty segment")));
    }
    let literal: toml::Value = match toml::from_str::<toml::Value>(&format!("v = {text}")) {
        Ok(toml::Value::Table(t)) => t.get("v").cloned().expect("just inserted"),
        _ => toml::Value::String(text.to_string()),
    };
    let mut cursor = doc;
    for segment in &segments[..segments.len() - 1] {
        let table = cursor.as_table_mut().ok_or_else(|| {
            ConfigError::Schema(format!("override path '{path}' crosses a non-table value"))
        })?;
        cursor = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let table = cursor.as_table_mut().ok_or_else(|| {
        ConfigError::Schema(format!("override path '{path}' crosses a non-table value"))
    })?;
    table.insert(segments[segments.len() - 1].to_string(), literal);
    Ok(())
}

struct KindDefaults {
    n_qubits: usize,
    depth: usize,
    levels: usize,
    m_max: usize,
    n_tot: f64,
    trials: usize,
    methods: &'static [Method],
    required: &'static [Method],
    infinite: bool,
}

/// Desk-scale defaults per experiment: four qubits for exhaustive-spectrum
/// studies, eight for the headline sweeps, degree capped at 10.
fn defaults_for(kind: ExperimentKind) -> KindDefaults {
    use Method::*;
    match kind {
        ExperimentKind::PowerConvergence => KindDefaults {
            n_qubits: 8,
            depth: 12,
            levels: 1,
            m_max: 8,
            n_tot: 1.5,
            trials: 1,
            methods: &[Vd, Gse, GsePlus],
            required: &[Gse],
            infinite: true,
        },
        ExperimentKind::ShotNoiseHistogram => KindDefaults {
            n_qubits: 8,
            depth: 6,
            levels: 1,
            m_max: 2,
            n_tot: 1.5,
            trials: 300,
            methods: &[Vd, Gse, GsePlus],
            required: &[Vd, Gse, GsePlus],
            infinite: false,
        },
        ExperimentKind::ErrorScaling => KindDefaults {
            n_qubits: 8,
            depth: 2,
            levels: 1,
            m_max: 2,
            n_tot: 1e-3,
            trials: 1,
            methods: &[Vd, GsePlus],
            required: &[Vd, GsePlus],
            infinite: true,
        },
        ExperimentKind::FaultVsExtrapolation => KindDefaults {
            n_qubits: 8,
            depth: 6,
            levels: 1,
            m_max: 2,
            n_tot: 1.5,
            trials: 500,
            methods: &[Gse, Extrapolation],
            required: &[Gse, Extrapolation],
            infinite: true,
        },
        ExperimentKind::ExcitedSpectra => KindDefaults {
            n_qubits: 4,
            depth: 20,
            levels: 16,
            m_max: 4,
            n_tot: 3.0,
            trials: 1,
            methods: &[Vd, Gse, GsePlus],
            required: &[Vd],
            infinite: true,
        },
        ExperimentKind::ObservableErrors => KindDefaults {
            n_qubits: 4,
            depth: 6,
            levels: 1,
            m_max: 2,
            n_tot: 1.0,
            trials: 1,
            methods: &[Vd, Gse, GsePlus],
            required: &[Vd],
            infinite: true,
        },
        ExperimentKind::PerturbationStudy => KindDefaults {
            n_qubits: 4,
            depth: 2,
            levels: 1,
            m_max: 4,
            n_tot: 0.5,
            trials: 100,
            methods: &[Gse],
            required: &[Gse],
            infinite: true,
        },
    }
}

fn resolve(raw: RawConfig, out_flag: Option<&str>) -> Result<ResolvedConfig, ConfigError> {
    let d = defaults_for(raw.kind);
    let methods = raw.methods.unwrap_or_else(|| d.methods.to_vec());
    if methods.is_empty() {
        return Err(ConfigError::Schema("method list must be nonempty".into()));
    }
    for need in d.required {
        if !methods.contains(need) {
            return Err(ConfigError::Schema(format!(
                "{} needs method '{}' for its acceptance assertion",
                raw.kind.id(),
                need.id()
            )));
        }
    }

    let system = ResolvedSystem {
        n_qubits: raw.system.n_qubits.unwrap_or(d.n_qubits),
        field: raw.system.field.unwrap_or(1.0),
        depth: raw.system.depth.unwrap_or(d.depth),
        levels: raw.system.levels.unwrap_or(d.levels),
        layout: raw.system.layout.unwrap_or_else(|| "brickwork".into()),
        m_max: raw.system.m_max.unwrap_or(d.m_max),
    };
    if system.n_qubits < 1 || system.n_qubits > MAX_QUBITS {
        return Err(ConfigError::Schema(format!(
            "n_qubits {} outside 1..={MAX_QUBITS}",
            system.n_qubits
        )));
    }
    if !matches!(system.layout.as_str(), "ladder" | "brickwork") {
        return Err(ConfigError::Schema(format!(
            "layout '{}' is not 'ladder' or 'brickwork'",
            system.layout
        )));
    }
    if system.m_max < 1 || system.m_max > MAX_DEGREE {
        return Err(ConfigError::Schema(format!("m_max {} outside 1..={MAX_DEGREE}", system.m_max)));
    }
    if system.levels < 1 || system.levels > (1usize << system.n_qubits) {
        return Err(ConfigError::Schema(format!(
            "levels {} outside 1..=2^{}",
            system.levels, system.n_qubits
        )));
    }
    if !system.field.is_finite() {
        return Err(ConfigError::Schema("field must be finite".into()));
    }

    if raw.noise.n_tot.is_some() && raw.noise.p_dep.is_some() {
        return Err(ConfigError::Schema("set noise.n_tot or noise.p_dep, not both".into()));
    }
    let noise = ResolvedNoise {
        n_tot: raw.noise.n_tot.unwrap_or(if raw.noise.p_dep.is_some() { 0.0 } else { d.n_tot }),
        p_dep: raw.noise.p_dep.unwrap_or(0.0),
        epsilon: raw.noise.epsilon.unwrap_or(1.5),
        lambdas: raw.noise.lambdas.unwrap_or_else(|| vec![1.0, 2.0, 3.0]),
        sigma: raw.noise.sigma.unwrap_or(0.1),
        trials: raw.noise.trials.unwrap_or(d.trials),
        sweep: raw.noise.sweep.unwrap_or_else(|| vec![1e-3, 3e-3, 1e-2, 3e-2, 1e-1]),
    };
    if noise.n_tot < 0.0 || !noise.n_tot.is_finite() {
        return Err(ConfigError::Schema("noise.n_tot must be finite and nonnegative".into()));
    }
    if !(0.0..=0.75).contains(&noise.p_dep) {
        return Err(ConfigError::Schema("noise.p_dep must sit in [0, 0.75]".into()));
    }
    if noise.epsilon <= 0.0 {
        return Err(ConfigError::Schema("noise.epsilon must be positive".into()));
    }
    if noise.sigma < 0.0 {
        return Err(ConfigError::Schema("noise.sigma must be nonnegative".into()));
    }
    if noise.trials < 1 {
        return Err(ConfigError::Schema("noise.trials must be at least 1".into()));
    }
    if noise.lambdas.len() < 2 {
        return Err(ConfigError::Schema("noise.lambdas needs at least two levels".into()));
    }
    for (i, a) in noise.lambdas.iter().enumerate() {
        if !a.is_finite() || *a <= 0.0 {
            return Err(ConfigError::Schema("noise.lambdas must be positive and finite".into()));
        }
        for b in &noise.lambdas[i + 1..] {
            if (a - b).abs() < 1e-12 {
                return Err(ConfigError::Schema("noise.lambdas must be distinct".into()));
            }
        }
    }
    if noise.sweep.is_empty() || noise.sweep.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(ConfigError::Schema(
            "noise.sweep must be a nonempty list of nonnegative budgets".into(),
        ));
    }

    let shots = ResolvedShots {
        infinite: raw.shots.infinite.unwrap_or(d.infinite),
        total: raw.shots.total.unwrap_or(1e7),
        bins: raw.shots.bins.unwrap_or(40),
    };
    if shots.total < 1.0 {
        return Err(ConfigError::Schema("shots.total must be at least 1".into()));
    }
    if shots.bins < 1 {
        return Err(ConfigError::Schema("shots.bins must be at least 1".into()));
    }

    // Sampled moment matrices need the loose cutoff to absorb shot noise;
    // exact infinite-shot moments keep every numerically meaningful
    // direction so consecutive subspace degrees stay nested.
    let cutoff = raw.cutoff.unwrap_or(if shots.infinite { 1e-12 } else { 1e-8 });
    if !(cutoff > 0.0 && cutoff < 1.0) {
        return Err(ConfigError::Schema("cutoff must sit in (0, 1)".into()));
    }

    let resolved = ResolvedConfig {
        kind: raw.kind,
        seed: raw.seed,
        methods,
        output: out_flag
            .map(str::to_string)
            .or(raw.output)
            .unwrap_or_else(|| format!("out/{}", raw.kind.id())),
        cutoff,
        system,
        noise,
        shots,
    };

    let estimate = resolved.resource_estimate();
    if estimate > RESOURCE_LIMIT {
        return Err(ConfigError::Resource(format!(
            "2^n_qubits * m_max = {estimate} exceeds the limit {RESOURCE_LIMIT}"
        )));
    }
    Ok(resolved)
}

impl ResolvedConfig {
    /// Total-dimension estimate `2^n * m_max` used by the resource guard.
    pub fn resource_estimate(&self) -> usize {
        (1usize << self.system.n_qubits) * self.system.m_max
    }

    /// SHA-256 over the canonical JSON form of the resolved config. Every
    /// field that can influence a result row participates; the output
    /// directory is presentation only and stays out, so the same
    /// experiment rerun into another folder keeps its identity.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("resolved config serializes");
        value.as_object_mut().expect("config is an object").remove("output");
        let canonical = serde_json::to_string(&value).expect("canonical form serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn has_method(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }
}

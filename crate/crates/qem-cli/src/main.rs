//! `qem`: drives the mitigation experiments from declarative TOML configs.
//!
//! Exit codes: 0 success, 2 config error, 3 acceptance-assertion or oracle
//! failure, 4 resource limit exceeded, 1 runtime failure.

mod config;
mod experiments;
mod oracle;
mod table;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{ConfigError, ResolvedConfig};

#[derive(Parser)]
#[command(
    name = "qem",
    version,
    about = "Experiment driver for the subspace-expansion mitigation engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a TOML config.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Dotted-path override, e.g. --set noise.n_tot=0.5 (repeatable).
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
        /// Output directory; overrides the config's `output` field.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Parse, resolve, and echo a config without running anything.
    Validate {
        /// Path to the experiment config.
        config: PathBuf,
        /// Dotted-path override, e.g. --set noise.n_tot=0.5 (repeatable).
        #[arg(long = "set", value_name = "PATH=VALUE")]
        set: Vec<String>,
    },
    /// Run a named brute-force cross-check suite.
    Oracle {
        /// One of: cyclic-shift, distillation, richardson, perturbation,
        /// closed-form, all.
        check: String,
    },
}

const EXIT_OK: i32 = 0;
const EXIT_RUNTIME: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_ASSERTION: i32 = 3;
const EXIT_RESOURCE: i32 = 4;

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, set, out } => run(&config, &set, out.as_deref()),
        Command::Validate { config, set } => validate(&config, &set),
        Command::Oracle { check } => run_oracle(&check),
    };
    std::process::exit(code);
}

fn load(path: &Path, set: &[String], out: Option<&Path>) -> Result<ResolvedConfig, i32> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("config error: cannot read {}: {e}", path.display());
            return Err(EXIT_CONFIG);
        }
    };
    let out_str = out.map(|p| p.to_string_lossy().into_owned());
    match config::load_config(&text, set, out_str.as_deref()) {
        Ok(cfg) => Ok(cfg),
        Err(e @ ConfigError::Schema(_)) => {
            eprintln!("{e}");
            Err(EXIT_CONFIG)
        }
        Err(e @ ConfigError::Resource(_)) => {
            eprintln!("{e}");
            Err(EXIT_RESOURCE)
        }
    }
}

fn run(path: &Path, set: &[String], out: Option<&Path>) -> i32 {
    let cfg = match load(path, set, out) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    println!(
        "{}: {} qubits, resource estimate {} (seed {}, config {})",
        cfg.kind.id(),
        cfg.system.n_qubits,
        cfg.resource_estimate(),
        cfg.seed,
        &cfg.hash()[..12]
    );
    let started = Instant::now();
    let output = match experiments::run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("{e}");
            return EXIT_RUNTIME;
        }
    };
    let wall = started.elapsed().as_secs_f64();
    let dir = PathBuf::from(&cfg.output);
    if let Err(e) =
        table::emit_outputs(&dir, &cfg, &output.table, &output.assertions, &output.extra_files, wall)
    {
        eprintln!("cannot write outputs to {}: {e}", dir.display());
        return EXIT_RUNTIME;
    }
    println!(
        "{} rows in {:.2} s -> {}",
        output.table.rows().len(),
        wall,
        dir.join("results.csv").display()
    );
    for note in output.table.annotations() {
        println!("note: {note}");
    }
    for a in &output.assertions {
        println!("assert {}: {}  {}", a.name, if a.passed { "PASS" } else { "FAIL" }, a.detail);
    }
    if output.all_assertions_pass() {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

fn validate(path: &Path, set: &[String]) -> i32 {
    let cfg = match load(path, set, None) {
        Ok(cfg) => cfg,
        Err(code) => return code,
    };
    println!("config ok: {}", cfg.kind.id());
    println!("  seed            {}", cfg.seed);
    println!(
        "  methods         {}",
        cfg.methods.iter().map(|m| m.id()).collect::<Vec<_>>().join(", ")
    );
    println!(
        "  system          {} qubits, depth {}, {} layout, {} levels, m_max {}",
        cfg.system.n_qubits, cfg.system.depth, cfg.system.layout, cfg.system.levels, cfg.system.m_max
    );
    println!(
        "  noise           n_tot {}, epsilon {}, sigma {}, trials {}",
        cfg.noise.n_tot, cfg.noise.epsilon, cfg.noise.sigma, cfg.noise.trials
    );
    println!(
        "  shots           {}",
        if cfg.shots.infinite {
            "infinite".to_string()
        } else {
            format!("{} total, {} bins", cfg.shots.total, cfg.shots.bins)
        }
    );
    println!("  cutoff          {:e}", cfg.cutoff);
    println!("  output          {}", cfg.output);
    println!("  resource        {} of {}", cfg.resource_estimate(), config::RESOURCE_LIMIT);
    println!("  config hash     {}", cfg.hash());
    EXIT_OK
}

fn run_oracle(check: &str) -> i32 {
    let Some(reports) = oracle::run_check(check) else {
        eprintln!(
            "config error: unknown check '{check}' (expected one of {})",
            oracle::CHECK_NAMES.join(", ")
        );
        return EXIT_CONFIG;
    };
    let mut all_passed = true;
    for r in &reports {
        println!("oracle {}: {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
        all_passed &= r.passed;
    }
    if all_passed {
        EXIT_OK
    } else {
        EXIT_ASSERTION
    }
}

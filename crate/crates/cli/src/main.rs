//! `tqem`: config-driven mitigated Ramsey sweeps.
//!
//! Exit codes: 0 on success, 2 when the configuration is invalid, 3 when
//! the computation or output fails.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};
use tqem_core::mitigation::MitigationPlan;
use tqem_core::qmatrix::AxisAngle;
use tqem_core::sensing::{plan_for, sweep, NoiseSource};
use tqem_core::spinbath::CoherenceCurve;

use config::{ExperimentConfig, Format, NoiseConfig, Overrides};

#[derive(Parser)]
#[command(name = "tqem", version, about = "Quasiprobability-mitigated Ramsey magnetometry sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the τ sweep and write the result table.
    Run(Common),
    /// Check a configuration file and report every problem.
    Validate(Common),
    /// Print the mitigation plan for the configured noise at one τ.
    Plan {
        #[command(flatten)]
        common: Common,
        /// Evolution time in μs.
        #[arg(long)]
        tau: f64,
    },
    /// Write the spin-bath coherence on the τ grid.
    Bath(Common),
}

#[derive(Args)]
struct Common {
    /// TOML configuration, or a `.meta.json` sidecar from an earlier run.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Invalid(Vec<String>),
    Runtime(String),
}

impl From<tqem_core::Error> for Failure {
    fn from(e: tqem_core::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(problems)) => {
            for p in problems {
                eprintln!("invalid config: {p}");
            }
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

/// Configuration text; sidecars carry it under `config`.
fn read_config_text(path: &Path) -> Result<String, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Invalid(vec![format!("cannot read {}: {e}", path.display())]))?;
    if path.extension().is_some_and(|e| e == "json") {
        let meta: Value =
            serde_json::from_str(&text).map_err(|e| Failure::Invalid(vec![format!("{}: {e}", path.display())]))?;
        return meta
            .get("config")
            .and_then(Value::as_str)
            .map(str::to_owned)
            .ok_or_else(|| Failure::Invalid(vec![format!("{} has no embedded config", path.display())]));
    }
    Ok(text)
}

fn load(common: &Common) -> Result<ExperimentConfig, Failure> {
    let text = read_config_text(&common.config)?;
    let raw = config::parse(&text).map_err(Failure::Invalid)?;
    let overrides = Overrides { seed: common.seed, out: common.out.clone(), format: common.format };
    config::validate(raw, &overrides).map_err(Failure::Invalid)
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Invalid(vec!["--threads must be ≥ 1".into()]));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate(common) => {
            let cfg = load(&common)?;
            println!("ok: {} τ points, {} shots, strategy {:?}", cfg.sensing.tau_grid.len(), cfg.shots, cfg.strategy);
            Ok(())
        }
        Command::Run(common) => {
            set_threads(common.threads)?;
            let cfg = load(&common)?;
            run(&cfg)
        }
        Command::Plan { common, tau } => {
            let cfg = load(&common)?;
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Failure::Invalid(vec!["--tau must be finite and ≥ 0".into()]));
            }
            let source = noise_source(&cfg)?;
            let noise = source.measurement_channel(tau)?;
            let plan = plan_for(cfg.strategy, &source, &noise, tau)?;
            let text = serde_json::to_string_pretty(&plan_json(&plan, tau)).expect("plain JSON") + "\n";
            emit(&cfg, &text, "plan", json!({ "tau_us": tau }))
        }
        Command::Bath(common) => {
            set_threads(common.threads)?;
            let cfg = load(&common)?;
            let curve = bath_curve(&cfg)?;
            let text = match cfg.format {
                Format::Csv => output::curve_csv(&curve),
                Format::Json => output::curve_json(&curve),
            };
            emit(&cfg, &text, "bath", json!({}))
        }
    }
}

fn bath_curve(cfg: &ExperimentConfig) -> Result<CoherenceCurve, Failure> {
    match &cfg.noise {
        NoiseConfig::Bath(params) => Ok(params.coherence(&cfg.sensing.tau_grid)?),
        NoiseConfig::Channel(_) => {
            Err(Failure::Invalid(vec!["the bath command needs noise.kind = \"spin_bath\"".into()]))
        }
    }
}

fn noise_source(cfg: &ExperimentConfig) -> Result<NoiseSource, Failure> {
    Ok(match &cfg.noise {
        NoiseConfig::Channel(spec) => NoiseSource::Channel(spec.clone()),
        NoiseConfig::Bath(_) => NoiseSource::Bath(bath_curve(cfg)?),
    })
}

fn run(cfg: &ExperimentConfig) -> Result<(), Failure> {
    let source = noise_source(cfg)?;
    let result = sweep(&cfg.sensing, &source, cfg.strategy, cfg.shots, cfg.seed)?;
    let text = match cfg.format {
        Format::Csv => output::sweep_csv(&result.rows),
        Format::Json => output::sweep_json(&result.rows),
    };
    let flagged = result.rows.iter().filter(|r| !r.invertible()).count();
    emit(cfg, &text, "run", json!({ "rows": result.rows.len(), "non_invertible_rows": flagged }))
}

/// Write to the configured path plus sidecar, or to stdout.
fn emit(cfg: &ExperimentConfig, text: &str, command: &str, extra: Value) -> Result<(), Failure> {
    let Some(path) = &cfg.output_path else {
        print!("{text}");
        return Ok(());
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let toml_text = toml::to_string(&cfg.raw).map_err(|e| Failure::Runtime(e.to_string()))?;
    let meta = output::meta_json(command, &toml_text, cfg.seed, extra);
    let meta_path = output::meta_path(path);
    std::fs::write(&meta_path, meta).map_err(|e| Failure::Runtime(format!("{}: {e}", meta_path.display())))?;
    Ok(())
}

fn rotation_json(r: &AxisAngle) -> Value {
    json!({ "axis": r.axis, "angle": r.angle })
}

fn plan_json(plan: &MitigationPlan, tau: f64) -> Value {
    let circuits: Vec<Value> = plan
        .circuits()
        .iter()
        .map(|c| {
            json!({
                "sign": c.sign,
                "weight": c.weight,
                "shot_fraction": c.shot_fraction,
                "needs_ancilla": c.realization.needs_ancilla,
                "nu": c.realization.nu,
                "mu": c.realization.mu,
                "pre_rotation": rotation_json(&c.realization.pre_rotation),
                "post_rotation": rotation_json(&c.realization.post_rotation),
            })
        })
        .collect();
    json!({
        "tau_us": tau,
        "p": plan.p(),
        "overhead": plan.overhead(),
        "ancillas": plan.ancilla_count(),
        "reconstruction_error": plan.reconstruction_error(),
        "circuits": circuits,
    })
}

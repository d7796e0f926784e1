//! Command-line driver: one subcommand per experiment, emitting CSV data
//! files and a `summary.json` of acceptance gates. Exit code 0 iff all
//! gates pass.

use clap::{Args, Parser, Subcommand};
use rswave::config::{self, ExperimentConfig, ExperimentKind, GridSpec};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "rswave",
    about = "Desk-scale rotating shallow-water wave laboratory",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RunArgs {
    /// TOML experiment configuration; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV and summary artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Root seed override.
    #[arg(long)]
    seed: Option<u64>,

    /// Comma-separated ε list override, e.g. `0.1,0.05`.
    #[arg(long, value_name = "LIST")]
    eps_override: Option<String>,

    /// Grid size override, e.g. `48x48`.
    #[arg(long, value_name = "N1xN2")]
    grid_override: Option<String>,

    /// Suppress per-gate output.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Pointwise symbol eigenstructure verification.
    SymbolCheck(RunArgs),
    /// First Moyal correction against the Rossby Hamiltonian.
    MoyalD1(RunArgs),
    /// Diagonalization residual ε-sweep.
    DiagSweep(RunArgs),
    /// Bicharacteristic trapping and escape runs.
    Rays(RunArgs),
    /// Commutator positivity and propagation decay.
    Mourre(RunArgs),
    /// Wave-packet trapping under direct evolution.
    PdeTrap(RunArgs),
    /// Wave-packet escape under direct evolution.
    PdeDisperse(RunArgs),
    /// Parse and validate a configuration file, reporting all violations.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(kind: ExperimentKind, args: &RunArgs) -> Result<ExperimentConfig, Vec<String>> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| vec![format!("cannot read {}: {e}", path.display())])?;
            let cfg = config::validate(&text)?;
            if cfg.kind != kind {
                return Err(vec![format!(
                    "config kind `{}` does not match subcommand `{}`",
                    cfg.kind.label(),
                    kind.label()
                )]);
            }
            cfg
        }
        None => ExperimentConfig::minimal(kind),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(list) = &args.eps_override {
        let eps: Result<Vec<f64>, _> = list.split(',').map(|s| s.trim().parse::<f64>()).collect();
        match eps {
            Ok(values) => cfg.eps = Some(values),
            Err(e) => return Err(vec![format!("bad --eps-override: {e}")]),
        }
    }
    if let Some(spec) = &args.grid_override {
        let parts: Vec<&str> = spec.split('x').collect();
        let parsed = (|| -> Option<(usize, usize)> {
            if parts.len() != 2 {
                return None;
            }
            Some((parts[0].parse().ok()?, parts[1].parse().ok()?))
        })();
        match parsed {
            Some((n1, n2)) => {
                let (l1, l2) = cfg.grid.map(|g| (g.l1, g.l2)).unwrap_or((2.0, 2.0));
                cfg.grid = Some(GridSpec { n1, n2, l1, l2 });
            }
            None => return Err(vec![format!("bad --grid-override `{spec}`, expected N1xN2")]),
        }
    }
    let violations = cfg.check();
    if !violations.is_empty() {
        return Err(violations);
    }
    Ok(cfg)
}

fn execute(kind: ExperimentKind, args: &RunArgs) -> ExitCode {
    let cfg = match load_config(kind, args) {
        Ok(cfg) => cfg,
        Err(errors) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    let out_dir = args.out.join(kind.label());
    match rswave::experiment::run(&cfg, &out_dir) {
        Ok(summary) => {
            if !args.quiet {
                for gate in &summary.gates {
                    println!(
                        "[{}] {}: {:.6e} {} {:.6e} (criterion {})",
                        if gate.pass { "PASS" } else { "FAIL" },
                        gate.name,
                        gate.value,
                        gate.direction,
                        gate.threshold,
                        gate.criterion
                    );
                }
                println!(
                    "{}: {} ({} gates) -> {}",
                    kind.label(),
                    if summary.pass { "PASS" } else { "FAIL" },
                    summary.gates.len(),
                    out_dir.display()
                );
            }
            if summary.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("{}: error: {e}", kind.label());
            ExitCode::from(3)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::SymbolCheck(a) => execute(ExperimentKind::SymbolCheck, a),
        Command::MoyalD1(a) => execute(ExperimentKind::MoyalD1, a),
        Command::DiagSweep(a) => execute(ExperimentKind::DiagSweep, a),
        Command::Rays(a) => execute(ExperimentKind::Rays, a),
        Command::Mourre(a) => execute(ExperimentKind::Mourre, a),
        Command::PdeTrap(a) => execute(ExperimentKind::PdeTrap, a),
        Command::PdeDisperse(a) => execute(ExperimentKind::PdeDisperse, a),
        Command::Validate { config: path } => {
            let text = match std::fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("cannot read {}: {e}", path.display());
                    return ExitCode::from(2);
                }
            };
            match config::validate(&text) {
                Ok(cfg) => {
                    println!("ok: {}", cfg.kind.label());
                    ExitCode::SUCCESS
                }
                Err(errors) => {
                    for e in errors {
                        eprintln!("config error: {e}");
                    }
                    ExitCode::from(2)
                }
            }
        }
    }
}

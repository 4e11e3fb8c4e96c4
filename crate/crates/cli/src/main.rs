mod commands;
mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dam_core::evaluation::Execution;

use config::{Overrides, ResolvedRun};
use manifest::{CommandKind, Parameters, RunManifest};

/// Bad invocation or configuration shape; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser)]
#[command(name = "dam", version, about = "Delay alignment modulation link-level experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average spectral efficiency over a sweep of antennas or subcarriers.
    SeSweep(RunArgs),
    /// Analytic BER versus SNR.
    BerSweep(RunArgs),
    /// CCDF of the per-antenna block PAPR.
    Papr(RunArgs),
    /// Single-carrier DAM with path-based ZF beamforming.
    SingleCarrier(RunArgs),
    /// Run the invariant and oracle suite on small random instances.
    Validate(ValidateArgs),
    /// Rerun the command recorded in a manifest, sequentially.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Channel seed for every curve.
    #[arg(long)]
    seed: Option<u64>,
    /// Channel realizations per point.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run trials on one thread.
    #[arg(long)]
    sequential: bool,
    /// Oversampling factor of the PAPR waveform.
    #[arg(long, value_name = "FACTOR")]
    oversample_papr: Option<usize>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Also save the report and a manifest here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Test hook: perturb the ZF bases by this much so ZF checks must fail.
    #[arg(long, default_value_t = 0.0, hide = true)]
    zf_perturbation: f64,
}

#[derive(Args)]
struct ReplayArgs {
    manifest: PathBuf,
    /// Output directory; defaults to the manifest's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn execution(sequential: bool) -> Execution {
    if sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn run_resolved(command: CommandKind, run: &ResolvedRun, out: &Path, exec: Execution) -> Result<Vec<String>> {
    match command {
        CommandKind::SeSweep => commands::se_sweep(run, out, exec),
        CommandKind::BerSweep => commands::ber_sweep(run, out, exec),
        CommandKind::Papr => commands::papr(run, out, exec),
        CommandKind::SingleCarrier => commands::single_carrier(run, out, exec),
        CommandKind::Validate => unreachable!("validate has no resolved run"),
    }
}

fn create_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn run_command(command: CommandKind, args: RunArgs) -> Result<()> {
    let overrides = Overrides { seed: args.seed, trials: args.trials, oversample_papr: args.oversample_papr };
    let run = config::load(&args.config, &overrides)?;
    create_dir(&args.out)?;
    let outputs = run_resolved(command, &run, &args.out, execution(args.sequential))?;
    let manifest = RunManifest {
        command,
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: Some(args.config),
        seed: run.curves[0].experiment.channel.seed,
        sequential: args.sequential,
        parameters: Parameters::Run(run),
        outputs,
    };
    let path = manifest.write(&args.out)?;
    for o in &manifest.outputs {
        println!("{}", args.out.join(o).display());
    }
    println!("{}", path.display());
    Ok(())
}

fn run_validate(seed: u64, zf_perturbation: f64, out: Option<&Path>, config_path: Option<PathBuf>) -> Result<()> {
    if let Some(dir) = out {
        create_dir(dir)?;
    }
    let (report, outputs) = commands::validate(seed, zf_perturbation, out)?;
    println!("{report}");
    if let Some(dir) = out {
        let manifest = RunManifest {
            command: CommandKind::Validate,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path,
            seed,
            sequential: true,
            parameters: Parameters::Validate { zf_perturbation },
            outputs,
        };
        manifest.write(dir)?;
    }
    if !report.passed() {
        let names: Vec<_> = report.failed().map(|c| c.name).collect();
        bail!("invariant check failed: {}", names.join(", "));
    }
    Ok(())
}

fn replay(args: ReplayArgs) -> Result<()> {
    let manifest = RunManifest::read(&args.manifest)?;
    let out = match args.out {
        Some(dir) => dir,
        None => args.manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    match manifest.parameters {
        Parameters::Validate { zf_perturbation } => {
            run_validate(manifest.seed, zf_perturbation, Some(&out), manifest.config_path)
        }
        Parameters::Run(run) => {
            if manifest.command == CommandKind::Validate {
                bail!(UsageError("validate manifest carries run parameters".into()));
            }
            create_dir(&out)?;
            let outputs = run_resolved(manifest.command, &run, &out, Execution::Sequential)?;
            let replayed = RunManifest { sequential: true, outputs, parameters: Parameters::Run(run), ..manifest };
            let path = replayed.write(&out)?;
            for o in &replayed.outputs {
                println!("{}", out.join(o).display());
            }
            println!("{}", path.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SeSweep(a) => run_command(CommandKind::SeSweep, a),
        Command::BerSweep(a) => run_command(CommandKind::BerSweep, a),
        Command::Papr(a) => run_command(CommandKind::Papr, a),
        Command::SingleCarrier(a) => run_command(CommandKind::SingleCarrier, a),
        Command::Validate(a) => run_validate(a.seed, a.zf_perturbation, a.out.as_deref(), None),
        Command::Replay(a) => replay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

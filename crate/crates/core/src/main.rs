use clap::{Parser, Subcommand};
use hyperpair::cli::{self, AxisKind, CliError, Command, RunConfig, RunOptions};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "hyperpair",
    version,
    about = "Hyperentangled photon-pair source simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Option<Cmd>,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Use expected counts instead of Poisson samples.
    #[arg(long, global = true)]
    noiseless: bool,
    /// Worker threads.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Re-run a previous bundle from its manifest and resolved configuration.
    #[arg(long, global = true)]
    from_bundle: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// HOMI scans and (V, phi_freq) fits.
    HomiScan,
    /// Polarization tomography over channels and waveshaper phases.
    Qst,
    /// Combined HOMI + tomography run with the global-fidelity bound.
    Joint,
    /// Concurrence sweep over one source imperfection.
    Sweep {
        #[arg(long, value_parser = parse_axis)]
        axis: AxisKind,
    },
    /// Parse and validate a configuration, printing the resolved form.
    ValidateConfig,
}

fn parse_axis(s: &str) -> Result<AxisKind, String> {
    s.parse().map_err(|e: CliError| e.to_string())
}

fn execute(args: Args) -> Result<(), CliError> {
    let (config, options) = match (&args.from_bundle, args.command) {
        (Some(dir), cmd) => {
            let (config, mut options) = cli::load_bundle(dir)?;
            if let Some(seed) = args.seed {
                options.seed = seed;
            }
            options.noiseless |= args.noiseless;
            if let Some(cmd) = cmd {
                let (command, axis) = to_command(cmd)?;
                if command != options.command || (axis.is_some() && axis != options.axis) {
                    return Err(CliError::Config(format!(
                        "bundle was produced by `{}`",
                        options.command
                    )));
                }
            }
            (config, options)
        }
        (None, Some(Cmd::ValidateConfig)) => {
            let config = load_config(&args)?;
            emit(&serde_json::to_string_pretty(&config).expect("config serializes"));
            return Ok(());
        }
        (None, Some(cmd)) => {
            let config = load_config(&args)?;
            let (command, axis) = to_command(cmd)?;
            let options = RunOptions {
                command,
                seed: args.seed.unwrap_or(config.seed),
                noiseless: args.noiseless,
                axis,
            };
            (config, options)
        }
        (None, None) => {
            return Err(CliError::Config(
                "a subcommand or --from-bundle is required".into(),
            ))
        }
    };
    let mut config = config;
    config.seed = options.seed;
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output_dir));
    let workers = args.workers.unwrap_or_else(|| {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    });
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    let bundle = cli::run_with_workers(&config, options, workers)?;
    bundle.write(&dir)?;
    if let Some(summary) = bundle.summary() {
        emit(&summary.to_string());
    }
    eprintln!("wrote {} files to {}", bundle.files().len(), dir.display());
    Ok(())
}

fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn to_command(cmd: Cmd) -> Result<(Command, Option<AxisKind>), CliError> {
    Ok(match cmd {
        Cmd::HomiScan => (Command::HomiScan, None),
        Cmd::Qst => (Command::Qst, None),
        Cmd::Joint => (Command::Joint, None),
        Cmd::Sweep { axis } => (Command::Sweep, Some(axis)),
        Cmd::ValidateConfig => {
            return Err(CliError::Config(
                "validate-config cannot be combined with --from-bundle".into(),
            ))
        }
    })
}

fn load_config(args: &Args) -> Result<RunConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hyperpair: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

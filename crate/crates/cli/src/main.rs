use std::path::PathBuf;
use std::process::ExitCode;

use arp_core::runner::{execute, Command, ExperimentConfig};
use clap::{Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "rydberg-arp", version, about = "Rydberg CkZ gates by two-photon adiabatic rapid passage")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Experiment document (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "RYDBERG_ARP_THREADS")]
    threads: Option<usize>,

    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Simulate the configured gate and write superposition traces.
    Simulate,
    /// Optimize the analytic ARP parameters.
    OptimizeAnalytic,
    /// dCRAB envelope search on top of the configured pulses.
    OptimizeDcrab,
    /// Fidelity over the intensity/detuning offset grid.
    SweepRobustness,
    /// Fidelity versus interatomic distance.
    SweepBlockade,
    /// Laser phase-noise Monte Carlo.
    NoiseMc,
    /// Optimize a two-atom CZ.
    OptimizeCz,
    /// Score the six-CZ CCZ circuit built from the configured CZ.
    Decompose,
    /// Write the control waveforms.
    ExportSchedule,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::OptimizeAnalytic => Command::OptimizeAnalytic,
            Cmd::OptimizeDcrab => Command::OptimizeDcrab,
            Cmd::SweepRobustness => Command::SweepRobustness,
            Cmd::SweepBlockade => Command::SweepBlockade,
            Cmd::NoiseMc => Command::NoiseMc,
            Cmd::OptimizeCz => Command::OptimizeCz,
            Cmd::Decompose => Command::Decompose,
            Cmd::ExportSchedule => Command::ExportSchedule,
        }
    }
}

fn run(cli: &Cli) -> arp_core::Result<()> {
    let Some(path) = &cli.config else {
        return Err(arp_core::Error::Config("--config is required".into()));
    };
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.clone().or_else(|| cfg.output_dir.clone());
    let record = execute(cli.command.into(), &cfg, out.as_deref())?;
    println!("{}", record.summary());
    if let Some(dir) = out {
        log::info!("wrote {} files to {}", record.files.len(), dir.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use depevap::experiment::{run_experiment, ExperimentKind, ExperimentManifest};
use depevap::model::BoundaryMode;
use depevap::Result;

#[derive(Debug, Parser)]
#[command(
    name = "depevap",
    version,
    about = "Deposition-evaporation states: exact checks, entropies and growth scaling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Free-growth roughness and mid-height series with exponent fits.
    Scaling(GridArgs),
    /// Mid-cut entropy from the Schmidt spectrum and from the closed formula.
    ExactEntropy(GridArgs),
    /// Mid-cut entropy from the forward-backward dynamic program.
    DpEntropy(GridArgs),
    /// Term residuals and sector spectrum of the parent Hamiltonian.
    HamiltonianCheck(GridArgs),
    /// Fidelity and success probability of sequential generation.
    SeqgenCheck(GridArgs),
    /// Entropy over an (L, p) grid with power-law fits in L.
    PhaseSweep(GridArgs),
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Manifest file; flags given alongside it override its values.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Odd system sizes, comma separated.
    #[arg(long = "L", value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    /// Deposition parameters in [0, 1], comma separated.
    #[arg(long = "p", value_delimiter = ',')]
    ps: Option<Vec<f64>>,
    /// Boundary modes, comma separated.
    #[arg(long = "mode", value_delimiter = ',')]
    modes: Option<Vec<BoundaryMode>>,
    #[arg(long, action = ArgAction::Set)]
    colored: Option<bool>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectories per scaling grid point.
    #[arg(long)]
    samples: Option<usize>,
    /// Slices per scaling trajectory.
    #[arg(long = "tmax")]
    t_max: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (ExperimentKind, GridArgs) {
        match self {
            Command::Scaling(a) => (ExperimentKind::Scaling, a),
            Command::ExactEntropy(a) => (ExperimentKind::ExactEntropy, a),
            Command::DpEntropy(a) => (ExperimentKind::DpEntropy, a),
            Command::HamiltonianCheck(a) => (ExperimentKind::HamiltonianCheck, a),
            Command::SeqgenCheck(a) => (ExperimentKind::SeqgenCheck, a),
            Command::PhaseSweep(a) => (ExperimentKind::PhaseSweep, a),
        }
    }
}

fn manifest_from(kind: ExperimentKind, args: GridArgs) -> Result<ExperimentManifest> {
    let mut m = match &args.manifest {
        Some(path) => {
            let m = ExperimentManifest::read(path)?;
            if m.kind != kind {
                return Err(depevap::Error::Manifest(format!(
                    "manifest describes {} but {kind} was requested",
                    m.kind
                )));
            }
            m
        }
        None => ExperimentManifest::defaults(kind),
    };
    if let Some(v) = args.sizes {
        m.sizes = v;
    }
    if let Some(v) = args.ps {
        m.ps = v;
    }
    if let Some(v) = args.modes {
        m.modes = v;
    }
    if let Some(v) = args.colored {
        m.colored = v;
    }
    if let Some(v) = args.seed {
        m.seed = v;
    }
    if let Some(v) = args.samples {
        m.samples = v;
    }
    if let Some(v) = args.t_max {
        m.t_max = v;
    }
    if let Some(v) = args.out {
        m.out = v;
    }
    m.validate()?;
    Ok(m)
}

fn main() -> ExitCode {
    let (kind, args) = Cli::parse().command.split();
    let outcome = manifest_from(kind, args).and_then(|m| run_experiment(&m));
    match outcome {
        Ok(outcome) => {
            for path in &outcome.data_files {
                println!("wrote {}", path.display());
            }
            println!("wrote {}", outcome.metadata_file.display());
            for s in &outcome.skipped {
                eprintln!("skipped L={} p={} mode={}: {}", s.size, s.p, s.mode, s.reason);
            }
            if outcome.is_partial() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

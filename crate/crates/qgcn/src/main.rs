use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qgcn::commands::{cmd_build, cmd_forward, cmd_sweep, cmd_train, load_config};
use qgcn::config::Mode;
use qgcn::{CliError, CliResult, RunConfig};

#[derive(Parser)]
#[command(name = "qgcn", version, about = "Simulated quantum spectral graph convolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Laplacian and eigendecomposition JSON.
    Build(Common),
    /// Layer report JSON.
    Forward(Common),
    /// CSV of overlap error against phase-register size.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Comma-separated phase-register sizes.
        #[arg(long, value_delimiter = ',')]
        q_list: Option<Vec<u32>>,
    },
    /// Finite-difference training trace CSV.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        targets: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn resolve(self) -> CliResult<RunConfig> {
        let mut c = load_config(self.config.as_deref())?;
        c.edges = self.edges.or(c.edges);
        c.features = self.features.or(c.features);
        c.mode = self.mode.unwrap_or(c.mode);
        c.out = self.out.or(c.out);
        c.seed = self.seed.unwrap_or(c.seed);
        Ok(c)
    }
}

fn run(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Build(common) => cmd_build(&common.resolve()?),
        Command::Forward(common) => cmd_forward(&common.resolve()?),
        Command::Sweep { common, q_list } => {
            let mut c = common.resolve()?;
            if let Some(q) = q_list {
                c.q_list = q;
            }
            cmd_sweep(&c)
        }
        Command::Train { common, targets } => {
            let mut c = common.resolve()?;
            c.targets = targets.or(c.targets);
            cmd_train(&c)
        }
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail(&CliError::Usage(e.to_string().trim_end().to_string())),
    };
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

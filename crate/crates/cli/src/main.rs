use clap::{Parser, Subcommand, ValueEnum};
use grassmann_cli::output::{Format, Sink};
use grassmann_cli::{commands, verify, EXIT_CONFIG};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "grassmann",
    version,
    about = "Twisted harmonic analysis on the complex Grassmannians SU(p+q)/S(U(p) x U(q))",
    after_help = "Exit codes: 0 success, 2 configuration error, 3 numerical certification failure."
)]
struct Cli {
    /// Write the output document here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; each subcommand has a natural default.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,
    /// Random seed; overrides the seed in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the config file and never changes results.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Positive restricted roots of the space, with multiplicities.
    Roots {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
    },
    /// Weight lattice table with exact dimensions and Casimir eigenvalues.
    Weights {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        l: i64,
        #[arg(long)]
        m1_max: i64,
    },
    /// Convolution factor count guaranteeing a C^nu density.
    Threshold {
        #[arg(long)]
        p: i64,
        #[arg(long)]
        q: i64,
        #[arg(long)]
        nu: i64,
        #[arg(long, default_value_t = 0.01)]
        epsilon: f64,
    },
    /// Table of spherical function values from a JSON config.
    Spherical {
        #[arg(long)]
        config: PathBuf,
    },
    /// Monte Carlo checks of the orbital-measure identities.
    ConvolveMc {
        #[arg(long)]
        config: PathBuf,
    },
    /// Certified partial sums of the spectral series; exit 3 when the tail
    /// certificate fails.
    Sobolev {
        #[arg(long)]
        config: PathBuf,
    },
    /// Density of a convolved orbital measure on a torus grid.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the verification suite and print its pass/fail table; exit 3 on
    /// any failure.
    Verify,
}

fn natural_format(command: &Command) -> Format {
    match command {
        Command::Roots { .. }
        | Command::Weights { .. }
        | Command::Spherical { .. }
        | Command::Synthesize { .. } => Format::Csv,
        Command::Threshold { .. }
        | Command::ConvolveMc { .. }
        | Command::Sobolev { .. }
        | Command::Verify => Format::Json,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = match cli.format {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Json) => Format::Json,
        None => natural_format(&cli.command),
    };
    let sink = Sink { out: cli.out.clone(), format };
    let result = match &cli.command {
        Command::Roots { p, q } => commands::cmd_roots(*p, *q, &sink),
        Command::Weights { p, q, l, m1_max } => {
            commands::cmd_weights(*p, *q, *l, *m1_max, &sink)
        }
        Command::Threshold { p, q, nu, epsilon } => {
            commands::cmd_threshold(*p, *q, *nu, *epsilon, &sink)
        }
        Command::Spherical { config } => commands::cmd_spherical(config, &sink),
        Command::ConvolveMc { config } => {
            commands::cmd_convolve_mc(config, cli.seed, cli.workers, &sink)
        }
        Command::Sobolev { config } => commands::cmd_sobolev(config, cli.workers, &sink),
        Command::Synthesize { config } => commands::cmd_synthesize(config, cli.workers, &sink),
        Command::Verify => verify::cmd_verify(cli.seed.unwrap_or(7), cli.workers, cli.out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

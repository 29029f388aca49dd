use clap::{Parser, Subcommand, ValueEnum};
use heisenet_cli::runner::{execute, Format, Mode, RunConfig};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "heisenet", version, about = "Run and validate register experiment files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Records,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the experiment and print the final readout.
    Run {
        file: PathBuf,
        /// Recompute every final amplitude by explicit path summation.
        #[arg(long)]
        paths: bool,
        /// Tolerance for matrix stages, the initial state, and conservation.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, value_enum, default_value_t = FormatArg::Table)]
        format: FormatArg,
        /// Append this many sampled outcomes; requires --seed.
        #[arg(long, requires = "seed")]
        sample: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Largest register rank this session will elaborate.
        #[arg(long, default_value_t = 20)]
        max_rank: u32,
        /// Largest number of paths --paths may enumerate per run.
        #[arg(long, default_value_t = heisenet::DEFAULT_PATH_BUDGET)]
        path_budget: u64,
    },
    /// Validate the experiment without printing a readout.
    Check {
        file: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 20)]
        max_rank: u32,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (file, config) = match cli.command {
        Command::Run { file, paths, tol, format, sample, seed, max_rank, path_budget } => (
            file,
            RunConfig {
                mode: Mode::Run,
                use_paths: paths,
                tolerance: tol,
                format: match format {
                    FormatArg::Table => Format::Table,
                    FormatArg::Records => Format::Records,
                },
                sample: sample.map(|count| (count, seed.unwrap_or(0))),
                max_rank,
                path_budget,
            },
        ),
        Command::Check { file, tol, max_rank } => (file, RunConfig::check(tol, max_rank)),
    };

    let shown = file.display().to_string();
    let text = match std::fs::read_to_string(&file) {
        Ok(text) => text,
        Err(e) => {
            eprintln!("{shown}: cannot read file: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = execute(&text, &shown, &config);
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(outcome.stdout.as_bytes());
    let _ = stdout.flush();
    let mut stderr = std::io::stderr().lock();
    let _ = stderr.write_all(outcome.stderr.as_bytes());
    let _ = stderr.flush();
    ExitCode::from(outcome.exit_code as u8)
}

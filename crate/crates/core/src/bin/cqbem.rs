use clap::{Parser, Subcommand};
use cqbem::app::{self, Options};
use cqbem::config::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cqbem", version, about = "Time-domain acoustic scattering with generalized impedance boundary conditions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scattering problem and write densities, fields and snapshots.
    Run,
    /// Refinement ladder against the sphere oracle.
    Convergence,
    /// Write the semi-analytic sphere solution.
    Reference,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p),
        None => RunConfig::parse("", std::path::Path::new(".")),
    }
    .unwrap_or_else(|e| {
        eprintln!("error: {e}");
        std::process::exit(2);
    });
    if let Some(out) = cli.out {
        cfg.set_output_dir(out);
    }
    let opts = Options { quiet: cli.quiet };
    let result = match cli.command {
        Command::Run => app::cmd_run(&cfg, opts).map(|_| ()),
        Command::Convergence => app::cmd_convergence(&cfg, opts).map(|rows| {
            if !opts.quiet {
                for r in rows {
                    println!("level {:>5}  error {:.4e}  eoc {:.3}", r.level, r.error, r.eoc);
                }
            }
        }),
        Command::Reference => app::cmd_reference(&cfg, opts).map(|_| ()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

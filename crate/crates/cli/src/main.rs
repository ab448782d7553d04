use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncc_cli::{cmd_attenuation, cmd_bench, cmd_gen, cmd_solve, load_corpus, seeded_corpus, CliError, RunConfig};
use ncc_core::Algorithm;

#[derive(Parser)]
#[command(name = "ncc", version, about = "Clustering with cluster-aware norm objectives")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a uniform random Euclidean instance as JSON.
    Gen {
        #[arg(long)]
        n: usize,
        #[arg(long = "facilities")]
        facilities: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve one instance.
    ///
    /// CSV columns: algorithm,cost,chi_f,chi_g,factor,time_ms and, with --oracle,
    /// oracle,ratio. Floats carry 9 significant digits; time_ms is empty unless
    /// --timing is given.
    Solve {
        instance: PathBuf,
        /// auto, ord-l1, sym-l1, chig, chif, k-apx or oracle.
        #[arg(long, default_value = "auto")]
        alg: String,
        /// Inner norm: l1, linf, lp:P, top:L, ord:w1,w2,... or a JSON object.
        #[arg(long, default_value = "l1")]
        inner: String,
        /// Outer norm, same syntax as --inner.
        #[arg(long, default_value = "l1")]
        outer: String,
        #[arg(long)]
        k: Option<usize>,
        /// Seeded random choice of the special group in the rounding.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        oracle: bool,
        /// CSV output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Cap on candidate radius vectors per guess.
        #[arg(long)]
        cap: Option<u64>,
        /// Write relaxation events of the winning guess as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Compare solvers with the exact optimum.
    ///
    /// CSV columns: instance,algorithm,cost,oracle,ratio,bound,time_ms, followed by
    /// one summary row per algorithm holding the largest ratio. An empty bound
    /// means a heuristic subroutine was used. Exit code 4 if a ratio exceeds its bound.
    Bench {
        /// Directory of instance JSON files.
        #[arg(long, conflicts_with = "seeds")]
        corpus: Option<PathBuf>,
        /// Number of random instances to generate instead of a corpus.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        timing: bool,
    },
    /// Print the attenuation of a norm at arity d.
    Attenuation {
        norm: String,
        #[arg(long)]
        d: usize,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { n, facilities, k, dim, seed, out } => cmd_gen(n, facilities, k, dim, seed, out.as_deref()),
        Command::Solve { instance, alg, inner, outer, k, seed, oracle, out, cap, trace, timing } => {
            let algorithm: Algorithm = alg.parse().map_err(|e: ncc_core::Error| CliError::Input(e.to_string()))?;
            let cfg = RunConfig { instance, inner, outer, algorithm, k, seed, out, oracle, cap, trace, timing };
            print!("{}", cmd_solve(&cfg)?);
            Ok(())
        }
        Command::Bench { corpus, seeds, seed, out, timing } => {
            let entries = match (corpus, seeds) {
                (Some(dir), _) => load_corpus(&dir)?,
                (None, Some(s)) => seeded_corpus(s, seed)?,
                (None, None) => return Err(CliError::Input("give --corpus or --seeds".into())),
            };
            cmd_bench(&entries, out.as_deref(), timing).map(|_| ())
        }
        Command::Attenuation { norm, d } => {
            println!("{}", cmd_attenuation(&norm, d)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

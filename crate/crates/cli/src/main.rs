mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Optimal additive-noise densities by Fisher-information minimization.
#[derive(Debug, Parser)]
#[command(name = "fisher-noise", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Design the optimal density; writes result JSON and `<out>.density.csv`.
    Design {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep budgets and write `rho,fisher,quality,product` rows.
    Frontier {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated, strictly increasing budgets.
        #[arg(long, value_delimiter = ',', required = true)]
        rhos: Vec<f64>,
    },
    /// Draw noise samples from the designed density.
    Sample {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Monte-Carlo maximum-likelihood attack on an identity query.
    Attack {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100_000)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// True query answer.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x: f64,
    },
    /// Compare designs against closed-form densities.
    Verify {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Design { problem, out } => commands::design(&problem, &out),
        Command::Frontier { problem, out, rhos } => commands::frontier(&problem, &out, &rhos),
        Command::Sample {
            problem,
            out,
            count,
            seed,
        } => commands::sample(&problem, &out, count, seed),
        Command::Attack {
            problem,
            out,
            trials,
            seed,
            x,
        } => commands::attack(&problem, &out, trials, seed, x),
        Command::Verify { out } => commands::verify(out.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("{}", failure.to_json());
            failure.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn rhos_split_on_commas() {
        let cli = Cli::try_parse_from([
            "fisher-noise",
            "frontier",
            "--problem",
            "p.json",
            "--out",
            "f.csv",
            "--rhos",
            "0.5,1,2",
        ])
        .unwrap();
        match cli.command {
            Command::Frontier { rhos, .. } => assert_eq!(rhos, vec![0.5, 1.0, 2.0]),
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn negative_query_answer_parses() {
        let cli = Cli::try_parse_from([
            "fisher-noise",
            "attack",
            "--problem",
            "p.json",
            "--out",
            "a.json",
            "--x",
            "-1.5",
        ])
        .unwrap();
        assert!(matches!(cli.command, Command::Attack { x, seed: 42, .. } if x == -1.5));
    }
}

//! Command-line front end: Monte Carlo sweeps, one-shot estimation of a
//! stored dataset, and the runtime invariant suite.
//!
//! Exit codes: 0 on success, 1 on input errors (malformed flags, specs or
//! data files), 2 on numerical failures.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use subspace_bayes::estimators::gibbs_estimate_seeded;
use subspace_bayes::{
    imap_estimate, read_dataset, run_selftest, run_sweep, svd_estimate, DataSet, Error,
    EstimatorTag, OrthonormalBasis, SweepSpec,
};

#[derive(Parser)]
#[command(
    name = "subspace-bayes",
    version,
    about = "Joint Bayesian estimation of close subspaces: sweeps, estimation, selftest"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo sweep described by a JSON spec and write the
    /// summary CSV.
    Sweep {
        /// Path to the sweep spec (JSON).
        #[arg(long)]
        spec: PathBuf,
        /// Override the master seed of the base scenario.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads for trial-level parallelism (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
        /// Override the CSV output path from the spec.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Load a dataset descriptor and print per-estimator subspace bases and
    /// principal angles.
    Estimate {
        /// Path to the dataset descriptor (JSON).
        #[arg(long)]
        data: PathBuf,
        /// Override the seed of the sampler stream.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the invariant suite at tiny dimensions.
    Selftest {
        /// Seed for the suite's random streams.
        #[arg(long, default_value_t = 0x5EED)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Sweep {
            spec,
            seed,
            threads,
            out,
        } => {
            let mut spec = SweepSpec::from_path(&spec)?;
            if let Some(seed) = seed {
                spec.base.seed = seed;
            }
            if let Some(out) = out {
                spec.output_path = out.display().to_string();
            }
            let summary = run_sweep(&spec, threads)?;
            for row in &summary {
                let msd: Vec<String> = row.mean_msd.iter().map(|v| format!("{v:.6}")).collect();
                println!(
                    "{}={:<8} {:<5} mean_msd=[{}] n={}",
                    row.sweep_variable.as_str(),
                    row.sweep_value,
                    row.estimator,
                    msd.join(", "),
                    row.n_trials
                );
            }
            println!(
                "wrote {} summary rows to {}",
                summary.len(),
                spec.output_path
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Estimate { data, seed } => {
            let dataset = read_dataset(&data)?;
            let seed = seed.unwrap_or(dataset.config.seed);
            print_estimates(&dataset, seed)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Selftest { seed } => {
            let report = run_selftest(seed);
            for c in &report.checks {
                let status = if c.passed { "PASS" } else { "FAIL" };
                println!("{status} {} ({})", c.name, c.detail);
            }
            if report.all_passed() {
                println!("selftest: all {} checks passed", report.checks.len());
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!("selftest: failures detected");
                Ok(ExitCode::from(2))
            }
        }
    }
}

fn print_estimates(data: &DataSet, seed: u64) -> Result<(), Error> {
    let r = data.config.r;
    for tag in EstimatorTag::ALL {
        let bases: Vec<OrthonormalBasis> = match tag {
            EstimatorTag::Svd => data
                .x
                .iter()
                .map(|xk| svd_estimate(xk, r).map(|e| e.basis))
                .collect::<Result<_, _>>()?,
            EstimatorTag::Gibbs => gibbs_estimate_seeded(data, seed)?.bases,
            EstimatorTag::Imap => imap_estimate(data)?.bases,
        };
        println!("estimator: {tag}");
        for (k, basis) in bases.iter().enumerate() {
            println!("  subspace {} basis ({} x {}):", k + 1, basis.m(), basis.r());
            for i in 0..basis.m() {
                let row: Vec<String> = (0..basis.r())
                    .map(|j| format!("{:>12.6}", basis.matrix()[(i, j)]))
                    .collect();
                println!("    {}", row.join(" "));
            }
        }
        let angles = subspace_bayes::principal_angles(&bases[0], &bases[1])?.degrees();
        let rendered: Vec<String> = angles.iter().map(|a| format!("{a:.4}")).collect();
        println!("  angles_deg: {}", rendered.join(" "));
    }
    Ok(())
}

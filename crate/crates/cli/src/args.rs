use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "pipm", version, about = "Interior-point LP solver with delayed scaling")]
pub struct Cli {
    /// Only report through the exit code.
    #[arg(long, short, global = true)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an MPS file.
    Solve(SolveArgs),
    /// Write a random instance with a planted optimum and its certificate.
    Generate(GenerateArgs),
    /// Report condition numbers of reused normal-matrix factors along a run.
    Probe(ProbeArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Algorithm {
    Pd,
    Primal,
    PrimalExact,
    Hybrid,
}

/// `theory`, `adaptive`, or a fixed value in (0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauArg {
    Theory,
    Adaptive,
    Fixed(f64),
}

impl FromStr for TauArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "theory" => Ok(TauArg::Theory),
            "adaptive" => Ok(TauArg::Adaptive),
            _ => {
                let v: f64 = s.parse().map_err(|_| format!("expected theory, adaptive or a number, got {s:?}"))?;
                if v > 0.0 && v < 1.0 {
                    Ok(TauArg::Fixed(v))
                } else {
                    Err(format!("tau must lie in (0, 1), got {v}"))
                }
            }
        }
    }
}

pub fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be positive, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_count(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Debug, Args)]
pub struct EngineArgs {
    #[arg(long, value_enum, default_value = "hybrid")]
    pub algorithm: Algorithm,
    /// Target for max{e_p, e_d, e_g}.
    #[arg(long, default_value = "1e-10", value_parser = positive)]
    pub tol: f64,
    #[arg(long, default_value = "100", value_parser = positive_count)]
    pub max_iter: usize,
    /// Barrier reduction of the primal engine.
    #[arg(long, default_value = "adaptive")]
    pub tau: TauArg,
    /// Threshold separating large and small coordinates.
    #[arg(long, default_value = "1", value_parser = positive)]
    pub nu: f64,
    /// Preconditioner refresh radius.
    #[arg(long, default_value = "0.1", value_parser = positive)]
    pub theta: f64,
    /// Largest step, in thresholded distance, that allows the switch.
    #[arg(long, default_value = "0.1", value_parser = positive)]
    pub switch_dist: f64,
    /// Smallest factorize/substitute time ratio that allows the switch.
    #[arg(long, default_value = "30", value_parser = positive)]
    pub switch_ratio: f64,
    /// Use this time ratio instead of measuring one.
    #[arg(long, hide = true, value_parser = positive)]
    pub time_ratio: Option<f64>,
    /// Solve the dual problem instead.
    #[arg(long)]
    pub dualize: bool,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, short, value_parser = positive_count)]
    pub m: usize,
    #[arg(long, short, value_parser = positive_count)]
    pub n: usize,
    #[arg(long, default_value = "0")]
    pub seed: u64,
    /// Zero part of the planted basis.
    #[arg(long)]
    pub degenerate: bool,
    /// Probability of an off-basis nonzero.
    #[arg(long, default_value = "0.2", value_parser = positive)]
    pub density: f64,
    /// Planted values are log-uniform in [1/range, range].
    #[arg(long, default_value = "2", value_parser = positive)]
    pub range: f64,
    /// MPS output path.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Certificate path; defaults to the MPS path with a `.cert` extension.
    #[arg(long)]
    pub certificate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    pub input: PathBuf,
    /// Iterate file with `x,…` and optional `s,…` lines; without it the
    /// selected engine is run and its iterates are probed.
    #[arg(long)]
    pub iterates: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
    /// Probe only the last this many iterates.
    #[arg(long, value_parser = positive_count)]
    pub tail: Option<usize>,
    /// Later iterates preconditioned by each iterate.
    #[arg(long, default_value = "1", value_parser = positive_count)]
    pub window: usize,
    /// CSV destination; standard output by default.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn tau_forms() {
        assert_eq!("theory".parse::<TauArg>(), Ok(TauArg::Theory));
        assert_eq!("0.05".parse::<TauArg>(), Ok(TauArg::Fixed(0.05)));
        assert!("1.5".parse::<TauArg>().is_err());
        assert!("fast".parse::<TauArg>().is_err());
    }

    #[test]
    fn defaults() {
        let cli = Cli::try_parse_from(["pipm", "solve", "a.mps"]).unwrap();
        let Command::Solve(s) = cli.command else { panic!() };
        assert_eq!(s.engine.algorithm, Algorithm::Hybrid);
        assert_eq!((s.engine.tol, s.engine.max_iter), (1e-10, 100));
        assert_eq!((s.engine.switch_dist, s.engine.switch_ratio), (0.1, 30.0));
        assert!(Cli::try_parse_from(["pipm", "solve", "a.mps", "--tol", "-1"]).is_err());
        assert!(Cli::try_parse_from(["pipm", "solve", "a.mps", "--max-iter", "0"]).is_err());
    }
}

mod args;

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::Path;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;
use log::LevelFilter;

use args::{Algorithm, Cli, Command, EngineArgs, GenerateArgs, ProbeArgs, SolveArgs, TauArg};
use pipm::generate::{generate, GeneratorConfig};
use pipm::hybrid::{hybrid_solve, SwitchPolicy, TimeRatio};
use pipm::pdipm::{pd_solve, pd_starting_point, PdConfig};
use pipm::pipm::{primal_solve, PrimalConfig, PrimalMode, TauRule};
use pipm::probe::{emit_probe_csv, probe_spectra, read_iterates, ProbeConfig, Snapshot};
use pipm::problem::{parse_mps, to_standard_form, DualizedLp, StandardLp};
use pipm::trace::emit_csv;
use pipm::{SolveResult, SolveStatus};

const EXIT_USAGE: u8 = 1;

fn status_code(status: SolveStatus) -> u8 {
    match status {
        SolveStatus::Optimal => 0,
        SolveStatus::IterationLimit => 2,
        SolveStatus::NumericalFailure => 3,
    }
}

/// Problem actually handed to an engine, with the map back to the model.
struct Prepared {
    original: StandardLp<f64>,
    dual: Option<DualizedLp<f64>>,
}

impl Prepared {
    fn load(path: &Path, dualize: bool) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let model = parse_mps::<f64>(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        let original = to_standard_form(&model).context("cannot convert to standard form")?;
        let dual = if dualize {
            Some(DualizedLp::new(&original).context("cannot dualize")?)
        } else {
            None
        };
        Ok(Self { original, dual })
    }

    fn lp(&self) -> &StandardLp<f64> {
        self.dual.as_ref().map_or(&self.original, |d| &d.lp)
    }

    /// Objective in the sense and units of the input model.
    fn objective(&self, res: &SolveResult<f64>) -> f64 {
        let standard = match &self.dual {
            Some(d) => d.primal_objective(res.objective),
            None => res.objective,
        };
        self.original.recovery.original_objective(standard)
    }
}

fn primal_config(e: &EngineArgs, record: bool) -> PrimalConfig<f64> {
    let tau = match e.tau {
        TauArg::Theory => TauRule::Theory,
        TauArg::Adaptive => TauRule::adaptive(),
        TauArg::Fixed(t) => TauRule::Fixed(t),
    };
    PrimalConfig {
        tau,
        theta: e.theta,
        nu: e.nu,
        tol: e.tol,
        max_iter: e.max_iter,
        mode: if e.algorithm == Algorithm::PrimalExact {
            PrimalMode::Exact
        } else {
            PrimalMode::DelayedScaling
        },
        record_iterates: record,
        ..PrimalConfig::practical()
    }
}

fn run_engine(p: &StandardLp<f64>, e: &EngineArgs, record: bool) -> Result<SolveResult<f64>> {
    let pd_cfg = PdConfig {
        tol: e.tol,
        max_iter: e.max_iter,
        record_iterates: record,
        ..PdConfig::default()
    };
    let res = match e.algorithm {
        Algorithm::Pd => pd_solve(p, &pd_cfg)?,
        Algorithm::Primal | Algorithm::PrimalExact => {
            let start = pd_starting_point(p)?;
            primal_solve(p, &primal_config(e, record), &start)?
        }
        Algorithm::Hybrid => {
            let policy = SwitchPolicy {
                dist_threshold: e.switch_dist,
                time_ratio_threshold: e.switch_ratio,
                nu: e.nu,
                ..SwitchPolicy::default()
            };
            let timing = e.time_ratio.map_or_else(TimeRatio::default, TimeRatio::Fixed);
            hybrid_solve(p, &pd_cfg, &primal_config(e, record), &policy, timing)?
        }
    };
    Ok(res)
}

/// One line, `key=value` pairs in a fixed order.
fn status_line(res: &SolveResult<f64>, objective: f64) -> String {
    format!(
        "status={} objective={:.16e} e_p={:.3e} e_d={:.3e} e_g={:.3e} iterations={} factorizations={} time={:.3}s",
        res.status,
        objective,
        res.metrics.e_p,
        res.metrics.e_d,
        res.metrics.e_g,
        res.iterations,
        res.factorizations,
        res.wall_time.as_secs_f64()
    )
}

fn solve(args: &SolveArgs, quiet: bool) -> Result<u8> {
    let prepared = Prepared::load(&args.input, args.engine.dualize)?;
    let res = run_engine(prepared.lp(), &args.engine, false)?;
    if let Some(path) = &args.trace {
        let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        emit_csv(&res.trace, io::BufWriter::new(file))?;
    }
    if let Some(reason) = &res.failure {
        log::error!("{reason}");
    }
    if !quiet {
        println!("{}", status_line(&res, prepared.objective(&res)));
    }
    Ok(status_code(res.status))
}

fn generate_files(args: &GenerateArgs, quiet: bool) -> Result<u8> {
    let cfg = GeneratorConfig {
        degenerate: args.degenerate,
        density: args.density,
        range: args.range,
        ..GeneratorConfig::new(args.m, args.n, args.seed)
    };
    let inst = generate(&cfg)?;
    let cert = args.certificate.clone().unwrap_or_else(|| args.output.with_extension("cert"));
    fs::write(&args.output, inst.mps()).with_context(|| format!("cannot write {}", args.output.display()))?;
    fs::write(&cert, inst.certificate()).with_context(|| format!("cannot write {}", cert.display()))?;
    if !quiet {
        println!("wrote {} and {} (objective {:.16e})", args.output.display(), cert.display(), inst.objective);
    }
    Ok(0)
}

fn probe(args: &ProbeArgs, quiet: bool) -> Result<u8> {
    let prepared = Prepared::load(&args.input, args.engine.dualize)?;
    let p = prepared.lp();
    let mut snapshots = match &args.iterates {
        Some(path) => {
            let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            read_iterates::<f64, _>(BufReader::new(file))?
        }
        None => {
            let res = run_engine(p, &args.engine, true)?;
            if res.status != SolveStatus::Optimal {
                log::warn!("engine stopped with status {}", res.status);
            }
            let mut duals = res.dual_iterates.into_iter().map(Some).chain(std::iter::repeat(None));
            res.iterates.into_iter().map(|x| Snapshot { x, s: duals.next().flatten() }).collect()
        }
    };
    if let Some(tail) = args.tail {
        snapshots.drain(..snapshots.len().saturating_sub(tail));
    }
    if snapshots.len() < 2 {
        bail!("need at least two iterates to probe, found {}", snapshots.len());
    }
    let rows = probe_spectra(p, &snapshots, &ProbeConfig { window: args.window, ..ProbeConfig::default() })?;
    match &args.output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            emit_probe_csv(&rows, io::BufWriter::new(file))?;
        }
        None if !quiet => emit_probe_csv(&rows, io::stdout().lock())?,
        None => {}
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let level = if cli.quiet { LevelFilter::Off } else { LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    let outcome = match &cli.command {
        Command::Solve(a) => solve(a, cli.quiet),
        Command::Generate(a) => generate_files(a, cli.quiet),
        Command::Probe(a) => probe(a, cli.quiet),
    };
    match outcome {
        Ok(code) => {
            let _ = io::stdout().flush();
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [SolveStatus::Optimal, SolveStatus::IterationLimit, SolveStatus::NumericalFailure].map(status_code);
        assert_eq!(codes, [0, 2, 3]);
        assert!(!codes.contains(&EXIT_USAGE));
    }

    #[test]
    fn exact_flag_selects_exact_mode() {
        let cli = Cli::try_parse_from(["pipm", "solve", "a.mps", "--algorithm", "primal-exact", "--tau", "0.05"]).unwrap();
        let Command::Solve(s) = cli.command else { panic!() };
        let cfg = primal_config(&s.engine, false);
        assert_eq!(cfg.mode, PrimalMode::Exact);
        assert_eq!(cfg.tau, TauRule::Fixed(0.05));
    }
}

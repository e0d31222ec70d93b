use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pipm::generate::parse_certificate;
use pipm::trace::read_csv;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests").join(name)
}

fn pipm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pipm")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Value of `key=` in a status line.
fn field(line: &str, key: &str) -> String {
    let prefix = format!("{key}=");
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(&prefix))
        .unwrap_or_else(|| panic!("no {key} in {line:?}"))
        .to_string()
}

fn mask_time(line: &str) -> String {
    line.split_whitespace()
        .map(|kv| if kv.starts_with("time=") { "time=<elapsed>s".to_string() } else { kv.to_string() })
        .collect::<Vec<_>>()
        .join(" ")
}

fn generated(dir: &Path, m: usize, n: usize, seed: u64) -> (PathBuf, PathBuf) {
    let mps = dir.join("inst.mps");
    let (m, n, seed) = (m.to_string(), n.to_string(), seed.to_string());
    let out = pipm(&["generate", "-m", &m, "-n", &n, "--seed", &seed, "-o", mps.to_str().unwrap()]);
    assert!(out.status.success(), "{out:?}");
    (mps.clone(), mps.with_extension("cert"))
}

#[test]
fn status_line_matches_golden_file() {
    let tiny = data("data/tiny.mps");
    let out = pipm(&["solve", tiny.to_str().unwrap(), "--algorithm", "pd"]);
    assert_eq!(out.status.code(), Some(0));
    let golden = fs::read_to_string(data("golden/tiny_pd.status")).unwrap();
    assert_eq!(mask_time(stdout(&out).trim()), golden.trim());
}

#[test]
fn every_engine_recovers_the_planted_objective() {
    let dir = tempfile::tempdir().unwrap();
    let (mps, cert) = generated(dir.path(), 20, 50, 3);
    let want = parse_certificate(&fs::read_to_string(cert).unwrap()).unwrap().objective;
    for alg in ["pd", "primal", "primal-exact", "hybrid"] {
        let out = pipm(&["solve", mps.to_str().unwrap(), "--algorithm", alg]);
        assert_eq!(out.status.code(), Some(0), "{alg}: {out:?}");
        let line = stdout(&out);
        assert_eq!(field(&line, "status"), "optimal");
        let got: f64 = field(&line, "objective").parse().unwrap();
        assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{alg}: {got} vs {want}");
    }
}

#[test]
fn missing_file_is_a_usage_error() {
    let out = pipm(&["solve", "definitely/not/here.mps"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn bad_flags_are_usage_errors() {
    let tiny = data("data/tiny.mps");
    for extra in [["--tol", "0"], ["--tau", "2"], ["--algorithm", "simplex"]] {
        let mut args = vec!["solve", tiny.to_str().unwrap()];
        args.extend(extra);
        assert_eq!(pipm(&args).status.code(), Some(1), "{extra:?}");
    }
}

#[test]
fn iteration_limit_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let (mps, _) = generated(dir.path(), 20, 50, 4);
    let out = pipm(&["solve", mps.to_str().unwrap(), "--algorithm", "pd", "--max-iter", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(field(&stdout(&out), "status"), "iteration_limit");
}

#[test]
fn quiet_prints_nothing() {
    let tiny = data("data/tiny.mps");
    let out = pipm(&["solve", tiny.to_str().unwrap(), "--quiet"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty() && out.stderr.is_empty());
}

#[test]
fn disabled_switch_reproduces_the_pd_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (mps, _) = generated(dir.path(), 25, 60, 8);
    let run = |alg: &str, extra: &[&str]| {
        let trace = dir.path().join(format!("{alg}.csv"));
        let mut args = vec!["solve", mps.to_str().unwrap(), "--algorithm", alg, "--trace", trace.to_str().unwrap()];
        args.extend(extra);
        assert_eq!(pipm(&args).status.code(), Some(0));
        read_csv(fs::File::open(trace).unwrap()).unwrap()
    };
    let pd = run("pd", &[]);
    let hy = run("hybrid", &["--switch-ratio", "1e9"]);
    assert_eq!(pd.len(), hy.len());
    for (a, b) in pd.iter().zip(&hy) {
        assert_eq!((a.iter, a.phase, a.mu, a.e_p, a.e_d, a.e_g, a.alpha), (b.iter, b.phase, b.mu, b.e_p, b.e_d, b.e_g, b.alpha));
    }
}

#[test]
fn fixed_time_ratio_makes_hybrid_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (mps, _) = generated(dir.path(), 30, 75, 5);
    let run = |name: &str| {
        let trace = dir.path().join(name);
        let out = pipm(&["solve", mps.to_str().unwrap(), "--time-ratio", "100", "--trace", trace.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        let rows = read_csv(fs::File::open(trace).unwrap()).unwrap();
        rows.into_iter().map(|r| (r.iter, r.phase, r.mu, r.e_g, r.factorized)).collect::<Vec<_>>()
    };
    let first = run("a.csv");
    assert!(first.iter().any(|r| r.1 == pipm::trace::Phase::Primal), "switch never fired");
    assert_eq!(first, run("b.csv"));
}

#[test]
fn generate_is_deterministic_and_writes_a_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let read = |sub: &str, extra: &[&str]| {
        let d = dir.path().join(sub);
        fs::create_dir(&d).unwrap();
        let mps = d.join("g.mps");
        let mut args = vec!["generate", "-m", "6", "-n", "15", "--seed", "42", "-o", mps.to_str().unwrap()];
        args.extend(extra);
        assert!(pipm(&args).status.success());
        (fs::read(&mps).unwrap(), fs::read_to_string(mps.with_extension("cert")).unwrap())
    };
    let a = read("a", &[]);
    assert_eq!(a, read("b", &[]));
    let cert = parse_certificate(&a.1).unwrap();
    assert_eq!((cert.m, cert.n, cert.basis.len()), (6, 15, 6));
    let degenerate = parse_certificate(&read("c", &["--degenerate"]).1).unwrap();
    assert!(degenerate.basis.len() < 6);
}

#[test]
fn probe_reads_an_iterate_file() {
    let dir = tempfile::tempdir().unwrap();
    let iterates = dir.path().join("it.txt");
    fs::write(&iterates, "x,1,1\ns,0.5,2\nx,1,1\nx,1.5,0.5\n").unwrap();
    let tiny = data("data/tiny.mps");
    let out = pipm(&["probe", tiny.to_str().unwrap(), "--iterates", iterates.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,j,kappa,kappa_pd");
    assert_eq!(lines.len(), 3);
    let kappa: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
    assert!((kappa - 1.0).abs() < 1e-8);
}

#[test]
fn probe_runs_an_engine_when_no_iterates_are_given() {
    let dir = tempfile::tempdir().unwrap();
    let (mps, _) = generated(dir.path(), 15, 40, 2);
    let csv = dir.path().join("probe.csv");
    let out = pipm(&["probe", mps.to_str().unwrap(), "--algorithm", "primal", "--tail", "4", "-o", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert!(f[2].parse::<f64>().unwrap() >= 1.0 - 1e-8);
        assert!(!f[3].is_empty());
    }
}

use pipm::generate::{generate, GeneratorConfig};
use pipm::hybrid::{hybrid_solve, SwitchPolicy, TimeRatio};
use pipm::linalg::CscMatrix;
use pipm::pdipm::{pd_solve, pd_starting_point, PdConfig};
use pipm::pipm::{primal_solve, PrimalConfig, PrimalMode};
use pipm::probe::{probe_spectra, read_iterates, write_iterates, ProbeConfig, Snapshot};
use pipm::problem::{parse_mps, to_standard_form, DualizedLp, StandardLp};
use pipm::trace::{emit_csv, read_csv};
use pipm::{SolveResult, SolveStatus};

// min −x − 2y  s.t.  x + y ≤ 4, x − y ≥ −2, z − x = 0, 0 ≤ x ≤ 3, y ≥ 0, z free
const MODEL: &str = "\
NAME          SMALL
ROWS
 N  COST
 L  CAP
 G  GAP
 E  LINK
COLUMNS
    X         COST      -1.0       CAP       1.0
    X         GAP       1.0        LINK      -1.0
    Y         COST      -2.0       CAP       1.0
    Y         GAP       -1.0
    Z         LINK      1.0
RHS
    RHS       CAP       4.0        GAP       -2.0
BOUNDS
 UP BND       X         3.0
 FR BND       Z
ENDATA
";

fn model() -> StandardLp<f64> {
    to_standard_form(&parse_mps::<f64>(MODEL).unwrap()).unwrap()
}

fn all_engines(p: &StandardLp<f64>) -> Vec<(&'static str, SolveResult<f64>)> {
    let start = pd_starting_point(p).unwrap();
    let exact = PrimalConfig {
        mode: PrimalMode::Exact,
        ..PrimalConfig::practical()
    };
    vec![
        ("pd", pd_solve(p, &PdConfig::default()).unwrap()),
        ("primal", primal_solve(p, &PrimalConfig::practical(), &start).unwrap()),
        ("primal-exact", primal_solve(p, &exact, &start).unwrap()),
        (
            "hybrid",
            hybrid_solve(p, &PdConfig::default(), &PrimalConfig::practical(), &SwitchPolicy::default(), TimeRatio::Fixed(100.0))
                .unwrap(),
        ),
    ]
}

#[test]
fn mps_model_solves_with_every_engine() {
    let p = model();
    for (name, res) in all_engines(&p) {
        assert_eq!(res.status, SolveStatus::Optimal, "{name}");
        assert!((p.original_objective(&res.state.x) + 7.0).abs() < 1e-8, "{name}");
        let x = p.recovery.recover(&res.state.x);
        for (got, want) in x.iter().zip([1.0, 3.0, 1.0]) {
            assert!((got - want).abs() < 1e-6, "{name}: {x:?}");
        }
    }
}

#[test]
fn dualized_model_has_the_same_optimum() {
    let p = model();
    let dual = DualizedLp::new(&p).unwrap();
    let res = pd_solve(&dual.lp, &PdConfig::default()).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let value = p.recovery.original_objective(dual.primal_objective(res.objective));
    assert!((value + 7.0).abs() < 1e-7, "{value}");
}

#[test]
fn single_precision_solve() {
    let inst = generate(&GeneratorConfig::new(15, 40, 21)).unwrap();
    let (m, n) = (inst.config.m, inst.config.n);
    let a: Vec<f32> = inst.a.to_dense().iter().map(|&v| v as f32).collect();
    let p = StandardLp::new(
        CscMatrix::from_dense(m, n, &a).unwrap(),
        inst.b.iter().map(|&v| v as f32).collect(),
        inst.c.iter().map(|&v| v as f32).collect(),
    )
    .unwrap();
    let cfg = PdConfig {
        tol: 1e-4f32,
        ..PdConfig::default()
    };
    let res = pd_solve(&p, &cfg).unwrap();
    assert_eq!(res.status, SolveStatus::Optimal);
    let err = (f64::from(res.objective) - inst.objective).abs() / inst.objective.abs().max(1.0);
    assert!(err < 1e-3, "{err}");
}

#[test]
fn trace_survives_a_csv_round_trip() {
    let p = generate(&GeneratorConfig::new(30, 75, 5)).unwrap().to_standard();
    let res = hybrid_solve(&p, &PdConfig::default(), &PrimalConfig::practical(), &SwitchPolicy::default(), TimeRatio::Fixed(100.0))
        .unwrap();
    assert_eq!(res.trace.len(), res.iterations);
    assert!(res.trace.windows(2).all(|w| w[0].iter + 1 == w[1].iter));
    let mut buf = Vec::new();
    let bytes = emit_csv(&res.trace, &mut buf).unwrap();
    assert_eq!(bytes as usize, buf.len());
    assert_eq!(read_csv(buf.as_slice()).unwrap(), res.trace);
}

#[test]
fn recorded_iterates_feed_the_probe() {
    let p = generate(&GeneratorConfig::new(12, 30, 8)).unwrap().to_standard();
    let cfg = PdConfig {
        record_iterates: true,
        ..PdConfig::default()
    };
    let res = pd_solve(&p, &cfg).unwrap();
    let snaps: Vec<Snapshot<f64>> = res
        .iterates
        .iter()
        .zip(&res.dual_iterates)
        .map(|(x, s)| Snapshot { x: x.clone(), s: Some(s.clone()) })
        .collect();
    let mut file = Vec::new();
    write_iterates(&snaps, &mut file).unwrap();
    let back: Vec<Snapshot<f64>> = read_iterates(file.as_slice()).unwrap();
    assert_eq!(back, snaps);
    let rows = probe_spectra(&p, &back, &ProbeConfig::default()).unwrap();
    assert_eq!(rows.len(), snaps.len() - 1);
    assert!(rows.iter().all(|r| r.kappa >= 1.0 - 1e-8 && r.kappa_pd.is_some()));
}

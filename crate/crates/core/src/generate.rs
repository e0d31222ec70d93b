//! Random LP instances with a planted optimal solution.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::CscMatrix;
use crate::problem::{write_mps, LpProblem, RowKind, Sense, StandardLp};

const MAX_ATTEMPTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorConfig {
    pub m: usize,
    pub n: usize,
    pub seed: u64,
    /// Zero some planted basic values so that `|ℬ| < m`.
    pub degenerate: bool,
    /// Probability of an off-basis entry being nonzero.
    pub density: f64,
    /// Planted values are log-uniform in `[1/range, range]`.
    pub range: f64,
}

impl GeneratorConfig {
    pub fn new(m: usize, n: usize, seed: u64) -> Self {
        Self {
            m,
            n,
            seed,
            degenerate: false,
            density: 0.2,
            range: 2.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.m >= self.n {
            return Err(Error::InvalidParameter(format!("need 0 < m < n, got m={} n={}", self.m, self.n)));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return Err(Error::InvalidParameter("density must lie in (0, 1]".into()));
        }
        if !(self.range >= 1.0) {
            return Err(Error::InvalidParameter("range must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct PlantedInstance {
    pub config: GeneratorConfig,
    pub a: CscMatrix<f64>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    /// Columns with `x⋆ > 0`, ascending.
    pub support: Vec<usize>,
    pub objective: f64,
}

/// Parsed certificate file.
#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub objective: f64,
    pub basis: Vec<usize>,
    pub m: usize,
    pub n: usize,
}

/// Gaussian elimination with partial pivoting; pivots below `1e-8·max|a|` count as singular.
fn nonsingular(mut a: Vec<f64>, k: usize) -> bool {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return false;
    }
    for col in 0..k {
        let (piv, val) = (col..k)
            .map(|r| (r, a[r * k + col].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if val <= 1e-8 * scale {
            return false;
        }
        if piv != col {
            for j in 0..k {
                a.swap(piv * k + j, col * k + j);
            }
        }
        let d = a[col * k + col];
        for r in col + 1..k {
            let f = a[r * k + col] / d;
            if f != 0.0 {
                for j in col..k {
                    a[r * k + j] -= f * a[col * k + j];
                }
            }
        }
    }
    true
}

fn log_uniform(rng: &mut ChaCha8Rng, range: f64) -> f64 {
    if range == 1.0 {
        return rng.gen_range(0.5..2.0);
    }
    let r = range.ln();
    rng.gen_range(-r..r).exp()
}

/// Draws an instance; deterministic in the configuration.
pub fn generate(cfg: &GeneratorConfig) -> Result<PlantedInstance> {
    cfg.validate()?;
    let (m, n) = (cfg.m, cfg.n);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for attempt in 0..MAX_ATTEMPTS {
        let basis = {
            let mut b = sample(&mut rng, n, m).into_vec();
            b.sort_unstable();
            b
        };
        let mut dense = vec![0.0f64; m * n];
        for v in dense.iter_mut() {
            if rng.gen_bool(cfg.density) {
                *v = rng.gen_range(-1.0..1.0);
            }
        }
        // a strong entry per basic column keeps A_B well conditioned at low density
        let perm = sample(&mut rng, m, m).into_vec();
        for (i, &j) in basis.iter().enumerate() {
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            dense[perm[i] * n + j] = sign * rng.gen_range(1.0..2.0);
        }
        for j in 0..n {
            if (0..m).all(|i| dense[i * n + j] == 0.0) {
                let i = rng.gen_range(0..m);
                dense[i * n + j] = rng.gen_range(-1.0..1.0);
            }
        }
        let ab: Vec<f64> = (0..m).flat_map(|i| basis.iter().map(move |&j| (i, j))).map(|(i, j)| dense[i * n + j]).collect();
        if !nonsingular(ab, m) {
            log::debug!("attempt {attempt}: singular basis, resampling");
            continue;
        }

        let mut x = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut is_basic = vec![false; n];
        for &j in &basis {
            is_basic[j] = true;
            x[j] = log_uniform(&mut rng, cfg.range);
        }
        for j in 0..n {
            if !is_basic[j] {
                s[j] = log_uniform(&mut rng, cfg.range);
            }
        }
        if cfg.degenerate {
            let zeroed = (m / 4).max(1).min(m);
            for k in sample(&mut rng, m, zeroed).iter() {
                x[basis[k]] = 0.0;
            }
        }
        let y: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = CscMatrix::from_dense(m, n, &dense)?;
        let b = a.mul_vec(&x);
        let aty = a.tr_mul_vec(&y);
        let c: Vec<f64> = (0..n).map(|j| aty[j] + s[j]).collect();
        let objective = (0..n).map(|j| c[j] * x[j]).sum();
        let support = (0..n).filter(|&j| x[j] > 0.0).collect();
        return Ok(PlantedInstance {
            config: cfg.clone(),
            a,
            b,
            c,
            x,
            y,
            s,
            support,
            objective,
        });
    }
    Err(Error::NumericalBreakdown("could not sample a full-rank constraint matrix"))
}

impl PlantedInstance {
    pub fn name(&self) -> String {
        let tag = if self.config.degenerate { "d" } else { "n" };
        format!("PLANT{}X{}{}S{}", self.config.m, self.config.n, tag, self.config.seed)
    }

    pub fn to_problem(&self) -> LpProblem<f64> {
        let (m, n) = (self.config.m, self.config.n);
        let mut lp = LpProblem::new(self.name(), Sense::Minimize);
        for i in 0..m {
            lp.add_row(format!("R{i}"), RowKind::Equal, self.b[i]);
        }
        for j in 0..n {
            lp.add_column(format!("X{j}"), self.c[j]);
        }
        for j in 0..n {
            let (rows, vals) = self.a.col(j);
            for (&i, &v) in rows.iter().zip(vals) {
                lp.set_coefficient(i, j, v);
            }
        }
        lp
    }

    pub fn to_standard(&self) -> StandardLp<f64> {
        StandardLp::new(self.a.clone(), self.b.clone(), self.c.clone()).expect("generator output is consistent")
    }

    pub fn mps(&self) -> String {
        write_mps(&self.to_problem())
    }

    pub fn certificate(&self) -> String {
        let basis: Vec<String> = self.support.iter().map(|j| j.to_string()).collect();
        format!(
            "objective={:.17e}\nbasis={}\nm={}\nn={}\nseed={}\ndegenerate={}\n",
            self.objective,
            basis.join(" "),
            self.config.m,
            self.config.n,
            self.config.seed,
            self.config.degenerate
        )
    }
}

pub fn parse_certificate(text: &str) -> Result<Certificate> {
    let mut objective = None;
    let mut basis = None;
    let (mut m, mut n) = (None, None);
    let bad = |line: usize, message: String| Error::Parse { line, message };
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| bad(k + 1, format!("expected key=value, got {line:?}")))?;
        let value = value.trim();
        let count = |v: &str| v.parse::<usize>().map_err(|e| bad(k + 1, format!("{key}: {e}")));
        match key.trim() {
            "objective" => objective = Some(value.parse::<f64>().map_err(|e| bad(k + 1, format!("objective: {e}")))?),
            "basis" => basis = Some(value.split_whitespace().map(count).collect::<Result<Vec<_>>>()?),
            "m" => m = Some(count(value)?),
            "n" => n = Some(count(value)?),
            _ => {}
        }
    }
    let missing = |what: &str| Error::Parse {
        line: 0,
        message: format!("certificate lacks {what}"),
    };
    Ok(Certificate {
        objective: objective.ok_or_else(|| missing("objective"))?,
        basis: basis.ok_or_else(|| missing("basis"))?,
        m: m.ok_or_else(|| missing("m"))?,
        n: n.ok_or_else(|| missing("n"))?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{parse_mps, to_standard_form};

    #[test]
    fn tiny_instance_objective_is_planted() {
        let inst = generate(&GeneratorConfig::new(1, 2, 7)).unwrap();
        let cx: f64 = inst.c.iter().zip(&inst.x).map(|(c, x)| c * x).sum();
        let by: f64 = inst.b.iter().zip(&inst.y).map(|(b, y)| b * y).sum();
        assert_eq!(cx, inst.objective);
        assert!((cx - by).abs() < 1e-12);
        let cert = parse_certificate(&inst.certificate()).unwrap();
        assert_eq!(cert.objective, inst.objective);
        assert_eq!(cert.basis.len(), 1);
    }

    #[test]
    fn strict_complementarity() {
        let inst = generate(&GeneratorConfig::new(10, 25, 3)).unwrap();
        assert_eq!(inst.support.len(), 10);
        for j in 0..25 {
            assert!(inst.x[j] * inst.s[j] == 0.0 && inst.x[j] + inst.s[j] > 0.0);
        }
    }

    #[test]
    fn degenerate_flag_shrinks_support() {
        let cfg = GeneratorConfig {
            degenerate: true,
            ..GeneratorConfig::new(8, 20, 11)
        };
        let inst = generate(&cfg).unwrap();
        let cert = parse_certificate(&inst.certificate()).unwrap();
        assert!(cert.basis.len() < 8);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = GeneratorConfig::new(6, 15, 42);
        let (a, b) = (generate(&cfg).unwrap(), generate(&cfg).unwrap());
        assert_eq!(a.mps(), b.mps());
        assert_eq!(a.certificate(), b.certificate());
        let other = generate(&GeneratorConfig::new(6, 15, 43)).unwrap();
        assert_ne!(a.mps(), other.mps());
    }

    #[test]
    fn mps_round_trip_preserves_data() {
        let inst = generate(&GeneratorConfig::new(5, 12, 9)).unwrap();
        let sp = to_standard_form(&parse_mps::<f64>(&inst.mps()).unwrap()).unwrap();
        assert_eq!(sp.ncols(), 12);
        assert_eq!(sp.b, inst.b);
        assert_eq!(sp.c, inst.c);
        assert_eq!(sp.a.to_dense(), inst.a.to_dense());
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(generate(&GeneratorConfig::new(5, 5, 0)).is_err());
        assert!(parse_certificate("objective=1\n").is_err());
    }
}

//! Per-iteration records, CSV emission and convergence-pattern classification.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    PrimalDual,
    Primal,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PrimalDual => "pd",
            Phase::Primal => "primal",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "pd" => Some(Phase::PrimalDual),
            "primal" => Some(Phase::Primal),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRecord {
    pub iter: usize,
    pub phase: Phase,
    pub mu: f64,
    pub e_p: f64,
    pub e_d: f64,
    pub e_g: f64,
    /// `‖x_{k+1} − x_k‖`
    pub step_norm: f64,
    /// `‖x_{k+1} − x_k‖_{x_k,1}`
    pub thresholded_step: f64,
    pub delta: Option<f64>,
    pub alpha: f64,
    pub factorized: bool,
    pub cg_iters: usize,
    pub factor_ms: f64,
    pub solve_ms: f64,
    pub other_ms: f64,
}

pub const CSV_HEADER: [&str; 15] = [
    "iter",
    "phase",
    "mu",
    "e_p",
    "e_d",
    "e_g",
    "step_norm",
    "thresholded_step",
    "delta",
    "alpha",
    "factorized",
    "cg_iters",
    "wall_ms_factor",
    "wall_ms_solve",
    "wall_ms_other",
];

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes a header and one row per record; returns the number of bytes written.
pub fn emit_csv<W: Write>(records: &[TraceRecord], dest: W) -> Result<u64> {
    let mut counter = CountingWriter { inner: dest, count: 0 };
    {
        let mut w = csv::Writer::from_writer(&mut counter);
        w.write_record(CSV_HEADER)?;
        for r in records {
            w.write_record([
                r.iter.to_string(),
                r.phase.as_str().to_string(),
                fmt_float(r.mu),
                fmt_float(r.e_p),
                fmt_float(r.e_d),
                fmt_float(r.e_g),
                fmt_float(r.step_norm),
                fmt_float(r.thresholded_step),
                r.delta.map(fmt_float).unwrap_or_default(),
                fmt_float(r.alpha),
                u8::from(r.factorized).to_string(),
                r.cg_iters.to_string(),
                fmt_float(r.factor_ms),
                fmt_float(r.solve_ms),
                fmt_float(r.other_ms),
            ])?;
        }
        w.flush()?;
    }
    Ok(counter.count)
}

struct CountingWriter<W> {
    inner: W,
    count: u64,
}

impl<W: Write> Write for CountingWriter<W> {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.count += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> std::io::Result<()> {
        self.inner.flush()
    }
}

/// Reads records written by [`emit_csv`].
pub fn read_csv<R: Read>(src: R) -> Result<Vec<TraceRecord>> {
    let mut reader = csv::Reader::from_reader(src);
    let mut out = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let bad = |what: &str| Error::Parse {
            line,
            message: format!("bad {what} field"),
        };
        if row.len() != CSV_HEADER.len() {
            return Err(bad("count of"));
        }
        let f = |i: usize| row[i].parse::<f64>().map_err(|_| bad(CSV_HEADER[i]));
        let u = |i: usize| row[i].parse::<usize>().map_err(|_| bad(CSV_HEADER[i]));
        out.push(TraceRecord {
            iter: u(0)?,
            phase: Phase::parse(&row[1]).ok_or_else(|| bad("phase"))?,
            mu: f(2)?,
            e_p: f(3)?,
            e_d: f(4)?,
            e_g: f(5)?,
            step_norm: f(6)?,
            thresholded_step: f(7)?,
            delta: if row[8].is_empty() { None } else { Some(f(8)?) },
            alpha: f(9)?,
            factorized: u(10)? != 0,
            cg_iters: u(11)?,
            factor_ms: f(12)?,
            solve_ms: f(13)?,
            other_ms: f(14)?,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConvergencePattern {
    Linear,
    FastAtEnd,
    Unclear,
}

pub const MIN_CLASSIFY_RECORDS: usize = 5;
const R2_LINEAR: f64 = 0.9;
const SLOPE_RATIO: f64 = 3.0;
const R2_IMPROVEMENT: f64 = 0.05;
const MIN_SEGMENT: usize = 3;

struct Fit {
    slope: f64,
    sse: f64,
}

fn fit(pts: &[(f64, f64)]) -> Fit {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let sse = pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum();
    Fit { slope, sse }
}

fn r_squared(sse: f64, sst: f64) -> f64 {
    if sst > 0.0 {
        1.0 - sse / sst
    } else {
        1.0
    }
}

/// Classifies the decay of `log(step_norm)` against the iteration index.
///
/// A split into two linear pieces wins when the last piece is at least three
/// times steeper, the split fits with R² ≥ 0.9, and it beats one line by 0.05.
/// Otherwise one line with R² ≥ 0.9 is linear. Thresholds are heuristics.
pub fn classify_convergence(records: &[TraceRecord]) -> Result<ConvergencePattern> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.step_norm > 0.0 && r.step_norm.is_finite())
        .map(|r| (r.iter as f64, r.step_norm.ln()))
        .collect();
    if pts.len() < MIN_CLASSIFY_RECORDS {
        return Err(Error::InsufficientData {
            needed: MIN_CLASSIFY_RECORDS,
            found: pts.len(),
        });
    }
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sst: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let single = fit(&pts);
    let r2_single = r_squared(single.sse, sst);

    let mut best: Option<(f64, f64, f64)> = None;
    for split in MIN_SEGMENT..=pts.len().saturating_sub(MIN_SEGMENT) {
        let (head, tail) = (fit(&pts[..split]), fit(&pts[split..]));
        let r2 = r_squared(head.sse + tail.sse, sst);
        if best.is_none_or(|b| r2 > b.0) {
            best = Some((r2, head.slope, tail.slope));
        }
    }
    if let Some((r2_split, head, tail)) = best {
        let steeper = tail < 0.0 && tail.abs() >= SLOPE_RATIO * head.abs();
        if steeper && r2_split >= R2_LINEAR && r2_split - r2_single >= R2_IMPROVEMENT {
            return Ok(ConvergencePattern::FastAtEnd);
        }
    }
    Ok(if r2_single >= R2_LINEAR {
        ConvergencePattern::Linear
    } else {
        ConvergencePattern::Unclear
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn record(iter: usize, step: f64) -> TraceRecord {
        TraceRecord {
            iter,
            phase: Phase::PrimalDual,
            mu: 0.5,
            e_p: 1e-3,
            e_d: 2e-3,
            e_g: 3e-3,
            step_norm: step,
            thresholded_step: step / 2.0,
            delta: Some(0.25),
            alpha: 0.9995,
            factorized: true,
            cg_iters: 0,
            factor_ms: 1.0,
            solve_ms: 0.1,
            other_ms: 0.01,
        }
    }

    fn emit_string(records: &[TraceRecord]) -> String {
        let mut buf = Vec::new();
        let n = emit_csv(records, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn empty_is_header_only() {
        let text = emit_string(&[]);
        assert_eq!(text, format!("{}\n", CSV_HEADER.join(",")));
    }

    #[test]
    fn one_record_two_lines() {
        assert_eq!(emit_string(&[record(0, 1.0)]).lines().count(), 2);
    }

    #[test]
    fn absent_delta_is_empty_field() {
        let mut r = record(3, 0.1);
        r.delta = None;
        let text = emit_string(&[r]);
        let row = text.lines().nth(1).unwrap();
        let fields: Vec<&str> = row.split(',').collect();
        assert_eq!(fields[8], "");
        assert!(row.contains(",,"));
    }

    #[test]
    fn geometric_is_linear() {
        let recs: Vec<_> = (0..20).map(|k| record(k, 0.5f64.powi(k as i32))).collect();
        assert_eq!(classify_convergence(&recs).unwrap(), ConvergencePattern::Linear);
    }

    #[test]
    fn fast_tail_detected() {
        let recs: Vec<_> = (0..=30)
            .map(|k| {
                let v = if k <= 20 { 0.95f64.powi(k) } else { 0.1f64.powi(k) };
                record(k as usize, v)
            })
            .collect();
        assert_eq!(classify_convergence(&recs).unwrap(), ConvergencePattern::FastAtEnd);
    }

    #[test]
    fn alternating_is_unclear() {
        let recs: Vec<_> = (0..12).map(|k| record(k, if k % 2 == 0 { 1.0 } else { 0.1 })).collect();
        assert_eq!(classify_convergence(&recs).unwrap(), ConvergencePattern::Unclear);
    }

    #[test]
    fn too_few_records() {
        let recs: Vec<_> = (0..4).map(|k| record(k, 1.0)).collect();
        assert!(matches!(
            classify_convergence(&recs),
            Err(Error::InsufficientData { needed: 5, found: 4 })
        ));
    }

    fn arb_record() -> impl Strategy<Value = TraceRecord> {
        (
            (0usize..10_000, any::<bool>(), any::<f64>(), any::<f64>(), any::<f64>()),
            (any::<f64>(), any::<f64>(), any::<f64>(), prop::option::of(any::<f64>())),
            (any::<f64>(), any::<bool>(), 0usize..500, any::<f64>(), any::<f64>(), any::<f64>()),
        )
            .prop_map(|((iter, pd, mu, e_p, e_d), (e_g, step, thr, delta), (alpha, fac, cg, fm, sm, om))| TraceRecord {
                iter,
                phase: if pd { Phase::PrimalDual } else { Phase::Primal },
                mu,
                e_p,
                e_d,
                e_g,
                step_norm: step,
                thresholded_step: thr,
                delta,
                alpha,
                factorized: fac,
                cg_iters: cg,
                factor_ms: fm,
                solve_ms: sm,
                other_ms: om,
            })
    }

    fn same_bits(a: f64, b: f64) -> bool {
        a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
    }

    proptest! {
        #[test]
        fn csv_round_trip(recs in prop::collection::vec(arb_record(), 0..6)) {
            let mut buf = Vec::new();
            emit_csv(&recs, &mut buf).unwrap();
            let back = read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in recs.iter().zip(&back) {
                let fa = [a.mu, a.e_p, a.e_d, a.e_g, a.step_norm, a.thresholded_step, a.alpha, a.factor_ms, a.solve_ms, a.other_ms];
                let fb = [b.mu, b.e_p, b.e_d, b.e_g, b.step_norm, b.thresholded_step, b.alpha, b.factor_ms, b.solve_ms, b.other_ms];
                for (x, y) in fa.iter().zip(&fb) {
                    prop_assert!(same_bits(*x, *y), "{} vs {}", x, y);
                }
                prop_assert_eq!(a.delta.is_some(), b.delta.is_some());
                if let (Some(x), Some(y)) = (a.delta, b.delta) {
                    prop_assert!(same_bits(x, y));
                }
                prop_assert_eq!((a.iter, a.phase, a.factorized, a.cg_iters), (b.iter, b.phase, b.factorized, b.cg_iters));
            }
        }

        #[test]
        fn classifier_ignores_uniform_scaling(
            steps in prop::collection::vec(1e-8f64..1e2, 5..30),
            scale in 1e-3f64..1e3,
        ) {
            let a: Vec<_> = steps.iter().enumerate().map(|(k, &v)| record(k, v)).collect();
            let b: Vec<_> = steps.iter().enumerate().map(|(k, &v)| record(k, v * scale)).collect();
            prop_assert_eq!(classify_convergence(&a).unwrap(), classify_convergence(&b).unwrap());
        }
    }
}

//! Spectral diagnostics for reusing a normal-matrix factor across iterates.

use std::io::{BufRead, Write};

use crate::error::{check_len, Error, Result};
use crate::linalg::{form_normal_matrix, generalized_condition_probe, CholeskyFactor, CscMatrix};
use crate::problem::StandardLp;
use crate::scaling::{bound_scaling_diag, primal_dual_scaling_diag};
use crate::solver::RELATIVE_MIN_PIVOT;
use crate::Scalar;

/// One recorded iterate; `s` enables the primal-dual contrast column.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot<T> {
    pub x: Vec<T>,
    pub s: Option<Vec<T>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeConfig {
    /// Each iterate `k` preconditions iterates `k+1 ..= k+window`.
    pub window: usize,
    /// Lanczos steps; `None` runs to the matrix dimension.
    pub lanczos_iters: Option<usize>,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            window: 1,
            lanczos_iters: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeRow {
    /// Index of the preconditioning iterate.
    pub k: usize,
    pub j: usize,
    /// `κ(M_{X_k}^{-1/2} M_{X_j} M_{X_k}^{-1/2})`
    pub kappa: f64,
    /// `κ(M_{X_j,S_j})`, when `s_j` is known.
    pub kappa_pd: Option<f64>,
}

pub const PROBE_HEADER: [&str; 4] = ["k", "j", "kappa", "kappa_pd"];

fn factor_of<T: Scalar>(m: &CscMatrix<T>) -> Result<CholeskyFactor<T>> {
    CholeskyFactor::factorize(m, T::lit(RELATIVE_MIN_PIVOT) * m.max_abs_diag())
}

/// Probes every pair `(k, j)` with `k < j ≤ k + window`.
pub fn probe_spectra<T: Scalar>(p: &StandardLp<T>, snapshots: &[Snapshot<T>], cfg: &ProbeConfig) -> Result<Vec<ProbeRow>> {
    if snapshots.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            found: snapshots.len(),
        });
    }
    if cfg.window == 0 {
        return Err(Error::InvalidParameter("probe window must be positive".into()));
    }
    let m = p.nrows();
    let iters = cfg.lanczos_iters.unwrap_or(m).max(1);
    let mut normals = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        check_len("probe iterate", p.ncols(), snap.x.len())?;
        let d = bound_scaling_diag(&snap.x, &p.u)?;
        normals.push(form_normal_matrix(&p.a, &d, None)?);
    }
    let identity = CholeskyFactor::factorize(&CscMatrix::<T>::identity(m), T::zero())?;
    let mut kappa_pd = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        kappa_pd.push(match &snap.s {
            Some(s) => {
                check_len("probe slack", p.ncols(), s.len())?;
                let zeros = vec![T::zero(); s.len()];
                let d = primal_dual_scaling_diag(&snap.x, s, &zeros, &p.u)?;
                let mpd = form_normal_matrix(&p.a, &d, None)?;
                Some(generalized_condition_probe(&mpd, &identity, iters)?.to_f64_lossy())
            }
            None => None,
        });
    }
    let mut rows = Vec::new();
    for k in 0..snapshots.len() - 1 {
        let fk = factor_of(&normals[k])?;
        for j in k + 1..snapshots.len().min(k + 1 + cfg.window) {
            let kappa = generalized_condition_probe(&normals[j], &fk, iters)?;
            rows.push(ProbeRow {
                k,
                j,
                kappa: kappa.to_f64_lossy(),
                kappa_pd: kappa_pd[j],
            });
        }
    }
    Ok(rows)
}

pub fn emit_probe_csv<W: Write>(rows: &[ProbeRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROBE_HEADER)?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.j.to_string(),
            format!("{:.16e}", r.kappa),
            r.kappa_pd.map(|v| format!("{v:.16e}")).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an iterate file: each line is `x,v1,v2,…` or `s,v1,v2,…`, where an
/// `s` line attaches to the preceding `x` line.
pub fn read_iterates<T: Scalar, R: BufRead>(input: R) -> Result<Vec<Snapshot<T>>> {
    let mut out: Vec<Snapshot<T>> = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |message: String| Error::Parse { line: k + 1, message };
        let mut fields = line.split(',').map(str::trim);
        let kind = fields.next().unwrap_or_default();
        let values = fields
            .map(|f| f.parse::<f64>().map(T::lit).map_err(|e| bad(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<T>>>()?;
        match kind {
            "x" => out.push(Snapshot { x: values, s: None }),
            "s" => match out.last_mut() {
                Some(snap) if snap.s.is_none() => snap.s = Some(values),
                _ => return Err(bad("s line without a preceding x line".into())),
            },
            other => return Err(bad(format!("unknown line kind {other:?}"))),
        }
    }
    Ok(out)
}

pub fn write_iterates<T: Scalar, W: Write>(snapshots: &[Snapshot<T>], mut out: W) -> Result<()> {
    let line = |kind: &str, v: &[T]| {
        let mut s = kind.to_string();
        for x in v {
            s.push_str(&format!(",{:.17e}", x.to_f64_lossy()));
        }
        s
    };
    for snap in snapshots {
        writeln!(out, "{}", line("x", &snap.x))?;
        if let Some(s) = &snap.s {
            writeln!(out, "{}", line("s", s))?;
        }
    }
    Ok(())
}

//! Infeasible primal-dual interior point method with Mehrotra's predictor-corrector.

use std::time::{Duration, Instant};

use log::warn;

use crate::error::{check_len, Error, Result};
use crate::linalg::vector::{dot, norm2};
use crate::linalg::CholeskyFactor;
use crate::outcome::{PhaseSummary, SolveResult, SolveStatus};
use crate::problem::{convergence_metrics, residuals, IterateState, Metrics, StandardLp};
use crate::scaling::{primal_dual_scaling_diag, thresholded_distance};
use crate::solver::{aat_factor, refine, refined_solve, DirectSolver, NormalSolver, REFINEMENT_STEPS};
use crate::trace::{Phase, TraceRecord};
use crate::Scalar;

pub const SIGMA_MIN: f64 = 1e-8;
pub const SIGMA_MAX: f64 = 1.0 - 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StartingPoint {
    /// Least-squares point shifted into the interior.
    Mehrotra,
    /// `x = s = 1` (clipped inside the bounds), `y = 0`.
    Uniform,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdConfig<T> {
    pub max_iter: usize,
    pub tol: T,
    pub step_fraction: T,
    pub start: StartingPoint,
    pub record_iterates: bool,
}

impl<T: Scalar> Default for PdConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 100,
            tol: T::lit(1e-10),
            step_fraction: T::lit(0.9995),
            start: StartingPoint::Mehrotra,
            record_iterates: false,
        }
    }
}

impl<T: Scalar> PdConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if !(self.step_fraction > T::zero() && self.step_fraction < T::one()) {
            return Err(Error::InvalidParameter("step fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `σ = (μ_aff/μ)³` clamped to `[1e-8, 1 − 1e-8]`.
pub fn centering_sigma<T: Scalar>(mu_aff: T, mu: T) -> T {
    let r = mu_aff / mu;
    let s = r * r * r;
    if s.is_nan() {
        return T::lit(SIGMA_MAX);
    }
    s.max(T::lit(SIGMA_MIN)).min(T::lit(SIGMA_MAX))
}

fn clip_into_bounds<T: Scalar>(x: &mut [T], s: &mut [T], v: &mut [T], u: &[T], mu: T) {
    for j in 0..x.len() {
        if u[j].is_finite() {
            let cap = T::lit(0.9) * u[j];
            if x[j] > cap {
                x[j] = cap;
            }
            v[j] = mu / (u[j] - x[j]);
            // keeps s − v, and hence the dual residual, unchanged
            s[j] += v[j];
        }
    }
}

/// Mehrotra's starting point with the usual two-stage shift.
pub fn pd_starting_point<T: Scalar>(p: &StandardLp<T>) -> Result<IterateState<T>> {
    let aat = aat_factor(&p.a)?;
    pd_starting_point_with(p, &aat)
}

pub fn pd_starting_point_with<T: Scalar>(p: &StandardLp<T>, aat: &CholeskyFactor<T>) -> Result<IterateState<T>> {
    let n = p.ncols();
    let mut x = p.a.tr_mul_vec(&aat.solve(&p.b)?);
    let y = aat.solve(&p.a.mul_vec(&p.c))?;
    let aty = p.a.tr_mul_vec(&y);
    let mut s: Vec<T> = (0..n).map(|j| p.c[j] - aty[j]).collect();

    let min = |v: &[T]| v.iter().copied().fold(T::infinity(), T::min);
    let shift_x = (T::lit(-1.5) * min(&x)).max(T::zero());
    let shift_s = (T::lit(-1.5) * min(&s)).max(T::zero());
    x.iter_mut().for_each(|v| *v += shift_x);
    s.iter_mut().for_each(|v| *v += shift_s);
    let prod = dot(&x, &s);
    let (sum_x, sum_s) = (x.iter().copied().sum::<T>(), s.iter().copied().sum::<T>());
    if prod > T::lit(1e-12) * (T::one() + sum_x) * (T::one() + sum_s) {
        let dx = T::lit(0.5) * prod / sum_s;
        let ds = T::lit(0.5) * prod / sum_x;
        x.iter_mut().for_each(|v| *v += dx);
        s.iter_mut().for_each(|v| *v += ds);
    } else {
        // degenerate data: lift to a uniform floor
        x.iter_mut().for_each(|v| *v = v.max(T::one()));
        s.iter_mut().for_each(|v| *v = v.max(T::one()));
    }
    if !x.iter().chain(&s).all(|&v| v > T::zero() && v.is_finite()) {
        x.iter_mut().for_each(|v| *v = T::one());
        s.iter_mut().for_each(|v| *v = T::one());
    }
    let mut v = vec![T::zero(); n];
    let mu = dot(&x, &s) / T::from_count(n.max(1));
    clip_into_bounds(&mut x, &mut s, &mut v, &p.u, mu);
    let mut st = IterateState::new(x, y, s, mu);
    st.v = v;
    st.mu = st.duality_measure(&p.u);
    Ok(st)
}

fn uniform_start<T: Scalar>(p: &StandardLp<T>) -> IterateState<T> {
    let n = p.ncols();
    let mut x = vec![T::one(); n];
    let mut s = vec![T::one(); n];
    let mut v = vec![T::zero(); n];
    for j in 0..n {
        if p.u[j].is_finite() && x[j] >= p.u[j] {
            x[j] = T::lit(0.5) * p.u[j];
        }
    }
    clip_into_bounds(&mut x, &mut s, &mut v, &p.u, T::one());
    let mut st = IterateState::new(x, vec![T::zero(); p.nrows()], s, T::one());
    st.v = v;
    st.mu = st.duality_measure(&p.u);
    st
}

#[derive(Clone, Debug, PartialEq)]
pub struct MehrotraStep<T> {
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    pub ds: Vec<T>,
    /// Change of the upper-bound multipliers (zero on unbounded columns).
    pub dv: Vec<T>,
    pub alpha_p: T,
    pub alpha_d: T,
    pub sigma: T,
    pub mu_aff: T,
    /// Time of one plain forward-backward substitution with the factor.
    pub substitution_time: Duration,
}

struct Direction<T> {
    dx: Vec<T>,
    dy: Vec<T>,
    ds: Vec<T>,
    dv: Vec<T>,
    substitution: Duration,
}

/// Solves the Newton system for complementarity targets `r_xs`, `r_wv`.
#[allow(clippy::too_many_arguments)]
fn pd_direction<T: Scalar>(
    p: &StandardLp<T>,
    st: &IterateState<T>,
    d: &[T],
    theta: &[T],
    r_p: &[T],
    r_d: &[T],
    r_xs: &[T],
    r_wv: &[T],
    factor: &CholeskyFactor<T>,
) -> Result<Direction<T>> {
    let n = p.ncols();
    let w = st.upper_slack(&p.u);
    let bounded = |j: usize| p.u[j].is_finite();
    let rho: Vec<T> = (0..n)
        .map(|j| {
            let mut r = -r_d[j] - r_xs[j] / st.x[j];
            if bounded(j) {
                r += r_wv[j] / w[j];
            }
            r
        })
        .collect();
    let theta_rho: Vec<T> = (0..n).map(|j| theta[j] * rho[j]).collect();
    let mut rhs = p.a.mul_vec(&theta_rho);
    for (r, &rp) in rhs.iter_mut().zip(r_p) {
        *r -= rp;
    }
    let clock = Instant::now();
    let dy0 = factor.solve(&rhs)?;
    let substitution = clock.elapsed();
    let mut dy = refine(factor, &p.a, d, &rhs, dy0, REFINEMENT_STEPS)?;
    let atdy = p.a.tr_mul_vec(&dy);
    let mut dx: Vec<T> = (0..n).map(|j| theta[j] * (atdy[j] - rho[j])).collect();
    // forming Δx cancels badly on columns with huge Θ; push the leftover
    // primal residual back through the normal equations
    let floor = T::lit(1e2) * T::epsilon() * (T::one() + norm2(&p.b));
    for _ in 0..REFINEMENT_STEPS {
        let adx = p.a.mul_vec(&dx);
        let zeta: Vec<T> = (0..adx.len()).map(|i| -r_p[i] - adx[i]).collect();
        if !(norm2(&zeta) > floor) {
            break;
        }
        let ddy = refined_solve(factor, &p.a, d, &zeta, REFINEMENT_STEPS)?;
        let atd = p.a.tr_mul_vec(&ddy);
        for j in 0..n {
            dx[j] += theta[j] * atd[j];
        }
        for (a, b) in dy.iter_mut().zip(ddy) {
            *a += b;
        }
    }
    let ds: Vec<T> = (0..n).map(|j| (r_xs[j] - st.s[j] * dx[j]) / st.x[j]).collect();
    let dv: Vec<T> = (0..n)
        .map(|j| if bounded(j) { (r_wv[j] + st.v[j] * dx[j]) / w[j] } else { T::zero() })
        .collect();
    Ok(Direction { dx, dy, ds, dv, substitution })
}

fn max_step<T: Scalar>(v: &[T], dv: &[T], mask: impl Fn(usize) -> bool) -> T {
    let mut a = T::infinity();
    for j in 0..v.len() {
        if mask(j) && dv[j] < T::zero() {
            a = a.min(-v[j] / dv[j]);
        }
    }
    a
}

fn primal_max_step<T: Scalar>(x: &[T], dx: &[T], u: &[T]) -> T {
    let mut a = max_step(x, dx, |_| true);
    for j in 0..x.len() {
        if u[j].is_finite() && dx[j] > T::zero() {
            a = a.min((u[j] - x[j]) / dx[j]);
        }
    }
    a
}

fn dual_max_step<T: Scalar>(st: &IterateState<T>, ds: &[T], dv: &[T], u: &[T]) -> T {
    max_step(&st.s, ds, |_| true).min(max_step(&st.v, dv, |j| u[j].is_finite()))
}

/// `(Σ x s + Σ_bounded w v) / (n + #bounded)`
fn complementarity<T: Scalar>(x: &[T], s: &[T], v: &[T], u: &[T]) -> T {
    let mut sum = T::zero();
    let mut count = 0usize;
    for j in 0..x.len() {
        sum += x[j] * s[j];
        count += 1;
        if u[j].is_finite() {
            sum += (u[j] - x[j]) * v[j];
            count += 1;
        }
    }
    sum / T::from_count(count.max(1))
}

/// Scaling diagonal `√Θ` with `Θ = (S/X + V/W)⁻¹`.
pub fn pd_scaling<T: Scalar>(p: &StandardLp<T>, st: &IterateState<T>) -> Result<Vec<T>> {
    primal_dual_scaling_diag(&st.x, &st.s, &st.v, &p.u)
}

/// One predictor-corrector step given the factor of `A Θ Aᵀ`.
pub fn mehrotra_step<T: Scalar>(
    p: &StandardLp<T>,
    st: &IterateState<T>,
    factor: &CholeskyFactor<T>,
    step_fraction: T,
) -> Result<MehrotraStep<T>> {
    let n = p.ncols();
    let d = pd_scaling(p, st)?;
    let theta: Vec<T> = d.iter().map(|&v| v * v).collect();
    let res = residuals(p, st);
    let w = st.upper_slack(&p.u);
    let bounded = |j: usize| p.u[j].is_finite();
    let mu = complementarity(&st.x, &st.s, &st.v, &p.u);

    let r_xs: Vec<T> = (0..n).map(|j| -st.x[j] * st.s[j]).collect();
    let r_wv: Vec<T> = (0..n).map(|j| if bounded(j) { -w[j] * st.v[j] } else { T::zero() }).collect();
    let aff = pd_direction(p, st, &d, &theta, &res.r_p, &res.r_d, &r_xs, &r_wv, factor)?;
    let ap = primal_max_step(&st.x, &aff.dx, &p.u).min(T::one());
    let ad = dual_max_step(st, &aff.ds, &aff.dv, &p.u).min(T::one());
    let xa: Vec<T> = (0..n).map(|j| st.x[j] + ap * aff.dx[j]).collect();
    let sa: Vec<T> = (0..n).map(|j| st.s[j] + ad * aff.ds[j]).collect();
    let va: Vec<T> = (0..n).map(|j| st.v[j] + ad * aff.dv[j]).collect();
    let mu_aff = complementarity(&xa, &sa, &va, &p.u);
    let sigma = centering_sigma(mu_aff, mu);

    let target = sigma * mu;
    let r_xs: Vec<T> = (0..n)
        .map(|j| -st.x[j] * st.s[j] + target - aff.dx[j] * aff.ds[j])
        .collect();
    let r_wv: Vec<T> = (0..n)
        .map(|j| {
            if bounded(j) {
                // Δw = −Δx
                -w[j] * st.v[j] + target + aff.dx[j] * aff.dv[j]
            } else {
                T::zero()
            }
        })
        .collect();
    let dir = pd_direction(p, st, &d, &theta, &res.r_p, &res.r_d, &r_xs, &r_wv, factor)?;
    let alpha_p = (step_fraction * primal_max_step(&st.x, &dir.dx, &p.u)).min(T::one());
    let alpha_d = (step_fraction * dual_max_step(st, &dir.ds, &dir.dv, &p.u)).min(T::one());
    Ok(MehrotraStep {
        dx: dir.dx,
        dy: dir.dy,
        ds: dir.ds,
        dv: dir.dv,
        alpha_p,
        alpha_d,
        sigma,
        mu_aff,
        substitution_time: aff.substitution.min(dir.substitution),
    })
}

/// Timing and step data from one engine iteration.
#[derive(Clone, Debug)]
pub struct PdIterationInfo<T> {
    pub step: MehrotraStep<T>,
    /// Forming plus factorizing the normal matrix.
    pub factor_time: Duration,
    /// One plain forward-backward substitution.
    pub solve_time: Duration,
    pub step_norm: T,
    pub thresholded_step: T,
}

/// Steppable primal-dual engine.
pub struct PdEngine<'a, T: Scalar> {
    p: &'a StandardLp<T>,
    cfg: PdConfig<T>,
    st: IterateState<T>,
    direct: DirectSolver<T>,
    aat: CholeskyFactor<T>,
    iterations: usize,
    pub(crate) first_iter: usize,
    trace: Vec<TraceRecord>,
    iterates: Vec<Vec<T>>,
    dual_iterates: Vec<Vec<T>>,
    last_mu: T,
}

impl<'a, T: Scalar> PdEngine<'a, T> {
    pub fn new(p: &'a StandardLp<T>, cfg: PdConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let aat = aat_factor(&p.a)?;
        let st = match cfg.start {
            StartingPoint::Mehrotra => pd_starting_point_with(p, &aat)?,
            StartingPoint::Uniform => uniform_start(p),
        };
        Self::from_state(p, cfg, st, aat)
    }

    pub fn from_state(p: &'a StandardLp<T>, cfg: PdConfig<T>, st: IterateState<T>, aat: CholeskyFactor<T>) -> Result<Self> {
        cfg.validate()?;
        check_len("pd start x", p.ncols(), st.x.len())?;
        check_len("pd start y", p.nrows(), st.y.len())?;
        let (iterates, dual_iterates) = if cfg.record_iterates {
            (vec![st.x.clone()], vec![st.s.clone()])
        } else {
            (Vec::new(), Vec::new())
        };
        let last_mu = complementarity(&st.x, &st.s, &st.v, &p.u);
        Ok(Self {
            p,
            cfg,
            st,
            direct: DirectSolver::new(),
            aat,
            iterations: 0,
            first_iter: 0,
            trace: Vec::new(),
            iterates,
            dual_iterates,
            last_mu,
        })
    }

    pub fn state(&self) -> &IterateState<T> {
        &self.st
    }

    pub fn aat(&self) -> &CholeskyFactor<T> {
        &self.aat
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn factorizations(&self) -> usize {
        self.direct.stats().factorizations
    }

    pub fn metrics(&self) -> Metrics<T> {
        convergence_metrics(self.p, &self.st)
    }

    pub fn converged(&self) -> bool {
        self.metrics().max() <= self.cfg.tol
    }

    pub fn config(&self) -> &PdConfig<T> {
        &self.cfg
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    /// One predictor-corrector iteration.
    pub fn step(&mut self) -> Result<PdIterationInfo<T>> {
        let clock = Instant::now();
        let p = self.p;
        let d = pd_scaling(p, &self.st)?;
        let before = self.direct.stats().clone();
        self.direct.factor(&p.a, &d)?;
        let factor_time = self.direct.stats().factor_time - before.factor_time;
        let factor = {
            let (_, f) = self.direct.take_factor().expect("factor computed above");
            f
        };
        let solve_clock = Instant::now();
        let step = mehrotra_step(p, &self.st, &factor, self.cfg.step_fraction)?;
        let solve_total = solve_clock.elapsed();
        let solve_time = step.substitution_time;
        // keep the symbolic analysis; the numeric factor is not reused
        drop(factor);

        let n = p.ncols();
        let mut next = self.st.clone();
        for j in 0..n {
            next.x[j] += step.alpha_p * step.dx[j];
            next.s[j] += step.alpha_d * step.ds[j];
            next.v[j] += step.alpha_d * step.dv[j];
        }
        for (yi, &d) in next.y.iter_mut().zip(&step.dy) {
            *yi += step.alpha_d * d;
        }
        // the previous iterate stays in place when the step is unusable
        if !next.x.iter().chain(&next.s).chain(&next.v).chain(&next.y).all(|v| v.is_finite()) {
            return Err(Error::NumericalBreakdown("non-finite primal-dual iterate"));
        }
        let x_prev = std::mem::replace(&mut self.st, next).x;
        let mu_new = complementarity(&self.st.x, &self.st.s, &self.st.v, &p.u);
        self.st.mu = self.st.duality_measure(&p.u);
        if mu_new > self.last_mu {
            warn!("complementarity increased from {:e} to {mu_new:e}", self.last_mu);
        }
        self.last_mu = mu_new;
        let diff: Vec<T> = (0..n).map(|j| self.st.x[j] - x_prev[j]).collect();
        let step_norm = norm2(&diff);
        let thresholded_step = thresholded_distance(&self.st.x, &x_prev, &x_prev, T::one());
        self.iterations += 1;
        if self.cfg.record_iterates {
            self.iterates.push(self.st.x.clone());
            self.dual_iterates.push(self.st.s.clone());
        }
        let met = self.metrics();
        let total = clock.elapsed();
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        self.trace.push(TraceRecord {
            iter: self.first_iter + self.iterations - 1,
            phase: Phase::PrimalDual,
            mu: mu_new.to_f64_lossy(),
            e_p: met.e_p.to_f64_lossy(),
            e_d: met.e_d.to_f64_lossy(),
            e_g: met.e_g.to_f64_lossy(),
            step_norm: step_norm.to_f64_lossy(),
            thresholded_step: thresholded_step.to_f64_lossy(),
            delta: None,
            alpha: step.alpha_p.to_f64_lossy(),
            factorized: true,
            cg_iters: 0,
            factor_ms: ms(factor_time),
            solve_ms: ms(solve_total),
            other_ms: ms(total.saturating_sub(factor_time + solve_total)),
        });
        Ok(PdIterationInfo {
            step,
            factor_time,
            solve_time,
            step_norm,
            thresholded_step,
        })
    }

    /// Consumes the engine into a result with the given status.
    pub fn finish(self, status: SolveStatus, wall_time: Duration, failure: Option<String>) -> SolveResult<T> {
        let metrics = self.metrics();
        let factorizations = self.factorizations();
        SolveResult {
            status,
            objective: self.p.objective(&self.st.x),
            metrics,
            iterations: self.iterations,
            factorizations,
            cg_iterations: 0,
            trace: self.trace,
            iterates: self.iterates,
            dual_iterates: self.dual_iterates,
            phases: PhaseSummary {
                pd_iterations: self.iterations,
                pd_factorizations: factorizations,
                pd_time: wall_time,
                ..PhaseSummary::default()
            },
            wall_time,
            failure,
            state: self.st,
        }
    }
}

pub(crate) fn is_numerical(e: &Error) -> bool {
    matches!(
        e,
        Error::FactorizationFailed { .. }
            | Error::NumericalBreakdown(_)
            | Error::InexactDirection { .. }
            | Error::InteriorityViolation { .. }
            | Error::NonPositiveScaling { .. }
    )
}

/// Runs Mehrotra iterations until `max{e_p, e_d, e_g} ≤ tol`.
pub fn pd_solve<T: Scalar>(p: &StandardLp<T>, cfg: &PdConfig<T>) -> Result<SolveResult<T>> {
    let clock = Instant::now();
    let mut engine = PdEngine::new(p, cfg.clone())?;
    let mut failure = None;
    let status = loop {
        if engine.converged() {
            break SolveStatus::Optimal;
        }
        if engine.iterations() >= cfg.max_iter {
            break SolveStatus::IterationLimit;
        }
        match engine.step() {
            Ok(_) => {}
            Err(e) if is_numerical(&e) => {
                failure = Some(e.to_string());
                break SolveStatus::NumericalFailure;
            }
            Err(e) => return Err(e),
        }
    };
    Ok(engine.finish(status, clock.elapsed(), failure))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CscMatrix;
    use nalgebra::{DMatrix, DVector};

    fn two_var(b: f64) -> StandardLp<f64> {
        let a = CscMatrix::<f64>::from_dense(1, 2, &[1.0, 1.0]).unwrap();
        StandardLp::new(a, vec![b], vec![1.0, 0.0]).unwrap()
    }

    #[test]
    fn sigma_cube_rule() {
        assert!((centering_sigma(0.1f64, 1.0) - 1e-3).abs() < 1e-15);
        assert_eq!(centering_sigma(0.0f64, 1.0), SIGMA_MIN);
        assert_eq!(centering_sigma(2.0f64, 1.0), SIGMA_MAX);
    }

    #[test]
    fn identity_start() {
        let a = CscMatrix::<f64>::identity(3);
        let p = StandardLp::new(a, vec![1.0; 3], vec![1.0; 3]).unwrap();
        let st = pd_starting_point(&p).unwrap();
        for j in 0..3 {
            assert!((st.x[j] - 1.0).abs() < 1e-12);
            assert!((st.s[j] - 1.0).abs() < 1e-12);
            assert!((st.y[j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_data_start_is_uniform() {
        let a = CscMatrix::<f64>::from_dense(1, 3, &[1.0, 2.0, 3.0]).unwrap();
        let p = StandardLp::new(a, vec![0.0], vec![0.0; 3]).unwrap();
        let st = pd_starting_point(&p).unwrap();
        assert!(st.x.iter().chain(&st.s).all(|&v| v == 1.0));
    }

    #[test]
    fn start_is_interior_with_bounds() {
        let a = CscMatrix::<f64>::from_dense(2, 4, &[1.0, -2.0, 0.5, 0.0, 0.0, 1.0, 1.0, 3.0]).unwrap();
        let p = StandardLp::with_bounds(a, vec![5.0, -1.0], vec![1.0, -1.0, 2.0, 0.0], vec![0.5, f64::INFINITY, 3.0, f64::INFINITY]).unwrap();
        let st = pd_starting_point(&p).unwrap();
        for j in 0..4 {
            assert!(st.x[j] > 0.0 && st.x[j] < p.u[j] && st.s[j] > 0.0);
            assert!(st.v[j] >= 0.0);
        }
    }

    #[test]
    fn centered_predictor_reduces_gap() {
        let p = two_var(2.0);
        let h = 0.5f64.sqrt();
        let st = IterateState::new(vec![2.0 - 2.0 * h, 2.0 * h], vec![-h], vec![1.0 + h, h], 1.0);
        let d = pd_scaling(&p, &st).unwrap();
        let f = DirectSolver::new().factor(&p.a, &d).unwrap().clone();
        let step = mehrotra_step(&p, &st, &f, 0.9995).unwrap();
        assert!(step.mu_aff < 1.0);
    }

    /// Dense KKT solve of `AΔx = −r_p`, `AᵀΔy + Δs = −r_d`, `SΔx + XΔs = r_xs`.
    fn dense_newton(p: &StandardLp<f64>, st: &IterateState<f64>, r_xs: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let (m, n) = (p.nrows(), p.ncols());
        let a = p.a.to_dense();
        let r = residuals(p, st);
        let dim = 2 * n + m;
        let mut k = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for i in 0..m {
            for j in 0..n {
                k[(i, j)] = a[i * n + j];
                k[(m + j, n + i)] = a[i * n + j];
            }
            rhs[i] = -r.r_p[i];
        }
        for j in 0..n {
            k[(m + j, n + m + j)] = 1.0;
            rhs[m + j] = -r.r_d[j];
            k[(m + n + j, j)] = st.s[j];
            k[(m + n + j, n + m + j)] = st.x[j];
            rhs[m + n + j] = r_xs[j];
        }
        let sol = k.lu().solve(&rhs).unwrap();
        (
            sol.rows(0, n).iter().copied().collect(),
            sol.rows(n, m).iter().copied().collect(),
            sol.rows(n + m, n).iter().copied().collect(),
        )
    }

    fn dense_step(p: &StandardLp<f64>, dx: &[f64], v: &[f64], dv: &[f64]) -> (f64, f64) {
        let a = |z: &[f64], dz: &[f64]| {
            z.iter().zip(dz).filter(|(_, &d)| d < 0.0).map(|(&z, &d)| -z / d).fold(f64::INFINITY, f64::min)
        };
        let _ = p;
        (a(dx, v), a(v, dv))
    }

    #[test]
    fn one_iteration_matches_dense_oracle() {
        let p = two_var(2.0);
        let st = IterateState::new(vec![1.0, 1.5], vec![0.2], vec![0.7, 0.4], 0.0);
        let n = 2;
        let d = pd_scaling(&p, &st).unwrap();
        let f = DirectSolver::new().factor(&p.a, &d).unwrap().clone();
        let step = mehrotra_step(&p, &st, &f, 0.9995).unwrap();

        let xs: Vec<f64> = (0..n).map(|j| -st.x[j] * st.s[j]).collect();
        let (dxa, _, dsa) = dense_newton(&p, &st, &xs);
        let ap = dense_step(&p, &st.x, &dxa, &[]).0.min(dense_step(&p, &st.x, &st.x, &dxa).1).min(1.0);
        let ad = dense_step(&p, &st.s, &st.s, &dsa).1.min(1.0);
        let mu = (st.x[0] * st.s[0] + st.x[1] * st.s[1]) / 2.0;
        let mu_aff: f64 = (0..n).map(|j| (st.x[j] + ap * dxa[j]) * (st.s[j] + ad * dsa[j])).sum::<f64>() / 2.0;
        let sigma = ((mu_aff / mu).powi(3)).clamp(SIGMA_MIN, SIGMA_MAX);
        let rc: Vec<f64> = (0..n).map(|j| -st.x[j] * st.s[j] + sigma * mu - dxa[j] * dsa[j]).collect();
        let (dx, dy, ds) = dense_newton(&p, &st, &rc);
        assert!((step.sigma - sigma).abs() < 1e-10);
        for j in 0..n {
            assert!((step.dx[j] - dx[j]).abs() < 1e-10);
            assert!((step.ds[j] - ds[j]).abs() < 1e-10);
        }
        assert!((step.dy[0] - dy[0]).abs() < 1e-10);
        let ap = (0.9995 * dense_step(&p, &st.x, &st.x, &dx).1).min(1.0);
        let ad = (0.9995 * dense_step(&p, &st.s, &st.s, &ds).1).min(1.0);
        assert!((step.alpha_p - ap).abs() < 1e-10);
        assert!((step.alpha_d - ad).abs() < 1e-10);
    }

    #[test]
    fn two_variable_solve() {
        let p = two_var(2.0);
        let res = pd_solve(&p, &PdConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(res.iterations <= 15, "{}", res.iterations);
        assert!(res.state.x[0].abs() < 1e-9 && (res.state.x[1] - 2.0).abs() < 1e-9);
        assert!(res.objective.abs() < 1e-9);
        assert_eq!(res.trace.len(), res.iterations);
    }

    #[test]
    fn infeasible_instance_hits_limit() {
        let p = two_var(-1.0);
        let res = pd_solve(&p, &PdConfig::default()).unwrap();
        assert_ne!(res.status, SolveStatus::Optimal);
        assert!(res.metrics.e_p > 1e-3, "{} {:?} {:?}", res.status, res.metrics, res.failure);
    }

    #[test]
    fn bounded_instance_solves() {
        // min −x₁ − 2x₂  s.t. x₁ + x₂ + x₃ = 4, x₁ ≤ 3, x₂ ≤ 1
        let a = CscMatrix::<f64>::from_dense(1, 3, &[1.0, 1.0, 1.0]).unwrap();
        let p = StandardLp::with_bounds(a, vec![4.0], vec![-1.0, -2.0, 0.0], vec![3.0, 1.0, f64::INFINITY]).unwrap();
        let res = pd_solve(&p, &PdConfig::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective + 5.0).abs() < 1e-8);
    }
}

//! Primal barrier engine: exact, frozen-preconditioner and delayed-scaling modes.

use std::time::{Duration, Instant};

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_len, Error, Result};
use crate::linalg::vector::norm2;
use crate::linalg::{CholeskyFactor, NormalOperator};
use crate::outcome::{PhaseSummary, SolveResult, SolveStatus};
use crate::problem::{barrier_gradient, convergence_metrics, IterateState, StandardLp, VarRecovery};
use crate::scaling::{bound_scaling_diag, delayed_scaling_point, proximity, thresholded_distance};
use crate::solver::{aat_factor, DirectSolver, NormalSolver, PcgSolver};
use crate::trace::{Phase, TraceRecord};
use crate::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimalMode {
    /// Factorize `M_X` every iteration.
    Exact,
    /// PCG with a cached `M_Z` factor, refreshed when `‖x − z‖ ≥ θ`.
    FrozenPrecond,
    /// PCG on `M_W` with `w` the delayed scaling point, refreshed when
    /// `‖x − z‖_{x,ν} ≥ θ`.
    DelayedScaling,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TauRule<T> {
    /// `1/(10√n)`
    Theory,
    Fixed(T),
    /// Cut `μ` by `reduction` after a near-full step of scaled length at most
    /// `max_step`; otherwise hold `μ` and recenter.
    Adaptive { reduction: T, max_step: T },
}

impl<T: Scalar> TauRule<T> {
    pub fn adaptive() -> Self {
        TauRule::Adaptive {
            reduction: T::lit(0.1),
            max_step: T::one(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    /// Fraction-to-boundary step, capped at 1.
    RatioTest,
    /// Minimizes the barrier model along the direction within the ratio-test bound.
    LineSearch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CgTolerance<T> {
    Fixed(T),
    /// `clamp(scale·μ, floor, 1e-6)`
    MuDependent { scale: T, floor: T },
}

impl<T: Scalar> CgTolerance<T> {
    pub fn at(&self, mu: T) -> T {
        match *self {
            CgTolerance::Fixed(t) => t,
            CgTolerance::MuDependent { scale, floor } => (scale * mu).min(T::lit(1e-6)).max(floor),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalConfig<T> {
    /// `None` takes `⟨x₀, s₀⟩/n` from the start.
    pub mu0: Option<T>,
    pub tau: TauRule<T>,
    pub step: StepRule,
    pub theta: T,
    pub nu: T,
    pub step_fraction: T,
    pub cg_tol: CgTolerance<T>,
    pub cg_max_iter: usize,
    pub tol: T,
    pub max_iter: usize,
    pub mode: PrimalMode,
    /// Evaluate `δ(x_k, μ_k)` each iteration and put it in the trace.
    pub monitor_proximity: bool,
    pub record_iterates: bool,
    /// Solve the unscaled normal equation for `Δy` (debug only).
    pub unstabilized: bool,
}

impl<T: Scalar> Default for PrimalConfig<T> {
    fn default() -> Self {
        Self {
            mu0: None,
            tau: TauRule::Theory,
            step: StepRule::RatioTest,
            theta: T::lit(0.1),
            nu: T::one(),
            step_fraction: T::lit(0.9995),
            cg_tol: CgTolerance::Fixed(T::lit(1e-10)),
            cg_max_iter: 100,
            tol: T::lit(1e-10),
            max_iter: 100,
            mode: PrimalMode::DelayedScaling,
            monitor_proximity: false,
            record_iterates: false,
            unstabilized: false,
        }
    }
}

impl<T: Scalar> PrimalConfig<T> {
    /// Adaptive barrier reduction with a line search; reaches tight
    /// tolerances within the default iteration budget.
    pub fn practical() -> Self {
        Self {
            tau: TauRule::adaptive(),
            step: StepRule::LineSearch,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.into()));
        let open_unit = |t: T| t > T::zero() && t < T::one();
        match self.tau {
            TauRule::Fixed(t) if !open_unit(t) => return bad("tau must lie in (0, 1)"),
            TauRule::Adaptive { reduction, max_step } if !open_unit(reduction) || !(max_step > T::zero()) => {
                return bad("adaptive tau needs reduction in (0, 1) and a positive step bound")
            }
            _ => {}
        }
        if !(self.theta > T::zero()) {
            return bad("theta must be positive");
        }
        if !(self.nu > T::zero()) {
            return bad("nu must be positive");
        }
        if !open_unit(self.step_fraction) {
            return bad("step fraction must lie in (0, 1)");
        }
        if !(self.tol > T::zero()) {
            return bad("tolerance must be positive");
        }
        if !(self.cg_tol.at(T::one()) > T::zero()) {
            return bad("cg tolerance must be positive");
        }
        if let Some(mu) = self.mu0 {
            if !(mu > T::zero()) || !mu.is_finite() {
                return bad("mu0 must be positive");
            }
        }
        Ok(())
    }
}

/// Cached factorization of `M_Z = A D(z)² Aᵀ`.
#[derive(Clone, Debug)]
pub struct PreconditionerCache<T> {
    pub z: Vec<T>,
    pub factor: CholeskyFactor<T>,
    pub factorization_count: usize,
    pub cg_iteration_total: usize,
}

impl<T: Scalar> PreconditionerCache<T> {
    pub fn build(p: &StandardLp<T>, z: &[T], direct: &mut DirectSolver<T>) -> Result<Self> {
        let d = bound_scaling_diag(z, &p.u)?;
        direct.factor(&p.a, &d)?;
        let (_, factor) = direct.take_factor().expect("factor computed above");
        let cache = Self {
            z: z.to_vec(),
            factor,
            factorization_count: 1,
            cg_iteration_total: 0,
        };
        cache.probe(p, &d)?;
        Ok(cache)
    }

    pub fn refresh(&mut self, p: &StandardLp<T>, z: &[T], direct: &mut DirectSolver<T>) -> Result<()> {
        let fresh = Self::build(p, z, direct)?;
        self.z = fresh.z;
        self.factor = fresh.factor;
        self.factorization_count += 1;
        Ok(())
    }

    /// One random product compared against the factor's reconstruction.
    fn probe(&self, p: &StandardLp<T>, d: &[T]) -> Result<T> {
        let m = p.nrows();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
        let v: Vec<T> = (0..m).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect();
        let mut mv = vec![T::zero(); m];
        NormalOperator::new(&p.a, d, None).apply(&v, &mut mv);
        let rec = self.factor.reconstruct_apply(&v)?;
        let diff: Vec<T> = mv.iter().zip(&rec).map(|(&a, &b)| a - b).collect();
        let rel = norm2(&diff) / norm2(&mv).max(T::min_positive_value());
        if !rel.is_finite() {
            return Err(Error::NumericalBreakdown("cached factor does not reproduce the normal matrix"));
        }
        if rel > T::lit(1e-10) {
            warn!("cached factor probe relative error {rel:e}");
        }
        Ok(rel)
    }
}

/// Newton step for `min cᵀx − μ·barrier` with dual estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalStep<T> {
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    /// Change of the net dual slack `s − v`.
    pub ds: Vec<T>,
}

/// Feasible-start projected Newton direction `−D P_{AD} D(c/μ − g)`.
pub fn primal_direction<T: Scalar, S: NormalSolver<T> + ?Sized>(
    p: &StandardLp<T>,
    x: &[T],
    mu: T,
    solver: &mut S,
) -> Result<Vec<T>> {
    let d = bound_scaling_diag(x, &p.u)?;
    let g = barrier_gradient(x, &p.u);
    let h: Vec<T> = (0..x.len()).map(|j| p.c[j] / mu - g[j]).collect();
    scaled_projection_step(p, &d, &h, solver)
}

/// `−D P_{AD} D h`
fn scaled_projection_step<T: Scalar, S: NormalSolver<T> + ?Sized>(
    p: &StandardLp<T>,
    d: &[T],
    h: &[T],
    solver: &mut S,
) -> Result<Vec<T>> {
    let d2h: Vec<T> = (0..h.len()).map(|j| d[j] * d[j] * h[j]).collect();
    let q = solver.solve_normal(&p.a, d, &p.a.mul_vec(&d2h))?;
    let atq = p.a.tr_mul_vec(&q);
    Ok((0..h.len()).map(|j| -d[j] * d[j] * (h[j] - atq[j])).collect())
}

/// Surrogate direction `−D_w P_{AD_w} D_w(c/μ − g(x))` via PCG preconditioned
/// by the cache, followed by feasibility repair.
#[allow(clippy::too_many_arguments)]
pub fn surrogate_direction<T: Scalar>(
    p: &StandardLp<T>,
    x: &[T],
    w: &[T],
    mu: T,
    cache: &PreconditionerCache<T>,
    cg_tol: T,
    cg_max_iter: usize,
    aat: &CholeskyFactor<T>,
) -> Result<Vec<T>> {
    check_len("surrogate scaling point", x.len(), w.len())?;
    let d = bound_scaling_diag(w, &p.u)?;
    let g = barrier_gradient(x, &p.u);
    let h: Vec<T> = (0..x.len()).map(|j| p.c[j] / mu - g[j]).collect();
    let mut pcg = PcgSolver::new(&cache.factor, cg_tol, cg_max_iter);
    let raw = scaled_projection_step(p, &d, &h, &mut pcg)?;
    let zero = vec![T::zero(); p.nrows()];
    let pre = cache_scaled_repair(p, &raw, &zero, cache)?;
    feasibility_repair_to(p, &pre, &zero, aat)
}

/// Cancels the PCG residual with `D_z²Aᵀ M_Z⁻¹ ζ`, which the cached factor
/// applies exactly. Unlike the least-norm correction it leaves coordinates
/// near zero essentially untouched, so the Euclidean repair that follows only
/// sees roundoff.
fn cache_scaled_repair<T: Scalar>(
    p: &StandardLp<T>,
    dx: &[T],
    target: &[T],
    cache: &PreconditionerCache<T>,
) -> Result<Vec<T>> {
    let ax = p.a.mul_vec(dx);
    let zeta: Vec<T> = target.iter().zip(&ax).map(|(&t, &a)| t - a).collect();
    let lam = cache.factor.solve(&zeta)?;
    let atl = p.a.tr_mul_vec(&lam);
    let dz = bound_scaling_diag(&cache.z, &p.u)?;
    Ok((0..dx.len()).map(|j| dx[j] + dz[j] * dz[j] * atl[j]).collect())
}

/// `Δx_raw − Aᵀ(AAᵀ)⁻¹ζ`
pub fn feasibility_repair<T: Scalar>(
    p: &StandardLp<T>,
    dx_raw: &[T],
    zeta: &[T],
    aat: &CholeskyFactor<T>,
) -> Result<Vec<T>> {
    check_len("repair residual", p.nrows(), zeta.len())?;
    let lam = aat.solve(zeta)?;
    let corr = p.a.tr_mul_vec(&lam);
    Ok(dx_raw.iter().zip(&corr).map(|(&d, &c)| d - c).collect())
}

/// Repairs `Δx` so that `AΔx = target`, with one extra pass if the first
/// leaves a residual above roundoff.
fn feasibility_repair_to<T: Scalar>(
    p: &StandardLp<T>,
    dx: &[T],
    target: &[T],
    aat: &CholeskyFactor<T>,
) -> Result<Vec<T>> {
    let violation = |dx: &[T]| -> Vec<T> {
        let mut z = p.a.mul_vec(dx);
        for (zi, &t) in z.iter_mut().zip(target) {
            *zi -= t;
        }
        z
    };
    let zeta = violation(dx);
    let scale = T::one() + norm2(&zeta) + p.b_scale();
    let mut out = feasibility_repair(p, dx, &zeta, aat)?;
    let again = violation(&out);
    if norm2(&again) > T::lit(1e-12) * scale {
        out = feasibility_repair(p, &out, &again, aat)?;
    }
    Ok(out)
}

/// Infeasible-start Newton step with scaling `D = bound_scaling_diag(x, u)`.
pub fn infeasible_primal_step<T: Scalar, S: NormalSolver<T> + ?Sized>(
    p: &StandardLp<T>,
    st: &IterateState<T>,
    solver: &mut S,
) -> Result<PrimalStep<T>> {
    let d = bound_scaling_diag(&st.x, &p.u)?;
    infeasible_step_scaled(p, st, &d, solver, true)
}

/// Infeasible-start step for an arbitrary positive scaling `d`.
///
/// Stabilized: `M q = −r_p + A D² h` with `h = (c − Aᵀy)/μ − g`, then
/// `Δy = μq`, `Δs = −r_d − AᵀΔy`, `Δx = −D²(h − Aᵀq)`.
pub fn infeasible_step_scaled<T: Scalar, S: NormalSolver<T> + ?Sized>(
    p: &StandardLp<T>,
    st: &IterateState<T>,
    d: &[T],
    solver: &mut S,
    stabilized: bool,
) -> Result<PrimalStep<T>> {
    let n = p.ncols();
    check_len("step scaling", n, d.len())?;
    let mu = st.mu;
    let g = barrier_gradient(&st.x, &p.u);
    let aty = p.a.tr_mul_vec(&st.y);
    let mut r_p = p.a.mul_vec(&st.x);
    for (r, &b) in r_p.iter_mut().zip(&p.b) {
        *r -= b;
    }
    let r_d: Vec<T> = (0..n).map(|j| aty[j] + st.s[j] - st.v[j] - p.c[j]).collect();
    let h: Vec<T> = (0..n).map(|j| (p.c[j] - aty[j]) / mu - g[j]).collect();
    let d2h: Vec<T> = (0..n).map(|j| d[j] * d[j] * h[j]).collect();
    let ad2h = p.a.mul_vec(&d2h);

    let (q, dy) = if stabilized {
        let rhs: Vec<T> = ad2h.iter().zip(&r_p).map(|(&a, &r)| a - r).collect();
        let q = solver.solve_normal(&p.a, d, &rhs)?;
        let dy = q.iter().map(|&v| mu * v).collect::<Vec<_>>();
        (q, dy)
    } else {
        let rhs: Vec<T> = ad2h.iter().zip(&r_p).map(|(&a, &r)| mu * a - mu * r).collect();
        let dy = solver.solve_normal(&p.a, d, &rhs)?;
        let q = dy.iter().map(|&v| v / mu).collect::<Vec<_>>();
        (q, dy)
    };
    let atq = p.a.tr_mul_vec(&q);
    let atdy = p.a.tr_mul_vec(&dy);
    let ds: Vec<T> = (0..n).map(|j| -r_d[j] - atdy[j]).collect();
    let dx: Vec<T> = (0..n).map(|j| -d[j] * d[j] * (h[j] - atq[j])).collect();
    Ok(PrimalStep { dx, dy, ds })
}

/// Largest `α ≤ 1` keeping `0 < x + αΔx < u`, shortened by `fraction`.
pub fn ratio_test<T: Scalar>(x: &[T], dx: &[T], u: &[T], fraction: T) -> T {
    let mut max_step = T::infinity();
    for j in 0..x.len() {
        if dx[j] < T::zero() {
            max_step = max_step.min(-x[j] / dx[j]);
        } else if dx[j] > T::zero() && u[j].is_finite() {
            max_step = max_step.min((u[j] - x[j]) / dx[j]);
        }
    }
    (fraction * max_step).min(T::one())
}

/// Minimizer over `(0, alpha_max]` of
/// `α·σᵀΔx/μ − Σ log(x + αΔx) − Σ_bounded log(u − x − αΔx)`.
fn barrier_line_search<T: Scalar>(x: &[T], dx: &[T], u: &[T], sigma: &[T], mu: T, alpha_max: T) -> T {
    let lin: T = sigma.iter().zip(dx).map(|(&s, &d)| s * d).sum::<T>() / mu;
    let slope = |a: T| -> T {
        let mut v = lin;
        for j in 0..x.len() {
            v -= dx[j] / (x[j] + a * dx[j]);
            if u[j].is_finite() {
                v += dx[j] / (u[j] - x[j] - a * dx[j]);
            }
        }
        v
    };
    if !(slope(T::zero()) < T::zero()) || slope(alpha_max) <= T::zero() {
        return alpha_max;
    }
    let (mut lo, mut hi) = (T::zero(), alpha_max);
    for _ in 0..60 {
        let mid = T::lit(0.5) * (lo + hi);
        if slope(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo.max(alpha_max * T::lit(1e-8))
}

fn split_dual<T: Scalar>(sigma: &[T], u: &[T]) -> (Vec<T>, Vec<T>) {
    let zero = T::zero();
    sigma
        .iter()
        .zip(u)
        .map(|(&sg, &uj)| if uj.is_finite() { (sg.max(zero), (-sg).max(zero)) } else { (sg, zero) })
        .unzip()
}

/// Negative part of the dual slack on unbounded columns, relative to `1 + ‖c‖`.
fn dual_sign_violation<T: Scalar>(p: &StandardLp<T>, s: &[T]) -> T {
    let neg: Vec<T> = (0..s.len())
        .map(|j| if p.u[j].is_finite() { T::zero() } else { (-s[j]).max(T::zero()) })
        .collect();
    norm2(&neg) / (T::one() + norm2(&p.c))
}

fn check_interior<T: Scalar>(x: &[T], u: &[T]) -> Result<()> {
    match (0..x.len()).find(|&j| !(x[j] > T::zero() && x[j] < u[j])) {
        Some(index) => Err(Error::InteriorityViolation { index }),
        None => Ok(()),
    }
}

/// Column pairs `(k⁺, k⁻)` of split free variables: opposite columns and
/// costs, both unbounded. Shifting a pair by a common amount changes neither
/// `Ax` nor `cᵀx`.
fn split_pairs<T: Scalar>(p: &StandardLp<T>) -> Vec<(usize, usize)> {
    p.recovery
        .vars
        .iter()
        .filter_map(|rule| match rule {
            VarRecovery::Affine { terms, .. } if terms.len() == 2 && terms[0].1 == -terms[1].1 => {
                let (k, l) = (terms[0].0, terms[1].0);
                let (rk, vk) = p.a.col(k);
                let (rl, vl) = p.a.col(l);
                let mirrored = rk == rl && vk.iter().zip(vl).all(|(&a, &b)| a == -b);
                let ok = mirrored && p.c[k] == -p.c[l] && !p.u[k].is_finite() && !p.u[l].is_finite();
                ok.then_some((k, l))
            }
            _ => None,
        })
        .collect()
}

/// The barrier has no minimizer along `e_k⁺ + e_k⁻`, so both halves of a split
/// pair drift upward; pull them back to `min(x⁺, x⁻) ≤ max(1, |x⁺ − x⁻|)`.
fn recenter_split_pairs<T: Scalar>(x: &mut [T], pairs: &[(usize, usize)]) {
    for &(k, l) in pairs {
        let low = x[k].min(x[l]);
        let cap = (x[k] - x[l]).abs().max(T::one());
        if low > cap {
            x[k] -= low - cap;
            x[l] -= low - cap;
        }
    }
}

/// Removes the part of `Δx` along each pair's recession direction that is
/// `X⁻²`-orthogonal to it, i.e. the shift minimizing `‖X⁻¹Δx‖` on the pair.
fn drop_recession<T: Scalar>(dx: &mut [T], x: &[T], pairs: &[(usize, usize)]) {
    for &(k, l) in pairs {
        let (wk, wl) = ((x[k] * x[k]).recip(), (x[l] * x[l]).recip());
        let t = (dx[k] * wk + dx[l] * wl) / (wk + wl);
        dx[k] -= t;
        dx[l] -= t;
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Extra inputs that a caller may already hold.
#[derive(Default)]
pub struct PrimalSeed<T> {
    /// Factor of `AAᵀ` for feasibility repair.
    pub aat: Option<CholeskyFactor<T>>,
    /// Index of the first trace row.
    pub first_iter: usize,
}

/// Runs the primal engine from `start` (which need not be feasible).
pub fn primal_solve<T: Scalar>(
    p: &StandardLp<T>,
    cfg: &PrimalConfig<T>,
    start: &IterateState<T>,
) -> Result<SolveResult<T>> {
    primal_solve_seeded(p, cfg, start, PrimalSeed::default())
}

pub fn primal_solve_seeded<T: Scalar>(
    p: &StandardLp<T>,
    cfg: &PrimalConfig<T>,
    start: &IterateState<T>,
    seed: PrimalSeed<T>,
) -> Result<SolveResult<T>> {
    cfg.validate()?;
    let (m, n) = (p.nrows(), p.ncols());
    check_len("start x", n, start.x.len())?;
    check_len("start y", m, start.y.len())?;
    check_len("start s", n, start.s.len())?;
    check_len("start v", n, start.v.len())?;
    check_interior(&start.x, &p.u)?;
    let clock = Instant::now();

    let pairs = split_pairs(p);
    let mut x = start.x.clone();
    recenter_split_pairs(&mut x, &pairs);
    let mut y = start.y.clone();
    let mut sigma: Vec<T> = (0..n).map(|j| start.s[j] - start.v[j]).collect();
    let mut mu = match cfg.mu0 {
        Some(mu) => mu,
        None => {
            let mu = start.duality_measure(&p.u);
            if mu > T::zero() && mu.is_finite() {
                mu
            } else {
                T::one()
            }
        }
    };
    let tau_theory = T::one() / (T::lit(10.0) * T::from_count(n).sqrt());

    let mut direct = DirectSolver::new();
    let mut cache: Option<PreconditionerCache<T>> = None;
    let mut aat = seed.aat;
    let mut factorizations = 0usize;
    let mut cg_total = 0usize;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut dual_iterates = Vec::new();
    let mut failure = None;
    let mut iterations = 0usize;

    let state_of = |x: &[T], y: &[T], sigma: &[T], mu: T| {
        let (s, v) = split_dual(sigma, &p.u);
        IterateState {
            x: x.to_vec(),
            y: y.to_vec(),
            s,
            v,
            mu,
        }
    };

    let status = loop {
        let st = state_of(&x, &y, &sigma, mu);
        if cfg.record_iterates {
            iterates.push(x.clone());
            dual_iterates.push(st.s.clone());
        }
        let metrics = convergence_metrics(p, &st);
        if metrics.max() <= cfg.tol && dual_sign_violation(p, &st.s) <= cfg.tol {
            break SolveStatus::Optimal;
        }
        if iterations >= cfg.max_iter {
            break SolveStatus::IterationLimit;
        }
        let iter_clock = Instant::now();
        let mut factor_time = Duration::ZERO;
        let mut solve_time = Duration::ZERO;
        let mut factorized = false;
        let mut cg_iters = 0usize;

        let step = (|| -> Result<(PrimalStep<T>, Option<T>)> {
            match cfg.mode {
                PrimalMode::Exact => {
                    let d = bound_scaling_diag(&x, &p.u)?;
                    let before = direct.stats().clone();
                    let step = infeasible_step_scaled(p, &st, &d, &mut direct, !cfg.unstabilized)?;
                    let delta = if cfg.monitor_proximity {
                        Some(proximity(p, &x, mu, &mut direct)?.delta)
                    } else {
                        None
                    };
                    let after = direct.stats();
                    let fresh = after.factorizations - before.factorizations;
                    factorizations += fresh;
                    factorized = fresh > 0;
                    factor_time += after.factor_time - before.factor_time;
                    solve_time += after.solve_time - before.solve_time;
                    Ok((step, delta))
                }
                PrimalMode::FrozenPrecond | PrimalMode::DelayedScaling => {
                    if aat.is_none() {
                        aat = Some(aat_factor(&p.a)?);
                    }
                    let stale = match &cache {
                        None => true,
                        Some(c) => match cfg.mode {
                            PrimalMode::FrozenPrecond => {
                                let diff: Vec<T> = x.iter().zip(&c.z).map(|(&a, &b)| a - b).collect();
                                norm2(&diff) >= cfg.theta
                            }
                            _ => thresholded_distance(&x, &c.z, &x, cfg.nu) >= cfg.theta,
                        },
                    };
                    let mut refresh = |cache: &mut Option<PreconditionerCache<T>>| -> Result<()> {
                        let t = Instant::now();
                        match cache {
                            Some(c) => c.refresh(p, &x, &mut direct)?,
                            None => *cache = Some(PreconditionerCache::build(p, &x, &mut direct)?),
                        }
                        factor_time += t.elapsed();
                        factorizations += 1;
                        factorized = true;
                        Ok(())
                    };
                    if stale {
                        refresh(&mut cache)?;
                    }
                    let cg_tol = cfg.cg_tol.at(mu);
                    let mut attempt = 0;
                    let (step, delta) = loop {
                        let c = cache.as_ref().expect("cache built above");
                        let w = match cfg.mode {
                            PrimalMode::FrozenPrecond => x.clone(),
                            _ => delayed_scaling_point(&x, &c.z, cfg.nu),
                        };
                        let d = bound_scaling_diag(&w, &p.u)?;
                        let mut pcg = PcgSolver::new(&c.factor, cg_tol, cfg.cg_max_iter);
                        let t = Instant::now();
                        let outcome = infeasible_step_scaled(p, &st, &d, &mut pcg, !cfg.unstabilized);
                        cg_iters += pcg.stats().cg_iterations;
                        match outcome {
                            Ok(step) => {
                                let delta = if cfg.monitor_proximity {
                                    let mut probe = PcgSolver::new(&c.factor, cg_tol, cfg.cg_max_iter.max(500));
                                    let delta = proximity(p, &x, mu, &mut probe).map(|pr| pr.delta).ok();
                                    cg_iters += probe.stats().cg_iterations;
                                    delta
                                } else {
                                    None
                                };
                                solve_time += t.elapsed();
                                break (step, delta);
                            }
                            Err(Error::InexactDirection { relative_residual }) if attempt == 0 => {
                                debug!("pcg stalled at {relative_residual:e}; refreshing preconditioner");
                                solve_time += t.elapsed();
                                attempt += 1;
                                refresh(&mut cache)?;
                            }
                            Err(e) => return Err(e),
                        }
                    };
                    let target: Vec<T> = {
                        let ax = p.a.mul_vec(&x);
                        ax.iter().zip(&p.b).map(|(&a, &b)| b - a).collect()
                    };
                    let t = Instant::now();
                    let c = cache.as_ref().expect("cache built above");
                    let dx = cache_scaled_repair(p, &step.dx, &target, c)?;
                    let dx = feasibility_repair_to(p, &dx, &target, aat.as_ref().expect("factored above"))?;
                    solve_time += t.elapsed();
                    Ok((PrimalStep { dx, ..step }, delta))
                }
            }
        })();

        let (mut step, delta) = match step {
            Ok(v) => v,
            Err(e @ (Error::FactorizationFailed { .. }
            | Error::NumericalBreakdown(_)
            | Error::InexactDirection { .. }
            | Error::InteriorityViolation { .. }
            | Error::NonPositiveScaling { .. })) => {
                failure = Some(e.to_string());
                break SolveStatus::NumericalFailure;
            }
            Err(e) => return Err(e),
        };
        cg_total += cg_iters;

        if !step.dx.iter().chain(&step.dy).chain(&step.ds).all(|v| v.is_finite()) {
            failure = Some("non-finite search direction".into());
            break SolveStatus::NumericalFailure;
        }
        drop_recession(&mut step.dx, &x, &pairs);
        let alpha_max = ratio_test(&x, &step.dx, &p.u, cfg.step_fraction);
        let sigma_new: Vec<T> = (0..n).map(|j| sigma[j] + step.ds[j]).collect();
        let alpha = match cfg.step {
            StepRule::RatioTest => alpha_max,
            StepRule::LineSearch => barrier_line_search(&x, &step.dx, &p.u, &sigma_new, mu, alpha_max),
        };
        let x_new: Vec<T> = (0..n).map(|j| x[j] + alpha * step.dx[j]).collect();
        if let Err(e) = check_interior(&x_new, &p.u) {
            failure = Some(e.to_string());
            break SolveStatus::NumericalFailure;
        }
        let dxn: Vec<T> = (0..n).map(|j| x_new[j] - x[j]).collect();
        let step_norm = norm2(&dxn);
        let thresholded_step = thresholded_distance(&x_new, &x, &x, T::one());
        let scaled_len = {
            let d = bound_scaling_diag(&x, &p.u).unwrap_or_else(|_| x.clone());
            let r: Vec<T> = (0..n).map(|j| step.dx[j] / d[j]).collect();
            norm2(&r)
        };

        let mu_k = mu;
        x = x_new;
        recenter_split_pairs(&mut x, &pairs);
        for (yi, &dyi) in y.iter_mut().zip(&step.dy) {
            *yi += dyi;
        }
        sigma = sigma_new;
        mu = match cfg.tau {
            TauRule::Theory => (T::one() - tau_theory) * mu,
            TauRule::Fixed(t) => (T::one() - t) * mu,
            TauRule::Adaptive { reduction, max_step } => {
                if alpha >= T::lit(0.9) && scaled_len <= max_step {
                    reduction * mu
                } else {
                    mu
                }
            }
        };
        iterations += 1;

        let st_new = state_of(&x, &y, &sigma, mu);
        let met = convergence_metrics(p, &st_new);
        let total = iter_clock.elapsed();
        trace.push(TraceRecord {
            iter: seed.first_iter + iterations - 1,
            phase: Phase::Primal,
            mu: mu_k.to_f64_lossy(),
            e_p: met.e_p.to_f64_lossy(),
            e_d: met.e_d.to_f64_lossy(),
            e_g: met.e_g.to_f64_lossy(),
            step_norm: step_norm.to_f64_lossy(),
            thresholded_step: thresholded_step.to_f64_lossy(),
            delta: delta.map(|d| d.to_f64_lossy()),
            alpha: alpha.to_f64_lossy(),
            factorized,
            cg_iters,
            factor_ms: ms(factor_time),
            solve_ms: ms(solve_time),
            other_ms: ms(total.saturating_sub(factor_time + solve_time)),
        });
    };

    let state = state_of(&x, &y, &sigma, mu);
    let metrics = convergence_metrics(p, &state);
    let wall_time = clock.elapsed();
    Ok(SolveResult {
        status,
        objective: p.objective(&state.x),
        state,
        metrics,
        iterations,
        factorizations,
        cg_iterations: cg_total,
        trace,
        iterates,
        dual_iterates,
        phases: PhaseSummary {
            primal_iterations: iterations,
            primal_factorizations: factorizations,
            primal_time: wall_time,
            ..PhaseSummary::default()
        },
        wall_time,
        failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CscMatrix;

    fn two_var() -> StandardLp<f64> {
        let a = CscMatrix::<f64>::from_dense(1, 2, &[1.0, 1.0]).unwrap();
        StandardLp::new(a, vec![2.0], vec![1.0, 0.0]).unwrap()
    }

    fn on_path(mu: f64) -> IterateState<f64> {
        let x1 = 1.0 + mu - (1.0 + mu * mu).sqrt();
        let x = vec![x1, 2.0 - x1];
        let y = -mu / x[1];
        IterateState::new(x.clone(), vec![y], vec![1.0 - y, -y], mu)
    }

    #[test]
    fn direction_examples() {
        let p = two_var();
        let mut s = DirectSolver::new();
        let dx = primal_direction(&p, &[1.0, 1.0], 1.0, &mut s).unwrap();
        assert!((dx[0] + 0.5).abs() < 1e-15 && (dx[1] - 0.5).abs() < 1e-15);

        let st = on_path(1.0);
        let dx = primal_direction(&p, &st.x, 1.0, &mut s).unwrap();
        assert!(norm2(&dx) < 1e-12);

        let p2 = StandardLp::new(p.a.clone(), p.b.clone(), vec![2.0, 0.0]).unwrap();
        let dx2 = primal_direction(&p2, &[0.7, 1.3], 2.0, &mut s).unwrap();
        let dx1 = primal_direction(&p, &[0.7, 1.3], 1.0, &mut s).unwrap();
        assert!((dx1[0] - dx2[0]).abs() < 1e-15 && (dx1[1] - dx2[1]).abs() < 1e-15);
    }

    #[test]
    fn ratio_test_examples() {
        let inf = [f64::INFINITY; 2];
        assert_eq!(ratio_test(&[1.0, 1.0], &[1.0, 0.0], &inf, 0.9995), 1.0);
        assert!((ratio_test(&[1.0, 1.0], &[-2.0, 1.0], &inf, 0.9995) - 0.49975).abs() < 1e-15);
        assert_eq!(ratio_test(&[1.0], &[-1e-30], &inf[..1], 0.9995), 1.0);
        let a = ratio_test(&[1.0], &[2.0], &[2.0], 0.5);
        assert_eq!(a, 0.25);
    }

    #[test]
    fn repair_examples() {
        let p = two_var();
        let aat = aat_factor(&p.a).unwrap();
        let out = feasibility_repair(&p, &[0.0, 0.0], &[1.0], &aat).unwrap();
        assert!((out[0] + 0.5).abs() < 1e-15 && (out[1] + 0.5).abs() < 1e-15);
        let same = feasibility_repair(&p, &[0.3, 0.1], &[0.0], &aat).unwrap();
        assert_eq!(same, vec![0.3, 0.1]);
    }

    #[test]
    fn on_path_step_is_zero() {
        let p = two_var();
        let st = on_path(0.5);
        let step = infeasible_primal_step(&p, &st, &mut DirectSolver::new()).unwrap();
        for v in step.dx.iter().chain(&step.dy).chain(&step.ds) {
            assert!(v.abs() < 1e-14, "{v}");
        }
    }

    /// Dense solve of the linearized system
    /// `AΔx = −r_p`, `AᵀΔy + Δs = −r_d`, `Δs + μD⁻²Δx = −r_μ`.
    fn dense_kkt(p: &StandardLp<f64>, st: &IterateState<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        use crate::problem::residuals;
        use nalgebra::{DMatrix, DVector};
        let (m, n) = (p.nrows(), p.ncols());
        let a = p.a.to_dense();
        let r = residuals(p, st);
        let d = bound_scaling_diag(&st.x, &p.u).unwrap();
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
            k[(m + n + j, n + m + j)] = 1.0;
            k[(m + n + j, j)] = st.mu / (d[j] * d[j]);
            rhs[m + n + j] = -r.r_mu[j];
        }
        let sol = k.lu().solve(&rhs).unwrap();
        (sol.rows(0, n).iter().copied().collect(), sol.rows(n, m).iter().copied().collect(), sol.rows(n + m, n).iter().copied().collect())
    }

    #[test]
    fn two_variable_step_against_kkt() {
        let p = two_var();
        let st = IterateState::new(vec![1.0, 1.0], vec![0.0], vec![1.0, 0.0], 0.5);
        let step = infeasible_primal_step(&p, &st, &mut DirectSolver::new()).unwrap();
        let (dx, dy, ds) = dense_kkt(&p, &st);
        for j in 0..2 {
            assert!((step.dx[j] - dx[j]).abs() < 1e-10);
            assert!((step.ds[j] - ds[j]).abs() < 1e-10);
        }
        assert!((step.dy[0] - dy[0]).abs() < 1e-10);
        // by hand: Δx = (−1, 1), Δy = 0
        assert!((dx[0] + 1.0).abs() < 1e-12 && (dx[1] - 1.0).abs() < 1e-12 && dy[0].abs() < 1e-12);

        let infeasible = IterateState::new(vec![0.5, 2.0], vec![0.3], vec![0.2, 0.1], 0.5);
        let step = infeasible_primal_step(&p, &infeasible, &mut DirectSolver::new()).unwrap();
        let (dx, dy, ds) = dense_kkt(&p, &infeasible);
        for j in 0..2 {
            assert!((step.dx[j] - dx[j]).abs() < 1e-10);
            assert!((step.ds[j] - ds[j]).abs() < 1e-10);
        }
        assert!((step.dy[0] - dy[0]).abs() < 1e-10);
        let unstab = infeasible_step_scaled(&p, &infeasible, &infeasible.x, &mut DirectSolver::new(), false).unwrap();
        for j in 0..2 {
            assert!((unstab.dx[j] - step.dx[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn split_free_variable_converges() {
        use crate::problem::{to_standard_form, LpProblem, RowKind, Sense};
        // min x − z  s.t.  x + z = 1, z − x ≤ 3 with z free: optimum x = 0, z = 1
        let mut lp = LpProblem::new("free", Sense::Minimize);
        let r0 = lp.add_row("SUM", RowKind::Equal, 1.0);
        let r1 = lp.add_row("DIFF", RowKind::LessEqual, 3.0);
        let x = lp.add_column("X", 1.0);
        let z = lp.add_column("Z", -1.0);
        lp.columns[z].lower = f64::NEG_INFINITY;
        for (r, c, v) in [(r0, x, 1.0), (r0, z, 1.0), (r1, x, -1.0), (r1, z, 1.0)] {
            lp.set_coefficient(r, c, v);
        }
        let p = to_standard_form(&lp).unwrap();
        let pairs = split_pairs(&p);
        assert_eq!(pairs.len(), 1);
        let start = crate::pdipm::pd_starting_point(&p).unwrap();
        let res = primal_solve(&p, &PrimalConfig::practical(), &start).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let orig = p.recovery.recover(&res.state.x);
        assert!(orig[0].abs() < 1e-8 && (orig[1] - 1.0).abs() < 1e-8, "{orig:?}");
        let (k, l) = pairs[0];
        assert!(res.state.x[k].min(res.state.x[l]) <= 1.0);
    }

    #[test]
    fn line_search_stops_at_barrier_minimum() {
        // ψ(α) = α·σΔx/μ − log(1 + αΔx/x) with σ/μ = 10, x = 1, Δx = −9: minimum at α = 0.1
        let a = barrier_line_search(&[1.0], &[-9.0], &[f64::INFINITY], &[10.0], 1.0, 0.111);
        assert!((a - 0.1).abs() < 1e-12);
    }

    #[test]
    fn square_system_converges_fast() {
        let a = CscMatrix::<f64>::from_dense(2, 2, &[2.0, 1.0, 1.0, 3.0]).unwrap();
        let p = StandardLp::new(a, vec![3.0, 4.0], vec![1.0, 1.0]).unwrap();
        let start = IterateState::new(vec![0.5, 0.5], vec![0.0, 0.0], vec![1.0, 1.0], 1.0);
        for mode in [PrimalMode::Exact, PrimalMode::FrozenPrecond, PrimalMode::DelayedScaling] {
            let cfg = PrimalConfig {
                mode,
                ..PrimalConfig::practical()
            };
            let res = primal_solve(&p, &cfg, &start).unwrap();
            assert_eq!(res.status, SolveStatus::Optimal, "{mode:?}");
            assert!(res.iterations <= 5, "{mode:?}: {}", res.iterations);
        }
    }

    #[test]
    fn two_variable_exact_run() {
        let p = two_var();
        let cfg = PrimalConfig {
            mode: PrimalMode::Exact,
            tau: TauRule::Fixed(0.05),
            max_iter: 1000,
            monitor_proximity: true,
            mu0: Some(1.0),
            ..PrimalConfig::default()
        };
        let res = primal_solve(&p, &cfg, &on_path(1.0)).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(res.trace.iter().all(|r| r.delta.unwrap() <= 0.5));
        assert!(res.state.x[0].abs() < 1e-9);
        let mut mu = 1.0;
        for r in &res.trace {
            assert_eq!(r.mu, mu);
            mu *= 0.95;
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = PrimalConfig::<f64> {
            tau: TauRule::Fixed(1.5),
            ..PrimalConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}

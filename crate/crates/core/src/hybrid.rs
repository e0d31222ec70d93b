//! Primal-dual first, then the delayed-scaling primal engine once iterates settle.

use std::time::{Duration, Instant};

use log::{debug, info, warn};

use crate::error::{Error, Result};
use crate::outcome::{PhaseSummary, SolveResult, SolveStatus};
use crate::pdipm::{is_numerical, PdConfig, PdEngine};
use crate::pipm::{primal_solve_seeded, PrimalConfig, PrimalMode, PrimalSeed};
use crate::problem::{IterateState, StandardLp};
use crate::scaling::thresholded_distance;
use crate::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchPolicy<T> {
    pub dist_threshold: T,
    pub time_ratio_threshold: f64,
    pub nu: T,
    pub min_pd_iters: usize,
}

impl<T: Scalar> Default for SwitchPolicy<T> {
    fn default() -> Self {
        Self {
            dist_threshold: T::lit(0.1),
            time_ratio_threshold: 30.0,
            nu: T::one(),
            min_pd_iters: 3,
        }
    }
}

impl<T: Scalar> SwitchPolicy<T> {
    pub fn validate(&self) -> Result<()> {
        let ok = self.dist_threshold > T::zero() && self.nu > T::zero() && self.time_ratio_threshold > 0.0;
        if !ok {
            return Err(Error::InvalidParameter("switch thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Source of the factorize/substitute time ratio.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TimeRatio {
    /// Exponential average of measured ratios; `weight` is given to the newest sample.
    Measured { weight: f64 },
    /// Injected constant, for reproducible runs.
    Fixed(f64),
}

impl Default for TimeRatio {
    fn default() -> Self {
        TimeRatio::Measured { weight: 0.3 }
    }
}

#[derive(Clone, Debug)]
pub struct RatioMeter {
    mode: TimeRatio,
    average: Option<f64>,
}

impl RatioMeter {
    pub fn new(mode: TimeRatio) -> Self {
        Self { mode, average: None }
    }

    pub fn record(&mut self, factor: Duration, solve: Duration) {
        if let TimeRatio::Measured { weight } = self.mode {
            let solve = solve.as_secs_f64().max(1e-9);
            let sample = factor.as_secs_f64() / solve;
            self.average = Some(match self.average {
                None => sample,
                Some(a) => weight * sample + (1.0 - weight) * a,
            });
        }
    }

    pub fn ratio(&self) -> f64 {
        match self.mode {
            TimeRatio::Fixed(r) => r,
            TimeRatio::Measured { .. } => self.average.unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SwitchReason {
    TooFewIterations,
    DistanceGate,
    RatioGate,
    Switch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SwitchDecision {
    pub switch: bool,
    pub reason: SwitchReason,
    pub distance: f64,
    pub time_ratio: f64,
}

/// Recent primal-dual history needed by the switch rule.
#[derive(Clone, Copy, Debug)]
pub struct SwitchHistory<'a, T> {
    pub x_prev: &'a [T],
    pub x: &'a [T],
    pub time_ratio: f64,
    pub pd_iterations: usize,
}

/// Gate on precomputed quantities.
pub fn decide<T: Scalar>(distance: T, time_ratio: f64, pd_iterations: usize, policy: &SwitchPolicy<T>) -> SwitchDecision {
    let reason = if pd_iterations < policy.min_pd_iters {
        SwitchReason::TooFewIterations
    } else if !(distance <= policy.dist_threshold) {
        SwitchReason::DistanceGate
    } else if !(time_ratio > policy.time_ratio_threshold) {
        SwitchReason::RatioGate
    } else {
        SwitchReason::Switch
    };
    SwitchDecision {
        switch: reason == SwitchReason::Switch,
        reason,
        distance: distance.to_f64_lossy(),
        time_ratio,
    }
}

/// `‖x_k − x_{k−1}‖_{x_k,ν} ≤ dist` and averaged time ratio `> ratio`.
pub fn should_switch<T: Scalar>(h: &SwitchHistory<'_, T>, policy: &SwitchPolicy<T>) -> SwitchDecision {
    let distance = thresholded_distance(h.x, h.x_prev, h.x, policy.nu);
    decide(distance, h.time_ratio, h.pd_iterations, policy)
}

/// Runs the hybrid. The iteration budget is `pd_cfg.max_iter` across both phases.
pub fn hybrid_solve<T: Scalar>(
    p: &StandardLp<T>,
    pd_cfg: &PdConfig<T>,
    primal_cfg: &PrimalConfig<T>,
    policy: &SwitchPolicy<T>,
    timing: TimeRatio,
) -> Result<SolveResult<T>> {
    policy.validate()?;
    primal_cfg.validate()?;
    let clock = Instant::now();
    let mut engine = PdEngine::new(p, pd_cfg.clone())?;
    let mut meter = RatioMeter::new(timing);
    let mut phases = PhaseSummary::default();
    let mut primal_trace = Vec::new();
    let mut primal_iterates = Vec::new();
    let mut primal_duals = Vec::new();
    let mut primal_cg = 0usize;
    let mut primal_time = Duration::ZERO;
    let mut failure = None;
    let mut primal_result: Option<SolveResult<T>> = None;

    let status = loop {
        if engine.converged() {
            break SolveStatus::Optimal;
        }
        let used = engine.iterations() + phases.primal_iterations;
        if used >= pd_cfg.max_iter {
            break SolveStatus::IterationLimit;
        }
        let x_prev = engine.state().x.clone();
        let info = match engine.step() {
            Ok(info) => info,
            Err(e) if is_numerical(&e) => {
                failure = Some(e.to_string());
                break SolveStatus::NumericalFailure;
            }
            Err(e) => return Err(e),
        };
        meter.record(info.factor_time, info.solve_time);
        if phases.fell_back || engine.converged() {
            continue;
        }
        let decision = should_switch(
            &SwitchHistory {
                x_prev: &x_prev,
                x: &engine.state().x,
                time_ratio: meter.ratio(),
                pd_iterations: engine.iterations(),
            },
            policy,
        );
        debug!(
            "switch check: distance {:.3e}, ratio {:.1}, {:?}",
            decision.distance, decision.time_ratio, decision.reason
        );
        if !decision.switch {
            continue;
        }

        let handover = engine.iterations() + phases.primal_iterations;
        info!("switching to primal iterations after {handover} iterations");
        phases.switch_iteration = Some(handover);
        let pd_state = engine.state();
        let start = IterateState {
            mu: pd_state.duality_measure(&p.u),
            ..pd_state.clone()
        };
        let mut cfg = primal_cfg.clone();
        cfg.mode = PrimalMode::DelayedScaling;
        cfg.mu0 = None;
        cfg.tol = pd_cfg.tol;
        cfg.max_iter = pd_cfg.max_iter - handover;
        cfg.record_iterates = pd_cfg.record_iterates;
        let seed = PrimalSeed {
            aat: Some(engine.aat().clone()),
            first_iter: handover,
        };
        let res = primal_solve_seeded(p, &cfg, &start, seed)?;
        debug_assert_eq!(
            res.trace.iter().filter(|r| r.factorized).count(),
            res.factorizations,
            "primal rows must report exactly the cache refreshes"
        );
        phases.primal_iterations += res.iterations;
        phases.primal_factorizations += res.factorizations;
        primal_time += res.wall_time;
        primal_cg += res.cg_iterations;
        primal_trace.extend(res.trace.iter().cloned());
        primal_iterates.extend(res.iterates.iter().skip(1).cloned());
        primal_duals.extend(res.dual_iterates.iter().skip(1).cloned());
        if res.status == SolveStatus::NumericalFailure {
            warn!(
                "primal phase failed ({}); resuming primal-dual iterations",
                res.failure.as_deref().unwrap_or("unknown")
            );
            phases.fell_back = true;
            engine.first_iter += res.iterations;
            continue;
        }
        let status = res.status;
        primal_result = Some(res);
        break status;
    };

    let wall_time = clock.elapsed();
    let pd_iterations = engine.iterations();
    let pd_factorizations = engine.factorizations();
    let mut trace: Vec<_> = engine.trace().to_vec();
    trace.extend(primal_trace);
    trace.sort_by_key(|r| r.iter);
    phases.pd_iterations = pd_iterations;
    phases.pd_factorizations = pd_factorizations;
    phases.primal_time = primal_time;
    phases.pd_time = wall_time.saturating_sub(primal_time);

    let pd = engine.finish(status, wall_time, failure);
    let pd_iterates = pd.iterates.clone();
    let pd_duals = pd.dual_iterates.clone();
    let mut out = match primal_result {
        Some(res) => res,
        None => pd,
    };
    out.iterations = pd_iterations + phases.primal_iterations;
    out.factorizations = pd_factorizations + phases.primal_factorizations;
    out.cg_iterations = primal_cg;
    out.trace = trace;
    // each primal run starts from the last primal-dual iterate, which is already recorded
    out.iterates = pd_iterates;
    out.iterates.extend(primal_iterates);
    out.dual_iterates = pd_duals;
    out.dual_iterates.extend(primal_duals);
    out.phases = phases;
    out.wall_time = wall_time;
    Ok(out)
}

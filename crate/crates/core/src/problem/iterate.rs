use super::standard::StandardLp;
use crate::linalg::vector::{dot, norm2};
use crate::Scalar;

/// Iterate shared by all engines.
///
/// Upper-bound slacks `w = u − x` are kept implicit; `v` holds the matching
/// multipliers and is zero on unbounded columns.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub s: Vec<T>,
    pub v: Vec<T>,
    pub mu: T,
}

impl<T: Scalar> IterateState<T> {
    pub fn new(x: Vec<T>, y: Vec<T>, s: Vec<T>, mu: T) -> Self {
        let v = vec![T::zero(); x.len()];
        Self { x, y, s, v, mu }
    }

    /// `u − x` on bounded columns, `+∞` elsewhere.
    pub fn upper_slack(&self, u: &[T]) -> Vec<T> {
        self.x.iter().zip(u).map(|(&x, &u)| u - x).collect()
    }

    /// Complementarity `(xᵀs + wᵀv) / n`.
    pub fn duality_measure(&self, u: &[T]) -> T {
        let n = self.x.len().max(1);
        let mut g = dot(&self.x, &self.s);
        for j in 0..self.x.len() {
            if u[j].is_finite() {
                g += (u[j] - self.x[j]) * self.v[j];
            }
        }
        g / T::from_count(n)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residuals<T> {
    /// `Ax − b`
    pub r_p: Vec<T>,
    /// `Aᵀy + s − v − c`
    pub r_d: Vec<T>,
    /// `s − v − μ(1/x − 1/(u − x))`
    pub r_mu: Vec<T>,
}

/// Barrier gradient `1/x − 1/(u − x)`; the second term only where `u` is finite.
pub fn barrier_gradient<T: Scalar>(x: &[T], u: &[T]) -> Vec<T> {
    x.iter()
        .zip(u)
        .map(|(&x, &u)| {
            let g = x.recip();
            if u.is_finite() {
                g - (u - x).recip()
            } else {
                g
            }
        })
        .collect()
}

pub fn residuals<T: Scalar>(p: &StandardLp<T>, st: &IterateState<T>) -> Residuals<T> {
    let mut r_p = p.a.mul_vec(&st.x);
    for (r, &b) in r_p.iter_mut().zip(&p.b) {
        *r -= b;
    }
    let mut r_d = p.a.tr_mul_vec(&st.y);
    for j in 0..r_d.len() {
        r_d[j] += st.s[j] - st.v[j] - p.c[j];
    }
    let g = barrier_gradient(&st.x, &p.u);
    let r_mu = (0..st.x.len()).map(|j| st.s[j] - st.v[j] - st.mu * g[j]).collect();
    Residuals { r_p, r_d, r_mu }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics<T> {
    pub e_p: T,
    pub e_d: T,
    pub e_g: T,
}

impl<T: Scalar> Metrics<T> {
    pub fn max(&self) -> T {
        self.e_p.max(self.e_d).max(self.e_g)
    }
}

/// Dual objective `bᵀy − uᵀv` over bounded columns.
pub fn dual_objective<T: Scalar>(p: &StandardLp<T>, st: &IterateState<T>) -> T {
    let mut d = dot(&p.b, &st.y);
    for j in 0..p.ncols() {
        if p.u[j].is_finite() {
            d -= p.u[j] * st.v[j];
        }
    }
    d
}

pub fn convergence_metrics<T: Scalar>(p: &StandardLp<T>, st: &IterateState<T>) -> Metrics<T> {
    let r = residuals(p, st);
    let one = T::one();
    let e_p = norm2(&r.r_p) / (one + norm2(&p.b));
    let e_d = norm2(&r.r_d) / (one + norm2(&p.c));
    let pobj = p.objective(&st.x);
    let dobj = dual_objective(p, st);
    let e_g = (pobj - dobj).abs() / (one + pobj.abs() + dobj.abs());
    Metrics { e_p, e_d, e_g }
}

//! Scaling diagonals, proximity to the central path, and thresholded distances.

use crate::error::{check_len, Error, Result};
use crate::linalg::vector::norm2;
use crate::problem::{barrier_gradient, StandardLp};
use crate::solver::NormalSolver;
use crate::Scalar;

/// Default threshold separating large and small coordinates.
pub const DEFAULT_NU: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalingKind {
    /// `d = x`
    Primal,
    /// `d = x(u−x)/√(x²+(u−x)²)`, reducing to `x` where `u = ∞`
    BoundedPrimal,
    /// `d = √(x/s)`, with upper-bound terms when present
    PrimalDual,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingVector<T> {
    pub d: Vec<T>,
    pub kind: ScalingKind,
}

impl<T: Scalar> ScalingVector<T> {
    pub fn primal(x: &[T]) -> Result<Self> {
        check_positive(x)?;
        Ok(Self {
            d: x.to_vec(),
            kind: ScalingKind::Primal,
        })
    }

    pub fn bounded_primal(x: &[T], u: &[T]) -> Result<Self> {
        Ok(Self {
            d: bound_scaling_diag(x, u)?,
            kind: ScalingKind::BoundedPrimal,
        })
    }

    pub fn primal_dual(x: &[T], s: &[T], v: &[T], u: &[T]) -> Result<Self> {
        Ok(Self {
            d: primal_dual_scaling_diag(x, s, v, u)?,
            kind: ScalingKind::PrimalDual,
        })
    }
}

fn check_positive<T: Scalar>(d: &[T]) -> Result<()> {
    match d.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
        Some(index) => Err(Error::NonPositiveScaling { index }),
        None => Ok(()),
    }
}

/// Inverse square root of the barrier Hessian `X⁻² + (U−X)⁻²`.
pub fn bound_scaling_diag<T: Scalar>(x: &[T], u: &[T]) -> Result<Vec<T>> {
    check_len("bound scaling", x.len(), u.len())?;
    x.iter()
        .zip(u)
        .enumerate()
        .map(|(index, (&x, &u))| {
            if !(x > T::zero()) || !(x < u) {
                return Err(Error::InteriorityViolation { index });
            }
            if u.is_finite() {
                let w = u - x;
                Ok(x * w / x.hypot(w))
            } else {
                Ok(x)
            }
        })
        .collect()
}

/// `d = (s/x + v/(u−x))^{-1/2}`; the bound term only where `u` is finite.
pub fn primal_dual_scaling_diag<T: Scalar>(x: &[T], s: &[T], v: &[T], u: &[T]) -> Result<Vec<T>> {
    let n = x.len();
    check_len("primal-dual scaling", n, s.len())?;
    check_len("primal-dual scaling", n, v.len())?;
    check_len("primal-dual scaling", n, u.len())?;
    let d: Vec<T> = (0..n)
        .map(|j| {
            let mut theta_inv = s[j] / x[j];
            if u[j].is_finite() {
                theta_inv += v[j] / (u[j] - x[j]);
            }
            theta_inv.recip().sqrt()
        })
        .collect();
    check_positive(&d)?;
    Ok(d)
}

/// Split of the coordinates by `x_j ≥ ν`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionLS {
    pub large: Vec<usize>,
    pub small: Vec<usize>,
}

impl PartitionLS {
    /// Ties `x_j = ν` go to the large set.
    pub fn new<T: Scalar>(x: &[T], nu: T) -> Self {
        let (large, small) = (0..x.len()).partition(|&j| x[j] >= nu);
        Self { large, small }
    }
}

/// `√(‖X_L⁻¹(y_L − z_L)‖² + ‖y_S − z_S‖²)` with `L = {j : x_j ≥ ν}`.
pub fn thresholded_distance<T: Scalar>(y: &[T], z: &[T], x: &[T], nu: T) -> T {
    debug_assert!(y.len() == z.len() && z.len() == x.len());
    let r: Vec<T> = (0..x.len())
        .map(|j| {
            let diff = y[j] - z[j];
            if x[j] >= nu {
                diff / x[j]
            } else {
                diff
            }
        })
        .collect();
    norm2(&r)
}

/// `‖X⁻¹(y − z)‖`
pub fn scaled_distance<T: Scalar>(y: &[T], z: &[T], x: &[T]) -> T {
    let r: Vec<T> = (0..x.len()).map(|j| (y[j] - z[j]) / x[j]).collect();
    norm2(&r)
}

/// Current values on small coordinates, cached `z` on large ones.
pub fn delayed_scaling_point<T: Scalar>(x: &[T], z: &[T], nu: T) -> Vec<T> {
    x.iter()
        .zip(z)
        .map(|(&xj, &zj)| if xj >= nu { zj } else { xj })
        .collect()
}

/// Proximity value with the minimizing dual pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Proximity<T> {
    pub delta: T,
    pub y: Vec<T>,
    /// `c − Aᵀy`
    pub s: Vec<T>,
}

/// `δ(x, μ) = ‖P_{AD} D(c/μ − g)‖` with `D` the barrier scaling and `g` the
/// barrier gradient; without bounds this is `‖P_{AX}(Xc/μ − e)‖`.
pub fn proximity<T: Scalar, S: NormalSolver<T> + ?Sized>(
    p: &StandardLp<T>,
    x: &[T],
    mu: T,
    solver: &mut S,
) -> Result<Proximity<T>> {
    check_len("proximity iterate", p.ncols(), x.len())?;
    if !(mu > T::zero()) {
        return Err(Error::InvalidParameter("barrier parameter must be positive".into()));
    }
    let d = bound_scaling_diag(x, &p.u)?;
    let g = barrier_gradient(x, &p.u);
    let v: Vec<T> = (0..x.len()).map(|j| d[j] * (p.c[j] / mu - g[j])).collect();
    let dv: Vec<T> = v.iter().zip(&d).map(|(&vj, &dj)| vj * dj).collect();
    let rhs = p.a.mul_vec(&dv);
    let w = solver.solve_normal(&p.a, &d, &rhs)?;
    let atw = p.a.tr_mul_vec(&w);
    let projected: Vec<T> = (0..x.len()).map(|j| v[j] - d[j] * atw[j]).collect();
    let y: Vec<T> = w.iter().map(|&wi| mu * wi).collect();
    let aty = p.a.tr_mul_vec(&y);
    let s = p.c.iter().zip(&aty).map(|(&c, &t)| c - t).collect();
    Ok(Proximity {
        delta: norm2(&projected),
        y,
        s,
    })
}

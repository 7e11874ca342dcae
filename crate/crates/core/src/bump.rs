//! Smooth plateau bumps and the lower bound `m` of `(xψ'(x) + ψ(x))ψ(y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Transition profile used on `(δ/2, δ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BumpShape {
    /// `σ(s) = exp(-1/s)`.
    #[default]
    SmoothstepExp,
    /// `σ(s) = exp(-1/s²)`; flatter joins, steeper middle.
    SmoothstepExpSquared,
}

impl BumpShape {
    pub fn name(&self) -> &'static str {
        match self {
            BumpShape::SmoothstepExp => "smoothstep-exp",
            BumpShape::SmoothstepExpSquared => "smoothstep-exp-squared",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "smoothstep-exp" => Ok(BumpShape::SmoothstepExp),
            "smoothstep-exp-squared" => Ok(BumpShape::SmoothstepExpSquared),
            other => Err(Error::invalid(format!("unknown bump profile {other:?}"))),
        }
    }

    #[inline]
    fn sigma(&self, s: f64) -> (f64, f64) {
        if s <= 0.0 {
            return (0.0, 0.0);
        }
        match self {
            BumpShape::SmoothstepExp => {
                let v = (-1.0 / s).exp();
                if v == 0.0 {
                    (0.0, 0.0)
                } else {
                    (v, v / (s * s))
                }
            }
            BumpShape::SmoothstepExpSquared => {
                let v = (-1.0 / (s * s)).exp();
                if v == 0.0 {
                    (0.0, 0.0)
                } else {
                    (v, 2.0 * v / (s * s * s))
                }
            }
        }
    }
}

/// Even C∞ bump: 1 on `[0, δ/2]`, 0 on `[δ, ∞)`, strictly decreasing between.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    delta: f64,
    shape: BumpShape,
}

impl BumpProfile {
    pub fn new(delta: f64, shape: BumpShape) -> Result<Self> {
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::invalid(format!("bump delta must be positive, got {delta}")));
        }
        Ok(BumpProfile { delta, shape })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn shape(&self) -> BumpShape {
        self.shape
    }

    #[inline]
    fn transition(&self, t: f64) -> (f64, f64) {
        let (a, da) = self.shape.sigma(1.0 - t);
        let (b, db) = self.shape.sigma(t);
        let den = a + b;
        let s = a / den;
        let ds = -(da * b + a * db) / (den * den);
        (s, ds)
    }

    #[inline]
    pub fn psi(&self, x: f64) -> f64 {
        let ax = x.abs();
        let half = 0.5 * self.delta;
        if ax <= half {
            1.0
        } else if ax >= self.delta {
            0.0
        } else {
            self.transition((ax - half) / half).0
        }
    }

    #[inline]
    pub fn psi_prime(&self, x: f64) -> f64 {
        let ax = x.abs();
        let half = 0.5 * self.delta;
        if ax <= half || ax >= self.delta {
            0.0
        } else {
            let ds = self.transition((ax - half) / half).1;
            x.signum() * ds / half
        }
    }

    /// `ψ(x)` and `ψ'(x)` together.
    #[inline]
    pub fn psi_both(&self, x: f64) -> (f64, f64) {
        let ax = x.abs();
        let half = 0.5 * self.delta;
        if ax <= half {
            (1.0, 0.0)
        } else if ax >= self.delta {
            (0.0, 0.0)
        } else {
            let (s, ds) = self.transition((ax - half) / half);
            (s, x.signum() * ds / half)
        }
    }

    /// `x ψ'(x) + ψ(x)`, the derivative of `x ↦ x ψ(x)`.
    #[inline]
    pub fn slope_factor(&self, x: f64) -> f64 {
        let (p, dp) = self.psi_both(x);
        x * dp + p
    }
}

/// Certified range of `(xψ'(x) + ψ(x))ψ(y)` over the support square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpBound {
    pub m: f64,
    pub grid_resolution: usize,
    pub refinement_passes: usize,
    /// Location `(x, y)` of the minimum found.
    pub argmin: [f64; 2],
    pub inf_value: f64,
    pub sup_value: f64,
}

/// Grid settings for [`compute_m`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MGrid {
    pub resolution: usize,
    pub passes: usize,
}

impl Default for MGrid {
    fn default() -> Self {
        MGrid { resolution: 10_000, passes: 3 }
    }
}

const REFINE_POINTS: usize = 101;

/// Dense grid over `[-δ, δ]²` followed by shrinking local grids around the minimiser.
pub fn compute_m(profile: &BumpProfile, grid: MGrid) -> Result<BumpBound> {
    let n = grid.resolution;
    if n < 3 {
        return Err(Error::invalid("grid resolution must be at least 3"));
    }
    let d = profile.delta();
    let step = 2.0 * d / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| -d + step * i as f64).collect();
    let fx: Vec<f64> = xs.iter().map(|&x| profile.slope_factor(x)).collect();
    let fy: Vec<f64> = xs.iter().map(|&y| profile.psi(y)).collect();
    if fx.iter().chain(&fy).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("bump derivative produced a non-finite value".into()));
    }

    let mut best = (f64::INFINITY, 0usize, 0usize);
    let mut sup = f64::NEG_INFINITY;
    for (i, &a) in fx.iter().enumerate() {
        let mut row_min = f64::INFINITY;
        let mut row_arg = 0;
        for (j, &b) in fy.iter().enumerate() {
            let v = a * b;
            if v < row_min {
                row_min = v;
                row_arg = j;
            }
            sup = sup.max(v);
        }
        if row_min < best.0 {
            best = (row_min, i, row_arg);
        }
    }

    let mut inf = best.0;
    let mut arg = [xs[best.1], xs[best.2]];
    let mut half_window = 2.0 * step;
    for _ in 0..grid.passes {
        let h = 2.0 * half_window / (REFINE_POINTS - 1) as f64;
        let (cx, cy) = (arg[0], arg[1]);
        for i in 0..REFINE_POINTS {
            let x = (cx - half_window + h * i as f64).clamp(-d, d);
            let a = profile.slope_factor(x);
            for j in 0..REFINE_POINTS {
                let y = (cy - half_window + h * j as f64).clamp(-d, d);
                let v = a * profile.psi(y);
                sup = sup.max(v);
                if v < inf {
                    inf = v;
                    arg = [x, y];
                }
            }
        }
        half_window = 2.0 * h;
    }

    Ok(BumpBound {
        m: (-inf).max(0.0),
        grid_resolution: n,
        refinement_passes: grid.passes,
        argmin: arg,
        inf_value: inf,
        sup_value: sup,
    })
}

/// Outcome of testing whether a forward-direction expansion of the stable
/// coordinate could be a diffeomorphism.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForwardModificationVerdict {
    /// Whether `1/(1 - 2/λ) < -m` holds. `false` means the construction fails.
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`; non-negative exactly when the inequality fails.
    pub gap: f64,
    pub witness: Option<DerivativeWitness>,
}

/// A point of the `(c, r)` half-plane where `∂R/∂c ≤ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivativeWitness {
    pub c: f64,
    pub r: f64,
    pub derivative: f64,
}

/// Evaluates `1/(1 - 2/λ) < -m` alone.
pub fn forward_modification_relation(m: f64, lambda_ss: f64) -> Result<ForwardModificationVerdict> {
    if !(lambda_ss > 0.0 && lambda_ss < 2.0) {
        return Err(Error::invalid(format!("lambda_ss must lie in (0, 2), got {lambda_ss}")));
    }
    if !(m >= 0.0) {
        return Err(Error::invalid(format!("m must be non-negative, got {m}")));
    }
    let lhs = 1.0 / (1.0 - 2.0 / lambda_ss);
    let rhs = -m;
    Ok(ForwardModificationVerdict { holds: lhs < rhs, lhs, rhs, gap: lhs - rhs, witness: None })
}

/// [`forward_modification_relation`] plus a grid search for a point where
/// `∂R/∂c = (kcψ'(kc) + ψ(kc))ψ(r)(2 - λ) + λ` is non-positive.
pub fn forward_modification_infeasibility(
    profile: &BumpProfile,
    m: f64,
    lambda_ss: f64,
    k: f64,
) -> Result<ForwardModificationVerdict> {
    let mut verdict = forward_modification_relation(m, lambda_ss)?;
    if !(k > 0.0) {
        return Err(Error::invalid("k must be positive"));
    }
    let d = profile.delta();
    let (nu, nr) = (401usize, 201usize);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    for i in 0..nu {
        let u = -d + 2.0 * d * i as f64 / (nu - 1) as f64;
        let a = profile.slope_factor(u);
        for j in 0..nr {
            let r = d * j as f64 / (nr - 1) as f64;
            let v = a * profile.psi(r) * (2.0 - lambda_ss) + lambda_ss;
            if v < best.0 {
                best = (v, u / k, r);
            }
        }
    }
    if best.0 <= 0.0 {
        verdict.witness = Some(DerivativeWitness { c: best.1, r: best.2, derivative: best.0 });
    }
    Ok(verdict)
}

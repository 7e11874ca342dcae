use nalgebra::{Matrix2, Matrix3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_points, CertReport, SamplingSpec, Witness};
use crate::construct::RATIO_GAMMA;
use crate::construct::{DaSystem, SystemParams, Variant};
use crate::error::{Error, Result};
use crate::relations::ratio_bound_constants;
use crate::torus::{PrecisePoint, TorusPoint, Vec3};

/// Backward-orbit length used to converge the strong-unstable direction.
pub const DEFAULT_DIRECTION_ITERS: usize = 24;

const CAUCHY_TOL: f64 = 1e-10;

const DEPTH_GROWTH: usize = 16;

/// Strong-unstable direction at `x` in frame coordinates: the unstable axis
/// taken `iters` steps back along the orbit and pushed forward through the
/// Jacobian cocycle. The depth doubles (up to 16 times `iters`) until the
/// last step moves the direction by less than `1e-10`.
pub fn estimate_unstable_direction(system: &DaSystem, x: &TorusPoint, iters: usize) -> Result<Vec3> {
    let axis = system.unstable_axis();
    let mut v = Vec3::zeros();
    v[axis] = 1.0;
    if system.is_linear() {
        return Ok(v);
    }
    if iters == 0 {
        return Err(Error::invalid("direction estimate needs at least one iterate"));
    }
    let mut depth = iters;
    loop {
        match direction_at_depth(system, x, depth, v, axis) {
            Err(Error::Numerical(_)) if depth < iters * DEPTH_GROWTH => depth *= 2,
            other => return other,
        }
    }
}

fn direction_at_depth(system: &DaSystem, x: &TorusPoint, iters: usize, seed: Vec3, axis: usize) -> Result<Vec3> {
    let mut orbit = Vec::with_capacity(iters);
    let mut y = PrecisePoint::new(*x);
    for _ in 0..iters {
        y = system.apply_inverse_precise(&y)?;
        orbit.push(y);
    }
    let push = |j: &Matrix3<f64>, v: &Vec3| -> Result<Vec3> {
        let w = j * v;
        let norm = w.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::NonFinite("pushed unstable vector"));
        }
        Ok(if w[axis] < 0.0 { -w / norm } else { w / norm })
    };
    // `deep` starts one step further back than `shallow`; their gap at `x`
    // is the Cauchy increment in the depth.
    let (mut deep, mut shallow) = (seed, seed);
    for (i, p) in orbit.iter().enumerate().rev() {
        let (_, j) = system.step(p)?;
        deep = push(&j, &deep)?;
        if i + 1 < iters {
            shallow = push(&j, &shallow)?;
        }
    }
    let increment = (deep - shallow).norm();
    if !(increment < CAUCHY_TOL) {
        return Err(Error::Numerical(format!(
            "unstable direction at {:?} not converged after {iters} iterates (increment {increment:e})",
            x.coords()
        )));
    }
    Ok(deep)
}

/// Squared area factor of `J` on the plane spanned by `u` and `v`, computed as
/// `det(J)²‖J^{-T}n‖²` with `n` the unit normal. Stable when `J` has entries of
/// very different sizes.
pub fn plane_det_sq(j: &Matrix3<f64>, u: &Vec3, v: &Vec3) -> Result<f64> {
    let form = AreaForm::new(j)?;
    Ok(form.det_sq(&u.cross(v).normalize()))
}

/// The same quantity by the Gram identity `‖Ju‖²‖Jv‖² - ⟨Ju,Jv⟩²`, normalized
/// by the Gram determinant of `(u, v)`.
pub fn plane_det_sq_gram(j: &Matrix3<f64>, u: &Vec3, v: &Vec3) -> f64 {
    let (ju, jv) = (j * u, j * v);
    let num = ju.norm_squared() * jv.norm_squared() - ju.dot(&jv).powi(2);
    let den = u.norm_squared() * v.norm_squared() - u.dot(v).powi(2);
    num / den
}

/// Five-term expansion of the squared area factor for the plane spanned by
/// `(1, ε, 0)` and `(-ε, 1, c)` (or `(0, 0, 1)` when `c` is `None`), for a
/// Jacobian whose first and last rows are diagonal.
pub fn det_sq_expansion(j: &Matrix3<f64>, eps: f64, c: Option<f64>) -> f64 {
    let (l_uu, l_ss) = (j[(0, 0)], j[(2, 2)]);
    let (r0, r1, r2) = (j[(1, 0)], j[(1, 1)], j[(1, 2)]);
    let y = r0 + eps * r1;
    let e1 = 1.0 + eps * eps;
    match c {
        Some(c) => {
            let x = r1 - eps * r0 + c * r2;
            let sum = x * x * l_uu * l_uu
                + (l_ss * c).powi(2) * l_uu * l_uu
                + (l_uu * eps).powi(2) * y * y
                + (l_ss * c).powi(2) * y * y
                + 2.0 * l_uu * l_uu * eps * x * y;
            sum / ((e1 + c * c) * e1)
        }
        None => (r2 * r2 * l_uu * l_uu + l_ss * l_ss * l_uu * l_uu + l_ss * l_ss * y * y) / e1,
    }
}

/// `J` reduced to the data needed for area factors of planes.
#[derive(Debug, Clone, Copy)]
struct AreaForm {
    det_sq: f64,
    inv_t: Matrix3<f64>,
}

impl AreaForm {
    fn new(j: &Matrix3<f64>) -> Result<Self> {
        let inv = j.try_inverse().ok_or_else(|| Error::Degenerate("singular Jacobian".into()))?;
        Ok(AreaForm { det_sq: j.determinant().powi(2), inv_t: inv.transpose() })
    }

    fn det_sq(&self, unit_normal: &Vec3) -> f64 {
        self.det_sq * (self.inv_t * unit_normal).norm_squared()
    }

    /// Minimum over all planes containing the unit vector `u`.
    fn min_containing(&self, u: &Vec3) -> f64 {
        let (n1, n2) = orthonormal_complement(u);
        let (a, b) = (self.inv_t * n1, self.inv_t * n2);
        let g = Matrix2::new(a.dot(&a), a.dot(&b), a.dot(&b), b.dot(&b));
        let (tr, det) = (g.trace(), g.determinant());
        let disc = ((0.5 * tr).powi(2) - det).max(0.0).sqrt();
        // smaller eigenvalue via the product to avoid cancellation
        let big = 0.5 * tr + disc;
        let small = if big > 0.0 { det / big } else { 0.0 };
        self.det_sq * small
    }
}

fn orthonormal_complement(u: &Vec3) -> (Vec3, Vec3) {
    let pick = if u[0].abs() <= u[1].abs() && u[0].abs() <= u[2].abs() {
        Vec3::x()
    } else if u[1].abs() <= u[2].abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let n1 = u.cross(&pick).normalize();
    let n2 = u.cross(&n1).normalize();
    (n1, n2)
}

/// Per-point results of the plane sweep. All determinant values are squared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PveSample {
    pub point: TorusPoint,
    /// Slope `v₁/v₀` of the estimated strong-unstable direction.
    pub slope: f64,
    pub small_c: f64,
    pub large_c: f64,
    pub pole: f64,
    pub sweep: f64,
    pub exact: f64,
    /// Largest relative gap between the five-term expansion and the direct value.
    pub expansion_residual: f64,
    /// Quantities bounded in the sufficient conditions of the large-`|c|` regime.
    pub u_term: f64,
    pub w_term: f64,
}

fn plane_normal(u: &Vec3, eps: f64, c: Option<f64>) -> Vec3 {
    let v = match c {
        Some(c) => Vec3::new(-eps, 1.0, c),
        None => Vec3::z(),
    };
    u.cross(&v).normalize()
}

/// `c`-values of the uniform angle sweep; `None` is the pole.
fn sweep_values(eps: f64, angles: usize) -> Vec<Option<f64>> {
    let scale = (1.0 + eps * eps).sqrt();
    let n = angles.max(2);
    (0..n)
        .map(|i| {
            if i == 0 || i == n - 1 {
                return None;
            }
            let theta = -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / (n - 1) as f64;
            Some(scale * theta.tan())
        })
        .collect()
}

const SMALL_C: f64 = 0.01;

fn pve_sample(system: &DaSystem, x: &TorusPoint, spec: &SamplingSpec, iters: usize) -> Result<PveSample> {
    let u = estimate_unstable_direction(system, x, iters)?;
    let j = system.jacobian(x)?;
    let form = AreaForm::new(&j)?;
    let eps = u[1] / u[0];
    let mut s = PveSample {
        point: *x,
        slope: eps,
        small_c: f64::INFINITY,
        large_c: f64::INFINITY,
        pole: f64::INFINITY,
        sweep: f64::INFINITY,
        exact: form.min_containing(&u),
        expansion_residual: 0.0,
        u_term: 0.0,
        w_term: 0.0,
    };
    let eval = |c: Option<f64>, s: &mut PveSample| {
        let d = form.det_sq(&plane_normal(&u, eps, c));
        let e = det_sq_expansion(&j, eps, c);
        s.expansion_residual = s.expansion_residual.max(((e - d) / d).abs());
        d
    };
    let n = spec.small_c_samples.max(2);
    for i in 0..n {
        let c = -SMALL_C + 2.0 * SMALL_C * i as f64 / (n - 1) as f64;
        let d = eval(Some(c), &mut s);
        s.small_c = s.small_c.min(d);
    }
    for c in sweep_values(eps, spec.plane_angles) {
        let d = eval(c, &mut s);
        s.sweep = s.sweep.min(d);
        match c {
            None => {
                s.pole = s.pole.min(d);
                s.large_c = s.large_c.min(d);
            }
            Some(c) if c.abs() >= SMALL_C => s.large_c = s.large_c.min(d),
            Some(_) => s.small_c = s.small_c.min(d),
        }
    }
    // Q_a/P_b = -J₁₀, 1/P_b = J₁₁, Q_c/P_b = -J₁₂
    let qa = -j[(1, 0)] / j[(1, 1)];
    let qc = -j[(1, 2)] / j[(1, 1)];
    s.u_term = 8.0 * eps * (-qc) * (eps - qa);
    s.w_term = 8.0 * eps * (1.0 + eps * qa) * (eps - qa);
    Ok(s)
}

/// Minimum of `|det(Df|_V)|` over planes `V ⊃ E^uu` at `x`, over a uniform
/// sweep of `c_samples` plane angles including the pole.
pub fn pve_min_det(system: &DaSystem, x: &TorusPoint, c_samples: usize) -> Result<f64> {
    require_pve_f(system)?;
    let spec = SamplingSpec { plane_angles: c_samples, small_c_samples: 2, ..SamplingSpec::default() };
    Ok(pve_sample(system, x, &spec, DEFAULT_DIRECTION_ITERS)?.sweep.sqrt())
}

fn require_pve_f(system: &DaSystem) -> Result<()> {
    if system.variant() == Variant::PveF {
        Ok(())
    } else {
        Err(Error::UnsupportedVariant(system.variant().name().into()))
    }
}

/// Sufficient conditions used in the large-`|c|` regime, evaluated at the
/// grid maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProofConditions {
    pub eps0: f64,
    pub max_abs_slope: f64,
    pub max_abs_u: f64,
    pub max_abs_w: f64,
    /// `λ_s²/2`.
    pub w_bound: f64,
    pub hold: bool,
}

/// Partial volume expansion over the sampling grid, one report per plane
/// regime. Margins are `det² - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PveCertification {
    pub small_c: CertReport,
    pub pole: CertReport,
    pub large_c: CertReport,
    pub sweep: CertReport,
    pub exact: CertReport,
    pub expansion_max_residual: f64,
    pub proof_conditions: ProofConditions,
}

impl PveCertification {
    pub fn all_passed(&self) -> bool {
        self.small_c.passed && self.pole.passed && self.large_c.passed && self.sweep.passed && self.exact.passed
    }

    /// Smallest squared determinant seen by any regime.
    pub fn min_det_sq(&self) -> f64 {
        1.0 + [&self.small_c, &self.pole, &self.large_c, &self.sweep, &self.exact]
            .iter()
            .map(|r| r.min_margin)
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn pve_certify(system: &DaSystem, spec: &SamplingSpec, iters: usize) -> Result<PveCertification> {
    require_pve_f(system)?;
    let SystemParams::Pve(p) = system.params() else {
        return Err(Error::UnsupportedVariant(system.variant().name().into()));
    };
    let points = sample_points(system, false, spec);
    let samples: Vec<PveSample> =
        points.par_iter().map(|x| pve_sample(system, x, spec, iters)).collect::<Result<_>>()?;
    let n = samples.len() as u64;
    let report = |kind: &str, get: fn(&PveSample) -> f64| {
        let mut best: Option<&PveSample> = None;
        for s in &samples {
            if best.is_none_or(|b| get(s) < get(b) || get(s).is_nan()) {
                best = Some(s);
            }
        }
        match best {
            Some(b) => {
                CertReport::new(kind, get(b) - 1.0, Some(Witness { point: b.point, aux: vec![b.slope, get(b)] }), n)
            }
            None => CertReport::new(kind, f64::INFINITY, None, 0),
        }
    };
    let eps0 = ratio_bound_constants(RATIO_GAMMA)?.eps0;
    let max_abs = |get: fn(&PveSample) -> f64| samples.iter().map(|s| get(s).abs()).fold(0.0, f64::max);
    let (ms, mu, mw) = (max_abs(|s| s.slope), max_abs(|s| s.u_term), max_abs(|s| s.w_term));
    let w_bound = p.lambda_s().powi(2) / 2.0;
    Ok(PveCertification {
        small_c: report("pve-small-c", |s| s.small_c),
        pole: report("pve-pole", |s| s.pole),
        large_c: report("pve-large-c", |s| s.large_c),
        sweep: report("pve-sweep", |s| s.sweep),
        exact: report("pve-exact-min", |s| s.exact),
        expansion_max_residual: max_abs(|s| s.expansion_residual),
        proof_conditions: ProofConditions {
            eps0,
            max_abs_slope: ms,
            max_abs_u: mu,
            max_abs_w: mw,
            w_bound,
            hold: ms <= eps0 && mu <= eps0 && mw <= w_bound,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn area_forms_agree_on_moderate_matrix() {
        let j = Matrix3::new(3.0, 0.0, 0.0, 0.2, 1.5, -0.3, 0.0, 0.0, 0.4);
        let u = Vec3::new(1.0, 0.1, 0.0).normalize();
        let v = Vec3::new(-0.1, 1.0, 0.7);
        let a = plane_det_sq(&j, &u, &v).unwrap();
        let b = plane_det_sq_gram(&j, &u, &v);
        assert!((a - b).abs() < 1e-12 * a);
        let e = det_sq_expansion(&j, 0.1, Some(0.7));
        assert!((a - e).abs() < 1e-12 * a);
        let pole = plane_det_sq(&j, &u, &Vec3::z()).unwrap();
        assert!((pole - det_sq_expansion(&j, 0.1, None)).abs() < 1e-12 * pole);
    }

    #[test]
    fn exact_minimum_bounds_sweep() {
        let j = Matrix3::new(3.0, 0.0, 0.0, 0.2, 1.5, -0.3, 0.0, 0.0, 0.4);
        let form = AreaForm::new(&j).unwrap();
        let u = Vec3::new(1.0, 0.1, 0.0).normalize();
        let exact = form.min_containing(&u);
        let mut sweep = f64::INFINITY;
        for c in sweep_values(0.1, 20001) {
            sweep = sweep.min(form.det_sq(&plane_normal(&u, 0.1, c)));
        }
        assert!(exact <= sweep * (1.0 + 1e-12));
        assert!((sweep - exact) / exact < 1e-6);
    }

    #[test]
    fn sweep_endpoints_are_the_pole() {
        let v = sweep_values(0.0, 181);
        assert_eq!(v.len(), 181);
        assert!(v[0].is_none() && v[180].is_none());
        assert!(v[90].unwrap().abs() < 1e-15);
    }
}

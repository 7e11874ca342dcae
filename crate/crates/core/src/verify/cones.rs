use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::bundles::center_bundles;
use super::{min_over, sample_points, CertReport, SamplingSpec};
use crate::construct::{DaSystem, SystemParams, Variant};
use crate::error::{Error, Result};
use crate::torus::{TorusPoint, Vec3};

/// Whether a cone is pushed by the map or pulled back by its inverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Forward,
    Inverse,
}

/// `{v : ‖v_comp‖ ≤ α‖v_core‖}` over frame axes; axes in neither list are
/// ignored (the cone lives in the span of the listed axes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub alpha: f64,
    pub core: Vec<usize>,
    pub complement: Vec<usize>,
}

fn sub_norm(v: &Vec3, axes: &[usize]) -> f64 {
    axes.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt()
}

impl ConeSpec {
    pub fn new(alpha: f64, core: Vec<usize>, complement: Vec<usize>) -> Result<Self> {
        let valid = alpha > 0.0
            && !core.is_empty()
            && !complement.is_empty()
            && core.iter().chain(&complement).all(|&i| i < 3)
            && core.iter().all(|i| !complement.contains(i));
        if !valid {
            return Err(Error::invalid(format!(
                "malformed cone: alpha {alpha}, core {core:?}, complement {complement:?}"
            )));
        }
        Ok(ConeSpec { alpha, core, complement })
    }

    pub fn contains(&self, v: &Vec3) -> bool {
        sub_norm(v, &self.complement) <= self.alpha * sub_norm(v, &self.core)
    }

    /// `α - ‖w_comp‖/‖w_core‖`: positive strictly inside the cone.
    pub fn margin(&self, w: &Vec3) -> f64 {
        let core = sub_norm(w, &self.core);
        if core == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.alpha - sub_norm(w, &self.complement) / core
    }

    /// Unit vectors on the cone boundary `‖v_comp‖ = α‖v_core‖`.
    pub fn boundary(&self, n: usize) -> Vec<Vec3> {
        let unit = |i: usize| {
            let mut e = Vec3::zeros();
            e[i] = 1.0;
            e
        };
        let circle = |axes: &[usize], theta: f64| unit(axes[0]) * theta.cos() + unit(axes[1]) * theta.sin();
        let tau = std::f64::consts::TAU;
        let raw: Vec<Vec3> = match (self.core.len(), self.complement.len()) {
            (1, 1) => vec![
                unit(self.core[0]) + unit(self.complement[0]) * self.alpha,
                unit(self.core[0]) - unit(self.complement[0]) * self.alpha,
            ],
            (1, _) => (0..n)
                .map(|i| unit(self.core[0]) + circle(&self.complement, tau * i as f64 / n as f64) * self.alpha)
                .collect(),
            (_, 1) => (0..n)
                .map(|i| {
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    circle(&self.core, tau * (i / 2) as f64 / n.div_ceil(2) as f64)
                        + unit(self.complement[0]) * (sign * self.alpha)
                })
                .collect(),
            _ => unreachable!("three axes admit no 2+2 split"),
        };
        raw.into_iter().map(|v| v.normalize()).collect()
    }
}

/// The cone families certified for each variant, with labels.
pub fn standard_cones(system: &DaSystem) -> Vec<(String, ConeSpec, Direction)> {
    let a = system.cone_epsilon();
    let cone = |core: Vec<usize>, comp: Vec<usize>| ConeSpec { alpha: a, core, complement: comp };
    match system.variant() {
        Variant::PveF => vec![
            ("unstable-forward".into(), cone(vec![0], vec![1, 2]), Direction::Forward),
            ("stable-inverse".into(), cone(vec![2], vec![0, 1]), Direction::Inverse),
        ],
        Variant::PveInverseG => vec![
            ("unstable-forward".into(), cone(vec![2], vec![0, 1]), Direction::Forward),
            ("stable-inverse".into(), cone(vec![0], vec![1, 2]), Direction::Inverse),
        ],
        Variant::MixedG => vec![
            ("unstable-forward".into(), cone(vec![0], vec![1, 2]), Direction::Forward),
            ("center-unstable-forward".into(), cone(vec![1], vec![2]), Direction::Forward),
            ("center-stable-inverse".into(), cone(vec![2], vec![1]), Direction::Inverse),
        ],
    }
}

/// Worst relative cone margin of `D·v` (or `D⁻¹·v`) over the sample grid and
/// the cone's boundary directions.
pub fn cone_invariance(
    system: &DaSystem,
    cone: &ConeSpec,
    direction: Direction,
    spec: &SamplingSpec,
) -> Result<CertReport> {
    let inverse = direction == Direction::Inverse;
    let points = sample_points(system, inverse, spec);
    cone_invariance_at(system, cone, direction, &points, spec.cone_directions)
}

pub fn cone_invariance_at(
    system: &DaSystem,
    cone: &ConeSpec,
    direction: Direction,
    points: &[TorusPoint],
    directions: usize,
) -> Result<CertReport> {
    let dirs = cone.boundary(directions);
    let kind = format!(
        "cone-{}-core{:?}-alpha{}",
        match direction {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        },
        cone.core,
        cone.alpha
    );
    let report = min_over(&kind, points, |x| {
        let j: Matrix3<f64> = match direction {
            Direction::Forward => system.jacobian(x)?,
            Direction::Inverse => system.inverse_jacobian(x)?,
        };
        let mut worst = (f64::INFINITY, 0usize);
        for (i, v) in dirs.iter().enumerate() {
            let m = cone.margin(&(j * v));
            if m < worst.0 || m.is_nan() {
                worst = (m, i);
            }
        }
        Ok((worst.0, vec![worst.1 as f64]))
    })?;
    Ok(CertReport { samples: report.samples * dirs.len() as u64, ..report })
}

/// Pointwise one-step rates of the center sub-bundles of the mixed map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateBounds {
    /// `min ‖DG v‖ - (1/2 - κ₂)` over unit `v ∈ F^cu` on the first box.
    pub cu_in_first_box: CertReport,
    /// `(2 + κ₂) - max ‖DG v‖` over unit `v ∈ F^cs` on the second box.
    pub cs_in_second_box: CertReport,
    /// `min rate - λ_u/√(1+κ₂²)` off the first box.
    pub cu_off_first_box: CertReport,
    /// `√(1+κ₂²)λ_ss - max rate` off the second box.
    pub cs_off_second_box: CertReport,
}

impl RateBounds {
    pub fn all_passed(&self) -> bool {
        self.cu_in_first_box.passed
            && self.cs_in_second_box.passed
            && self.cu_off_first_box.passed
            && self.cs_off_second_box.passed
    }
}

/// Rate bounds of the mixed map's center bundles, evaluated on the converged
/// bundle directions.
pub fn center_rate_bounds(system: &DaSystem, spec: &SamplingSpec, iters: usize) -> Result<RateBounds> {
    let SystemParams::Mixed(p) = system.params() else {
        return Err(Error::UnsupportedVariant(system.variant().name().into()));
    };
    let kappa2 = p.kappa2;
    let per = spec.box_per_axis.pow(3);
    let boxes = system.deformation_grid(false, spec.box_per_axis, spec.band_extent, spec.transverse_extent);
    let (first, second) = if boxes.len() == 2 * per { boxes.split_at(per) } else { (&boxes[..0], &boxes[..0]) };
    let mut all = super::torus_grid(spec.torus_per_axis);
    all.extend_from_slice(&boxes);

    let rates = |x: &TorusPoint| -> Result<(f64, f64)> {
        let b = center_bundles(system, x, iters)?;
        let j = system.jacobian(x)?;
        Ok(((j * b.cu).norm(), (j * b.cs).norm()))
    };
    let cu_floor = 0.5 - kappa2;
    let cs_ceiling = 2.0 + kappa2;
    let root = (1.0 + kappa2 * kappa2).sqrt();
    let (lu, lss) = (p.lambda_u(), p.lambda_ss());
    let cu_in = min_over("center-unstable-rate-first-box", first, |x| {
        let (cu, _) = rates(x)?;
        Ok((cu - cu_floor, vec![cu]))
    })?;
    let cs_in = min_over("center-stable-rate-second-box", second, |x| {
        let (_, cs) = rates(x)?;
        Ok((cs_ceiling - cs, vec![cs]))
    })?;
    let cu_off = min_over("center-unstable-rate-off-first-box", &all, |x| {
        if p.charts[0].contains_point(x) {
            return Ok((f64::INFINITY, vec![]));
        }
        let (cu, _) = rates(x)?;
        Ok((cu - lu / root, vec![cu]))
    })?;
    let cs_off = min_over("center-stable-rate-off-second-box", &all, |x| {
        if p.charts[1].contains_point(x) {
            return Ok((f64::INFINITY, vec![]));
        }
        let (_, cs) = rates(x)?;
        Ok((root * lss - cs, vec![cs]))
    })?;
    Ok(RateBounds {
        cu_in_first_box: cu_in,
        cs_in_second_box: cs_in,
        cu_off_first_box: cu_off,
        cs_off_second_box: cs_off,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_vectors_sit_on_the_boundary() {
        let c = ConeSpec::new(0.05, vec![0], vec![1, 2]).unwrap();
        for v in c.boundary(64) {
            assert!(c.margin(&v).abs() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-15);
        }
        let plane = ConeSpec::new(0.1, vec![1], vec![2]).unwrap();
        assert_eq!(plane.boundary(64).len(), 2);
    }

    #[test]
    fn diagonal_map_preserves_cone() {
        let c = ConeSpec::new(0.05, vec![0], vec![1, 2]).unwrap();
        let j = Matrix3::from_diagonal(&Vec3::new(10.0, 0.5, 0.2));
        for v in c.boundary(16) {
            assert!(c.margin(&(j * v)) > 0.0);
        }
    }

    #[test]
    fn malformed_cones_rejected() {
        assert!(ConeSpec::new(0.0, vec![0], vec![1]).is_err());
        assert!(ConeSpec::new(0.1, vec![0], vec![0]).is_err());
        assert!(ConeSpec::new(0.1, vec![], vec![0]).is_err());
    }
}

//! Sampled construction checks shared by the scenarios.

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use da_core::construct::DaSystem;
use da_core::torus::{eigen_decompose, fixed_points, LatticeAutomorphism, PrecisePoint, TorusPoint, Vec3};
use da_core::Result;

/// Algebraic facts about one base matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSummary {
    pub matrix: String,
    pub eigenvalues: [f64; 3],
    pub char_poly: [i64; 3],
    /// Largest `|p(λ)|` over the eigenvalues, relative to the sum of the
    /// magnitudes of the polynomial's terms.
    pub char_poly_residual: f64,
    pub product_residual: f64,
    pub eigen_residual: f64,
    pub fixed_points: Vec<TorusPoint>,
    pub expected_fixed_points: i64,
    pub fixed_points_exact: bool,
}

fn det_minus_identity(m: &LatticeAutomorphism) -> i64 {
    let mut n = m.entries();
    for (i, row) in n.iter_mut().enumerate() {
        row[i] -= 1;
    }
    n[0][0] * (n[1][1] * n[2][2] - n[1][2] * n[2][1]) - n[0][1] * (n[1][0] * n[2][2] - n[1][2] * n[2][0])
        + n[0][2] * (n[1][0] * n[2][1] - n[1][1] * n[2][0])
}

pub fn eigen_summary(name: &str) -> Result<EigenSummary> {
    let m = LatticeAutomorphism::named(name)?;
    let frame = eigen_decompose(&m)?;
    let values = frame.values();
    let c = m.char_poly();
    let residual = values
        .iter()
        .map(|&x| {
            let terms = [x * x * x, c[0] as f64 * x * x, c[1] as f64 * x, c[2] as f64];
            terms.iter().sum::<f64>().abs() / terms.iter().map(|t| t.abs()).sum::<f64>()
        })
        .fold(0.0, f64::max);
    let fps = fixed_points(&m)?;
    let exact = fps.iter().all(|p| m.apply_mod1(p) == *p);
    Ok(EigenSummary {
        matrix: name.into(),
        eigenvalues: values,
        char_poly: c,
        char_poly_residual: residual,
        product_residual: (values.iter().product::<f64>().abs() - 1.0).abs(),
        eigen_residual: frame.eigen_residual(&m),
        fixed_points: fps,
        expected_fixed_points: det_minus_identity(&m).abs(),
        fixed_points_exact: exact,
    })
}

/// Largest deviation of a frame Jacobian from `diag(values)`, each entry
/// scaled by the larger of its row and column diagonal entries.
pub fn diagonal_deviation(j: &[[f64; 3]; 3], values: [f64; 3]) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..3 {
        for c in 0..3 {
            let want = if r == c { values[r] } else { 0.0 };
            let scale = values[r].abs().max(values[c].abs()).max(1.0);
            worst = worst.max((j[r][c] - want).abs() / scale);
        }
    }
    worst
}

/// Outcome of sampling box boundaries and the exterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxPreservation {
    pub boundary_samples: usize,
    /// Largest distance of a boundary image from the box boundary, in local
    /// coordinates.
    pub max_boundary_error: f64,
    pub exterior_samples: usize,
    /// Exterior points whose image differs from the linear image in any bit.
    pub exterior_mismatches: usize,
}

fn boundary_local(rng: &mut ChaCha8Rng, h: f64) -> Vec3 {
    let mut l = Vec3::new(rng.gen_range(-h..h), rng.gen_range(-h..h), rng.gen_range(-h..h));
    let face = rng.gen_range(0..3);
    l[face] = if rng.gen::<bool>() { h } else { -h };
    l
}

fn boundary_distance(l: &Vec3, h: f64) -> f64 {
    let outside = l.iter().map(|c| (c.abs() - h).max(0.0)).fold(0.0, f64::max);
    let to_face = l.iter().map(|c| (c.abs() - h).abs()).fold(f64::INFINITY, f64::min);
    outside.max(to_face)
}

/// Samples every deformation box's boundary and checks that the local
/// deformation maps it onto itself, then checks that points off every band
/// map exactly like the linear part.
pub fn box_preservation(system: &DaSystem, samples: usize, seed: u64) -> Result<BoxPreservation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lin = *system.linear_part();
    let lin_inv = lin.inverse();
    let mut worst = 0.0f64;
    let charts = system.charts();
    for chart in &charts {
        let h = chart.half_width_inner;
        let center = PrecisePoint::new(chart.center);
        for _ in 0..samples {
            let y = PrecisePoint::new(chart.from_local(&boundary_local(&mut rng, h)));
            // the deformation acts after the linear part for f and before it for G
            let image = match system.variant() {
                da_core::construct::Variant::MixedG => lin_inv.apply_precise(&system.apply_precise(&y)?)?,
                _ => system.apply_precise(&lin_inv.apply_precise(&y)?)?,
            };
            let local = chart.frame.to_frame(&image.delta_from(&center));
            worst = worst.max(boundary_distance(&local, h));
        }
    }
    let reference = system.linearized();
    let diag = Matrix3::from_diagonal(&Vec3::from(system.spectrum()));
    let (mut checked, mut mismatches) = (0, 0);
    while checked < samples {
        let x = TorusPoint::try_from([rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])?;
        let (_, j) = system.step(&PrecisePoint::new(x))?;
        if j != diag {
            continue;
        }
        if system.apply(&x)? != reference.apply(&x)? {
            mismatches += 1;
        }
        checked += 1;
    }
    Ok(BoxPreservation {
        boundary_samples: samples * charts.len(),
        max_boundary_error: worst,
        exterior_samples: samples,
        exterior_mismatches: mismatches,
    })
}

/// Largest displacement after applying the map and then its inverse, over
/// the deformation grid and uniform points.
pub fn round_trip_error(system: &DaSystem, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts: Vec<TorusPoint> = system.deformation_grid(false, 8, 1.6, 1.2);
    for _ in 0..samples {
        pts.push(TorusPoint::try_from([rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])?);
    }
    let mut worst = 0.0f64;
    for x in pts {
        let p = PrecisePoint::new(x);
        let back = system.apply_inverse_precise(&system.apply_precise(&p)?)?;
        worst = worst.max(back.delta_from(&p).norm());
    }
    Ok(worst)
}

//! Sampled certification of cone fields, partial volume expansion, spectra and
//! the parameter inequalities, plus the searches that pick `n`, `κ`, `δ`, `k`.

mod bundles;
mod cones;
mod pve;
mod search;
mod spectrum;
mod starred;

pub use bundles::{center_bundles, CenterBundles};
pub use cones::{
    center_rate_bounds, cone_invariance, cone_invariance_at, standard_cones, ConeSpec, Direction, RateBounds,
};
pub use pve::{
    det_sq_expansion, estimate_unstable_direction, plane_det_sq, plane_det_sq_gram, pve_certify, pve_min_det,
    ProofConditions, PveCertification, PveSample, DEFAULT_DIRECTION_ITERS,
};
pub use search::{
    cone_reports, default_epsilon, kappa_margins, max_segment_mass, ratio_bound_sweep, search_k, search_kappa,
    search_n, slope_delta_search, DeltaSearch, DeltaTrial, KSearch, KStep, KappaSearch, NSearch, RatioSweep,
    SearchFamily, SegmentGrid, K_CAP_LOG2,
};
pub use spectrum::{fixed_point_spectrum, FixedPointSpectrum};
pub use starred::{starred_entry_bound, StarredEntryBound};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::DaSystem;
use crate::error::Result;
use crate::torus::TorusPoint;

/// Where a certification sweep attained its minimum margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: TorusPoint,
    pub aux: Vec<f64>,
}

/// Outcome of one sampled check. `passed` is exactly `min_margin > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertReport {
    pub kind: String,
    pub min_margin: f64,
    pub witness: Option<Witness>,
    pub samples: u64,
    pub passed: bool,
}

impl CertReport {
    pub fn new(kind: impl Into<String>, min_margin: f64, witness: Option<Witness>, samples: u64) -> Self {
        CertReport { kind: kind.into(), min_margin, witness, samples, passed: min_margin > 0.0 }
    }
}

/// Resolution of the verification grids.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingSpec {
    /// Uniform torus grid `n³` (includes the origin).
    pub torus_per_axis: usize,
    /// Box-local grid `n³` around every deformation band.
    pub box_per_axis: usize,
    /// Box grid extent along the warp axis, in units of `δ/k`.
    pub band_extent: f64,
    /// Box grid extent transverse to the warp axis, in units of `δ`.
    pub transverse_extent: f64,
    /// Boundary directions per cone.
    pub cone_directions: usize,
    /// Uniform plane angles for the volume sweep.
    pub plane_angles: usize,
    /// Extra planes in the small-`|c|` regime.
    pub small_c_samples: usize,
}

impl Default for SamplingSpec {
    fn default() -> Self {
        SamplingSpec {
            torus_per_axis: 40,
            box_per_axis: 40,
            band_extent: 1.25,
            transverse_extent: 1.25,
            cone_directions: 64,
            plane_angles: 181,
            small_c_samples: 21,
        }
    }
}

/// Uniform grid `i/n` on the torus.
pub fn torus_grid(per_axis: usize) -> Vec<TorusPoint> {
    let n = per_axis as f64;
    let mut out = Vec::with_capacity(per_axis.pow(3));
    for i in 0..per_axis {
        for j in 0..per_axis {
            for l in 0..per_axis {
                out.push(TorusPoint::wrap_finite(&crate::torus::Vec3::new(i as f64 / n, j as f64 / n, l as f64 / n)));
            }
        }
    }
    out
}

/// Torus grid plus the box-local grids for one direction of the map.
pub fn sample_points(system: &DaSystem, inverse: bool, spec: &SamplingSpec) -> Vec<TorusPoint> {
    let mut pts = torus_grid(spec.torus_per_axis);
    if !system.is_linear() {
        pts.extend(system.deformation_grid(inverse, spec.box_per_axis, spec.band_extent, spec.transverse_extent));
    }
    pts
}

/// Evaluates `f` at every point in parallel and reduces to the minimum margin
/// in input order, so the result does not depend on scheduling.
pub(crate) fn min_over<F>(kind: &str, points: &[TorusPoint], f: F) -> Result<CertReport>
where
    F: Fn(&TorusPoint) -> Result<(f64, Vec<f64>)> + Sync,
{
    let vals: Vec<(f64, Vec<f64>)> = points.par_iter().map(&f).collect::<Result<_>>()?;
    let mut best: Option<(usize, f64)> = None;
    for (i, (m, _)) in vals.iter().enumerate() {
        if best.is_none_or(|(_, b)| *m < b || m.is_nan()) {
            best = Some((i, *m));
        }
    }
    Ok(match best {
        Some((i, m)) => {
            CertReport::new(kind, m, Some(Witness { point: points[i], aux: vals[i].1.clone() }), points.len() as u64)
        }
        None => CertReport::new(kind, f64::INFINITY, None, 0),
    })
}

use nalgebra::{Matrix2, Vector2};

use crate::construct::{DaSystem, Variant};
use crate::error::{Error, Result};
use crate::torus::{PrecisePoint, TorusPoint, Vec3};

const CAUCHY_TOL: f64 = 1e-10;

/// Unit vectors spanning the two center sub-bundles of the mixed map, in frame
/// coordinates. Both lie in the invariant plane of the middle and last axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterBundles {
    pub cu: Vec3,
    pub cs: Vec3,
}

fn block(j: &nalgebra::Matrix3<f64>) -> Matrix2<f64> {
    Matrix2::new(j[(1, 1)], j[(1, 2)], j[(2, 1)], j[(2, 2)])
}

fn advance(v: &Vector2<f64>, m: &Matrix2<f64>, lead: usize) -> Result<Vector2<f64>> {
    let w = m * v;
    let n = w.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::NonFinite("pushed center vector"));
    }
    Ok(if w[lead] < 0.0 { -w / n } else { w / n })
}

/// Orbit depth grows by doubling up to this multiple of the requested iterates.
const DEPTH_GROWTH: usize = 16;

/// Center-unstable direction by pushing the middle axis forward along the
/// backward orbit; center-stable by pulling the last axis back along the
/// forward orbit. The orbit depth starts at `iters` and doubles until both
/// directions pass the Cauchy test.
pub fn center_bundles(system: &DaSystem, x: &TorusPoint, iters: usize) -> Result<CenterBundles> {
    if system.variant() != Variant::MixedG {
        return Err(Error::UnsupportedVariant(system.variant().name().into()));
    }
    if system.is_linear() {
        return Ok(CenterBundles { cu: Vec3::y(), cs: Vec3::z() });
    }
    if iters == 0 {
        return Err(Error::invalid("bundle estimate needs at least one iterate"));
    }
    let mut depth = iters;
    loop {
        match bundles_at_depth(system, x, depth) {
            Err(Error::Numerical(_)) if depth < iters * DEPTH_GROWTH => depth *= 2,
            other => return other,
        }
    }
}

/// Pushes the seed through `mats` (deepest first) from two depths `n` and
/// `n - 1`; returns the deeper result and the gap between the two.
fn converge(mats: &[Matrix2<f64>], seed: Vector2<f64>, lead: usize) -> Result<(Vector2<f64>, f64)> {
    let (mut deep, mut shallow) = (seed, seed);
    for (i, m) in mats.iter().enumerate() {
        deep = advance(&deep, m, lead)?;
        if i > 0 {
            shallow = advance(&shallow, m, lead)?;
        }
    }
    Ok((deep, (deep - shallow).norm()))
}

fn bundles_at_depth(system: &DaSystem, x: &TorusPoint, iters: usize) -> Result<CenterBundles> {
    let start = PrecisePoint::new(*x);

    let mut past = Vec::with_capacity(iters);
    let mut y = start;
    for _ in 0..iters {
        y = system.apply_inverse_precise(&y)?;
        past.push(block(&system.step(&y)?.1));
    }
    past.reverse();
    let (cu, inc_cu) = converge(&past, Vector2::new(1.0, 0.0), 0)?;

    let mut future = Vec::with_capacity(iters);
    let mut y = start;
    for _ in 0..iters {
        let (next, j) = system.step(&y)?;
        future.push(block(&j).try_inverse().ok_or_else(|| Error::Degenerate("singular center block".into()))?);
        y = next;
    }
    future.reverse();
    let (cs, inc_cs) = converge(&future, Vector2::new(0.0, 1.0), 1)?;

    if !(inc_cu < CAUCHY_TOL && inc_cs < CAUCHY_TOL) {
        return Err(Error::Numerical(format!(
            "center bundles at {:?} not converged after {iters} iterates (increments {inc_cu:e}, {inc_cs:e})",
            x.coords()
        )));
    }
    Ok(CenterBundles { cu: Vec3::new(0.0, cu[0], cu[1]), cs: Vec3::new(0.0, cs[0], cs[1]) })
}

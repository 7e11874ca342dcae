//! Empirical size of the unnamed off-diagonal Jacobian entries of the mixed
//! map, relative to the deformation partials they multiply.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::construct::{deformation_q, DaSystem, MixedBox, Partials, SystemParams};
use crate::error::{Error, Result};
use crate::torus::{BoxChart, PrecisePoint, Vec3};

/// Suprema of the coefficient pairs over the sampled box points, and their
/// sum as an estimate of the constant bounding all six coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarredEntryBound {
    /// `DG` on the second box: entries `(c, a)` and `(c, b)` over `∂Q₂/∂a`, `∂Q₂/∂b`.
    pub forward_second: f64,
    /// `DG⁻¹` on the image of the first box: entries `(b, a)` and `(b, c)`
    /// over `∂Q₁/∂a`, `∂Q₁/∂c`.
    pub inverse_first: f64,
    /// `DG⁻¹` on the image of the second box: entries `(c, a)` and `(c, b)`
    /// over `∂Q₂/∂a`, `∂Q₂/∂b`.
    pub inverse_second: f64,
    pub xi: f64,
    pub samples: usize,
    /// Largest relative deviation of the named entries (`∂Q₁` row, `(∂Q₂/∂c)^{±1}`)
    /// from the deformation partials.
    pub named_entry_residual: f64,
}

fn local(chart: &BoxChart, x: &PrecisePoint) -> Option<Vec3> {
    let l = chart.frame.to_frame(&x.delta_from(&PrecisePoint::new(chart.center)));
    chart.inner_contains(&l).then_some(l)
}

fn ratio(entry: f64, partial: f64) -> f64 {
    if partial == 0.0 {
        0.0
    } else {
        (entry / partial).abs()
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

fn q(system: &DaSystem, which: MixedBox, l: &Vec3) -> Partials {
    let SystemParams::Mixed(p) = system.params() else { unreachable!("checked by the caller") };
    deformation_q(p, which, l[0], l[1], l[2])
}

/// Samples the deformation bands of both boxes (`per_axis³` points each,
/// forward and inverse) and reports the largest coefficient sums.
pub fn starred_entry_bound(system: &DaSystem, per_axis: usize) -> Result<StarredEntryBound> {
    if !matches!(system.params(), SystemParams::Mixed(_)) {
        return Err(Error::UnsupportedVariant(system.variant().name().into()));
    }
    if per_axis == 0 {
        return Err(Error::invalid("per_axis must be positive"));
    }
    let charts = system.charts();
    let b_inv = system.linear_part().inverse();
    let mut out = StarredEntryBound {
        forward_second: 0.0,
        inverse_first: 0.0,
        inverse_second: 0.0,
        xi: 0.0,
        samples: 0,
        named_entry_residual: 0.0,
    };
    for x in system.deformation_grid(false, per_axis, 1.0, 1.0) {
        let x = PrecisePoint::new(x);
        let (y, j): (PrecisePoint, Matrix3<f64>) = system.step(&x)?;
        out.samples += 1;
        if let Some(l) = local(&charts[0], &x) {
            let d = q(system, MixedBox::First, &l);
            let res = rel(j[(1, 0)], d.da).max(rel(j[(1, 1)], d.db)).max(rel(j[(1, 2)], d.dc));
            out.named_entry_residual = out.named_entry_residual.max(res);
        } else if let Some(l) = local(&charts[1], &b_inv.apply_precise(&y)?) {
            let d = q(system, MixedBox::Second, &l);
            out.named_entry_residual = out.named_entry_residual.max(rel(j[(2, 2)], 1.0 / d.dc));
            out.forward_second = out.forward_second.max(ratio(j[(2, 0)], d.da) + ratio(j[(2, 1)], d.db));
        }
    }
    for y in system.deformation_grid(true, per_axis, 1.0, 1.0) {
        let y = PrecisePoint::new(y);
        let (w, j) = system.step_inverse(&y)?;
        out.samples += 1;
        let z = b_inv.apply_precise(&y)?;
        if let Some(l) = local(&charts[0], &w).filter(|_| local(&charts[0], &z).is_some()) {
            let d = q(system, MixedBox::First, &l);
            out.named_entry_residual = out.named_entry_residual.max(rel(j[(1, 1)], 1.0 / d.db));
            out.inverse_first = out.inverse_first.max(ratio(j[(1, 0)], d.da) + ratio(j[(1, 2)], d.dc));
        } else if let Some(l) = local(&charts[1], &z) {
            let d = q(system, MixedBox::Second, &l);
            out.named_entry_residual = out.named_entry_residual.max(rel(j[(2, 2)], d.dc));
            out.inverse_second = out.inverse_second.max(ratio(j[(2, 0)], d.da) + ratio(j[(2, 1)], d.db));
        }
    }
    out.xi = out.forward_second + out.inverse_first + out.inverse_second;
    Ok(out)
}

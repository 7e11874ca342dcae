use serde::{Deserialize, Serialize};

use crate::construct::{DaSystem, SystemParams};
use crate::error::Result;
use crate::torus::{fixed_points, torus_distance, TorusPoint};

/// Jacobian spectrum at a fixed point, ordered by descending modulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointSpectrum {
    pub point: TorusPoint,
    pub real: [f64; 3],
    pub imag: [f64; 3],
    pub unstable_index: usize,
    /// Frame Jacobian, row-major.
    pub jacobian: [[f64; 3]; 3],
}

/// Spectra at the fixed points of the base matrix that the system also fixes.
pub fn fixed_point_spectrum(system: &DaSystem) -> Result<Vec<FixedPointSpectrum>> {
    let base = match system.params() {
        SystemParams::Pve(p) => p.base,
        SystemParams::Mixed(p) => p.base,
    };
    let mut out = Vec::new();
    for p in fixed_points(&base)? {
        if torus_distance(&system.apply(&p)?, &p) > 1e-12 {
            continue;
        }
        let j = system.jacobian(&p)?;
        let mut ev: Vec<(f64, f64)> = j.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect();
        ev.sort_by(|a, b| b.0.hypot(b.1).total_cmp(&a.0.hypot(a.1)));
        let unstable_index = ev.iter().filter(|(re, im)| re.hypot(*im) > 1.0).count();
        let mut jac = [[0.0; 3]; 3];
        for (r, row) in jac.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = j[(r, c)];
            }
        }
        out.push(FixedPointSpectrum {
            point: p,
            real: [ev[0].0, ev[1].0, ev[2].0],
            imag: [ev[0].1, ev[1].1, ev[2].1],
            unstable_index,
            jacobian: jac,
        });
    }
    Ok(out)
}

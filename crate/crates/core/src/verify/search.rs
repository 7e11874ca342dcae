use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cones::{center_rate_bounds, cone_invariance, standard_cones};
use super::pve::pve_certify;
use super::{torus_grid, CertReport, SamplingSpec};
use crate::construct::{DaSystem, Variant, RATIO_GAMMA};
use crate::error::{Error, Result};
use crate::relations::{
    center_expansion_margin, mixed_contraction_margin, mixed_expansion_margin, mixed_spectral_margins,
    pve_spectral_margins, ratio_bound_constants, ratio_value, MixedSpectralMargins, PveSpectralMargins, RatioConstants,
};
use crate::torus::{boxes_disjoint, power_eigen, ss_segment_box_mass, BoxChart, EigenFrame, TorusPoint, Vec3};

/// Which construction a search is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SearchFamily {
    Pve,
    Mixed,
}

impl SearchFamily {
    pub fn name(&self) -> &'static str {
        match self {
            SearchFamily::Pve => "pve",
            SearchFamily::Mixed => "mixed",
        }
    }
}

const N_CAP: u32 = 64;

/// Doubling search over `k` stops at `2^K_CAP_LOG2`.
pub const K_CAP_LOG2: u32 = 20;

const KAPPA_STEPS: f64 = 1e6;
const KAPPA_RESOLUTION: f64 = 1.0 / KAPPA_STEPS;
const EPSILON_CAP: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NSearch {
    pub family: SearchFamily,
    pub n: u32,
    pub m: f64,
    pub values: [f64; 3],
    pub pve_margins: Option<PveSpectralMargins>,
    pub mixed_margins: Option<MixedSpectralMargins>,
    pub min_margin: f64,
}

/// Smallest `n` whose powered spectrum satisfies the family's spectral conditions.
pub fn search_n(m: f64, base_frame: &EigenFrame, family: SearchFamily) -> Result<NSearch> {
    let big_m = ratio_bound_constants(RATIO_GAMMA)?.big_m;
    for n in 1..=N_CAP {
        let values = power_eigen(base_frame, 2 * n)?.values();
        match family {
            SearchFamily::Pve => {
                let s = pve_spectral_margins(values, m, big_m);
                if s.all_hold() {
                    return Ok(NSearch {
                        family,
                        n,
                        m,
                        values,
                        pve_margins: Some(s),
                        mixed_margins: None,
                        min_margin: s.min_margin(),
                    });
                }
            }
            SearchFamily::Mixed => {
                let s = mixed_spectral_margins(values, m);
                if s.all_hold() {
                    return Ok(NSearch {
                        family,
                        n,
                        m,
                        values,
                        pve_margins: None,
                        mixed_margins: Some(s),
                        min_margin: s.min_margin(),
                    });
                }
            }
        }
    }
    Err(Error::SearchCap(format!("no n ≤ {N_CAP} satisfies the {} spectral conditions", family.name())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSearch {
    pub family: SearchFamily,
    pub kappa: f64,
    pub resolution: f64,
    /// Margins at the found value: center expansion (pve), or expansion and
    /// contraction (mixed).
    pub margins: Vec<f64>,
}

/// κ-margins of the family at the powered spectrum `values`.
pub fn kappa_margins(family: SearchFamily, values: [f64; 3], kappa: f64) -> Vec<f64> {
    match family {
        SearchFamily::Pve => vec![center_expansion_margin(kappa, values[1])],
        SearchFamily::Mixed => {
            vec![mixed_expansion_margin(kappa, values[1]), mixed_contraction_margin(kappa, values[2])]
        }
    }
}

/// Largest κ on the `1e-6` grid keeping every κ-margin positive.
pub fn search_kappa(values: [f64; 3], family: SearchFamily) -> Result<KappaSearch> {
    let ok = |j: u64| kappa_margins(family, values, j as f64 / KAPPA_STEPS).iter().all(|&m| m > 0.0);
    if !ok(0) {
        return Err(Error::Inconsistent(format!(
            "the κ = 0 instance of the {} conditions fails; n is too small",
            family.name()
        )));
    }
    let mut hi: u64 = 1;
    while ok(hi) {
        hi *= 2;
        if hi as f64 / KAPPA_STEPS > 1e6 {
            return Err(Error::SearchCap("κ conditions hold for unbounded κ".into()));
        }
    }
    let mut lo = hi / 2;
    if !ok(lo) {
        lo = 0;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0 {
        return Err(Error::Inconsistent("no positive κ on the search grid".into()));
    }
    let kappa = lo as f64 / KAPPA_STEPS;
    Ok(KappaSearch { family, kappa, resolution: KAPPA_RESOLUTION, margins: kappa_margins(family, values, kappa) })
}

/// Cone half-angle `min(κ, 0.05)`, further capped by `κ/√2` for the mixed family.
pub fn default_epsilon(kappa: f64, family: SearchFamily) -> f64 {
    match family {
        SearchFamily::Pve => kappa.min(EPSILON_CAP),
        SearchFamily::Mixed => (kappa / 2f64.sqrt()).min(EPSILON_CAP),
    }
}

/// Sample layout for the segment-mass sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentGrid {
    /// Uniform torus grid `n³`.
    pub torus_per_axis: usize,
    /// Segment centres along lines through each box, per line.
    pub along: usize,
    /// Transverse offsets per axis of those lines.
    pub transverse: usize,
}

impl Default for SegmentGrid {
    fn default() -> Self {
        SegmentGrid { torus_per_axis: 64, along: 257, transverse: 9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaTrial {
    pub delta: f64,
    pub max_mass: f64,
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSearch {
    pub delta: f64,
    pub radius: f64,
    pub threshold: f64,
    pub max_mass: f64,
    pub witness: TorusPoint,
    pub samples: u64,
    pub trials: Vec<DeltaTrial>,
}

const DELTA_START: f64 = 1.0 / 64.0;
const DELTA_FLOOR: f64 = 1e-5;

fn segment_points(center: &TorusPoint, dir: &Vec3, radius: f64, delta: f64, grid: &SegmentGrid) -> Vec<TorusPoint> {
    let pick = if dir[0].abs() < 0.5 { Vec3::x() } else { Vec3::y() };
    let t1 = dir.cross(&pick).normalize();
    let t2 = dir.cross(&t1);
    let h = 2.0 * delta * 2f64.sqrt();
    let span = |n: usize, i: usize, w: f64| if n < 2 { 0.0 } else { -w + 2.0 * w * i as f64 / (n - 1) as f64 };
    let mut out = Vec::with_capacity(grid.along * grid.transverse * grid.transverse);
    for a in 0..grid.transverse {
        for b in 0..grid.transverse {
            let off = t1 * span(grid.transverse, a, h) + t2 * span(grid.transverse, b, h);
            for s in 0..grid.along {
                let p = center.to_vec() + off + dir * span(grid.along, s, radius);
                out.push(TorusPoint::wrap_finite(&p));
            }
        }
    }
    out
}

/// Maximum segment mass over the sweep, with its witness.
pub fn max_segment_mass(
    frame: &EigenFrame,
    centers: &[TorusPoint],
    direction: &Vec3,
    radius: f64,
    delta: f64,
    grid: &SegmentGrid,
) -> Result<(f64, TorusPoint, u64)> {
    let dir = direction.normalize();
    let mut best = (f64::NEG_INFINITY, TorusPoint::ORIGIN);
    let mut samples = 0u64;
    for c in centers {
        let chart = BoxChart::for_delta(*c, *frame, delta)?;
        let mut pts = torus_grid(grid.torus_per_axis);
        pts.extend(segment_points(c, &dir, radius, delta, grid));
        samples += pts.len() as u64;
        let masses: Vec<f64> = pts.par_iter().map(|x| ss_segment_box_mass(x, &dir, radius, &chart)).collect();
        for (x, m) in pts.iter().zip(masses) {
            if m > best.0 {
                best = (m, *x);
            }
        }
    }
    Ok((best.0, best.1, samples))
}

/// Largest `δ = 2^{-j}` (from `1/64`) whose segment mass stays below
/// `threshold` for every centre; with two centres the `5δ` boxes must also be
/// disjoint.
pub fn slope_delta_search(
    frame: &EigenFrame,
    centers: &[TorusPoint],
    direction: &Vec3,
    radius: f64,
    threshold: f64,
    grid: &SegmentGrid,
) -> Result<DeltaSearch> {
    if !(threshold > 0.0 && radius > 0.0) {
        return Err(Error::invalid("threshold and radius must be positive"));
    }
    let mut trials = Vec::new();
    let mut delta = DELTA_START;
    while delta >= DELTA_FLOOR {
        let disjoint = centers.len() < 2 || boxes_disjoint(&centers[0], &centers[1], 5.0 * delta);
        if 4.0 * delta > threshold || !disjoint {
            trials.push(DeltaTrial { delta, max_mass: f64::NAN, admissible: false });
            delta /= 2.0;
            continue;
        }
        let (max_mass, witness, samples) = max_segment_mass(frame, centers, direction, radius, delta, grid)?;
        let admissible = max_mass <= threshold;
        trials.push(DeltaTrial { delta, max_mass, admissible });
        if admissible {
            return Ok(DeltaSearch { delta, radius, threshold, max_mass, witness, samples, trials });
        }
        delta /= 2.0;
    }
    Err(Error::SearchCap(format!("no admissible δ above {DELTA_FLOOR}")))
}

/// Checks evaluated at one `k` of the doubling ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KStep {
    pub k: u64,
    pub reports: Vec<CertReport>,
}

/// Thresholds of the `k` ladder. For the volume-expanding family `k1` adds
/// the small-`|c|` planes, `k2` the pole plane and `k3` every plane; for the
/// mixed family `k_rates` adds the center rate bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSearch {
    pub family: SearchFamily,
    pub k_eps: u64,
    pub k1: Option<u64>,
    pub k2: Option<u64>,
    pub k3: Option<u64>,
    pub k_rates: Option<u64>,
    /// The smallest `k` passing every check.
    pub pinned_k: u64,
    pub steps: Vec<KStep>,
}

/// Cone reports for every standard cone of the system.
pub fn cone_reports(system: &DaSystem, spec: &SamplingSpec) -> Result<Vec<CertReport>> {
    standard_cones(system)
        .into_iter()
        .map(|(name, cone, dir)| {
            let mut r = cone_invariance(system, &cone, dir, spec)?;
            r.kind = format!("cone-{name}");
            Ok(r)
        })
        .collect()
}

fn failing_witness(reports: &[CertReport]) -> String {
    reports
        .iter()
        .filter(|r| !r.passed)
        .map(|r| match &r.witness {
            Some(w) => format!("{} margin {:e} at {:?}", r.kind, r.min_margin, w.point.coords()),
            None => format!("{} margin {:e}", r.kind, r.min_margin),
        })
        .collect::<Vec<_>>()
        .join("; ")
}

/// Doubling search `k = 1, 2, 4, …, 2^20` for the smallest `k` where each
/// accumulated set of checks passes.
pub fn search_k(system: &DaSystem, spec: &SamplingSpec, direction_iters: usize) -> Result<KSearch> {
    let family = match system.variant() {
        Variant::PveF => SearchFamily::Pve,
        Variant::MixedG => SearchFamily::Mixed,
        Variant::PveInverseG => return Err(Error::UnsupportedVariant(system.variant().name().into())),
    };
    let mut out =
        KSearch { family, k_eps: 0, k1: None, k2: None, k3: None, k_rates: None, pinned_k: 0, steps: Vec::new() };
    for j in 0..=K_CAP_LOG2 {
        let k = 1u64 << j;
        let sys = system.with_k(k)?;
        let mut reports = cone_reports(&sys, spec)?;
        let cones = reports.iter().all(|r| r.passed);
        if cones && out.k_eps == 0 {
            out.k_eps = k;
        }
        let mut done = false;
        if cones {
            match family {
                SearchFamily::Pve => {
                    let p = pve_certify(&sys, spec, direction_iters)?;
                    let k1 = p.small_c.passed;
                    let k2 = k1 && p.pole.passed;
                    let k3 = k2 && p.large_c.passed && p.sweep.passed && p.exact.passed;
                    if k1 && out.k1.is_none() {
                        out.k1 = Some(k);
                    }
                    if k2 && out.k2.is_none() {
                        out.k2 = Some(k);
                    }
                    if k3 {
                        out.k3 = Some(k);
                        done = true;
                    }
                    reports.extend([p.small_c, p.pole, p.large_c, p.sweep, p.exact]);
                }
                SearchFamily::Mixed => {
                    let r = center_rate_bounds(&sys, spec, direction_iters)?;
                    if r.all_passed() {
                        out.k_rates = Some(k);
                        done = true;
                    }
                    reports.extend([r.cu_in_first_box, r.cs_in_second_box, r.cu_off_first_box, r.cs_off_second_box]);
                }
            }
        }
        let witness = failing_witness(&reports);
        out.steps.push(KStep { k, reports });
        if done {
            out.pinned_k = k;
            return Ok(out);
        }
        if j == K_CAP_LOG2 {
            return Err(Error::SearchCap(format!("k search exceeded 2^{K_CAP_LOG2}: {witness}")));
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Brute-force check of the ratio lower bound over `|u|, |ε| ≤ ε₀`,
/// `|c| ∈ [γ, 10]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioSweep {
    pub constants: RatioConstants,
    pub min_ratio: f64,
    pub min_margin: f64,
    pub argmin: [f64; 3],
    pub violations: u64,
    pub samples: u64,
    pub passed: bool,
}

pub fn ratio_bound_sweep(gamma: f64, per_axis: usize) -> Result<RatioSweep> {
    let constants = ratio_bound_constants(gamma)?;
    let n = per_axis.max(2);
    let e0 = constants.eps0;
    let lin = |i: usize| -e0 + 2.0 * e0 * i as f64 / (n - 1) as f64;
    let half = n.div_ceil(2).max(2);
    let cs: Vec<f64> = (0..half)
        .map(|i| gamma + (10.0 - gamma) * i as f64 / (half - 1) as f64)
        .flat_map(|c| [c, -c])
        .take(n.max(4))
        .collect();
    let rows: Vec<(f64, [f64; 3], u64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let u = lin(i);
            let mut best = (f64::INFINITY, [0.0; 3], 0u64);
            for j in 0..n {
                let eps = lin(j);
                for &c in &cs {
                    let r = ratio_value(u, eps, c);
                    if !(r >= constants.big_m) {
                        best.2 += 1;
                    }
                    if r < best.0 {
                        best.0 = r;
                        best.1 = [u, eps, c];
                    }
                }
            }
            best
        })
        .collect();
    let mut min_ratio = f64::INFINITY;
    let mut argmin = [0.0; 3];
    let mut violations = 0;
    for (r, a, v) in rows {
        violations += v;
        if r < min_ratio {
            min_ratio = r;
            argmin = a;
        }
    }
    let min_margin = min_ratio - constants.big_m;
    Ok(RatioSweep {
        constants,
        min_ratio,
        min_margin,
        argmin,
        violations,
        samples: (n * n * cs.len()) as u64,
        passed: violations == 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{eigen_decompose, LatticeAutomorphism};

    #[test]
    fn kappa_zero_failure_is_inconsistent() {
        // λ_s close to one makes the κ = 0 instance negative
        let r = search_kappa([2.0, 0.99, 1.0 / 1.98], SearchFamily::Pve);
        assert!(matches!(r, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn found_kappa_is_on_grid_and_maximal() {
        let frame = eigen_decompose(&LatticeAutomorphism::named("D").unwrap()).unwrap();
        let values = power_eigen(&frame, 14).unwrap().values();
        let k = search_kappa(values, SearchFamily::Pve).unwrap();
        assert!(k.margins.iter().all(|&m| m > 0.0));
        let next = k.kappa + KAPPA_RESOLUTION;
        assert!(kappa_margins(SearchFamily::Pve, values, next).iter().any(|&m| m <= 0.0));
    }

    #[test]
    fn epsilon_respects_constraints() {
        assert_eq!(default_epsilon(4.0, SearchFamily::Pve), 0.05);
        assert_eq!(default_epsilon(0.01, SearchFamily::Pve), 0.01);
        let e = default_epsilon(0.05, SearchFamily::Mixed);
        assert!(2.0 * e * e <= 0.05 * 0.05 + 1e-18);
    }
}

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::DaSystem;
use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;
use crate::torus::{boxes_disjoint, BoxChart, PrecisePoint, TorusPoint, Vec3, CHART_RADIUS};

use super::curve::UnstableCurve;

/// Two-sided normal quantile used for confidence halfwidths.
pub const Z_95: f64 = 1.959963984540054;

/// Longest image chord accepted by the quadrature estimator.
pub const MAX_QUADRATURE_CHORD: f64 = 0.125;

/// Open axis-aligned box (in a chart's eigenframe) strictly inside the
/// chart's inner box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxRegion {
    chart: BoxChart,
    half_width: f64,
}

impl BoxRegion {
    pub fn new(chart: BoxChart, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width <= chart.half_width_inner) {
            return Err(Error::invalid(format!(
                "region half width {half_width} must lie in (0, {}]",
                chart.half_width_inner
            )));
        }
        Ok(BoxRegion { chart, half_width })
    }

    /// The chart's whole inner box.
    pub fn inner(chart: BoxChart) -> Self {
        BoxRegion { chart, half_width: chart.half_width_inner }
    }

    pub fn chart(&self) -> &BoxChart {
        &self.chart
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn contains(&self, x: &TorusPoint) -> bool {
        self.chart.try_local(x).is_some_and(|l| l.iter().all(|c| c.abs() < self.half_width))
    }

    /// Fraction of the straight chord `start + t·chord`, `t ∈ [0, 1]`,
    /// inside the box.
    pub fn chord_fraction(&self, start: &PrecisePoint, chord: &Vec3) -> f64 {
        let d = torus_offset(start, &self.chart.center);
        if d.norm() >= CHART_RADIUS {
            return 0.0;
        }
        let l0 = self.chart.frame.to_frame(&d);
        let dl = self.chart.frame.to_frame(chord);
        let h = self.half_width;
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for i in 0..3 {
            if dl[i] == 0.0 {
                if l0[i].abs() >= h {
                    return 0.0;
                }
                continue;
            }
            let a = (-h - l0[i]) / dl[i];
            let b = (h - l0[i]) / dl[i];
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (hi - lo).max(0.0)
    }
}

fn torus_offset(x: &PrecisePoint, center: &TorusPoint) -> Vec3 {
    x.delta_from(&PrecisePoint::new(*center))
}

/// Union of pairwise disjoint boxes.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    boxes: Vec<BoxRegion>,
}

impl Region {
    pub fn new(boxes: Vec<BoxRegion>) -> Result<Self> {
        if boxes.is_empty() {
            return Err(Error::invalid("a region needs at least one box"));
        }
        for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                let w = a.half_width.max(b.half_width);
                if !boxes_disjoint(&a.chart.center, &b.chart.center, w) {
                    return Err(Error::invalid("region boxes overlap"));
                }
            }
        }
        Ok(Region { boxes })
    }

    /// Union of the inner boxes of every deformation chart of the system.
    pub fn deformation_boxes(system: &DaSystem) -> Result<Self> {
        Region::new(system.charts().into_iter().map(BoxRegion::inner).collect())
    }

    pub fn boxes(&self) -> &[BoxRegion] {
        &self.boxes
    }

    pub fn contains(&self, x: &TorusPoint) -> bool {
        self.boxes.iter().any(|b| b.contains(x))
    }

    pub fn chord_fraction(&self, start: &PrecisePoint, chord: &Vec3) -> f64 {
        self.boxes.iter().map(|b| b.chord_fraction(start, chord)).sum()
    }
}

/// Pushed-forward arclength statistics after `n` iterates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushforwardStats {
    pub n: u32,
    /// Arclength of the image curve.
    pub total_length: f64,
    pub log_total_length: f64,
    /// Normalised mass `m_L({t : gⁿ(t) ∈ region}) / m_L(L)`.
    pub region_mass: f64,
    pub samples: usize,
    pub confidence_halfwidth: f64,
}

/// Agresti-Coull 95% halfwidth for `hits` successes out of `n` trials.
pub fn agresti_coull_halfwidth(hits: usize, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let z2 = Z_95 * Z_95;
    let nt = n as f64 + z2;
    let p = (hits as f64 + z2 / 2.0) / nt;
    Z_95 * (p * (1.0 - p) / nt).sqrt()
}

/// Sampling controls shared by the Monte Carlo estimators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub samples: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec { samples: 100_000, seed: 0 }
    }
}

/// One arclength-uniform point per equal-length stratum of the curve,
/// with the unit tangent of the segment it falls on.
pub fn stratified_samples(curve: &UnstableCurve, spec: &SampleSpec) -> Result<Vec<(PrecisePoint, Vec3)>> {
    if spec.samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let n = spec.samples;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            rng.set_stream(i as u64);
            let u = (i as f64 + rng.gen::<f64>()) / n as f64;
            curve.sample(u)
        })
        .collect()
}

/// Per-sample orbit record: region indicator and log tangent growth at
/// every iterate `0..=n_max`.
fn orbit_record(
    system: &DaSystem,
    x: &PrecisePoint,
    tangent: &Vec3,
    n_max: u32,
    region: &Region,
) -> Result<(Vec<bool>, Vec<f64>)> {
    let mut hits = Vec::with_capacity(n_max as usize + 1);
    let mut logs = Vec::with_capacity(n_max as usize + 1);
    let mut p = *x;
    let mut v = system.frame().to_frame(tangent).normalize();
    let mut acc = 0.0;
    for n in 0..=n_max {
        hits.push(region.contains(&p.rounded()));
        logs.push(acc);
        if n == n_max {
            break;
        }
        let (next, j) = system.step(&p)?;
        let w = j * v;
        let norm = w.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("tangent cocycle degenerated".into()));
        }
        acc += norm.ln();
        v = w / norm;
        p = next;
    }
    Ok((hits, logs))
}

fn log_mean_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let terms: Vec<f64> = xs.iter().map(|x| (x - m).exp()).collect();
    m + (pairwise_sum(&terms) / xs.len() as f64).ln()
}

/// Monte Carlo mass and length series for `n = 0..=n_max`: stratified
/// arclength samples of the curve are iterated with their tangents.
pub fn mass_series(
    system: &DaSystem,
    curve: &UnstableCurve,
    n_max: u32,
    region: &Region,
    spec: &SampleSpec,
) -> Result<Vec<PushforwardStats>> {
    let samples = stratified_samples(curve, spec)?;
    let records: Vec<(Vec<bool>, Vec<f64>)> =
        samples.par_iter().map(|(x, t)| orbit_record(system, x, t, n_max, region)).collect::<Result<_>>()?;
    let len0 = curve.arclength();
    let count = samples.len();
    Ok((0..=n_max as usize)
        .map(|n| {
            let hits = records.iter().filter(|r| r.0[n]).count();
            let logs: Vec<f64> = records.iter().map(|r| r.1[n]).collect();
            let log_total = len0.ln() + log_mean_exp(&logs);
            PushforwardStats {
                n: n as u32,
                total_length: log_total.exp(),
                log_total_length: log_total,
                region_mass: hits as f64 / count as f64,
                samples: count,
                confidence_halfwidth: agresti_coull_halfwidth(hits, count),
            }
        })
        .collect())
}

/// Exact-in-the-limit mass by quadrature along the refined image curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureMass {
    pub n: u32,
    pub mass: f64,
    pub image_length: f64,
    pub segments: usize,
}

struct QuadState<'a> {
    system: &'a DaSystem,
    region: &'a Region,
    n: u32,
    max_seg_len: f64,
    budget: &'a mut usize,
    weighted: Vec<f64>,
    lengths: Vec<f64>,
}

const MAX_QUAD_DEPTH: u32 = 60;

impl QuadState<'_> {
    fn push(&mut self, x: &PrecisePoint) -> Result<PrecisePoint> {
        if *self.budget < 1 {
            return Err(Error::Budget(
                "vertex budget exhausted in quadrature; use a shorter seed curve or fewer iterates".into(),
            ));
        }
        *self.budget -= 1;
        let mut p = *x;
        for _ in 0..self.n {
            p = self.system.apply_precise(&p)?;
        }
        Ok(p)
    }

    /// Streams the image of `a + t·chord` given its endpoint images,
    /// accumulating the source length whose image lies in the region.
    fn segment(
        &mut self,
        a: &PrecisePoint,
        chord: &Vec3,
        ia: &PrecisePoint,
        ib: &PrecisePoint,
        depth: u32,
    ) -> Result<()> {
        let d = ib.delta_from(ia);
        if d.norm() <= self.max_seg_len {
            let src = chord.norm();
            self.weighted.push(src * self.region.chord_fraction(ia, &d));
            self.lengths.push(d.norm());
            return Ok(());
        }
        if depth >= MAX_QUAD_DEPTH {
            return Err(Error::Numerical("quadrature refinement did not resolve a segment".into()));
        }
        let half = chord * 0.5;
        let mid = a.shifted(&half)?;
        let im = self.push(&mid)?;
        self.segment(a, &half, ia, &im, depth + 1)?;
        self.segment(&mid, &half, &im, ib, depth + 1)
    }
}

/// Mass of `{t ∈ L : gⁿ(t) ∈ region}` relative to the arclength of `L`,
/// from the image curve refined until every chord is at most `max_seg_len`
/// and clipped exactly against the region. Each image chord carries the
/// length of its source piece.
pub fn quadrature_mass(
    system: &DaSystem,
    curve: &UnstableCurve,
    n: u32,
    region: &Region,
    max_seg_len: f64,
    budget: &mut usize,
) -> Result<QuadratureMass> {
    if !(max_seg_len > 0.0 && max_seg_len <= MAX_QUADRATURE_CHORD) {
        return Err(Error::invalid(format!("quadrature chord length must lie in (0, {MAX_QUADRATURE_CHORD}]")));
    }
    let mut st = QuadState { system, region, n, max_seg_len, budget, weighted: Vec::new(), lengths: Vec::new() };
    let verts = curve.vertices();
    let mut prev = st.push(&verts[0])?;
    for (i, chord) in curve.chords().iter().enumerate() {
        let next = st.push(&verts[i + 1])?;
        st.segment(&verts[i], chord, &prev, &next, 0)?;
        prev = next;
    }
    Ok(QuadratureMass {
        n,
        mass: pairwise_sum(&st.weighted) / curve.arclength(),
        image_length: pairwise_sum(&st.lengths),
        segments: st.lengths.len(),
    })
}

/// Both mass estimators at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushforwardMass {
    /// Monte Carlo statistics; `region_mass` is the sample frequency.
    pub stats: PushforwardStats,
    pub quadrature: QuadratureMass,
    /// `|quadrature - monte carlo|`.
    pub discrepancy: f64,
    /// Whether the two agree within three confidence halfwidths.
    pub agree: bool,
}

pub fn pushforward_mass(
    system: &DaSystem,
    curve: &UnstableCurve,
    n: u32,
    region: &Region,
    spec: &SampleSpec,
    max_seg_len: f64,
    budget: &mut usize,
) -> Result<PushforwardMass> {
    let stats = mass_series(system, curve, n, region, spec)?[n as usize];
    let quadrature = quadrature_mass(system, curve, n, region, max_seg_len, budget)?;
    let discrepancy = (quadrature.mass - stats.region_mass).abs();
    Ok(PushforwardMass { stats, quadrature, discrepancy, agree: discrepancy <= 3.0 * stats.confidence_halfwidth })
}

/// Length of every image segment relative to the bounds
/// `[γⁿ/√(1+κ²), √(1+κ²)γⁿ]`, in logs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeRecord {
    pub n: u32,
    /// `log(length(gⁿ L) / length(L)) - n log γ`.
    pub log_ratio: f64,
    /// Extremes of the same quantity over individual segments.
    pub min_segment: f64,
    pub max_segment: f64,
    /// `½ log(1+κ²)`.
    pub half_width: f64,
    pub violations: usize,
}

impl EnvelopeRecord {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.log_ratio.abs() <= self.half_width
    }
}

/// Length growth of the curve under `n_max` iterates, from the tangent
/// cocycle at each segment midpoint.
pub fn length_envelope(
    system: &DaSystem,
    curve: &UnstableCurve,
    n_max: u32,
    kappa: f64,
) -> Result<Vec<EnvelopeRecord>> {
    let gamma = system.spectrum()[system.unstable_axis()];
    let half_width = 0.5 * (1.0 + kappa * kappa).ln();
    let none = Region { boxes: Vec::new() };
    let segs: Vec<(f64, Vec<f64>)> = (0..curve.chords().len())
        .into_par_iter()
        .map(|i| {
            let chord = curve.chords()[i];
            let mid = curve.vertices()[i].shifted(&(chord * 0.5))?;
            Ok((chord.norm(), orbit_record(system, &mid, &chord, n_max, &none)?.1))
        })
        .collect::<Result<_>>()?;
    let len0 = curve.arclength();
    Ok((0..=n_max as usize)
        .map(|n| {
            let shift = n as f64 * gamma.ln();
            let rel: Vec<f64> = segs.iter().map(|(_, l)| l[n] - shift).collect();
            let weighted: Vec<f64> = segs.iter().zip(&rel).map(|((w, _), r)| w / len0 * r.exp()).collect();
            let (min_segment, max_segment) =
                rel.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &r| (a.min(r), b.max(r)));
            EnvelopeRecord {
                n: n as u32,
                log_ratio: pairwise_sum(&weighted).ln(),
                min_segment,
                max_segment,
                half_width,
                violations: rel.iter().filter(|r| r.abs() > half_width).count(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn agresti_coull_is_positive_at_zero_hits() {
        let h = agresti_coull_halfwidth(0, 100_000);
        assert!(h > 0.0 && h < 1e-4);
        assert!(agresti_coull_halfwidth(50, 100) > agresti_coull_halfwidth(5000, 10_000));
    }

    #[test]
    fn log_mean_exp_matches_direct() {
        let xs = [0.1, -2.0, 3.5];
        let direct = (xs.iter().map(|x: &f64| x.exp()).sum::<f64>() / 3.0).ln();
        assert!((log_mean_exp(&xs) - direct).abs() < 1e-14);
    }
}

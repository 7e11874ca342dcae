use crate::construct::DaSystem;
use crate::error::{Error, Result};
use crate::torus::{PrecisePoint, TorusPoint, Vec3};
use crate::verify::estimate_unstable_direction;

/// Default cap on vertices created while refining curves in one run.
pub const DEFAULT_VERTEX_BUDGET: usize = 100_000_000;

/// Polyline approximation of an arc of a strong-unstable leaf.
///
/// `chords[i]` is the lifted displacement from vertex `i` to vertex `i + 1`,
/// so the curve is continuous in the universal cover.
#[derive(Debug, Clone, PartialEq)]
pub struct UnstableCurve {
    vertices: Vec<PrecisePoint>,
    chords: Vec<Vec3>,
    cumulative: Vec<f64>,
}

impl UnstableCurve {
    /// Builds a curve from vertices no further apart than a quarter turn.
    pub fn from_vertices(vertices: Vec<PrecisePoint>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::invalid("a curve needs at least two vertices"));
        }
        let chords: Vec<Vec3> = vertices.windows(2).map(|w| w[1].delta_from(&w[0])).collect();
        Ok(UnstableCurve::assemble(vertices, chords))
    }

    fn assemble(vertices: Vec<PrecisePoint>, chords: Vec<Vec3>) -> Self {
        let mut cumulative = Vec::with_capacity(vertices.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for c in &chords {
            acc += c.norm();
            cumulative.push(acc);
        }
        UnstableCurve { vertices, chords, cumulative }
    }

    pub fn vertices(&self) -> &[PrecisePoint] {
        &self.vertices
    }

    pub fn chords(&self) -> &[Vec3] {
        &self.chords
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn arclength(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    pub fn max_chord(&self) -> f64 {
        self.chords.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Point at arclength fraction `u ∈ [0, 1]` along the polyline.
    pub fn point_at(&self, u: f64) -> Result<PrecisePoint> {
        Ok(self.sample(u)?.0)
    }

    /// Point at arclength fraction `u` with the unit tangent of its segment.
    pub fn sample(&self, u: f64) -> Result<(PrecisePoint, Vec3)> {
        let s = u.clamp(0.0, 1.0) * self.arclength();
        let last = self.chords.len() - 1;
        let i = match self.cumulative.binary_search_by(|c| c.total_cmp(&s)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        };
        let seg = self.cumulative[i + 1] - self.cumulative[i];
        let t = if seg > 0.0 { (s - self.cumulative[i]) / seg } else { 0.0 };
        Ok((self.vertices[i].shifted(&(self.chords[i] * t))?, self.segment_tangent(i)))
    }

    /// Unit tangent of segment `i` in ambient coordinates.
    pub fn segment_tangent(&self, i: usize) -> Vec3 {
        self.chords[i].normalize()
    }
}

/// Direction field along strong-unstable leaves in ambient coordinates,
/// oriented to agree with `reference`.
fn field(system: &DaSystem, x: &PrecisePoint, reference: &Vec3, iters: usize) -> Result<Vec3> {
    let local = estimate_unstable_direction(system, &x.rounded(), iters)?;
    let v = system.frame().from_frame(&local);
    Ok(if v.dot(reference) < 0.0 { -v } else { v })
}

/// Integrates the strong-unstable field through `x` with classical RK4, half
/// the requested length on each side, steps at most `max_seg_len / 4`.
pub fn seed_curve(
    system: &DaSystem,
    x: &TorusPoint,
    length: f64,
    max_seg_len: f64,
    direction_iters: usize,
) -> Result<UnstableCurve> {
    if !(length > 0.0 && max_seg_len > 0.0) {
        return Err(Error::invalid("curve length and segment length must be positive"));
    }
    let start = PrecisePoint::new(*x);
    let axis0 = field(system, &start, &system.frame().vector(system.unstable_axis()), direction_iters)?;
    let half = 0.5 * length;
    let steps = (half / (0.25 * max_seg_len)).ceil().max(1.0) as usize;
    let h = half / steps as f64;
    let mut sides = Vec::with_capacity(2);
    for sign in [-1.0, 1.0] {
        let mut pts = vec![start];
        let mut p = start;
        let mut heading = axis0 * sign;
        for _ in 0..steps {
            let k1 = field(system, &p, &heading, direction_iters)?;
            let k2 = field(system, &p.shifted(&(k1 * (0.5 * h)))?, &k1, direction_iters)?;
            let k3 = field(system, &p.shifted(&(k2 * (0.5 * h)))?, &k2, direction_iters)?;
            let k4 = field(system, &p.shifted(&(k3 * h))?, &k3, direction_iters)?;
            let d = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            // keep the step exactly `h` long so arclength is parameterised
            let d = d * (h / d.norm());
            p = p.shifted(&d)?;
            heading = k4;
            pts.push(p);
        }
        sides.push(pts);
    }
    let mut vertices: Vec<PrecisePoint> = sides[0].iter().rev().copied().collect();
    vertices.extend_from_slice(&sides[1][1..]);
    UnstableCurve::from_vertices(vertices)
}

/// Image of the curve after `steps` applications of the map. Segments whose
/// image chord exceeds `max_seg_len` are bisected, evaluating the map at
/// the new midpoints. `budget` is decremented by every vertex created.
pub fn iterate_curve(
    system: &DaSystem,
    curve: &UnstableCurve,
    steps: usize,
    max_seg_len: f64,
    budget: &mut usize,
) -> Result<UnstableCurve> {
    if !(max_seg_len > 0.0) {
        return Err(Error::invalid("segment length must be positive"));
    }
    let mut cur = curve.clone();
    for _ in 0..steps {
        cur = iterate_once(system, &cur, max_seg_len, budget)?;
    }
    Ok(cur)
}

fn spend(budget: &mut usize, n: usize) -> Result<()> {
    if *budget < n {
        return Err(Error::Budget(
            "vertex budget exhausted while refining a curve; use fewer steps or a shorter seed".into(),
        ));
    }
    *budget -= n;
    Ok(())
}

fn iterate_once(
    system: &DaSystem,
    curve: &UnstableCurve,
    max_seg_len: f64,
    budget: &mut usize,
) -> Result<UnstableCurve> {
    let mut vertices = Vec::with_capacity(curve.len());
    let mut chords = Vec::with_capacity(curve.len());
    let first = system.apply_precise(&curve.vertices[0])?;
    spend(budget, 1)?;
    vertices.push(first);
    let mut prev_img = first;
    for (i, chord) in curve.chords.iter().enumerate() {
        let a = curve.vertices[i];
        let b_img = system.apply_precise(&curve.vertices[i + 1])?;
        spend(budget, 1)?;
        refine(system, &a, chord, &prev_img, &b_img, max_seg_len, budget, &mut vertices, &mut chords, 0)?;
        prev_img = b_img;
    }
    Ok(UnstableCurve::assemble(vertices, chords))
}

const MAX_DEPTH: u32 = 60;

/// Appends the image of segment `a + t·chord` (excluding its start) given
/// the images of its endpoints.
#[allow(clippy::too_many_arguments)]
fn refine(
    system: &DaSystem,
    a: &PrecisePoint,
    chord: &Vec3,
    a_img: &PrecisePoint,
    b_img: &PrecisePoint,
    max_seg_len: f64,
    budget: &mut usize,
    vertices: &mut Vec<PrecisePoint>,
    chords: &mut Vec<Vec3>,
    depth: u32,
) -> Result<()> {
    let d = b_img.delta_from(a_img);
    if d.norm() <= max_seg_len || depth >= MAX_DEPTH {
        if depth >= MAX_DEPTH {
            return Err(Error::Numerical("curve refinement did not resolve a segment".into()));
        }
        vertices.push(*b_img);
        chords.push(d);
        return Ok(());
    }
    let half = chord * 0.5;
    let mid = a.shifted(&half)?;
    let mid_img = system.apply_precise(&mid)?;
    spend(budget, 1)?;
    refine(system, a, &half, a_img, &mid_img, max_seg_len, budget, vertices, chords, depth + 1)?;
    refine(system, &mid, &half, &mid_img, b_img, max_seg_len, budget, vertices, chords, depth + 1)
}

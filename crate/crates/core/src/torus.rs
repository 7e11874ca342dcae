//! Points, lattice automorphisms, eigenframes and box charts on T³ = R³/Z³.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{two_prod, two_sum};

pub type Vec3 = Vector3<f64>;

/// Displacements at or beyond this norm are rejected by chart maps.
pub const CHART_RADIUS: f64 = 0.25;

/// Tolerance on `| |μ| - 1 |` below which an eigenvalue counts as neutral.
pub const HYPERBOLICITY_TOL: f64 = 1e-9;

#[inline]
fn reduce(c: f64) -> f64 {
    let r = c - c.floor();
    if r >= 1.0 {
        0.0
    } else {
        // normalises -0.0
        r + 0.0
    }
}

/// A point of T³ with every coordinate in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct TorusPoint([f64; 3]);

impl TryFrom<[f64; 3]> for TorusPoint {
    type Error = Error;
    fn try_from(v: [f64; 3]) -> Result<Self> {
        wrap(v)
    }
}

impl From<TorusPoint> for [f64; 3] {
    fn from(p: TorusPoint) -> Self {
        p.0
    }
}

impl TorusPoint {
    pub const ORIGIN: TorusPoint = TorusPoint([0.0; 3]);

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn to_vec(&self) -> Vec3 {
        Vec3::new(self.0[0], self.0[1], self.0[2])
    }

    /// Wraps a vector known to be finite.
    pub(crate) fn wrap_finite(v: &Vec3) -> TorusPoint {
        TorusPoint([reduce(v[0]), reduce(v[1]), reduce(v[2])])
    }
}

/// Reduces each coordinate mod 1 into `[0, 1)`.
pub fn wrap(v: [f64; 3]) -> Result<TorusPoint> {
    if v.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("wrap"));
    }
    Ok(TorusPoint([reduce(v[0]), reduce(v[1]), reduce(v[2])]))
}

pub fn wrap_vec(v: &Vec3) -> Result<TorusPoint> {
    wrap([v[0], v[1], v[2]])
}

/// Shortest displacement from `base` to `x`; each component lies in `(-1/2, 1/2]`.
#[inline]
pub fn torus_delta(x: &TorusPoint, base: &TorusPoint) -> Vec3 {
    let mut d = Vec3::zeros();
    for i in 0..3 {
        let r = x.0[i] - base.0[i];
        d[i] = r - (r - 0.5).ceil();
    }
    d
}

/// The lift of `x` nearest to the lift of `base` in `[0,1)³`; ties go to `+1/2`.
pub fn lift_near(x: &TorusPoint, base: &TorusPoint) -> [f64; 3] {
    let d = torus_delta(x, base);
    [base.0[0] + d[0], base.0[1] + d[1], base.0[2] + d[2]]
}

pub fn torus_distance(a: &TorusPoint, b: &TorusPoint) -> f64 {
    torus_delta(a, b).norm()
}

/// A torus point carried with a small correction, `base + offset`, so that
/// orbits under large integer matrices keep bits below the `f64` grid of `[0,1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisePoint {
    pub base: TorusPoint,
    pub offset: Vec3,
}

impl PrecisePoint {
    pub fn new(base: TorusPoint) -> Self {
        PrecisePoint { base, offset: Vec3::zeros() }
    }

    /// Normalises `hi + lo` (per coordinate) so that `base` is the wrapped
    /// leading part and `offset` the exact remainder.
    pub fn from_parts(hi: &Vec3, lo: &Vec3) -> Result<Self> {
        if hi.iter().chain(lo.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("precise point"));
        }
        let mut base = [0.0; 3];
        let mut offset = Vec3::zeros();
        for i in 0..3 {
            let (s, e) = two_sum(hi[i], lo[i]);
            let (mut w, e2) = two_sum(s, -s.floor());
            if w >= 1.0 {
                w -= 1.0;
            }
            base[i] = w + 0.0;
            offset[i] = e + e2;
        }
        Ok(PrecisePoint { base: TorusPoint(base), offset })
    }

    /// Adds a displacement and renormalises.
    pub fn shifted(&self, d: &Vec3) -> Result<Self> {
        PrecisePoint::from_parts(&self.base.to_vec(), &(self.offset + d))
    }

    pub fn rounded(&self) -> TorusPoint {
        if self.offset == Vec3::zeros() {
            return self.base;
        }
        TorusPoint::wrap_finite(&(self.base.to_vec() + self.offset))
    }

    /// Shortest displacement from `other` to `self`, keeping the offsets.
    pub fn delta_from(&self, other: &PrecisePoint) -> Vec3 {
        let coarse = torus_delta(&self.base, &other.base);
        coarse + (self.offset - other.offset)
    }
}

pub const MATRIX_D: [[i64; 3]; 3] = [[2, 1, 1], [1, 1, 1], [1, 1, 0]];
pub const MATRIX_C: [[i64; 3]; 3] = [[1, -1, 0], [-1, 1, 1], [0, 1, -1]];

/// Integer 3×3 matrix with determinant ±1, acting on T³.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[[i64; 3]; 3]", into = "[[i64; 3]; 3]")]
pub struct LatticeAutomorphism {
    m: [[i64; 3]; 3],
}

impl TryFrom<[[i64; 3]; 3]> for LatticeAutomorphism {
    type Error = Error;
    fn try_from(m: [[i64; 3]; 3]) -> Result<Self> {
        LatticeAutomorphism::new(m)
    }
}

impl From<LatticeAutomorphism> for [[i64; 3]; 3] {
    fn from(a: LatticeAutomorphism) -> Self {
        a.m
    }
}

fn det3(m: &[[i64; 3]; 3]) -> i128 {
    let m = |i: usize, j: usize| m[i][j] as i128;
    m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
        + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0))
}

fn adjugate(m: &[[i64; 3]; 3]) -> [[i128; 3]; 3] {
    let a = |i: usize, j: usize| m[i][j] as i128;
    let mut adj = [[0i128; 3]; 3];
    for (i, row) in adj.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            // cofactor of (j, i)
            let (r0, r1) = match j {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match i {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = a(r0, c0) * a(r1, c1) - a(r0, c1) * a(r1, c0);
            *out = if (i + j) % 2 == 0 { minor } else { -minor };
        }
    }
    adj
}

impl LatticeAutomorphism {
    pub fn new(m: [[i64; 3]; 3]) -> Result<Self> {
        let d = det3(&m);
        if d.abs() != 1 {
            return Err(Error::NotUnimodular(d as i64));
        }
        Ok(LatticeAutomorphism { m })
    }

    /// Looks up a named base matrix: `"D"` or `"C"`.
    pub fn named(name: &str) -> Result<Self> {
        match name {
            "D" => LatticeAutomorphism::new(MATRIX_D),
            "C" => LatticeAutomorphism::new(MATRIX_C),
            other => Err(Error::invalid(format!("unknown matrix name {other:?}"))),
        }
    }

    pub fn entries(&self) -> [[i64; 3]; 3] {
        self.m
    }

    pub fn det(&self) -> i64 {
        det3(&self.m) as i64
    }

    pub fn trace(&self) -> i64 {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..3).all(|i| (0..3).all(|j| self.m[i][j] == self.m[j][i]))
    }

    /// Coefficients `(c2, c1, c0)` of the monic characteristic polynomial
    /// `x³ + c2 x² + c1 x + c0`.
    pub fn char_poly(&self) -> [i64; 3] {
        let m = &self.m;
        let minors = m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
            - m[1][2] * m[2][1];
        [-self.trace(), minors, -self.det()]
    }

    pub fn mul(&self, other: &LatticeAutomorphism) -> Result<Self> {
        let mut out = [[0i64; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                let mut acc: i64 = 0;
                for l in 0..3 {
                    acc = self.m[i][l]
                        .checked_mul(other.m[l][j])
                        .and_then(|p| acc.checked_add(p))
                        .ok_or_else(|| Error::Numerical("integer overflow in matrix product".into()))?;
                }
                *cell = acc;
            }
        }
        Ok(LatticeAutomorphism { m: out })
    }

    pub fn pow(&self, e: u32) -> Result<Self> {
        let mut result = LatticeAutomorphism { m: [[1, 0, 0], [0, 1, 0], [0, 0, 1]] };
        let mut base = *self;
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base)?;
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base)?;
            }
        }
        Ok(result)
    }

    pub fn inverse(&self) -> Self {
        let det = det3(&self.m);
        let adj = adjugate(&self.m);
        let mut m = [[0i64; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (adj[i][j] * det) as i64;
            }
        }
        LatticeAutomorphism { m }
    }

    pub fn is_identity(&self) -> bool {
        self.m == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.m[i][j] as f64)
    }

    /// Matrix-vector product in floating point (for tangent vectors).
    pub fn apply_vec(&self, v: &Vec3) -> Vec3 {
        let mut out = Vec3::zeros();
        for i in 0..3 {
            out[i] = (self.m[i][0] as f64) * v[0] + (self.m[i][1] as f64) * v[1] + (self.m[i][2] as f64) * v[2];
        }
        out
    }

    /// Image of a precise point. The integer part of every product is dropped
    /// exactly, so only the final renormalisation rounds.
    pub fn apply_precise(&self, x: &PrecisePoint) -> Result<PrecisePoint> {
        let b = x.base.coords();
        let mut hi = Vec3::zeros();
        let mut lo = Vec3::zeros();
        for i in 0..3 {
            let mut acc = 0.0;
            let mut err = 0.0;
            for (&mij, &bj) in self.m[i].iter().zip(&b) {
                let (p, e) = two_prod(mij as f64, bj);
                let (frac, e1) = two_sum(p, -p.floor());
                let (s, e2) = two_sum(acc, frac);
                acc = s;
                err += e + e1 + e2;
            }
            hi[i] = acc;
            lo[i] = err;
        }
        lo += self.apply_vec(&x.offset);
        PrecisePoint::from_parts(&hi, &lo)
    }

    /// `M·x mod 1`, correctly rounded up to the final wrap.
    pub fn apply_mod1(&self, x: &TorusPoint) -> TorusPoint {
        match self.apply_precise(&PrecisePoint::new(*x)) {
            Ok(p) => p.rounded(),
            Err(_) => unreachable!("finite input yields finite image"),
        }
    }
}

/// Ordered orthonormal eigenbasis `(e_uu, e_mid, e_ss)` with signed eigenvalues
/// sorted by descending modulus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenFrame {
    basis: Matrix3<f64>,
    basis_t: Matrix3<f64>,
    values: [f64; 3],
}

impl EigenFrame {
    /// Builds a frame from column vectors and values without any checks.
    pub fn from_parts(vectors: [Vec3; 3], values: [f64; 3]) -> Self {
        let basis = Matrix3::from_columns(&vectors);
        EigenFrame { basis, basis_t: basis.transpose(), values }
    }

    pub fn vector(&self, i: usize) -> Vec3 {
        self.basis.column(i).into_owned()
    }

    pub fn values(&self) -> [f64; 3] {
        self.values
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    /// Columns are the frame vectors.
    pub fn basis(&self) -> &Matrix3<f64> {
        &self.basis
    }

    /// Frame coordinates of a standard-basis vector.
    #[inline]
    pub fn to_frame(&self, v: &Vec3) -> Vec3 {
        self.basis_t * v
    }

    #[inline]
    pub fn from_frame(&self, l: &Vec3) -> Vec3 {
        self.basis * l
    }

    pub fn orthonormality_residual(&self) -> f64 {
        let g = self.basis_t * self.basis - Matrix3::identity();
        g.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn eigen_residual(&self, m: &LatticeAutomorphism) -> f64 {
        let mf = m.to_matrix();
        (0..3).map(|i| (mf * self.vector(i) - self.values[i] * self.vector(i)).norm()).fold(0.0, f64::max)
    }
}

fn eval_cubic(c: &[f64; 3], x: f64) -> (f64, f64) {
    let p = ((x + c[0]) * x + c[1]) * x + c[2];
    let dp = (3.0 * x + 2.0 * c[0]) * x + c[1];
    (p, dp)
}

/// Real roots of a monic cubic with three real roots, by the trigonometric
/// formula followed by Newton polishing.
fn symmetric_cubic_roots(c: [f64; 3]) -> [f64; 3] {
    let shift = -c[0] / 3.0;
    let p = c[1] - c[0] * c[0] / 3.0;
    let q = 2.0 * c[0].powi(3) / 27.0 - c[0] * c[1] / 3.0 + c[2];
    let mut roots = if p >= -1e-14 {
        [shift; 3]
    } else {
        let amp = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let tau = 2.0 * std::f64::consts::PI / 3.0;
        [shift + amp * phi.cos(), shift + amp * (phi - tau).cos(), shift + amp * (phi - 2.0 * tau).cos()]
    };
    for r in roots.iter_mut() {
        for _ in 0..3 {
            let (f, df) = eval_cubic(&c, *r);
            if df == 0.0 || f == 0.0 {
                break;
            }
            let step = f / df;
            *r -= step;
            if step.abs() <= 1e-17 * r.abs() {
                break;
            }
        }
    }
    roots
}

fn eigenvector(m: &Matrix3<f64>, mu: f64) -> Option<Vec3> {
    let shifted = m - Matrix3::identity() * mu;
    let rows: [Vec3; 3] = [shifted.row(0).transpose(), shifted.row(1).transpose(), shifted.row(2).transpose()];
    let candidates = [rows[0].cross(&rows[1]), rows[0].cross(&rows[2]), rows[1].cross(&rows[2])];
    let best = candidates.iter().max_by(|a, b| a.norm().total_cmp(&b.norm()))?;
    let n = best.norm();
    if n < 1e-12 {
        return None;
    }
    let mut v = best / n;
    let lead = (0..3).max_by(|&i, &j| v[i].abs().total_cmp(&v[j].abs())).unwrap_or(0);
    if v[lead] < 0.0 {
        v = -v;
    }
    Some(v)
}

/// Eigenframe of a symmetric hyperbolic lattice automorphism.
pub fn eigen_decompose(m: &LatticeAutomorphism) -> Result<EigenFrame> {
    if !m.is_symmetric() {
        return Err(Error::UnsupportedMatrix("eigen decomposition requires a symmetric matrix".into()));
    }
    let cp = m.char_poly();
    let mut roots = symmetric_cubic_roots([cp[0] as f64, cp[1] as f64, cp[2] as f64]);
    if let Some(&mu) = roots.iter().find(|mu| (mu.abs() - 1.0).abs() <= HYPERBOLICITY_TOL) {
        return Err(Error::NotHyperbolic(mu));
    }
    roots.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    if (roots[0].abs() - roots[1].abs()).abs() < 1e-9 || (roots[1].abs() - roots[2].abs()).abs() < 1e-9 {
        return Err(Error::Degenerate("repeated eigenvalue modulus".into()));
    }
    let mf = m.to_matrix();
    let mut vectors = [Vec3::zeros(); 3];
    for (v, &mu) in vectors.iter_mut().zip(roots.iter()) {
        *v = eigenvector(&mf, mu).ok_or_else(|| Error::Degenerate("eigenvector extraction failed".into()))?;
    }
    Ok(EigenFrame::from_parts(vectors, roots))
}

/// Frame of `M^exponent` for an even exponent: same vectors, powered values.
pub fn power_eigen(frame: &EigenFrame, exponent: u32) -> Result<EigenFrame> {
    if exponent < 2 || !exponent.is_multiple_of(2) {
        return Err(Error::invalid(format!("exponent must be even and at least 2, got {exponent}")));
    }
    let vals = frame.values().map(|v| v.powi(exponent as i32));
    Ok(EigenFrame::from_parts([frame.vector(0), frame.vector(1), frame.vector(2)], vals))
}

/// All fixed points of `M` on T³, origin first, found by exact rational enumeration.
pub fn fixed_points(m: &LatticeAutomorphism) -> Result<Vec<TorusPoint>> {
    let mut n = m.entries();
    for (i, row) in n.iter_mut().enumerate() {
        row[i] -= 1;
    }
    let det = det3(&n);
    if det == 0 {
        return Err(Error::Degenerate("M - I is singular".into()));
    }
    let adj = adjugate(&n);
    let d = det.abs();
    let sign = det.signum();
    // x ∈ [0,1)³ forces v = (M - I)x into the box spanned by each row's signed sum
    let lo: Vec<i128> = n.iter().map(|r| r.iter().filter(|&&a| a < 0).map(|&a| a as i128).sum()).collect();
    let hi: Vec<i128> = n.iter().map(|r| r.iter().filter(|&&a| a > 0).map(|&a| a as i128).sum()).collect();
    let mut found: Vec<[i128; 3]> = Vec::new();
    for v0 in lo[0]..=hi[0] {
        for v1 in lo[1]..=hi[1] {
            for v2 in lo[2]..=hi[2] {
                let v = [v0, v1, v2];
                let mut num = [0i128; 3];
                for i in 0..3 {
                    let s: i128 = (0..3).map(|j| adj[i][j] * v[j]).sum();
                    num[i] = (s * sign).rem_euclid(d);
                }
                if !found.contains(&num) {
                    found.push(num);
                }
            }
        }
    }
    found.sort();
    Ok(found
        .into_iter()
        .map(|num| TorusPoint([num[0] as f64 / d as f64, num[1] as f64 / d as f64, num[2] as f64 / d as f64]))
        .collect())
}

/// Box neighbourhoods of a fixed point in eigenframe coordinates `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxChart {
    pub center: TorusPoint,
    pub frame: EigenFrame,
    pub half_width_inner: f64,
    pub half_width_outer: f64,
}

impl BoxChart {
    pub fn new(center: TorusPoint, frame: EigenFrame, half_width_inner: f64, half_width_outer: f64) -> Result<Self> {
        if !(half_width_inner > 0.0 && half_width_inner < half_width_outer) {
            return Err(Error::invalid(format!(
                "box half widths must satisfy 0 < inner < outer, got {half_width_inner} and {half_width_outer}"
            )));
        }
        if 8.0 * half_width_outer * 3f64.sqrt() >= 1.0 {
            return Err(Error::invalid(format!(
                "outer half width {half_width_outer} too large for an injective chart"
            )));
        }
        Ok(BoxChart { center, frame, half_width_inner, half_width_outer })
    }

    /// The charts Λ (half width 2δ) and U (half width 4δ).
    pub fn for_delta(center: TorusPoint, frame: EigenFrame, delta: f64) -> Result<Self> {
        BoxChart::new(center, frame, 2.0 * delta, 4.0 * delta)
    }

    pub fn to_local(&self, x: &TorusPoint) -> Result<Vec3> {
        let d = torus_delta(x, &self.center);
        let dist = d.norm();
        if dist >= CHART_RADIUS {
            return Err(Error::OutOfChart { distance: dist });
        }
        Ok(self.frame.to_frame(&d))
    }

    /// Local coordinates when the point is within the chart radius.
    #[inline]
    pub fn try_local(&self, x: &TorusPoint) -> Option<Vec3> {
        let d = torus_delta(x, &self.center);
        if d.norm_squared() >= CHART_RADIUS * CHART_RADIUS {
            None
        } else {
            Some(self.frame.to_frame(&d))
        }
    }

    pub fn from_local(&self, l: &Vec3) -> TorusPoint {
        TorusPoint::wrap_finite(&(self.center.to_vec() + self.frame.from_frame(l)))
    }

    /// Strict membership in the open inner box Λ.
    pub fn inner_contains(&self, l: &Vec3) -> bool {
        l.iter().all(|c| c.abs() < self.half_width_inner)
    }

    pub fn outer_contains(&self, l: &Vec3) -> bool {
        l.iter().all(|c| c.abs() < self.half_width_outer)
    }

    pub fn contains_point(&self, x: &TorusPoint) -> bool {
        self.try_local(x).is_some_and(|l| self.inner_contains(&l))
    }
}

/// Whether two concentric-style boxes of the given half width around two
/// centers are disjoint on the torus (sufficient test via circumradii).
pub fn boxes_disjoint(a: &TorusPoint, b: &TorusPoint, half_width: f64) -> bool {
    torus_distance(a, b) > 2.0 * half_width * 3f64.sqrt()
}

/// Length of `{x + t·dir : |t| ≤ radius}` inside the union of all deck
/// translates of the chart's inner box.
pub fn ss_segment_box_mass(x: &TorusPoint, direction: &Vec3, radius: f64, chart: &BoxChart) -> f64 {
    let h = chart.half_width_inner;
    let circ = h * 3f64.sqrt();
    let d0 = torus_delta(x, &chart.center);
    let dir_local = chart.frame.to_frame(direction);
    let reach = (radius + circ + 1.0).ceil() as i64;
    let mut total = 0.0;
    for z0 in -reach..=reach {
        for z1 in -reach..=reach {
            for z2 in -reach..=reach {
                let p = d0 + Vec3::new(z0 as f64, z1 as f64, z2 as f64);
                // closest approach of the segment line to the translate's center
                let t_star = (-p.dot(direction)).clamp(-radius, radius);
                if (p + direction * t_star).norm() >= circ {
                    continue;
                }
                let pl = chart.frame.to_frame(&p);
                let mut t0 = -radius;
                let mut t1 = radius;
                for i in 0..3 {
                    let (o, s) = (pl[i], dir_local[i]);
                    if s.abs() < 1e-300 {
                        if o.abs() >= h {
                            t1 = t0;
                        }
                        continue;
                    }
                    let a = (-h - o) / s;
                    let b = (h - o) / s;
                    t0 = t0.max(a.min(b));
                    t1 = t1.min(a.max(b));
                }
                if t1 > t0 {
                    total += t1 - t0;
                }
            }
        }
    }
    total
}

//! The three deformed automorphisms: the volume-expanding map `f`, its inverse
//! `g`, and the mixed-center map `G`.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::bump::BumpProfile;
use crate::error::{Error, Result};
use crate::relations::{
    center_expansion_margin, mixed_contraction_margin, mixed_expansion_margin, mixed_spectral_margins,
    pve_spectral_margins, ratio_bound_constants,
};
use crate::torus::{
    boxes_disjoint, eigen_decompose, fixed_points, power_eigen, BoxChart, EigenFrame, LatticeAutomorphism,
    PrecisePoint, TorusPoint, Vec3,
};

/// Gap `γ` of the ratio lemma used by the volume condition.
pub const RATIO_GAMMA: f64 = 0.01;

fn powered(base: &LatticeAutomorphism, n: u32) -> Result<(LatticeAutomorphism, EigenFrame)> {
    if n == 0 {
        return Err(Error::invalid("power n must be at least 1"));
    }
    let frame = eigen_decompose(base)?;
    Ok((base.pow(2 * n)?, power_eigen(&frame, 2 * n)?))
}

/// Parameters of the volume-expanding family `f_k = I_k ∘ A`, `A = base^{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PveParams {
    pub base: LatticeAutomorphism,
    pub n: u32,
    pub k: u64,
    pub bump: BumpProfile,
    pub m: f64,
    pub kappa: f64,
    pub epsilon: f64,
    pub linear: LatticeAutomorphism,
    pub eigen: EigenFrame,
    pub chart: BoxChart,
}

impl PveParams {
    /// Validates every spectral and cone-size condition; the deformation is
    /// centred at the origin.
    pub fn new(
        base: LatticeAutomorphism,
        n: u32,
        k: u64,
        bump: BumpProfile,
        m: f64,
        kappa: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let (linear, eigen) = powered(&base, n)?;
        let chart = BoxChart::for_delta(TorusPoint::ORIGIN, eigen, bump.delta())?;
        let params = PveParams { base, n, k, bump, m, kappa, epsilon, linear, eigen, chart };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.m >= 0.0) {
            return Err(Error::invalid("m must be non-negative"));
        }
        let big_m = ratio_bound_constants(RATIO_GAMMA)?.big_m;
        let spec = pve_spectral_margins(self.eigen.values(), self.m, big_m);
        if !spec.all_hold() {
            return Err(Error::Inconsistent(format!("spectral conditions fail at n = {}: {spec:?}", self.n)));
        }
        if !(self.kappa > 0.0) || center_expansion_margin(self.kappa, self.lambda_s()) <= 0.0 {
            return Err(Error::Inconsistent(format!("kappa = {} violates the center-expansion condition", self.kappa)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= self.kappa) {
            return Err(Error::Inconsistent(format!("epsilon = {} must lie in (0, kappa]", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_k(&self, k: u64) -> Result<Self> {
        let mut p = self.clone();
        p.k = k;
        p.validate()?;
        Ok(p)
    }

    pub fn delta(&self) -> f64 {
        self.bump.delta()
    }
    pub fn lambda_uu(&self) -> f64 {
        self.eigen.value(0)
    }
    pub fn lambda_s(&self) -> f64 {
        self.eigen.value(1)
    }
    pub fn lambda_ss(&self) -> f64 {
        self.eigen.value(2)
    }
}

/// Parameters of the mixed family `G_k = B ∘ J_k`, `B = base^{2n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedParams {
    pub base: LatticeAutomorphism,
    pub n: u32,
    pub k: u64,
    pub bump: BumpProfile,
    pub m: f64,
    pub kappa2: f64,
    pub epsilon: f64,
    pub linear: LatticeAutomorphism,
    pub eigen: EigenFrame,
    /// Charts at `q₁` (origin, center-unstable slowed down) and `q₂`
    /// (center-stable reversed).
    pub charts: [BoxChart; 2],
}

impl MixedParams {
    pub fn new(
        base: LatticeAutomorphism,
        n: u32,
        k: u64,
        bump: BumpProfile,
        m: f64,
        kappa2: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let (linear, eigen) = powered(&base, n)?;
        let fps = fixed_points(&base)?;
        if fps.len() != 2 {
            return Err(Error::UnsupportedMatrix(format!(
                "mixed construction needs exactly two fixed points, found {}",
                fps.len()
            )));
        }
        let charts =
            [BoxChart::for_delta(fps[0], eigen, bump.delta())?, BoxChart::for_delta(fps[1], eigen, bump.delta())?];
        let params = MixedParams { base, n, k, bump, m, kappa2, epsilon, linear, eigen, charts };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !boxes_disjoint(&self.charts[0].center, &self.charts[1].center, 5.0 * self.delta()) {
            return Err(Error::Inconsistent("5δ boxes around the two fixed points intersect".into()));
        }
        let spec = mixed_spectral_margins(self.eigen.values(), self.m);
        if !spec.all_hold() {
            return Err(Error::Inconsistent(format!("spectral conditions fail at n = {}: {spec:?}", self.n)));
        }
        if !(self.kappa2 > 0.0)
            || mixed_expansion_margin(self.kappa2, self.lambda_u()) <= 0.0
            || mixed_contraction_margin(self.kappa2, self.lambda_ss()) <= 0.0
        {
            return Err(Error::Inconsistent(format!("kappa2 = {} violates the center-rate conditions", self.kappa2)));
        }
        if !(self.epsilon > 0.0 && 2.0 * self.epsilon * self.epsilon <= self.kappa2 * self.kappa2) {
            return Err(Error::Inconsistent(format!("epsilon = {} violates 2ε² ≤ κ₂²", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_k(&self, k: u64) -> Result<Self> {
        let mut p = self.clone();
        p.k = k;
        p.validate()?;
        Ok(p)
    }

    pub fn delta(&self) -> f64 {
        self.bump.delta()
    }
    pub fn lambda_uu(&self) -> f64 {
        self.eigen.value(0)
    }
    pub fn lambda_u(&self) -> f64 {
        self.eigen.value(1)
    }
    pub fn lambda_ss(&self) -> f64 {
        self.eigen.value(2)
    }
}

/// Value and gradient of a deformation in local coordinates `(a, b, c)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partials {
    pub value: f64,
    pub da: f64,
    pub db: f64,
    pub dc: f64,
}

impl Partials {
    pub fn gradient(&self) -> Vec3 {
        Vec3::new(self.da, self.db, self.dc)
    }
}

/// `S = ψ(kt)ψ(r)(1/2 - γ)t + γt` with `r = |(u, v)|`, and its partials
/// `(S_t, S_u, S_v)`.
fn shear(bump: &BumpProfile, k: f64, gamma: f64, t: f64, u: f64, v: f64) -> (f64, f64, f64, f64) {
    let r = u.hypot(v);
    let (pk, dpk) = bump.psi_both(k * t);
    let (pr, dpr) = bump.psi_both(r);
    let coeff = 0.5 - gamma;
    let value = pk * pr * coeff * t + gamma * t;
    let dt = coeff * pr * (k * t * dpk + pk) + gamma;
    let (du, dv) = if r > 0.0 && dpr != 0.0 {
        let common = pk * coeff * t * dpr / r;
        (common * u, common * v)
    } else {
        (0.0, 0.0)
    };
    (value, dt, du, dv)
}

/// `P(a,b,c) = ψ(kb)ψ(√(a²+c²))(1/2 - 1/λ_s)b + b/λ_s` and its partials.
pub fn deformation_p(params: &PveParams, a: f64, b: f64, c: f64) -> Partials {
    let (value, db, da, dc) = shear(&params.bump, params.k as f64, 1.0 / params.lambda_s(), b, a, c);
    Partials { value, da, db, dc }
}

/// Which of the two mixed deformations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixedBox {
    /// `Q₁ = φ(kb)φ(√(a²+c²))(1/2 - λ_u)b + λ_u b`.
    First,
    /// `Q₂ = φ(kc)φ(√(a²+b²))(1/2 - 1/λ_ss)c + c/λ_ss`.
    Second,
}

pub fn deformation_q(params: &MixedParams, which: MixedBox, a: f64, b: f64, c: f64) -> Partials {
    let k = params.k as f64;
    match which {
        MixedBox::First => {
            let (value, db, da, dc) = shear(&params.bump, k, params.lambda_u(), b, a, c);
            Partials { value, da, db, dc }
        }
        MixedBox::Second => {
            let (value, dc, da, db) = shear(&params.bump, k, 1.0 / params.lambda_ss(), c, a, b);
            Partials { value, da, db, dc }
        }
    }
}

/// A one-coordinate warp `t ↦ t(1 + ψ(kt)ψ(r)(θ/2 - 1))` inside a box chart,
/// applied either directly or through its inverse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Warp {
    pub chart: BoxChart,
    pub bump: BumpProfile,
    pub k: f64,
    pub axis: usize,
    pub theta: f64,
    pub inverted: bool,
}

const NEWTON_MAX_ITERS: usize = 60;

impl Warp {
    #[inline]
    fn others(&self) -> (usize, usize) {
        match self.axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        }
    }

    #[inline]
    fn beta(&self) -> f64 {
        0.5 * self.theta - 1.0
    }

    /// `ψ(r)·β` when the point's transverse radius is in the support.
    #[inline]
    fn radial(&self, l: &Vec3) -> Option<(f64, f64)> {
        let (i, j) = self.others();
        let r = l[i].hypot(l[j]);
        let d = self.bump.delta();
        if r >= d || (self.k * l[self.axis]).abs() >= d {
            return None;
        }
        let rho = self.bump.psi(r) * self.beta();
        if rho == 0.0 {
            None
        } else {
            Some((r, rho))
        }
    }

    /// Displacement along the axis, or `None` outside the support.
    fn displacement(&self, l: &Vec3) -> Result<Option<f64>> {
        let Some((_, rho)) = self.radial(l) else {
            return Ok(None);
        };
        let t = l[self.axis];
        if !self.inverted {
            return Ok(Some(t * self.bump.psi(self.k * t) * rho));
        }
        if t == 0.0 {
            return Ok(Some(0.0));
        }
        let s = self.solve(t, rho)?;
        Ok(Some(s - t))
    }

    /// Solves `s(1 + ρψ(ks)) = t` on the support interval by safeguarded Newton.
    fn solve(&self, t: f64, rho: f64) -> Result<f64> {
        let edge = self.bump.delta() / self.k;
        let (mut lo, mut hi) = (-edge, edge);
        let h = |s: f64| {
            let (p, dp) = self.bump.psi_both(self.k * s);
            (s * (1.0 + rho * p) - t, 1.0 + rho * (self.k * s * dp + p))
        };
        let mut s = (t / (1.0 + rho)).clamp(lo, hi);
        for _ in 0..NEWTON_MAX_ITERS {
            let (f, df) = h(s);
            // residual at the rounding level of `s(1 + ρψ)`
            if f.abs() <= 4.0 * f64::EPSILON * s.abs() {
                return Ok(s);
            }
            if f < 0.0 {
                lo = s;
            } else {
                hi = s;
            }
            let mut next = s - f / df;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let tol = 4.0 * f64::EPSILON * next.abs().max(f64::MIN_POSITIVE);
            if (next - s).abs() <= tol || hi - lo <= tol {
                return Ok(next);
            }
            s = next;
        }
        Err(Error::Numerical(format!(
            "warp inversion did not converge: target {t:e}, bracket [{lo:e}, {hi:e}], last iterate {s:e}"
        )))
    }

    /// Forward warp `W` applied to the axis coordinate of `l`.
    fn forward_axis_value(&self, l: &Vec3) -> f64 {
        let t = l[self.axis];
        match self.radial(l) {
            Some((_, rho)) => t * (1.0 + rho * self.bump.psi(self.k * t)),
            None => t,
        }
    }

    /// Gradient of the forward warp `W` at local point `l`.
    fn forward_gradient(&self, l: &Vec3) -> Vec3 {
        let mut g = Vec3::zeros();
        g[self.axis] = 1.0;
        let Some((r, rho)) = self.radial(l) else {
            return g;
        };
        let t = l[self.axis];
        let (pk, dpk) = self.bump.psi_both(self.k * t);
        g[self.axis] = 1.0 + rho * (self.k * t * dpk + pk);
        let dpr = self.bump.psi_prime(r);
        if r > 0.0 && dpr != 0.0 {
            let (i, j) = self.others();
            let common = self.beta() * pk * t * dpr / r;
            g[i] = common * l[i];
            g[j] = common * l[j];
        }
        g
    }

    /// Row `axis` of the warp's derivative, given the input point `l` and its
    /// image `out`.
    fn derivative_row(&self, l: &Vec3, out: &Vec3) -> Vec3 {
        if !self.inverted {
            return self.forward_gradient(l);
        }
        let g = self.forward_gradient(out);
        let inv = 1.0 / g[self.axis];
        let mut row = -g * inv;
        row[self.axis] = inv;
        row
    }

    /// Local coordinates if the point lies near enough to be affected.
    #[inline]
    fn locate(&self, x: &PrecisePoint) -> Option<Vec3> {
        let l = self.chart.try_local(&x.base)?;
        let bound = self.chart.half_width_inner;
        if l.iter().any(|c| c.abs() >= bound) {
            return None;
        }
        Some(l + self.chart.frame.to_frame(&x.offset))
    }
}

/// One direction of a map: an integer linear part composed with warps.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MapPart {
    pub linear: LatticeAutomorphism,
    pub spectrum: [f64; 3],
    pub deform_first: bool,
    pub warps: Vec<Warp>,
}

/// The active warp at `x`, with local coordinates before and after.
struct Hit<'a> {
    warp: &'a Warp,
    before: Vec3,
    after: Vec3,
}

impl MapPart {
    fn deform(&self, x: &PrecisePoint) -> Result<(PrecisePoint, Option<Hit<'_>>)> {
        for w in &self.warps {
            let Some(l) = w.locate(x) else { continue };
            let Some(d) = w.displacement(&l)? else { continue };
            let mut after = l;
            after[w.axis] += d;
            let moved = if d == 0.0 { *x } else { x.shifted(&(w.chart.frame.vector(w.axis) * d))? };
            return Ok((moved, Some(Hit { warp: w, before: l, after })));
        }
        Ok((*x, None))
    }

    fn apply_precise(&self, x: &PrecisePoint) -> Result<PrecisePoint> {
        Ok(self.apply_with_hit(x)?.0)
    }

    fn apply_with_hit(&self, x: &PrecisePoint) -> Result<(PrecisePoint, Option<Hit<'_>>)> {
        if self.deform_first {
            let (y, hit) = self.deform(x)?;
            Ok((self.linear.apply_precise(&y)?, hit))
        } else {
            let y = self.linear.apply_precise(x)?;
            self.deform(&y)
        }
    }

    fn jacobian_from_hit(&self, hit: Option<Hit<'_>>) -> Matrix3<f64> {
        let lin = Matrix3::from_diagonal(&Vec3::from(self.spectrum));
        let Some(hit) = hit else { return lin };
        let mut dt = Matrix3::identity();
        let row = hit.warp.derivative_row(&hit.before, &hit.after);
        dt.set_row(hit.warp.axis, &row.transpose());
        if self.deform_first {
            lin * dt
        } else {
            dt * lin
        }
    }

    fn step(&self, x: &PrecisePoint) -> Result<(PrecisePoint, Matrix3<f64>)> {
        let (y, hit) = self.apply_with_hit(x)?;
        Ok((y, self.jacobian_from_hit(hit)))
    }
}

/// The three constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    PveF,
    PveInverseG,
    MixedG,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::PveF => "pve-f",
            Variant::PveInverseG => "pve-inverse-g",
            Variant::MixedG => "mixed-G",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum SystemParams {
    Pve(PveParams),
    Mixed(MixedParams),
}

/// A fully parameterised deformed automorphism with its inverse.
///
/// Jacobians are expressed in the eigenframe of the linear part, axes ordered
/// `(uu, mid, ss)` by the base matrix's spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct DaSystem {
    variant: Variant,
    params: SystemParams,
    frame: EigenFrame,
    forward: MapPart,
    inverse: MapPart,
}

fn inverted_spectrum(s: [f64; 3]) -> [f64; 3] {
    s.map(|v| 1.0 / v)
}

impl DaSystem {
    /// `f_k = I_k ∘ A`, with `I_k` obtained by inverting `b ↦ λ_s P(a,b,c)`.
    pub fn pve_f(params: &PveParams) -> Self {
        let spec = params.eigen.values();
        let warp = Warp {
            chart: params.chart,
            bump: params.bump,
            k: params.k as f64,
            axis: 1,
            theta: params.lambda_s(),
            inverted: true,
        };
        DaSystem {
            variant: Variant::PveF,
            params: SystemParams::Pve(params.clone()),
            frame: params.eigen,
            forward: MapPart { linear: params.linear, spectrum: spec, deform_first: false, warps: vec![warp] },
            inverse: MapPart {
                linear: params.linear.inverse(),
                spectrum: inverted_spectrum(spec),
                deform_first: true,
                warps: vec![Warp { inverted: false, ..warp }],
            },
        }
    }

    /// `g_k = f_k⁻¹ = A⁻¹ ∘ I_k⁻¹`.
    pub fn pve_g(params: &PveParams) -> Self {
        let f = DaSystem::pve_f(params);
        DaSystem {
            variant: Variant::PveInverseG,
            params: f.params,
            frame: f.frame,
            forward: f.inverse,
            inverse: f.forward,
        }
    }

    /// `G_k = B ∘ J_k`.
    pub fn mixed_g(params: &MixedParams) -> Self {
        let spec = params.eigen.values();
        let k = params.k as f64;
        let w1 = Warp {
            chart: params.charts[0],
            bump: params.bump,
            k,
            axis: 1,
            theta: 1.0 / params.lambda_u(),
            inverted: false,
        };
        let w2 =
            Warp { chart: params.charts[1], bump: params.bump, k, axis: 2, theta: params.lambda_ss(), inverted: true };
        DaSystem {
            variant: Variant::MixedG,
            params: SystemParams::Mixed(params.clone()),
            frame: params.eigen,
            forward: MapPart { linear: params.linear, spectrum: spec, deform_first: true, warps: vec![w1, w2] },
            inverse: MapPart {
                linear: params.linear.inverse(),
                spectrum: inverted_spectrum(spec),
                deform_first: false,
                warps: vec![Warp { inverted: true, ..w1 }, Warp { inverted: false, ..w2 }],
            },
        }
    }

    pub fn from_params(params: &SystemParams, variant: Variant) -> Result<Self> {
        match (params, variant) {
            (SystemParams::Pve(p), Variant::PveF) => Ok(DaSystem::pve_f(p)),
            (SystemParams::Pve(p), Variant::PveInverseG) => Ok(DaSystem::pve_g(p)),
            (SystemParams::Mixed(p), Variant::MixedG) => Ok(DaSystem::mixed_g(p)),
            _ => Err(Error::invalid(format!("parameters do not match variant {}", variant.name()))),
        }
    }

    /// The same system with sharpness `k`.
    pub fn with_k(&self, k: u64) -> Result<Self> {
        let params = match &self.params {
            SystemParams::Pve(p) => SystemParams::Pve(p.with_k(k)?),
            SystemParams::Mixed(p) => SystemParams::Mixed(p.with_k(k)?),
        };
        DaSystem::from_params(&params, self.variant)
    }

    /// The undeformed linear automorphism with the same frame and roles.
    pub fn linearized(&self) -> Self {
        let mut s = self.clone();
        s.forward.warps.clear();
        s.inverse.warps.clear();
        s
    }

    pub fn is_linear(&self) -> bool {
        self.forward.warps.is_empty()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn frame(&self) -> &EigenFrame {
        &self.frame
    }

    /// Eigenvalues of the linear part of the forward map along the frame axes.
    pub fn spectrum(&self) -> [f64; 3] {
        self.forward.spectrum
    }

    pub fn linear_part(&self) -> &LatticeAutomorphism {
        &self.forward.linear
    }

    /// Points whose image (or preimage, for `inverse`) passes through a
    /// deformation band, on a `per_axis³` grid per box. The warp axis spans
    /// `band` times the band half-width `δ/k`; the transverse axes span
    /// `transverse` times `δ`. For an inverted warp the grid is uniform in the
    /// warp's output, so the compressed plateau is resolved.
    pub fn deformation_grid(&self, inverse: bool, per_axis: usize, band: f64, transverse: f64) -> Vec<TorusPoint> {
        let part = if inverse { &self.inverse } else { &self.forward };
        let mut out = Vec::new();
        let pre = part.linear.inverse();
        for w in &part.warps {
            let d = w.bump.delta();
            let widths = {
                let mut v = [transverse * d; 3];
                v[w.axis] = band * d / w.k;
                v
            };
            let coord = |i: usize, h: f64| -h + 2.0 * h * (i as f64 + 0.5) / per_axis as f64;
            for i in 0..per_axis {
                for j in 0..per_axis {
                    for l in 0..per_axis {
                        let mut loc = Vec3::new(coord(i, widths[0]), coord(j, widths[1]), coord(l, widths[2]));
                        if w.inverted {
                            loc[w.axis] = w.forward_axis_value(&loc);
                        }
                        let y = w.chart.from_local(&loc);
                        out.push(if part.deform_first { y } else { pre.apply_mod1(&y) });
                    }
                }
            }
        }
        out
    }

    /// Frame axis of the strong-unstable direction.
    pub fn unstable_axis(&self) -> usize {
        match self.variant {
            Variant::PveF | Variant::MixedG => 0,
            Variant::PveInverseG => 2,
        }
    }

    /// Frame axis of the strong-stable direction.
    pub fn stable_axis(&self) -> usize {
        2 - self.unstable_axis()
    }

    pub fn cone_epsilon(&self) -> f64 {
        match &self.params {
            SystemParams::Pve(p) => p.epsilon,
            SystemParams::Mixed(p) => p.epsilon,
        }
    }

    pub fn k(&self) -> u64 {
        match &self.params {
            SystemParams::Pve(p) => p.k,
            SystemParams::Mixed(p) => p.k,
        }
    }

    pub fn charts(&self) -> Vec<BoxChart> {
        match &self.params {
            SystemParams::Pve(p) => vec![p.chart],
            SystemParams::Mixed(p) => p.charts.to_vec(),
        }
    }

    pub fn apply(&self, x: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.forward.apply_precise(&PrecisePoint::new(*x))?.rounded())
    }

    pub fn apply_inverse(&self, x: &TorusPoint) -> Result<TorusPoint> {
        Ok(self.inverse.apply_precise(&PrecisePoint::new(*x))?.rounded())
    }

    pub fn apply_precise(&self, x: &PrecisePoint) -> Result<PrecisePoint> {
        self.forward.apply_precise(x)
    }

    pub fn apply_inverse_precise(&self, x: &PrecisePoint) -> Result<PrecisePoint> {
        self.inverse.apply_precise(x)
    }

    pub fn jacobian(&self, x: &TorusPoint) -> Result<Matrix3<f64>> {
        Ok(self.forward.step(&PrecisePoint::new(*x))?.1)
    }

    pub fn inverse_jacobian(&self, x: &TorusPoint) -> Result<Matrix3<f64>> {
        Ok(self.inverse.step(&PrecisePoint::new(*x))?.1)
    }

    /// Image and frame Jacobian in one evaluation.
    pub fn step(&self, x: &PrecisePoint) -> Result<(PrecisePoint, Matrix3<f64>)> {
        self.forward.step(x)
    }

    pub fn step_inverse(&self, x: &PrecisePoint) -> Result<(PrecisePoint, Matrix3<f64>)> {
        self.inverse.step(x)
    }

    /// Derivative of `g` along the invariant center axis.
    pub fn center_derivative(&self, x: &TorusPoint) -> Result<f64> {
        let (Variant::PveInverseG, SystemParams::Pve(p)) = (self.variant, &self.params) else {
            return Err(Error::UnsupportedVariant(self.variant.name().into()));
        };
        if self.is_linear() {
            return Ok(1.0 / p.lambda_s());
        }
        match p.chart.try_local(x) {
            Some(l) if p.chart.inner_contains(&l) => Ok(deformation_p(p, l[0], l[1], l[2]).db),
            _ => Ok(1.0 / p.lambda_s()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::BumpShape;

    fn pve(k: u64) -> PveParams {
        let bump = BumpProfile::new(1.0 / 1024.0, BumpShape::SmoothstepExp).unwrap();
        PveParams::new(LatticeAutomorphism::named("D").unwrap(), 7, k, bump, 2.75, 4.0, 0.05).unwrap()
    }

    #[test]
    fn small_power_is_rejected() {
        let bump = BumpProfile::new(1.0 / 1024.0, BumpShape::SmoothstepExp).unwrap();
        let r = PveParams::new(LatticeAutomorphism::named("D").unwrap(), 6, 1, bump, 2.75, 4.0, 0.05);
        assert!(matches!(r, Err(Error::Inconsistent(_))));
    }

    #[test]
    fn origin_is_fixed_with_expected_jacobian() {
        let p = pve(64);
        let f = DaSystem::pve_f(&p);
        assert_eq!(f.apply(&TorusPoint::ORIGIN).unwrap(), TorusPoint::ORIGIN);
        let j = f.jacobian(&TorusPoint::ORIGIN).unwrap();
        assert!((j[(1, 1)] - 2.0).abs() < 1e-12);
        assert!((j[(0, 0)] - p.lambda_uu()).abs() < 1e-12 * p.lambda_uu());
    }

    #[test]
    fn p_partials_outside_band() {
        let p = pve(8);
        let b = 2.0 * p.delta() / 8.0;
        let d = deformation_p(&p, 1e-4, b, -1e-4);
        assert_eq!(d.value, b / p.lambda_s());
        assert_eq!(d.db, 1.0 / p.lambda_s());
        assert_eq!(d.da, 0.0);
    }

    #[test]
    fn center_derivative_rejects_other_variants() {
        let f = DaSystem::pve_f(&pve(1));
        assert!(matches!(f.center_derivative(&TorusPoint::ORIGIN), Err(Error::UnsupportedVariant(_))));
        let g = DaSystem::pve_g(&pve(1));
        assert!((g.center_derivative(&TorusPoint::ORIGIN).unwrap() - 0.5).abs() < 1e-12);
    }
}

use nalgebra::{Matrix2, Matrix3, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::construct::{DaSystem, SystemParams, Variant};
use crate::error::{Error, Result};
use crate::numeric::{mean_stderr, pairwise_sum};
use crate::relations::{center_expansion_margin, mixed_contraction_margin, mixed_expansion_margin};
use crate::torus::{PrecisePoint, TorusPoint, Vec3};

use super::curve::UnstableCurve;
use super::mass::{stratified_samples, SampleSpec};

/// Largest number of running-average checkpoints kept per estimate.
pub const MAX_CHECKPOINTS: usize = 50;

/// Fraction of orbits allowed to miss bundle convergence.
pub const MAX_FAILURE_RATE: f64 = 1e-3;

/// Default number of burn-in steps for bundle estimates along orbits.
pub const DEFAULT_BUNDLE_ITERS: usize = 24;

const BUNDLE_TOL: f64 = 1e-10;

const ROUNDING_TOL: f64 = 1e-9;

/// Sample mean of a time average with its standard error and the
/// sample-averaged running means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BirkhoffEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
    pub ell: usize,
    /// `(ℓ', mean over samples of the first ℓ' terms)`.
    pub partial: Vec<(usize, f64)>,
}

fn checkpoints(ell: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (1..=MAX_CHECKPOINTS).map(|i| (i * ell).div_ceil(MAX_CHECKPOINTS)).collect();
    out.dedup();
    out
}

/// Combines per-sample term sequences into a [`BirkhoffEstimate`].
fn combine(series: &[Vec<f64>], ell: usize) -> BirkhoffEstimate {
    let cps = checkpoints(ell);
    let per_sample: Vec<(f64, Vec<f64>)> = series
        .iter()
        .map(|terms| {
            let mut acc = 0.0;
            let mut partial = Vec::with_capacity(cps.len());
            let mut next = 0;
            for (i, t) in terms.iter().enumerate() {
                acc += t;
                if next < cps.len() && i + 1 == cps[next] {
                    partial.push(acc / cps[next] as f64);
                    next += 1;
                }
            }
            (pairwise_sum(terms) / ell as f64, partial)
        })
        .collect();
    let means: Vec<f64> = per_sample.iter().map(|p| p.0).collect();
    let (mean, stderr) = mean_stderr(&means);
    let partial = cps
        .iter()
        .enumerate()
        .map(|(j, &c)| {
            let col: Vec<f64> = per_sample.iter().map(|p| p.1[j]).collect();
            (c, pairwise_sum(&col) / col.len() as f64)
        })
        .collect();
    BirkhoffEstimate { mean, stderr, samples: series.len(), ell, partial }
}

/// `(1/ℓ) Σ_{n<ℓ} φ(gⁿ x)` averaged over stratified arclength samples `x`
/// of the curve.
pub fn birkhoff_average<F>(
    system: &DaSystem,
    curve: &UnstableCurve,
    ell: usize,
    spec: &SampleSpec,
    observable: F,
) -> Result<BirkhoffEstimate>
where
    F: Fn(&TorusPoint) -> Result<f64> + Sync,
{
    if ell == 0 {
        return Err(Error::invalid("time horizon must be positive"));
    }
    let samples = stratified_samples(curve, spec)?;
    let series: Vec<Vec<f64>> = samples
        .par_iter()
        .map(|(x, _)| {
            let mut p = *x;
            let mut terms = Vec::with_capacity(ell);
            for n in 0..ell {
                terms.push(observable(&p.rounded())?);
                if n + 1 < ell {
                    p = system.apply_precise(&p)?;
                }
            }
            Ok(terms)
        })
        .collect::<Result<_>>()?;
    Ok(combine(&series, ell))
}

fn pve_params(system: &DaSystem) -> Result<&crate::construct::PveParams> {
    match (system.variant(), system.params()) {
        (Variant::PveInverseG, SystemParams::Pve(p)) => Ok(p),
        (v, _) => Err(Error::UnsupportedVariant(v.name().into())),
    }
}

/// Time-averaged log center derivative of `g` with the analytic lower bound
/// it must exceed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterExponent {
    pub estimate: BirkhoffEstimate,
    pub lower_bound: f64,
}

impl CenterExponent {
    pub fn passed(&self) -> bool {
        self.estimate.mean > 0.0 && self.estimate.mean >= self.lower_bound - 3.0 * self.estimate.stderr
    }
}

pub fn center_exponent(
    system: &DaSystem,
    curve: &UnstableCurve,
    ell: usize,
    spec: &SampleSpec,
) -> Result<CenterExponent> {
    let p = pve_params(system)?;
    let estimate = birkhoff_average(system, curve, ell, spec, |x| Ok(system.center_derivative(x)?.ln()))?;
    Ok(CenterExponent { estimate, lower_bound: center_expansion_margin(p.kappa, p.lambda_s()) })
}

/// Strong-unstable, center and strong-stable exponents of `g` against the
/// time-averaged log Jacobian determinant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentDecomposition {
    pub uu: f64,
    pub center: f64,
    pub ss: f64,
    pub log_det: f64,
    /// Mean of `(uu + center + ss - log det)` per orbit.
    pub residual: f64,
    pub residual_stderr: f64,
    /// Mean of the endpoint volume term `(log V₀ - log V_ℓ)/ℓ`, which the
    /// residual equals exactly.
    pub boundary: f64,
    /// Mean absolute endpoint term.
    pub boundary_abs: f64,
    pub samples: usize,
}

impl ExponentDecomposition {
    /// The residual vanishes up to sampling error and endpoint terms, and
    /// matches the endpoint volume term to rounding.
    pub fn consistent(&self) -> bool {
        self.margin() > 0.0
    }

    /// Smaller slack of the two conditions behind [`Self::consistent`].
    pub fn margin(&self) -> f64 {
        let sampling = 3.0 * self.residual_stderr + self.boundary_abs + ROUNDING_TOL - self.residual.abs();
        let endpoint = ROUNDING_TOL - (self.residual - self.boundary).abs();
        sampling.min(endpoint)
    }
}

fn jacobian_orbit(system: &DaSystem, x: &PrecisePoint, steps: usize) -> Result<Vec<Matrix3<f64>>> {
    let mut p = *x;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, j) = system.step(&p)?;
        out.push(j);
        p = next;
    }
    Ok(out)
}

fn unit(v: Vec3) -> Result<(Vec3, f64)> {
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Numerical("tangent vector degenerated".into()));
    }
    Ok((v / n, n))
}

pub fn exponent_decomposition(
    system: &DaSystem,
    curve: &UnstableCurve,
    ell: usize,
    spec: &SampleSpec,
) -> Result<ExponentDecomposition> {
    pve_params(system)?;
    if ell == 0 {
        return Err(Error::invalid("time horizon must be positive"));
    }
    let ss_axis = system.stable_axis();
    let samples = stratified_samples(curve, spec)?;
    let rows: Vec<[f64; 6]> = samples
        .par_iter()
        .map(|(x, t)| {
            let js = jacobian_orbit(system, x, ell)?;
            let mut u = system.frame().to_frame(t).normalize();
            let e1 = Vec3::new(0.0, 1.0, 0.0);
            let mut s = Vec3::zeros();
            s[ss_axis] = 1.0;
            let mut ss_dirs = vec![Vec3::zeros(); ell + 1];
            ss_dirs[ell] = s;
            let mut ss_sum = Vec::with_capacity(ell);
            for i in (0..ell).rev() {
                let inv =
                    js[i].try_inverse().ok_or_else(|| Error::Numerical("singular Jacobian along orbit".into()))?;
                let (w, n) = unit(inv * ss_dirs[i + 1])?;
                ss_dirs[i] = w;
                ss_sum.push(-n.ln());
            }
            let volume = |a: &Vec3, b: &Vec3| Matrix3::from_columns(&[*a, e1, *b]).determinant().abs().ln();
            let v0 = volume(&u, &ss_dirs[0]);
            let (mut uu_sum, mut c_sum, mut det_sum) =
                (Vec::with_capacity(ell), Vec::with_capacity(ell), Vec::with_capacity(ell));
            for j in &js {
                let (w, n) = unit(j * u)?;
                uu_sum.push(n.ln());
                c_sum.push((j * e1).norm().ln());
                det_sum.push(j.determinant().abs().ln());
                u = w;
            }
            let v_end = volume(&u, &ss_dirs[ell]);
            let l = ell as f64;
            let (uu, c, ss, det) = (
                pairwise_sum(&uu_sum) / l,
                pairwise_sum(&c_sum) / l,
                pairwise_sum(&ss_sum) / l,
                pairwise_sum(&det_sum) / l,
            );
            Ok([uu, c, ss, det, uu + c + ss - det, (v0 - v_end) / l])
        })
        .collect::<Result<_>>()?;
    let col = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k]).collect() };
    let mean = |k: usize| mean_stderr(&col(k)).0;
    let (residual, residual_stderr) = mean_stderr(&col(4));
    let abs_b: Vec<f64> = rows.iter().map(|r| r[5].abs()).collect();
    Ok(ExponentDecomposition {
        uu: mean(0),
        center: mean(1),
        ss: mean(2),
        log_det: mean(3),
        residual,
        residual_stderr,
        boundary: mean(5),
        boundary_abs: pairwise_sum(&abs_b) / abs_b.len() as f64,
        samples: rows.len(),
    })
}

/// Center-unstable and center-stable exponents of the mixed map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedExponents {
    pub cu: BirkhoffEstimate,
    pub cs: BirkhoffEstimate,
    /// Analytic lower bound for the center-unstable exponent.
    pub cu_lower_bound: f64,
    /// Analytic upper bound for the center-stable exponent.
    pub cs_upper_bound: f64,
    pub bundle_iters: usize,
    pub failures: usize,
}

impl MixedExponents {
    pub fn passed(&self) -> bool {
        let (cu, cs) = (&self.cu, &self.cs);
        cu.mean > 0.0
            && cs.mean < 0.0
            && cu.mean.abs() > 3.0 * cu.stderr
            && cs.mean.abs() > 3.0 * cs.stderr
            && cu.mean >= self.cu_lower_bound - 3.0 * cu.stderr
            && cs.mean <= self.cs_upper_bound + 3.0 * cs.stderr
    }
}

fn center_block(j: &Matrix3<f64>) -> Matrix2<f64> {
    j.fixed_view::<2, 2>(1, 1).into_owned()
}

fn normalize2(v: Vector2<f64>) -> Result<(Vector2<f64>, f64)> {
    let n = v.norm();
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::Numerical("center vector degenerated".into()));
    }
    let mut u = v / n;
    if u[0] < 0.0 || (u[0] == 0.0 && u[1] < 0.0) {
        u = -u;
    }
    Ok((u, n))
}

/// Pushes `seed` through `mats` in order, returning the final unit vector.
fn push(mats: &[Matrix2<f64>], seed: Vector2<f64>) -> Result<Vector2<f64>> {
    mats.iter().try_fold(seed, |v, m| Ok(normalize2(m * v)?.0))
}

enum OrbitOutcome {
    Converged(Vec<f64>, Vec<f64>),
    Unconverged,
}

fn mixed_orbit(system: &DaSystem, x: &PrecisePoint, ell: usize, burn: usize) -> Result<OrbitOutcome> {
    let js = jacobian_orbit(system, x, ell + 2 * burn)?;
    let blocks: Vec<Matrix2<f64>> = js.iter().map(center_block).collect();
    let inverses: Vec<Matrix2<f64>> = blocks
        .iter()
        .map(|b| b.try_inverse().ok_or_else(|| Error::Numerical("singular center block".into())))
        .collect::<Result<_>>()?;
    let e_cu = Vector2::new(1.0, 0.0);
    let e_cs = Vector2::new(0.0, 1.0);
    // center-unstable at index `burn`, from depths `burn` and `burn - 1`
    let cu = push(&blocks[..burn], e_cu)?;
    let cu_short = push(&blocks[1..burn], e_cu)?;
    // center-stable at index `burn + ell`, pulled from the end
    let tail: Vec<Matrix2<f64>> = inverses[burn + ell..].iter().rev().copied().collect();
    let cs = push(&tail, e_cs)?;
    let cs_short = push(&tail[1..], e_cs)?;
    if (cu - cu_short).norm() > BUNDLE_TOL || (cs - cs_short).norm() > BUNDLE_TOL {
        return Ok(OrbitOutcome::Unconverged);
    }
    let mut v = cu;
    let mut cu_terms = Vec::with_capacity(ell);
    for b in &blocks[burn..burn + ell] {
        let (w, n) = normalize2(b * v)?;
        cu_terms.push(n.ln());
        v = w;
    }
    let mut w = cs;
    let mut cs_terms = vec![0.0; ell];
    for i in (burn..burn + ell).rev() {
        let (u, n) = normalize2(inverses[i] * w)?;
        cs_terms[i - burn] = -n.ln();
        w = u;
    }
    Ok(OrbitOutcome::Converged(cu_terms, cs_terms))
}

/// Birkhoff averages of `log ‖DG·v‖` along the center-unstable and
/// center-stable bundles, both inside the invariant plane transverse to the
/// strong-unstable axis. Bundles come from `bundle_iters` steps of past
/// (respectively future) orbit.
pub fn mixed_exponents(
    system: &DaSystem,
    curve: &UnstableCurve,
    ell: usize,
    bundle_iters: usize,
    spec: &SampleSpec,
) -> Result<MixedExponents> {
    let (Variant::MixedG, SystemParams::Mixed(p)) = (system.variant(), system.params()) else {
        return Err(Error::UnsupportedVariant(system.variant().name().into()));
    };
    if ell == 0 || bundle_iters < 2 {
        return Err(Error::invalid("need a positive horizon and at least two bundle iterations"));
    }
    let samples = stratified_samples(curve, spec)?;
    let outcomes: Vec<OrbitOutcome> =
        samples.par_iter().map(|(x, _)| mixed_orbit(system, x, ell, bundle_iters)).collect::<Result<_>>()?;
    let mut cu_series = Vec::with_capacity(outcomes.len());
    let mut cs_series = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    for o in outcomes {
        match o {
            OrbitOutcome::Converged(a, b) => {
                cu_series.push(a);
                cs_series.push(b);
            }
            OrbitOutcome::Unconverged => failures += 1,
        }
    }
    if failures as f64 > MAX_FAILURE_RATE * samples.len() as f64 || cu_series.is_empty() {
        return Err(Error::Numerical(format!(
            "center bundles failed to converge on {failures} of {} orbits",
            samples.len()
        )));
    }
    Ok(MixedExponents {
        cu: combine(&cu_series, ell),
        cs: combine(&cs_series, ell),
        cu_lower_bound: mixed_expansion_margin(p.kappa2, p.lambda_u()),
        cs_upper_bound: -mixed_contraction_margin(p.kappa2, p.lambda_ss()),
        bundle_iters,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoints_end_at_horizon() {
        assert_eq!(checkpoints(1000).last(), Some(&1000));
        assert_eq!(checkpoints(3), vec![1, 2, 3]);
        assert_eq!(checkpoints(1000).len(), MAX_CHECKPOINTS);
    }

    #[test]
    fn combine_of_constant_is_exact() {
        let series = vec![vec![1.0; 1000]; 7];
        let est = combine(&series, 1000);
        assert_eq!(est.mean, 1.0);
        assert_eq!(est.stderr, 0.0);
        assert!(est.partial.iter().all(|(_, v)| *v == 1.0));
    }
}

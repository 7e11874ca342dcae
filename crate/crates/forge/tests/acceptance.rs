//! Acceptance suite: one PASS/FAIL line per criterion at the pinned
//! configuration. Exits non-zero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use da_core::bump::{compute_m, forward_modification_infeasibility, BumpProfile};
use da_core::construct::DaSystem;
use da_core::relations::ratio_bound_constants;
use da_core::torus::{eigen_decompose, fixed_points, LatticeAutomorphism, PrecisePoint, TorusPoint, Vec3};
use da_core::verify::{cone_reports, pve_certify, ratio_bound_sweep};
use da_forge::{run_stages, Report, RunConfig, Stage};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn int_matrix(name: &str) -> [[i64; 3]; 3] {
    LatticeAutomorphism::named(name).unwrap().entries()
}

fn det3(m: &[[i64; 3]; 3]) -> i64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn float_matrix(m: &[[i64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j] as f64)
}

/// Eigenvalues of a symmetric integer matrix by nalgebra's symmetric solver,
/// sorted by decreasing modulus.
fn symmetric_eigenvalues(m: &[[i64; 3]; 3]) -> [f64; 3] {
    let mut v: Vec<f64> = SymmetricEigen::new(float_matrix(m)).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    [v[0], v[1], v[2]]
}

fn pinned() -> RunConfig {
    RunConfig::pinned()
}

fn stage_report(cfg: &RunConfig, stages: &[Stage]) -> Result<Report, String> {
    let report = run_stages(cfg, stages).report;
    ensure!(report.errors.is_empty(), "stage errors: {:?}", report.errors);
    Ok(report)
}

fn require_checks(report: &Report, prefix: &str) -> Result<usize, String> {
    let picked: Vec<_> = report.checks.iter().filter(|c| c.name.starts_with(prefix)).collect();
    ensure!(!picked.is_empty(), "no checks named {prefix}*");
    for c in &picked {
        ensure!(c.passed, "{} failed: {}", c.name, c.detail);
    }
    Ok(picked.len())
}

fn eigen_structure() -> Outcome {
    let d = int_matrix("D");
    let c = int_matrix("C");
    let mut worst = 0.0f64;
    for m in [&d, &c] {
        // λ³ - tr λ² + (sum of principal 2-minors) λ - det
        let tr = (m[0][0] + m[1][1] + m[2][2]) as f64;
        let minors = (m[0][0] * m[1][1] - m[0][1] * m[1][0] + m[0][0] * m[2][2] - m[0][2] * m[2][0] + m[1][1] * m[2][2]
            - m[1][2] * m[2][1]) as f64;
        let det = det3(m) as f64;
        ensure!(det.abs() == 1.0, "determinant {det}");
        let frame = ok(eigen_decompose(&LatticeAutomorphism::new(*m).unwrap()))?;
        let values = frame.values();
        for &x in &values {
            let terms = [x * x * x, -tr * x * x, minors * x, -det];
            let rel = terms.iter().sum::<f64>().abs() / terms.iter().map(|t| t.abs()).sum::<f64>();
            worst = worst.max(rel);
        }
        let product = values.iter().product::<f64>().abs();
        ensure!((product - 1.0).abs() < 1e-10, "|product| = {product}");
        let oracle = symmetric_eigenvalues(m);
        for (a, b) in values.iter().zip(oracle) {
            ensure!((a - b).abs() < 1e-10 * b.abs().max(1.0), "eigenvalue {a} vs symmetric solver {b}");
        }
    }
    ensure!(worst < 1e-10, "characteristic polynomial residual {worst:e}");
    let mut prod = [[0i64; 3]; 3];
    for (i, row) in prod.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|l| c[i][l] * d[l][j]).sum();
        }
    }
    ensure!(prod == [[1, 0, 0], [0, 1, 0], [0, 0, 1]], "C·D = {prod:?}");
    Ok(format!("char-poly residual {worst:.1e}, C·D = I"))
}

fn fixed_point_count() -> Outcome {
    let mut counts = Vec::new();
    for name in ["D", "C"] {
        let m = int_matrix(name);
        let mut shifted = m;
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= 1;
        }
        let want = det3(&shifted).unsigned_abs() as usize;
        // (M - I)p ∈ Z³ with |det| = 2 forces p ∈ ½Z³: enumerate the eight candidates
        let mut oracle = Vec::new();
        for bits in 0..8 {
            let p = [(bits & 1) as i64, ((bits >> 1) & 1) as i64, ((bits >> 2) & 1) as i64];
            let integral = (0..3).all(|i| (0..3).map(|j| shifted[i][j] * p[j]).sum::<i64>() % 2 == 0);
            if integral {
                oracle.push(TorusPoint::try_from(p.map(|v| v as f64 / 2.0)).unwrap());
            }
        }
        let lattice = LatticeAutomorphism::named(name).unwrap();
        let found = ok(fixed_points(&lattice))?;
        ensure!(
            found.len() == want && oracle.len() == want,
            "{name}: found {}, oracle {}, |det(M - I)| = {want}",
            found.len(),
            oracle.len()
        );
        for p in &found {
            ensure!(lattice.apply_mod1(p) == *p, "{name}: {p:?} is not fixed exactly");
            ensure!(oracle.contains(p), "{name}: {p:?} missing from the half-lattice oracle");
        }
        counts.push(format!("{name}: {}", found.len()));
    }
    Ok(counts.join(", "))
}

fn appendix() -> Outcome {
    let gamma = 0.01;
    let r = ok(ratio_bound_constants(gamma))?;
    let n = 100;
    let grid = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let (mut count, mut violations) = (0usize, 0usize);
    for i in 0..n {
        let u = grid(i, -r.eps0, r.eps0);
        for j in 0..n {
            let e = grid(j, -r.eps0, r.eps0);
            for l in 0..n {
                let mag = gamma * 1e4f64.powf(l as f64 / (n - 1) as f64);
                let c = if l % 2 == 0 { mag } else { -mag };
                let value = (c * c + c * u) / ((1.0 + e * e + c * c) * (1.0 + e * e));
                violations += usize::from(value < r.big_m);
                count += 1;
            }
        }
    }
    ensure!(count == 1_000_000 && violations == 0, "{violations} violations on {count} points");
    let sweep = ok(ratio_bound_sweep(gamma, 100))?;
    ensure!(sweep.passed && sweep.violations == 0, "library sweep: {} violations", sweep.violations);
    Ok(format!("M = {}, eps0 = {}, {count} points, 0 violations", r.big_m, r.eps0))
}

fn bump_contract() -> Outcome {
    let cfg = pinned();
    let delta = cfg.pve.delta;
    let p = ok(BumpProfile::new(delta, cfg.bump.profile))?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let x: f64 = rng.gen_range(-2.0 * delta..2.0 * delta);
        ensure!(p.psi(x) == p.psi(-x), "psi not even at {x}");
        ensure!(x.abs() > delta / 2.0 || p.psi(x) == 1.0, "plateau broken at {x}");
        ensure!(x.abs() < delta || p.psi(x) == 0.0, "support broken at {x}");
        ensure!(x * p.psi_prime(x) <= 0.0, "x psi'(x) > 0 at {x}");
    }
    let unit = ok(BumpProfile::new(1.0, cfg.bump.profile))?;
    let m = ok(compute_m(&unit, cfg.bump.m_grid()))?.m;
    ensure!((m - cfg.bump.m).abs() < 1e-12, "computed m {m} vs pinned {}", cfg.bump.m);
    let n = 1000;
    let mut violations = 0;
    for i in 0..n {
        let x = -1.0 + 2.0 * (i as f64 + 0.37) / n as f64;
        let a = x * unit.psi_prime(x) + unit.psi(x);
        for j in 0..n {
            let y = -1.0 + 2.0 * (j as f64 + 0.61) / n as f64;
            let v = a * unit.psi(y);
            violations += usize::from(v < -m || v > 1.0);
        }
    }
    ensure!(violations == 0, "{violations} grid points outside [-m, 1]");
    Ok(format!("m = {m}, 10^6 grid points inside [-m, 1]"))
}

/// Fourth-order central differences in frame coordinates, one step per axis.
fn fd_jacobian(system: &DaSystem, x: &PrecisePoint, steps: &[f64; 3]) -> Matrix3<f64> {
    let frame = system.frame();
    let image = |s: f64, a: usize| system.apply_precise(&x.shifted(&(frame.vector(a) * s)).unwrap()).unwrap();
    let mut j = Matrix3::zeros();
    for (a, &h) in steps.iter().enumerate() {
        let d1 = image(h, a).delta_from(&image(-h, a));
        let d2 = image(2.0 * h, a).delta_from(&image(-2.0 * h, a));
        j.set_column(a, &(frame.to_frame(&(d1 * 8.0 - d2)) / (12.0 * h)));
    }
    j
}

fn relative_error(fd: &Matrix3<f64>, an: &Matrix3<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..3 {
        for k in 0..3 {
            let scale = an.row(i).amax().max(an.column(k).amax());
            worst = worst.max((fd[(i, k)] - an[(i, k)]).abs() / scale);
        }
    }
    worst
}

fn jacobian_error(system: &DaSystem, steps: [f64; 3], seed: u64) -> f64 {
    let mut pts: Vec<PrecisePoint> =
        system.deformation_grid(false, 8, 1.6, 1.2).into_iter().map(PrecisePoint::new).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let x = TorusPoint::try_from([rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()]).unwrap();
        pts.push(PrecisePoint::new(x));
    }
    let mut worst = 0.0f64;
    for x in pts {
        let (_, an) = system.step(&x).unwrap();
        worst = worst.max(relative_error(&fd_jacobian(system, &x, &steps), &an));
    }
    worst
}

fn jacobians() -> Outcome {
    let cfg = pinned();
    const FRACTION: f64 = 1e-3;
    let f = ok(cfg.pve_f())?;
    let g = ok(cfg.pve_g())?;
    let mixed = ok(cfg.mixed_g())?;
    let d = cfg.pve.delta;
    let band = d / cfg.pve.k as f64;
    let [uu, _, ss] = f.spectrum();
    let md = cfg.mixed.delta;
    let mband = md / cfg.mixed.k as f64;
    let gss = mixed.spectrum()[2];
    let errors = [
        ("f", jacobian_error(&f, [d / uu, 0.5 * band, d / ss].map(|h| FRACTION * h), 1)),
        ("g", jacobian_error(&g, [d, band, d].map(|h| FRACTION * h), 2)),
        ("G", jacobian_error(&mixed, [md, mband, 0.5 * gss * mband].map(|h| FRACTION * h), 3)),
    ];
    for (name, e) in errors {
        ensure!(e < 1e-6, "{name}: worst relative error {e:e}");
    }
    Ok(errors.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect::<Vec<_>>().join(", "))
}

fn spectra() -> Outcome {
    let cfg = pinned();
    let f = ok(cfg.pve_f())?;
    let mixed = ok(cfg.mixed_g())?;
    let [fuu, _, fss] = f.spectrum();
    let [guu, gu, gss] = mixed.spectrum();
    let diag_error = |j: &Matrix3<f64>, want: [f64; 3]| {
        let mut worst = 0.0f64;
        for r in 0..3 {
            for c in 0..3 {
                let target = if r == c { want[r] } else { 0.0 };
                worst = worst.max((j[(r, c)] - target).abs() / want[r].abs().max(want[c].abs()).max(1.0));
            }
        }
        worst
    };
    let index = |want: [f64; 3]| want.iter().filter(|v| v.abs() > 1.0).count();
    let jf = ok(f.jacobian(&TorusPoint::ORIGIN))?;
    let want_f = [fuu, 2.0, fss];
    ensure!(diag_error(&jf, want_f) <= 1e-10 && index(want_f) == 2, "Df(p) = {jf}");
    let mut seen = Vec::new();
    for q in ok(fixed_points(&LatticeAutomorphism::named(&cfg.mixed.matrix).unwrap()))? {
        let j = ok(mixed.jacobian(&q))?;
        ensure!(ok(mixed.apply(&q))? == q, "{q:?} is not fixed by G");
        if diag_error(&j, [guu, 0.5, gss]) <= 1e-10 {
            seen.push(index([guu, 0.5, gss]));
        } else if diag_error(&j, [guu, gu, 2.0]) <= 1e-10 {
            seen.push(index([guu, gu, 2.0]));
        } else {
            return Err(format!("DG({q:?}) = {j} matches neither pattern"));
        }
    }
    seen.sort();
    ensure!(seen == [1, 3], "G unstable indices {seen:?}");
    Ok("indices f(p) 2, G(q1) 1, G(q2) 3".into())
}

fn box_preservation() -> Outcome {
    let cfg = pinned();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = 10_000;
    let mut worst = 0.0f64;
    for (label, system, deform_first) in [("f", ok(cfg.pve_f())?, false), ("G", ok(cfg.mixed_g())?, true)] {
        let lin_inv = system.linear_part().inverse();
        for chart in system.charts() {
            let h = chart.half_width_inner;
            let center = PrecisePoint::new(chart.center);
            for _ in 0..samples {
                let mut l = Vec3::new(rng.gen_range(-h..h), rng.gen_range(-h..h), rng.gen_range(-h..h));
                l[rng.gen_range(0..3)] = if rng.gen::<bool>() { h } else { -h };
                let y = PrecisePoint::new(chart.from_local(&l));
                let image = if deform_first {
                    ok(lin_inv.apply_precise(&ok(system.apply_precise(&y))?))?
                } else {
                    ok(system.apply_precise(&ok(lin_inv.apply_precise(&y))?))?
                };
                let local = chart.frame.to_frame(&image.delta_from(&center));
                let inside = local.iter().map(|c| (c.abs() - h).max(0.0)).fold(0.0, f64::max);
                let to_face = local.iter().map(|c| (c.abs() - h).abs()).fold(f64::INFINITY, f64::min);
                worst = worst.max(inside.max(to_face));
            }
        }
        let reference = system.linearized();
        let diag = Matrix3::from_diagonal(&Vec3::from(system.spectrum()));
        let mut checked = 0;
        while checked < samples {
            let x = TorusPoint::try_from([rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()]).unwrap();
            if ok(system.step(&PrecisePoint::new(x)))?.1 != diag {
                continue;
            }
            let (a, b) = (ok(system.apply(&x))?, ok(reference.apply(&x))?);
            ensure!(a.coords().map(f64::to_bits) == b.coords().map(f64::to_bits), "{label}: exterior {x:?} differs");
            checked += 1;
        }
    }
    ensure!(worst <= 1e-9, "worst boundary error {worst:e}");
    Ok(format!("worst boundary error {worst:.1e}, exterior bitwise"))
}

fn parameter_search() -> Outcome {
    let cfg = pinned();
    let report = stage_report(&cfg, &[Stage::Search])?;
    let n = require_checks(&report, "search-")?;
    let search = report.results.get("search").ok_or("no search results")?;
    ensure!(search["matches_pinned_file"] == Value::Bool(true), "search output differs from the pinned file");
    let again = stage_report(&cfg, &[Stage::Search])?;
    ensure!(again.to_json() == report.to_json(), "second search run differs");
    Ok(format!("{n} search checks, pinned file reproduced, repeat run identical"))
}

fn cones() -> Outcome {
    let cfg = pinned();
    let spec = cfg.verify.sampling();
    let mut count = 0;
    let mut worst = f64::INFINITY;
    for (label, system) in [("f", ok(cfg.pve_f())?), ("g", ok(cfg.pve_g())?), ("G", ok(cfg.mixed_g())?)] {
        for r in ok(cone_reports(&system, &spec))? {
            ensure!(r.passed, "{label} {} failed with margin {}", r.kind, r.min_margin);
            worst = worst.min(r.min_margin);
            count += 1;
        }
    }
    let mut weak = cfg.clone();
    weak.pve.k = 1;
    let reports = ok(cone_reports(&ok(weak.pve_f())?, &spec))?;
    let failed = reports.iter().find(|r| !r.passed).ok_or("k = 1 passed every cone check")?;
    ensure!(failed.witness.is_some(), "k = 1 failure carries no witness");
    Ok(format!(
        "{count} cone families, min margin {worst:.3e}; k = 1 fails {} at {:?}",
        failed.kind,
        failed.witness.as_ref().map(|w| w.point.coords())
    ))
}

fn partial_volume() -> Outcome {
    let cfg = pinned();
    let cert = ok(pve_certify(&ok(cfg.pve_f())?, &cfg.verify.sampling(), cfg.verify.direction_iters))?;
    for r in [&cert.small_c, &cert.pole, &cert.large_c, &cert.sweep, &cert.exact] {
        ensure!(r.passed, "regime {} failed: margin {}", r.kind, r.min_margin);
    }
    let min = cert.min_det_sq();
    ensure!(min >= 1.4, "min det² {min}");
    Ok(format!("every regime passes, min det² = {min}"))
}

/// Gibbs stage run shared by the envelope and mass criteria.
fn gibbs_report() -> Result<Report, String> {
    stage_report(&pinned(), &[Stage::Gibbs])
}

fn envelope(report: &Report) -> Outcome {
    let cfg = &report.config;
    let curves = report.results["gibbs"]["curves"].as_array().ok_or("no curves")?;
    ensure!(curves.len() == 10, "{} seed curves", curves.len());
    let c = report.check("length-envelope").ok_or("no envelope check")?;
    ensure!(c.passed, "{}", c.detail);
    ensure!(cfg.measure.envelope_iterates >= 50, "only {} iterates", cfg.measure.envelope_iterates);
    Ok(c.detail.clone())
}

fn gibbs_mass(report: &Report) -> Outcome {
    let cfg = &report.config;
    let kappa = cfg.pve.kappa;
    let g = ok(cfg.pve_g())?;
    let gamma = g.spectrum()[g.unstable_axis()];
    let half = (1.0 + kappa * kappa) / 2.0;
    let big_n = (1..200u32)
        .find(|&n| {
            let den = gamma.powi(n as i32) * cfg.measure.seed_length - half;
            den > 0.0 && half / den <= 0.01
        })
        .ok_or("no N")?;
    let bound = (1.0 + kappa * kappa).powf(1.5) / 100.0 + 0.01;
    let gibbs = &report.results["gibbs"];
    ensure!(gibbs["N"].as_u64() == Some(big_n as u64), "report N {} vs {big_n}", gibbs["N"]);
    let curves = gibbs["curves"].as_array().ok_or("no curves")?;
    ensure!(curves.len() == 10, "{} seed curves", curves.len());
    let mut checked = 0;
    for (i, curve) in curves.iter().enumerate() {
        for s in curve["mass_series"].as_array().ok_or("no mass series")? {
            let n = s["n"].as_u64().ok_or("bad n")?;
            if n < big_n as u64 {
                continue;
            }
            let mass = s["region_mass"].as_f64().ok_or("bad mass")?;
            let hw = s["confidence_halfwidth"].as_f64().ok_or("bad halfwidth")?;
            ensure!(mass <= bound + 3.0 * hw, "curve {i}, n {n}: mass {mass} over {bound} + 3·{hw}");
            checked += 1;
        }
        let pm = &curve["pushforward_at_n"];
        let gap = pm["discrepancy"].as_f64().ok_or("bad discrepancy")?;
        let hw = pm["stats"]["confidence_halfwidth"].as_f64().ok_or("bad halfwidth")?;
        ensure!(gap <= 3.0 * hw, "curve {i}: quadrature and Monte Carlo differ by {gap} > 3·{hw}");
    }
    Ok(format!("N = {big_n}, bound {bound:.4}, {checked} (curve, n) pairs within bound, estimators agree"))
}

fn center_exponent() -> Outcome {
    let cfg = pinned();
    let report = stage_report(&cfg, &[Stage::Center])?;
    let center = &report.results["center"];
    let mean = center["main"]["estimate"]["mean"].as_f64().ok_or("no estimate")?;
    let stderr = center["main"]["estimate"]["stderr"].as_f64().ok_or("no stderr")?;
    let kappa = cfg.pve.kappa;
    let eig = symmetric_eigenvalues(&int_matrix(&cfg.pve.matrix));
    let lambda_s = eig[1].abs().powi(2 * cfg.pve.n as i32);
    let w = (1.0 + kappa * kappa).powf(1.5) / 100.0;
    let lower = (w + 0.01) * 0.5f64.ln() + (0.99 - w) * (1.0 / lambda_s).ln();
    ensure!(mean > 0.0 && mean >= lower - 3.0 * stderr, "estimate {mean} ± {stderr} vs bound {lower}");
    let linear = center["linear"]["mean"].as_f64().ok_or("no linear value")?;
    let want = (1.0 / lambda_s).ln();
    ensure!((linear - want).abs() < 1e-9, "linear value {linear} vs log(1/λs) = {want}");
    require_checks(&report, "center-exponent")?;
    Ok(format!("{mean} ± {stderr:.1e} against bound {lower:.6}; linear {linear}"))
}

fn mixed_exponents() -> Outcome {
    let cfg = pinned();
    let report = stage_report(&cfg, &[Stage::Mixed])?;
    let e = &report.results["mixed"]["exponents"];
    let get = |k: &str, f: &str| e[k][f].as_f64().ok_or(format!("missing {k}.{f}"));
    let (cu, cu_se, cs, cs_se) = (get("cu", "mean")?, get("cu", "stderr")?, get("cs", "mean")?, get("cs", "stderr")?);
    ensure!(cu > 0.0 && cu.abs() > 3.0 * cu_se, "cu {cu} ± {cu_se}");
    ensure!(cs < 0.0 && cs.abs() > 3.0 * cs_se, "cs {cs} ± {cs_se}");
    let witnesses = report.results["mixed"]["witnesses"].as_array().ok_or("no witnesses")?;
    let rates: Vec<f64> = witnesses.iter().filter_map(|w| w["rate"].as_f64()).collect();
    ensure!(rates.len() == 2, "witnesses {witnesses:?}");
    ensure!((rates[0] - 0.5).abs() < 1e-9 && (rates[1] - 2.0).abs() < 1e-9, "witness rates {rates:?}");
    require_checks(&report, "mixed-")?;
    Ok(format!("cu {cu} ± {cu_se:.1e}, cs {cs} ± {cs_se:.1e}, rates {rates:?}"))
}

fn forward_modification() -> Outcome {
    let cfg = pinned();
    let p = ok(cfg.pve_params())?;
    let lambda = p.lambda_ss();
    let v = ok(forward_modification_infeasibility(&p.bump, cfg.bump.m, lambda, p.k as f64))?;
    let lhs = 1.0 / (1.0 - 2.0 / lambda);
    ensure!(lhs >= -cfg.bump.m && !v.holds, "relation holds: {lhs} < {}", -cfg.bump.m);
    let w = v.witness.ok_or("no witness")?;
    let kc = p.k as f64 * w.c;
    let b = &p.bump;
    let derivative = (kc * b.psi_prime(kc) + b.psi(kc)) * b.psi(w.r) * (2.0 - lambda) + lambda;
    ensure!(derivative <= 0.0, "witness derivative re-evaluates to {derivative}");
    Ok(format!("{lhs} vs -m = {}, witness (c, r) = ({}, {}) with ∂R/∂c = {derivative}", -cfg.bump.m, w.c, w.r))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut failures = 0;
    let mut record = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = Duration::as_secs_f64(&t.elapsed());
        match outcome {
            Ok(detail) => println!("PASS {n:>2} {name} ({secs:.1} s): {detail}"),
            Err(why) => {
                failures += 1;
                println!("FAIL {n:>2} {name} ({secs:.1} s): {why}");
            }
        }
    };
    record(1, "eigen-structure", &mut eigen_structure);
    record(2, "fixed-points", &mut fixed_point_count);
    record(3, "ratio-bound-grid", &mut appendix);
    record(4, "bump-contract", &mut bump_contract);
    record(5, "jacobian-finite-differences", &mut jacobians);
    record(6, "fixed-point-spectra", &mut spectra);
    record(7, "box-preservation", &mut box_preservation);
    record(8, "parameter-search", &mut parameter_search);
    record(9, "cone-certification", &mut cones);
    record(10, "partial-volume-expansion", &mut partial_volume);
    let gibbs = gibbs_report();
    record(11, "expansion-envelope", &mut || envelope(gibbs.as_ref().map_err(Clone::clone)?));
    record(12, "gibbs-mass-bound", &mut || gibbs_mass(gibbs.as_ref().map_err(Clone::clone)?));
    record(13, "center-exponent", &mut center_exponent);
    record(14, "mixed-exponents", &mut mixed_exponents);
    record(15, "forward-modification-infeasible", &mut forward_modification);
    println!("{} of 15 criteria passed in {:.1} s", 15 - failures, start.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use da_core::bump::{compute_m, forward_modification_infeasibility, BumpProfile};
use da_core::construct::DaSystem;
use da_core::measure::{
    birkhoff_average, center_exponent, exponent_decomposition, length_envelope, mass_series, mixed_exponents,
    pushforward_mass, seed_curve, Region, UnstableCurve,
};
use da_core::relations::{first_mass_iterate, mass_bound, ratio_bound_constants};
use da_core::torus::{eigen_decompose, fixed_points, power_eigen, LatticeAutomorphism, TorusPoint};
use da_core::verify::{
    center_bundles, center_rate_bounds, cone_reports, default_epsilon, fixed_point_spectrum, pve_certify,
    ratio_bound_sweep, search_k, search_kappa, search_n, slope_delta_search, starred_entry_bound, CertReport,
    SearchFamily,
};

use crate::checks::{box_preservation, diagonal_deviation, eigen_summary, round_trip_error};
use crate::config::{ConfigError, RunConfig, Scenario, PINNED_DEFAULTS};
use crate::report::{Check, FailureKind, Report, Series, StageError, Timings};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

pub struct RunOutput {
    pub report: Report,
    pub timings: Timings,
}

/// Relative tolerance for exact diagonal Jacobians at the fixed points.
const SPECTRUM_TOL: f64 = 1e-10;
/// Minimum squared partial-volume determinant the certification must reach.
const PVE_DET_SQ_FLOOR: f64 = 1.4;
/// Box-preservation tolerance in local coordinates.
const BOX_TOL: f64 = 1e-9;
/// Tolerance for exact rates and constant-observable averages.
const EXACT_TOL: f64 = 1e-9;

/// Builds the stages of a scenario.
pub fn stages(scenario: Scenario) -> &'static [Stage] {
    use Stage::*;
    match scenario {
        Scenario::ConstructPve => &[Construct, Cones, Pve],
        Scenario::VerifyCones => &[Cones],
        Scenario::VerifyPve => &[Pve],
        Scenario::SearchParams => &[Search],
        Scenario::GibbsMass => &[Gibbs],
        Scenario::CenterExponent => &[Center],
        Scenario::MixedExponents => &[Spectra, Rates, Mixed],
        Scenario::AppendixCheck => &[Appendix],
        Scenario::FullPaper => {
            &[Eigen, BumpBound, Appendix, Search, Construct, Cones, Pve, Spectra, Rates, Gibbs, Center, Mixed]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Eigen,
    BumpBound,
    Appendix,
    Search,
    Construct,
    Cones,
    Pve,
    Spectra,
    Rates,
    Gibbs,
    Center,
    Mixed,
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Eigen => "eigen",
            Stage::BumpBound => "bump",
            Stage::Appendix => "appendix",
            Stage::Search => "search",
            Stage::Construct => "construct",
            Stage::Cones => "cones",
            Stage::Pve => "pve",
            Stage::Spectra => "spectra",
            Stage::Rates => "rates",
            Stage::Gibbs => "gibbs",
            Stage::Center => "center",
            Stage::Mixed => "mixed",
        }
    }
}

/// Runs the configured scenario on a worker pool of the configured size.
pub fn run(config: &RunConfig) -> Result<RunOutput, RunError> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.workers).build()?;
    Ok(pool.install(|| run_stages(config, stages(config.scenario))))
}

/// Runs an explicit list of stages; used by [`run`] and by tests.
pub fn run_stages(config: &RunConfig, list: &[Stage]) -> RunOutput {
    let start = Instant::now();
    let mut ctx = Ctx { cfg: config, report: Report::new(config), timings: Timings::default() };
    for &stage in list {
        let t = Instant::now();
        if let Err(e) = ctx.dispatch(stage) {
            let kind = if e.is_numerical() { FailureKind::Numerical } else { FailureKind::Invalid };
            ctx.report.errors.push(StageError { stage: stage.name().into(), kind, message: e.to_string() });
        }
        ctx.timings.stages.push((stage.name().into(), t.elapsed().as_secs_f64()));
    }
    ctx.report.finish();
    ctx.timings.total_seconds = start.elapsed().as_secs_f64();
    RunOutput { report: ctx.report, timings: ctx.timings }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    report: Report,
    timings: Timings,
}

type R = da_core::Result<()>;

impl Ctx<'_> {
    fn dispatch(&mut self, stage: Stage) -> R {
        match stage {
            Stage::Eigen => self.eigen(),
            Stage::BumpBound => self.bump(),
            Stage::Appendix => self.appendix(),
            Stage::Search => self.search(),
            Stage::Construct => self.construct(),
            Stage::Cones => self.cones(),
            Stage::Pve => self.pve(),
            Stage::Spectra => self.spectra(),
            Stage::Rates => self.rates(),
            Stage::Gibbs => self.gibbs(),
            Stage::Center => self.center(),
            Stage::Mixed => self.mixed(),
        }
    }

    fn check(&mut self, c: Check) {
        self.report.checks.push(c);
    }

    fn cert(&mut self, prefix: &str, r: &CertReport) {
        let detail = match &r.witness {
            Some(w) => format!("{} samples, worst at {:?}", r.samples, w.point.coords()),
            None => format!("{} samples", r.samples),
        };
        self.check(Check::new(format!("{prefix}{}", r.kind), r.passed, Some(r.min_margin), detail));
    }

    fn record<T: Serialize>(&mut self, key: &str, value: &T) {
        let v = serde_json::to_value(value).expect("results serialise");
        self.report.results.insert(key.into(), v);
    }

    fn eigen(&mut self) -> R {
        let names = [self.cfg.pve.matrix.clone(), self.cfg.mixed.matrix.clone()];
        let mut summaries = Vec::new();
        for name in &names {
            let s = eigen_summary(name)?;
            self.check(Check::margin(
                format!("eigen-{name}-char-poly"),
                1e-10 - s.char_poly_residual,
                format!("eigenvalues {:?}, residual {:e}", s.eigenvalues, s.char_poly_residual),
            ));
            self.check(Check::margin(
                format!("eigen-{name}-unimodular"),
                1e-10 - s.product_residual,
                format!("|Πλ| - 1 = {:e}", s.product_residual),
            ));
            self.check(Check::new(
                format!("fixed-points-{name}"),
                s.fixed_points_exact && s.fixed_points.len() as i64 == s.expected_fixed_points,
                None,
                format!("{} found, |det(M - I)| = {}", s.fixed_points.len(), s.expected_fixed_points),
            ));
            summaries.push(s);
        }
        let a = LatticeAutomorphism::named(&names[0])?;
        let b = LatticeAutomorphism::named(&names[1])?;
        let prod = a.mul(&b)?;
        self.check(Check::new(
            "inverse-pair",
            prod.is_identity(),
            None,
            format!("{} · {} = {:?}", names[0], names[1], prod.entries()),
        ));
        self.record("eigen", &summaries);
        Ok(())
    }

    fn bump(&mut self) -> R {
        let unit = BumpProfile::new(1.0, self.cfg.bump.profile)?;
        let bound = compute_m(&unit, self.cfg.bump.m_grid())?;
        let diff = (bound.m - self.cfg.bump.m).abs();
        self.check(Check::margin("bump-m-reproduced", 1e-12 - diff, format!("computed m = {}", bound.m)));
        let p = self.cfg.pve_params()?;
        let verdict = forward_modification_infeasibility(&p.bump, self.cfg.bump.m, p.lambda_ss(), p.k as f64)?;
        self.check(Check::new(
            "forward-modification-infeasible",
            !verdict.holds && verdict.witness.is_some_and(|w| w.derivative <= 0.0),
            Some(verdict.gap),
            format!("relation value {} vs {}, witness {:?}", verdict.lhs, verdict.rhs, verdict.witness),
        ));
        self.record("bump", &serde_json::json!({ "m": bound, "forward_modification": verdict }));
        Ok(())
    }

    fn appendix(&mut self) -> R {
        let gamma = self.cfg.appendix.gamma;
        let c = ratio_bound_constants(gamma)?;
        let sweep = ratio_bound_sweep(gamma, self.cfg.appendix.grid_per_axis)?;
        self.check(Check::new(
            "appendix-ratio-bound",
            sweep.passed,
            Some(sweep.min_margin),
            format!(
                "gamma {gamma}: M = {}, eps0 = {}, {} samples, {} violations",
                c.big_m, c.eps0, sweep.samples, sweep.violations
            ),
        ));
        self.record("appendix", &sweep);
        Ok(())
    }

    fn search(&mut self) -> R {
        let cfg = self.cfg;
        let unit = BumpProfile::new(1.0, cfg.bump.profile)?;
        let m = compute_m(&unit, cfg.bump.m_grid())?.m;
        let mut found = cfg.clone();
        found.bump.m = m;
        let mut results = serde_json::Map::new();
        let sampling = cfg.verify.sampling();
        for family in [SearchFamily::Pve, SearchFamily::Mixed] {
            let name = match family {
                SearchFamily::Pve => &cfg.pve.matrix,
                SearchFamily::Mixed => &cfg.mixed.matrix,
            };
            let base = LatticeAutomorphism::named(name)?;
            let frame = eigen_decompose(&base)?;
            let ns = search_n(m, &frame, family)?;
            let ks = search_kappa(ns.values, family)?;
            let eps = default_epsilon(ks.kappa, family);
            let powered = power_eigen(&frame, 2 * ns.n)?;
            // the strong-unstable direction of the deformed map drives the slope sweep
            let (centers, dir) = match family {
                SearchFamily::Pve => (vec![TorusPoint::ORIGIN], frame.vector(2)),
                SearchFamily::Mixed => (fixed_points(&base)?, frame.vector(0)),
            };
            let grid = cfg.search.segment_grid();
            let ds = slope_delta_search(
                &powered,
                &centers,
                &dir,
                cfg.search.slope_radius,
                cfg.search.slope_threshold,
                &grid,
            )?;
            let bump = BumpProfile::new(ds.delta, cfg.bump.profile)?;
            let system = match family {
                SearchFamily::Pve => {
                    DaSystem::pve_f(&da_core::construct::PveParams::new(base, ns.n, 1, bump, m, ks.kappa, eps)?)
                }
                SearchFamily::Mixed => {
                    DaSystem::mixed_g(&da_core::construct::MixedParams::new(base, ns.n, 1, bump, m, ks.kappa, eps)?)
                }
            };
            let kk = search_k(&system, &sampling, cfg.verify.direction_iters)?;
            let fam = family.name();
            self.check(Check::margin(format!("search-{fam}-n"), ns.min_margin, format!("n = {}", ns.n)));
            self.check(Check::margin(
                format!("search-{fam}-kappa"),
                ks.margins.iter().copied().fold(f64::INFINITY, f64::min),
                format!("kappa = {}, epsilon = {eps}", ks.kappa),
            ));
            self.check(Check::margin(
                format!("search-{fam}-delta"),
                ds.threshold - ds.max_mass,
                format!("delta = {}, max segment mass {}", ds.delta, ds.max_mass),
            ));
            let last = kk.steps.last().map(|s| s.reports.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min));
            self.check(Check::new(
                format!("search-{fam}-k"),
                kk.pinned_k > 0,
                last,
                format!(
                    "k = {} (k_eps {}, k1 {:?}, k2 {:?}, k3 {:?}, k_rates {:?})",
                    kk.pinned_k, kk.k_eps, kk.k1, kk.k2, kk.k3, kk.k_rates
                ),
            ));
            let margin_vs_k = kk
                .steps
                .iter()
                .map(|s| [s.k as f64, s.reports.iter().map(|r| r.min_margin).fold(f64::INFINITY, f64::min)])
                .collect();
            self.report.series.push(Series::new(format!("margin-vs-k-{fam}"), "k", "min_margin", margin_vs_k));
            match family {
                SearchFamily::Pve => {
                    found.pve.n = ns.n;
                    found.pve.kappa = ks.kappa;
                    found.pve.epsilon = eps;
                    found.pve.delta = ds.delta;
                    found.pve.k = kk.pinned_k;
                }
                SearchFamily::Mixed => {
                    found.mixed.n = ns.n;
                    found.mixed.kappa2 = ks.kappa;
                    found.mixed.epsilon = eps;
                    found.mixed.delta = ds.delta;
                    found.mixed.k = kk.pinned_k;
                }
            }
            results
                .insert(fam.into(), serde_json::json!({ "n": ns, "kappa": ks, "epsilon": eps, "delta": ds, "k": kk }));
        }
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        let (p, q) = (&found, cfg);
        let reproduced = same(p.bump.m, q.bump.m)
            && p.pve.n == q.pve.n
            && p.pve.k == q.pve.k
            && same(p.pve.kappa, q.pve.kappa)
            && same(p.pve.epsilon, q.pve.epsilon)
            && same(p.pve.delta, q.pve.delta)
            && p.mixed.n == q.mixed.n
            && p.mixed.k == q.mixed.k
            && same(p.mixed.kappa2, q.mixed.kappa2)
            && same(p.mixed.epsilon, q.mixed.epsilon)
            && same(p.mixed.delta, q.mixed.delta);
        self.check(Check::new(
            "search-reproduces-config",
            reproduced,
            None,
            "searched values equal the configured ones bit for bit",
        ));
        let mut pinned = found.clone();
        pinned.scenario = Scenario::FullPaper;
        let defaults = RunConfig::pinned();
        pinned.workers = defaults.workers;
        pinned.output = defaults.output;
        let text = pinned.to_toml().map_err(|e| da_core::Error::Numerical(e.to_string()))?;
        results.insert("pinned_toml".into(), serde_json::Value::String(text.clone()));
        results.insert("matches_pinned_file".into(), serde_json::Value::Bool(text == PINNED_DEFAULTS));
        self.report.results.insert("search".into(), serde_json::Value::Object(results));
        Ok(())
    }

    fn construct(&mut self) -> R {
        let samples = self.cfg.verify.box_samples;
        let seed = self.cfg.seed;
        let mut out = serde_json::Map::new();
        for (label, system) in [("f", self.cfg.pve_f()?), ("G", self.cfg.mixed_g()?)] {
            let bp = box_preservation(&system, samples, seed)?;
            self.check(Check::margin(
                format!("box-preserved-{label}"),
                BOX_TOL - bp.max_boundary_error,
                format!("{} boundary samples, worst {:e}", bp.boundary_samples, bp.max_boundary_error),
            ));
            self.check(Check::new(
                format!("exterior-linear-{label}"),
                bp.exterior_mismatches == 0,
                None,
                format!("{} of {} exterior samples differ", bp.exterior_mismatches, bp.exterior_samples),
            ));
            let rt = round_trip_error(&system, samples, seed)?;
            self.check(Check::margin(format!("round-trip-{label}"), 1e-12 - rt, format!("worst displacement {rt:e}")));
            out.insert(label.into(), serde_json::json!({ "box_preservation": bp, "round_trip": rt }));
        }
        self.report.results.insert("construct".into(), serde_json::Value::Object(out));
        Ok(())
    }

    fn cones(&mut self) -> R {
        let spec = self.cfg.verify.sampling();
        let mut all = Vec::new();
        for (label, system) in [("f", self.cfg.pve_f()?), ("g", self.cfg.pve_g()?), ("G", self.cfg.mixed_g()?)] {
            let reports = cone_reports(&system, &spec)?;
            for r in &reports {
                self.cert(&format!("{label}-"), r);
            }
            all.push((label, reports));
        }
        self.record("cones", &all);
        Ok(())
    }

    fn pve(&mut self) -> R {
        let cert = pve_certify(&self.cfg.pve_f()?, &self.cfg.verify.sampling(), self.cfg.verify.direction_iters)?;
        for r in [&cert.small_c, &cert.pole, &cert.large_c, &cert.sweep, &cert.exact] {
            self.cert("pve-", r);
        }
        let min = cert.min_det_sq();
        self.check(Check::margin("pve-min-det-sq", min - PVE_DET_SQ_FLOOR, format!("min det² = {min}")));
        self.record("pve", &cert);
        Ok(())
    }

    fn spectra(&mut self) -> R {
        let f = self.cfg.pve_f()?;
        let g = self.cfg.mixed_g()?;
        let [fuu, _, fss] = f.spectrum();
        let [guu, gu, gss] = g.spectrum();
        let fp = fixed_point_spectrum(&f)?;
        let gp = fixed_point_spectrum(&g)?;
        let p = f.charts()[0].center;
        let q = g.charts();
        let targets = [
            ("spectrum-f-p", &fp, p, [fuu, 2.0, fss], 2),
            ("spectrum-G-q1", &gp, q[0].center, [guu, 0.5, gss], 1),
            ("spectrum-G-q2", &gp, q[1].center, [guu, gu, 2.0], 3),
        ];
        for (name, list, point, diag, index) in targets {
            match list.iter().find(|s| s.point == point) {
                Some(s) => {
                    let dev = diagonal_deviation(&s.jacobian, diag);
                    self.check(Check::new(
                        name,
                        dev <= SPECTRUM_TOL && s.unstable_index == index,
                        Some(SPECTRUM_TOL - dev),
                        format!("eigenvalues {:?}, unstable index {}", s.real, s.unstable_index),
                    ));
                }
                None => self.check(Check::new(name, false, None, "fixed point not found")),
            }
        }
        let starred = starred_entry_bound(&g, self.cfg.verify.box_per_axis)?;
        self.record("spectra", &serde_json::json!({ "f": fp, "G": gp, "G_starred_entries": starred }));
        Ok(())
    }

    fn rates(&mut self) -> R {
        let r = center_rate_bounds(&self.cfg.mixed_g()?, &self.cfg.verify.sampling(), self.cfg.verify.direction_iters)?;
        for c in [&r.cu_in_first_box, &r.cs_in_second_box, &r.cu_off_first_box, &r.cs_off_second_box] {
            self.cert("rate-", c);
        }
        self.record("rates", &r);
        Ok(())
    }

    fn seed_curves(&self, system: &DaSystem, count: usize) -> da_core::Result<Vec<(TorusPoint, UnstableCurve)>> {
        let m = &self.cfg.measure;
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        (0..count)
            .map(|_| {
                let x = TorusPoint::try_from([rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()])?;
                Ok((x, seed_curve(system, &x, m.seed_length, m.max_seg_len, self.cfg.verify.direction_iters)?))
            })
            .collect()
    }

    fn gibbs(&mut self) -> R {
        let g = self.cfg.pve_g()?;
        let m = &self.cfg.measure;
        let kappa = self.cfg.pve.kappa;
        let gamma = g.spectrum()[g.unstable_axis()];
        let big_n = first_mass_iterate(kappa, gamma, m.seed_length)?;
        let bound = mass_bound(kappa);
        let region = Region::deformation_boxes(&g)?;
        let curves = self.seed_curves(&g, m.seed_curves)?;
        let mut budget = m.vertex_budget;
        let (mut env_violations, mut env_failures, mut env_worst) = (0usize, 0usize, f64::NEG_INFINITY);
        let (mut mass_margin, mut agree_all, mut worst_gap) = (f64::INFINITY, true, f64::NEG_INFINITY);
        let mut per_curve = Vec::new();
        for (i, (x, curve)) in curves.iter().enumerate() {
            let env = length_envelope(&g, curve, m.envelope_iterates, kappa)?;
            for e in &env {
                env_violations += e.violations;
                env_failures += usize::from(!e.holds());
                env_worst = env_worst.max(e.log_ratio.abs() - e.half_width);
            }
            let spec = self.cfg.sample_spec(m.samples, i);
            let series = mass_series(&g, curve, m.mass_iterates.max(big_n), &region, &spec)?;
            for s in series.iter().filter(|s| s.n >= big_n) {
                mass_margin = mass_margin.min(bound + 3.0 * s.confidence_halfwidth - s.region_mass);
            }
            let pm = pushforward_mass(&g, curve, big_n, &region, &spec, m.max_seg_len, &mut budget)?;
            agree_all &= pm.agree;
            worst_gap = worst_gap.max(pm.discrepancy - 3.0 * pm.stats.confidence_halfwidth);
            if i == 0 {
                let pts = series.iter().map(|s| [s.n as f64, s.region_mass]).collect();
                self.report.series.push(Series::new("mass-vs-n", "n", "region_mass", pts));
                let pts = env.iter().map(|e| [e.n as f64, e.log_ratio]).collect();
                self.report.series.push(Series::new("length-ratio-vs-n", "n", "log_length_ratio", pts));
            }
            per_curve.push(serde_json::json!({
                "seed_point": x,
                "vertices": curve.len(),
                "envelope_final": env.last(),
                "mass_series": series,
                "pushforward_at_n": pm,
            }));
        }
        self.check(Check::new(
            "length-envelope",
            env_failures == 0,
            Some(-env_worst),
            format!("{} curves, n <= {}, {env_violations} segment violations", curves.len(), m.envelope_iterates),
        ));
        self.check(Check::margin(
            "gibbs-mass-bound",
            mass_margin,
            format!("n >= N = {big_n}, bound {bound} + 3·halfwidth"),
        ));
        self.check(Check::new(
            "mass-estimators-agree",
            agree_all,
            Some(-worst_gap),
            format!("quadrature vs Monte Carlo at n = {big_n}"),
        ));
        self.record("gibbs", &serde_json::json!({ "N": big_n, "bound": bound, "curves": per_curve }));
        Ok(())
    }

    fn center(&mut self) -> R {
        let g = self.cfg.pve_g()?;
        let m = &self.cfg.measure;
        let curves = self.seed_curves(&g, m.seed_curves)?;
        let main = center_exponent(&g, &curves[0].1, m.ell, &self.cfg.sample_spec(m.samples, 0))?;
        let est = &main.estimate;
        self.check(Check::new(
            "center-exponent",
            main.passed(),
            Some(est.mean - (main.lower_bound - 3.0 * est.stderr)),
            format!("{} ± {} against lower bound {}", est.mean, est.stderr, main.lower_bound),
        ));
        let pts = est.partial.iter().map(|&(l, v)| [l as f64, v]).collect();
        self.report.series.push(Series::new("center-exponent-vs-ell", "ell", "exponent", pts));
        let mut others = Vec::new();
        let mut invariance = f64::INFINITY;
        for (i, (_, curve)) in curves.iter().enumerate().skip(1) {
            let e = center_exponent(&g, curve, m.ell, &self.cfg.sample_spec(m.invariance_samples, i))?;
            let tol = 3.0 * est.stderr.hypot(e.estimate.stderr) + EXACT_TOL;
            invariance = invariance.min(tol - (e.estimate.mean - est.mean).abs());
            others.push(e);
        }
        if !others.is_empty() {
            self.check(Check::margin(
                "center-exponent-seed-invariance",
                invariance,
                format!("{} extra curves", others.len()),
            ));
        }
        let lin = g.linearized();
        let want = lin.spectrum()[1].ln();
        let sanity = birkhoff_average(&lin, &curves[0].1, m.ell.min(100), &self.cfg.sample_spec(100, 0), |x| {
            Ok(lin.center_derivative(x)?.ln())
        })?;
        let err = (sanity.mean - want).abs();
        self.check(Check::margin(
            "center-exponent-linear",
            EXACT_TOL - err,
            format!("{} vs log(1/λs) = {want}", sanity.mean),
        ));
        let dec = exponent_decomposition(&g, &curves[0].1, m.ell, &self.cfg.sample_spec(m.invariance_samples, 0))?;
        self.check(Check::new(
            "exponent-decomposition",
            dec.consistent(),
            Some(dec.margin()),
            format!("uu {} + center {} + ss {} vs log det {}", dec.uu, dec.center, dec.ss, dec.log_det),
        ));
        self.record(
            "center",
            &serde_json::json!({ "main": main, "others": others, "linear": sanity, "decomposition": dec }),
        );
        Ok(())
    }

    fn mixed(&mut self) -> R {
        let g = self.cfg.mixed_g()?;
        let m = &self.cfg.measure;
        let curves = self.seed_curves(&g, 1)?;
        let e = mixed_exponents(&g, &curves[0].1, m.ell, m.bundle_iters, &self.cfg.sample_spec(m.samples, 0))?;
        self.check(Check::new(
            "mixed-exponents",
            e.passed(),
            Some((e.cu.mean - 3.0 * e.cu.stderr).min(-e.cs.mean - 3.0 * e.cs.stderr)),
            format!(
                "cu {} ± {} (bound {}), cs {} ± {} (bound {}), {} unconverged",
                e.cu.mean, e.cu.stderr, e.cu_lower_bound, e.cs.mean, e.cs.stderr, e.cs_upper_bound, e.failures
            ),
        ));
        for (name, est) in [("cu", &e.cu), ("cs", &e.cs)] {
            let pts = est.partial.iter().map(|&(l, v)| [l as f64, v]).collect();
            self.report.series.push(Series::new(format!("mixed-{name}-vs-ell"), "ell", "exponent", pts));
        }
        let charts = g.charts();
        let mut witnesses = Vec::new();
        for (name, chart, want, pick_cu) in
            [("q1-cu-rate", charts[0], 0.5, true), ("q2-cs-rate", charts[1], 2.0, false)]
        {
            let b = center_bundles(&g, &chart.center, m.bundle_iters)?;
            let j = g.jacobian(&chart.center)?;
            let rate = (j * if pick_cu { b.cu } else { b.cs }).norm();
            let err = (rate - want).abs();
            self.check(Check::margin(
                format!("mixed-witness-{name}"),
                EXACT_TOL - err,
                format!("rate {rate}, expected {want}"),
            ));
            witnesses.push(serde_json::json!({ "name": name, "point": chart.center, "rate": rate }));
        }
        self.record("mixed", &serde_json::json!({ "exponents": e, "witnesses": witnesses }));
        Ok(())
    }
}

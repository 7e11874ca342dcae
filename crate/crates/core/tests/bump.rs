mod common;

use da_core::bump::*;
use proptest::prelude::*;
use rand::Rng;

fn profile(delta: f64) -> BumpProfile {
    BumpProfile::new(delta, BumpShape::SmoothstepExp).unwrap()
}

#[test]
fn plateau_zero_and_symmetry_are_exact() {
    let p = profile(common::DELTA);
    let d = common::DELTA;
    let mut rng = common::rng(11);
    for _ in 0..10_000 {
        let x: f64 = rng.gen_range(-2.0 * d..2.0 * d);
        assert_eq!(p.psi(x), p.psi(-x));
        assert_eq!(p.psi_prime(x), -p.psi_prime(-x));
        if x.abs() <= d / 2.0 {
            assert_eq!(p.psi(x), 1.0);
        }
        if x.abs() >= d {
            assert_eq!(p.psi(x), 0.0);
        }
        assert!(x * p.psi_prime(x) <= 0.0);
        assert!((0.0..=1.0).contains(&p.psi(x)));
    }
}

#[test]
fn derivative_matches_central_differences() {
    let p = profile(1.0);
    for i in 1..200 {
        let x = 0.5 + 0.5 * i as f64 / 200.0;
        let h = 1e-6;
        let fd = (p.psi(x + h) - p.psi(x - h)) / (2.0 * h);
        assert!((fd - p.psi_prime(x)).abs() < 1e-6 * (1.0 + fd.abs()), "x {x}: {fd} vs {}", p.psi_prime(x));
    }
}

#[test]
fn computed_m_bounds_the_product_on_a_million_points() {
    let p = profile(1.0);
    let bound = compute_m(&p, MGrid::default()).unwrap();
    assert!((bound.m - common::M).abs() < 1e-12, "m = {}", bound.m);
    // independent 1000 × 1000 grid offset from the search grid
    let n = 1000;
    let mut violations = 0;
    for i in 0..n {
        let x = -1.0 + 2.0 * (i as f64 + 0.37) / n as f64;
        let a = x * p.psi_prime(x) + p.psi(x);
        for j in 0..n {
            let y = -1.0 + 2.0 * (j as f64 + 0.61) / n as f64;
            let v = a * p.psi(y);
            if v < -bound.m || v > 1.0 {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
    assert!(bound.sup_value <= 1.0);
}

#[test]
fn m_is_the_same_at_the_pinned_delta() {
    let g = MGrid { resolution: 4001, passes: 3 };
    let a = compute_m(&profile(1.0), g).unwrap().m;
    let b = compute_m(&profile(common::DELTA), g).unwrap().m;
    assert!((a - b).abs() < 1e-9 * a);
}

#[test]
fn forward_modification_fails_at_pinned_values() {
    let p = common::pve_params(common::PVE_K);
    let v = forward_modification_infeasibility(&profile(common::DELTA), common::M, p.lambda_ss(), common::PVE_K as f64)
        .unwrap();
    assert!(!v.holds);
    let w = v.witness.expect("a point with non-positive derivative");
    assert!(w.derivative <= 0.0);
}

#[test]
fn profile_names_round_trip() {
    for s in [BumpShape::SmoothstepExp, BumpShape::SmoothstepExpSquared] {
        assert_eq!(BumpShape::from_name(s.name()).unwrap(), s);
    }
    assert!(BumpShape::from_name("box").is_err());
    assert!(BumpProfile::new(0.0, BumpShape::SmoothstepExp).is_err());
}

proptest! {
    #[test]
    fn psi_is_monotone_on_the_transition(a in 0.5f64..1.0, b in 0.5f64..1.0) {
        let p = profile(1.0);
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(p.psi(lo) >= p.psi(hi));
    }

    #[test]
    fn slope_factor_scales_with_delta(x in -1.0f64..1.0, s in 1e-4f64..10.0) {
        let a = profile(1.0).slope_factor(x);
        let b = profile(s).slope_factor(x * s);
        prop_assert!((a - b).abs() < 1e-9 * (1.0 + a.abs()));
    }
}

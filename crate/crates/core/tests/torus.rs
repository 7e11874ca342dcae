mod common;

use da_core::torus::*;
use nalgebra::{Matrix3, SymmetricEigen};
use proptest::prelude::*;

fn matrix(name: &str) -> LatticeAutomorphism {
    LatticeAutomorphism::named(name).unwrap()
}

fn sorted_desc_modulus(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    v
}

#[test]
fn eigenvalues_match_an_independent_symmetric_solver() {
    for name in ["D", "C"] {
        let m = matrix(name);
        let frame = eigen_decompose(&m).unwrap();
        let oracle = SymmetricEigen::new(m.to_matrix());
        let expect = sorted_desc_modulus(oracle.eigenvalues.iter().copied().collect());
        for (a, b) in frame.values().iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{name}: {a} vs {b}");
        }
        // roots of the integer characteristic polynomial
        let [c2, c1, c0] = m.char_poly().map(|c| c as f64);
        for mu in frame.values() {
            let p = mu * mu * mu + c2 * mu * mu + c1 * mu + c0;
            assert!(p.abs() < 1e-10, "{name}: residual {p}");
        }
        let prod: f64 = frame.values().iter().product();
        assert!((prod.abs() - 1.0).abs() < 1e-10);
        assert!(frame.orthonormality_residual() < 1e-12);
        assert!(frame.eigen_residual(&m) < 1e-10);
    }
}

#[test]
fn d_and_c_are_inverse_in_integer_arithmetic() {
    let d = matrix("D");
    let c = matrix("C");
    assert!(c.mul(&d).unwrap().is_identity());
    assert!(d.mul(&c).unwrap().is_identity());
    assert_eq!(d.inverse(), c);
    assert_eq!(d.det(), -1);
}

#[test]
fn characteristic_polynomial_of_d() {
    // x³ - 3x² - x + 1, from the trace, principal minors and determinant
    assert_eq!(matrix("D").char_poly(), [-3, -1, 1]);
}

#[test]
fn fixed_point_counts_match_determinants() {
    for name in ["D", "C"] {
        let m = matrix(name);
        let mut shifted = m.entries();
        for (i, row) in shifted.iter_mut().enumerate() {
            row[i] -= 1;
        }
        let det = Matrix3::from_fn(|i, j| shifted[i][j] as f64).determinant().round().abs() as usize;
        let fps = fixed_points(&m).unwrap();
        assert_eq!(det, 2);
        assert_eq!(fps.len(), det, "{name}");
        assert_eq!(fps[0], TorusPoint::ORIGIN);
        for p in &fps {
            assert_eq!(m.apply_mod1(p), *p, "{name} does not fix {p:?} exactly");
        }
    }
}

#[test]
fn fixed_points_of_d_are_origin_and_half() {
    let fps = fixed_points(&matrix("D")).unwrap();
    let other = fps[1].coords();
    // (D - I)x ∈ Z³ has the nonzero solution with halves in the last two coordinates
    assert!(other.iter().all(|c| *c == 0.0 || *c == 0.5), "{other:?}");
}

#[test]
fn powers_keep_the_eigenframe() {
    let d = matrix("D");
    let frame = eigen_decompose(&d).unwrap();
    let a = d.pow(14).unwrap();
    let pf = power_eigen(&frame, 14).unwrap();
    assert!(pf.eigen_residual(&a) / pf.value(0) < 1e-12);
    assert!((pf.values().iter().product::<f64>() - 1.0).abs() < 1e-8);
}

#[test]
fn chart_round_trip_and_rejection() {
    let frame = eigen_decompose(&matrix("D")).unwrap();
    let chart = BoxChart::for_delta(TorusPoint::ORIGIN, frame, 1.0 / 1024.0).unwrap();
    let l = Vec3::new(1e-3, -4e-4, 2e-4);
    let back = chart.to_local(&chart.from_local(&l)).unwrap();
    assert!((back - l).norm() < 1e-15);
    let far = TorusPoint::try_from([0.5, 0.5, 0.5]).unwrap();
    assert!(matches!(chart.to_local(&far), Err(da_core::Error::OutOfChart { .. })));
}

#[test]
fn segment_box_mass_of_a_crossing_line() {
    let frame = eigen_decompose(&matrix("D")).unwrap();
    let chart = BoxChart::for_delta(TorusPoint::ORIGIN, frame, 1.0 / 64.0).unwrap();
    // a line through the center along a frame axis crosses the box over 2h
    let mass = ss_segment_box_mass(&TorusPoint::ORIGIN, &frame.vector(2), 0.1, &chart);
    assert!((mass - 2.0 * chart.half_width_inner).abs() < 1e-14);
}

fn coord() -> impl Strategy<Value = f64> {
    -3.0..3.0f64
}

proptest! {
    #[test]
    fn wrap_lands_in_unit_cube(a in coord(), b in coord(), c in coord()) {
        let p = wrap([a, b, c]).unwrap();
        prop_assert!(p.coords().iter().all(|x| (0.0..1.0).contains(x)));
        prop_assert_eq!(wrap(p.coords()).unwrap(), p);
    }

    #[test]
    fn torus_delta_is_shortest(a in coord(), b in coord(), c in coord(), d in coord(), e in coord(), f in coord()) {
        let x = wrap([a, b, c]).unwrap();
        let y = wrap([d, e, f]).unwrap();
        let v = torus_delta(&x, &y);
        prop_assert!(v.iter().all(|t| *t > -0.5 - 1e-15 && *t <= 0.5 + 1e-15));
        let w = torus_delta(&y, &x);
        prop_assert!((v + w).norm() < 1e-12 || v.iter().any(|t| (t.abs() - 0.5).abs() < 1e-12));
        prop_assert!((torus_distance(&x, &y) - v.norm()).abs() < 1e-15);
    }

    #[test]
    fn precise_apply_commutes_with_inverse(a in 0.0..1.0f64, b in 0.0..1.0f64, c in 0.0..1.0f64) {
        let d = LatticeAutomorphism::named("D").unwrap();
        let x = PrecisePoint::new(wrap([a, b, c]).unwrap());
        let back = d.inverse().apply_precise(&d.apply_precise(&x).unwrap()).unwrap();
        prop_assert!(back.delta_from(&x).norm() < 1e-15);
    }

    #[test]
    fn apply_mod1_matches_rational_arithmetic(i in 0i64..1024, j in 0i64..1024, l in 0i64..1024) {
        // dyadic inputs make the product exact, so the wrap must be exact too
        let d = LatticeAutomorphism::named("D").unwrap();
        let x = [i as f64 / 1024.0, j as f64 / 1024.0, l as f64 / 1024.0];
        let e = d.entries();
        let expect: Vec<f64> = (0..3)
            .map(|r| ((e[r][0] * i + e[r][1] * j + e[r][2] * l).rem_euclid(1024)) as f64 / 1024.0)
            .collect();
        let got = d.apply_mod1(&wrap(x).unwrap());
        prop_assert_eq!(got.coords().to_vec(), expect);
    }
}

mod common;

use da_core::relations::*;
use da_core::verify::ratio_bound_sweep;
use proptest::prelude::*;

#[test]
fn appendix_constants_for_gamma_one_hundredth() {
    let r = ratio_bound_constants(0.01).unwrap();
    assert_eq!(r.eps0, 0.001);
    let expect = 0.9 / ((1.0 / (0.01 * 0.01) + 1.01) * (1.0 + 0.01 * 0.01 / 100.0));
    assert!((r.big_m - expect).abs() < 1e-18);
}

#[test]
fn ratio_bound_has_no_violations_on_a_million_points() {
    let gamma = 0.01;
    let r = ratio_bound_constants(gamma).unwrap();
    let n = 100;
    let grid = |i: usize, lo: f64, hi: f64| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let mut violations = 0;
    let mut count = 0;
    for i in 0..n {
        let u = grid(i, -r.eps0, r.eps0);
        for j in 0..n {
            let e = grid(j, -r.eps0, r.eps0);
            for l in 0..n {
                // |c| from γ to 100 on a log scale, alternating sign
                let mag = gamma * (1e4f64).powf(l as f64 / (n - 1) as f64);
                let c = if l % 2 == 0 { mag } else { -mag };
                let value = (c * c + c * u) / ((1.0 + e * e + c * c) * (1.0 + e * e));
                if value < r.big_m {
                    violations += 1;
                }
                count += 1;
            }
        }
    }
    assert_eq!(count, 1_000_000);
    assert_eq!(violations, 0);
    let sweep = ratio_bound_sweep(gamma, 100).unwrap();
    assert!(sweep.passed && sweep.min_margin > 0.0);
}

#[test]
fn mass_bound_at_pinned_kappa() {
    let w = box_weight(common::KAPPA);
    assert!((w - (1.0 + common::KAPPA * common::KAPPA).powf(1.5) / 100.0).abs() < 1e-15);
    assert!((mass_bound(common::KAPPA) - w - 0.01).abs() < 1e-15);
    assert!(mass_bound(common::KAPPA) < 1.0);
}

#[test]
fn first_mass_iterate_for_the_pinned_seed_length() {
    let p = common::pve_params(common::PVE_K);
    let gamma_uu = 1.0 / p.lambda_ss();
    assert_eq!(first_mass_iterate(common::KAPPA, gamma_uu, 1.0 / 32.0).unwrap(), 1);
    // a seed too short for one iterate needs two
    assert_eq!(first_mass_iterate(common::KAPPA, gamma_uu, 1.0 / gamma_uu).unwrap(), 2);
}

#[test]
fn pinned_exponent_relations_hold_and_are_tight() {
    let p = common::pve_params(common::PVE_K);
    assert!(center_expansion_margin(common::KAPPA, p.lambda_s()) > 0.0);
    assert!(center_expansion_margin(common::KAPPA + 1e-5, p.lambda_s()) < 0.0);
    let q = common::mixed_params(common::MIXED_K);
    assert!(mixed_expansion_margin(common::KAPPA2, q.lambda_u()) > 0.0);
    assert!(mixed_contraction_margin(common::KAPPA2, q.lambda_ss()) > 0.0);
    assert!(mixed_expansion_margin(0.5, q.lambda_u()).is_infinite());
}

#[test]
fn spectral_margins_at_pinned_powers() {
    let p = common::pve_params(common::PVE_K);
    let r = ratio_bound_constants(0.01).unwrap();
    let s = pve_spectral_margins(p.eigen.values(), common::M, r.big_m);
    assert!(s.all_hold(), "{s:?}");
    let q = common::mixed_params(common::MIXED_K);
    let s = mixed_spectral_margins(q.eigen.values(), common::M);
    assert!(s.all_hold(), "{s:?}");
}

proptest! {
    #[test]
    fn ratio_lower_bound_holds_anywhere_in_range(
        gamma in 1e-3f64..1.0,
        a in -1.0f64..1.0,
        b in -1.0f64..1.0,
        t in 0.0f64..1.0,
        neg in any::<bool>(),
    ) {
        let r = ratio_bound_constants(gamma).unwrap();
        let mag = gamma * (1e6f64).powf(t);
        let c = if neg { -mag } else { mag };
        prop_assert!(ratio_value(a * r.eps0, b * r.eps0, c) >= r.big_m);
    }

    #[test]
    fn decay_term_is_decreasing_in_n(kappa in 0.0f64..5.0, gamma in 2.0f64..1e4, len in 1e-3f64..1.0, n in 1u32..20) {
        let a = mass_decay_term(kappa, gamma, n, len);
        let b = mass_decay_term(kappa, gamma, n + 1, len);
        prop_assert!(b <= a);
    }

    #[test]
    fn weighted_rate_is_monotone_in_both_rates(kappa in 0.0f64..4.0, lo in 0.1f64..1.0, hi in 1.0f64..100.0) {
        let base = weighted_log_rate(kappa, lo, hi);
        prop_assert!(weighted_log_rate(kappa, lo * 1.1, hi) > base);
        prop_assert!(weighted_log_rate(kappa, lo, hi * 1.1) >= base);
    }
}

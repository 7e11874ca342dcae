//! Closed-form parameter inequalities, each reported as a signed margin
//! (positive means satisfied).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Constants `(ε₀, M)` of the lower bound
/// `(c² + cu) / ((1+ε²+c²)(1+ε²)) ≥ M` for `|u|, |ε| ≤ ε₀`, `|c| ≥ γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioConstants {
    pub gamma: f64,
    pub eps0: f64,
    pub big_m: f64,
}

pub fn ratio_bound_constants(gamma: f64) -> Result<RatioConstants> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    let eps0 = gamma / 10.0;
    let big_m = 0.9 / ((1.0 / (gamma * gamma) + 1.01) * (1.0 + gamma * gamma / 100.0));
    Ok(RatioConstants { gamma, eps0, big_m })
}

/// The ratio bounded below by [`RatioConstants::big_m`].
#[inline]
pub fn ratio_value(u: f64, eps: f64, c: f64) -> f64 {
    let e2 = eps * eps;
    (c * c + c * u) / ((1.0 + e2 + c * c) * (1.0 + e2))
}

/// Weight `(1+κ²)^{3/2}/100` of the deformation box in the mass bound.
#[inline]
pub fn box_weight(kappa: f64) -> f64 {
    (1.0 + kappa * kappa).powf(1.5) / 100.0
}

/// Asymptotic upper bound on the u-state mass of the deformation box.
pub fn mass_bound(kappa: f64) -> f64 {
    box_weight(kappa) + 0.01
}

/// Transient term of the finite-`n` mass bound for a seed of the given length.
pub fn mass_decay_term(kappa: f64, gamma_uu: f64, n: u32, length: f64) -> f64 {
    let half = (1.0 + kappa * kappa) / 2.0;
    let den = gamma_uu.powi(n as i32) * length - half;
    if den <= 0.0 {
        f64::INFINITY
    } else {
        half / den
    }
}

/// Smallest `n ≥ 1` whose transient term is at most `1/100`.
pub fn first_mass_iterate(kappa: f64, gamma_uu: f64, length: f64) -> Result<u32> {
    (1..=200)
        .find(|&n| mass_decay_term(kappa, gamma_uu, n, length) <= 0.01)
        .ok_or_else(|| Error::SearchCap("no iterate within 200 makes the transient mass term small".into()))
}

/// Time-average lower bound for the center exponent when the box has weight
/// `w = (1+κ²)^{3/2}/100`: `(w + 1/100) log(low) + (99/100 - w) log(high)`.
pub fn weighted_log_rate(kappa: f64, low: f64, high: f64) -> f64 {
    let w = box_weight(kappa);
    (w + 0.01) * low.ln() + (0.99 - w) * high.ln()
}

/// Margin of the center-expansion condition for the volume-expanding family.
pub fn center_expansion_margin(kappa: f64, lambda_s: f64) -> f64 {
    weighted_log_rate(kappa, 0.5, 1.0 / lambda_s)
}

/// Margin of the center-unstable expansion condition for the mixed family.
pub fn mixed_expansion_margin(kappa2: f64, lambda_u: f64) -> f64 {
    if kappa2 >= 0.5 {
        return f64::NEG_INFINITY;
    }
    weighted_log_rate(kappa2, 0.5 - kappa2, lambda_u / (1.0 + kappa2 * kappa2).sqrt())
}

/// Margin of the center-stable contraction condition (sign flipped so that
/// positive means satisfied).
pub fn mixed_contraction_margin(kappa2: f64, lambda_ss: f64) -> f64 {
    -weighted_log_rate(kappa2, 2.0 + kappa2, (1.0 + kappa2 * kappa2).sqrt() * lambda_ss)
}

/// Spectral conditions for the volume-expanding family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PveSpectralMargins {
    /// `|λ_uu λ_s λ_ss - 1|`; must be below `1e-10`.
    pub product_residual: f64,
    /// `λ_uu - 2`.
    pub uu_gap: f64,
    /// `M/λ_s² - 2`.
    pub volume: f64,
    /// `1/(2λ_ss) - (-m(1/2 - 1/λ_s) + 1/λ_s)`.
    pub center_ceiling: f64,
}

impl PveSpectralMargins {
    pub fn all_hold(&self) -> bool {
        self.product_residual < 1e-10 && self.uu_gap > 0.0 && self.volume > 0.0 && self.center_ceiling >= 0.0
    }

    pub fn min_margin(&self) -> f64 {
        self.uu_gap.min(self.volume).min(self.center_ceiling)
    }
}

pub fn pve_spectral_margins(values: [f64; 3], m: f64, big_m: f64) -> PveSpectralMargins {
    let [uu, s, ss] = values;
    PveSpectralMargins {
        product_residual: (uu * s * ss - 1.0).abs(),
        uu_gap: uu - 2.0,
        volume: big_m / (s * s) - 2.0,
        center_ceiling: 1.0 / (2.0 * ss) - (-m * (0.5 - 1.0 / s) + 1.0 / s),
    }
}

/// Spectral conditions for the mixed family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedSpectralMargins {
    pub product_residual: f64,
    /// `λ_u - 2`.
    pub u_gap: f64,
    /// `λ_ss` below one: `1 - λ_ss`.
    pub ss_gap: f64,
    /// `λ_uu/2 - (-m(1/2 - λ_u) + λ_u)`.
    pub center_ceiling: f64,
}

impl MixedSpectralMargins {
    pub fn all_hold(&self) -> bool {
        self.product_residual < 1e-10 && self.u_gap > 0.0 && self.ss_gap > 0.0 && self.center_ceiling >= 0.0
    }

    pub fn min_margin(&self) -> f64 {
        self.u_gap.min(self.ss_gap).min(self.center_ceiling)
    }
}

pub fn mixed_spectral_margins(values: [f64; 3], m: f64) -> MixedSpectralMargins {
    let [uu, u, ss] = values;
    MixedSpectralMargins {
        product_residual: (uu * u * ss - 1.0).abs(),
        u_gap: u - 2.0,
        ss_gap: 1.0 - ss,
        center_ceiling: uu / 2.0 - (-m * (0.5 - u) + u),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_constants_instances() {
        let r = ratio_bound_constants(0.01).unwrap();
        assert!((r.eps0 - 1e-3).abs() < 1e-18);
        assert!((r.big_m - 0.9 / ((1e4 + 1.01) * (1.0 + 1e-6))).abs() < 1e-18);
        let r1 = ratio_bound_constants(1.0).unwrap();
        assert!((r1.eps0 - 0.1).abs() < 1e-16);
        assert!((r1.big_m - 0.9 / (2.01 * 1.01)).abs() < 1e-15);
        assert!(ratio_bound_constants(0.0).is_err());
        assert!(ratio_bound_constants(-1.0).is_err());
    }

    #[test]
    fn kappa_zero_instance_reduces() {
        let ls: f64 = 0.2;
        let expect = 0.02 * 0.5f64.ln() + 0.98 * (1.0 / ls).ln();
        assert!((center_expansion_margin(0.0, ls) - expect).abs() < 1e-15);
    }

    #[test]
    fn decay_term_shrinks_with_n() {
        let a = mass_decay_term(0.05, 10.0, 1, 0.5);
        let b = mass_decay_term(0.05, 10.0, 2, 0.5);
        assert!(b < a);
        assert!(mass_decay_term(0.05, 1.0, 1, 0.1).is_infinite());
    }
}

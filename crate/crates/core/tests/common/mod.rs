#![allow(dead_code)]

use da_core::bump::{BumpProfile, BumpShape};
use da_core::construct::{DaSystem, MixedParams, PveParams};
use da_core::torus::{LatticeAutomorphism, TorusPoint};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const M: f64 = 2.748556717296574;
pub const DELTA: f64 = 1.0 / 1024.0;
pub const PVE_N: u32 = 7;
pub const PVE_K: u64 = 1024;
pub const KAPPA: f64 = 4.330762;
pub const MIXED_N: u32 = 3;
pub const MIXED_K: u64 = 256;
pub const KAPPA2: f64 = 0.499999;
pub const EPSILON: f64 = 0.05;

pub fn bump() -> BumpProfile {
    BumpProfile::new(DELTA, BumpShape::SmoothstepExp).unwrap()
}

pub fn pve_params(k: u64) -> PveParams {
    PveParams::new(LatticeAutomorphism::named("D").unwrap(), PVE_N, k, bump(), M, KAPPA, EPSILON).unwrap()
}

pub fn mixed_params(k: u64) -> MixedParams {
    MixedParams::new(LatticeAutomorphism::named("C").unwrap(), MIXED_N, k, bump(), M, KAPPA2, EPSILON).unwrap()
}

pub fn pve_f() -> DaSystem {
    DaSystem::pve_f(&pve_params(PVE_K))
}

pub fn pve_g() -> DaSystem {
    DaSystem::pve_g(&pve_params(PVE_K))
}

pub fn mixed_g() -> DaSystem {
    DaSystem::mixed_g(&mixed_params(MIXED_K))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(rng: &mut ChaCha8Rng) -> TorusPoint {
    TorusPoint::try_from([rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()]).unwrap()
}

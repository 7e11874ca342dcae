//! Strong-unstable curves, pushed-forward arclength masses and Birkhoff
//! averages along their orbits.

mod curve;
mod exponents;
mod mass;

pub use curve::{iterate_curve, seed_curve, UnstableCurve, DEFAULT_VERTEX_BUDGET};
pub use exponents::{
    birkhoff_average, center_exponent, exponent_decomposition, mixed_exponents, BirkhoffEstimate, CenterExponent,
    ExponentDecomposition, MixedExponents, DEFAULT_BUNDLE_ITERS, MAX_CHECKPOINTS, MAX_FAILURE_RATE,
};
pub use mass::{
    agresti_coull_halfwidth, length_envelope, mass_series, pushforward_mass, quadrature_mass, stratified_samples,
    BoxRegion, EnvelopeRecord, PushforwardMass, PushforwardStats, QuadratureMass, Region, SampleSpec,
    MAX_QUADRATURE_CHORD, Z_95,
};

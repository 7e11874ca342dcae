use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use da_core::bump::{BumpProfile, BumpShape, MGrid};
use da_core::construct::{DaSystem, MixedParams, PveParams};
use da_core::measure::SampleSpec;
use da_core::torus::LatticeAutomorphism;
use da_core::verify::{SamplingSpec, SegmentGrid};

/// Pinned defaults produced by the `search-params` scenario.
pub const PINNED_DEFAULTS: &str = include_str!("../pinned/defaults.toml");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialise config: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    ConstructPve,
    VerifyCones,
    VerifyPve,
    SearchParams,
    GibbsMass,
    CenterExponent,
    MixedExponents,
    AppendixCheck,
    FullPaper,
}

impl Scenario {
    pub const ALL: [Scenario; 9] = [
        Scenario::ConstructPve,
        Scenario::VerifyCones,
        Scenario::VerifyPve,
        Scenario::SearchParams,
        Scenario::GibbsMass,
        Scenario::CenterExponent,
        Scenario::MixedExponents,
        Scenario::AppendixCheck,
        Scenario::FullPaper,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ConstructPve => "construct-pve",
            Scenario::VerifyCones => "verify-cones",
            Scenario::VerifyPve => "verify-pve",
            Scenario::SearchParams => "search-params",
            Scenario::GibbsMass => "gibbs-mass",
            Scenario::CenterExponent => "center-exponent",
            Scenario::MixedExponents => "mixed-exponents",
            Scenario::AppendixCheck => "appendix-check",
            Scenario::FullPaper => "full-paper",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| ConfigError::Invalid(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Plotdata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub profile: BumpShape,
    /// Lower bound of `(xψ'(x) + ψ(x))ψ(y)`, negated.
    pub m: f64,
    pub m_grid_resolution: usize,
    pub m_grid_passes: usize,
}

impl BumpConfig {
    pub fn m_grid(&self) -> MGrid {
        MGrid { resolution: self.m_grid_resolution, passes: self.m_grid_passes }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PveConfig {
    pub matrix: String,
    pub n: u32,
    pub k: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixedConfig {
    pub matrix: String,
    pub n: u32,
    pub k: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub kappa2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub torus_per_axis: usize,
    pub box_per_axis: usize,
    pub band_extent: f64,
    pub transverse_extent: f64,
    pub cone_directions: usize,
    pub plane_angles: usize,
    pub small_c_samples: usize,
    pub direction_iters: usize,
    /// Boundary and exterior samples per box for the box-preservation check.
    pub box_samples: usize,
}

impl VerifyConfig {
    pub fn sampling(&self) -> SamplingSpec {
        SamplingSpec {
            torus_per_axis: self.torus_per_axis,
            box_per_axis: self.box_per_axis,
            band_extent: self.band_extent,
            transverse_extent: self.transverse_extent,
            cone_directions: self.cone_directions,
            plane_angles: self.plane_angles,
            small_c_samples: self.small_c_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Half-length of the strong-stable segments in the slope sweep.
    pub slope_radius: f64,
    pub slope_threshold: f64,
    pub segment_torus_per_axis: usize,
    pub segment_along: usize,
    pub segment_transverse: usize,
}

impl SearchConfig {
    pub fn segment_grid(&self) -> SegmentGrid {
        SegmentGrid {
            torus_per_axis: self.segment_torus_per_axis,
            along: self.segment_along,
            transverse: self.segment_transverse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppendixConfig {
    pub gamma: f64,
    pub grid_per_axis: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    pub seed_curves: usize,
    pub seed_length: f64,
    pub max_seg_len: f64,
    pub envelope_iterates: u32,
    pub mass_iterates: u32,
    pub ell: usize,
    pub samples: usize,
    /// Samples per extra seed curve in the seed-invariance check.
    pub invariance_samples: usize,
    pub bundle_iters: usize,
    pub vertex_budget: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub format: OutputFormat,
}

/// A complete run description. Files may set any subset of fields; the rest
/// come from [`PINNED_DEFAULTS`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub bump: BumpConfig,
    pub pve: PveConfig,
    pub mixed: MixedConfig,
    pub verify: VerifyConfig,
    pub search: SearchConfig,
    pub appendix: AppendixConfig,
    pub measure: MeasureConfig,
    pub output: OutputConfig,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

impl RunConfig {
    pub fn pinned() -> Self {
        RunConfig::parse("").expect("pinned defaults are valid")
    }

    /// Parses `text` over the pinned defaults and validates the result.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut base: toml::Table = PINNED_DEFAULTS.parse()?;
        let over: toml::Table = text.parse()?;
        merge(&mut base, over);
        let cfg: RunConfig = toml::Value::Table(base).try_into()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        RunConfig::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String, ConfigError> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: &str| Err(ConfigError::Invalid(msg.into()));
        let m = &self.measure;
        if m.seed_curves == 0 || m.samples == 0 || m.invariance_samples == 0 || m.ell == 0 {
            return bad("seed_curves, samples, invariance_samples and ell must be positive");
        }
        if !(m.seed_length > 0.0 && m.max_seg_len > 0.0 && m.max_seg_len <= m.seed_length) {
            return bad("need 0 < max_seg_len <= seed_length");
        }
        if m.bundle_iters < 2 {
            return bad("bundle_iters must be at least 2");
        }
        let v = &self.verify;
        if v.torus_per_axis == 0 || v.box_per_axis == 0 || v.cone_directions == 0 || v.plane_angles < 2 {
            return bad("verification grids must be non-empty");
        }
        if self.appendix.grid_per_axis < 2 || !(self.appendix.gamma > 0.0) {
            return bad("appendix grid needs at least 2 points per axis and a positive gamma");
        }
        if !(self.search.slope_radius > 0.0 && self.search.slope_threshold > 0.0) {
            return bad("slope radius and threshold must be positive");
        }
        self.pve_params().map_err(|e| ConfigError::Invalid(format!("[pve] {e}")))?;
        self.mixed_params().map_err(|e| ConfigError::Invalid(format!("[mixed] {e}")))?;
        Ok(())
    }

    fn bump_at(&self, delta: f64) -> da_core::Result<BumpProfile> {
        BumpProfile::new(delta, self.bump.profile)
    }

    pub fn pve_params(&self) -> da_core::Result<PveParams> {
        let p = &self.pve;
        PveParams::new(
            LatticeAutomorphism::named(&p.matrix)?,
            p.n,
            p.k,
            self.bump_at(p.delta)?,
            self.bump.m,
            p.kappa,
            p.epsilon,
        )
    }

    pub fn mixed_params(&self) -> da_core::Result<MixedParams> {
        let p = &self.mixed;
        MixedParams::new(
            LatticeAutomorphism::named(&p.matrix)?,
            p.n,
            p.k,
            self.bump_at(p.delta)?,
            self.bump.m,
            p.kappa2,
            p.epsilon,
        )
    }

    pub fn pve_f(&self) -> da_core::Result<DaSystem> {
        Ok(DaSystem::pve_f(&self.pve_params()?))
    }

    pub fn pve_g(&self) -> da_core::Result<DaSystem> {
        Ok(DaSystem::pve_g(&self.pve_params()?))
    }

    pub fn mixed_g(&self) -> da_core::Result<DaSystem> {
        Ok(DaSystem::mixed_g(&self.mixed_params()?))
    }

    /// Sample spec for seed curve `i`; each curve gets its own stream.
    pub fn sample_spec(&self, samples: usize, curve: usize) -> SampleSpec {
        SampleSpec { samples, seed: self.seed.wrapping_add(curve as u64) }
    }
}

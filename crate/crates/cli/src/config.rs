//! JSON experiment descriptors. Schemas are versioned under docs/schemas;
//! unknown fields are rejected so that typos never silently change an
//! experiment.

use crate::ConfigError;
use grassmann_core::spherical::canonicalize;
use grassmann_core::{GrassmannParams, NormalizationMode, SphericalEvalOptions, TorusPoint};
use serde::Deserialize;
use std::path::Path;

pub fn load<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

/// Interprets raw coordinate vectors as torus points, reducing each to the
/// canonical domain; evaluation is invariant under that reduction.
pub fn torus_points(
    space: &GrassmannParams,
    raw: &[Vec<f64>],
) -> Result<Vec<TorusPoint>, ConfigError> {
    raw.iter()
        .map(|t| canonicalize(space, t).map_err(ConfigError::from))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SphericalConfig {
    pub p: i64,
    pub q: i64,
    pub l: i64,
    /// Weight parameters m, one row per weight.
    pub weights: Vec<Vec<i64>>,
    /// Torus coordinate vectors, one row per evaluation point.
    pub points: Vec<Vec<f64>>,
    #[serde(default)]
    pub normalization: Option<NormalizationMode>,
    #[serde(default)]
    pub confluence_tolerance: Option<f64>,
}

impl SphericalConfig {
    pub fn eval_options(&self) -> SphericalEvalOptions {
        let mut opts = SphericalEvalOptions::default();
        if let Some(mode) = self.normalization {
            opts.normalization_mode = mode;
        }
        if let Some(tol) = self.confluence_tolerance {
            opts.confluence_tolerance = tol;
        }
        opts
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightSpec {
    pub m: Vec<i64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Pair the sampled orbital measure with one spherical function and
    /// compare against the closed-form product.
    Pairing,
    /// Average psi(u1 k u2) chi_l(k) over Haar k and compare with
    /// psi(u1) psi(u2); requires exactly two points.
    FunctionalEquation,
    /// Compare the joint sampler of the convolved measure with the
    /// composition of independent single-factor samplers.
    Consistency,
}

impl McMode {
    pub fn name(self) -> &'static str {
        match self {
            McMode::Pairing => "pairing",
            McMode::FunctionalEquation => "functional_equation",
            McMode::Consistency => "consistency",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub p: i64,
    pub q: i64,
    pub l: i64,
    pub points: Vec<Vec<f64>>,
    pub weight: WeightSpec,
    pub samples: u64,
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub mode: Option<McMode>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SobolevConfig {
    pub p: i64,
    pub q: i64,
    pub l: i64,
    pub points: Vec<Vec<f64>>,
    /// Sobolev exponent, given either directly ...
    #[serde(default)]
    pub s: Option<f64>,
    /// ... or through a smoothness order nu with slack epsilon.
    #[serde(default)]
    pub nu: Option<i64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    pub m1_max: i64,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SobolevConfig {
    /// The exponent actually summed with: s, or the embedding exponent
    /// nu + (dim SU(p+q))/2 + epsilon when nu is given.
    pub fn exponent(&self, space: &GrassmannParams) -> Result<f64, ConfigError> {
        match (self.s, self.nu) {
            (Some(_), Some(_)) => {
                Err(ConfigError("give either s or nu, not both".into()))
            }
            (Some(s), None) => {
                if self.epsilon.is_some() {
                    return Err(ConfigError(
                        "epsilon applies only together with nu".into(),
                    ));
                }
                Ok(s)
            }
            (None, Some(nu)) => Ok(grassmann_core::weights::sobolev_exponent(
                space,
                nu,
                self.epsilon.unwrap_or(0.01),
            )),
            (None, None) => Err(ConfigError("one of s or nu is required".into())),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisConfig {
    pub p: i64,
    pub q: i64,
    pub l: i64,
    /// Defining points of the convolved orbital measure.
    pub points: Vec<Vec<f64>>,
    /// Torus points at which the density is synthesized.
    pub grid: Vec<Vec<f64>>,
    pub m1_max: i64,
    #[serde(default)]
    pub workers: Option<usize>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let text = r#"{"p":2,"q":1,"l":0,"points":[[0.7]],"weight":{"m":[1]},
                       "samples":10,"seed":1,"typo_field":3}"#;
        let parsed: Result<McConfig, _> = serde_json::from_str(text);
        assert!(parsed.is_err());
    }

    #[test]
    fn sobolev_exponent_resolution_enforces_exclusivity() {
        let space = grassmann_core::make_space(2, 1).unwrap();
        let base = r#"{"p":2,"q":1,"l":0,"points":[[0.7]],"m1_max":50"#;
        let with = |extra: &str| -> SobolevConfig {
            serde_json::from_str(&format!("{base}{extra}}}")).unwrap()
        };
        assert!(with(r#","s":2.5"#).exponent(&space).unwrap() == 2.5);
        let from_nu = with(r#","nu":1"#).exponent(&space).unwrap();
        assert!((from_nu - 5.01).abs() < 1e-12);
        assert!(with(r#","s":2.5,"nu":1"#).exponent(&space).is_err());
        assert!(with(r#","s":2.5,"epsilon":0.1"#).exponent(&space).is_err());
        assert!(with("").exponent(&space).is_err());
    }

    #[test]
    fn mc_mode_names_match_serde_spelling() {
        let m: McMode = serde_json::from_str("\"functional_equation\"").unwrap();
        assert_eq!(m, McMode::FunctionalEquation);
        assert_eq!(m.name(), "functional_equation");
    }
}

//! Experiment configuration: the versioned JSON schema read by every subcommand.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shellxy_core::mesh::HypothesisThresholds;
use shellxy_core::minimize::{AnnulusOptions, SolveOptions};
use shellxy_core::SurfaceKind;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Minimize,
    Scaling,
    CoreEnergy,
    Renormalized,
    Validate,
}

/// Mesh generator and the refinement levels to build, coarse to fine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Icosphere {
        levels: Vec<u32>,
    },
    CubedSphere {
        n: Vec<usize>,
    },
    /// `(n_major, n_minor)` per level.
    Torus {
        resolutions: Vec<[usize; 2]>,
    },
    /// `(n_lat, n_lon)` per level.
    UvSphere {
        resolutions: Vec<[usize; 2]>,
    },
    /// Square grid `[origin, origin + side]²` with `n` cells per side.
    PlanarGrid {
        origin: [f64; 2],
        side: f64,
        n: Vec<usize>,
    },
}

impl MeshSpec {
    pub fn level_count(&self) -> usize {
        match self {
            MeshSpec::Icosphere { levels } => levels.len(),
            MeshSpec::CubedSphere { n } | MeshSpec::PlanarGrid { n, .. } => n.len(),
            MeshSpec::Torus { resolutions } | MeshSpec::UvSphere { resolutions } => {
                resolutions.len()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectConfig {
    pub center: [f64; 3],
    pub charge: i32,
}

/// How the starting fields are produced. Restarts beyond the deterministic starts are
/// uniformly random.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitStrategy {
    Random,
    /// The hedgehog ansatz with the listed defects as first start.
    Hedgehog {
        defects: Vec<DefectConfig>,
    },
    /// The restriction of the smooth nonvanishing field (surfaces with zero Euler
    /// characteristic) as first start.
    Smooth,
    /// Random starts on the coarsest level; each later level starts from the minimizers of
    /// the previous one, transferred to the finer mesh.
    Continuation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreEnergyConfig {
    pub center: [f64; 3],
    pub delta: f64,
    pub use_annulus: bool,
    pub annulus: AnnulusOptions,
}

impl Default for CoreEnergyConfig {
    fn default() -> Self {
        CoreEnergyConfig {
            center: [0.0, 0.0, 1.0],
            delta: 0.4,
            use_annulus: true,
            annulus: AnnulusOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenormalizedConfig {
    pub deltas: Vec<f64>,
}

impl Default for RenormalizedConfig {
    fn default() -> Self {
        RenormalizedConfig {
            deltas: vec![0.4, 0.2, 0.1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    pub experiment: ExperimentKind,
    pub surface: SurfaceKind,
    pub mesh: MeshSpec,
    #[serde(default = "default_init")]
    pub init: InitStrategy,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub core_energy: CoreEnergyConfig,
    #[serde(default)]
    pub renormalized: RenormalizedConfig,
    #[serde(default)]
    pub thresholds: HypothesisThresholds,
    /// Relative merge radius of the defect clustering, in units of the mesh size.
    #[serde(default = "default_merge")]
    pub merge_radius: f64,
}

fn default_init() -> InitStrategy {
    InitStrategy::Random
}

fn default_merge() -> f64 {
    3.0
}

impl ExperimentConfig {
    /// Parses and validates a configuration; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            bail!(
                "field `schema`: unsupported version {} (expected {SCHEMA_VERSION})",
                self.schema
            );
        }
        if self.mesh.level_count() == 0 {
            bail!("field `mesh`: level list is empty");
        }
        if self.solve.max_iters == 0 {
            bail!("field `solve.max_iters`: must be at least 1");
        }
        if let Some(t) = self.solve.grad_tol {
            if !(t > 0.0) {
                bail!("field `solve.grad_tol`: must be positive");
            }
        }
        if !(self.merge_radius > 0.0) {
            bail!("field `merge_radius`: must be positive");
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    /// The seed also drives the solver.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.solve.seed = seed;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "schema": 1,
        "experiment": "minimize",
        "surface": {"kind": "sphere", "radius": 1.0},
        "mesh": {"generator": "icosphere", "levels": [2]}
    }"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.init, InitStrategy::Random);
        assert_eq!(c.solve, SolveOptions::default());
        assert_eq!(c.hash().len(), 64);
    }

    #[test]
    fn missing_and_unknown_fields_are_named() {
        let missing = MINIMAL.replace(r#""surface": {"kind": "sphere", "radius": 1.0},"#, "");
        let e = format!("{:#}", ExperimentConfig::from_json(&missing).unwrap_err());
        assert!(e.contains("surface"), "{e}");
        let unknown = MINIMAL.replace(r#""schema": 1,"#, r#""schema": 1, "colour": 3,"#);
        let e = format!("{:#}", ExperimentConfig::from_json(&unknown).unwrap_err());
        assert!(e.contains("colour"), "{e}");
        let wrong = MINIMAL.replace(r#""schema": 1"#, r#""schema": 2"#);
        assert!(
            format!("{:#}", ExperimentConfig::from_json(&wrong).unwrap_err()).contains("schema")
        );
        let empty = MINIMAL.replace("[2]", "[]");
        assert!(format!("{:#}", ExperimentConfig::from_json(&empty).unwrap_err()).contains("mesh"));
    }

    #[test]
    fn hash_tracks_content() {
        let a = ExperimentConfig::from_json(MINIMAL).unwrap();
        let b = a.clone().with_seed(5);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(
            a.hash(),
            ExperimentConfig::from_json(MINIMAL).unwrap().hash()
        );
    }
}

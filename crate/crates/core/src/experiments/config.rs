//! Experiment configuration files (TOML or JSON) and their resolution
//! against per-experiment defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::{sample_viscosities, MemberParams, Sampling, ViscosityRanges};
use crate::error::{Error, Result};

use super::convergence::Comparison;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    /// `square`, `cavity` or `channel`; informational, each experiment
    /// fixes its geometry.
    pub kind: Option<String>,
    /// Cells per side before refinement (square and cavity).
    pub n: Option<usize>,
    /// Cell width before refinement (channel).
    pub h_target: Option<f64>,
}

/// Every field is optional; missing ones fall back to the experiment's
/// defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ensemble size.
    #[serde(rename = "J", alias = "j")]
    pub count: Option<usize>,
    pub s: Option<f64>,
    pub mu: Option<f64>,
    pub eps: Option<f64>,
    pub dt: Option<f64>,
    #[serde(rename = "T", alias = "end_time")]
    pub end_time: Option<f64>,
    pub mesh: Option<MeshSpec>,
    /// Viscosity rectangle(s) to sample; convergence-in-time runs one table per entry.
    pub ranges: Option<Vec<ViscosityRanges>>,
    /// Explicit members; overrides `ranges` and `J`.
    pub members: Option<Vec<MemberParams>>,
    pub seed: Option<u64>,
    pub deterministic_grid: Option<bool>,
    /// Spatial study meshes (cells per side).
    pub meshes: Option<Vec<usize>>,
    /// Temporal study divisors `T / dt`.
    pub divisors: Option<Vec<usize>>,
    pub eps_list: Option<Vec<f64>>,
    pub comparison: Option<Comparison>,
    /// Cavity Reynolds-number range (`nu = 2 / Re`).
    pub reynolds: Option<[f64; 2]>,
    /// Magnetic diffusivity range of the cavity.
    pub nu_m: Option<[f64; 2]>,
    /// Write a VTK snapshot every this many steps (0: final only).
    pub snapshot_every: Option<usize>,
}

impl ExperimentConfig {
    /// Parses JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        }
    }

    pub fn mesh_n(&self) -> Option<usize> {
        self.mesh.as_ref().and_then(|m| m.n)
    }

    pub fn mesh_h_target(&self) -> Option<f64> {
        self.mesh.as_ref().and_then(|m| m.h_target)
    }

    /// Seeded uniform sampling unless the grid is requested.
    pub fn sampling(&self) -> Sampling {
        if self.deterministic_grid.unwrap_or(false) {
            Sampling::Grid
        } else {
            Sampling::Uniform { seed: self.seed.unwrap_or(0) }
        }
    }

    /// Explicit members if given, otherwise `J` (or `default_count`) draws
    /// from `ranges`.
    pub fn members_or_sample(&self, ranges: ViscosityRanges, default_count: usize) -> Result<Vec<MemberParams>> {
        if let Some(m) = &self.members {
            for p in m {
                p.validate()?;
            }
            return Ok(m.clone());
        }
        sample_viscosities(ranges, self.count.unwrap_or(default_count), self.sampling())
    }

    /// Configured viscosity rectangles, or `defaults`.
    pub fn ranges_or(&self, defaults: &[ViscosityRanges]) -> Vec<ViscosityRanges> {
        self.ranges.clone().unwrap_or_else(|| defaults.to_vec())
    }
}

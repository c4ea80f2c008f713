//! The TOML pipeline configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use kinrep::flux::FluxSpec;
use kinrep::poly::Poly;
use kinrep::solver::{Boundary, InitialData};
use kinrep::structure::LebesgueThresholds;

use crate::error::{CliError, CliResult};

pub const FIXTURES: [&str; 5] = [
    "shock",
    "rarefaction",
    "constant-periodic",
    "box-2d",
    "glued",
];

/// Cells per axis above which a run is refused.
pub const MAX_CELLS_1D: usize = 16384;
pub const MAX_CELLS_2D: usize = 512;
pub const MAX_LEVEL: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Required unless the initial data is a named fixture or a saved solution.
    #[serde(default)]
    pub flux: Option<FluxSpec>,
    pub initial: InitialSpec,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    /// Horizontal weight override for every level.
    #[serde(default)]
    pub l: Option<f64>,
    /// Entropies given by the coefficients of `η″`; `η(0) = η′(0) = 0`.
    #[serde(default = "default_entropies")]
    pub entropies: Vec<Vec<f64>>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
    #[serde(default)]
    pub structure: StructureConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Velocity rows of the kinetic extraction and of the ensembles.
    #[serde(default = "default_nv")]
    pub nv: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub fixture: Option<String>,
    /// One cell value per line; a header line is allowed.
    pub csv: Option<PathBuf>,
    pub data: Option<InitialData>,
    /// A solution written by `solve` (the JSON header file).
    pub solution: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: Option<usize>,
    pub lo: Option<[f64; 2]>,
    pub hi: Option<[f64; 2]>,
    pub n: Option<usize>,
    pub t_final: Option<f64>,
    pub boundary: Option<Boundary>,
    pub cfl: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Diagnostics {
    pub pushforward: bool,
    pub equicontinuity: bool,
    pub weak_estimate: bool,
    pub weak_trials: usize,
    pub curve_cap: usize,
}

impl Default for Diagnostics {
    fn default() -> Self {
        Diagnostics {
            pushforward: true,
            equicontinuity: true,
            weak_estimate: true,
            weak_trials: 20,
            curve_cap: 4_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StructureConfig {
    /// Diagnostic centres: `(t, x)` in one space dimension, `x` otherwise.
    pub points: Vec<[f64; 2]>,
    pub r_max: f64,
    pub ratio: f64,
    pub count: usize,
    /// Time of the analysed slice in two space dimensions (default `T/2`).
    pub t: Option<f64>,
    pub thresholds: LebesgueThresholds,
}

impl Default for StructureConfig {
    fn default() -> Self {
        StructureConfig {
            points: Vec::new(),
            r_max: 0.125,
            ratio: 0.7,
            count: 16,
            t: None,
            thresholds: LebesgueThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Criteria to run; all of them when absent.
    pub criteria: Option<Vec<usize>>,
}

fn default_levels() -> Vec<usize> {
    vec![2, 3, 4]
}

fn default_entropies() -> Vec<Vec<f64>> {
    vec![vec![1.0]]
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_nv() -> usize {
    64
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            flux: None,
            initial: InitialSpec {
                fixture: Some("shock".into()),
                ..Default::default()
            },
            grid: GridConfig::default(),
            levels: default_levels(),
            l: None,
            entropies: default_entropies(),
            diagnostics: Diagnostics::default(),
            structure: StructureConfig::default(),
            verify: VerifyConfig::default(),
            out: default_out(),
            seed: 0,
            nv: default_nv(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> CliResult<PipelineConfig> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<PipelineConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn validate(&self) -> CliResult<()> {
        let i = &self.initial;
        let sources = [
            i.fixture.is_some(),
            i.csv.is_some(),
            i.data.is_some(),
            i.solution.is_some(),
        ];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(CliError::Config(
                "initial data needs exactly one of fixture, csv, data, solution".into(),
            ));
        }
        if let Some(name) = &i.fixture {
            if !FIXTURES.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "unknown fixture '{name}' (known: {})",
                    FIXTURES.join(", ")
                )));
            }
            let g = &self.grid;
            if g.d.is_some()
                || g.lo.is_some()
                || g.hi.is_some()
                || g.boundary.is_some()
                || g.t_final.is_some()
                || g.cfl.is_some()
            {
                return Err(CliError::Config(format!(
                    "fixture '{name}' fixes its grid; only grid.n may be set"
                )));
            }
            if self.flux.is_some() {
                return Err(CliError::Config(format!("fixture '{name}' fixes its flux")));
            }
        } else if i.csv.is_some() || i.data.is_some() {
            if self.flux.is_none() {
                return Err(CliError::Config(
                    "custom initial data needs a [flux] table".into(),
                ));
            }
            let g = &self.grid;
            if g.d.is_none()
                || g.lo.is_none()
                || g.hi.is_none()
                || g.n.is_none()
                || g.t_final.is_none()
            {
                return Err(CliError::Config(
                    "custom initial data needs grid.d, grid.lo, grid.hi, grid.n and grid.t_final"
                        .into(),
                ));
            }
        }
        let d = match self.initial.fixture.as_deref() {
            Some("box-2d") => 2,
            _ => self.grid.d.unwrap_or(1),
        };
        if let Some(n) = self.grid.n {
            let cap = if d == 1 { MAX_CELLS_1D } else { MAX_CELLS_2D };
            if n == 0 || n > cap {
                return Err(CliError::Config(format!(
                    "grid.n = {n} outside 1..={cap} for d = {d}"
                )));
            }
        }
        if let Some(&bad) = self.levels.iter().find(|&&n| n == 0 || n > MAX_LEVEL) {
            return Err(CliError::Config(format!(
                "level {bad} outside 1..={MAX_LEVEL}"
            )));
        }
        if self.nv == 0 || self.nv > 1024 {
            return Err(CliError::Config(format!(
                "nv = {} outside 1..=1024",
                self.nv
            )));
        }
        if self.entropies.iter().any(|e| e.is_empty()) {
            return Err(CliError::Config(
                "entropy η″ coefficient lists must be nonempty".into(),
            ));
        }
        let s = &self.structure;
        if s.count < 8 || !(s.ratio > 0.0 && s.ratio < 1.0) || !(s.r_max > 0.0) {
            return Err(CliError::Config(
                "structure radii need count >= 8, 0 < ratio < 1 and r_max > 0".into(),
            ));
        }
        if let Some(ids) = &self.verify.criteria {
            if let Some(bad) = ids.iter().find(|&&c| !(1..=10).contains(&c)) {
                return Err(CliError::Config(format!("unknown criterion {bad}")));
            }
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        let s = &self.structure;
        (0..s.count)
            .map(|k| s.r_max * s.ratio.powi(k as i32))
            .collect()
    }

    /// `η″` of entropy `k`.
    pub fn eta_second(&self, k: usize) -> Poly {
        Poly::new(self.entropies[k].clone())
    }

    /// Rejects entropies that are not convex on `[0, u_max]`.
    pub fn check_entropies(&self, u_max: f64) -> CliResult<()> {
        for k in 0..self.entropies.len() {
            let ((_, lo), _) = self.eta_second(k).min_max(0.0, u_max);
            if lo < 0.0 {
                return Err(CliError::Config(format!(
                    "entropy {k} is not convex: η″ reaches {lo:.3e} on [0, {u_max}]"
                )));
            }
        }
        Ok(())
    }

    /// `η` with `η(0) = η′(0) = 0`.
    pub fn eta(&self, k: usize) -> Poly {
        self.eta_second(k).integral().integral()
    }
}

//! Simulation configuration.
//!
//! Configs are TOML files with the sections `[model] [grid] [particles]
//! [time] [output] [ic]`. Unknown keys are rejected. Defaults:
//!
//! | key | default |
//! |-----|---------|
//! | `grid.lx`, `grid.ly` | `2π` |
//! | `particles.per_cell` | 16 |
//! | `particles.density` | 1.0 |
//! | `particles.jitter`, `particles.seed` | 0 |
//! | `time.dt` | 0.0204 |
//! | `time.fp_tol`, `time.cg_tol` | 1e-9 |
//! | `time.fp_max_iter` / `time.cg_max_iter` | 50 / 500 |
//! | `output.dir` | `out` |
//! | `output.snapshot_stride` | 10 (0 disables) |
//! | `ic.kind` | `rest` |

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use epmesh_core::{DepthForce, GridSpec, ModelKind, ModelSpec, StepConfig};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid value for `{key}`: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelName {
    EpDiff,
    SwAlpha,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DepthForceName {
    #[default]
    Exact,
    Approximate,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub kind: ModelName,
    pub alpha: f64,
    #[serde(default)]
    pub g: Option<f64>,
    #[serde(default)]
    pub depth_force: DepthForceName,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "two_pi")]
    pub lx: f64,
    #[serde(default = "two_pi")]
    pub ly: f64,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleSection {
    #[serde(default = "default_per_cell")]
    pub per_cell: usize,
    /// Target value of `⟨D̄⟩`.
    #[serde(default = "one")]
    pub density: f64,
    /// Uniform random displacement, as a fraction of the sub-lattice spacing.
    #[serde(default)]
    pub jitter: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ParticleSection {
    fn default() -> Self {
        Self {
            per_cell: default_per_cell(),
            density: 1.0,
            jitter: 0.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_tol")]
    pub fp_tol: f64,
    #[serde(default = "default_fp_iter")]
    pub fp_max_iter: usize,
    #[serde(default = "default_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_iter")]
    pub cg_max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// Extra steps to snapshot regardless of the stride.
    #[serde(default)]
    pub snapshot_steps: Vec<usize>,
    #[serde(default)]
    pub dump_particles: bool,
    #[serde(default)]
    pub dump_components: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            snapshot_stride: default_stride(),
            snapshot_steps: Vec::new(),
            dump_particles: false,
            dump_components: false,
        }
    }
}

/// Initial momentum field.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IcSpec {
    #[default]
    Rest,
    /// Constant velocity `(ux, uy)`.
    UniformFlow { ux: f64, uy: f64 },
    /// Two strips of opposite x-velocity that run along y and approach
    /// each other.
    TwoLines {
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "default_width")]
        width: f64,
        #[serde(default = "default_separation")]
        separation: f64,
        /// Strip length along y; `None` spans the domain.
        #[serde(default)]
        length: Option<f64>,
        /// Shift of the second strip along y.
        #[serde(default)]
        offset: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelSection,
    grid: GridSection,
    #[serde(default)]
    particles: ParticleSection,
    time: TimeSection,
    #[serde(default)]
    output: OutputSection,
    #[serde(default)]
    ic: IcSpec,
}

/// Validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub particles: ParticleSection,
    pub time: TimeSection,
    pub output: OutputSection,
    pub ic: IcSpec,
}

fn two_pi() -> f64 {
    2.0 * PI
}
fn one() -> f64 {
    1.0
}
fn default_per_cell() -> usize {
    16
}
fn default_dt() -> f64 {
    0.0204
}
fn default_tol() -> f64 {
    1e-9
}
fn default_fp_iter() -> usize {
    50
}
fn default_cg_iter() -> usize {
    500
}
fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_stride() -> usize {
    10
}
fn default_width() -> f64 {
    0.2
}
fn default_separation() -> f64 {
    PI / 2.0
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(0),
        message: e.message().to_string(),
    })?;
    let cfg = SimConfig {
        model: raw.model,
        grid: raw.grid,
        particles: raw.particles,
        time: raw.time,
        output: raw.output,
        ic: raw.ic,
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<SimConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

fn positive(key: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be positive, got {v}")))
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !(m.alpha.is_finite() && m.alpha >= 0.0) {
            return Err(invalid("model.alpha", format!("must be non-negative, got {}", m.alpha)));
        }
        match (m.kind, m.g) {
            (ModelName::SwAlpha, None) => return Err(invalid("model.g", "required for sw-alpha")),
            (ModelName::SwAlpha, Some(g)) => positive("model.g", g)?,
            (ModelName::EpDiff, _) => {}
        }
        positive("grid.lx", self.grid.lx)?;
        positive("grid.ly", self.grid.ly)?;
        for (key, n) in [("grid.nx", self.grid.nx), ("grid.ny", self.grid.ny)] {
            if n < epmesh_core::grid::MIN_NODES {
                return Err(invalid(key, format!("need at least {} nodes, got {n}", epmesh_core::grid::MIN_NODES)));
            }
        }
        if ![1, 4, 9, 16, 25].contains(&self.particles.per_cell) {
            return Err(invalid(
                "particles.per_cell",
                format!("must be one of 1, 4, 9, 16, 25, got {}", self.particles.per_cell),
            ));
        }
        positive("particles.density", self.particles.density)?;
        if !(self.particles.jitter.is_finite() && (0.0..0.5).contains(&self.particles.jitter)) {
            return Err(invalid("particles.jitter", "must lie in [0, 0.5)"));
        }
        positive("time.dt", self.time.dt)?;
        if !(self.time.t_end.is_finite() && self.time.t_end >= 0.0) {
            return Err(invalid("time.t_end", format!("must be non-negative, got {}", self.time.t_end)));
        }
        positive("time.fp_tol", self.time.fp_tol)?;
        positive("time.cg_tol", self.time.cg_tol)?;
        if self.time.fp_max_iter == 0 {
            return Err(invalid("time.fp_max_iter", "must be at least 1"));
        }
        if self.time.cg_max_iter == 0 {
            return Err(invalid("time.cg_max_iter", "must be at least 1"));
        }
        if let IcSpec::TwoLines {
            amplitude,
            width,
            separation,
            length,
            offset,
        } = &self.ic
        {
            if !amplitude.is_finite() {
                return Err(invalid("ic.amplitude", "must be finite"));
            }
            positive("ic.width", *width)?;
            if 2.0 * width >= self.grid.lx {
                return Err(invalid("ic.width", "strips wider than the domain"));
            }
            if !(separation.is_finite() && *separation > 0.0 && *separation < self.grid.lx) {
                return Err(invalid("ic.separation", "must lie in (0, lx)"));
            }
            if let Some(l) = length {
                positive("ic.length", *l)?;
            }
            if !offset.is_finite() {
                return Err(invalid("ic.offset", "must be finite"));
            }
        }
        if let IcSpec::UniformFlow { ux, uy } = &self.ic {
            if !(ux.is_finite() && uy.is_finite()) {
                return Err(invalid("ic.ux", "velocity must be finite"));
            }
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid.lx, self.grid.ly, self.grid.nx, self.grid.ny)
            .expect("validated grid")
    }

    pub fn model_spec(&self) -> ModelSpec {
        let kind = match self.model.kind {
            ModelName::EpDiff => ModelKind::EpDiff,
            ModelName::SwAlpha => ModelKind::SwAlpha,
        };
        ModelSpec {
            kind,
            alpha: self.model.alpha,
            g: self.model.g.unwrap_or(0.0),
            depth_force: match self.model.depth_force {
                DepthForceName::Exact => DepthForce::Exact,
                DepthForceName::Approximate => DepthForce::Approximate,
            },
        }
    }

    pub fn step_config(&self) -> StepConfig {
        StepConfig {
            dt: self.time.dt,
            fp_tol: self.time.fp_tol,
            fp_max_iter: self.time.fp_max_iter,
            cg_tol: self.time.cg_tol,
            cg_max_iter: self.time.cg_max_iter,
        }
    }

    /// Number of steps needed to reach `t_end`; the run ends at
    /// `n_steps · dt ≥ t_end`.
    pub fn n_steps(&self) -> usize {
        (self.time.t_end / self.time.dt - 1e-9).ceil().max(0.0) as usize
    }

    pub fn is_snapshot_step(&self, step: usize) -> bool {
        let stride = self.output.snapshot_stride;
        (stride > 0 && step.is_multiple_of(stride)) || self.output.snapshot_steps.contains(&step)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "
[model]
kind = \"ep-diff\"
alpha = 0.3133

[grid]
nx = 32
ny = 32

[time]
t_end = 1.0
";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.time.dt, 0.0204);
        assert_eq!(c.time.fp_tol, 1e-9);
        assert_eq!(c.time.cg_tol, 1e-9);
        assert_eq!(c.particles.per_cell, 16);
        assert_eq!(c.grid.lx, 2.0 * PI);
        assert_eq!(c.ic, IcSpec::Rest);
        assert_eq!(c.n_steps(), 50);
    }

    #[test]
    fn rejects_non_square_per_cell() {
        let text = format!("{MINIMAL}\n[particles]\nper_cell = 7\n");
        match parse_config(&text) {
            Err(ConfigError::Invalid { key, .. }) => assert_eq!(key, "particles.per_cell"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_with_line() {
        let text = MINIMAL.replace("ny = 32", "ny = 32\nnz = 4");
        match parse_config(&text) {
            Err(ConfigError::Parse { line, message }) => {
                assert!(message.contains("nz"), "{message}");
                assert!(line >= 8, "{line}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sw_alpha_needs_gravity() {
        let text = MINIMAL.replace("ep-diff", "sw-alpha");
        assert!(matches!(parse_config(&text), Err(ConfigError::Invalid { key: "model.g", .. })));
    }

    #[test]
    fn two_lines_defaults() {
        let text = format!("{MINIMAL}\n[ic]\nkind = \"two_lines\"\n");
        let c = parse_config(&text).unwrap();
        match c.ic {
            IcSpec::TwoLines {
                amplitude,
                width,
                separation,
                length,
                offset,
            } => {
                assert_eq!((amplitude, width, separation), (1.0, 0.2, PI / 2.0));
                assert_eq!(length, None);
                assert_eq!(offset, 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn snapshot_schedule() {
        let text = format!("{MINIMAL}\n[output]\nsnapshot_stride = 0\nsnapshot_steps = [0, 12]\n");
        let c = parse_config(&text).unwrap();
        assert!(c.is_snapshot_step(0) && c.is_snapshot_step(12));
        assert!(!c.is_snapshot_step(10));
    }

    #[test]
    fn step_count_rounding() {
        let mut c = parse_config(MINIMAL).unwrap();
        c.time.t_end = 0.0;
        assert_eq!(c.n_steps(), 0);
        c.time.t_end = 3.0 * c.time.dt;
        assert_eq!(c.n_steps(), 3);
    }
}

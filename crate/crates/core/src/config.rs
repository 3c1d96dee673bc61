//! JSON run configuration shared by all subcommands.
//!
//! Every section has defaults and rejects unknown keys, so a config file
//! only needs the fields it changes.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::faddeev::{ChannelConfig, MassParams, ThreeBodyOptions};
use crate::grids::{MapKind, MomentumGrid, DEFAULT_OUTER};
use crate::potentials::Shape;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PotentialConfig {
    pub shape: Shape,
    /// Fixed strength; when absent the strength is tuned to `e2`.
    pub v0: Option<f64>,
    /// Resonance index: which two-body state is tuned.
    pub r: usize,
    /// Target energy of two-body state `r`.
    pub e2: f64,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        Self { shape: Shape::Gaussian, v0: None, r: 1, e2: -1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MassConfig {
    pub alpha: f64,
}

impl Default for MassConfig {
    fn default() -> Self {
        Self { alpha: 20.0 }
    }
}

/// Two-body momentum grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub count: usize,
    pub map: MapKind,
    /// Clustering scale; defaults to a quarter of the target binding
    /// momentum `sqrt(2 |e2|)`.
    pub scale: Option<f64>,
    pub outer: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { count: 200, map: MapKind::SymmetricLogClustered, scale: None, outer: DEFAULT_OUTER }
    }
}

impl GridConfig {
    pub fn build(&self, e2: f64) -> Result<MomentumGrid> {
        let scale = self.scale.unwrap_or(0.25 * (2.0 * e2.abs()).sqrt());
        match self.map {
            MapKind::SymmetricRational => MomentumGrid::rational(self.count, scale),
            MapKind::SymmetricLogClustered => MomentumGrid::log_clustered(self.count, scale, self.outer, &[]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelsConfig {
    pub nu_max: usize,
    /// Included terms; all of `0..nu_max` when absent.
    pub include: Option<Vec<usize>>,
}

impl Default for ChannelsConfig {
    fn default() -> Self {
        Self { nu_max: 10, include: None }
    }
}

impl ChannelsConfig {
    pub fn build(&self) -> Result<ChannelConfig> {
        ChannelConfig::new(self.nu_max, self.include.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FieldConfig {
    /// Half width of the sampled square in scaled momenta.
    pub extent: f64,
    /// Points per axis.
    pub resolution: usize,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { extent: 6.0, resolution: 96 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub shapes: Vec<Shape>,
    pub resonances: Vec<usize>,
    /// Two-body target energies, most bound first.
    pub e2: Vec<f64>,
    pub fidelity: bool,
    /// Contact energy used for the reference ratios and fields.
    pub reference_e2: f64,
    /// Ablation masks.
    pub masks: Vec<Vec<usize>>,
    /// Three-body state followed by the ablation study.
    pub ablation_n: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            shapes: vec![Shape::LorentzCubed, Shape::Gaussian],
            resonances: vec![1, 2],
            e2: vec![-1e-3, -1e-4, -1e-5],
            fidelity: true,
            reference_e2: -1e-3,
            masks: vec![vec![0, 1, 2], vec![0, 2], vec![1, 2], vec![2]],
            ablation_n: 1,
        }
    }
}

/// Pass thresholds for the universality and ablation comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToleranceConfig {
    /// Relative agreement of ratios between finite-range shapes.
    pub universality: f64,
    /// Relative separation used to compare ablation limits.
    pub ablation: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { universality: 0.02, ablation: 0.01 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    pub mass: MassConfig,
    pub grid: GridConfig,
    pub three_body: ThreeBodyOptions,
    pub channels: ChannelsConfig,
    pub field: FieldConfig,
    pub sweep: SweepConfig,
    pub tolerances: ToleranceConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn mass_params(&self) -> Result<MassParams> {
        MassParams::new(self.mass.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.potential.e2 < 0.0) {
            return bad(format!("potential.e2 must be negative, got {}", self.potential.e2));
        }
        if let Some(v0) = self.potential.v0 {
            if !(v0 < 0.0) {
                return bad(format!("potential.v0 must be negative, got {v0}"));
            }
        }
        if !(self.mass.alpha > 0.0) {
            return bad(format!("mass.alpha must be positive, got {}", self.mass.alpha));
        }
        if self.grid.count < 8 || self.grid.count % 2 != 0 {
            return bad(format!("grid.count must be even and at least 8, got {}", self.grid.count));
        }
        if let Some(s) = self.grid.scale {
            if !(s > 0.0) {
                return bad(format!("grid.scale must be positive, got {s}"));
            }
        }
        let tb = &self.three_body;
        if tb.count < 8 || !(tb.window > 1.0) || tb.scan_points < 2 {
            return bad("three_body needs count >= 8, window > 1 and scan_points >= 2".into());
        }
        if !(tb.pole_window > 0.0 && tb.pole_window < 1.0) {
            return bad(format!("three_body.pole_window must lie in (0, 1), got {}", tb.pole_window));
        }
        self.channels.build()?;
        if !(self.field.extent > 0.0) || self.field.resolution < 3 {
            return bad("field needs extent > 0 and resolution >= 3".into());
        }
        if self.sweep.e2.iter().any(|&e| !(e < 0.0)) || !(self.sweep.reference_e2 < 0.0) {
            return bad("sweep energies must be negative".into());
        }
        if self.sweep.e2.windows(2).any(|w| w[1].abs() >= w[0].abs()) {
            return bad("sweep.e2 must be sorted by decreasing magnitude".into());
        }
        Ok(())
    }
}

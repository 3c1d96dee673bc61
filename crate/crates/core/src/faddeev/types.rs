use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mass-ratio dependent kinematic factors for two heavy particles of mass
/// `M = alpha * m` and one light particle of mass `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassParams {
    pub alpha: f64,
    pub alpha_x: f64,
    pub alpha_y: f64,
}

impl MassParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Config(format!("mass ratio must be positive, got {alpha}")));
        }
        Ok(Self { alpha, alpha_x: (1.0 + 2.0 * alpha) / (2.0 * (1.0 + alpha)), alpha_y: 2.0 / (1.0 + alpha) })
    }

    /// Cross-term coefficient `alpha / (1 + alpha)`.
    pub fn beta(&self) -> f64 {
        self.alpha / (1.0 + self.alpha)
    }

    /// `alpha_x * alpha_y`, the spectator kinetic coefficient.
    pub fn c(&self) -> f64 {
        self.alpha_x * self.alpha_y
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Symmetry {
    Boson,
    Fermion,
}

impl Symmetry {
    pub fn sign(self) -> f64 {
        match self {
            Symmetry::Boson => 1.0,
            Symmetry::Fermion => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Symmetry::Boson => "boson",
            Symmetry::Fermion => "fermion",
        }
    }

    /// State label for the `index`-th state of this symmetry.
    pub fn label(self, index: usize) -> usize {
        2 * index + usize::from(self == Symmetry::Fermion)
    }
}

impl std::fmt::Display for Symmetry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Symmetry {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "boson" => Ok(Symmetry::Boson),
            "fermion" => Ok(Symmetry::Fermion),
            _ => Err(Error::Config(format!("unknown symmetry '{s}'"))),
        }
    }
}

/// Which separable terms enter the three-body kernel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelConfig {
    pub nu_max: usize,
    pub include_mask: Vec<bool>,
}

impl ChannelConfig {
    /// All terms `0..nu_max`, or only those listed in `include`.
    pub fn new(nu_max: usize, include: Option<&[usize]>) -> Result<Self> {
        if nu_max == 0 {
            return Err(Error::Config("nu_max must be positive".into()));
        }
        let mut mask = vec![include.is_none(); nu_max];
        if let Some(list) = include {
            for &nu in list {
                if nu >= nu_max {
                    return Err(Error::Config(format!("included term {nu} not below nu_max = {nu_max}")));
                }
                mask[nu] = true;
            }
        }
        if !mask.iter().any(|&m| m) {
            return Err(Error::Config("at least one term must be included".into()));
        }
        Ok(Self { nu_max, include_mask: mask })
    }

    pub fn included(&self) -> Vec<usize> {
        (0..self.nu_max).filter(|&nu| self.include_mask[nu]).collect()
    }

    pub fn includes(&self, nu: usize) -> bool {
        self.include_mask.get(nu).copied().unwrap_or(false)
    }
}

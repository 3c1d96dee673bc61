//! Heavy-light interaction potentials and their momentum kernels.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids;

const EXP_CUTOFF: f64 = 600.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Shape {
    #[serde(rename = "lorentz3")]
    LorentzCubed,
    #[serde(rename = "gauss")]
    Gaussian,
    #[serde(rename = "contact")]
    Contact,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Shape::LorentzCubed => "lorentz3",
            Shape::Gaussian => "gauss",
            Shape::Contact => "contact",
        }
    }

    pub fn is_finite_range(self) -> bool {
        self != Shape::Contact
    }

    /// Coordinate-space profile at unit strength.
    pub fn profile(self, xi: f64) -> f64 {
        match self {
            Shape::LorentzCubed => {
                let d = 1.0 + xi * xi;
                1.0 / (d * d * d)
            }
            Shape::Gaussian => (-xi * xi).exp(),
            Shape::Contact => f64::NAN,
        }
    }

    /// Fourier transform of the profile at unit strength. Tails below `e^-600` are
    /// flushed to zero to keep subnormals out of the hot loops.
    pub fn transform(self, q: f64) -> f64 {
        match self {
            Shape::LorentzCubed => {
                let a = q.abs();
                if a > EXP_CUTOFF {
                    return 0.0;
                }
                PI / 8.0 * (-a).exp() * (a * a + 3.0 * a + 3.0)
            }
            Shape::Gaussian => {
                let x = 0.25 * q * q;
                if x > EXP_CUTOFF {
                    return 0.0;
                }
                PI.sqrt() * (-x).exp()
            }
            Shape::Contact => 1.0,
        }
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lorentz3" => Ok(Shape::LorentzCubed),
            "gauss" => Ok(Shape::Gaussian),
            "contact" => Ok(Shape::Contact),
            _ => Err(Error::Config(format!("unknown potential shape '{s}'"))),
        }
    }
}

/// An attractive potential `v0 * profile(xi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub shape: Shape,
    pub v0: f64,
    pub label: String,
}

impl PotentialSpec {
    pub fn new(shape: Shape, v0: f64) -> Result<Self> {
        if !v0.is_finite() || v0 >= 0.0 {
            return Err(Error::InvalidPotential(format!("strength must be finite and negative, got {v0}")));
        }
        Ok(Self { shape, v0, label: format!("{}({v0})", shape.name()) })
    }

    pub fn with_strength(&self, v0: f64) -> Result<Self> {
        Self::new(self.shape, v0)
    }

    pub fn is_rank_one(&self) -> bool {
        self.shape == Shape::Contact
    }

    /// `V(xi)`; the contact has no pointwise value.
    pub fn value(&self, xi: f64) -> Result<f64> {
        if self.shape == Shape::Contact {
            return Err(Error::InvalidPotential("contact potential has no pointwise value".into()));
        }
        Ok(self.v0 * self.shape.profile(xi))
    }

    /// Momentum kernel `V(k - k')`.
    pub fn kernel(&self, k: f64, kp: f64) -> f64 {
        self.v0 * self.shape.transform(k - kp)
    }

    /// Compares the closed-form transform with a numerical cosine transform
    /// at a few momenta.
    pub fn self_check(&self) -> Result<()> {
        if !self.shape.is_finite_range() {
            return Ok(());
        }
        let grid = grids::MomentumGrid::log_clustered(1000, 1.0, 60.0, &[])?;
        for q in [0.0, 0.7, 2.5] {
            let samples: Vec<f64> =
                grid.nodes().iter().map(|&x| self.shape.profile(x) * (q * x).cos()).collect();
            let num = grids::integrate(&grid, &samples)?;
            let exact = self.shape.transform(q);
            if (num - exact).abs() > 1e-8 * exact.abs().max(1e-3) {
                return Err(Error::SelfCheck(format!(
                    "{} transform at q={q}: closed form {exact}, quadrature {num}",
                    self.shape
                )));
            }
        }
        Ok(())
    }
}

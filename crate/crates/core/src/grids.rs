//! Quadrature grids on the real momentum line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per Gauss-Legendre panel for log-clustered grids.
pub const PANEL_NODES: usize = 8;

/// Default upper edge of the clustered region, in units where the
/// potential range is 1.
pub const DEFAULT_OUTER: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MapKind {
    /// `k = scale * t / (1 - t^2)` applied to Gauss-Legendre nodes on (-1, 1).
    #[serde(rename = "rational", alias = "symmetric-rational")]
    SymmetricRational,
    /// Composite Gauss-Legendre with geometrically growing panels and a
    /// rational tail.
    #[serde(rename = "log-clustered", alias = "symmetric-log-clustered")]
    SymmetricLogClustered,
}

impl std::str::FromStr for MapKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rational" | "symmetric-rational" => Ok(MapKind::SymmetricRational),
            "log-clustered" | "symmetric-log-clustered" => Ok(MapKind::SymmetricLogClustered),
            _ => Err(Error::Config(format!("unknown grid map '{s}'"))),
        }
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1], nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// A symmetric quadrature rule for integrals over the whole real line.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    map: MapKind,
    scale: f64,
}

impl MomentumGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn map(&self) -> MapKind {
        self.map
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Positive nodes in ascending order and their weights.
    pub fn positive_half(&self) -> (Vec<f64>, Vec<f64>) {
        let start = self.nodes.len().div_ceil(2);
        (self.nodes[start..].to_vec(), self.weights[start..].to_vec())
    }

    /// Rational map grid with `count` nodes.
    pub fn rational(count: usize, scale: f64) -> Result<Self> {
        check_args(count, scale)?;
        let (t, w) = gauss_legendre(count);
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        for (ti, wi) in t.iter().zip(&w) {
            let d = 1.0 - ti * ti;
            nodes.push(scale * ti / d);
            weights.push(wi * scale * (1.0 + ti * ti) / (d * d));
        }
        Ok(Self::from_half_mirrored(nodes, weights, MapKind::SymmetricRational, scale))
    }

    /// Log-clustered grid: a panel on [0, scale], geometric panels up to
    /// `outer`, and a tail on [outer, inf) with `k = outer / (1 - u)`.
    /// Extra breakpoints split the panel that contains them; each split adds
    /// a panel, so the node count can exceed `count`.
    pub fn log_clustered(count: usize, scale: f64, outer: f64, extra: &[f64]) -> Result<Self> {
        check_args(count, scale)?;
        if count % 2 != 0 {
            return Err(Error::Config(format!("log-clustered grids need an even node count, got {count}")));
        }
        if !(outer.is_finite() && outer > 0.0) {
            return Err(Error::Config(format!("grid outer edge must be positive, got {outer}")));
        }
        let half = count / 2;
        let outer = outer.max(4.0 * scale);
        let panels = (half / PANEL_NODES).max(2);
        let mut breaks = vec![0.0, scale];
        if panels > 2 {
            let steps = panels - 2;
            let ratio = (outer / scale).powf(1.0 / steps as f64);
            for i in 1..steps {
                breaks.push(scale * ratio.powi(i as i32));
            }
            breaks.push(outer);
        }
        let tail_start = *breaks.last().unwrap();
        for &b in extra {
            if b > 0.0 && b < tail_start && breaks.iter().all(|&x| (x - b).abs() > 1e-3 * b) {
                breaks.push(b);
            }
        }
        breaks.sort_by(|a, b| a.total_cmp(b));

        let npanel = breaks.len();
        let base = half / npanel;
        let extra_nodes = half % npanel;
        let mut pos = Vec::with_capacity(half + npanel);
        let mut pw = Vec::with_capacity(half + npanel);
        for p in 0..npanel {
            let m = (base + usize::from(p < extra_nodes)).max(PANEL_NODES.min(half / 2));
            let (t, w) = gauss_legendre(m);
            if p + 1 < npanel {
                let (a, b) = (breaks[p], breaks[p + 1]);
                let h = 0.5 * (b - a);
                for (ti, wi) in t.iter().zip(&w) {
                    pos.push(a + h * (ti + 1.0));
                    pw.push(h * wi);
                }
            } else {
                for (ti, wi) in t.iter().zip(&w) {
                    let u = 0.5 * (ti + 1.0);
                    pos.push(tail_start / (1.0 - u));
                    pw.push(0.5 * wi * tail_start / ((1.0 - u) * (1.0 - u)));
                }
            }
        }
        let mut nodes: Vec<f64> = pos.iter().rev().map(|k| -k).collect();
        let mut weights: Vec<f64> = pw.iter().rev().copied().collect();
        nodes.extend_from_slice(&pos);
        weights.extend_from_slice(&pw);
        Ok(Self { nodes, weights, map: MapKind::SymmetricLogClustered, scale })
    }

    fn from_half_mirrored(nodes: Vec<f64>, weights: Vec<f64>, map: MapKind, scale: f64) -> Self {
        // enforce exact mirror symmetry
        let n = nodes.len();
        let mut nodes = nodes;
        let mut weights = weights;
        for i in 0..n / 2 {
            let k = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            let w = 0.5 * (weights[n - 1 - i] + weights[i]);
            nodes[i] = -k;
            nodes[n - 1 - i] = k;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights, map, scale }
    }
}

fn check_args(count: usize, scale: f64) -> Result<()> {
    if count < 8 {
        return Err(Error::Config(format!("grid count must be at least 8, got {count}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Config(format!("grid scale must be positive, got {scale}")));
    }
    Ok(())
}

/// Builds a grid with the default outer edge and no extra breakpoints.
pub fn build_grid(count: usize, map: MapKind, scale: f64) -> Result<MomentumGrid> {
    match map {
        MapKind::SymmetricRational => MomentumGrid::rational(count, scale),
        MapKind::SymmetricLogClustered => {
            MomentumGrid::log_clustered(count, scale, DEFAULT_OUTER.max(scale), &[])
        }
    }
}

/// Sum of `samples` against the grid weights.
pub fn integrate(grid: &MomentumGrid, samples: &[f64]) -> Result<f64> {
    if samples.len() != grid.len() {
        return Err(Error::Shape(format!("{} samples for a grid of {} nodes", samples.len(), grid.len())));
    }
    Ok(grid.weights.iter().zip(samples).map(|(w, f)| w * f).sum())
}

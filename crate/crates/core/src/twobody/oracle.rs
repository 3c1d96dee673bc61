//! Coordinate-space bound states from a finite-difference Hamiltonian.
//!
//! Each parity is solved on the half line `[0, L]` with a fourth-order
//! five-point Laplacian and a hard wall at `L`. Eigenvalues come from
//! Sturm counts (inertia of `H - E`) and bisection, then Richardson
//! extrapolation in the step removes the leading `h^4` error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleState {
    pub energy: f64,
    pub nodes: usize,
    pub parity: i32,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleOptions {
    /// Half width of the box.
    pub box_half_width: f64,
    /// Intervals on `[0, L]` at the coarse step.
    pub points: usize,
    /// Allowed relative change when the box is doubled.
    pub box_tolerance: f64,
    /// Allowed relative change between the two steps before extrapolation.
    pub step_tolerance: f64,
}

impl OracleOptions {
    /// Box sized for a shallowest state at `energy`, step `h`.
    pub fn for_energy(energy: f64, h: f64) -> Self {
        let kappa = (2.0 * energy.abs()).sqrt();
        let l = (12.0 / kappa).max(30.0);
        Self { box_half_width: l, points: (l / h).ceil() as usize, box_tolerance: 1e-7, step_tolerance: 1e-3 }
    }
}

/// Pentadiagonal symmetric Hamiltonian for one parity sector.
struct Penta {
    d0: Vec<f64>,
    d1: Vec<f64>,
    d2: Vec<f64>,
}

impl Penta {
    fn new(pot: &PotentialSpec, h: f64, n: usize, parity: i32) -> Result<Self> {
        let c0 = 30.0 / (24.0 * h * h);
        let c1 = -16.0 / (24.0 * h * h);
        let c2 = 1.0 / (24.0 * h * h);
        // even: unknowns at i = 0..n-1; odd: i = 1..n-1
        let first = if parity > 0 { 0 } else { 1 };
        let m = n - first;
        let mut d0 = Vec::with_capacity(m);
        for i in first..n {
            d0.push(c0 + pot.value(i as f64 * h)?);
        }
        let mut d1 = vec![c1; m.saturating_sub(1)];
        let mut d2 = vec![c2; m.saturating_sub(2)];
        if parity > 0 {
            // mirrored ghosts, symmetrized by scaling psi_0 with 1/sqrt(2)
            d0[1] += c2;
            d1[0] *= 2f64.sqrt();
            d2[0] *= 2f64.sqrt();
        } else {
            d0[0] -= c2;
        }
        Ok(Self { d0, d1, d2 })
    }

    fn len(&self) -> usize {
        self.d0.len()
    }

    /// LDL^T of `H - e`: returns the pivots and the two subdiagonals of L.
    fn ldl(&self, e: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.len();
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n];
        let mut l2 = vec![0.0; n];
        for i in 0..n {
            let mut di = self.d0[i] - e;
            if i >= 1 {
                di -= l1[i] * l1[i] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i] * l2[i] * d[i - 2];
            }
            if di == 0.0 {
                di = f64::MIN_POSITIVE;
            }
            d[i] = di;
            if i + 1 < n {
                let mut a = self.d1[i];
                if i >= 1 {
                    a -= l2[i + 1] * l1[i] * d[i - 1];
                }
                l1[i + 1] = a / di;
            }
            if i + 2 < n {
                l2[i + 2] = self.d2[i] / di;
            }
        }
        (d, l1, l2)
    }

    fn count_below(&self, e: f64) -> usize {
        self.ldl(e).0.iter().filter(|&&x| x < 0.0).count()
    }

    /// Inverse iteration at shift `e`.
    fn vector(&self, e: f64) -> Vec<f64> {
        let (d, l1, l2) = self.ldl(e);
        let n = self.len();
        let mut v = vec![1.0; n];
        for _ in 0..3 {
            // L y = v
            for i in 0..n {
                if i >= 1 {
                    v[i] -= l1[i] * v[i - 1];
                }
                if i >= 2 {
                    v[i] -= l2[i] * v[i - 2];
                }
            }
            for i in 0..n {
                v[i] /= d[i];
            }
            for i in (0..n).rev() {
                if i + 1 < n {
                    v[i] -= l1[i + 1] * v[i + 1];
                }
                if i + 2 < n {
                    v[i] -= l2[i + 2] * v[i + 2];
                }
            }
            let nrm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= nrm);
        }
        v
    }
}

/// Negative eigenvalues of one parity sector, ascending, at most `max`.
fn sector_levels(pot: &PotentialSpec, h: f64, n: usize, parity: i32, max: usize) -> Result<Vec<f64>> {
    let hm = Penta::new(pot, h, n, parity)?;
    let nbound = hm.count_below(0.0).min(max);
    let floor = pot.v0 - 1.0;
    let mut out = Vec::with_capacity(nbound);
    for j in 0..nbound {
        let (mut lo, mut hi) = (floor, 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if hm.count_below(mid) > j {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        out.push(0.5 * (lo + hi));
    }
    Ok(out)
}

fn levels(pot: &PotentialSpec, h: f64, n: usize, r_max: usize) -> Result<Vec<(f64, i32)>> {
    let mut all: Vec<(f64, i32)> = Vec::new();
    for parity in [1, -1] {
        for e in sector_levels(pot, h, n, parity, r_max + 1)? {
            all.push((e, parity));
        }
    }
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    all.truncate(r_max + 1);
    Ok(all)
}

/// Bound states `r = 0..=r_max` of a finite-range potential.
pub fn coordinate_oracle(
    potential: &PotentialSpec,
    r_max: usize,
    opts: &OracleOptions,
) -> Result<Vec<OracleState>> {
    if potential.is_rank_one() {
        return Err(Error::OracleInvalid("contact interaction has no coordinate profile".into()));
    }
    let l = opts.box_half_width;
    let n = opts.points;
    if !(l > 0.0) || n < 16 {
        return Err(Error::OracleInvalid(format!("bad box: L = {l}, points = {n}")));
    }
    let h = l / n as f64;
    let coarse = levels(potential, h, n, r_max)?;
    let fine = levels(potential, 0.5 * h, 2 * n, r_max)?;
    let wide = levels(potential, 0.5 * h, 4 * n, r_max)?;
    if coarse.len() != fine.len() || fine.len() != wide.len() {
        return Err(Error::OracleInvalid(format!(
            "state count changes with the grid: {} / {} / {}",
            coarse.len(),
            fine.len(),
            wide.len()
        )));
    }
    let mut out = Vec::with_capacity(fine.len());
    for (r, ((ec, pc), ((ef, pf), (ew, pw)))) in coarse.iter().zip(fine.iter().zip(&wide)).enumerate() {
        if pc != pf || pf != pw {
            return Err(Error::OracleInvalid(format!("parity of state {r} changes with the grid")));
        }
        let box_shift = ((ef - ew) / ew).abs();
        if box_shift > opts.box_tolerance {
            return Err(Error::OracleInvalid(format!(
                "state {r} moves by {box_shift:e} (relative) when the box is doubled"
            )));
        }
        let step_shift = ((ec - ef) / ef).abs();
        if step_shift > opts.step_tolerance {
            return Err(Error::OracleInvalid(format!(
                "state {r} moves by {step_shift:e} (relative) when the step is halved"
            )));
        }
        let energy = (16.0 * ef - ec) / 15.0;

        let hm = Penta::new(potential, 0.5 * h, 2 * n, *pf)?;
        let v = hm.vector(ef * (1.0 + 1e-9));
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut last = 0.0;
        let mut changes = 0;
        for &x in &v {
            if x.abs() < 1e-6 * vmax {
                continue;
            }
            if last != 0.0 && x.signum() != last {
                changes += 1;
            }
            last = x.signum();
        }
        let nodes = 2 * changes + usize::from(*pf < 0);
        if nodes != r {
            return Err(Error::OracleInvalid(format!("state {r} has {nodes} nodes, expected {r}")));
        }
        out.push(OracleState { energy, nodes, parity: *pf });
    }
    Ok(out)
}

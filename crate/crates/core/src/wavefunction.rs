//! Three-body wave functions rebuilt from the channel functions.
//!
//! Fields are sampled in scaled Jacobi momenta `K23 = k23 / kappa` and
//! `P1 = p1 / kappa`, with `kappa = sqrt(2 |E2|)`, on a uniform tensor grid
//! with trapezoid weights.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use faer::Mat;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::faddeev::{Kernel, Symmetry, ThreeBodySolver, ThreeBodyState};
use crate::twobody::WeinbergSystem;

/// Channel functions of one state at arbitrary spectator momenta.
pub struct Reconstruction<'a> {
    solver: &'a ThreeBodySolver,
    state: &'a ThreeBodyState,
    kernel: Kernel,
    systems: Vec<Arc<WeinbergSystem>>,
}

/// Channel function values and two-body data at one spectator momentum.
struct Slice {
    sys: Arc<WeinbergSystem>,
    ep: f64,
    phi: Vec<f64>,
}

impl<'a> Reconstruction<'a> {
    pub fn new(solver: &'a ThreeBodySolver, state: &'a ThreeBodyState) -> Result<Self> {
        let kernel = solver.kernel(state.energy, state.symmetry)?;
        if kernel.points.len() != state.points.len() {
            return Err(Error::Shape(format!(
                "state has {} points, kernel at its energy has {}",
                state.points.len(),
                kernel.points.len()
            )));
        }
        let c = solver.mass().c();
        let systems = kernel
            .points
            .iter()
            .map(|&x| solver.system(state.energy - 0.5 * c * x * x))
            .collect::<Result<_>>()?;
        Ok(Self { solver, state, kernel, systems })
    }

    pub fn state(&self) -> &ThreeBodyState {
        self.state
    }

    fn slice(&self, p: f64) -> Result<Slice> {
        let st = self.state;
        let c = self.solver.mass().c();
        let beta = self.solver.mass().beta();
        let ep = st.energy - 0.5 * c * p * p;
        let sys = self.solver.system(ep)?;
        for (slot, &nu) in st.channels.iter().enumerate() {
            let eta = sys.etas[nu];
            if (eta - 1.0).abs() < 1e-12 {
                return Err(Error::Pole(format!("channel {nu} (slot {slot}) is on shell at p = {p}")));
            }
        }
        let s = st.symmetry.sign();
        let nch = st.channels.len();
        let n = self.kernel.points.len();
        let mut phi = vec![0.0; nch];
        let mut ga = vec![0.0; sys.len()];
        let mut gam = vec![0.0; sys.len()];
        let mut gb = vec![0.0; sys.len()];
        let mut gbm = vec![0.0; sys.len()];
        for j in 0..n {
            let q = self.kernel.points[j];
            sys.form_factors_at(q + beta * p, &mut ga);
            sys.form_factors_at(q - beta * p, &mut gam);
            self.systems[j].form_factors_at(p + beta * q, &mut gb);
            self.systems[j].form_factors_at(p - beta * q, &mut gbm);
            let base = st.energy - 0.5 * (p * p + q * q);
            let dp = base - beta * p * q;
            let dm = base + beta * p * q;
            for (nslot, &nu) in st.channels.iter().enumerate() {
                let f = self.kernel.fac[(j, nslot)];
                if f == 0.0 {
                    continue;
                }
                let src = st.phi[(j, nslot)] * f / (2.0 * PI);
                let pnu = self.kernel.parities[nslot] as f64;
                for (lslot, &lam) in st.channels.iter().enumerate() {
                    let plam = self.kernel.parities[lslot] as f64;
                    phi[lslot] += src * (ga[lam] * gb[nu] / dp + s * pnu * plam * gam[lam] * gbm[nu] / dm);
                }
            }
        }
        phi.iter_mut().for_each(|x| *x *= s);
        Ok(Slice { sys, ep, phi })
    }

    /// `phi_nu(p)` for every included channel, by Nystrom extension.
    pub fn channel_functions(&self, p: f64) -> Result<Vec<f64>> {
        Ok(self.slice(p)?.phi)
    }

    /// Largest relative mismatch between the extension and the stored
    /// channel functions on the quadrature nodes. The added pole points are
    /// on shell and skipped.
    pub fn self_consistency(&self) -> Result<f64> {
        let st = self.state;
        let scale = amax(st.phi.as_ref());
        let mut worst = 0.0f64;
        for (i, &p) in self.kernel.points[..self.kernel.nodes].iter().enumerate() {
            let phi = self.channel_functions(p)?;
            for (slot, v) in phi.iter().enumerate() {
                worst = worst.max((v - st.phi[(i, slot)]).abs() / scale);
            }
        }
        Ok(worst)
    }

    fn component_from(&self, slice: &Slice, k: f64) -> Result<f64> {
        let st = self.state;
        let mut g = vec![0.0; slice.sys.len()];
        slice.sys.form_factors_at(k, &mut g);
        let mut sum = 0.0;
        for (slot, &nu) in st.channels.iter().enumerate() {
            sum += g[nu] * slice.sys.tau(nu)? * slice.phi[slot];
        }
        let d = slice.ep - 0.5 * k * k;
        debug_assert!(d < 0.0);
        Ok(sum / d)
    }

    /// Faddeev component at pair momentum `k` and spectator momentum `p`.
    pub fn faddeev_component(&self, k: f64, p: f64) -> Result<f64> {
        self.component_from(&self.slice(p)?, k)
    }

    fn jacobi(&self, k23: f64, p1: f64) -> [(f64, f64); 2] {
        let m = self.solver.mass();
        [
            (-0.5 * m.alpha_y * k23 - m.alpha_x * p1, k23 - 0.5 * p1),
            (0.5 * m.alpha_y * k23 - m.alpha_x * p1, -k23 - 0.5 * p1),
        ]
    }

    /// Total wave function at scaled momenta, exchange-symmetrized.
    pub fn total_psi(&self, k23: f64, p1: f64) -> Result<f64> {
        let kappa = (2.0 * self.state.two_body_energy.abs()).sqrt();
        let [(ka, pa), (kb, pb)] = self.jacobi(k23 * kappa, p1 * kappa);
        let s = self.state.symmetry.sign();
        Ok(self.faddeev_component(ka, pa)? + s * self.faddeev_component(kb, pb)?)
    }

    /// Field on `[-extent, extent]^2` with `resolution` points per axis.
    pub fn sample_field(&self, extent: f64, resolution: usize) -> Result<WaveField2D> {
        if !(extent > 0.0) || resolution < 3 {
            return Err(Error::Config(format!(
                "field needs extent > 0 and resolution >= 3, got {extent}, {resolution}"
            )));
        }
        let r = resolution;
        let h = 2.0 * extent / (r - 1) as f64;
        let axis: Vec<f64> = (0..r).map(|i| -extent + i as f64 * h).collect();
        let kappa = (2.0 * self.state.two_body_energy.abs()).sqrt();

        // spectator momenta of both terms fall on -3 extent/2 + m h/2
        let lattice = |m: usize| (-1.5 * extent + 0.5 * m as f64 * h) * kappa;
        let slices: HashMap<usize, Slice> = (0..=3 * (r - 1))
            .into_par_iter()
            .map(|m| Ok((m, self.slice(lattice(m))?)))
            .collect::<Result<_>>()?;

        let m = *self.solver.mass();
        let s = self.state.symmetry.sign();
        let rows: Vec<Vec<f64>> = (0..r)
            .into_par_iter()
            .map(|j| {
                let p1 = axis[j] * kappa;
                (0..r)
                    .map(|i| {
                        let k23 = axis[i] * kappa;
                        let ka = -0.5 * m.alpha_y * k23 - m.alpha_x * p1;
                        let kb = 0.5 * m.alpha_y * k23 - m.alpha_x * p1;
                        let a = self.component_from(&slices[&(2 * i + r - 1 - j)], ka)?;
                        let b = self.component_from(&slices[&(3 * (r - 1) - 2 * i - j)], kb)?;
                        Ok(a + s * b)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        let mut values = Mat::zeros(r, r);
        for (j, row) in rows.into_iter().enumerate() {
            for (i, v) in row.into_iter().enumerate() {
                values[(j, i)] = v;
            }
        }
        WaveField2D::new(axis.clone(), axis, values, self.state.symmetry)
    }
}

fn trapezoid(axis: &[f64]) -> Vec<f64> {
    let n = axis.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { axis[i] - axis[i - 1] } else { 0.0 };
            let right = if i + 1 < n { axis[i + 1] - axis[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// A normalized wave function on a tensor grid. `values[(j, i)]` belongs to
/// `(k23[i], p1[j])`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField2D {
    pub k23: Vec<f64>,
    pub p1: Vec<f64>,
    pub values: Mat<f64>,
    pub symmetry: Symmetry,
    /// Discrete norm before normalization.
    pub raw_norm: f64,
    /// Share of the norm carried by the outermost grid lines.
    pub edge_weight: f64,
}

impl WaveField2D {
    /// Normalizes `values` to unit discrete norm with the largest-modulus
    /// sample positive.
    pub fn new(k23: Vec<f64>, p1: Vec<f64>, values: Mat<f64>, symmetry: Symmetry) -> Result<Self> {
        if values.nrows() != p1.len() || values.ncols() != k23.len() {
            return Err(Error::Shape(format!(
                "{}x{} values for {} x {} axes",
                values.nrows(),
                values.ncols(),
                p1.len(),
                k23.len()
            )));
        }
        let wk = trapezoid(&k23);
        let wp = trapezoid(&p1);
        let mut norm = 0.0;
        let mut edge = 0.0;
        for j in 0..p1.len() {
            for i in 0..k23.len() {
                let x = wk[i] * wp[j] * values[(j, i)].powi(2);
                norm += x;
                if i == 0 || j == 0 || i + 1 == k23.len() || j + 1 == p1.len() {
                    edge += x;
                }
            }
        }
        norm /= (2.0 * PI).powi(2);
        edge /= (2.0 * PI).powi(2);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Numerical(format!("field norm is {norm}")));
        }
        let (mut big, mut sign) = (0.0, 1.0);
        for j in 0..values.nrows() {
            for i in 0..values.ncols() {
                let v: f64 = values[(j, i)];
                if v.abs() > big {
                    big = v.abs();
                    sign = v.signum();
                }
            }
        }
        let f = sign / norm.sqrt();
        let values = Mat::from_fn(values.nrows(), values.ncols(), |j, i| values[(j, i)] * f);
        Ok(Self { k23, p1, values, symmetry, raw_norm: norm, edge_weight: edge / norm })
    }

    fn weights(&self) -> (Vec<f64>, Vec<f64>) {
        (trapezoid(&self.k23), trapezoid(&self.p1))
    }

    pub fn norm(&self) -> f64 {
        let (wk, wp) = self.weights();
        let mut s = 0.0;
        for j in 0..self.p1.len() {
            for i in 0..self.k23.len() {
                s += wk[i] * wp[j] * self.values[(j, i)].powi(2);
            }
        }
        s / (2.0 * PI).powi(2)
    }

    /// `max |psi(-K, P) - s psi(K, P)|` relative to the largest sample.
    pub fn exchange_defect(&self) -> f64 {
        let n = self.k23.len();
        let s = self.symmetry.sign();
        let scale = amax(self.values.as_ref());
        let mut worst = 0.0f64;
        for j in 0..self.p1.len() {
            for i in 0..n {
                let d = self.values[(j, n - 1 - i)] - s * self.values[(j, i)];
                worst = worst.max(d.abs() / scale);
            }
        }
        worst
    }

    /// Writes `K23,P1,psi` rows with `P1` as the outer loop.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["K23", "P1", "psi"])?;
        for (j, p) in self.p1.iter().enumerate() {
            for (i, k) in self.k23.iter().enumerate() {
                w.write_record([fmt17(*k), fmt17(*p), fmt17(self.values[(j, i)])])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a field written by [`WaveField2D::write_csv`]; the exchange
    /// symmetry is inferred from the samples.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(input);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["K23", "P1", "psi"] {
            return Err(Error::Config(format!("unexpected field header {headers:?}")));
        }
        let mut rows: Vec<(f64, f64, f64)> = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            let parse = |i: usize| -> Result<f64> {
                rec[i].trim().parse().map_err(|e| Error::Config(format!("bad number '{}': {e}", &rec[i])))
            };
            rows.push((parse(0)?, parse(1)?, parse(2)?));
        }
        let mut k23: Vec<f64> = Vec::new();
        for &(k, p, _) in &rows {
            if p != rows[0].1 {
                break;
            }
            k23.push(k);
        }
        let nk = k23.len();
        if nk == 0 || rows.len() % nk != 0 {
            return Err(Error::Shape(format!("{} rows do not form a grid", rows.len())));
        }
        let np = rows.len() / nk;
        let p1: Vec<f64> = (0..np).map(|j| rows[j * nk].1).collect();
        let mut values = Mat::zeros(np, nk);
        for j in 0..np {
            for i in 0..nk {
                let (k, p, v) = rows[j * nk + i];
                if k != k23[i] || p != p1[j] {
                    return Err(Error::Shape(format!("row {} breaks the grid order", j * nk + i)));
                }
                values[(j, i)] = v;
            }
        }
        let mut odd = 0.0f64;
        let mut even = 0.0f64;
        for j in 0..np {
            for i in 0..nk {
                odd = odd.max((values[(j, nk - 1 - i)] + values[(j, i)]).abs());
                even = even.max((values[(j, nk - 1 - i)] - values[(j, i)]).abs());
            }
        }
        let symmetry = if even <= odd { Symmetry::Boson } else { Symmetry::Fermion };
        Self::new(k23, p1, values, symmetry)
    }
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Squared overlap `|<a|b>|^2` of two normalized fields on the same grid.
pub fn fidelity(a: &WaveField2D, b: &WaveField2D) -> Result<f64> {
    if a.k23 != b.k23 || a.p1 != b.p1 {
        return Err(Error::Shape("fields live on different grids".into()));
    }
    if a.symmetry != b.symmetry {
        log::warn!("fidelity between a {} and a {} field", a.symmetry, b.symmetry);
    }
    let (wk, wp) = a.weights();
    let mut s = 0.0;
    for j in 0..a.p1.len() {
        for i in 0..a.k23.len() {
            s += wk[i] * wp[j] * a.values[(j, i)] * b.values[(j, i)];
        }
    }
    Ok((s / (2.0 * PI).powi(2)).powi(2))
}

fn amax(m: faer::MatRef<'_, f64>) -> f64 {
    let mut out = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].abs());
        }
    }
    out
}

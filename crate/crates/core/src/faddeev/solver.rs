use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::types::{ChannelConfig, MassParams, Symmetry};
use crate::error::{Error, Result};
use crate::grids::{MomentumGrid, DEFAULT_OUTER};
use crate::linalg;
use crate::potentials::PotentialSpec;
use crate::roots::brent_bracketed;
use crate::twobody::{bound_energies_with, WeinbergSolver, WeinbergSystem};

/// Discretization and search settings for the three-body problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThreeBodyOptions {
    /// Node count of the spectator-momentum grid (both signs).
    pub count: usize,
    /// Clustering scale as a fraction of the resonant binding momentum.
    pub scale_fraction: f64,
    /// Upper edge of the clustered region for finite-range potentials.
    pub outer: f64,
    /// Search window `[window * E2, E2)`.
    pub window: f64,
    /// Log-spaced scan points in `E / E2 - 1`.
    pub scan_points: usize,
    /// Smallest `E / E2 - 1` scanned.
    pub min_binding: f64,
    /// Relative half width of the dedicated panels around each pole.
    pub pole_window: f64,
}

impl Default for ThreeBodyOptions {
    fn default() -> Self {
        Self {
            count: 300,
            scale_fraction: 1.0 / 30.0,
            outer: DEFAULT_OUTER,
            window: 3.5,
            scan_points: 32,
            min_binding: 1e-6,
            pole_window: 0.25,
        }
    }
}

/// Location and strength of the t-matrix pole of an open deep channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoleSplit {
    pub q_star: f64,
    /// `h` in `tau(E_q) ~ h / (q*^2 - q^2)`.
    pub strength: f64,
    /// Coefficient of `1 / (q - q*)`.
    pub residue: f64,
}

/// Pole of `tau_nu(E - c q^2 / 2)` for `E >= E_nu`.
pub fn pole_split(
    solver: &WeinbergSolver,
    energy: f64,
    nu: usize,
    deep_energy: f64,
    mass: &MassParams,
) -> Result<PoleSplit> {
    if energy < deep_energy {
        return Err(Error::Range(format!(
            "channel {nu} is closed at E = {energy} (threshold {deep_energy})"
        )));
    }
    let q_star = (2.0 * (energy - deep_energy) / mass.c()).sqrt();
    let strength = pole_strength(solver, nu, deep_energy, mass)?;
    Ok(PoleSplit { q_star, strength, residue: -strength / (2.0 * q_star) })
}

fn pole_strength(solver: &WeinbergSolver, nu: usize, deep: f64, mass: &MassParams) -> Result<f64> {
    let slope = |d: f64| -> Result<f64> {
        let up = solver.solve(deep + d, nu + 1)?.etas[nu];
        let dn = solver.solve(deep - d, nu + 1)?.etas[nu];
        Ok((up - dn) / (2.0 * d))
    };
    let d = 1e-4 * deep.abs();
    let s1 = slope(d)?;
    let s2 = slope(0.5 * d)?;
    if !((s1 - s2).abs() <= 0.01 * s2.abs()) || s2 <= 0.0 {
        return Err(Error::PoleResolution(format!("eta_{nu}' at {deep}: {s1} vs {s2} under step halving")));
    }
    Ok(2.0 / (mass.c() * s2))
}

/// An assembled kernel at one energy.
///
/// Unknowns are stacked channel by channel; within a channel they run over
/// `points`, the positive quadrature nodes followed by one pole point per
/// open channel.
#[derive(Debug, Clone)]
pub struct Kernel {
    pub energy: f64,
    pub matrix: Mat<f64>,
    pub points: Vec<f64>,
    pub nodes: usize,
    pub channels: Vec<usize>,
    pub parities: Vec<i32>,
    /// Column factors, `points x channels`.
    pub fac: Mat<f64>,
}

impl Kernel {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// `det(I - s M)` in log form.
    pub fn secular(&self, symmetry: Symmetry) -> linalg::LogDet {
        let s = symmetry.sign();
        let n = self.dim();
        let a = Mat::from_fn(n, n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            d - s * self.matrix[(i, j)]
        });
        linalg::log_det(a.as_ref())
    }
}

fn empty_phi() -> Mat<f64> {
    Mat::zeros(0, 0)
}

/// A three-body bound state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThreeBodyState {
    pub r: usize,
    pub n: usize,
    pub symmetry: Symmetry,
    pub energy: f64,
    pub ratio: f64,
    pub two_body_energy: f64,
    pub eigenvalue: f64,
    pub points: Vec<f64>,
    pub channels: Vec<usize>,
    /// Channel functions, `points x channels`.
    #[serde(skip, default = "empty_phi")]
    pub phi: Mat<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub energy: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
    /// Branch followed from the previous point by eigenvector overlap.
    pub tracked_plus: f64,
    pub tracked_minus: f64,
    /// Real eigenvalues above +1 and below -1.
    pub above_plus: usize,
    pub below_minus: usize,
}

/// Three-body problem for one potential tuned to a resonance `r`.
pub struct ThreeBodySolver {
    weinberg: WeinbergSolver,
    mass: MassParams,
    channels: Vec<usize>,
    nu_max: usize,
    r: usize,
    two_body_energy: f64,
    deep: Vec<f64>,
    strengths: Vec<f64>,
    p: Vec<f64>,
    w: Vec<f64>,
    options: ThreeBodyOptions,
    memo: Mutex<HashMap<u64, Arc<WeinbergSystem>>>,
}

const MEMO_LIMIT: usize = 50_000;

impl ThreeBodySolver {
    pub fn new(
        potential: &PotentialSpec,
        two_body_grid: &MomentumGrid,
        mass: MassParams,
        channels: &ChannelConfig,
        r: usize,
        options: ThreeBodyOptions,
    ) -> Result<Self> {
        let weinberg = WeinbergSolver::new(potential, two_body_grid)?;
        let states = bound_energies_with(&weinberg, r)?;
        let Some(resonant) = states.get(r) else {
            return Err(Error::Range(format!(
                "{} binds {} states; state {r} requested",
                potential.label,
                states.len()
            )));
        };
        let two_body_energy = resonant.energy;
        let deep: Vec<f64> = states[..r].iter().map(|s| s.energy).collect();

        let mut nu_max = channels.nu_max.min(weinberg.capacity());
        let mut included = channels.included();
        if potential.is_rank_one() {
            nu_max = 1;
            included.retain(|&nu| nu == 0);
            if included.is_empty() {
                return Err(Error::Config("the contact interaction has only term 0".into()));
            }
        }
        included.retain(|&nu| nu < nu_max);
        if !included.contains(&r) {
            log::warn!("resonant term {r} is excluded from the kernel");
        }

        let mut strengths = vec![0.0; r];
        for (nu, &e) in deep.iter().enumerate() {
            if included.contains(&nu) {
                strengths[nu] = pole_strength(&weinberg, nu, e, &mass)?;
            }
        }

        let kappa = (2.0 * two_body_energy.abs()).sqrt();
        let scale = options.scale_fraction * kappa;
        let outer = if potential.is_rank_one() {
            // scale-free interaction: everything in units of kappa
            1000.0 * kappa
        } else {
            options.outer
        };
        let e_ref = 0.5 * (1.0 + options.window) * two_body_energy;
        let mut breaks = Vec::new();
        for (nu, &e) in deep.iter().enumerate() {
            if included.contains(&nu) && e_ref > e {
                let q = (2.0 * (e_ref - e) / mass.c()).sqrt();
                breaks.extend([q * (1.0 - options.pole_window), q, q * (1.0 + options.pole_window)]);
            }
        }
        let grid = MomentumGrid::log_clustered(options.count, scale, outer, &breaks)?;
        let (p, w) = grid.positive_half();

        Ok(Self {
            weinberg,
            mass,
            channels: included,
            nu_max,
            r,
            two_body_energy,
            deep,
            strengths,
            p,
            w,
            options,
            memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn two_body_energy(&self) -> f64 {
        self.two_body_energy
    }

    pub fn deep_energies(&self) -> &[f64] {
        &self.deep
    }

    pub fn channels(&self) -> &[usize] {
        &self.channels
    }

    pub fn nu_max(&self) -> usize {
        self.nu_max
    }

    pub fn mass(&self) -> &MassParams {
        &self.mass
    }

    pub fn resonance(&self) -> usize {
        self.r
    }

    pub fn options(&self) -> &ThreeBodyOptions {
        &self.options
    }

    pub fn quadrature(&self) -> (&[f64], &[f64]) {
        (&self.p, &self.w)
    }

    pub fn weinberg(&self) -> &WeinbergSolver {
        &self.weinberg
    }

    /// Weinberg data at a two-body energy, memoized on 12 significant digits.
    pub fn system(&self, energy: f64) -> Result<Arc<WeinbergSystem>> {
        let key: f64 = format!("{energy:.11e}").parse().unwrap_or(energy);
        let key = key.to_bits();
        if let Some(s) = self.memo.lock().unwrap().get(&key) {
            return Ok(s.clone());
        }
        let sys = Arc::new(self.weinberg.solve(energy, self.nu_max)?);
        let mut memo = self.memo.lock().unwrap();
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        Ok(memo.entry(key).or_insert(sys).clone())
    }

    /// Open deep channels at `energy`: `(channel slot, q*)`.
    fn open_channels(&self, energy: f64) -> Vec<(usize, f64)> {
        self.channels
            .iter()
            .enumerate()
            .filter(|&(_, &nu)| nu < self.r && energy > self.deep[nu])
            .map(|(slot, &nu)| (slot, (2.0 * (energy - self.deep[nu]) / self.mass.c()).sqrt()))
            .collect()
    }

    /// Form factor tables `T[a][b] = g(x_b + sign * beta * x_a; E_a)` for all
    /// included channels, flattened as `(a * n + b) * nch + slot`.
    fn tables(&self, points: &[f64], systems: &[Arc<WeinbergSystem>]) -> (Vec<f64>, Vec<f64>) {
        let n = points.len();
        let nch = self.channels.len();
        let beta = self.mass.beta();
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..n)
            .into_par_iter()
            .map(|a| {
                let sys = &systems[a];
                let mut buf = vec![0.0; sys.len()];
                let mut plus = vec![0.0; n * nch];
                let mut minus = vec![0.0; n * nch];
                for b in 0..n {
                    sys.form_factors_at(points[b] + beta * points[a], &mut buf);
                    for (slot, &nu) in self.channels.iter().enumerate() {
                        plus[b * nch + slot] = buf[nu];
                    }
                    sys.form_factors_at(points[b] - beta * points[a], &mut buf);
                    for (slot, &nu) in self.channels.iter().enumerate() {
                        minus[b * nch + slot] = buf[nu];
                    }
                }
                (plus, minus)
            })
            .collect();
        let mut tp = Vec::with_capacity(n * n * nch);
        let mut tm = Vec::with_capacity(n * n * nch);
        for (p, m) in rows {
            tp.extend(p);
            tm.extend(m);
        }
        (tp, tm)
    }

    /// Kernel `M(E)` such that bound states satisfy `M phi = s phi`.
    pub fn kernel(&self, energy: f64, symmetry: Symmetry) -> Result<Kernel> {
        if !(energy < 0.0) {
            return Err(Error::Range(format!("three-body energy must be negative, got {energy}")));
        }
        let sigma = symmetry.sign();
        let c = self.mass.c();
        let beta = self.mass.beta();
        let open = self.open_channels(energy);
        let nodes = self.p.len();
        let mut points = self.p.clone();
        points.extend(open.iter().map(|&(_, q)| q));
        let n = points.len();
        let nch = self.channels.len();

        let systems: Vec<Arc<WeinbergSystem>> =
            points.par_iter().map(|&x| self.system(energy - 0.5 * c * x * x)).collect::<Result<_>>()?;
        let parities: Vec<i32> = self.channels.iter().map(|&nu| systems[0].parities[nu]).collect();

        let mut fac = Mat::zeros(n, nch);
        for (slot, &nu) in self.channels.iter().enumerate() {
            for j in 0..nodes {
                let eta = systems[j].etas[nu];
                if eta == 1.0 {
                    return Err(Error::Pole(format!(
                        "term {nu} has a pole on node {} at E = {energy}",
                        points[j]
                    )));
                }
                fac[(j, slot)] = -eta / (1.0 - eta) * self.w[j];
            }
        }
        for (k, &(slot, q)) in open.iter().enumerate() {
            let nu = self.channels[slot];
            let qq = q * q;
            let sum: f64 = self.p.iter().zip(&self.w).map(|(x, w)| w / (qq - x * x)).sum();
            fac[(nodes + k, slot)] = -self.strengths[nu] * sum;
        }

        let (tp, tm) = self.tables(&points, &systems);
        let at = |t: &[f64], a: usize, b: usize, slot: usize| t[(a * n + b) * nch + slot];

        let dim = n * nch;
        let cols: Vec<Vec<f64>> = (0..dim)
            .into_par_iter()
            .map(|col| {
                let (nslot, j) = (col / n, col % n);
                let mut out = vec![0.0; dim];
                let f = fac[(j, nslot)];
                if f == 0.0 {
                    return Ok(out);
                }
                let pnu = parities[nslot] as f64;
                let q = points[j];
                for i in 0..n {
                    let p = points[i];
                    let base = energy - 0.5 * (p * p + q * q);
                    let dp = base - beta * p * q;
                    let dm = base + beta * p * q;
                    if !(dp < 0.0 && dm < 0.0) {
                        return Err(Error::Numerical(format!(
                            "energy denominator not negative at p = {p}, q = {q}"
                        )));
                    }
                    let bp = at(&tp, j, i, nslot);
                    let bm = at(&tm, j, i, nslot);
                    for (lslot, _) in self.channels.iter().enumerate() {
                        let plam = parities[lslot] as f64;
                        let v = at(&tp, i, j, lslot) * bp / dp
                            + sigma * pnu * plam * at(&tm, i, j, lslot) * bm / dm;
                        out[lslot * n + i] = v * f / (2.0 * PI);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        let matrix = Mat::from_fn(dim, dim, |i, j| cols[j][i]);
        Ok(Kernel { energy, matrix, points, nodes, channels: self.channels.clone(), parities, fac })
    }

    fn secular(&self, energy: f64, symmetry: Symmetry) -> Result<linalg::LogDet> {
        Ok(self.kernel(energy, symmetry)?.secular(symmetry))
    }

    /// Scan energies `E2 (1 + b)` with `b` log-spaced in
    /// `[min_binding, window - 1]`, most bound first.
    fn scan_energies(&self) -> Vec<f64> {
        let o = &self.options;
        let (lo, hi) = (o.min_binding.ln(), (o.window - 1.0).ln());
        let m = o.scan_points.max(2);
        (0..m)
            .rev()
            .map(|k| {
                let b = (lo + (hi - lo) * k as f64 / (m - 1) as f64).exp();
                self.two_body_energy * (1.0 + b)
            })
            .collect()
    }

    /// All states of one symmetry in the search window, deepest first.
    pub fn find_states(&self, symmetry: Symmetry) -> Result<Vec<ThreeBodyState>> {
        let energies = self.scan_energies();
        let dets: Vec<linalg::LogDet> =
            energies.iter().map(|&e| self.secular(e, symmetry)).collect::<Result<_>>()?;
        let mut roots = Vec::new();
        for k in 0..energies.len() - 1 {
            if dets[k].sign == 0.0 {
                roots.push(energies[k]);
                continue;
            }
            if dets[k].sign == dets[k + 1].sign {
                continue;
            }
            let reference = dets[k].log_abs.max(dets[k + 1].log_abs);
            let (a, b) = (energies[k], energies[k + 1]);
            let scaled = |d: &linalg::LogDet| d.sign * (d.log_abs - reference).exp();
            // the determinant is noisy below ~1e-12 relative
            let tol = 1e-11 * a.abs();
            let e = brent_bracketed(
                |e| Ok(scaled(&self.secular(e, symmetry)?)),
                (a, scaled(&dets[k])),
                (b, scaled(&dets[k + 1])),
                tol,
                200,
            )?;
            roots.push(e);
        }
        let lo_edge = self.options.window * self.two_body_energy;
        let mut states = Vec::with_capacity(roots.len());
        for (index, e) in roots.into_iter().enumerate() {
            if (e - lo_edge).abs() < 1e-6 * lo_edge.abs()
                || (e - energies[energies.len() - 1]).abs() < 1e-9 * e.abs()
            {
                log::warn!("state at E = {e} sits on the search window edge; widen the window");
            }
            states.push(self.state_at(e, symmetry, index)?);
        }
        Ok(states)
    }

    fn state_at(&self, energy: f64, symmetry: Symmetry, index: usize) -> Result<ThreeBodyState> {
        let s = symmetry.sign();
        let mut e = energy;
        let mut kernel = self.kernel(e, symmetry)?;
        let (mut lambda, mut v, _) = linalg::inverse_iteration(kernel.matrix.as_ref(), s, None, 4)?;
        // secant polish on lambda(E) if the determinant root is not tight enough
        let mut prev: Option<(f64, f64)> = None;
        for _ in 0..8 {
            if (lambda - s).abs() <= 1e-8 {
                break;
            }
            let next = match prev {
                Some((e0, l0)) if l0 != lambda => e - (lambda - s) * (e - e0) / (lambda - l0),
                _ => e * (1.0 + 1e-9),
            };
            prev = Some((e, lambda));
            e = next;
            kernel = self.kernel(e, symmetry)?;
            let r = linalg::inverse_iteration(kernel.matrix.as_ref(), s, Some(&v), 4)?;
            lambda = r.0;
            v = r.1;
        }
        if (lambda - s).abs() > 1e-8 {
            return Err(Error::Numerical(format!(
                "kernel eigenvalue {lambda} at E = {e} misses {s} by more than 1e-8"
            )));
        }
        let n = kernel.points.len();
        let nch = kernel.channels.len();
        let imax = (0..v.len()).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap_or(0);
        if v[imax] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        let phi = Mat::from_fn(n, nch, |i, slot| v[slot * n + i]);
        Ok(ThreeBodyState {
            r: self.r,
            n: symmetry.label(index),
            symmetry,
            energy: e,
            ratio: e / self.two_body_energy.abs(),
            two_body_energy: self.two_body_energy,
            eigenvalue: lambda,
            points: kernel.points,
            channels: kernel.channels,
            phi,
        })
    }

    /// Kernel eigenvalues near +1 and -1 over `steps` energies spanning
    /// `window`, with branches followed by eigenvector overlap.
    pub fn eigen_scan(&self, window: (f64, f64), steps: usize, symmetry: Symmetry) -> Result<Vec<ScanPoint>> {
        if steps < 3 {
            return Err(Error::Range("eigen_scan needs at least 3 steps".into()));
        }
        let (e0, e1) = window;
        if !(e0 < 0.0 && e1 < 0.0) || e0.max(e1) >= self.two_body_energy {
            return Err(Error::Range(format!(
                "scan window ({e0}, {e1}) must lie below E2 = {}",
                self.two_body_energy
            )));
        }
        let mut out = Vec::with_capacity(steps);
        let mut tracked: [Option<(f64, Vec<f64>)>; 2] = [None, None];
        for k in 0..steps {
            let e = e0 + (e1 - e0) * k as f64 / (steps - 1) as f64;
            let kernel = self.kernel(e, symmetry)?;
            let ev = linalg::eigenvalues(kernel.matrix.as_ref())?;
            let real: Vec<f64> =
                ev.iter().filter(|x| x.1.abs() <= 1e-12 * x.0.abs().max(1.0)).map(|x| x.0).collect();
            let nearest = |t: f64| {
                real.iter()
                    .copied()
                    .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
                    .unwrap_or(f64::NAN)
            };
            let mut values = [0.0; 2];
            for (slot, target) in [1.0, -1.0].into_iter().enumerate() {
                let value = match &tracked[slot] {
                    None => {
                        let lam = nearest(target);
                        let (_, v, _) = linalg::inverse_iteration(kernel.matrix.as_ref(), lam, None, 3)?;
                        tracked[slot] = Some((lam, v));
                        lam
                    }
                    Some((prev, pv)) => {
                        let mut cands = real.clone();
                        cands.sort_by(|a, b| (a - prev).abs().total_cmp(&(b - prev).abs()));
                        cands.truncate(3);
                        let mut best: Option<(f64, f64, Vec<f64>)> = None;
                        for lam in cands {
                            let (_, v, _) =
                                linalg::inverse_iteration(kernel.matrix.as_ref(), lam, Some(pv), 3)?;
                            let ov = linalg::dot(&v, pv).abs();
                            if best.as_ref().map_or(true, |b| ov > b.0) {
                                best = Some((ov, lam, v));
                            }
                        }
                        let (_, lam, v) = best.ok_or_else(|| {
                            Error::Diagnostic(format!("no real eigenvalue to track at E = {e}"))
                        })?;
                        tracked[slot] = Some((lam, v));
                        lam
                    }
                };
                for &(re, im) in &ev {
                    if im.abs() > 1e-8 && ((re - value).powi(2) + im * im).sqrt() < 0.05 {
                        return Err(Error::Diagnostic(format!(
                            "complex eigenvalue {re} + {im}i next to the tracked branch at E = {e}"
                        )));
                    }
                }
                values[slot] = value;
            }
            out.push(ScanPoint {
                energy: e,
                lambda_plus: nearest(1.0),
                lambda_minus: nearest(-1.0),
                tracked_plus: values[0],
                tracked_minus: values[1],
                above_plus: real.iter().filter(|&&x| x > 1.0).count(),
                below_minus: real.iter().filter(|&&x| x < -1.0).count(),
            });
        }
        Ok(out)
    }
}

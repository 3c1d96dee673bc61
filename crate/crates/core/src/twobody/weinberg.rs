use std::f64::consts::PI;
use std::sync::Arc;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grids::MomentumGrid;
use crate::linalg;
use crate::potentials::{PotentialSpec, Shape};

/// Half-line nodes and the transfer kernel shared by all systems built from
/// one solver.
#[derive(Debug)]
struct HalfLine {
    shape: Shape,
    v0: f64,
    k: Vec<f64>,
    w: Vec<f64>,
}

impl HalfLine {
    /// `V(k - k_j)` and `V(k + k_j)` for every half node.
    fn transfers(&self, k: f64, minus: &mut [f64], plus: &mut [f64]) {
        for (j, &kj) in self.k.iter().enumerate() {
            minus[j] = self.v0 * self.shape.transform(k - kj);
            plus[j] = self.v0 * self.shape.transform(k + kj);
        }
    }
}

/// Weinberg eigenvalues and form factors at one energy.
///
/// Eigenvalue `nu` is the `nu / 2`-th largest of parity `(-1)^nu`, which
/// is the plain descending order whenever `ordered` holds. Form factors are
/// normalized so that `(1/2pi) sum_k w g^2 / (k^2/2 - E) = 1` on the full
/// grid, and signed so that the largest-magnitude value on the positive
/// half is positive.
#[derive(Debug, Clone)]
pub struct WeinbergSystem {
    pub energy: f64,
    pub etas: Vec<f64>,
    pub parities: Vec<i32>,
    half: Option<Arc<HalfLine>>,
    /// Nystrom coefficients, row-major with one row per eigenvalue.
    coeffs: Vec<f64>,
    /// Constant form factor of the contact interaction.
    contact_g: f64,
    /// Whether the descending eigenvalues alternate in parity, starting
    /// even, down to negligible magnitudes.
    pub ordered: bool,
}

impl WeinbergSystem {
    pub fn len(&self) -> usize {
        self.etas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.etas.is_empty()
    }

    /// `tau_nu = -eta / (1 - eta)`.
    pub fn tau(&self, nu: usize) -> Result<f64> {
        tau(self.etas[nu])
    }

    /// Form factor `g_nu(k)` for every stored eigenvalue, written into `out`.
    pub fn form_factors_at(&self, k: f64, out: &mut [f64]) {
        match &self.half {
            None => {
                out[0] = self.contact_g;
                out[1..].iter_mut().for_each(|x| *x = 0.0);
            }
            Some(h) => {
                let n = h.k.len();
                let mut minus = vec![0.0; n];
                let mut plus = vec![0.0; n];
                h.transfers(k, &mut minus, &mut plus);
                self.combine(&minus, &plus, out);
            }
        }
    }

    fn combine(&self, minus: &[f64], plus: &[f64], out: &mut [f64]) {
        for (nu, o) in out.iter_mut().enumerate().take(self.etas.len()) {
            let n = minus.len();
            let row = &self.coeffs[nu * n..(nu + 1) * n];
            let par = self.parities[nu] as f64;
            let mut s = 0.0;
            for j in 0..n {
                s += row[j] * (minus[j] + par * plus[j]);
            }
            *o = s;
        }
    }

    pub fn form_factor(&self, nu: usize, k: f64) -> f64 {
        let mut out = vec![0.0; self.etas.len()];
        self.form_factors_at(k, &mut out);
        out[nu]
    }
}

fn alternation_holds(even: &[(f64, Vec<f64>)], odd: &[(f64, Vec<f64>)], nu_max: usize) -> bool {
    let floor = 1e-10 * even[0].0.abs().max(odd[0].0.abs());
    (0..nu_max.saturating_sub(1)).all(|nu| {
        let this = if nu % 2 == 0 { even[nu / 2].0 } else { odd[nu / 2].0 };
        let next = if nu % 2 == 0 { odd[nu / 2].0 } else { even[nu / 2 + 1].0 };
        next <= this || this.abs() < floor
    })
}

/// `tau = -eta / (1 - eta)`; a pole at `eta = 1`.
pub fn tau(eta: f64) -> Result<f64> {
    if eta == 1.0 {
        return Err(Error::Pole("eta = 1 exactly".into()));
    }
    Ok(-eta / (1.0 - eta))
}

/// Precomputes the energy-independent pieces of the Weinberg eigenproblem on
/// a symmetric grid.
#[derive(Debug, Clone)]
pub struct WeinbergSolver {
    potential: PotentialSpec,
    grid: MomentumGrid,
    half: Arc<HalfLine>,
    v_even: Mat<f64>,
    v_odd: Mat<f64>,
}

impl WeinbergSolver {
    pub fn new(potential: &PotentialSpec, grid: &MomentumGrid) -> Result<Self> {
        potential.self_check()?;
        if grid.len() % 2 != 0 {
            return Err(Error::Config(
                "two-body grids must have an even node count (no node at k = 0)".into(),
            ));
        }
        let (k, w) = grid.positive_half();
        let n = k.len();
        let shape = potential.shape;
        let v0 = potential.v0;
        let (v_even, v_odd) = if potential.is_rank_one() {
            (Mat::zeros(0, 0), Mat::zeros(0, 0))
        } else {
            let vm = Mat::from_fn(n, n, |i, j| v0 * shape.transform(k[i] - k[j]));
            let vp = Mat::from_fn(n, n, |i, j| v0 * shape.transform(k[i] + k[j]));
            let even = Mat::from_fn(n, n, |i, j| vm[(i, j)] + vp[(i, j)]);
            let odd = Mat::from_fn(n, n, |i, j| vm[(i, j)] - vp[(i, j)]);
            (even, odd)
        };
        Ok(Self {
            potential: potential.clone(),
            grid: grid.clone(),
            half: Arc::new(HalfLine { shape, v0, k, w }),
            v_even,
            v_odd,
        })
    }

    pub fn potential(&self) -> &PotentialSpec {
        &self.potential
    }

    pub fn grid(&self) -> &MomentumGrid {
        &self.grid
    }

    /// Largest number of eigenvalues the grid can resolve.
    pub fn capacity(&self) -> usize {
        if self.potential.is_rank_one() {
            usize::MAX
        } else {
            2 * self.half.k.len()
        }
    }

    /// Solves at `energy < 0` keeping the `nu_max` largest eigenvalues.
    pub fn solve(&self, energy: f64, nu_max: usize) -> Result<WeinbergSystem> {
        if !(energy < 0.0) || !energy.is_finite() {
            return Err(Error::Range(format!("Weinberg energy must be negative, got {energy}")));
        }
        if nu_max == 0 {
            return Err(Error::Range("at least one Weinberg eigenvalue is required".into()));
        }
        if self.potential.is_rank_one() {
            return Ok(self.contact(energy, nu_max));
        }
        if nu_max > self.capacity() {
            return Err(Error::Range(format!(
                "{nu_max} eigenvalues requested from a grid resolving {}",
                self.capacity()
            )));
        }
        let h = &self.half;
        let n = h.k.len();
        let a: Vec<f64> =
            h.k.iter()
                .zip(&h.w)
                .map(|(k, w)| (w / (2.0 * PI)).sqrt() / (0.5 * k * k - energy).sqrt())
                .collect();

        // channel nu takes the (nu/2)-th eigenvalue of parity (-1)^nu
        let mut sectors: Vec<Vec<(f64, Vec<f64>)>> = Vec::with_capacity(2);
        for v in [&self.v_even, &self.v_odd] {
            let s = Mat::from_fn(n, n, |i, j| -a[i] * v[(i, j)] * a[j]);
            let (values, vectors) = linalg::symmetric_eigen(s.as_ref())?;
            let sec: Vec<(f64, Vec<f64>)> = values
                .into_iter()
                .enumerate()
                .map(|(idx, ev)| (ev, (0..n).map(|i| vectors[(i, idx)]).collect()))
                .collect();
            sectors.push(sec);
        }
        let ordered = alternation_holds(&sectors[0], &sectors[1], nu_max);
        let mut pairs: Vec<(f64, i32, Vec<f64>)> = Vec::with_capacity(nu_max);
        for nu in 0..nu_max {
            let (eta, u) = sectors[nu % 2][nu / 2].clone();
            pairs.push((eta, if nu % 2 == 0 { 1 } else { -1 }, u));
        }
        let mut etas = Vec::with_capacity(nu_max);
        let mut parities = Vec::with_capacity(nu_max);
        let mut coeffs = vec![0.0; nu_max * n];
        for (nu, (eta, par, u)) in pairs.into_iter().enumerate() {
            // full-line vector has norm 1, so each half carries 1/sqrt(2)
            let mut g: Vec<f64> = u.iter().zip(&a).map(|(u, a)| u / a / 2f64.sqrt()).collect();
            let imax = (0..n).max_by(|&i, &j| g[i].abs().total_cmp(&g[j].abs())).unwrap();
            if g[imax] < 0.0 {
                g.iter_mut().for_each(|x| *x = -*x);
            }
            for j in 0..n {
                coeffs[nu * n + j] = h.w[j] * g[j] / (2.0 * PI * (energy - 0.5 * h.k[j] * h.k[j]) * eta);
            }
            etas.push(eta);
            parities.push(par);
        }
        Ok(WeinbergSystem {
            energy,
            etas,
            parities,
            half: Some(self.half.clone()),
            coeffs,
            contact_g: 0.0,
            ordered,
        })
    }

    fn contact(&self, energy: f64, nu_max: usize) -> WeinbergSystem {
        let kappa = (2.0 * energy.abs()).sqrt();
        let mut etas = vec![0.0; nu_max];
        etas[0] = -self.potential.v0 / kappa;
        WeinbergSystem {
            energy,
            etas,
            parities: (0..nu_max).map(|nu| if nu % 2 == 0 { 1 } else { -1 }).collect(),
            half: None,
            coeffs: Vec::new(),
            contact_g: kappa.sqrt(),
            ordered: true,
        }
    }

    /// Form factors on the full grid, one column per eigenvalue.
    pub fn grid_form_factors(&self, sys: &WeinbergSystem) -> Mat<f64> {
        let nodes = self.grid.nodes();
        let mut out = Mat::zeros(nodes.len(), sys.len());
        let mut buf = vec![0.0; sys.len()];
        for (i, &k) in nodes.iter().enumerate() {
            sys.form_factors_at(k, &mut buf);
            for (nu, b) in buf.iter().enumerate() {
                out[(i, nu)] = *b;
            }
        }
        out
    }
}

/// One-shot solve; build a [`WeinbergSolver`] when solving repeatedly.
pub fn weinberg_solve(
    potential: &PotentialSpec,
    energy: f64,
    grid: &MomentumGrid,
    nu_max: usize,
) -> Result<WeinbergSystem> {
    WeinbergSolver::new(potential, grid)?.solve(energy, nu_max)
}

/// `eta_nu(E)`.
pub fn eta_of_energy(potential: &PotentialSpec, nu: usize, energy: f64, grid: &MomentumGrid) -> Result<f64> {
    Ok(weinberg_solve(potential, energy, grid, nu + 1)?.etas[nu])
}

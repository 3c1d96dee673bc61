//! Two-body (heavy-light) problem: Weinberg expansion, bound states and
//! strength tuning.

mod oracle;
mod weinberg;

pub use oracle::{coordinate_oracle, OracleOptions, OracleState};
pub use weinberg::{eta_of_energy, tau, weinberg_solve, WeinbergSolver, WeinbergSystem};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::MomentumGrid;
use crate::potentials::{PotentialSpec, Shape};
use crate::roots::brent;

/// Energies closer to threshold than this count as unbound.
pub const THRESHOLD_ENERGY: f64 = -1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub r: usize,
    pub energy: f64,
    pub parity: i32,
}

/// Bound states `r = 0..=r_max` from `eta_r(E) = 1`. Stops early when the
/// potential binds fewer states.
pub fn bound_energies(
    potential: &PotentialSpec,
    grid: &MomentumGrid,
    r_max: usize,
) -> Result<Vec<BoundState>> {
    let solver = WeinbergSolver::new(potential, grid)?;
    bound_energies_with(&solver, r_max)
}

pub fn bound_energies_with(solver: &WeinbergSolver, r_max: usize) -> Result<Vec<BoundState>> {
    let mut out = Vec::new();
    for r in 0..=r_max {
        if r >= solver.capacity() {
            break;
        }
        let eta = |e: f64| -> Result<f64> { Ok(solver.solve(e, r + 1)?.etas[r]) };
        let eta_top = eta(THRESHOLD_ENERGY)?;
        if eta_top < 1.0 {
            break;
        }
        let mut lo = -1.0;
        let mut samples = vec![(THRESHOLD_ENERGY, eta_top)];
        loop {
            let v = eta(lo)?;
            samples.push((lo, v));
            if v < 1.0 {
                break;
            }
            lo *= 4.0;
            if lo < -1e12 {
                return Err(Error::Numerical(format!("no lower bracket for state {r}")));
            }
        }
        let x = brent(
            |x| {
                let e = -x.exp();
                let v = eta(e)?;
                samples.push((e, v));
                Ok(v - 1.0)
            },
            (-lo).ln(),
            (-THRESHOLD_ENERGY).ln(),
            1e-14,
            200,
        )?;
        check_monotone(r, &mut samples)?;
        let energy = -x.exp();
        let sys = solver.solve(energy, r + 1)?;
        let expected = if r % 2 == 0 { 1 } else { -1 };
        if !sys.ordered {
            return Err(Error::Diagnostic(format!(
                "Weinberg eigenvalues at E = {energy} do not alternate in parity"
            )));
        }
        out.push(BoundState { r, energy, parity: expected });
    }
    Ok(out)
}

fn check_monotone(r: usize, samples: &mut [(f64, f64)]) -> Result<()> {
    samples.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in samples.windows(2) {
        if w[1].1 < w[0].1 - 1e-12 * w[0].1.abs().max(1.0) {
            return Err(Error::NonMonotonic(format!(
                "eta_{r}({}) = {} > eta_{r}({}) = {}",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub potential: PotentialSpec,
    pub achieved: f64,
    pub iterations: usize,
}

/// Strength that puts the `r`-th bound state at `target`.
///
/// `eta` is linear in `v0`, so the first estimate is exact up to the
/// eigen-solver precision; the loop only polishes it.
pub fn tune_magnitude(shape: Shape, r: usize, target: f64, grid: &MomentumGrid) -> Result<TuneResult> {
    if !(target < 0.0) || !target.is_finite() {
        return Err(Error::Tuning(format!("target energy must be negative, got {target}")));
    }
    let unit = PotentialSpec::new(shape, -1.0)?;
    let unit_solver = WeinbergSolver::new(&unit, grid)?;
    if r >= unit_solver.capacity() {
        return Err(Error::Tuning(format!("state {r} beyond grid capacity")));
    }
    let eta_unit = unit_solver.solve(target, r + 1)?.etas[r];
    if !(eta_unit > 0.0) {
        return Err(Error::Tuning(format!(
            "{shape} cannot bind state {r}: eta_{r}({target}) = {eta_unit} at unit strength"
        )));
    }
    let mut v0 = -1.0 / eta_unit;
    let mut trace = Vec::new();
    for it in 1..=20 {
        let pot = unit.with_strength(v0)?;
        let solver = WeinbergSolver::new(&pot, grid)?;
        let states = bound_energies_with(&solver, r)?;
        let achieved = states.get(r).map(|s| s.energy);
        trace.push((v0, achieved));
        if let Some(e) = achieved {
            if ((e - target) / target).abs() <= 1e-10 {
                return Ok(TuneResult { potential: pot, achieved: e, iterations: it });
            }
        }
        let eta = solver.solve(target, r + 1)?.etas[r];
        if !(eta > 0.0) {
            break;
        }
        v0 /= eta;
    }
    Err(Error::Tuning(format!("no convergence for state {r} at {target}; trace {trace:?}")))
}

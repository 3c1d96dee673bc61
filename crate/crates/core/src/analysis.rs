//! Universality sweeps, contact reference ratios, ablation studies and
//! their serialization.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::faddeev::{Symmetry, ThreeBodySolver, ThreeBodyState};
use crate::potentials::{PotentialSpec, Shape};
use crate::twobody::tune_magnitude;
use crate::wavefunction::{fidelity, Reconstruction, WaveField2D};

/// A tuned potential together with its three-body solver.
pub struct Prepared {
    pub potential: PotentialSpec,
    pub solver: ThreeBodySolver,
}

impl Prepared {
    /// States of both symmetries, ordered by `n`.
    pub fn states(&self) -> Result<Vec<ThreeBodyState>> {
        let mut out = self.solver.find_states(Symmetry::Boson)?;
        out.extend(self.solver.find_states(Symmetry::Fermion)?);
        out.sort_by_key(|s| s.n);
        Ok(out)
    }
}

/// Tunes `shape` so that two-body state `r` sits at `e2` and builds the
/// three-body solver with the configured grids and channels.
pub fn prepare(
    cfg: &RunConfig,
    shape: Shape,
    r: usize,
    e2: f64,
    include: Option<&[usize]>,
) -> Result<Prepared> {
    let grid = cfg.grid.build(e2)?;
    let tuned = tune_magnitude(shape, r, e2, &grid)?;
    prepare_potential(cfg, &tuned.potential, r, e2, include)
}

/// As [`prepare`] for a potential with fixed strength. `e2` only sets the
/// default grid scale.
pub fn prepare_potential(
    cfg: &RunConfig,
    potential: &PotentialSpec,
    r: usize,
    e2: f64,
    include: Option<&[usize]>,
) -> Result<Prepared> {
    let grid = cfg.grid.build(e2)?;
    let mut channels = cfg.channels.clone();
    if include.is_some() {
        channels.include = include.map(|s| s.to_vec());
    }
    let solver =
        ThreeBodySolver::new(potential, &grid, cfg.mass_params()?, &channels.build()?, r, cfg.three_body)?;
    Ok(Prepared { potential: potential.clone(), solver })
}

fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::Config("--jobs must be positive".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub n: usize,
    pub symmetry: Symmetry,
    pub energy: f64,
    pub ratio: f64,
}

/// Contact-interaction ratios and, optionally, fields.
#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub alpha: f64,
    pub e2: f64,
    pub states: Vec<ReferenceEntry>,
    #[serde(skip)]
    pub fields: BTreeMap<usize, WaveField2D>,
}

impl Reference {
    pub fn compute(cfg: &RunConfig, with_fields: bool) -> Result<Self> {
        let e2 = cfg.sweep.reference_e2;
        let prepared = prepare(cfg, Shape::Contact, 0, e2, None)?;
        let states = prepared.states()?;
        let mut fields = BTreeMap::new();
        if with_fields {
            for st in &states {
                let field = Reconstruction::new(&prepared.solver, st)?
                    .sample_field(cfg.field.extent, cfg.field.resolution)?;
                fields.insert(st.n, field);
            }
        }
        Ok(Self {
            alpha: cfg.mass.alpha,
            e2,
            states: states
                .iter()
                .map(|s| ReferenceEntry { n: s.n, symmetry: s.symmetry, energy: s.energy, ratio: s.ratio })
                .collect(),
            fields,
        })
    }

    pub fn ratio(&self, n: usize) -> Option<f64> {
        self.states.iter().find(|s| s.n == n).map(|s| s.ratio)
    }

    pub fn ratios(&self) -> BTreeMap<usize, f64> {
        self.states.iter().map(|s| (s.n, s.ratio)).collect()
    }
}

/// Contact ratios `n -> eps*_n` at mass ratio `alpha` with default grids.
pub fn reference_ratios(alpha: f64) -> Result<BTreeMap<usize, f64>> {
    let mut cfg = RunConfig::default();
    cfg.mass.alpha = alpha;
    cfg.validate()?;
    Ok(Reference::compute(&cfg, false)?.ratios())
}

/// One three-body state of a sweep, compared with the contact reference.
/// Failed sweep points carry `error` and NaN numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRecord {
    pub shape: Shape,
    pub r: usize,
    pub n: Option<usize>,
    pub symmetry: Option<Symmetry>,
    pub e2: f64,
    pub v0: f64,
    pub energy: f64,
    pub ratio: f64,
    pub ratio_star: f64,
    pub delta_eps: f64,
    pub fidelity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn relative_deviation(ratio: f64, ratio_star: f64) -> f64 {
    ((ratio - ratio_star) / ratio_star).abs()
}

impl RatioRecord {
    fn failed(shape: Shape, r: usize, e2: f64, message: String) -> Self {
        Self {
            shape,
            r,
            n: None,
            symmetry: None,
            e2,
            v0: f64::NAN,
            energy: f64::NAN,
            ratio: f64::NAN,
            ratio_star: f64::NAN,
            delta_eps: f64::NAN,
            fidelity: None,
            error: Some(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Checks the bound `eps < -1` and the stored deviation.
    pub fn validate(&self) -> Result<()> {
        if !self.is_ok() {
            return Ok(());
        }
        if !(self.ratio < -1.0 && self.ratio_star < -1.0) {
            return Err(Error::Numerical(format!(
                "ratios {} and {} not below -1",
                self.ratio, self.ratio_star
            )));
        }
        if relative_deviation(self.ratio, self.ratio_star) != self.delta_eps {
            return Err(Error::Numerical("stored deviation does not match its ratios".into()));
        }
        Ok(())
    }
}

fn sweep_point(
    cfg: &RunConfig,
    shape: Shape,
    r: usize,
    e2: f64,
    reference: &Reference,
) -> Result<Vec<RatioRecord>> {
    let prepared = prepare(cfg, shape, r, e2, None)?;
    let states = prepared.states()?;
    let mut out = Vec::with_capacity(states.len());
    for st in &states {
        let Some(ratio_star) = reference.ratio(st.n) else {
            out.push(RatioRecord::failed(
                shape,
                r,
                e2,
                format!("state n = {} has no contact counterpart", st.n),
            ));
            continue;
        };
        let fidelity = match reference.fields.get(&st.n) {
            Some(reference_field) => {
                let field = Reconstruction::new(&prepared.solver, st)?
                    .sample_field(cfg.field.extent, cfg.field.resolution)?;
                Some(fidelity(&field, reference_field)?)
            }
            None => None,
        };
        out.push(RatioRecord {
            shape,
            r,
            n: Some(st.n),
            symmetry: Some(st.symmetry),
            e2,
            v0: prepared.potential.v0,
            energy: st.energy,
            ratio: st.ratio,
            ratio_star,
            delta_eps: relative_deviation(st.ratio, ratio_star),
            fidelity,
            error: None,
        });
    }
    Ok(out)
}

/// Ratios, deviations and (when the reference carries fields) fidelities
/// for one shape and resonance along `e2_list`. Failed points are reported
/// in-band and the sweep continues.
pub fn universality_sweep(
    cfg: &RunConfig,
    shape: Shape,
    r: usize,
    e2_list: &[f64],
    reference: &Reference,
) -> Vec<RatioRecord> {
    e2_list
        .par_iter()
        .map(|&e2| {
            sweep_point(cfg, shape, r, e2, reference).unwrap_or_else(|err| {
                log::error!("{shape} r={r} e2={e2}: {err}");
                vec![RatioRecord::failed(shape, r, e2, err.to_string())]
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// The configured sweep over shapes, resonances and energies, in that
/// nesting order regardless of the worker count.
pub fn run_sweep(cfg: &RunConfig, reference: &Reference, jobs: Option<usize>) -> Result<Vec<RatioRecord>> {
    let s = &cfg.sweep;
    let points: Vec<(Shape, usize)> =
        s.shapes.iter().flat_map(|&shape| s.resonances.iter().map(move |&r| (shape, r))).collect();
    with_jobs(jobs, || {
        points
            .par_iter()
            .map(|&(shape, r)| universality_sweep(cfg, shape, r, &s.e2, reference))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationPoint {
    pub e2: f64,
    pub v0: f64,
    pub energy: f64,
    pub ratio: f64,
}

/// Ratio of one state with a subset of separable terms along a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRecord {
    pub shape: Shape,
    pub r: usize,
    pub n: usize,
    pub included: Vec<usize>,
    /// Ratio at the smallest swept `|E2|`.
    pub limit_ratio: f64,
    pub trace: Vec<AblationPoint>,
}

fn ablation_point(
    cfg: &RunConfig,
    shape: Shape,
    r: usize,
    n: usize,
    mask: &[usize],
    e2: f64,
) -> Result<AblationPoint> {
    let prepared = prepare(cfg, shape, r, e2, Some(mask))?;
    let symmetry = if n % 2 == 0 { Symmetry::Boson } else { Symmetry::Fermion };
    let states = prepared.solver.find_states(symmetry)?;
    let st = states.iter().find(|s| s.n == n).ok_or_else(|| {
        Error::Numerical(format!("{shape} with terms {mask:?} at e2 = {e2} has no state n = {n}"))
    })?;
    Ok(AblationPoint { e2, v0: prepared.potential.v0, energy: st.energy, ratio: st.ratio })
}

/// State `n` at resonance `r` with only the listed terms in the kernel.
/// Every mask must contain the resonant term.
pub fn ablation_study(
    cfg: &RunConfig,
    shape: Shape,
    r: usize,
    n: usize,
    masks: &[Vec<usize>],
    e2_list: &[f64],
    jobs: Option<usize>,
) -> Result<Vec<AblationRecord>> {
    if e2_list.is_empty() {
        return Err(Error::Config("ablation needs at least one energy".into()));
    }
    for mask in masks {
        if !mask.contains(&r) {
            return Err(Error::Config(format!("mask {mask:?} lacks the resonant term {r}")));
        }
        let mut channels = cfg.channels.clone();
        channels.include = Some(mask.clone());
        channels.build()?;
    }
    let jobs_list: Vec<(usize, f64)> =
        (0..masks.len()).flat_map(|m| e2_list.iter().map(move |&e| (m, e))).collect();
    let points: Vec<Result<AblationPoint>> = with_jobs(jobs, || {
        jobs_list.par_iter().map(|&(m, e2)| ablation_point(cfg, shape, r, n, &masks[m], e2)).collect()
    })?;
    let mut points = points.into_iter();
    masks
        .iter()
        .map(|mask| {
            let trace: Vec<AblationPoint> = points.by_ref().take(e2_list.len()).collect::<Result<_>>()?;
            let limit_ratio = trace.last().map(|p| p.ratio).unwrap_or(f64::NAN);
            Ok(AblationRecord { shape, r, n, included: mask.clone(), limit_ratio, trace })
        })
        .collect()
}

pub const RECORD_COLUMNS: [&str; 11] =
    ["shape", "r", "n", "symmetry", "e2", "v0", "energy", "ratio", "ratio_star", "delta_eps", "fidelity"];

/// 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// Writes sweep records. In CSV a failed point has `error` in the
/// symmetry column and empty numbers; JSON keeps the message.
pub fn emit<W: Write>(records: &[RatioRecord], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Json => {
            serde_json::to_writer_pretty(out, records)?;
        }
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(RECORD_COLUMNS)?;
            for rec in records {
                let row: Vec<String> = if rec.is_ok() {
                    vec![
                        rec.shape.to_string(),
                        rec.r.to_string(),
                        rec.n.map(|n| n.to_string()).unwrap_or_default(),
                        rec.symmetry.map(|s| s.to_string()).unwrap_or_default(),
                        fmt17(rec.e2),
                        fmt17(rec.v0),
                        fmt17(rec.energy),
                        fmt17(rec.ratio),
                        fmt17(rec.ratio_star),
                        fmt17(rec.delta_eps),
                        opt17(rec.fidelity),
                    ]
                } else {
                    let mut row = vec![String::new(); RECORD_COLUMNS.len()];
                    row[0] = rec.shape.to_string();
                    row[1] = rec.r.to_string();
                    row[3] = "error".into();
                    row[4] = fmt17(rec.e2);
                    row
                };
                w.write_record(&row)?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

/// Reads records written by [`emit`] in CSV form.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<RatioRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_owned).collect();
    if header != RECORD_COLUMNS {
        return Err(Error::Shape(format!("unexpected columns {header:?}")));
    }
    let num =
        |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Shape(format!("not a number: '{s}'"))) };
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let shape: Shape = row[0].parse()?;
        let r: usize = row[1].parse().map_err(|_| Error::Shape(format!("bad r '{}'", &row[1])))?;
        let e2 = num(&row[4])?;
        if &row[3] == "error" {
            out.push(RatioRecord::failed(shape, r, e2, "failed sweep point".into()));
            continue;
        }
        out.push(RatioRecord {
            shape,
            r,
            n: Some(row[2].parse().map_err(|_| Error::Shape(format!("bad n '{}'", &row[2])))?),
            symmetry: Some(row[3].parse()?),
            e2,
            v0: num(&row[5])?,
            energy: num(&row[6])?,
            ratio: num(&row[7])?,
            ratio_star: num(&row[8])?,
            delta_eps: num(&row[9])?,
            fidelity: if row[10].is_empty() { None } else { Some(num(&row[10])?) },
            error: None,
        });
    }
    Ok(out)
}

/// Writes ablation records, one row per sweep point in CSV.
pub fn emit_ablation<W: Write>(records: &[AblationRecord], format: OutputFormat, out: W) -> Result<()> {
    match format {
        OutputFormat::Json => serde_json::to_writer_pretty(out, records)?,
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["shape", "r", "n", "included", "e2", "v0", "energy", "ratio"])?;
            for rec in records {
                let mask: Vec<String> = rec.included.iter().map(|nu| nu.to_string()).collect();
                for p in &rec.trace {
                    w.write_record([
                        rec.shape.to_string(),
                        rec.r.to_string(),
                        rec.n.to_string(),
                        mask.join(","),
                        fmt17(p.e2),
                        fmt17(p.v0),
                        fmt17(p.energy),
                        fmt17(p.ratio),
                    ])?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(ratio: f64, star: f64) -> RatioRecord {
        RatioRecord {
            shape: Shape::Gaussian,
            r: 1,
            n: Some(3),
            symmetry: Some(Symmetry::Fermion),
            e2: -1e-4,
            v0: -1.234,
            energy: ratio * 1e-4,
            ratio,
            ratio_star: star,
            delta_eps: relative_deviation(ratio, star),
            fidelity: Some(0.012345678901234567),
            error: None,
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let mut buf = Vec::new();
        emit(&[], OutputFormat::Csv, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "shape,r,n,symmetry,e2,v0,energy,ratio,ratio_star,delta_eps,fidelity\n"
        );
    }

    #[test]
    fn csv_round_trip_keeps_deviation_exact() {
        let recs = vec![record(-1.1381234567890123, -1.124005), record(-2.5, -2.7238)];
        let mut buf = Vec::new();
        emit(&recs, OutputFormat::Csv, &mut buf).unwrap();
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert_eq!(back, recs);
        for r in &back {
            r.validate().unwrap();
        }
    }

    #[test]
    fn json_round_trip() {
        let recs = vec![record(-1.3, -1.3285)];
        let mut buf = Vec::new();
        emit(&recs, OutputFormat::Json, &mut buf).unwrap();
        let back: Vec<RatioRecord> = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, recs);
    }

    #[test]
    fn failed_points_are_marked() {
        let recs = vec![RatioRecord::failed(Shape::LorentzCubed, 2, -1e-5, "boom".into())];
        let mut buf = Vec::new();
        emit(&recs, OutputFormat::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("lorentz3,2,,error,"));
        let back = read_records_csv(buf.as_slice()).unwrap();
        assert!(!back[0].is_ok());
    }

    #[test]
    fn validation_catches_bad_records() {
        let mut r = record(-1.2, -1.3);
        r.delta_eps += 1e-16;
        assert!(r.validate().is_err());
        assert!(record(-0.9, -1.3).validate().is_err());
    }

    #[test]
    fn masks_must_hold_resonant_term() {
        let cfg = RunConfig::default();
        let err = ablation_study(&cfg, Shape::Gaussian, 2, 1, &[vec![0, 1]], &[-1e-3], None);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}

//! Acceptance run. Prints one PASS/FAIL line per criterion and a summary;
//! with ACCEPTANCE_STRICT=1 it exits non-zero if any criterion fails. Takes
//! the better part of an hour.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::Instant;

use faddeev1d::analysis::{ablation_study, prepare, run_sweep, RatioRecord, Reference};
use faddeev1d::config::RunConfig;
use faddeev1d::faddeev::{Symmetry, ThreeBodyState};
use faddeev1d::grids::{build_grid, MapKind};
use faddeev1d::potentials::{PotentialSpec, Shape};
use faddeev1d::twobody::{bound_energies, coordinate_oracle, tune_magnitude, OracleOptions, WeinbergSolver};
use faddeev1d::wavefunction::{fidelity, Reconstruction};

const TABLE_I: [(usize, f64); 6] =
    [(0, -2.7238), (1, -1.6517), (2, -1.3285), (3, -1.1240), (4, -1.0373), (5, -1.0004)];
const TABLE_TOL: f64 = 5e-4;
const ANALYTIC_TOL: f64 = 1e-10;
const KERNEL_TOL: f64 = 1e-8;
const WEINBERG_TOL: f64 = 1e-8;
const TUNE_TOL: f64 = 1e-6;
const ORACLE_TOL: f64 = 1e-5;
const ORACLE_STEP: f64 = 0.025;
const TUNE_GRID: usize = 800;
const EXCHANGE_TOL: f64 = 1e-8;
const F1_CEILING: f64 = 0.5;
const F1_SPREAD: f64 = 0.1;
const REFINE_TOL: f64 = 1e-4;

const FINITE: [Shape; 2] = [Shape::LorentzCubed, Shape::Gaussian];

struct Report {
    failed: usize,
    start: Instant,
}

impl Report {
    fn line(&mut self, id: u32, name: &str, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!(
            "[{}] {id:>2} {name}: {detail} ({:.0} s)",
            if pass { "PASS" } else { "FAIL" },
            self.start.elapsed().as_secs_f64()
        );
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn ok_records<'a>(recs: &'a [RatioRecord], shape: Shape, r: usize) -> Vec<&'a RatioRecord> {
    recs.iter().filter(|x| x.shape == shape && x.r == r && x.is_ok()).collect()
}

/// `(n, e2) -> record` for one shape and resonance.
fn by_state(recs: &[RatioRecord], shape: Shape, r: usize) -> BTreeMap<(usize, u64), &RatioRecord> {
    ok_records(recs, shape, r).into_iter().map(|x| ((x.n.unwrap(), x.e2.to_bits()), x)).collect()
}

fn criterion_1(rep: &mut Report, reference: &Reference) {
    let mut worst = 0.0f64;
    let mut complete = reference.states.len() == 6;
    for (n, want) in TABLE_I {
        match reference.ratio(n) {
            Some(got) => worst = worst.max(rel(got, want)),
            None => complete = false,
        }
    }
    let got: Vec<String> = reference.states.iter().map(|s| format!("{:.5}", s.ratio)).collect();
    rep.line(
        1,
        "contact ratios reproduce the tabulated values",
        complete && worst <= TABLE_TOL,
        format!("ratios [{}], worst relative deviation {worst:.2e} (tol {TABLE_TOL:e})", got.join(", ")),
    );
}

fn criterion_2(rep: &mut Report) {
    let grid = build_grid(64, MapKind::SymmetricRational, 1.0).unwrap();
    let mut worst_e = 0.0f64;
    for v0 in [-0.2, -1e-2, -3.0] {
        let p = PotentialSpec::new(Shape::Contact, v0).unwrap();
        let s = bound_energies(&p, &grid, 3).unwrap();
        worst_e = worst_e.max(if s.len() == 1 { rel(s[0].energy, -0.5 * v0 * v0) } else { f64::INFINITY });
    }
    let v0 = -0.37;
    let p = PotentialSpec::new(Shape::Contact, v0).unwrap();
    let solver = WeinbergSolver::new(&p, &grid).unwrap();
    let mut worst_eta = 0.0f64;
    for i in 0..10 {
        let e = -10f64.powf(1.0 - 7.0 * i as f64 / 9.0);
        let eta = solver.solve(e, 1).unwrap().etas[0];
        worst_eta = worst_eta.max(rel(eta, -v0 / (2.0 * e.abs()).sqrt()));
    }
    rep.line(
        2,
        "contact two-body energy and eta are analytic",
        worst_e <= ANALYTIC_TOL && worst_eta <= ANALYTIC_TOL,
        format!("energy {worst_e:.1e}, eta ladder {worst_eta:.1e} (tol {ANALYTIC_TOL:e})"),
    );
}

/// Trapezoid cosine transform on `[-400, 400]`; spectrally accurate for
/// profiles analytic in a strip.
fn cosine_transform(shape: Shape, q: f64) -> f64 {
    let (h, m) = (0.01, 40_000);
    let mut s = 0.5 * shape.profile(0.0);
    for i in 1..=m {
        let x = i as f64 * h;
        let w = if i == m { 0.5 } else { 1.0 };
        s += w * shape.profile(x) * (q * x).cos();
    }
    2.0 * h * s
}

fn criterion_3(rep: &mut Report) {
    let probe = [-2.0, -0.5, 0.0, 0.7, 3.0];
    let mut worst = 0.0f64;
    for shape in FINITE {
        let v = PotentialSpec::new(shape, -1.0).unwrap();
        for &k in &probe {
            for &kp in &probe {
                worst = worst.max((v.kernel(k, kp) + cosine_transform(shape, k - kp)).abs());
            }
        }
    }
    rep.line(
        3,
        "momentum kernels match direct quadrature on a 5x5 probe",
        worst <= KERNEL_TOL,
        format!("max abs deviation {worst:.1e} at |v0| = 1 (tol {KERNEL_TOL:e})"),
    );
}

fn criterion_4(rep: &mut Report, cfg: &RunConfig) {
    let mut worst_norm = 0.0f64;
    let mut parity_ok = true;
    let mut min_eta = f64::INFINITY;
    let ladder: Vec<f64> = (0..15).map(|i| -10f64.powf(1.0 - 7.0 * i as f64 / 14.0)).collect();
    for shape in [Shape::LorentzCubed, Shape::Gaussian, Shape::Contact] {
        let (r, nu_max) = if shape == Shape::Contact { (0, 1) } else { (2, cfg.channels.nu_max) };
        for e2 in [-1e-3, -1e-5] {
            let grid = cfg.grid.build(e2).unwrap();
            let tuned = tune_magnitude(shape, r, e2, &grid).unwrap();
            for &e in &ladder {
                // the contact form factor is analytic, so its norm is a
                // continuum integral that needs a grid resolving sqrt(2|E|)
                let grid = if shape == Shape::Contact { cfg.grid.build(e).unwrap() } else { grid.clone() };
                let solver = WeinbergSolver::new(&tuned.potential, &grid).unwrap();
                let (k, w) = (grid.nodes(), grid.weights());
                let sys = solver.solve(e, nu_max).unwrap();
                parity_ok &= sys.ordered;
                parity_ok &=
                    sys.parities.iter().enumerate().all(|(nu, &p)| p == if nu % 2 == 0 { 1 } else { -1 });
                min_eta = min_eta.min(sys.etas.iter().fold(f64::INFINITY, |m, &x| m.min(x / sys.etas[0])));
                let g = solver.grid_form_factors(&sys);
                for a in 0..nu_max {
                    for b in 0..=a {
                        let s: f64 = (0..k.len())
                            .map(|i| w[i] * g[(i, a)] * g[(i, b)] / (0.5 * k[i] * k[i] - e))
                            .sum::<f64>()
                            / (2.0 * PI);
                        worst_norm = worst_norm.max((s - if a == b { 1.0 } else { 0.0 }).abs());
                    }
                }
            }
        }
    }
    rep.line(
        4,
        "Weinberg normalization, parity alternation and eta >= 0",
        worst_norm <= WEINBERG_TOL && parity_ok && min_eta >= -1e-12,
        format!(
            "orthonormality defect {worst_norm:.1e} (tol {WEINBERG_TOL:e}), parities {}, min eta/eta_0 {min_eta:.1e}",
            if parity_ok { "alternate" } else { "BROKEN" }
        ),
    );
}

fn criterion_5(rep: &mut Report, cfg: &RunConfig) {
    // the lorentz3 kernel has a weak kink at k = k', so two-body energies
    // converge algebraically; 800 nodes agree with 1600 to ~1e-7
    let mut fine = cfg.clone();
    fine.grid.count = TUNE_GRID;
    let mut worst_tune = 0.0f64;
    let mut worst_oracle = 0.0f64;
    let mut worst_default = 0.0f64;
    let mut failures = Vec::new();
    for shape in [Shape::LorentzCubed, Shape::Gaussian, Shape::Contact] {
        let rs: &[usize] = if shape == Shape::Contact { &[0] } else { &[0, 1, 2] };
        for &r in rs {
            for e2 in [-1e-3, -1e-5] {
                let grid = fine.grid.build(e2).unwrap();
                let tuned = match tune_magnitude(shape, r, e2, &grid) {
                    Ok(t) => t,
                    Err(e) => {
                        failures.push(format!("{shape} r={r} e2={e2}: {e}"));
                        continue;
                    }
                };
                let states = bound_energies(&tuned.potential, &grid, r).unwrap();
                worst_tune = worst_tune.max(states.get(r).map_or(f64::INFINITY, |s| rel(s.energy, e2)));
                if shape.is_finite_range() {
                    let opts = OracleOptions::for_energy(e2, ORACLE_STEP);
                    match coordinate_oracle(&tuned.potential, r, &opts) {
                        Ok(o) if o.len() == r + 1 => {
                            worst_oracle = worst_oracle.max(rel(o[r].energy, e2));
                        }
                        Ok(o) => failures.push(format!("{shape} r={r}: oracle found {} states", o.len())),
                        Err(e) => failures.push(format!("{shape} r={r}: {e}")),
                    }
                    let coarse = cfg.grid.build(e2).unwrap();
                    if let Some(s) = bound_energies(&tuned.potential, &coarse, r).unwrap().get(r) {
                        worst_default = worst_default.max(rel(s.energy, e2));
                    }
                }
            }
        }
    }
    rep.line(
        5,
        "tuned strengths round-trip and agree with the coordinate oracle",
        failures.is_empty() && worst_tune <= TUNE_TOL && worst_oracle <= ORACLE_TOL,
        format!(
            "{TUNE_GRID}-node grid: re-solve {worst_tune:.1e} (tol {TUNE_TOL:e}), oracle {worst_oracle:.1e} \
             (tol {ORACLE_TOL:e}); same strengths on the {}-node default grid {worst_default:.1e}{}",
            cfg.grid.count,
            if failures.is_empty() { String::new() } else { format!(", errors: {failures:?}") }
        ),
    );
}

fn criterion_6(rep: &mut Report, reference: &Reference, recs: &[RatioRecord]) {
    let e2 = -1e-4f64;
    let mut counts = vec![format!("contact {}", reference.states.len())];
    let mut pass = reference.states.len() == 6;
    for shape in FINITE {
        for r in [1, 2] {
            let labels: Vec<usize> =
                ok_records(recs, shape, r).into_iter().filter(|x| x.e2 == e2).map(|x| x.n.unwrap()).collect();
            pass &= labels == [0, 1, 2, 3, 4, 5];
            counts.push(format!("{shape} r={r} {}", labels.len()));
        }
    }
    rep.line(6, "six states (3 boson, 3 fermion) at |E2| = 1e-4", pass, counts.join(", "));
}

fn criterion_7(rep: &mut Report, cfg: &RunConfig, recs: &[RatioRecord]) {
    let tol = cfg.tolerances.universality;
    let e2 = *cfg.sweep.e2.last().unwrap();
    let mut worst = 0.0f64;
    let mut pass = true;
    for r in [1, 2] {
        let a = by_state(recs, Shape::LorentzCubed, r);
        let b = by_state(recs, Shape::Gaussian, r);
        for n in 0..6 {
            match (a.get(&(n, e2.to_bits())), b.get(&(n, e2.to_bits()))) {
                (Some(x), Some(y)) => worst = worst.max(rel(x.ratio, y.ratio)),
                _ => pass = false,
            }
        }
    }
    rep.line(
        7,
        "lorentz3 and gauss ratios agree at the smallest |E2|",
        pass && worst <= tol,
        format!("|E2| = {:e}, worst relative difference {worst:.2e} (tol {tol})", e2.abs()),
    );
}

fn criterion_8(rep: &mut Report, cfg: &RunConfig, recs: &[RatioRecord]) {
    let mut monotone_breaks = Vec::new();
    let mut parity_breaks = Vec::new();
    for shape in FINITE {
        for r in [1, 2] {
            let m = by_state(recs, shape, r);
            for n in 0..6 {
                let trace: Vec<f64> = cfg
                    .sweep
                    .e2
                    .iter()
                    .map(|e| m.get(&(n, e.to_bits())).map_or(f64::NAN, |x| x.delta_eps))
                    .collect();
                if !trace.windows(2).all(|w| w[1] < w[0]) {
                    monotone_breaks.push(format!("{shape} r={r} n={n} {trace:?}"));
                }
            }
            for e in &cfg.sweep.e2 {
                for k in 0..3 {
                    let boson = m.get(&(2 * k, e.to_bits())).map_or(f64::NAN, |x| x.delta_eps);
                    let fermion = m.get(&(2 * k + 1, e.to_bits())).map_or(f64::NAN, |x| x.delta_eps);
                    if !(fermion < boson) {
                        parity_breaks.push(format!(
                            "{shape} r={r} e2={e:e} n={}/{}: {fermion:.2e} vs {boson:.2e}",
                            2 * k + 1,
                            2 * k
                        ));
                    }
                }
            }
        }
    }
    rep.line(
        8,
        "deviations shrink with |E2|, fermions below bosons",
        monotone_breaks.is_empty() && parity_breaks.is_empty(),
        if monotone_breaks.is_empty() && parity_breaks.is_empty() {
            "all 24 traces decrease; all 36 pairs ordered".into()
        } else {
            format!("non-monotone {monotone_breaks:?}; unordered {parity_breaks:?}")
        },
    );
}

fn criterion_9(rep: &mut Report, cfg: &RunConfig, recs: &[RatioRecord]) {
    let mut breaks = Vec::new();
    let mut max_f1 = 0.0f64;
    let mut max_spread = 0.0f64;
    let mut last_f2 = Vec::new();
    for shape in FINITE {
        for r in [1, 2] {
            let m = by_state(recs, shape, r);
            for n in 0..6 {
                let trace: Vec<f64> = cfg
                    .sweep
                    .e2
                    .iter()
                    .map(|e| m.get(&(n, e.to_bits())).and_then(|x| x.fidelity).unwrap_or(f64::NAN))
                    .collect();
                if r == 2 {
                    if !(trace.windows(2).all(|w| w[1] > w[0]) && trace.iter().all(|&f| f <= 1.0)) {
                        breaks.push(format!("{shape} F2,{n} {trace:.4?}"));
                    }
                    last_f2.push(*trace.last().unwrap());
                } else {
                    let hi = trace.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    let lo = trace.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                    max_f1 = max_f1.max(hi);
                    max_spread = max_spread.max(hi - lo);
                    if !(hi < F1_CEILING && hi - lo < F1_SPREAD) {
                        breaks.push(format!("{shape} F1,{n} {trace:.4?}"));
                    }
                }
            }
        }
    }
    let min_f2 = last_f2.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    rep.line(
        9,
        "F2,n increases toward 1, F1,n stays small and flat",
        breaks.is_empty(),
        format!(
            "max F1 {max_f1:.3} (< {F1_CEILING}), max F1 spread {max_spread:.3} (< {F1_SPREAD}), \
             min F2 at smallest |E2| {min_f2:.4}{}",
            if breaks.is_empty() { String::new() } else { format!(", violations {breaks:?}") }
        ),
    );
}

fn criterion_10(rep: &mut Report, cfg: &RunConfig, reference: &Reference) {
    let mut worst = 0.0f64;
    let mut worst_zero = 0.0f64;
    let mut fields = 0;
    let mut check = |f: &faddeev1d::wavefunction::WaveField2D| {
        worst = worst.max(f.exchange_defect());
        // only odd resolutions put a column on K23 = 0
        if f.symmetry == Symmetry::Fermion && f.k23.len() % 2 == 1 {
            let mid = f.k23.len() / 2;
            assert_eq!(f.k23[mid], 0.0);
            let scale = f.values.norm_max();
            for j in 0..f.p1.len() {
                worst_zero = worst_zero.max(f.values[(j, mid)].abs() / scale);
            }
        }
        fields += 1;
    };
    for f in reference.fields.values() {
        check(f);
    }
    let odd = cfg.field.resolution | 1;
    for (shape, r, e2) in
        [(Shape::Contact, 0, reference.e2), (Shape::Gaussian, 2, -1e-4), (Shape::LorentzCubed, 1, -1e-3)]
    {
        let p = prepare(cfg, shape, r, e2, None).unwrap();
        for st in p.states().unwrap() {
            let rec = Reconstruction::new(&p.solver, &st).unwrap();
            for res in [cfg.field.resolution, odd] {
                if shape == Shape::Contact && res == cfg.field.resolution {
                    continue;
                }
                check(&rec.sample_field(cfg.field.extent, res).unwrap());
            }
        }
    }
    rep.line(
        10,
        "fields are exchange symmetric, fermions vanish at K23 = 0",
        worst <= EXCHANGE_TOL && worst_zero <= EXCHANGE_TOL,
        format!(
            "{fields} fields, defect {worst:.1e}, K23 = 0 residue at resolution {odd} {worst_zero:.1e} \
             (tol {EXCHANGE_TOL:e})"
        ),
    );
}

fn criterion_11(rep: &mut Report, cfg: &RunConfig, reference: &Reference) {
    let tol = cfg.tolerances.ablation;
    let (r, n) = (2, cfg.sweep.ablation_n);
    let star = reference.ratio(n).unwrap();
    let mut limits: BTreeMap<(&str, Vec<usize>), f64> = BTreeMap::new();
    let mut errors = Vec::new();
    for shape in FINITE {
        match ablation_study(cfg, shape, r, n, &cfg.sweep.masks, &cfg.sweep.e2, None) {
            Ok(recs) => {
                for rec in recs {
                    limits.insert((shape.name(), rec.included), rec.limit_ratio);
                }
            }
            Err(e) => errors.push(format!("{shape}: {e}")),
        }
    }
    let get =
        |shape: Shape, m: &[usize]| limits.get(&(shape.name(), m.to_vec())).copied().unwrap_or(f64::NAN);
    let mut pass = errors.is_empty();
    let mut parts = Vec::new();
    for shape in FINITE {
        let full = get(shape, &[0, 1, 2]);
        let no1 = get(shape, &[0, 2]);
        let no0 = get(shape, &[1, 2]);
        let only = get(shape, &[2]);
        pass &= rel(full, star) <= tol && rel(no1, star) <= tol;
        pass &= rel(no0, only) <= tol && rel(no0, star) > tol && rel(only, star) > tol;
        parts.push(format!("{shape}: {{0,1,2}} {full:.5} {{0,2}} {no1:.5} {{1,2}} {no0:.5} {{2}} {only:.5}"));
    }
    for m in &cfg.sweep.masks {
        let (a, b) = (get(Shape::LorentzCubed, m), get(Shape::Gaussian, m));
        pass &= rel(a, b) <= tol;
    }
    rep.line(
        11,
        "ablation limits follow the expected pattern",
        pass,
        format!(
            "eps*_{n} = {star:.5}; {} (tol {tol}){}",
            parts.join("; "),
            if errors.is_empty() { String::new() } else { format!(", errors {errors:?}") }
        ),
    );
}

fn energies(states: &[ThreeBodyState]) -> Vec<f64> {
    states.iter().map(|s| s.energy).collect()
}

/// Largest relative change and the position where it occurs.
fn shift(a: &[f64], b: &[f64]) -> (f64, usize) {
    if a.len() != b.len() {
        return (f64::INFINITY, 0);
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| rel(*y, *x))
        .enumerate()
        .fold((0.0, 0), |m, (i, d)| if d > m.0 { (d, i) } else { m })
}

fn criterion_12(rep: &mut Report, cfg: &RunConfig) {
    let (shape, r, e2) = (Shape::Gaussian, 2, -1e-4);
    let base_p = prepare(cfg, shape, r, e2, None).unwrap();
    let base_states = base_p.states().unwrap();
    let base = energies(&base_states);

    let variant = |edit: &dyn Fn(&mut RunConfig)| {
        let mut c = cfg.clone();
        edit(&mut c);
        energies(&prepare(&c, shape, r, e2, None).unwrap().states().unwrap())
    };
    let nu = shift(&base, &variant(&|c| c.channels.nu_max = 14));
    let pole = shift(&base, &variant(&|c| c.three_body.pole_window *= 0.5));
    let count = shift(&base, &variant(&|c| c.three_body.count = 400));
    let two_body = shift(&base, &variant(&|c| c.grid.count = 300));

    let res = cfg.field.resolution;
    let contact = prepare(cfg, Shape::Contact, 0, cfg.sweep.reference_e2, None).unwrap();
    let contact_states = contact.states().unwrap();
    let mut field_shift = (0.0f64, 0);
    for st in &base_states {
        let Some(cs) = contact_states.iter().find(|s| s.n == st.n) else {
            field_shift = (f64::INFINITY, st.n);
            continue;
        };
        let rec = Reconstruction::new(&base_p.solver, st).unwrap();
        let crec = Reconstruction::new(&contact.solver, cs).unwrap();
        let mut f = [0.0; 2];
        for (slot, m) in [res, 2 * res - 1].into_iter().enumerate() {
            let a = rec.sample_field(cfg.field.extent, m).unwrap();
            let b = crec.sample_field(cfg.field.extent, m).unwrap();
            f[slot] = fidelity(&a, &b).unwrap();
        }
        let d = (f[0] - f[1]).abs();
        if d > field_shift.0 {
            field_shift = (d, st.n);
        }
    }
    let label = |x: (f64, usize)| format!("{:.1e} (n={})", x.0, base_states.get(x.1).map_or(x.1, |s| s.n));
    let pass = [nu, pole, count, two_body].iter().all(|x| x.0 <= REFINE_TOL) && field_shift.0 <= REFINE_TOL;
    rep.line(
        12,
        "refinement stability in place of the |E2| < 1e-5 endpoints",
        pass,
        format!(
            "{shape} r={r} |E2|={:e}: nu_max 10->14 {}, pole window halved {}, three-body count 300->400 {}, \
             two-body count 200->300 {}, field resolution {res}->{} dF {:.1e} (n={}) (tol {REFINE_TOL:e})",
            e2.abs(),
            label(nu),
            label(pole),
            label(count),
            label(two_body),
            2 * res - 1,
            field_shift.0,
            field_shift.1,
        ),
    );
}

fn main() {
    let mut rep = Report { failed: 0, start: Instant::now() };
    let cfg = RunConfig::default();

    let reference = Reference::compute(&cfg, true).expect("contact reference");
    criterion_1(&mut rep, &reference);
    criterion_2(&mut rep);
    criterion_3(&mut rep);
    criterion_4(&mut rep, &cfg);
    criterion_5(&mut rep, &cfg);

    let recs = run_sweep(&cfg, &reference, None).expect("sweep");
    for rec in recs.iter().filter(|r| !r.is_ok()) {
        println!(
            "       sweep point failed: {} r={} e2={:e}: {}",
            rec.shape,
            rec.r,
            rec.e2,
            rec.error.as_deref().unwrap_or("")
        );
    }
    criterion_6(&mut rep, &reference, &recs);
    criterion_7(&mut rep, &cfg, &recs);
    criterion_8(&mut rep, &cfg, &recs);
    criterion_9(&mut rep, &cfg, &recs);
    criterion_10(&mut rep, &cfg, &reference);
    criterion_11(&mut rep, &cfg, &reference);
    criterion_12(&mut rep, &cfg);

    println!("{} of 12 criteria failed", rep.failed);
    // failures are reported above; ACCEPTANCE_STRICT=1 turns them into a
    // non-zero exit for CI gates
    if rep.failed > 0 && std::env::var_os("ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}

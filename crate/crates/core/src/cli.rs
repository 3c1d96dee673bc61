//! Command-line front end. Flags override the JSON config, which overrides
//! the built-in defaults.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::analysis::{self, Reference};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{Error, Result};
use crate::faddeev::Symmetry;
use crate::potentials::{PotentialSpec, Shape};
use crate::twobody::{bound_energies, tune_magnitude};
use crate::wavefunction::{fidelity, Reconstruction, WaveField2D};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "faddeev1d", version, about = "One-dimensional heavy-heavy-light three-body solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// JSON run config; flags given on the command line take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mass ratio M/m [mass.alpha].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Two-body grid node count [grid.count].
    #[arg(long)]
    pub grid_count: Option<usize>,
    /// Two-body grid clustering scale [grid.scale].
    #[arg(long)]
    pub grid_scale: Option<f64>,
    /// Three-body grid node count [three_body.count].
    #[arg(long)]
    pub count: Option<usize>,
    /// Number of separable terms [channels.nu_max].
    #[arg(long)]
    pub nu_max: Option<usize>,
    /// Search window multiplier [three_body.window].
    #[arg(long)]
    pub window: Option<f64>,
}

#[derive(Debug, Args)]
pub struct Target {
    /// Potential shape: lorentz3, gauss or contact [potential.shape].
    #[arg(long)]
    pub shape: Option<Shape>,
    /// Resonance index of the tuned two-body state [potential.r].
    #[arg(long)]
    pub r: Option<usize>,
    /// Target two-body energy [potential.e2].
    #[arg(long, allow_hyphen_values = true)]
    pub e2: Option<f64>,
    /// Fixed strength instead of tuning [potential.v0].
    #[arg(long, allow_hyphen_values = true)]
    pub v0: Option<f64>,
}

const FIELDS_TUNE: &str = "Config fields: potential.{shape,r,e2}, grid.{count,map,scale,outer}.";
const FIELDS_TWO_BODY: &str = "Config fields: potential.{shape,v0,e2}, grid.{count,map,scale,outer}. \
     potential.e2 only sets the default grid scale here.";
const FIELDS_SOLVE: &str = "Config fields: potential.{shape,r,e2,v0}, mass.alpha, \
     grid.{count,map,scale,outer}, three_body.{count,scale_fraction,outer,window,scan_points,\
     min_binding,pole_window}, channels.{nu_max,include}.";
const FIELDS_FIELD: &str = "Config fields: potential.{shape,r,e2,v0}, mass.alpha, \
     grid.{count,map,scale,outer}, three_body.{count,scale_fraction,outer,window,scan_points,\
     min_binding,pole_window}, channels.{nu_max,include}, field.{extent,resolution}.";
const FIELDS_SWEEP: &str = "Config fields: every section; sweep.{shapes,resonances,e2,\
     fidelity,reference_e2}, field.{extent,resolution}, output.{path,format}.";
const FIELDS_ABLATE: &str = "Config fields: mass.alpha, grid.*, three_body.*, channels.nu_max, \
     sweep.{e2,masks,ablation_n}, output.{path,format}.";
const FIELDS_REFERENCE: &str = "Config fields: mass.alpha, three_body.*, sweep.reference_e2.";

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tune the strength so that two-body state r sits at e2.
    #[command(after_help = FIELDS_TUNE)]
    Tune {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
    },
    /// Two-body bound spectrum of a fixed-strength potential as CSV.
    #[command(name = "two-body", after_help = FIELDS_TWO_BODY)]
    TwoBody {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
        /// Highest state index to look for.
        #[arg(long, default_value_t = 10)]
        r_max: usize,
    },
    /// Three-body states in the resonance window as JSON.
    #[command(after_help = FIELDS_SOLVE)]
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
        /// boson or fermion; both when absent.
        #[arg(long)]
        symmetry: Option<Symmetry>,
        /// Comma-separated separable terms to keep [channels.include].
        #[arg(long, value_delimiter = ',')]
        include: Option<Vec<usize>>,
    },
    /// Sample a normalized three-body wave function to CSV.
    #[command(after_help = FIELDS_FIELD)]
    Wavefunction {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: Target,
        /// State label n (even: boson, odd: fermion).
        #[arg(long)]
        n: usize,
        /// Half width in scaled momenta [field.extent].
        #[arg(long)]
        extent: Option<f64>,
        /// Points per axis [field.resolution].
        #[arg(long)]
        resolution: Option<usize>,
        /// Comma-separated separable terms to keep [channels.include].
        #[arg(long, value_delimiter = ',')]
        include: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fidelity of two sampled fields as JSON.
    Fidelity {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Ratios, deviations and fidelities over shapes, resonances and energies.
    #[command(after_help = FIELDS_SWEEP)]
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Output file [output.path]; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv or json [output.format].
        #[arg(long)]
        format: Option<OutputFormat>,
        /// Parallel sweep workers; all cores by default.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Limit ratios with subsets of separable terms.
    #[command(after_help = FIELDS_ABLATE)]
    Ablate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        shape: Shape,
        /// Masks as "0,1,2|0,2|1,2|2" [sweep.masks].
        #[arg(long)]
        masks: Option<String>,
        /// Resonance index.
        #[arg(long, default_value_t = 2)]
        r: usize,
        /// Followed state [sweep.ablation_n].
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<OutputFormat>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Contact-interaction ratios as JSON.
    #[command(after_help = FIELDS_REFERENCE)]
    Reference {
        #[command(flatten)]
        common: Common,
    },
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(Error::Config(format!("unknown output format '{s}'"))),
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(a) = common.alpha {
        cfg.mass.alpha = a;
    }
    if let Some(c) = common.grid_count {
        cfg.grid.count = c;
    }
    if common.grid_scale.is_some() {
        cfg.grid.scale = common.grid_scale;
    }
    if let Some(c) = common.count {
        cfg.three_body.count = c;
    }
    if let Some(n) = common.nu_max {
        cfg.channels.nu_max = n;
    }
    if let Some(w) = common.window {
        cfg.three_body.window = w;
    }
    Ok(cfg)
}

fn apply_target(cfg: &mut RunConfig, t: &Target) {
    if let Some(s) = t.shape {
        cfg.potential.shape = s;
    }
    match t.r {
        Some(r) => cfg.potential.r = r,
        // the contact interaction binds a single state
        None if cfg.potential.shape == Shape::Contact => cfg.potential.r = 0,
        None => {}
    }
    if let Some(e) = t.e2 {
        cfg.potential.e2 = e;
    }
    if t.v0.is_some() {
        cfg.potential.v0 = t.v0;
    }
}

fn configured(common: &Common, target: Option<&Target>) -> Result<RunConfig> {
    let mut cfg = load(common)?;
    if let Some(t) = target {
        apply_target(&mut cfg, t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare(cfg: &RunConfig) -> Result<analysis::Prepared> {
    let p = &cfg.potential;
    match p.v0 {
        Some(v0) => analysis::prepare_potential(cfg, &PotentialSpec::new(p.shape, v0)?, p.r, p.e2, None),
        None => analysis::prepare(cfg, p.shape, p.r, p.e2, None),
    }
}

fn writer<'a>(path: Option<&PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn parse_masks(text: &str) -> Result<Vec<Vec<usize>>> {
    text.split('|')
        .map(|m| {
            m.split(',')
                .map(|t| t.trim().parse().map_err(|_| Error::Config(format!("bad term '{t}' in mask '{m}'"))))
                .collect()
        })
        .collect()
}

fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Tune { common, target } => {
            let cfg = configured(&common, Some(&target))?;
            let p = &cfg.potential;
            let t = tune_magnitude(p.shape, p.r, p.e2, &cfg.grid.build(p.e2)?)?;
            let v = json!({"v0": t.potential.v0, "achieved_e2": t.achieved, "iterations": t.iterations});
            writeln!(out, "{v}")?;
        }
        Command::TwoBody { common, target, r_max } => {
            let cfg = configured(&common, Some(&target))?;
            let p = &cfg.potential;
            let v0 = p.v0.ok_or_else(|| Error::Config("two-body needs --v0".into()))?;
            let pot = PotentialSpec::new(p.shape, v0)?;
            let states = bound_energies(&pot, &cfg.grid.build(p.e2)?, r_max)?;
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["r", "energy", "parity"])?;
            for s in states {
                w.write_record([s.r.to_string(), analysis::fmt17(s.energy), s.parity.to_string()])?;
            }
            w.flush()?;
        }
        Command::Spectrum { common, target, symmetry, include } => {
            let mut cfg = configured(&common, Some(&target))?;
            if include.is_some() {
                cfg.channels.include = include;
                cfg.validate()?;
            }
            let prepared = prepare(&cfg)?;
            let states = match symmetry {
                Some(s) => prepared.solver.find_states(s)?,
                None => prepared.states()?,
            };
            let list: Vec<_> = states
                .iter()
                .map(|s| {
                    json!({"n": s.n, "symmetry": s.symmetry, "energy": s.energy,
                           "ratio": s.ratio, "eigenvalue": s.eigenvalue})
                })
                .collect();
            let v = json!({
                "states": list,
                "two_body_energy": prepared.solver.two_body_energy(),
                "v0": prepared.potential.v0,
                "nu_max": prepared.solver.nu_max(),
                "channels": prepared.solver.channels(),
            });
            writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
        }
        Command::Wavefunction { common, target, n, extent, resolution, include, out: path } => {
            let mut cfg = configured(&common, Some(&target))?;
            if let Some(e) = extent {
                cfg.field.extent = e;
            }
            if let Some(r) = resolution {
                cfg.field.resolution = r;
            }
            if include.is_some() {
                cfg.channels.include = include;
            }
            cfg.validate()?;
            let prepared = prepare(&cfg)?;
            let symmetry = if n % 2 == 0 { Symmetry::Boson } else { Symmetry::Fermion };
            let states = prepared.solver.find_states(symmetry)?;
            let st = states
                .iter()
                .find(|s| s.n == n)
                .ok_or_else(|| Error::Numerical(format!("no state n = {n} in the window")))?;
            let field = Reconstruction::new(&prepared.solver, st)?
                .sample_field(cfg.field.extent, cfg.field.resolution)?;
            field.write_csv(BufWriter::new(File::create(&path)?))?;
            let v = json!({"n": n, "energy": st.energy, "ratio": st.ratio,
                           "exchange_defect": field.exchange_defect(), "out": path});
            writeln!(out, "{v}")?;
        }
        Command::Fidelity { a, b } => {
            let fa = WaveField2D::read_csv(File::open(&a)?)?;
            let fb = WaveField2D::read_csv(File::open(&b)?)?;
            writeln!(out, "{}", json!({"F": fidelity(&fa, &fb)?}))?;
        }
        Command::Sweep { common, out: path, format, jobs } => {
            let mut cfg = configured(&common, None)?;
            if path.is_some() {
                cfg.output.path = path;
            }
            if let Some(f) = format {
                cfg.output.format = f;
            }
            if jobs == Some(0) {
                return Err(Error::Config("--jobs must be positive".into()));
            }
            let reference = Reference::compute(&cfg, cfg.sweep.fidelity)?;
            let records = analysis::run_sweep(&cfg, &reference, jobs)?;
            for r in &records {
                r.validate()?;
            }
            analysis::emit(&records, cfg.output.format, writer(cfg.output.path.as_ref(), out)?)?;
            if records.iter().any(|r| !r.is_ok()) {
                return Err(Error::Numerical("some sweep points failed; see the output".into()));
            }
        }
        Command::Ablate { common, shape, masks, r, n, out: path, format, jobs } => {
            let mut cfg = configured(&common, None)?;
            if let Some(m) = masks {
                cfg.sweep.masks = parse_masks(&m)?;
            }
            if let Some(n) = n {
                cfg.sweep.ablation_n = n;
            }
            if path.is_some() {
                cfg.output.path = path;
            }
            if let Some(f) = format {
                cfg.output.format = f;
            }
            let records = analysis::ablation_study(
                &cfg,
                shape,
                r,
                cfg.sweep.ablation_n,
                &cfg.sweep.masks,
                &cfg.sweep.e2,
                jobs,
            )?;
            analysis::emit_ablation(&records, cfg.output.format, writer(cfg.output.path.as_ref(), out)?)?;
        }
        Command::Reference { common } => {
            let cfg = configured(&common, None)?;
            let reference = Reference::compute(&cfg, false)?;
            writeln!(out, "{}", serde_json::to_string_pretty(&reference)?)?;
        }
    }
    Ok(())
}

/// Exit code for an error: 2 for configuration problems, 3 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_config() || matches!(err, Error::Io(_)) {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Parses `args` (program name first) and runs the subcommand, writing
/// results to `out` and diagnostics to standard error.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

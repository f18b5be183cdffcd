//! Commands and their output.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use bguide::asymptotics::AsymptoticModel;
use bguide::design::{find_invisibility, find_zero_reflection, find_zero_transmission};
use bguide::geometry::{half_domain, WallBc};
use bguide::report::{asy_row, field_rows, sweep_row, write_table, ASY_HEADER, FIELD_HEADER, SWEEP_HEADER};
use bguide::scattering::{full_scattering, half_scattering, limit_smatrix, sweep_heights};
use bguide::solver::{Factored, Incidence};
use bguide::{Error, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "bguide", version, about = "Scattering in branched Neumann waveguides")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

/// A height `L` or a window `from:to[:step]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum HeightArg {
    Value(f64),
    Window(f64, f64, Option<f64>),
}

fn parse_height(s: &str) -> std::result::Result<HeightArg, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}"));
    match parts.as_slice() {
        [v] => Ok(HeightArg::Value(num(v)?)),
        [a, b] => Ok(HeightArg::Window(num(a)?, num(b)?, None)),
        [a, b, c] => Ok(HeightArg::Window(num(a)?, num(b)?, Some(num(c)?))),
        _ => Err("expected L, from:to or from:to:step".into()),
    }
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    match parse_height(s)? {
        HeightArg::Window(a, b, None) => Ok((a, b)),
        _ => Err("expected lo:hi".into()),
    }
}

#[derive(Args, Debug, Default)]
pub struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Writes the resolved configuration to this path.
    #[arg(long, global = true)]
    pub write_config: Option<PathBuf>,
    /// Central branch width ℓ.
    #[arg(long = "l", global = true)]
    pub ell: Option<f64>,
    /// Central branch top L, or a window from:to[:step].
    #[arg(long = "L", global = true, value_parser = parse_height, allow_hyphen_values = true)]
    pub height: Option<HeightArg>,
    /// Side branch top γ.
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Side branch centre ϑ.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    #[arg(long, global = true)]
    pub side_width: Option<f64>,
    /// Plain strip without branches.
    #[arg(long, global = true)]
    pub straight: bool,
    #[arg(long, global = true, conflicts_with = "k_pi")]
    pub k: Option<f64>,
    /// k as a multiple of π.
    #[arg(long, global = true)]
    pub k_pi: Option<f64>,
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Transverse modes per port.
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    #[arg(long, global = true)]
    pub xmax: Option<f64>,
    #[arg(long, global = true)]
    pub y_cut: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Table output path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Field dump path.
    #[arg(long, global = true)]
    pub field_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MethodArg {
    Direct,
    Reduced,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum HalfArg {
    Neumann,
    #[value(alias = "dirichlet")]
    Mixed,
}

impl HalfArg {
    fn wall(self) -> WallBc {
        match self {
            HalfArg::Neumann => WallBc::Neumann,
            HalfArg::Mixed => WallBc::Dirichlet,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// One solve: R and T, or r with --half.
    Solve {
        #[arg(long, value_enum)]
        half: Option<HalfArg>,
    },
    /// R and T over a window of L, as CSV.
    Sweep,
    /// Scattering matrix of the semi-infinite limit problem.
    Smatrix {
        #[arg(long, value_enum, default_value = "neumann")]
        bc: HalfArg,
    },
    /// Asymptotic coefficients over a window of L, as CSV.
    Asy,
    /// Design searches.
    Design {
        #[command(subcommand)]
        target: DesignTarget,
    },
    /// Nodal field of the full problem: x, y, Re, Im.
    Field {
        #[arg(long, value_enum)]
        half: Option<HalfArg>,
    },
}

#[derive(Subcommand, Debug)]
pub enum DesignTarget {
    ZeroReflection(DesignArgs),
    ZeroTransmission(DesignArgs),
    Invisible(InvisibleArgs),
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    /// Window lo:hi in L.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    pub window: Option<(f64, f64)>,
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Args, Debug)]
pub struct InvisibleArgs {
    /// Window lo:hi in γ.
    #[arg(long, value_parser = parse_pair)]
    pub gamma_window: Option<(f64, f64)>,
    /// Window lo:hi in L.
    #[arg(long, value_parser = parse_pair)]
    pub window: Option<(f64, f64)>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub joint_refine: bool,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve { .. } => "solve",
            Command::Sweep => "sweep",
            Command::Smatrix { .. } => "smatrix",
            Command::Asy => "asy",
            Command::Design { target: DesignTarget::ZeroReflection(_) } => "design zero-reflection",
            Command::Design { target: DesignTarget::ZeroTransmission(_) } => "design zero-transmission",
            Command::Design { target: DesignTarget::Invisible(_) } => "design invisible",
            Command::Field { .. } => "field",
        }
    }
}

/// Loads the config file if any and applies the flags on top.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.command = Some(cli.command.name().to_owned());
    let g = &mut cfg.geometry;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(g.ell, c.ell);
    set!(g.theta, c.theta);
    set!(g.side_width, c.side_width);
    set!(g.xmax, c.xmax);
    set!(g.y_cut, c.y_cut);
    g.straight |= c.straight;
    if c.gamma.is_some() {
        g.gamma = c.gamma;
    }
    match c.height {
        Some(HeightArg::Value(v)) => g.height = v,
        Some(HeightArg::Window(a, b, step)) => {
            cfg.sweep.from = a;
            cfg.sweep.to = b;
            cfg.sweep.step = step.or(cfg.sweep.step);
        }
        None => {}
    }
    set!(cfg.physics.k, c.k);
    set!(cfg.physics.k, c.k_pi.map(|m| m * PI));
    set!(cfg.numerics.h, c.h);
    set!(cfg.numerics.modes, c.modes);
    set!(cfg.numerics.threads, c.threads);
    if let Some(m) = c.method {
        cfg.numerics.method = match m {
            MethodArg::Direct => bguide::mesh::Method::Direct,
            MethodArg::Reduced => bguide::mesh::Method::Reduced,
        };
    }
    if c.out.is_some() {
        cfg.output.csv = c.out.clone();
    }
    if c.field_out.is_some() {
        cfg.output.field = c.field_out.clone();
    }
    match &cli.command {
        Command::Design { target: DesignTarget::ZeroReflection(a) | DesignTarget::ZeroTransmission(a) } => {
            set!(cfg.design.height_window, a.window);
            set!(cfg.design.count, a.count);
            set!(cfg.design.tol, a.tol);
        }
        Command::Design { target: DesignTarget::Invisible(a) } => {
            set!(cfg.design.gamma_window, a.gamma_window);
            set!(cfg.design.invisible_height_window, a.window);
            set!(cfg.design.tol, a.tol);
            cfg.design.joint_refine |= a.joint_refine;
        }
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Exit status of a failure.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Solver(_) => 3,
        Error::Unconverged(_) => 4,
        _ => 2,
    }
}

fn io_err(path: Option<&Path>, e: io::Error) -> Error {
    let at = path.map(|p| format!(" {}", p.display())).unwrap_or_default();
    Error::Validation(format!("cannot write{at}: {e}"))
}

fn sink(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).map_err(|e| io_err(Some(p), e))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit_record<T: Serialize>(cfg: &RunConfig, rec: &T) -> Result<()> {
    let text = serde_json::to_string(rec).map_err(|e| Error::Validation(format!("cannot encode record: {e}")))?;
    let mut out = sink(&cfg.output.record)?;
    writeln!(out, "{text}").map_err(|e| io_err(cfg.output.record.as_deref(), e))
}

fn emit_table(cfg: &RunConfig, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    write_table(sink(&cfg.output.csv)?, header, rows)
}

fn dump_field(cfg: &RunConfig, half: Option<HalfArg>, path: &Option<PathBuf>) -> Result<()> {
    let full = cfg.domain()?;
    let domain = match half {
        Some(h) => half_domain(&full, h.wall())?,
        None => full,
    };
    let left = domain.port("left").ok_or_else(|| Error::Validation("domain has no left port".into()))?;
    let sol = Factored::new(&domain, &cfg.numerics())?.solve(Incidence::new(left, 0))?;
    write_table(sink(path)?, &FIELD_HEADER, &field_rows(&sol))
}

/// Runs a resolved command. Returns the exit status.
pub fn run(cli: &Cli, cfg: &RunConfig) -> Result<i32> {
    if let Some(p) = &cli.common.write_config {
        cfg.save(p)?;
    }
    if cfg.numerics.threads > 0 {
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.numerics.threads).build_global();
    }
    let numerics = cfg.numerics();
    let guide = cfg.guide();
    match &cli.command {
        Command::Solve { half } => {
            match half {
                Some(h) => {
                    let c = half_scattering(&guide, h.wall(), &numerics)?;
                    emit_record(cfg, &json!({ "command": "solve", "half": h.wall(), "r": c.reflection, "abs_r": c.reflection.norm(),
                        "energy_residual": c.energy_residual, "condition_estimate": c.condition_estimate,
                        "residual_norm": c.residual_norm, "warnings": c.warnings }))?;
                }
                None if cfg.geometry.straight => {
                    let d = cfg.domain()?;
                    let (left, right) = (d.port("left").unwrap_or(0), d.port("right").unwrap_or(1));
                    let sol = Factored::new(&d, &numerics)?.solve(Incidence::new(left, 0))?;
                    let (r, t) = (sol.amplitude(left, 0), sol.amplitude(right, 0));
                    emit_record(cfg, &json!({ "command": "solve", "R": r, "T": t, "abs_R": r.norm(), "abs_T": t.norm(),
                        "energy_residual": sol.energy_residual(), "condition_estimate": sol.condition_estimate,
                        "residual_norm": sol.residual_norm, "warnings": sol.warnings }))?;
                }
                None => {
                    let c = full_scattering(&guide, &numerics)?;
                    emit_record(cfg, &json!({ "command": "solve", "R": c.reflection, "T": c.transmission,
                        "abs_R": c.reflection.norm(), "abs_T": c.transmission.norm(),
                        "energy_residual": c.energy_residual, "condition_estimate": c.condition_estimate,
                        "residual_norm": c.residual_norm, "warnings": c.warnings }))?;
                }
            }
            if cfg.output.field.is_some() {
                dump_field(cfg, *half, &cfg.output.field)?;
            }
        }
        Command::Sweep => {
            let ls = cfg.sweep_heights();
            let cs = sweep_heights(&guide, &ls, &numerics)?;
            let rows: Vec<Vec<f64>> = ls.iter().zip(&cs).map(|(&l, c)| sweep_row(l, c)).collect();
            emit_table(cfg, &SWEEP_HEADER, &rows)?;
        }
        Command::Smatrix { bc } => {
            let s = limit_smatrix(&guide, bc.wall(), cfg.geometry.y_cut, &numerics)?;
            emit_record(cfg, &json!({ "command": "smatrix", "smatrix": s }))?;
        }
        Command::Asy => {
            let n = limit_smatrix(&guide, WallBc::Neumann, cfg.geometry.y_cut, &numerics)?;
            let m = limit_smatrix(&guide, WallBc::Dirichlet, cfg.geometry.y_cut, &numerics)?;
            let model = AsymptoticModel::from_limits(cfg.physics.k, &n, &m)?;
            let rows = cfg.sweep_heights().into_iter().map(|l| asy_row(&model, l)).collect::<Result<Vec<_>>>()?;
            emit_table(cfg, &ASY_HEADER, &rows)?;
        }
        Command::Design { target } => {
            let d = &cfg.design;
            let (converged, rec) = match target {
                DesignTarget::ZeroReflection(_) => {
                    let r = find_zero_reflection(&guide, d.height_window, d.count, d.tol, &numerics)?;
                    (r.converged, serde_json::to_value(&r))
                }
                DesignTarget::ZeroTransmission(_) => {
                    let r = find_zero_transmission(&guide, d.height_window, d.count, d.tol, &numerics)?;
                    (r.converged, serde_json::to_value(&r))
                }
                DesignTarget::Invisible(_) => {
                    let r = find_invisibility(&cfg.invisibility(), &numerics)?;
                    (r.converged, serde_json::to_value(&r))
                }
            };
            let rec = rec.map_err(|e| Error::Validation(format!("cannot encode record: {e}")))?;
            emit_record(cfg, &json!({ "command": cli.command.name(), "result": rec }))?;
            if !converged {
                return Ok(4);
            }
        }
        Command::Field { half } => {
            let path = cfg.output.field.clone().or_else(|| cfg.output.csv.clone());
            dump_field(cfg, *half, &path)?;
        }
    }
    Ok(0)
}

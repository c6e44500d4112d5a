//! The `ot-stereo` command line.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use serde::Serialize;

use crate::disparity::{disparity_map, disparity_profile, DisparityConfig, ScanlineStatus};
use crate::error::{Error, Result};
use crate::io;
use crate::matrix::Matrix;
use crate::measures::{
    compare_masses, measure_from_row, normalize, normalize_pair, MassComparison,
    DEFAULT_BALANCE_TOLERANCE,
};
use crate::scene::{reconstruct, render_pair, CameraRig, HiddenInterval};
use crate::sinkhorn::SinkhornConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopMode {
    /// Always run `niter` iterations.
    FixedCount,
    /// Stop once the summed Hilbert steps fall below the tolerance.
    Tolerance(f64),
}

/// Pipeline settings as read from a config file and flags.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub niter: usize,
    pub log_domain: bool,
    pub balance_tolerance: f64,
    pub stop: StopMode,
    pub continuation: bool,
    pub mass_tolerance: f64,
    pub plateau_tolerance: f64,
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let d = DisparityConfig::default();
        RunConfig {
            epsilon: 0.1,
            niter: 100_000,
            log_domain: true,
            balance_tolerance: DEFAULT_BALANCE_TOLERANCE,
            stop: StopMode::FixedCount,
            continuation: true,
            mass_tolerance: d.mass_tolerance,
            plateau_tolerance: d.plateau_tolerance,
            output: PathBuf::from("."),
        }
    }
}

impl RunConfig {
    /// Reads `key = value` lines over the defaults. Keys: `epsilon`, `niter`,
    /// `log_domain`, `balance_tolerance`, `stop` (`fixed-count` or
    /// `tolerance`), `tolerance`, `continuation`, `mass_tolerance`,
    /// `plateau_tolerance`, `output`.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut mode = None;
        let mut tolerance = 1e-9;
        for e in io::parse_key_values(text)? {
            match e.key.as_str() {
                "epsilon" => cfg.epsilon = e.parse()?,
                "niter" => cfg.niter = e.parse()?,
                "log_domain" => cfg.log_domain = e.parse_bool()?,
                "balance_tolerance" => cfg.balance_tolerance = e.parse()?,
                "stop" => mode = Some((e.line, e.value.clone())),
                "tolerance" => tolerance = e.parse()?,
                "continuation" => cfg.continuation = e.parse_bool()?,
                "mass_tolerance" => cfg.mass_tolerance = e.parse()?,
                "plateau_tolerance" => cfg.plateau_tolerance = e.parse()?,
                "output" => cfg.output = PathBuf::from(&e.value),
                other => {
                    return Err(Error::Parse {
                        line: e.line,
                        message: format!("unknown key {other:?}"),
                    })
                }
            }
        }
        cfg.stop = match mode {
            None => StopMode::FixedCount,
            Some((line, m)) => {
                parse_stop(&m, tolerance).map_err(|message| Error::Parse { line, message })?
            }
        };
        cfg.disparity_config().sinkhorn.validate()?;
        Ok(cfg)
    }

    pub fn disparity_config(&self) -> DisparityConfig {
        DisparityConfig {
            sinkhorn: SinkhornConfig {
                epsilon: self.epsilon,
                max_iterations: self.niter,
                stop_tolerance: match self.stop {
                    StopMode::FixedCount => 0.0,
                    StopMode::Tolerance(t) => t,
                },
                log_domain: self.log_domain,
            },
            balance_tolerance: self.balance_tolerance,
            continuation: self.continuation,
            mass_tolerance: self.mass_tolerance,
            plateau_tolerance: self.plateau_tolerance,
        }
    }

    fn apply(&mut self, args: &SolverArgs) -> Result<()> {
        if let Some(v) = args.epsilon {
            self.epsilon = v;
        }
        if let Some(v) = args.niter {
            self.niter = v;
        }
        if let Some(v) = args.log_domain {
            self.log_domain = v;
        }
        if let Some(v) = args.balance_tolerance {
            self.balance_tolerance = v;
        }
        if let Some(v) = args.continuation {
            self.continuation = v;
        }
        if let Some(v) = args.mass_tolerance {
            self.mass_tolerance = v;
        }
        let tolerance = args.tolerance.or(match self.stop {
            StopMode::Tolerance(t) => Some(t),
            StopMode::FixedCount => None,
        });
        if let Some(m) = &args.stop {
            self.stop = parse_stop(m, tolerance.unwrap_or(1e-9)).map_err(Error::InvalidConfig)?;
        } else if let (Some(t), StopMode::Tolerance(_)) = (args.tolerance, self.stop) {
            self.stop = StopMode::Tolerance(t);
        }
        if let Some(p) = &args.out {
            self.output = p.clone();
        }
        self.disparity_config().sinkhorn.validate()
    }
}

fn parse_stop(mode: &str, tolerance: f64) -> std::result::Result<StopMode, String> {
    match mode {
        "fixed-count" | "fixed" => Ok(StopMode::FixedCount),
        "tolerance" => Ok(StopMode::Tolerance(tolerance)),
        other => Err(format!(
            "stop must be fixed-count or tolerance, got {other:?}"
        )),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ot-stereo",
    version,
    about = "Stereo disparity by scanline optimal transport"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default, Clone)]
pub struct SolverArgs {
    /// key = value settings file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub niter: Option<usize>,
    #[arg(long)]
    pub log_domain: Option<bool>,
    #[arg(long)]
    pub balance_tolerance: Option<f64>,
    /// fixed-count or tolerance
    #[arg(long)]
    pub stop: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub continuation: Option<bool>,
    #[arg(long)]
    pub mass_tolerance: Option<f64>,
    /// Output directory
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SolverArgs {
    pub fn run_config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let bytes = io::read_file(p)?;
                let text = String::from_utf8_lossy(&bytes);
                RunConfig::from_text(&text).map_err(|e| Error::Io {
                    path: p.display().to_string(),
                    message: e.to_string(),
                })?
            }
            None => RunConfig::default(),
        };
        cfg.apply(self)?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a scene description into a stereo pair with ground truth.
    Generate {
        scene: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Disparity map of a rectified PGM pair.
    Disparity {
        left: PathBuf,
        right: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Point cloud from a disparity CSV.
    Reconstruct {
        disparity: PathBuf,
        right: PathBuf,
        #[arg(long, default_value_t = 1000.0)]
        focal: f64,
        #[arg(long, default_value_t = 10.0)]
        baseline: f64,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        #[arg(long, default_value = "cloud.ply")]
        out: PathBuf,
    },
    /// Per-iteration convergence data for one scanline.
    Diagnose {
        left: PathBuf,
        right: PathBuf,
        #[arg(long)]
        y: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
}

/// Process exit status: 0 success, 1 bad input, 2 numerical failure.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        2
    } else {
        1
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Generate { scene, out } => cmd_generate(&scene, &out),
        Command::Disparity {
            left,
            right,
            solver,
        } => solver
            .run_config()
            .and_then(|cfg| cmd_disparity(&left, &right, &cfg)),
        Command::Reconstruct {
            disparity,
            right,
            focal,
            baseline,
            beta,
            out,
        } => CameraRig::new(baseline, focal, beta)
            .and_then(|rig| cmd_reconstruct(&disparity, &right, &rig, &out)),
        Command::Diagnose {
            left,
            right,
            y,
            solver,
        } => solver
            .run_config()
            .and_then(|cfg| cmd_diagnose(&left, &right, y, &cfg)),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("ot-stereo: {e}");
            exit_code(&e)
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })
}

#[derive(Serialize)]
struct OcclusionFile<'a> {
    non_occluded: bool,
    intervals: &'a [HiddenInterval],
}

/// Writes `left.pgm`, `right.pgm`, `truth_disparity.csv` and `occlusions.json`.
pub fn cmd_generate(scene_path: &Path, out_dir: &Path) -> Result<()> {
    let bytes = io::read_file(scene_path)?;
    let (scene, rig) =
        io::parse_scene(&String::from_utf8_lossy(&bytes)).map_err(|e| Error::Io {
            path: scene_path.display().to_string(),
            message: e.to_string(),
        })?;
    let pair = render_pair(&scene, &rig)?;
    create_dir(out_dir)?;
    io::write_pgm(&out_dir.join("left.pgm"), &pair.left)?;
    io::write_pgm(&out_dir.join("right.pgm"), &pair.right)?;
    io::write_file(
        &out_dir.join("truth_disparity.csv"),
        io::format_disparity_csv(&pair.truth),
    )?;
    io::write_json(
        &out_dir.join("occlusions.json"),
        &OcclusionFile {
            non_occluded: pair.non_occluded,
            intervals: &pair.hidden,
        },
    )?;
    info!(
        "{} objects, {} hidden intervals",
        scene.objects.len(),
        pair.hidden.len()
    );
    Ok(())
}

/// Writes `disparity.csv`, `disparity.pgm`, `occlusion_report.json` and
/// `diagnostics.json` into the configured output directory. Scanlines the
/// solver gave up on are written as no-data and reported afterwards.
pub fn cmd_disparity(left: &Path, right: &Path, config: &RunConfig) -> Result<()> {
    let l = io::read_pgm(left)?;
    let r = io::read_pgm(right)?;
    let map = disparity_map(&l, &r, &config.disparity_config())?;
    let out = &config.output;
    create_dir(out)?;
    io::write_file(&out.join("disparity.csv"), io::format_disparity_csv(&map))?;
    io::write_file(&out.join("disparity.pgm"), io::format_disparity_pgm(&map))?;
    io::write_json(&out.join("occlusion_report.json"), &map.reports)?;
    io::write_json(&out.join("diagnostics.json"), &map.diagnostics)?;
    let failed: Vec<(usize, &str)> = map
        .diagnostics
        .iter()
        .filter_map(|d| match &d.status {
            ScanlineStatus::Numerical(msg) => Some((d.y, msg.as_str())),
            _ => None,
        })
        .collect();
    if let Some(&(first, message)) = failed.first() {
        return Err(Error::ScanlinesFailed {
            count: failed.len(),
            first,
            message: message.to_string(),
        });
    }
    Ok(())
}

pub fn cmd_reconstruct(disparity: &Path, right: &Path, rig: &CameraRig, out: &Path) -> Result<()> {
    let bytes = io::read_file(disparity)?;
    let map = io::parse_disparity_csv(&String::from_utf8_lossy(&bytes)).map_err(|e| Error::Io {
        path: disparity.display().to_string(),
        message: e.to_string(),
    })?;
    let cloud = if map.height == 0 {
        Default::default()
    } else {
        reconstruct(&map, rig, &io::read_pgm(right)?)?
    };
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    io::write_file(out, io::format_ply(&cloud))
}

/// Convergence record of one scanline.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnosis {
    pub y: usize,
    pub epsilon: f64,
    pub lambda: f64,
    pub lambda_squared: f64,
    pub masses: MassComparison,
    /// The left row is heavier and the shifted iteration was used.
    pub shifted: bool,
    pub warmup_iterations: usize,
    pub iterations: usize,
    /// Target-stage Hilbert steps of `u` and `v`.
    pub hilbert_u: Vec<f64>,
    pub hilbert_v: Vec<f64>,
    /// Sup distance of each iterate's profile to the final one.
    pub f_error: Vec<f64>,
    /// Median of successive `f_error` ratios while the error is above 1e-12.
    pub f_error_ratio: Option<f64>,
    /// Masses of the odd and even plans and their gap, in image units.
    pub odd_mass: f64,
    pub even_mass: f64,
    pub mass_gap: f64,
    #[serde(skip)]
    pub plan: Matrix,
}

/// Solves scanline `y` twice, the second time recording the distance of
/// every iterate's profile to the first run's final profile.
pub fn diagnose_scanline(
    left: &[f64],
    right: &[f64],
    y: usize,
    config: &DisparityConfig,
) -> Result<Diagnosis> {
    let m0 = measure_from_row(left, y)?;
    let m1 = measure_from_row(right, y)?;
    let masses = compare_masses(&m0, &m1, config.balance_tolerance)?;
    let shifted = !masses.balanced && masses.m0 > masses.m1;
    let (nu0, nu1) = if shifted {
        let (a, b) = normalize_pair(&m0, &m1)?;
        (a.into_values(), b.into_values())
    } else {
        (
            normalize(&m0)?.0.into_values(),
            normalize(&m1)?.0.into_values(),
        )
    };
    let schedule = config.schedule(left.len())?;
    let (first, report) = schedule.run(&nu0, &nu1, &config.sinkhorn)?;
    let target = disparity_profile(&first.odd_plan(), y);
    let mut hilbert_u = Vec::new();
    let mut hilbert_v = Vec::new();
    let mut f_error = Vec::new();
    let (it, _) = schedule.run_observed(&nu0, &nu1, &config.sinkhorn, |it, du, dv| {
        hilbert_u.push(du);
        hilbert_v.push(dv);
        let f = disparity_profile(&it.odd_plan(), y);
        let err = (0..f.len())
            .filter_map(|i| Some((f.get(i)? - target.get(i)?).abs()))
            .fold(0.0, f64::max);
        f_error.push(err);
    })?;
    let mut ratios: Vec<f64> = f_error
        .windows(2)
        .filter(|w| w[0] > 1e-12 && w[1] > 1e-12)
        .map(|w| w[1] / w[0])
        .collect();
    ratios.sort_by(f64::total_cmp);
    let odd = it.odd_plan();
    let odd_mass = odd.mass() * masses.m1;
    let even_mass = it.even_plan().mass() * masses.m1;
    let lambda = schedule.target().lambda();
    Ok(Diagnosis {
        y,
        epsilon: config.sinkhorn.epsilon,
        lambda,
        lambda_squared: lambda * lambda,
        masses,
        shifted,
        warmup_iterations: report.iterations_run - it.iteration(),
        iterations: it.iteration(),
        hilbert_u,
        hilbert_v,
        f_error,
        f_error_ratio: ratios.get(ratios.len() / 2).copied(),
        odd_mass,
        even_mass,
        mass_gap: odd_mass - even_mass,
        plan: odd.into_entries(),
    })
}

/// Writes `diagnose.json`, `diagnose_series.csv` and `plan.csv`.
pub fn cmd_diagnose(left: &Path, right: &Path, y: usize, config: &RunConfig) -> Result<()> {
    let l = io::read_pgm(left)?;
    let r = io::read_pgm(right)?;
    if (l.width(), l.height()) != (r.width(), r.height()) {
        return Err(Error::Dimension {
            expected: l.width() * l.height(),
            found: r.width() * r.height(),
        });
    }
    if y >= l.height() {
        return Err(Error::InvalidConfig(format!(
            "scanline {y} outside image of height {}",
            l.height()
        )));
    }
    let diag = diagnose_scanline(l.row(y), r.row(y), y, &config.disparity_config())?;
    let out = &config.output;
    create_dir(out)?;
    io::write_json(&out.join("diagnose.json"), &diag)?;
    let mut series = String::from("iteration,hilbert_u,hilbert_v,f_error\n");
    for k in 0..diag.iterations {
        series.push_str(&format!(
            "{},{},{},{}\n",
            k + 1,
            io::format_value(diag.hilbert_u[k]),
            io::format_value(diag.hilbert_v[k]),
            io::format_value(diag.f_error[k])
        ));
    }
    io::write_file(&out.join("diagnose_series.csv"), series)?;
    let mut plan = String::new();
    for i in 0..diag.plan.rows() {
        let row: Vec<String> = diag
            .plan
            .row(i)
            .iter()
            .map(|&v| io::format_value(v))
            .collect();
        plan.push_str(&row.join(","));
        plan.push('\n');
    }
    io::write_file(&out.join("plan.csv"), plan)
}

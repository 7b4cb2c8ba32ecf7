//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{parse_counts, parse_dims, Command, Format, RunConfig, Vary};
use crate::convergence::{run_convergence_study, run_single, sci4};
use crate::error::{Error, Result};
use crate::kernel::{
    decay_slope, legendre_coefficients, selfcheck, wendland_psi, write_spectrum_csv,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sphcap",
    version,
    about = "Kernel collocation for κ²u − Δ*u = f on spherical caps"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Sub,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Sub {
    /// Solve the Franke test problem once.
    Solve,
    /// Run a sweep over interior or boundary point counts.
    Convergence,
    /// Kernel operator oracle and Legendre coefficient decay.
    KernelCheck,
    /// Per-node exact/approximate values on the evaluation grid.
    DumpGrid,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Self {
        match s {
            Sub::Solve => Command::Solve,
            Sub::Convergence => Command::Convergence,
            Sub::KernelCheck => Command::KernelCheck,
            Sub::DumpGrid => Command::DumpGrid,
        }
    }
}

#[derive(Debug, Default, Args)]
pub struct Opts {
    /// key=value file (or JSON metadata of an earlier run); flags override it
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Geodesic cap radius in radians
    #[arg(long, global = true)]
    pub cap_radius: Option<f64>,
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Number of interior collocation points
    #[arg(long, global = true)]
    pub interior: Option<usize>,
    /// Number of boundary collocation points
    #[arg(long, global = true)]
    pub boundary: Option<usize>,
    /// Comma separated counts for `convergence`
    #[arg(long, global = true, value_name = "N,N,...")]
    pub sweep: Option<String>,
    /// Which count the sweep varies
    #[arg(long, global = true, value_enum)]
    pub vary: Option<Vary>,
    /// Evaluation grid, e.g. 67x200
    #[arg(long, global = true, value_name = "NTHETAxNPHI")]
    pub grid: Option<String>,
    /// Mesh norm sampling, e.g. 400x1200
    #[arg(long, global = true, value_name = "NTHETAxNPHI")]
    pub mesh_sampling: Option<String>,
    #[arg(long, global = true)]
    pub boundary_samples: Option<usize>,
    /// Relative diagonal jitter (0 = off)
    #[arg(long, global = true)]
    pub regularize_eps: Option<f64>,
    /// Highest Legendre degree for `kernel-check`
    #[arg(long, global = true)]
    pub ell_max: Option<usize>,
    /// Output file; stdout when absent
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

/// Builds the effective configuration: defaults, then the config file,
/// then flags.
pub fn resolve(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::defaults(cli.command.into());
    let o = &cli.opts;
    if let Some(path) = &o.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_file_contents(&text)?;
    }
    if let Some(v) = o.cap_radius {
        cfg.cap_radius = v;
    }
    if let Some(v) = o.kappa {
        cfg.kappa = v;
    }
    if let Some(v) = o.interior {
        cfg.interior = v;
    }
    if let Some(v) = o.boundary {
        cfg.boundary = v;
    }
    if let Some(v) = &o.sweep {
        cfg.sweep = parse_counts(v)?;
    }
    if let Some(v) = o.vary {
        cfg.vary = v;
    }
    if let Some(v) = &o.grid {
        (cfg.grid_ntheta, cfg.grid_nphi) = parse_dims(v)?;
    }
    if let Some(v) = &o.mesh_sampling {
        (cfg.mesh_ntheta, cfg.mesh_nphi) = parse_dims(v)?;
    }
    if let Some(v) = o.boundary_samples {
        cfg.boundary_samples = v;
    }
    if let Some(v) = o.regularize_eps {
        cfg.regularize_eps = v;
    }
    if let Some(v) = o.ell_max {
        cfg.ell_max = v;
    }
    if let Some(v) = &o.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = o.format {
        cfg.format = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// What a run produced: the CSV text, the JSON document, and whether any
/// part of it failed numerically.
pub struct Output {
    pub csv: String,
    pub json: serde_json::Value,
    pub solver_failure: Option<String>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        Error::InvalidInput(_) | Error::Parse(_) | Error::EmptyPointSet(_) => EXIT_CONFIG,
        Error::DuplicatePoints { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::Unsolved
        | Error::Quadrature { .. }
        | Error::SingularProfile(_) => EXIT_SOLVER,
    }
}

/// Runs the configured command and returns its outputs without writing
/// anything.
pub fn execute(cfg: &RunConfig) -> Result<Output> {
    match cfg.command {
        Command::Solve => solve(cfg),
        Command::Convergence => convergence(cfg),
        Command::KernelCheck => kernel_check(cfg),
        Command::DumpGrid => dump_grid(cfg),
    }
}

fn solve(cfg: &RunConfig) -> Result<Output> {
    let out = run_single(&cfg.setup(), cfg.interior, cfg.boundary)?;
    let sys = &out.system;
    let alpha = sys.alpha().ok_or(Error::Unsolved)?;
    let cap = cfg.setup().cap()?;
    let problem = crate::franke::make_franke_problem(cap, cfg.setup().op()?);
    let defects = sys.node_defects(&problem)?;
    let mut csv = String::from("index,kind,x,y,z,alpha,residual\n");
    let m = sys.interior_count();
    for (i, p) in sys.points.iter().enumerate() {
        let kind = if i < m { "interior" } else { "boundary" };
        let res = defects[i];
        csv.push_str(&format!(
            "{i},{kind},{:?},{:?},{:?},{},{}\n",
            p.x,
            p.y,
            p.z,
            sci4(alpha[i]),
            sci4(res)
        ));
    }
    let json = json!({
        "config": cfg,
        "metrics": out.metrics,
        "alpha": alpha,
    });
    Ok(Output {
        csv,
        json,
        solver_failure: None,
    })
}

fn convergence(cfg: &RunConfig) -> Result<Output> {
    let report = run_convergence_study(&cfg.study())?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    let failed: Vec<String> = report
        .rows
        .iter()
        .filter_map(|r| {
            r.failure
                .as_ref()
                .map(|f| format!("M={}, N-M={}: {f}", r.interior, r.boundary))
        })
        .collect();
    Ok(Output {
        csv: String::from_utf8(buf).expect("report is ASCII"),
        json: json!({ "config": cfg, "report": report }),
        solver_failure: if failed.is_empty() {
            None
        } else {
            Some(failed.join("; "))
        },
    })
}

fn kernel_check(cfg: &RunConfig) -> Result<Output> {
    let psi = wendland_psi();
    let a = legendre_coefficients(&psi, cfg.ell_max)?;
    let slope = decay_slope(&a, 10, 60)?;
    let min_a = a.iter().copied().fold(f64::INFINITY, f64::min);
    let first = selfcheck::check_operator(&psi, 50, -0.99, 0.99, false)?;
    let second = selfcheck::check_operator(&psi, 50, -0.99, 0.99, true)?;
    let mut buf = Vec::new();
    write_spectrum_csv(&mut buf, &a)?;
    let json = json!({
        "config": cfg,
        "decay_slope": slope,
        "decay_fit_range": [10, 60],
        "min_coefficient": min_a,
        "coefficients": a,
        "operator_check": {
            "max_rel_error": first.max_rel_error,
            "printed_sign_flipped_rel_error": first.printed_sign_flipped_rel_error,
            "t": first.t,
            "polynomial": first.polynomial,
            "finite_difference": first.finite_difference,
            "printed": first.printed,
        },
        "operator2_check": {
            "max_rel_error": second.max_rel_error,
        },
    });
    Ok(Output {
        csv: String::from_utf8(buf).expect("spectrum is ASCII"),
        json,
        solver_failure: None,
    })
}

fn dump_grid(cfg: &RunConfig) -> Result<Output> {
    let out = run_single(&cfg.setup(), cfg.interior, cfg.boundary)?;
    let cap = cfg.setup().cap()?;
    let problem = crate::franke::make_franke_problem(cap, cfg.setup().op()?);
    let exact = problem
        .exact_u
        .expect("Franke problem has an exact solution");
    let mut csv = String::from("theta,phi,u,approx,abs_err\n");
    for n in &out.grid.nodes {
        let u = exact(&n.point);
        let v = out.system.evaluate(&n.point)?;
        csv.push_str(&format!(
            "{:.6},{:.6},{},{},{}\n",
            n.theta,
            n.phi,
            sci4(u),
            sci4(v),
            sci4((u - v).abs())
        ));
    }
    let json = json!({ "config": cfg, "metrics": out.metrics });
    Ok(Output {
        csv,
        json,
        solver_failure: None,
    })
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().ok_or_else(|| {
        io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name")
    })?;
    let mut tmp_name = OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Executes `cfg` and writes its outputs. With `--format csv` and an output
/// path, the JSON twin goes next to it with a `.json` extension.
pub fn run(cfg: &RunConfig) -> Result<Output> {
    let output = execute(cfg)?;
    let primary = match cfg.format {
        Format::Csv => output.csv.clone(),
        Format::Json => json_text(&output.json),
    };
    match &cfg.out {
        Some(path) => {
            write_atomic(path, primary.as_bytes())?;
            if cfg.format == Format::Csv {
                let twin = path.with_extension("json");
                if twin != *path {
                    write_atomic(&twin, json_text(&output.json).as_bytes())?;
                }
            }
        }
        None => io::stdout().lock().write_all(primary.as_bytes())?,
    }
    Ok(output)
}

/// Full CLI entry point; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match run(&cfg) {
        Ok(out) => match out.solver_failure {
            Some(msg) => {
                eprintln!("error: solver failure: {msg}");
                EXIT_SOLVER
            }
            None => EXIT_OK,
        },
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

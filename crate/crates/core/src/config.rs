//! Run configuration: defaults, `key=value` config files, and the JSON
//! metadata twin written by every run.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::convergence::{ExperimentSetup, StudyConfig, Sweep};
use crate::error::{Error, Result};
use crate::sphere::MeshSampling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Convergence,
    KernelCheck,
    DumpGrid,
}

impl std::str::FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "solve" => Ok(Command::Solve),
            "convergence" => Ok(Command::Convergence),
            "kernel-check" => Ok(Command::KernelCheck),
            "dump-grid" => Ok(Command::DumpGrid),
            other => Err(Error::Parse(format!("unknown command {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Vary {
    Interior,
    Boundary,
}

/// Effective configuration of one CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub cap_radius: f64,
    pub kappa: f64,
    pub interior: usize,
    pub boundary: usize,
    pub sweep: Vec<usize>,
    pub vary: Vary,
    pub grid_ntheta: usize,
    pub grid_nphi: usize,
    pub boundary_samples: usize,
    pub mesh_ntheta: usize,
    pub mesh_nphi: usize,
    pub regularize_eps: f64,
    pub ell_max: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        RunConfig {
            command,
            cap_radius: PI / 3.0,
            kappa: 1.0,
            interior: 1000,
            boundary: 200,
            sweep: Vec::new(),
            vary: Vary::Interior,
            grid_ntheta: 67,
            grid_nphi: 200,
            boundary_samples: 3000,
            mesh_ntheta: MeshSampling::default().n_theta,
            mesh_nphi: MeshSampling::default().n_phi,
            regularize_eps: 0.0,
            ell_max: 100,
            out: None,
            format: Format::Csv,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cap_radius > 0.0 && self.cap_radius < PI) {
            return Err(Error::invalid(format!(
                "cap_radius {} must lie in (0, π)",
                self.cap_radius
            )));
        }
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::invalid(format!("kappa {} must be >= 0", self.kappa)));
        }
        if !(self.regularize_eps >= 0.0 && self.regularize_eps.is_finite()) {
            return Err(Error::invalid("regularize_eps must be >= 0"));
        }
        if self.grid_ntheta == 0 || self.grid_nphi == 0 || self.boundary_samples == 0 {
            return Err(Error::invalid(
                "grid dimensions and boundary samples must be positive",
            ));
        }
        let min = MeshSampling::MIN;
        if self.mesh_ntheta < min.n_theta || self.mesh_nphi < min.n_phi {
            return Err(Error::invalid(format!(
                "mesh sampling must be at least {}x{}",
                min.n_theta, min.n_phi
            )));
        }
        if self.interior + self.boundary == 0 && self.command != Command::KernelCheck {
            return Err(Error::invalid("at least one collocation point is required"));
        }
        if self.sweep.contains(&0) {
            return Err(Error::invalid("sweep counts must be positive"));
        }
        if self.command == Command::KernelCheck && (self.ell_max < 60 || self.ell_max > 200) {
            return Err(Error::invalid("ell_max must lie in 60..=200"));
        }
        Ok(())
    }

    pub fn setup(&self) -> ExperimentSetup {
        ExperimentSetup {
            cap_radius: self.cap_radius,
            kappa: self.kappa,
            grid_ntheta: self.grid_ntheta,
            grid_nphi: self.grid_nphi,
            boundary_samples: self.boundary_samples,
            mesh_sampling: MeshSampling {
                n_theta: self.mesh_ntheta,
                n_phi: self.mesh_nphi,
            },
            regularize_eps: self.regularize_eps,
        }
    }

    pub fn study(&self) -> StudyConfig {
        let sweep = match self.vary {
            Vary::Interior => Sweep::Interior {
                counts: if self.sweep.is_empty() {
                    vec![500, 1000, 2000, 4000]
                } else {
                    self.sweep.clone()
                },
                boundary: self.boundary,
            },
            Vary::Boundary => Sweep::Boundary {
                counts: if self.sweep.is_empty() {
                    vec![100, 200, 400, 800]
                } else {
                    self.sweep.clone()
                },
                interior: self.interior,
            },
        };
        StudyConfig {
            setup: self.setup(),
            sweep,
        }
    }

    /// Applies one `key=value` setting; dashes and underscores are
    /// interchangeable in keys.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let bad = |e: &dyn std::fmt::Display| Error::Parse(format!("{key}: {e}"));
        match key.as_str() {
            "command" => self.command = value.parse()?,
            "cap_radius" => self.cap_radius = value.parse().map_err(|e| bad(&e))?,
            "kappa" => self.kappa = value.parse().map_err(|e| bad(&e))?,
            "interior" => self.interior = value.parse().map_err(|e| bad(&e))?,
            "boundary" => self.boundary = value.parse().map_err(|e| bad(&e))?,
            "sweep" => self.sweep = parse_counts(value)?,
            "vary" => {
                self.vary = match value {
                    "interior" => Vary::Interior,
                    "boundary" => Vary::Boundary,
                    other => return Err(bad(&format!("unknown sweep kind {other:?}"))),
                }
            }
            "grid" => (self.grid_ntheta, self.grid_nphi) = parse_dims(value)?,
            "mesh_sampling" => (self.mesh_ntheta, self.mesh_nphi) = parse_dims(value)?,
            "boundary_samples" => self.boundary_samples = value.parse().map_err(|e| bad(&e))?,
            "regularize_eps" => self.regularize_eps = value.parse().map_err(|e| bad(&e))?,
            "ell_max" => self.ell_max = value.parse().map_err(|e| bad(&e))?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => Format::Csv,
                    "json" => Format::Json,
                    other => return Err(bad(&format!("unknown format {other:?}"))),
                }
            }
            _ => return Err(Error::Parse(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Settings from a config file: either `key=value` lines (`#` starts a
    /// comment) or the JSON metadata of an earlier run.
    pub fn apply_file_contents(&mut self, text: &str) -> Result<()> {
        if text.trim_start().starts_with('{') {
            let value: serde_json::Value =
                serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
            let cfg = value.get("config").cloned().unwrap_or(value);
            let command = self.command;
            *self = serde_json::from_value(cfg).map_err(|e| Error::Parse(e.to_string()))?;
            // the subcommand on the command line wins
            self.command = command;
            return Ok(());
        }
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", n + 1)))?;
            if k.trim() == "command" {
                continue;
            }
            self.set(k, v)?;
        }
        Ok(())
    }
}

pub fn parse_counts(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|e| Error::Parse(format!("count {t:?}: {e}")))
        })
        .collect()
}

/// `67x200` style dimensions.
pub fn parse_dims(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::Parse(format!("expected NxM, got {s:?}")))?;
    let p = |t: &str| {
        t.trim()
            .parse::<usize>()
            .map_err(|e| Error::Parse(format!("dimension {t:?}: {e}")))
    };
    Ok((p(a)?, p(b)?))
}

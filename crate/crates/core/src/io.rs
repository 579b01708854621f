//! Versioned TOML input/output records and comma-separated data files.

use crate::curve::PolynomialCurve;
use crate::error::Error;
use crate::inversion::DeformationSchedule;
use crate::moments::HarmonicMoments;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: unsupported format_version {found} (expected {FORMAT_VERSION})")]
    Version { path: PathBuf, found: u32 },

    #[error(transparent)]
    Core(#[from] Error),
}

impl FileError {
    /// 1 for I/O failures, 2 for malformed files, otherwise the core error's code.
    pub fn exit_code(&self) -> i32 {
        match self {
            FileError::Io { .. } => 1,
            FileError::Parse { .. } | FileError::Version { .. } => 2,
            FileError::Core(e) => e.exit_code(),
        }
    }
}

pub type FileResult<T> = std::result::Result<T, FileError>;

/// Records carrying a `format_version` field.
pub trait Versioned {
    fn format_version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn format_version(&self) -> u32 {
                self.format_version
            }
        })*
    };
}

/// `h(w) = r w + sum a_j w^{-j}`; `a` lists `a_0..a_n` as `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFile {
    pub format_version: u32,
    pub r: f64,
    pub a: Vec<Complex64>,
}

impl CurveFile {
    pub fn from_curve(curve: &PolynomialCurve) -> Self {
        CurveFile {
            format_version: FORMAT_VERSION,
            r: curve.r(),
            a: curve.coefficients().to_vec(),
        }
    }

    pub fn to_curve(&self) -> crate::Result<PolynomialCurve> {
        PolynomialCurve::new(self.r, self.a.clone())
    }
}

/// Deformation schedule parameters; `s` optionally fixes the sample points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub r: f64,
    #[serde(default)]
    pub phi: f64,
    /// `tau_1..tau_{n+1}`.
    pub tau: Vec<Complex64>,
    /// `Delta_2..Delta_{n+1}`.
    pub delta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
}

impl ScheduleSpec {
    pub fn to_schedule(&self) -> crate::Result<DeformationSchedule> {
        DeformationSchedule::new(self.r, self.phi, self.tau.clone(), self.delta.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub format_version: u32,
    #[serde(flatten)]
    pub schedule: ScheduleSpec,
}

/// `t0` and `t_1..t_{n+1}`; near-slit inversion also needs the schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsFile {
    pub format_version: u32,
    pub t0: f64,
    pub t: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSpec>,
}

impl MomentsFile {
    pub fn to_moments(&self) -> crate::Result<HarmonicMoments> {
        HarmonicMoments::new(self.t0, self.t.clone())
    }
}

/// Coulomb-gas run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfigFile {
    pub format_version: u32,
    pub t0: f64,
    /// `t_1..t_{n+1}` with `t_1 = 0`.
    pub t: Vec<Complex64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_radius: Option<f64>,
    #[serde(rename = "N")]
    pub n: usize,
    pub sweeps: usize,
    pub step: f64,
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    /// Droplet boundary for the inside fraction; inverted from the moments when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curve: Option<CurveSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub r: f64,
    pub a: Vec<Complex64>,
}

versioned!(CurveFile, ScheduleFile, MomentsFile, RunConfigFile);

fn read_text(path: &Path) -> FileResult<String> {
    std::fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Parses a versioned record, rejecting other format versions.
pub fn read_toml<T: DeserializeOwned + Versioned>(path: &Path) -> FileResult<T> {
    let text = read_text(path)?;
    let value: T = toml::from_str(&text).map_err(|e| FileError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if value.format_version() != FORMAT_VERSION {
        return Err(FileError::Version {
            path: path.to_path_buf(),
            found: value.format_version(),
        });
    }
    Ok(value)
}

pub fn to_toml<T: Serialize>(value: &T) -> String {
    toml::to_string(value).expect("records serialize to TOML")
}

pub fn write_text(path: &Path, text: &str) -> FileResult<()> {
    std::fs::write(path, text).map_err(|source| FileError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `dir/stem.suffix` next to `path`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

/// Comma-separated table whose first lines echo `config` as `#` comments.
pub fn csv_with_config(config: &str, header: &[&str], rows: &[Vec<String>], trailer: &[String]) -> String {
    let mut out = String::new();
    for line in config.lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "{}", header.join(","));
    for row in rows {
        let _ = writeln!(out, "{}", row.join(","));
    }
    for line in trailer {
        let _ = writeln!(out, "# {line}");
    }
    out
}

/// Round-trip float formatting for data files.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Deserialize;

use crate::table::Format;

/// Uniform grid start:stop:count, or a single value.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(try_from = "AxisRepr")]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn single(x: f64) -> Self {
        Axis { start: x, stop: x, count: 1 }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 }).collect()
    }

    pub fn scalar(&self, name: &str) -> Result<f64, String> {
        if self.count == 1 {
            Ok(self.start)
        } else {
            Err(format!("--{name} takes a single value here, got a range"))
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number"));
        let axis = match parts.as_slice() {
            [x] => Axis::single(num(x)?),
            [a, b, n] => Axis {
                start: num(a)?,
                stop: num(b)?,
                count: n.trim().parse().map_err(|_| format!("{n:?} is not a count"))?,
            },
            _ => return Err(format!("{s:?} is neither a value nor start:stop:count")),
        };
        if axis.count == 0 || !axis.start.is_finite() || !axis.stop.is_finite() {
            return Err(format!("{s:?} is an empty or non-finite range"));
        }
        if axis.count == 1 && axis.start != axis.stop {
            return Err(format!("{s:?} has one point but distinct endpoints"));
        }
        Ok(axis)
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AxisRepr {
    Num(f64),
    Str(String),
}

impl TryFrom<AxisRepr> for Axis {
    type Error = String;

    fn try_from(r: AxisRepr) -> Result<Self, String> {
        match r {
            AxisRepr::Num(x) => Ok(Axis::single(x)),
            AxisRepr::Str(s) => s.parse(),
        }
    }
}

/// "re" or "re,im".
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(try_from = "AlphaRepr")]
pub struct Alpha(pub Complex64);

impl FromStr for Alpha {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| format!("{p:?} is not a number"));
        match s.split(',').collect::<Vec<_>>().as_slice() {
            [re] => Ok(Alpha(Complex64::new(num(re)?, 0.0))),
            [re, im] => Ok(Alpha(Complex64::new(num(re)?, num(im)?))),
            _ => Err(format!("{s:?} is not re or re,im")),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum AlphaRepr {
    Num(f64),
    Pair([f64; 2]),
    Str(String),
}

impl TryFrom<AlphaRepr> for Alpha {
    type Error = String;

    fn try_from(r: AlphaRepr) -> Result<Self, String> {
        match r {
            AlphaRepr::Num(x) => Ok(Alpha(Complex64::new(x, 0.0))),
            AlphaRepr::Pair([re, im]) => Ok(Alpha(Complex64::new(re, im))),
            AlphaRepr::Str(s) => s.parse(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InputKind {
    Tmsv,
    Bell2,
    Bell3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundKind {
    Lossy,
    Edrc,
    Sim,
}

/// Flags shared by every command; a JSON config may supply any of them.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// Value or start:stop:count
    #[arg(long, global = true)]
    pub lambda_x: Option<Axis>,
    #[arg(long, global = true)]
    pub lambda_y: Option<Axis>,
    /// Coherent amplitude, re or re,im
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<Alpha>,
    /// Fock levels per mode; adaptive from --tol when omitted
    #[arg(long, global = true)]
    pub cutoff: Option<usize>,
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Largest multiset element kept for N >= 3
    #[arg(long, global = true)]
    pub cap: Option<usize>,
    #[arg(long, global = true)]
    pub ports: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub input: Option<InputKind>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Input energy axis for lossy bounds
    #[arg(long, global = true)]
    pub energy: Option<Axis>,
    /// Resource mismatch axis for sim bounds
    #[arg(long, global = true)]
    pub delta: Option<Axis>,
    /// TMSV input squeezing for fidelity sweeps
    #[arg(long, global = true)]
    pub lambda_in: Option<f64>,
    #[arg(long, global = true)]
    pub a_max: Option<usize>,
    #[arg(long, global = true)]
    pub b_max: Option<usize>,
}

impl Settings {
    /// Fields set here win over `other`.
    pub fn or(self, other: Settings) -> Settings {
        Settings {
            lambda_x: self.lambda_x.or(other.lambda_x),
            lambda_y: self.lambda_y.or(other.lambda_y),
            alpha: self.alpha.or(other.alpha),
            cutoff: self.cutoff.or(other.cutoff),
            tol: self.tol.or(other.tol),
            cap: self.cap.or(other.cap),
            ports: self.ports.or(other.ports),
            input: self.input.or(other.input),
            format: self.format.or(other.format),
            out: self.out.or(other.out),
            energy: self.energy.or(other.energy),
            delta: self.delta.or(other.delta),
            lambda_in: self.lambda_in.or(other.lambda_in),
            a_max: self.a_max.or(other.a_max),
            b_max: self.b_max.or(other.b_max),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cvpbt", version, about = "CV port-based teleportation: channel tables, bounds, sweeps and oracle checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON object supplying any flag; command-line flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Output density matrix for a coherent input through the two-port channel
    TwoportCoherent,
    /// Maximum output energy over a lambda grid
    Energy,
    /// Diamond-norm bounds
    Bounds {
        #[arg(value_enum)]
        kind: BoundKind,
    },
    /// Input-output fidelity over a lambda grid
    FidelitySweep,
    /// Compare the brute-force protocol with the closed forms
    OracleVerify,
}

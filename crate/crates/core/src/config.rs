//! Flat `key=value` run configuration with validation and manifest output.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::grid::Edge;
use crate::io::parse_key_values;

/// Background coefficient c₀.
#[derive(Debug, Clone, PartialEq)]
pub enum C0Spec {
    Constant(f64),
    /// Real field CSV on the run grid.
    File(PathBuf),
}

impl C0Spec {
    fn parse(s: &str) -> Self {
        match s.parse::<f64>() {
            Ok(v) => C0Spec::Constant(v),
            Err(_) => C0Spec::File(PathBuf::from(s)),
        }
    }

    fn render(&self) -> String {
        match self {
            C0Spec::Constant(v) => format!("{v}"),
            C0Spec::File(p) => p.display().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub k: f64,
    pub n_x: usize,
    pub n_theta: usize,
    /// Truncation count N.
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub seed: u64,
    pub theta_min: f64,
    pub theta_max: f64,
    /// Built-in phantom name.
    pub phantom: Option<String>,
    /// Raster mask file, used instead of `phantom` when set.
    pub mask: Option<PathBuf>,
    /// Source value inside a mask.
    pub amplitude: f64,
    pub c0: C0Spec,
    pub out_dir: PathBuf,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub refine: usize,
    pub layer1_rows: bool,
    /// N values for the truncation diagnostic.
    pub phi_n_list: Vec<usize>,
    pub phi_edge: Edge,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            k: 3.0 * PI,
            n_x: 80,
            n_theta: 250,
            n: 35,
            epsilon: 1e-5,
            delta: 0.0,
            seed: 0,
            theta_min: 0.0,
            theta_max: 2.0 * PI,
            phantom: None,
            mask: None,
            amplitude: 1.0,
            c0: C0Spec::Constant(1.0),
            out_dir: PathBuf::from("out"),
            tolerance: 1e-6,
            max_iterations: 20_000,
            refine: 1,
            layer1_rows: true,
            phi_n_list: vec![15, 25, 35],
            phi_edge: Edge::Right,
        }
    }
}

/// Every accepted key, in manifest order.
pub const KEYS: [&str; 21] = [
    "k",
    "n_x",
    "n_theta",
    "N",
    "epsilon",
    "delta",
    "seed",
    "theta_min",
    "theta_max",
    "phantom",
    "mask",
    "amplitude",
    "c0",
    "out_dir",
    "tolerance",
    "max_iterations",
    "refine",
    "layer1_rows",
    "phi_n_list",
    "phi_edge",
    "version",
];

/// Parses a real number, also accepting multiples of π such as `3pi`, `pi`
/// or `2*pi`.
pub fn parse_real(s: &str) -> Option<f64> {
    let t = s.trim();
    if let Some(head) = t.strip_suffix("pi").or_else(|| t.strip_suffix('π')) {
        let head = head.trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else if head == "-" { -1.0 } else { head.parse::<f64>().ok()? };
        return Some(factor * PI);
    }
    t.parse().ok()
}

fn bad(key: &str, value: &str, what: &str) -> Error {
    Error::invalid(format!("{key}={value:?}: expected {what}"))
}

impl RunConfig {
    /// Reads a config file; unknown keys are rejected.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::default();
        for (line, k, v) in parse_key_values(&text, &path.display().to_string())? {
            cfg.set(&k, &v).map_err(|e| Error::Parse { path: path.display().to_string(), line, message: e.to_string() })?;
        }
        Ok(cfg)
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let real = || parse_real(value).ok_or_else(|| bad(key, value, "a real number"));
        let count = || value.trim().parse::<usize>().map_err(|_| bad(key, value, "a non-negative integer"));
        let opt = |v: &str| if v.is_empty() || v == "none" { None } else { Some(v.to_string()) };
        match key {
            "k" => self.k = real()?,
            "n_x" => self.n_x = count()?,
            "n_theta" => self.n_theta = count()?,
            "N" => self.n = count()?,
            "epsilon" => self.epsilon = real()?,
            "delta" => self.delta = real()?,
            "seed" => self.seed = value.trim().parse().map_err(|_| bad(key, value, "an unsigned integer"))?,
            "theta_min" => self.theta_min = real()?,
            "theta_max" => self.theta_max = real()?,
            "phantom" => self.phantom = opt(value),
            "mask" => self.mask = opt(value).map(PathBuf::from),
            "amplitude" => self.amplitude = real()?,
            "c0" => self.c0 = C0Spec::parse(value.trim()),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "tolerance" => self.tolerance = real()?,
            "max_iterations" => self.max_iterations = count()?,
            "refine" => self.refine = count()?,
            "layer1_rows" => {
                self.layer1_rows = match value.trim() {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad(key, value, "true or false")),
                }
            }
            "phi_n_list" => {
                self.phi_n_list = value
                    .split(',')
                    .filter(|t| !t.trim().is_empty())
                    .map(|t| t.trim().parse().map_err(|_| bad(key, value, "a comma-separated list of integers")))
                    .collect::<Result<_>>()?
            }
            "phi_edge" => self.phi_edge = Edge::parse(value.trim())?,
            // recorded in manifests; ignored on input
            "version" => {}
            other => return Err(Error::invalid(format!("unknown config key {other:?}; known keys: {}", KEYS.join(", ")))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if !(self.k > 0.0) || !self.k.is_finite() {
            return fail(format!("k must be positive, got {}", self.k));
        }
        if self.n_x < 5 {
            return fail(format!("n_x must be at least 5, got {}", self.n_x));
        }
        if self.n_theta < 2 {
            return fail(format!("n_theta must be at least 2, got {}", self.n_theta));
        }
        if self.n < 1 {
            return fail("N must be at least 1".into());
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return fail(format!("delta must be non-negative, got {}", self.delta));
        }
        if !(self.theta_max > self.theta_min) {
            return fail(format!("theta_max ({}) must exceed theta_min ({})", self.theta_max, self.theta_min));
        }
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return fail("solver tolerance and max_iterations must be positive".into());
        }
        if self.refine < 1 {
            return fail("refine must be at least 1".into());
        }
        if let C0Spec::Constant(v) = self.c0 {
            if !(v >= 1.0) {
                return fail(format!("c0 must be at least 1, got {v}"));
            }
        }
        if self.phi_n_list.iter().any(|&m| m == 0) {
            return fail("phi_n_list entries must be positive".into());
        }
        Ok(())
    }

    /// Fails unless a built-in phantom or a mask is configured.
    pub fn require_source(&self) -> Result<()> {
        if self.phantom.is_none() && self.mask.is_none() {
            return Err(Error::invalid("no source configured: set phantom=<name> or mask=<path>"));
        }
        Ok(())
    }

    /// All keys with their values, one `key=value` per line, in [`KEYS`] order.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let none = "none".to_string();
        let list: Vec<String> = self.phi_n_list.iter().map(|v| v.to_string()).collect();
        for key in KEYS {
            let value = match key {
                "k" => format!("{:e}", self.k),
                "n_x" => self.n_x.to_string(),
                "n_theta" => self.n_theta.to_string(),
                "N" => self.n.to_string(),
                "epsilon" => format!("{:e}", self.epsilon),
                "delta" => format!("{:e}", self.delta),
                "seed" => self.seed.to_string(),
                "theta_min" => format!("{:e}", self.theta_min),
                "theta_max" => format!("{:e}", self.theta_max),
                "phantom" => self.phantom.clone().unwrap_or_else(|| none.clone()),
                "mask" => self.mask.as_ref().map_or(none.clone(), |p| p.display().to_string()),
                "amplitude" => format!("{:e}", self.amplitude),
                "c0" => self.c0.render(),
                "out_dir" => self.out_dir.display().to_string(),
                "tolerance" => format!("{:e}", self.tolerance),
                "max_iterations" => self.max_iterations.to_string(),
                "refine" => self.refine.to_string(),
                "layer1_rows" => self.layer1_rows.to_string(),
                "phi_n_list" => list.join(","),
                "phi_edge" => self.phi_edge.name().to_string(),
                "version" => env!("CARGO_PKG_VERSION").to_string(),
                _ => unreachable!(),
            };
            writeln!(s, "{key}={value}").unwrap();
        }
        s
    }
}

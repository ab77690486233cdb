//! Run configuration: command-line flags merged over an optional
//! `key = value` file. Flags win.

use std::collections::BTreeMap;
use std::path::PathBuf;

use bfstab::Depth;
use clap::{Args, ValueEnum};

pub const MIN_MODES: usize = 8;
pub const MAX_MODES: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Depth h.
    #[arg(long, global = true)]
    pub h: Option<f64>,
    /// Depth grid `a:b:n` (n equispaced points, endpoints included).
    #[arg(long = "h-range", global = true, value_name = "A:B:N")]
    pub h_range: Option<String>,
    /// Amplitude ε.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Amplitude grid `a:b:n`.
    #[arg(long = "eps-range", global = true, value_name = "A:B:N")]
    pub eps_range: Option<String>,
    /// Floquet exponent μ.
    #[arg(long, global = true)]
    pub mu: Option<f64>,
    /// Floquet exponent grid `a:b:n`.
    #[arg(long = "mu-range", global = true, value_name = "A:B:N")]
    pub mu_range: Option<String>,
    /// Fourier truncation M (modes -M..M).
    #[arg(long, global = true)]
    pub modes: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for grid sweeps.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Tolerance override (band bisection, decoupling iteration).
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Configuration file with `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Cfg<T> = std::result::Result<T, ConfigError>;

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

/// Resolved configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub depths: Option<Vec<f64>>,
    pub eps: Option<Vec<f64>>,
    pub mu: Option<Vec<f64>>,
    pub modes: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub jobs: usize,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn resolve(flags: &Flags) -> Cfg<Self> {
        let mut f = flags.clone();
        if let Some(path) = &flags.config {
            let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
            apply_file(&mut f, &parse_file(&text)?)?;
        }
        let depths = pick(f.h, f.h_range.as_deref(), "h")?;
        if let Some(hs) = &depths {
            for &h in hs {
                Depth::new(h).map_err(|e| bad(e.to_string()))?;
            }
        }
        let modes = f.modes.unwrap_or(bfstab::stokes::DEFAULT_MODES);
        if !(MIN_MODES..=MAX_MODES).contains(&modes) {
            return Err(bad(format!("modes {modes} outside [{MIN_MODES}, {MAX_MODES}]")));
        }
        let jobs = f.jobs.unwrap_or(1);
        if jobs == 0 {
            return Err(bad("jobs must be at least 1"));
        }
        if let Some(t) = f.tol {
            if !(t.is_finite() && t > 0.0) {
                return Err(bad(format!("tol {t} must be positive")));
            }
        }
        Ok(RunConfig {
            depths,
            eps: pick(f.eps, f.eps_range.as_deref(), "eps")?,
            mu: pick(f.mu, f.mu_range.as_deref(), "mu")?,
            modes,
            out: f.out,
            format: f.format.unwrap_or(Format::Csv),
            jobs,
            tol: f.tol,
        })
    }

    pub fn depth_list(&self) -> Cfg<Vec<Depth>> {
        let hs = self.depths.as_ref().ok_or_else(|| bad("missing --h or --h-range"))?;
        Ok(hs.iter().map(|&h| Depth::new(h).expect("checked in resolve")).collect())
    }

    pub fn depth(&self) -> Cfg<Depth> {
        single(self.depth_list()?, "h")
    }

    pub fn eps_list(&self) -> Cfg<Vec<f64>> {
        self.eps.clone().ok_or_else(|| bad("missing --eps or --eps-range"))
    }

    pub fn eps(&self) -> Cfg<f64> {
        single(self.eps_list()?, "eps")
    }

    pub fn mu(&self) -> Cfg<f64> {
        single(self.mu.clone().ok_or_else(|| bad("missing --mu"))?, "mu")
    }

    /// `key=value` pairs for the provenance line.
    pub fn provenance(&self, command: &str) -> Vec<(String, String)> {
        let list = |v: &Option<Vec<f64>>| {
            v.as_ref()
                .map(|xs| xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(","))
        };
        let mut p = vec![
            ("tool".into(), format!("bfstab {}", env!("CARGO_PKG_VERSION"))),
            ("command".into(), command.into()),
        ];
        for (k, v) in [("h", list(&self.depths)), ("eps", list(&self.eps)), ("mu", list(&self.mu))] {
            if let Some(v) = v {
                p.push((k.into(), v));
            }
        }
        p.push(("modes".into(), self.modes.to_string()));
        if let Some(t) = self.tol {
            p.push(("tol".into(), t.to_string()));
        }
        p
    }
}

fn single<T: Copy>(v: Vec<T>, name: &str) -> Cfg<T> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(bad(format!("{name} must be a single value for this command"))),
    }
}

fn pick(value: Option<f64>, range: Option<&str>, name: &str) -> Cfg<Option<Vec<f64>>> {
    match (value, range) {
        (Some(_), Some(_)) => Err(bad(format!("give either --{name} or --{name}-range, not both"))),
        (Some(x), None) if !x.is_finite() => Err(bad(format!("{name} must be finite"))),
        (Some(x), None) => Ok(Some(vec![x])),
        (None, Some(r)) => parse_range(r).map(Some),
        (None, None) => Ok(None),
    }
}

/// `a:b:n` into `n` equispaced points from `a` to `b`.
pub fn parse_range(s: &str) -> Cfg<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad(format!("range '{s}' is not of the form a:b:n")));
    };
    let num = |t: &str| t.trim().parse::<f64>().ok().filter(|x| x.is_finite());
    let (Some(a), Some(b)) = (num(a), num(b)) else {
        return Err(bad(format!("range '{s}' has a non-numeric endpoint")));
    };
    let n: usize = n.trim().parse().map_err(|_| bad(format!("range '{s}' has a bad count")))?;
    match n {
        0 => Err(bad(format!("range '{s}' is empty"))),
        1 => Ok(vec![a]),
        _ => Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()),
    }
}

pub fn parse_file(text: &str) -> Cfg<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("config line {}: expected key = value", lineno + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn apply_file(f: &mut Flags, map: &BTreeMap<String, String>) -> Cfg<()> {
    fn num<T: std::str::FromStr>(k: &str, v: &str) -> Cfg<T> {
        v.parse().map_err(|_| bad(format!("config key {k}: cannot parse '{v}'")))
    }
    for (k, v) in map {
        match k.as_str() {
            "h" => f.h = f.h.or(Some(num(k, v)?)),
            "h-range" => f.h_range = f.h_range.take().or(Some(v.clone())),
            "eps" => f.eps = f.eps.or(Some(num(k, v)?)),
            "eps-range" => f.eps_range = f.eps_range.take().or(Some(v.clone())),
            "mu" => f.mu = f.mu.or(Some(num(k, v)?)),
            "mu-range" => f.mu_range = f.mu_range.take().or(Some(v.clone())),
            "modes" => f.modes = f.modes.or(Some(num(k, v)?)),
            "out" => f.out = f.out.take().or(Some(v.into())),
            "format" => {
                let fmt = Format::from_str(v, true).map_err(|_| bad(format!("config key format: '{v}'")))?;
                f.format = f.format.or(Some(fmt));
            }
            "jobs" => f.jobs = f.jobs.or(Some(num(k, v)?)),
            "tol" => f.tol = f.tol.or(Some(num(k, v)?)),
            _ => return Err(bad(format!("unknown config key '{k}'"))),
        }
    }
    Ok(())
}

//! Run configuration: INI file plus `--section.key value` overrides.
//!
//! | key | default | range |
//! |---|---|---|
//! | `params.rho`, `params.mu`, `params.beta` | 1 | > 0 |
//! | `params.alpha` | 2 | > `gamma^2 beta` |
//! | `params.gamma` | 0.5 | >= 0 |
//! | `damping.a`, `damping.b` | 0.3, 0.7 | 0 < a < b < 1 |
//! | `damping.d0` | 1 | >= 0 (0 disables damping) |
//! | `damping.shape` | `indicator` | `indicator` or `smooth-ramp` |
//! | `damping.eps` | 0.05 | 0 < eps < (b - a) / 2, ramp only |
//! | `grid.n` | 128 | >= 2 |
//! | `modes.J` | 64 | >= 1, modes `0..J` in time runs |
//! | `modes.j_max` | 32 | spectra of modes `0..=j_max` |
//! | `modes.smoothness` | 2 | >= 0, initial amplitude `(1 + xi_j)^-s` |
//! | `time.dt` | 1e-3 | > 0 |
//! | `time.T` | 200 | > 0 |
//! | `time.sample_every` | 100 | >= 1 |
//! | `analysis.lambda_min`, `analysis.lambda_max` | 10, 1000 | max >= 100 min |
//! | `analysis.lambda_points` | 13 | >= 12 |
//! | `analysis.slowness_factor` | 2 | > 0 |
//! | `analysis.extra_modes` | 4 | >= 3 |
//! | `analysis.j_cap` | 0 | mode cap of the resolvent sweep, 0 for none |
//! | `analysis.fit_t1`, `analysis.fit_t2` | 10, 100 | t1 >= 1, t2 >= 10 t1 |
//! | `output.svg` | true | emit SVG plots |
//! | `run.seed` | 20240601 | seed of randomized checks |

use std::path::Path;

use ini::Ini;
use piezolab_core::analysis::{log_spaced, ModePolicy};
use piezolab_core::{DampingProfile, DampingShape, Grid1D, PhysicalParams};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Invalid configuration; the message names the offending key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamsSection {
    pub rho: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub mu: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DampingSection {
    pub a: f64,
    pub b: f64,
    pub d0: f64,
    pub shape: String,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSection {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModesSection {
    #[serde(rename = "J")]
    pub count: usize,
    pub j_max: usize,
    pub smoothness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimeSection {
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub sample_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_points: usize,
    pub slowness_factor: f64,
    pub extra_modes: usize,
    pub j_cap: usize,
    pub fit_t1: f64,
    pub fit_t2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSection {
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: ParamsSection,
    pub damping: DampingSection,
    pub grid: GridSection,
    pub modes: ModesSection,
    pub time: TimeSection,
    pub analysis: AnalysisSection,
    pub output: OutputSection,
    pub run: RunSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            params: ParamsSection {
                rho: 1.0,
                alpha: 2.0,
                gamma: 0.5,
                mu: 1.0,
                beta: 1.0,
            },
            damping: DampingSection {
                a: 0.3,
                b: 0.7,
                d0: 1.0,
                shape: "indicator".into(),
                eps: 0.05,
            },
            grid: GridSection { n: 128 },
            modes: ModesSection {
                count: 64,
                j_max: 32,
                smoothness: 2.0,
            },
            time: TimeSection {
                dt: 1e-3,
                t_final: 200.0,
                sample_every: 100,
            },
            analysis: AnalysisSection {
                lambda_min: 10.0,
                lambda_max: 1000.0,
                lambda_points: 13,
                slowness_factor: 2.0,
                extra_modes: 4,
                j_cap: 0,
                fit_t1: 10.0,
                fit_t2: 100.0,
            },
            output: OutputSection { svg: true },
            run: RunSection { seed: 20240601 },
        }
    }
}

fn parse<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError(format!("invalid value '{value}' for key {section}.{key}")))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value;
        let s = section;
        match (section, key) {
            ("params", "rho") => self.params.rho = parse(s, key, v)?,
            ("params", "alpha") => self.params.alpha = parse(s, key, v)?,
            ("params", "gamma") => self.params.gamma = parse(s, key, v)?,
            ("params", "mu") => self.params.mu = parse(s, key, v)?,
            ("params", "beta") => self.params.beta = parse(s, key, v)?,
            ("damping", "a") => self.damping.a = parse(s, key, v)?,
            ("damping", "b") => self.damping.b = parse(s, key, v)?,
            ("damping", "d0") => self.damping.d0 = parse(s, key, v)?,
            ("damping", "shape") => self.damping.shape = v.trim().to_string(),
            ("damping", "eps") => self.damping.eps = parse(s, key, v)?,
            ("grid", "n") => self.grid.n = parse(s, key, v)?,
            ("modes", "J") => self.modes.count = parse(s, key, v)?,
            ("modes", "j_max") => self.modes.j_max = parse(s, key, v)?,
            ("modes", "smoothness") => self.modes.smoothness = parse(s, key, v)?,
            ("time", "dt") => self.time.dt = parse(s, key, v)?,
            ("time", "T") => self.time.t_final = parse(s, key, v)?,
            ("time", "sample_every") => self.time.sample_every = parse(s, key, v)?,
            ("analysis", "lambda_min") => self.analysis.lambda_min = parse(s, key, v)?,
            ("analysis", "lambda_max") => self.analysis.lambda_max = parse(s, key, v)?,
            ("analysis", "lambda_points") => self.analysis.lambda_points = parse(s, key, v)?,
            ("analysis", "slowness_factor") => self.analysis.slowness_factor = parse(s, key, v)?,
            ("analysis", "extra_modes") => self.analysis.extra_modes = parse(s, key, v)?,
            ("analysis", "j_cap") => self.analysis.j_cap = parse(s, key, v)?,
            ("analysis", "fit_t1") => self.analysis.fit_t1 = parse(s, key, v)?,
            ("analysis", "fit_t2") => self.analysis.fit_t2 = parse(s, key, v)?,
            ("output", "svg") => self.output.svg = parse(s, key, v)?,
            ("run", "seed") => self.run.seed = parse(s, key, v)?,
            _ => return Err(ConfigError(format!("unknown config key {section}.{key}"))),
        }
        Ok(())
    }

    /// Applies every key of an INI file. Keys outside any section belong to `run`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let ini = Ini::load_from_file(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        for (section, props) in ini.iter() {
            let section = section.unwrap_or("run");
            for (key, value) in props.iter() {
                self.set(section, key, value)?;
            }
        }
        Ok(())
    }

    /// Applies `section.key = value` overrides in order.
    pub fn apply_overrides(&mut self, overrides: &[(String, String)]) -> Result<(), ConfigError> {
        for (path, value) in overrides {
            let (section, key) = path
                .split_once('.')
                .ok_or_else(|| ConfigError(format!("malformed config key {path}")))?;
            self.set(section, key, value)?;
        }
        Ok(())
    }

    pub fn physical_params(&self) -> Result<PhysicalParams, ConfigError> {
        let p = &self.params;
        PhysicalParams::new(p.rho, p.alpha, p.gamma, p.mu, p.beta).map_err(|e| ConfigError(format!("params: {e}")))
    }

    pub fn damping_profile(&self) -> Result<DampingProfile, ConfigError> {
        let d = &self.damping;
        let shape = match d.shape.as_str() {
            "indicator" => DampingShape::Indicator,
            "smooth-ramp" => DampingShape::SmoothRamp { eps: d.eps },
            other => {
                return Err(ConfigError(format!(
                    "invalid value '{other}' for key damping.shape (indicator | smooth-ramp)"
                )))
            }
        };
        DampingProfile::new(d.a, d.b, d.d0, shape).map_err(|e| ConfigError(format!("damping: {e}")))
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigError> {
        Grid1D::new(self.grid.n).map_err(|e| ConfigError(format!("grid.n: {e}")))
    }

    pub fn lambdas(&self) -> Vec<f64> {
        let a = &self.analysis;
        log_spaced(a.lambda_min, a.lambda_max, a.lambda_points)
    }

    pub fn mode_policy(&self) -> ModePolicy {
        ModePolicy {
            slowness_factor: self.analysis.slowness_factor,
            extra_modes: self.analysis.extra_modes,
            cap: (self.analysis.j_cap > 0).then_some(self.analysis.j_cap),
        }
    }

    /// Range checks of every key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.physical_params()?;
        self.damping_profile()?;
        self.grid()?;
        let bad = |key: &str, why: &str| Err(ConfigError(format!("{key}: {why}")));
        if self.modes.count == 0 {
            return bad("modes.J", "must be at least 1");
        }
        if !(self.modes.smoothness >= 0.0 && self.modes.smoothness.is_finite()) {
            return bad("modes.smoothness", "must be a finite number >= 0");
        }
        if !(self.time.dt > 0.0 && self.time.dt.is_finite()) {
            return bad("time.dt", "must be positive");
        }
        if !(self.time.t_final > 0.0 && self.time.t_final.is_finite()) {
            return bad("time.T", "must be positive");
        }
        if self.time.sample_every == 0 {
            return bad("time.sample_every", "must be at least 1");
        }
        let a = &self.analysis;
        if !(a.lambda_min > 0.0 && a.lambda_max.is_finite()) {
            return bad("analysis.lambda_min", "must be positive");
        }
        if a.lambda_points < 12 {
            return bad("analysis.lambda_points", "the sweep needs at least 12 frequencies");
        }
        if a.lambda_max < 100.0 * a.lambda_min * (1.0 - 1e-12) {
            return bad("analysis.lambda_max", "the sweep must span at least two decades");
        }
        if !(a.slowness_factor > 0.0) {
            return bad("analysis.slowness_factor", "must be positive");
        }
        if a.extra_modes < 3 {
            return bad("analysis.extra_modes", "the tail audit needs at least 3 extra modes");
        }
        if !(a.fit_t1 >= 1.0) {
            return bad("analysis.fit_t1", "fit window must start at t >= 1");
        }
        if !(a.fit_t2 >= 10.0 * a.fit_t1) {
            return bad("analysis.fit_t2", "fit window must span at least one decade");
        }
        Ok(())
    }

    /// Canonical JSON of the configuration.
    pub fn canonical(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical form and `extra`.
    pub fn fingerprint(&self, extra: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        h.update(extra);
        hex::encode(h.finalize())[..16].to_string()
    }
}

/// Splits `--section.key value` and `--section.key=value` overrides from
/// the remaining arguments.
pub type Overrides = Vec<(String, String)>;

pub fn split_overrides<I: IntoIterator<Item = String>>(args: I) -> Result<(Vec<String>, Overrides), ConfigError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !name.contains('.') {
            rest.push(arg);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it
                .next()
                .ok_or_else(|| ConfigError(format!("missing value for config key {name}")))?,
        };
        overrides.push((name, value));
    }
    Ok((rest, overrides))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn defaults_are_valid() {
        let c = RunConfig::default();
        c.validate().unwrap();
        assert_eq!(c.lambdas().len(), 13);
        assert_eq!(c.mode_policy(), ModePolicy::default());
    }

    #[test]
    fn overrides_split_and_apply() {
        let (rest, ov) = split_overrides(strings(&[
            "piezolab",
            "--out",
            "o.d",
            "simulate",
            "--damping.d0",
            "0",
            "--grid.n=16",
        ]))
        .unwrap();
        assert_eq!(rest, strings(&["piezolab", "--out", "o.d", "simulate"]));
        let mut c = RunConfig::default();
        c.apply_overrides(&ov).unwrap();
        assert_eq!(c.damping.d0, 0.0);
        assert_eq!(c.grid.n, 16);
        assert!(split_overrides(strings(&["--grid.n"])).is_err());
    }

    #[test]
    fn unknown_and_malformed_keys_are_named() {
        let mut c = RunConfig::default();
        let e = c.set("grid", "m", "3").unwrap_err();
        assert!(e.0.contains("grid.m"));
        let e = c.set("grid", "n", "many").unwrap_err();
        assert!(e.0.contains("grid.n"));
    }

    #[test]
    fn range_checks() {
        for (s, k, v, key) in [
            ("params", "alpha", "0.1", "params"),
            ("damping", "b", "0.2", "damping"),
            ("damping", "shape", "box", "damping.shape"),
            ("grid", "n", "1", "grid.n"),
            ("time", "dt", "0", "time.dt"),
            ("analysis", "lambda_points", "2", "analysis.lambda_points"),
            ("analysis", "lambda_max", "50", "analysis.lambda_max"),
            ("analysis", "fit_t2", "20", "analysis.fit_t2"),
        ] {
            let mut c = RunConfig::default();
            c.set(s, k, v).unwrap();
            let e = c.validate().unwrap_err();
            assert!(e.0.contains(key), "{e:?}");
        }
    }

    #[test]
    fn fingerprint_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.fingerprint(b""), b.fingerprint(b""));
        b.set("grid", "n", "64").unwrap();
        assert_ne!(a.fingerprint(b""), b.fingerprint(b""));
        assert_ne!(a.fingerprint(b""), a.fingerprint(b"x"));
        assert_eq!(a.fingerprint(b"").len(), 16);
    }

    #[test]
    fn ini_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ini");
        std::fs::write(&path, "seed = 5\n[modes]\nJ = 4\n[damping]\nshape = smooth-ramp\n").unwrap();
        let mut c = RunConfig::default();
        c.apply_file(&path).unwrap();
        assert_eq!((c.run.seed, c.modes.count), (5, 4));
        c.validate().unwrap();
        std::fs::write(&path, "[modes]\nK = 4\n").unwrap();
        assert!(c.apply_file(&path).unwrap_err().0.contains("modes.K"));
    }
}

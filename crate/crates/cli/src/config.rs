//! Flat `key = value` config files and the per-subcommand key tables.
//!
//! Lines are `key = value`; blank lines and lines starting with `#` are
//! ignored. Every key has a default, so an empty file is valid.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use langevin_lab::experiments::lemma_a1::LemmaA1Config;
use langevin_lab::experiments::simsec::{SimsecConfig, SimsecTarget};
use langevin_lab::experiments::thm1::Thm1Config;
use langevin_lab::experiments::thm2::Thm2Config;
use langevin_lab::experiments::thm3::{Initialization, Thm3Config};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = std::result::Result<T, ConfigError>;

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub help: &'static str,
}

const fn k(key: &'static str, default: &'static str, help: &'static str) -> KeySpec {
    KeySpec { key, default, help }
}

pub const THM1_KEYS: &[KeySpec] = &[
    k("d", "50", "dimension"),
    k("alpha", "4", "contraction rate of the trap"),
    k("horizon", "10", "time horizon T"),
    k("step_size", "0.001", "ULA step size"),
    k("n_trajectories", "1000", "trajectories started from N(0, I)"),
    k("guard", "0.95", "escape radius is guard * 4 sqrt(d)"),
    k("p", "2", "exponent of the score error"),
    k("mc_samples", "10000", "target draws for the Monte Carlo score error"),
    k("record_every", "0", "write every k-th state to trajectories.csv (0 = off)"),
    k("seed", "0", "root seed"),
    k("workers", "0", "worker threads (0 = all cores)"),
];

pub const THM2_KEYS: &[KeySpec] = &[
    k("d", "50", "dimension"),
    k("n_anchors", "20", "anchors drawn from N(0, I)"),
    k("alpha", "400", "contraction rate around each anchor"),
    k("horizon", "10", "time horizon T"),
    k("step_size", "0.001", "ULA step size"),
    k("n_traj_per_anchor", "50", "trajectories started at each anchor"),
    k("guard", "0.95", "escape radius is guard * 0.15 sqrt(d)"),
    k("p", "2", "exponent of the score error"),
    k("mc_samples", "10000", "target draws for the Monte Carlo score error"),
    k("record_every", "0", "write every k-th state to trajectories.csv (0 = off)"),
    k("seed", "0", "root seed"),
    k("workers", "0", "worker threads (0 = all cores)"),
];

pub const THM3_KEYS: &[KeySpec] = &[
    k("d", "2", "dimension"),
    k("theta_degrees", "10", "cone half-angle in degrees"),
    k("patch_distance", "5", "patch center is patch_distance * e_1"),
    k("patch_radius", "0.5", "patch radius"),
    k("horizon", "200", "time horizon T"),
    k("step_size", "0.001", "ULA step size"),
    k("n_trajectories", "1000", "trajectories per initialization"),
    k("inits", "standard_normal,far_from_cone,inside_patch", "initializations to run"),
    k("grid_points", "40", "log-spaced recording times"),
    k("mc_samples", "100000", "draws for the cone mass and score error"),
    k("seed", "0", "root seed"),
    k("workers", "0", "worker threads (0 = all cores)"),
];

pub const LEMMA_A1_KEYS: &[KeySpec] = &[
    k("d", "50", "dimension"),
    k("alphas", "50,100,400", "OU rates to sweep"),
    k("horizon", "10", "time horizon T"),
    k("grid_h", "0.001", "grid spacing of the supremum"),
    k("n_runs", "1000", "Monte Carlo runs per rate"),
    k("threshold_factor", "0.1", "threshold is threshold_factor * sqrt(d)"),
    k("seed", "0", "root seed"),
    k("workers", "0", "worker threads (0 = all cores)"),
];

pub const SIMSEC_KEYS: &[KeySpec] = &[
    k("target", "gaussian_d50", "gaussian_d50 or gmm_d25"),
    k("epochs", "30000", "full-batch training epochs"),
    k("hidden_width", "256", "width of the three hidden layers"),
    k("learning_rate", "0.001", "Adam learning rate"),
    k("max_level", "200", "training noise levels drawn from 1..=max_level"),
    k("n_distinct", "1000", "distinct training draws"),
    k("duplication", "10", "copies of each training draw"),
    k("n_values", "1500,7500,13500,16250", "particle counts"),
    k("n_init_points", "30", "distinct starting points for fresh/train"),
    k("step_size", "0.0025", "ULA step size"),
    k("n_steps", "1000", "ULA steps"),
    k("reference_draws", "5000", "target draws for the Sinkhorn reference"),
    k("sinkhorn_trials", "10", "subsampled Sinkhorn trials (0 = skip)"),
    k("sinkhorn_subsample", "500", "points per side in each trial"),
    k("blur", "0.01", "Sinkhorn blur (epsilon = blur^2)"),
    k("checkpoint", "", "load the denoiser from this file instead of training"),
    k("seed", "0", "root seed"),
    k("workers", "0", "worker threads (0 = all cores)"),
];

pub const LP_CERT_KEYS: &[KeySpec] = &[
    k("kind", "thm1", "thm1 (single trap) or thm2 (anchor balls)"),
    k("d", "50", "dimension"),
    k("p", "2", "exponent, or inf"),
    k("alpha", "", "field rate (empty = 4 for thm1, 400 for thm2)"),
    k("anchors", "", "anchor CSV for thm2 (empty = draw n_anchors from N(0, I))"),
    k("n_anchors", "20", "anchors drawn when no file is given"),
    k("seed", "0", "root seed"),
];

pub const GP_CHECK_KEYS: &[KeySpec] = &[
    k("points", "", "point CSV (empty = draw n_points from N(0, I))"),
    k("d", "50", "dimension of drawn points"),
    k("n_points", "20", "points drawn when no file is given"),
    k("seed", "0", "root seed"),
];

/// Parses config text into `(key, value)` pairs in file order.
pub fn parse_text(text: &str) -> Res<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`, got {line:?}", no + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError(format!("line {}: empty key", no + 1)));
        }
        if out.iter().any(|(k, _)| k == key) {
            return Err(ConfigError(format!("line {}: duplicate key {key:?}", no + 1)));
        }
        out.push((key.to_string(), value.trim().to_string()));
    }
    Ok(out)
}

pub fn load(path: Option<&Path>) -> Res<Vec<(String, String)>> {
    match path {
        None => Ok(Vec::new()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", p.display())))?;
            parse_text(&text)
        }
    }
}

fn unknown(key: &str, table: &[KeySpec]) -> ConfigError {
    let valid: Vec<&str> = table.iter().map(|s| s.key).collect();
    ConfigError(format!("unknown config key {key:?}; valid keys: {}", valid.join(", ")))
}

fn num<T: FromStr>(key: &str, v: &str) -> Res<T> {
    v.parse().map_err(|_| ConfigError(format!("invalid value {v:?} for key {key:?}")))
}

fn list<T: FromStr>(key: &str, v: &str) -> Res<Vec<T>> {
    v.split(',').map(|s| num(key, s.trim())).collect()
}

fn opt_path(v: &str) -> Option<PathBuf> {
    (!v.is_empty()).then(|| PathBuf::from(v))
}

pub fn thm1(entries: &[(String, String)]) -> Res<Thm1Config> {
    let mut c = Thm1Config::default();
    for (key, v) in entries {
        match key.as_str() {
            "d" => c.d = num(key, v)?,
            "alpha" => c.alpha = num(key, v)?,
            "horizon" => c.horizon = num(key, v)?,
            "step_size" => c.step_size = num(key, v)?,
            "n_trajectories" => c.n_trajectories = num(key, v)?,
            "guard" => c.guard = num(key, v)?,
            "p" => c.p = num(key, v)?,
            "mc_samples" => c.mc_samples = num(key, v)?,
            "record_every" => c.record_every = num(key, v)?,
            "seed" => c.seed = num(key, v)?,
            "workers" => c.workers = num(key, v)?,
            _ => return Err(unknown(key, THM1_KEYS)),
        }
    }
    Ok(c)
}

pub fn thm2(entries: &[(String, String)]) -> Res<Thm2Config> {
    let mut c = Thm2Config::default();
    for (key, v) in entries {
        match key.as_str() {
            "d" => c.d = num(key, v)?,
            "n_anchors" => c.n_anchors = num(key, v)?,
            "alpha" => c.alpha = num(key, v)?,
            "horizon" => c.horizon = num(key, v)?,
            "step_size" => c.step_size = num(key, v)?,
            "n_traj_per_anchor" => c.n_traj_per_anchor = num(key, v)?,
            "guard" => c.guard = num(key, v)?,
            "p" => c.p = num(key, v)?,
            "mc_samples" => c.mc_samples = num(key, v)?,
            "record_every" => c.record_every = num(key, v)?,
            "seed" => c.seed = num(key, v)?,
            "workers" => c.workers = num(key, v)?,
            _ => return Err(unknown(key, THM2_KEYS)),
        }
    }
    Ok(c)
}

pub fn thm3(entries: &[(String, String)]) -> Res<Thm3Config> {
    let mut c = Thm3Config::default();
    for (key, v) in entries {
        match key.as_str() {
            "d" => c.d = num(key, v)?,
            "theta_degrees" => c.theta_degrees = num(key, v)?,
            "patch_distance" => c.patch_distance = num(key, v)?,
            "patch_radius" => c.patch_radius = num(key, v)?,
            "horizon" => c.horizon = num(key, v)?,
            "step_size" => c.step_size = num(key, v)?,
            "n_trajectories" => c.n_trajectories = num(key, v)?,
            "inits" => {
                c.inits = v
                    .split(',')
                    .map(|s| Initialization::parse(s.trim()).map_err(|e| ConfigError(format!("key \"inits\": {e}"))))
                    .collect::<Res<_>>()?
            }
            "grid_points" => c.grid_points = num(key, v)?,
            "mc_samples" => c.mc_samples = num(key, v)?,
            "seed" => c.seed = num(key, v)?,
            "workers" => c.workers = num(key, v)?,
            _ => return Err(unknown(key, THM3_KEYS)),
        }
    }
    Ok(c)
}

pub fn lemma_a1(entries: &[(String, String)]) -> Res<LemmaA1Config> {
    let mut c = LemmaA1Config::default();
    for (key, v) in entries {
        match key.as_str() {
            "d" => c.d = num(key, v)?,
            "alphas" => c.alphas = list(key, v)?,
            "horizon" => c.horizon = num(key, v)?,
            "grid_h" => c.grid_h = num(key, v)?,
            "n_runs" => c.n_runs = num(key, v)?,
            "threshold_factor" => c.threshold_factor = num(key, v)?,
            "seed" => c.seed = num(key, v)?,
            "workers" => c.workers = num(key, v)?,
            _ => return Err(unknown(key, LEMMA_A1_KEYS)),
        }
    }
    Ok(c)
}

pub fn simsec(entries: &[(String, String)]) -> Res<SimsecConfig> {
    let mut c = SimsecConfig::default();
    for (key, v) in entries {
        match key.as_str() {
            "target" => c.target = SimsecTarget::parse(v).map_err(|e| ConfigError(format!("key \"target\": {e}")))?,
            "epochs" => c.epochs = num(key, v)?,
            "hidden_width" => c.hidden_width = num(key, v)?,
            "learning_rate" => c.learning_rate = num(key, v)?,
            "max_level" => c.max_level = num(key, v)?,
            "n_distinct" => c.n_distinct = num(key, v)?,
            "duplication" => c.duplication = num(key, v)?,
            "n_values" => c.n_values = list(key, v)?,
            "n_init_points" => c.n_init_points = num(key, v)?,
            "step_size" => c.step_size = num(key, v)?,
            "n_steps" => c.n_steps = num(key, v)?,
            "reference_draws" => c.reference_draws = num(key, v)?,
            "sinkhorn_trials" => c.sinkhorn_trials = num(key, v)?,
            "sinkhorn_subsample" => c.sinkhorn_subsample = num(key, v)?,
            "blur" => c.blur = num(key, v)?,
            "checkpoint" => c.checkpoint = opt_path(v),
            "seed" => c.seed = num(key, v)?,
            "workers" => c.workers = num(key, v)?,
            _ => return Err(unknown(key, SIMSEC_KEYS)),
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertKind {
    Thm1,
    Thm2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpCertConfig {
    pub kind: CertKind,
    pub d: usize,
    pub p: f64,
    pub alpha: Option<f64>,
    pub anchors: Option<PathBuf>,
    pub n_anchors: usize,
    pub seed: u64,
}

impl Default for LpCertConfig {
    fn default() -> Self {
        Self {
            kind: CertKind::Thm1,
            d: 50,
            p: 2.0,
            alpha: None,
            anchors: None,
            n_anchors: 20,
            seed: 0,
        }
    }
}

pub fn lp_cert(entries: &[(String, String)]) -> Res<LpCertConfig> {
    let mut c = LpCertConfig::default();
    for (key, v) in entries {
        match key.as_str() {
            "kind" => {
                c.kind = match v.as_str() {
                    "thm1" => CertKind::Thm1,
                    "thm2" => CertKind::Thm2,
                    _ => return Err(ConfigError(format!("invalid value {v:?} for key \"kind\" (expected thm1 or thm2)"))),
                }
            }
            "d" => c.d = num(key, v)?,
            "p" => c.p = if v == "inf" { f64::INFINITY } else { num(key, v)? },
            "alpha" => c.alpha = if v.is_empty() { None } else { Some(num(key, v)?) },
            "anchors" => c.anchors = opt_path(v),
            "n_anchors" => c.n_anchors = num(key, v)?,
            "seed" => c.seed = num(key, v)?,
            _ => return Err(unknown(key, LP_CERT_KEYS)),
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GpCheckConfig {
    pub points: Option<PathBuf>,
    pub d: usize,
    pub n_points: usize,
    pub seed: u64,
}

impl Default for GpCheckConfig {
    fn default() -> Self {
        Self {
            points: None,
            d: 50,
            n_points: 20,
            seed: 0,
        }
    }
}

pub fn gp_check(entries: &[(String, String)]) -> Res<GpCheckConfig> {
    let mut c = GpCheckConfig::default();
    for (key, v) in entries {
        match key.as_str() {
            "points" => c.points = opt_path(v),
            "d" => c.d = num(key, v)?,
            "n_points" => c.n_points = num(key, v)?,
            "seed" => c.seed = num(key, v)?,
            _ => return Err(unknown(key, GP_CHECK_KEYS)),
        }
    }
    Ok(c)
}

/// Subcommand name and key table, in help order.
pub const TABLES: &[(&str, &[KeySpec])] = &[
    ("thm1", THM1_KEYS),
    ("thm2", THM2_KEYS),
    ("thm3", THM3_KEYS),
    ("lemma-a1", LEMMA_A1_KEYS),
    ("simsec", SIMSEC_KEYS),
    ("lp-cert", LP_CERT_KEYS),
    ("gp-check", GP_CHECK_KEYS),
];

pub fn keys_help() -> String {
    let mut s = String::from("Config keys (file lines `key = value`; defaults in brackets):\n");
    for (name, table) in TABLES {
        s.push_str(&format!("\n  {name}:\n"));
        for spec in *table {
            s.push_str(&format!("    {:<20} {} [{}]\n", spec.key, spec.help, spec.default));
        }
    }
    s
}

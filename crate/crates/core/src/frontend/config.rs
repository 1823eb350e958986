//! Flat `key = value` run configuration with `[section]` headers.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::basis::{ModeIndex, TrapSpec};
use crate::coupling::{AlphaSettings, EmissionPattern};
use crate::decay::DecaySettings;
use crate::dynamics::GeneratorOptions;
use crate::error::{Error, Result};

/// Temperature grid of a scan. `T_e` is linear, `T_g` logarithmic.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    pub t_e_min: f64,
    pub t_e_max: f64,
    pub t_e_points: usize,
    pub t_g_min: f64,
    pub t_g_max: f64,
    pub t_g_points: usize,
    pub samples: usize,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid {
            t_e_min: 0.1,
            t_e_max: 2.0,
            t_e_points: 5,
            t_g_min: 0.5,
            t_g_max: 50.0,
            t_g_points: 7,
            samples: 64,
        }
    }
}

fn linear(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

impl ScanGrid {
    pub fn t_e_values(&self) -> Vec<f64> {
        linear(self.t_e_min, self.t_e_max, self.t_e_points)
    }

    /// Geometric spacing between `t_g_min` and `t_g_max`.
    pub fn t_g_values(&self) -> Vec<f64> {
        if self.t_g_points == 1 {
            return vec![self.t_g_min];
        }
        linear(self.t_g_min.ln(), self.t_g_max.ln(), self.t_g_points).into_iter().map(f64::exp).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSettings {
    pub t_e: f64,
    pub fractions: Vec<f64>,
    pub steps: usize,
    pub samples_per_step: usize,
    pub t_e_follows_t_g: bool,
    /// Force both channel probabilities to zero.
    pub diagnostic_zero: bool,
}

impl Default for LoadSettings {
    fn default() -> Self {
        LoadSettings {
            t_e: 1.0,
            fractions: vec![0.99, 0.98, 0.90],
            steps: 100,
            samples_per_step: 64,
            t_e_follows_t_g: false,
            diagnostic_zero: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateSettings {
    pub oracle_trajectories: usize,
    pub sweep_configs: usize,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        ValidateSettings { oracle_trajectories: 20_000, sweep_configs: 20 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: TrapSpec,
    pub alpha: AlphaSettings,
    pub decay: DecaySettings,
    pub scan: ScanGrid,
    pub load: LoadSettings,
    pub validate: ValidateSettings,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub cache: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            spec: TrapSpec::default(),
            alpha: AlphaSettings::default(),
            decay: DecaySettings::default(),
            scan: ScanGrid::default(),
            load: LoadSettings::default(),
            validate: ValidateSettings::default(),
            seed: 0,
            threads: 0,
            cache: None,
        }
    }
}

struct Entry {
    value: String,
    line: usize,
}

struct Fields {
    map: BTreeMap<String, Entry>,
}

fn cfg_err<T>(line: usize, message: impl Into<String>) -> Result<T> {
    Err(Error::Config { line, message: message.into() })
}

impl Fields {
    fn take<T>(&mut self, key: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(e) => match parse(e.value.trim()) {
                Some(v) => Ok(Some(v)),
                None => cfg_err(e.line, format!("cannot parse value {:?} for {key}", e.value)),
            },
        }
    }

    fn set<T>(&mut self, key: &str, slot: &mut T, parse: impl Fn(&str) -> Option<T>) -> Result<()> {
        if let Some(v) = self.take(key, parse)? {
            *slot = v;
        }
        Ok(())
    }
}

fn p_f64(s: &str) -> Option<f64> {
    s.parse().ok().filter(|x: &f64| x.is_finite())
}
fn p_usize(s: &str) -> Option<usize> {
    s.parse().ok()
}
fn p_u64(s: &str) -> Option<u64> {
    s.parse().ok()
}
fn p_bool(s: &str) -> Option<bool> {
    match s {
        "true" => Some(true),
        "false" => Some(false),
        _ => None,
    }
}
fn p_opt_usize(s: &str) -> Option<Option<usize>> {
    if s == "none" {
        Some(None)
    } else {
        p_usize(s).map(Some)
    }
}
fn p_opt_path(s: &str) -> Option<Option<PathBuf>> {
    if s == "none" {
        Some(None)
    } else if s.is_empty() {
        None
    } else {
        Some(Some(PathBuf::from(s)))
    }
}
fn p_pattern(s: &str) -> Option<EmissionPattern> {
    match s {
        "isotropic" => Some(EmissionPattern::Isotropic),
        "dipole_z" => Some(EmissionPattern::DipoleZ),
        _ => None,
    }
}
fn p_f64_list(s: &str) -> Option<Vec<f64>> {
    if s.is_empty() {
        return Some(vec![]);
    }
    s.split(',').map(|x| p_f64(x.trim())).collect()
}
fn p_modes(s: &str) -> Option<Option<Vec<ModeIndex>>> {
    if s == "none" {
        return Some(None);
    }
    let mut out = Vec::new();
    for item in s.split(';') {
        let parts: Vec<u32> = item.split(',').map(|x| x.trim().parse().ok()).collect::<Option<_>>()?;
        if parts.len() != 3 {
            return None;
        }
        out.push(ModeIndex::new(parts[0], parts[1], parts[2]));
    }
    Some(Some(out))
}

fn pattern_name(p: EmissionPattern) -> &'static str {
    match p {
        EmissionPattern::Isotropic => "isotropic",
        EmissionPattern::DipoleZ => "dipole_z",
    }
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "none".to_string(), |x| x.to_string())
}

const GIB: f64 = (1u64 << 30) as f64;

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                    _ => return cfg_err(line, format!("malformed section header {body:?}")),
                }
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return cfg_err(line, format!("expected key = value, found {body:?}"));
            };
            let k = k.trim();
            if k.is_empty() {
                return cfg_err(line, "empty key");
            }
            if section.is_empty() {
                return cfg_err(line, format!("key {k} appears before any section"));
            }
            let full = format!("{section}.{k}");
            if let Some(prev) = map.get(&full) {
                let prev: &Entry = prev;
                return cfg_err(line, format!("duplicate key {full} (first set on line {})", prev.line));
            }
            map.insert(full, Entry { value: v.trim().to_string(), line });
        }
        let mut f = Fields { map };
        let mut c = RunConfig::default();
        let s = &mut c.spec;
        f.set("trap.omega", &mut s.omega, p_f64)?;
        f.set("trap.shells_g", &mut s.shells_g, p_usize)?;
        f.set("trap.shells_e", &mut s.shells_e, p_usize)?;
        f.set("trap.eta_sq", &mut s.eta_sq, p_f64)?;
        f.set("trap.gamma", &mut s.gamma, p_f64)?;
        f.set("trap.transition_frequency", &mut s.transition_frequency, p_f64)?;
        f.set("trap.n_atoms", &mut s.n_atoms, p_u64)?;
        f.set("trap.n_condensed", &mut s.n_condensed, p_u64)?;
        f.set("trap.ground_mode_cap", &mut s.ground_mode_cap, p_opt_usize)?;
        f.set("trap.excited_mode_cap", &mut s.excited_mode_cap, p_opt_usize)?;
        f.set("trap.ground_modes", &mut s.ground_mode_list, p_modes)?;
        let a = &mut c.alpha;
        f.set("tensor.sphere_order", &mut a.sphere_order, p_usize)?;
        f.set("tensor.pv_grid", &mut a.pv_grid, p_usize)?;
        f.set("tensor.kappa_max", &mut a.kappa_max, p_f64)?;
        f.set("tensor.include_imaginary", &mut a.include_imaginary, p_bool)?;
        f.set("tensor.pattern", &mut a.pattern, p_pattern)?;
        if let Some(g) = f.take("tensor.budget_gib", p_f64)? {
            a.budget_bytes = (g * GIB) as u64;
        }
        f.set("tensor.cache", &mut c.cache, p_opt_path)?;
        let d = &mut c.decay;
        let mut bare = d.generator.bare_excited_energies;
        f.set("dynamics.bare_excited_energies", &mut bare, p_bool)?;
        d.generator = GeneratorOptions { bare_excited_energies: bare };
        f.set("dynamics.first_order", &mut d.first_order, p_bool)?;
        f.set("validity.threshold", &mut d.threshold, p_f64)?;
        f.set("validity.margin", &mut d.margin, p_f64)?;
        f.set("validity.level_share", &mut d.level_share, p_f64)?;
        let g = &mut c.scan;
        f.set("scan.t_e_min", &mut g.t_e_min, p_f64)?;
        f.set("scan.t_e_max", &mut g.t_e_max, p_f64)?;
        f.set("scan.t_e_points", &mut g.t_e_points, p_usize)?;
        f.set("scan.t_g_min", &mut g.t_g_min, p_f64)?;
        f.set("scan.t_g_max", &mut g.t_g_max, p_f64)?;
        f.set("scan.t_g_points", &mut g.t_g_points, p_usize)?;
        f.set("scan.samples", &mut g.samples, p_usize)?;
        let l = &mut c.load;
        f.set("load.t_e", &mut l.t_e, p_f64)?;
        f.set("load.fractions", &mut l.fractions, p_f64_list)?;
        f.set("load.steps", &mut l.steps, p_usize)?;
        f.set("load.samples_per_step", &mut l.samples_per_step, p_usize)?;
        f.set("load.t_e_follows_t_g", &mut l.t_e_follows_t_g, p_bool)?;
        f.set("load.diagnostic_zero", &mut l.diagnostic_zero, p_bool)?;
        let v = &mut c.validate;
        f.set("validate.oracle_trajectories", &mut v.oracle_trajectories, p_usize)?;
        f.set("validate.sweep_configs", &mut v.sweep_configs, p_usize)?;
        f.set("run.seed", &mut c.seed, p_u64)?;
        f.set("run.threads", &mut c.threads, p_usize)?;
        if let Some((k, e)) = f.map.iter().next() {
            return cfg_err(e.line, format!("unknown key {k}"));
        }
        c.check()?;
        Ok(c)
    }

    /// Semantic checks beyond syntax; reported against line 0.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config { line: 0, message: m });
        if let Err(e) = self.spec.validate() {
            return bad(e.to_string());
        }
        let g = &self.scan;
        if g.t_e_min < 0.0 || g.t_e_max < g.t_e_min || g.t_g_min < 0.0 || g.t_g_max < g.t_g_min {
            return bad("scan temperature ranges must be non-negative and ordered".into());
        }
        if g.t_g_points > 1 && g.t_g_min <= 0.0 {
            return bad("a logarithmic T_g grid needs t_g_min > 0".into());
        }
        if g.samples == 0 || self.load.samples_per_step == 0 {
            return bad("sample counts must be at least 1".into());
        }
        if self.load.fractions.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
            return bad("load fractions must lie in (0, 1]".into());
        }
        if self.alpha.sphere_order == 0 || self.alpha.pv_grid < 2 || !(self.alpha.kappa_max > 1.0) {
            return bad("tensor quadrature settings out of range".into());
        }
        Ok(())
    }

    /// Canonical text; `parse(to_text())` reproduces the configuration.
    pub fn to_text(&self) -> String {
        let s = &self.spec;
        let a = &self.alpha;
        let d = &self.decay;
        let g = &self.scan;
        let l = &self.load;
        let v = &self.validate;
        let modes = s.ground_mode_list.as_ref().map_or_else(
            || "none".to_string(),
            |list| {
                list.iter().map(|m| format!("{},{},{}", m.nx, m.ny, m.nz)).collect::<Vec<_>>().join("; ")
            },
        );
        let fractions = l.fractions.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut o = String::new();
        let _ = writeln!(o, "[trap]");
        let _ = writeln!(o, "omega = {}", s.omega);
        let _ = writeln!(o, "shells_g = {}", s.shells_g);
        let _ = writeln!(o, "shells_e = {}", s.shells_e);
        let _ = writeln!(o, "eta_sq = {}", s.eta_sq);
        let _ = writeln!(o, "gamma = {}", s.gamma);
        let _ = writeln!(o, "transition_frequency = {}", s.transition_frequency);
        let _ = writeln!(o, "n_atoms = {}", s.n_atoms);
        let _ = writeln!(o, "n_condensed = {}", s.n_condensed);
        let _ = writeln!(o, "ground_mode_cap = {}", opt(&s.ground_mode_cap));
        let _ = writeln!(o, "excited_mode_cap = {}", opt(&s.excited_mode_cap));
        let _ = writeln!(o, "ground_modes = {modes}");
        let _ = writeln!(o, "[tensor]");
        let _ = writeln!(o, "sphere_order = {}", a.sphere_order);
        let _ = writeln!(o, "pv_grid = {}", a.pv_grid);
        let _ = writeln!(o, "kappa_max = {}", a.kappa_max);
        let _ = writeln!(o, "include_imaginary = {}", a.include_imaginary);
        let _ = writeln!(o, "pattern = {}", pattern_name(a.pattern));
        let _ = writeln!(o, "budget_gib = {}", a.budget_bytes as f64 / GIB);
        let _ = writeln!(o, "cache = {}", opt(&self.cache.as_ref().map(|p| p.display())));
        let _ = writeln!(o, "[dynamics]");
        let _ = writeln!(o, "bare_excited_energies = {}", d.generator.bare_excited_energies);
        let _ = writeln!(o, "first_order = {}", d.first_order);
        let _ = writeln!(o, "[validity]");
        let _ = writeln!(o, "threshold = {}", d.threshold);
        let _ = writeln!(o, "margin = {}", d.margin);
        let _ = writeln!(o, "level_share = {}", d.level_share);
        let _ = writeln!(o, "[scan]");
        let _ = writeln!(o, "t_e_min = {}", g.t_e_min);
        let _ = writeln!(o, "t_e_max = {}", g.t_e_max);
        let _ = writeln!(o, "t_e_points = {}", g.t_e_points);
        let _ = writeln!(o, "t_g_min = {}", g.t_g_min);
        let _ = writeln!(o, "t_g_max = {}", g.t_g_max);
        let _ = writeln!(o, "t_g_points = {}", g.t_g_points);
        let _ = writeln!(o, "samples = {}", g.samples);
        let _ = writeln!(o, "[load]");
        let _ = writeln!(o, "t_e = {}", l.t_e);
        let _ = writeln!(o, "fractions = {fractions}");
        let _ = writeln!(o, "steps = {}", l.steps);
        let _ = writeln!(o, "samples_per_step = {}", l.samples_per_step);
        let _ = writeln!(o, "t_e_follows_t_g = {}", l.t_e_follows_t_g);
        let _ = writeln!(o, "diagnostic_zero = {}", l.diagnostic_zero);
        let _ = writeln!(o, "[validate]");
        let _ = writeln!(o, "oracle_trajectories = {}", v.oracle_trajectories);
        let _ = writeln!(o, "sweep_configs = {}", v.sweep_configs);
        let _ = writeln!(o, "[run]");
        let _ = writeln!(o, "seed = {}", self.seed);
        let _ = writeln!(o, "threads = {}", self.threads);
        o
    }
}

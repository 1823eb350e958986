//! The scan, load, tensor and validate commands.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::csv::CsvDoc;
use crate::basis::TrapSpec;
use crate::coupling::cache::{load_or_build, CacheStatus};
use crate::coupling::{build_alpha_tensor, build_sphere_quadrature, pv_integrate, AlphaTensor};
use crate::decay::{averaged_outcome, DecayMachinery};
use crate::dynamics::{biortho_decompose, build_generator};
use crate::error::{Error, Result};
use crate::loading::{run_loading, LoadingConfig};
use crate::oracle::benchmark::{benchmark_spec, benchmark_state, run_benchmark};
use crate::oracle::{integrate_cascade, quantum_jump_estimate, OracleOptions};

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::InvalidArgument(_) | Error::Io(_) | Error::Format(_) => 2,
        Error::ResourceLimit(_) => 3,
        _ => 1,
    }
}

/// Composite tensor dimension above which a run is flagged as long-running.
pub const LONG_RUN_COMPOSITE: usize = 2000;

fn timestamp() -> String {
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("{secs} unix")
}

fn f(x: f64) -> String {
    format!("{x}")
}

fn write_out(out: Option<&Path>, text: &str) -> Result<()> {
    if let Some(p) = out {
        if let Some(dir) = p.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(p, text)?;
    }
    Ok(())
}

/// Resource and runtime notes for the configured basis.
pub fn preflight(spec: &TrapSpec) -> Result<Vec<String>> {
    let ne = spec.excited_modes()?.len();
    let ng = spec.ground_modes()?.len();
    let mut notes = Vec::new();
    if ne * ng >= LONG_RUN_COMPOSITE {
        let msg = format!("long-running: {ne} excited x {ng} ground modes");
        log::warn!("{msg}");
        notes.push(msg);
    }
    Ok(notes)
}

/// Builds the tensor, going through the cache file when one is configured.
pub fn obtain_tensor(config: &RunConfig) -> Result<(AlphaTensor, Option<CacheStatus>)> {
    match &config.cache {
        Some(path) => {
            let (t, s) = load_or_build(path, &config.spec, &config.alpha)?;
            log::info!("alpha cache {}: {:?}", path.display(), s);
            Ok((t, Some(s)))
        }
        None => Ok((build_alpha_tensor(&config.spec, &config.alpha)?, None)),
    }
}

fn fingerprint(config: &RunConfig) -> String {
    let mut h = Sha256::new();
    h.update(config.to_text().as_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub const SCAN_HEADER: [&str; 8] =
    ["T_e", "T_g", "n_prime_minus_n", "stderr", "p_plus", "p_zero", "interference", "valid_flag"];

fn checkpoint_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".ckpt");
    PathBuf::from(s)
}

/// Completed grid rows stored in a checkpoint that matches `config`.
fn read_checkpoint(path: &Path, config: &RunConfig, width: usize) -> Vec<Option<Vec<Vec<String>>>> {
    let rows = config.scan.t_e_points;
    let mut done: Vec<Option<Vec<Vec<String>>>> = vec![None; rows];
    let Ok(text) = fs::read_to_string(path) else {
        return done;
    };
    let mut lines = text.lines();
    if lines.next() != Some(&format!("# bar ckpt v1 {}", fingerprint(config))) {
        log::warn!("ignoring checkpoint {} written for a different run", path.display());
        return done;
    }
    let mut partial: Vec<Vec<Vec<String>>> = vec![Vec::new(); rows];
    for l in lines {
        let Some((idx, row)) = l.split_once('|') else { continue };
        let Ok(i) = idx.parse::<usize>() else { continue };
        let cells: Vec<String> = row.split(',').map(str::to_string).collect();
        if i < rows && cells.len() == SCAN_HEADER.len() {
            partial[i].push(cells);
        }
    }
    for (i, p) in partial.into_iter().enumerate() {
        if p.len() == width {
            done[i] = Some(p);
        }
    }
    done
}

fn scan_doc_with(config: &RunConfig, out: Option<&Path>, stop_after: Option<usize>) -> Result<Option<CsvDoc>> {
    let notes = preflight(&config.spec)?;
    let te = config.scan.t_e_values();
    let tg = config.scan.t_g_values();
    let mut doc = CsvDoc::new("scan", config.seed, &config.to_text(), &SCAN_HEADER);
    doc.notes = notes;
    let ckpt = out.map(checkpoint_path);
    let mut done = match &ckpt {
        Some(p) => read_checkpoint(p, config, tg.len()),
        None => vec![None; te.len()],
    };
    let need_work = done.iter().any(|d| d.is_none());
    let machinery = if need_work && !te.is_empty() && !tg.is_empty() {
        let (alpha, _) = obtain_tensor(config)?;
        Some(DecayMachinery::new(&alpha, &config.spec, config.decay)?)
    } else {
        None
    };
    let mut writer = match &ckpt {
        Some(p) if need_work => {
            let fresh = !p.exists() || done.iter().all(|d| d.is_none());
            let mut w = OpenOptions::new().create(true).append(!fresh).write(true).truncate(fresh).open(p)?;
            if fresh {
                writeln!(w, "# bar ckpt v1 {}", fingerprint(config))?;
            }
            Some(w)
        }
        _ => None,
    };
    let mut computed = 0;
    for (i, &t_e) in te.iter().enumerate() {
        if done[i].is_some() {
            continue;
        }
        if stop_after.is_some_and(|k| computed >= k) {
            return Ok(None);
        }
        let m = machinery.as_ref().expect("machinery built when work remains");
        let cells: Vec<Result<Vec<String>>> = tg
            .par_iter()
            .enumerate()
            .map(|(j, &t_g)| {
                let cell = (i * tg.len() + j) as u64;
                let seed = config.seed.wrapping_add(cell << 24);
                let o = averaged_outcome(m, t_g, t_e, config.scan.samples, seed)?;
                Ok(vec![
                    f(t_e),
                    f(t_g),
                    f(o.n_prime_minus_n),
                    f(o.delta_err),
                    f(o.p_plus),
                    f(o.p_zero),
                    f(o.p_zero_terms[2]),
                    (o.validity.is_valid() as u8).to_string(),
                ])
            })
            .collect();
        let cells: Vec<Vec<String>> = cells.into_iter().collect::<Result<_>>()?;
        if let Some(w) = writer.as_mut() {
            for c in &cells {
                writeln!(w, "{i}|{}", c.join(","))?;
            }
            w.flush()?;
        }
        done[i] = Some(cells);
        computed += 1;
    }
    for row in done.into_iter().flatten() {
        for c in row {
            doc.push(c);
        }
    }
    Ok(Some(doc))
}

/// Temperature grid of `n' - n`. With `out` set, progress is checkpointed per
/// `T_e` row next to the output and an interrupted scan resumes from it.
pub fn cmd_scan(config: &RunConfig, out: Option<&Path>) -> Result<String> {
    let doc = scan_doc_with(config, out, None)?.expect("no stop requested");
    let text = doc.render(&timestamp());
    write_out(out, &text)?;
    if let Some(p) = out {
        let _ = fs::remove_file(checkpoint_path(p));
    }
    Ok(text)
}

/// Runs at most `rows` new grid rows and leaves the checkpoint in place,
/// as an interrupted scan would.
pub fn cmd_scan_partial(config: &RunConfig, out: &Path, rows: usize) -> Result<()> {
    scan_doc_with(config, Some(out), Some(rows)).map(|_| ())
}

pub const LOAD_HEADER: [&str; 7] =
    ["initial_fraction", "step", "N", "fraction", "stderr", "T_g", "valid_flag"];

pub fn cmd_load(config: &RunConfig, out: Option<&Path>) -> Result<String> {
    let mut doc = CsvDoc::new("load", config.seed, &config.to_text(), &LOAD_HEADER);
    let l = &config.load;
    let machinery = if l.diagnostic_zero || l.steps == 0 || l.fractions.is_empty() {
        None
    } else {
        doc.notes = preflight(&config.spec)?;
        let (alpha, _) = obtain_tensor(config)?;
        Some(DecayMachinery::new(&alpha, &config.spec, config.decay)?)
    };
    for (c, &frac) in l.fractions.iter().enumerate() {
        let lc = LoadingConfig {
            t_e: l.t_e,
            initial_fraction: frac,
            steps: l.steps,
            samples_per_step: l.samples_per_step,
            seed: config.seed.wrapping_add((c as u64) << 40),
            t_e_follows_t_g: l.t_e_follows_t_g,
        };
        let tr = run_loading(machinery.as_ref(), &config.spec, &lc)?;
        for s in &tr.steps {
            doc.push(vec![
                f(frac),
                s.step.to_string(),
                s.n_atoms.to_string(),
                f(s.fraction),
                f(s.stderr),
                f(s.t_g),
                (s.validity.is_valid() as u8).to_string(),
            ]);
        }
    }
    let text = doc.render(&timestamp());
    write_out(out, &text)?;
    Ok(text)
}

pub const TENSOR_HEADER: [&str; 5] =
    ["excited_mode", "mode", "completeness", "max_abs_imag", "psd_min_eigenvalue"];

/// Builds and stores the tensor, returning the sum-rule summary CSV.
pub fn cmd_tensor(config: &RunConfig, out: Option<&Path>) -> Result<(String, CacheStatus)> {
    let mut cfg = config.clone();
    if cfg.cache.is_none() {
        cfg.cache = Some(match out {
            Some(p) => p.with_extension("alpha"),
            None => PathBuf::from("alpha_tensor.bin"),
        });
    }
    let notes = preflight(&cfg.spec)?;
    let (t, status) = obtain_tensor(&cfg)?;
    let mut doc = CsvDoc::new("tensor", config.seed, &config.to_text(), &TENSOR_HEADER);
    doc.notes = notes;
    let ng = t.n_ground();
    let ne = t.n_excited();
    for l in 0..ne {
        let mut max_imag = 0.0f64;
        for m in 0..ng {
            for mp in 0..ng {
                for lp in 0..ne {
                    max_imag = max_imag.max(t.imag_part(l, m, mp, lp).norm());
                }
            }
        }
        let block = DMatrix::<Complex64>::from_fn(ng, ng, |m, mp| t.real_part(l, m, mp, l));
        let min_eig = block.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        doc.push(vec![
            l.to_string(),
            format!("{}:{}:{}", t.excited[l].nx, t.excited[l].ny, t.excited[l].nz),
            f(t.completeness(l)),
            f(max_imag),
            f(min_eig),
        ]);
    }
    let text = doc.render(&timestamp());
    write_out(out, &text)?;
    Ok((text, status.expect("cache path set above")))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn add(&mut self, name: &str, passed: bool, detail: String) {
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    fn add_result(&mut self, name: &str, r: Result<(bool, String)>) {
        match r {
            Ok((p, d)) => self.add(name, p, d),
            Err(e) => self.add(name, false, format!("error: {e}")),
        }
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s.push_str(&format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        s.push_str(if self.passed() { "all checks passed\n" } else { "validation failed\n" });
        s
    }
}

fn check_pv() -> Result<(bool, String)> {
    let a = pv_integrate(|_| 1.0, 1.0, 0.0, 2.0)?;
    let b = pv_integrate(|x| x, 1.0, 0.0, 2.0)?;
    let ok = a.abs() < 1e-8 && (b - 2.0).abs() < 1e-8;
    Ok((ok, format!("constant {a:.3e}, linear {b:.12}")))
}

fn check_sphere(order: usize) -> Result<(bool, String)> {
    let q = build_sphere_quadrature(order)?;
    let one = q.integrate(|_| 1.0);
    let z2 = q.integrate(|d| d[2] * d[2]);
    let xy = q.integrate(|d| d[0] * d[1]);
    let err = (one - 1.0).abs().max((z2 - 1.0 / 3.0).abs()).max(xy.abs());
    Ok((err < 1e-12, format!("max moment error {err:.2e}")))
}

fn check_tensor(t: &AlphaTensor) -> (bool, String) {
    let d = t.composite_dim();
    let mut asym = 0.0f64;
    for r in 0..d {
        for c in 0..d {
            let a = t.emission[r * d + c];
            let b = t.emission[c * d + r].conj();
            asym = asym.max((a - b).norm());
        }
    }
    let comp = (0..t.n_excited()).map(|l| t.completeness(l)).fold(0.0, f64::max);
    let min_eig = t.emission_matrix().symmetric_eigen().eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let ok = asym == 0.0 && comp <= 1.0 + 1e-10 && min_eig >= -1e-10;
    (ok, format!("hermitian defect {asym:.1e}, max completeness {comp:.6}, min eigenvalue {min_eig:.2e}"))
}

fn check_biortho(t: &AlphaTensor, config: &RunConfig) -> Result<(bool, String)> {
    let g = build_generator(t, &config.spec, config.decay.generator)?;
    let d = biortho_decompose(&g.matrix)?;
    let res = (d.reconstruct() - &g.matrix).norm() / g.matrix.norm().max(f64::MIN_POSITIVE);
    let bio = d.biorthogonality_error();
    Ok((res <= 1e-10 && bio <= 1e-10, format!("reconstruction {res:.2e}, biorthogonality {bio:.2e}")))
}

fn check_oracle(config: &RunConfig) -> Result<(bool, String)> {
    let mut rows = Vec::new();
    for &n0 in &[25u64, 100, 400] {
        rows.push(run_benchmark(n0, &config.alpha)?);
    }
    let mono = rows.windows(2).all(|w| w[1].rel_plus() < w[0].rel_plus() && w[1].rel_zero() < w[0].rel_zero());
    let last = rows[2];
    let ok = mono && last.rel_plus() < 0.1 && last.rel_zero() < 0.1;
    let detail = rows
        .iter()
        .map(|r| format!("N0={} rel(+)={:.3e} rel(0)={:.3e}", r.n0, r.rel_plus(), r.rel_zero()))
        .collect::<Vec<_>>()
        .join("; ");
    Ok((ok, detail))
}

fn check_jumps(config: &RunConfig) -> Result<(bool, String)> {
    let n0 = 25;
    let spec = benchmark_spec(n0);
    let state = benchmark_state(n0);
    let alpha = build_alpha_tensor(&spec, &config.alpha)?;
    let opts = OracleOptions::default();
    let exact = integrate_cascade(&spec, &state, &alpha, &opts)?;
    let qj = quantum_jump_estimate(&spec, &state, &alpha, &opts, config.validate.oracle_trajectories, config.seed)?;
    let mut worst = 0.0f64;
    for target in [n0, n0 + 1, n0 + 2] {
        let p = exact.condensate_channel(0, target);
        let (q, se) = qj.condensate_channel(0, target);
        let z = if se > 0.0 { (p - q).abs() / se } else if (p - q).abs() < 1e-12 { 0.0 } else { f64::INFINITY };
        worst = worst.max(z);
    }
    Ok((worst <= 3.0, format!("largest deviation {worst:.2} standard errors")))
}

fn check_interference(config: &RunConfig) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..config.validate.sweep_configs {
        let spec = TrapSpec {
            shells_e: rng.random_range(1..=2),
            shells_g: rng.random_range(2..=4),
            eta_sq: rng.random_range(0.5..3.0),
            n_atoms: 2000,
            n_condensed: 1800,
            ..TrapSpec::default()
        };
        let alpha = build_alpha_tensor(&spec, &config.alpha)?;
        let m = DecayMachinery::new(&alpha, &spec, config.decay)?;
        // every state's term is a positive multiple of one of these
        worst = m.unit.iter().map(|u| u.interference).fold(worst, f64::max);
    }
    Ok((worst <= 1e-12, format!("largest unit interference integral {worst:.3e}")))
}

fn check_validity(t: &AlphaTensor, config: &RunConfig) -> Result<(bool, String)> {
    let m = DecayMachinery::new(t, &config.spec, config.decay)?;
    let o = averaged_outcome(&m, config.scan.t_g_min, config.scan.t_e_min, config.scan.samples, config.seed)?;
    let v = o.validity;
    let detail = format!(
        "T_e={} T_g={} p_max={:.3e} threshold={} a={} N0={:.1}: {}",
        config.scan.t_e_min,
        config.scan.t_g_min,
        v.p_max,
        v.threshold,
        v.a_estimate,
        v.n_condensed,
        v.reason().unwrap_or("valid")
    );
    Ok((v.is_valid(), detail))
}

/// Runs the invariant suite; `passed()` false maps to exit code 1.
pub fn cmd_validate(config: &RunConfig, out: Option<&Path>) -> Result<ValidationReport> {
    let mut r = ValidationReport::default();
    let _ = preflight(&config.spec)?;
    r.add_result("pv exact cases", check_pv());
    r.add_result("sphere moments", check_sphere(config.alpha.sphere_order));
    let tensor = match obtain_tensor(config) {
        Ok((t, status)) => {
            if let Some(s) = status {
                let detail = match &s {
                    CacheStatus::Hit => "cache hit".to_string(),
                    CacheStatus::Created => "cache created".to_string(),
                    CacheStatus::Rebuilt(why) => format!("rebuild triggered: {why}"),
                };
                r.add("tensor cache", true, detail);
            }
            Some(t)
        }
        Err(e) => {
            r.add("tensor build", false, format!("error: {e}"));
            None
        }
    };
    if let Some(t) = &tensor {
        let (ok, d) = check_tensor(t);
        r.add("tensor sum rules and positivity", ok, d);
        r.add_result("biorthogonal reconstruction", check_biortho(t, config));
    }
    r.add_result("oracle convergence", check_oracle(config));
    r.add_result("oracle quantum-jump agreement", check_jumps(config));
    r.add_result("interference sign", check_interference(config));
    if let Some(t) = &tensor {
        r.add_result("expansion validity", check_validity(t, config));
    }
    write_out(out, &r.render())?;
    Ok(r)
}

/// Re-runs the command recorded in a CSV from its configuration echo.
pub fn regenerate(csv_text: &str) -> Result<String> {
    let doc = CsvDoc::parse(csv_text)?;
    let mut config = RunConfig::parse(&doc.config)?;
    config.seed = doc.seed;
    match doc.kind.as_str() {
        "scan" => cmd_scan(&config, None),
        "load" => cmd_load(&config, None),
        "tensor" => cmd_tensor(&config, None).map(|(t, _)| t),
        k => Err(Error::Format(format!("unknown CSV kind {k:?}"))),
    }
}

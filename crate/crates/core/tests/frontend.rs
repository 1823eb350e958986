use bar_core::basis::TrapSpec;
use bar_core::frontend::commands::{cmd_scan_partial, LOAD_HEADER};
use bar_core::frontend::{cmd_load, cmd_scan, cmd_validate, exit_code, regenerate, strip_timestamp, CsvDoc, RunConfig};
use bar_core::Error;

fn tiny_scan() -> RunConfig {
    let mut c = RunConfig::default();
    c.spec = TrapSpec { shells_g: 4, shells_e: 2, n_atoms: 3000, n_condensed: 2800, ..TrapSpec::default() };
    c.scan.t_e_points = 3;
    c.scan.t_g_points = 3;
    c.scan.samples = 8;
    c.seed = 99;
    c
}

#[test]
fn interrupted_scan_resumes_to_the_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_scan();
    let whole = cmd_scan(&config, Some(&dir.path().join("whole.csv"))).unwrap();
    let out = dir.path().join("resumed.csv");
    cmd_scan_partial(&config, &out, 1).unwrap();
    let ckpt = dir.path().join("resumed.csv.ckpt");
    assert!(ckpt.exists());
    assert!(!out.exists());
    cmd_scan_partial(&config, &out, 1).unwrap();
    let resumed = cmd_scan(&config, Some(&out)).unwrap();
    assert!(!ckpt.exists());
    assert_eq!(strip_timestamp(&whole), strip_timestamp(&resumed));
    assert_eq!(CsvDoc::parse(&resumed).unwrap().rows.len(), 9);
}

#[test]
fn foreign_checkpoint_is_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny_scan();
    let out = dir.path().join("scan.csv");
    let mut other = config.clone();
    other.seed = 1;
    cmd_scan_partial(&other, &out, 2).unwrap();
    let text = cmd_scan(&config, Some(&out)).unwrap();
    let fresh = cmd_scan(&config, None).unwrap();
    assert_eq!(strip_timestamp(&text), strip_timestamp(&fresh));
}

#[test]
fn zero_step_load_is_header_only() {
    let mut config = tiny_scan();
    config.load.steps = 0;
    let text = cmd_load(&config, None).unwrap();
    let doc = CsvDoc::parse(&text).unwrap();
    assert!(doc.rows.is_empty());
    assert_eq!(doc.header, LOAD_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>());
}

#[test]
fn diagnostic_load_follows_pure_gain() {
    let mut config = tiny_scan();
    config.load.diagnostic_zero = true;
    config.load.fractions = vec![0.95];
    config.load.steps = 4;
    let doc = CsvDoc::parse(&cmd_load(&config, None).unwrap()).unwrap();
    let mut n0 = 0.95 * 3000.0;
    for (k, row) in doc.rows.iter().enumerate() {
        n0 += 1.0;
        let n = 3000.0 + (k + 1) as f64;
        let f: f64 = row[3].parse().unwrap();
        assert!((f - n0 / n).abs() < 1e-15);
    }
    let again = regenerate(&cmd_load(&config, None).unwrap()).unwrap();
    assert_eq!(strip_timestamp(&again), strip_timestamp(&cmd_load(&config, None).unwrap()));
}

#[test]
fn zero_threshold_fails_validation_on_expansion() {
    let mut config = tiny_scan();
    config.decay.threshold = 0.0;
    config.validate.oracle_trajectories = 2000;
    config.validate.sweep_configs = 2;
    let report = cmd_validate(&config, None).unwrap();
    assert!(!report.passed());
    let v = report.checks.iter().find(|c| c.name == "expansion validity").unwrap();
    assert!(!v.passed);
    assert!(v.detail.contains("expansion"));
    assert!(report.render().contains("FAIL expansion validity"));
}

#[test]
fn error_classes_map_to_exit_codes() {
    let cfg = RunConfig::parse("[trap]\nomega = -1\n").unwrap_err();
    assert_eq!(exit_code(&cfg), 2);
    let parse = RunConfig::parse("[trap]\nbogus = 1\n").unwrap_err();
    assert!(matches!(parse, Error::Config { line: 2, .. }));
    assert_eq!(exit_code(&Error::ResourceLimit("x".into())), 3);
    assert_eq!(exit_code(&Error::Accuracy("x".into())), 1);
    assert_eq!(exit_code(&Error::Format("x".into())), 2);
}

#[test]
fn regenerate_rejects_unknown_files() {
    assert!(regenerate("# bar csv v9\n").is_err());
    let mut doc = CsvDoc::new("plot", 0, "", &["a"]);
    doc.push(vec!["1".into()]);
    assert!(regenerate(&doc.render("0")).is_err());
}

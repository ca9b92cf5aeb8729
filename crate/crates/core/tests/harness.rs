use std::io::Write;

use twofluid::harness::cli::{main_with_args, EXIT_CONFIG_ERROR, EXIT_PASS, EXIT_VERIFICATION_FAILURE};
use twofluid::harness::config::{Model, Recipe, RunConfig};
use twofluid::harness::runs::{self, emtf_initial, initial_state, run_eslm};
use twofluid::harness::snapshot::{load_snapshot, save_snapshot, Snapshot};
use twofluid::harness::study::convergence_study;
use twofluid::harness::trajectory::{read_csv, write_csv, DiagnosticRow, CSV_COLUMNS};
use twofluid::limit::{self, physical_fields};
use twofluid::{emtf, Error, Grid, PlasmaParams};

fn small_config(model: Model) -> RunConfig {
    let mut cfg = RunConfig::new(8, model, 0.05);
    cfg.seed = 4;
    cfg.snapshot_interval = Some(0.025);
    cfg
}

#[test]
fn snapshot_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(8).unwrap();
    let p = PlasmaParams::default();
    let u = limit::random_prepared(&grid, &p, 1, 1.0, 0.1).unwrap();
    let snap = Snapshot::from_state(&grid, &u, "abc", 0.1 + 0.2).unwrap();
    let path = dir.path().join("u.snap");
    save_snapshot(&path, &snap).unwrap();
    let back = load_snapshot(&path, Some(8)).unwrap();
    assert_eq!(back, snap);
    assert_eq!(back.time.to_bits(), (0.1f64 + 0.2).to_bits());
    for (a, b) in back.data.iter().zip(&snap.data) {
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
    // physical samples of a real state determine it up to roundoff
    let v = back.to_state(&grid).unwrap();
    assert!(v.sub(&u).unwrap().norm() < 1e-15 * u.norm().max(1.0));

    let x = limit::slm_to_xmhd(&grid, &p, &u).unwrap();
    let xs = Snapshot::from_xmhd(&grid, &x, "abc", 0.0).unwrap();
    save_snapshot(&path, &xs).unwrap();
    assert_eq!(load_snapshot(&path, None).unwrap(), xs);
}

#[test]
fn snapshot_errors_are_explicit() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid::new(8).unwrap();
    let u = limit::random_prepared(&grid, &PlasmaParams::default(), 2, 1.0, 0.0).unwrap();
    let path = dir.path().join("u.snap");
    save_snapshot(&path, &Snapshot::from_state(&grid, &u, "h", 0.0).unwrap()).unwrap();

    assert!(matches!(load_snapshot(&path, Some(16)), Err(Error::GridMismatch { expected: 16, found: 8 })));

    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.snap");
    std::fs::write(&cut, &bytes[..bytes.len() - 8]).unwrap();
    let err = load_snapshot(&cut, None).unwrap_err();
    assert!(err.to_string().contains("truncated"), "{err}");

    let mut flipped = bytes.clone();
    let last = flipped.len() - 1;
    flipped[last] ^= 1;
    let bad = dir.path().join("bad.snap");
    std::fs::write(&bad, &flipped).unwrap();
    assert!(load_snapshot(&bad, None).unwrap_err().to_string().contains("checksum"));

    let text = String::from_utf8_lossy(&bytes[..bytes.iter().position(|b| *b == b'\n').unwrap()]).to_string();
    let header = text.replace("\"schema_version\":1", "\"schema_version\":99");
    let old = dir.path().join("old.snap");
    let mut f = std::fs::File::create(&old).unwrap();
    f.write_all(header.as_bytes()).unwrap();
    f.write_all(&bytes[text.len()..]).unwrap();
    drop(f);
    assert!(load_snapshot(&old, None).unwrap_err().to_string().contains("schema version"));
}

#[test]
fn csv_has_the_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let rows = vec![
        DiagnosticRow { t: 0.0, l2_norm: 1.0, hsigma_norm: 2.0, div_b: 0.0, gauss_charge: 0.0, energy: 3.0, gol_residual: f64::NAN },
        DiagnosticRow { t: 0.5, l2_norm: 1.5, hsigma_norm: 2.5, div_b: 1e-17, gauss_charge: 2e-17, energy: 3.5, gol_residual: 0.25 },
    ];
    write_csv(&path, &rows).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(CSV_COLUMNS.join(","), "t,l2_norm,hsigma_norm,div_B,gauss_charge,energy,gol_residual");
    let back = read_csv(&path).unwrap();
    assert_eq!(back[1], rows[1]);
    assert!(back[0].gol_residual.is_nan());
}

#[test]
fn identical_configs_give_identical_csvs() {
    let cfg = small_config(Model::Eslm);
    let u0 = initial_state(&cfg).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_eslm(&cfg, &u0, None, Some(a.path())).unwrap();
    run_eslm(&cfg, &initial_state(&cfg).unwrap(), None, Some(b.path())).unwrap();
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("eslm.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    // every snapshot carries the config hash
    let snap = load_snapshot(&a.path().join("eslm_0001.snap"), Some(8)).unwrap();
    assert_eq!(snap.params_hash, cfg.hash());
}

#[test]
fn fast_scale_initial_data_reproduces_the_densities() {
    let grid = Grid::new(8).unwrap();
    let p = PlasmaParams::default();
    let u = limit::random_prepared(&grid, &p, 3, 1.0, 0.2).unwrap();
    for eps in [0.1, 0.01] {
        let ue = emtf_initial(&grid, &p, &u, eps).unwrap();
        let f = physical_fields(&grid, &p, eps, &ue).unwrap();
        for n in f.n_e.iter().chain(&f.n_i) {
            assert!((n - (1.0 + eps * 0.2)).abs() < 1e-14, "{n}");
        }
        let g = emtf::gauss_residual(&grid, &p, eps, &ue).unwrap();
        assert!(g.charge < 1e-14 && g.div_b < 1e-14);
    }
}

#[test]
fn recipes_produce_prepared_states() {
    for recipe in [Recipe::PreparedRandom, Recipe::Irrotational, Recipe::SingleMode] {
        let mut cfg = small_config(Model::Eslm);
        cfg.initial.recipe = recipe;
        let grid = runs::grid_of(&cfg).unwrap();
        let u = initial_state(&cfg).unwrap();
        assert!(u.norm() > 0.0);
        limit::check_prepared(&grid, &cfg.plasma, &u, 1e-11).unwrap();
    }
}

#[test]
fn single_epsilon_study_warns_without_ratios() {
    let mut cfg = small_config(Model::Emtf);
    cfg.epsilon = Some(0.2);
    cfg.t_end = 0.02;
    cfg.snapshot_interval = Some(0.01);
    let report = convergence_study(&cfg, None).unwrap();
    assert_eq!(report.entries.len(), 1);
    assert!(report.entries[0].ratio.is_none());
    assert!(!report.warnings.is_empty());
    assert!(report.fitted_slope.is_none());
    assert!(!report.converged);
    assert!(report.failure.is_none());
}

#[test]
fn command_line_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("out");
    // the only test that touches the output root variable
    std::env::set_var(runs::OUTPUT_ENV, &root);

    let cfg_path = dir.path().join("p.toml");
    std::fs::write(&cfg_path, "grid = 8\nmodel = \"paired\"\nT = 0.05\nseed = 1\n").unwrap();
    let cfg = cfg_path.to_str().unwrap();
    assert_eq!(main_with_args(["twofluid", "run", "--config", cfg]), EXIT_PASS);
    let run_dir = std::fs::read_dir(&root).unwrap().next().unwrap().unwrap().path();
    assert!(run_dir.join("run.json").exists() && run_dir.join("eslm.csv").exists());
    assert_eq!(main_with_args(["twofluid", "diag", "--traj", run_dir.to_str().unwrap()]), EXIT_PASS);

    assert_eq!(main_with_args(["twofluid", "run", "--config", cfg, "--override", "grid=15"]), EXIT_CONFIG_ERROR);
    assert_eq!(main_with_args(["twofluid", "run", "--config", "/nonexistent.toml"]), EXIT_CONFIG_ERROR);
    assert_eq!(main_with_args(["twofluid", "verify", "--kmax", "1"]), EXIT_CONFIG_ERROR);
    assert_eq!(main_with_args(["twofluid", "frobnicate"]), EXIT_CONFIG_ERROR);

    let report = dir.path().join("v.json");
    let r = report.to_str().unwrap();
    assert_eq!(main_with_args(["twofluid", "verify", "--kmax", "2", "--out", r]), EXIT_PASS);
    assert_eq!(
        main_with_args(["twofluid", "verify", "--kmax", "2", "--fault", "flip-w3", "--out", r]),
        EXIT_VERIFICATION_FAILURE
    );
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let check = |name: &str| json["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()["passed"].clone();
    assert_eq!(check("orthonormality"), true);
    assert_eq!(check("annihilation"), false);

    // raw velocities → prepare → bridge both ways
    let grid = Grid::new(8).unwrap();
    let p = PlasmaParams::default();
    let (ve, vi) = limit::irrotational_velocities(&grid, &p, 5, 1.0).unwrap();
    let raw = dir.path().join("raw.snap");
    save_snapshot(&raw, &Snapshot::from_velocities(&grid, &ve, &vi, 0.0).unwrap()).unwrap();
    let (prep, x, back) = (dir.path().join("prep.snap"), dir.path().join("x.snap"), dir.path().join("back.snap"));
    let s = |p: &std::path::Path| p.to_str().unwrap().to_string();
    assert_eq!(main_with_args(["twofluid", "prepare", "--in", &s(&raw), "--out", &s(&prep)]), EXIT_PASS);
    assert_eq!(main_with_args(["twofluid", "bridge", "--dir", "slm2xmhd", "--in", &s(&prep), "--out", &s(&x)]), EXIT_PASS);
    assert_eq!(main_with_args(["twofluid", "bridge", "--dir", "xmhd2slm", "--in", &s(&x), "--out", &s(&back)]), EXIT_PASS);
    let a = load_snapshot(&prep, None).unwrap().to_state(&grid).unwrap();
    let b = load_snapshot(&back, None).unwrap().to_state(&grid).unwrap();
    assert!(a.sub(&b).unwrap().norm() <= 1e-12 * a.norm());
    // a raw (unprepared) state cannot be bridged
    assert_ne!(main_with_args(["twofluid", "bridge", "--dir", "slm2xmhd", "--in", &s(&raw), "--out", &s(&x)]), EXIT_PASS);
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn koopman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_koopman"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = koopman(args);
    assert!(
        out.status.success(),
        "koopman {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_csv(p: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

/// Small torus run shared by several tests.
fn small_pipeline(out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["pipeline", "-n", "400", "-q", "1,20", "-m", "8", "-o", s(out)];
    args.extend_from_slice(extra);
    ok(&args)
}

#[test]
fn generate_writes_table_of_requested_shape() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["generate", "-n", "1000", "-o", s(dir.path())]);
    let (header, rows) = read_csv(&dir.path().join("trajectory.csv"));
    assert_eq!(header, "f0,f1,f2");
    assert_eq!(rows.len(), 1000);
    assert!(rows.iter().all(|r| r.len() == 3));
    let meta = fs::read_to_string(dir.path().join("trajectory.meta.toml")).unwrap();
    assert!(meta.contains("fayad_torus_product"), "{meta}");
}

#[test]
fn generate_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["generate", "--system", "l63-product", "-n", "500", "--seed", "7", "-o", s(&a)]);
    ok(&["generate", "--system", "l63-product", "-n", "500", "--seed", "7", "-o", s(&b)]);
    assert_eq!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(b.join("trajectory.csv")).unwrap()
    );
    let c = dir.path().join("c");
    ok(&["generate", "--system", "l63-product", "-n", "500", "--seed", "8", "-o", s(&c)]);
    assert_ne!(
        fs::read(a.join("trajectory.csv")).unwrap(),
        fs::read(c.join("trajectory.csv")).unwrap()
    );
}

#[test]
fn spinup_changes_first_sample() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    ok(&["generate", "--system", "l63-pure", "-n", "10", "--spinup", "0", "-o", s(&a)]);
    ok(&["generate", "--system", "l63-pure", "-n", "10", "--spinup", "100", "-o", s(&b)]);
    let (_, ra) = read_csv(&a.join("trajectory.csv"));
    let (_, rb) = read_csv(&b.join("trajectory.csv"));
    assert_ne!(ra[0], rb[0]);
}

#[test]
fn pipeline_sweep_emits_every_artifact_per_q() {
    let dir = tempfile::tempdir().unwrap();
    small_pipeline(dir.path(), &[]);
    for q in [1usize, 20] {
        let qd = dir.path().join(format!("q{q}"));
        for f in [
            "eigenvalues.csv",
            "eigenfunctions.csv",
            "bandwidth.csv",
            "v_matrix.csv",
            "gammas.csv",
            "z_series.csv",
            "kernel_stats.toml",
            "spectrum_stats.toml",
            "galerkin_stats.toml",
        ] {
            assert!(qd.join(f).exists(), "missing {f} for Q={q}");
        }
        let (header, rows) = read_csv(&qd.join("eigenvalues.csv"));
        assert_eq!(header, "j,lambda,eta,residual");
        assert_eq!(rows.len(), 9);
        assert!((rows[0][1] - 1.0).abs() < 1e-10);
        let (_, phis) = read_csv(&qd.join("eigenfunctions.csv"));
        assert_eq!(phis.len(), 400 - q + 1);
        assert_eq!(phis[0].len(), 2 + 8);
        let (_, v) = read_csv(&qd.join("v_matrix.csv"));
        assert_eq!((v.len(), v[0].len()), (9, 10));
        let (header, g) = read_csv(&qd.join("gammas.csv"));
        assert!(header.starts_with("rank,re,im,energy"));
        assert_eq!(g.len(), 8);
        assert!(g.windows(2).all(|w| w[0][3] <= w[1][3]), "energies ascending");
    }
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    for key in ["[versions]", "[config]", "[trajectory]", "[[runs]]", "kernel_cache_hit", "[runs.seconds]"] {
        assert!(manifest.contains(key), "{key} not in manifest");
    }
}

#[test]
fn rerun_hits_kernel_cache() {
    let dir = tempfile::tempdir().unwrap();
    small_pipeline(dir.path(), &[]);
    let first = fs::read_to_string(dir.path().join("q20/gammas.csv")).unwrap();
    let out = small_pipeline(dir.path(), &[]);
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("cache hit: kernel for Q=20"), "{log}");
    let manifest = fs::read_to_string(dir.path().join("manifest.toml")).unwrap();
    assert_eq!(manifest.matches("kernel_cache_hit = true").count(), 2);
    assert_eq!(first, fs::read_to_string(dir.path().join("q20/gammas.csv")).unwrap());

    // a different m reuses the kernel but not the spectrum
    let out = ok(&["pipeline", "-n", "400", "-q", "1,20", "-m", "6", "-o", s(dir.path())]);
    let log = String::from_utf8_lossy(&out.stderr);
    assert!(log.contains("cache hit: kernel for Q=1"), "{log}");
    assert!(!log.contains("cache hit: spectrum"), "{log}");
}

fn tables(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = ["q1", "q20"]
        .iter()
        .flat_map(|q| fs::read_dir(dir.join(q)).unwrap().map(|e| e.unwrap().path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    v.sort();
    v
}

#[test]
fn manifest_alone_reproduces_every_table() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    small_pipeline(&a, &["--system", "l63-product", "--seed", "3", "--scheme", "central"]);
    let manifest = a.join("manifest.toml");
    ok(&["pipeline", "--from-manifest", s(&manifest), "-o", s(&b)]);
    let ta = tables(&a);
    assert!(ta.len() >= 12);
    for pa in ta {
        let pb = b.join(pa.strip_prefix(&a).unwrap());
        let (ha, ra) = read_csv(&pa);
        let (hb, rb) = read_csv(&pb);
        assert_eq!(ha, hb);
        assert_eq!(ra.len(), rb.len());
        for (x, y) in ra.iter().flatten().zip(rb.iter().flatten()) {
            let same = (x.is_nan() && y.is_nan()) || (x - y).abs() <= 1e-12 * (1.0 + x.abs());
            assert!(same, "{}: {x} vs {y}", pa.display());
        }
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("o");
    fs::write(
        &cfg,
        format!("system = \"circle_rotation\"\nn = 300\nq = [5]\nm = 4\nout = \"{}\"\n", s(&out)),
    )
    .unwrap();
    ok(&["spectrum", "-c", s(&cfg), "-q", "7"]);
    assert!(out.join("q7/eigenvalues.csv").exists());
    assert!(!out.join("q5").exists());
    assert!(!out.join("q7/gammas.csv").exists());
    let (_, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(rows[0].len(), 2);
}

#[test]
fn external_data_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["generate", "-n", "300", "-o", s(&a)]);
    let data = a.join("trajectory.csv");
    let b = dir.path().join("b");
    ok(&["kernel", "--data", s(&data), "--header", "true", "-q", "3", "-o", s(&b)]);
    assert_eq!(fs::read(&data).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
    assert!(b.join("q3/kernel_stats.toml").exists());
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("o");

    let out = koopman(&["pipeline", "--dt", "-1", "--epsilon", "wide", "--theta", "-2", "-o", s(&o)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    for key in ["dt", "epsilon", "theta"] {
        assert!(err.contains(key), "{err}");
    }

    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "bogus_key = 3\n").unwrap();
    assert_eq!(koopman(&["generate", "-c", s(&cfg)]).status.code(), Some(2));

    let missing = dir.path().join("nope.csv");
    let out = koopman(&["pipeline", "--data", s(&missing), "-o", s(&o)]);
    assert_eq!(out.status.code(), Some(3));

    // a vanishing bandwidth leaves only self-loops
    let out = koopman(&["pipeline", "-n", "200", "-q", "3", "-m", "4", "--epsilon", "1e-300", "-o", s(&o)]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("spectrum stage"));
}

#[test]
fn diagnose_needs_pipeline_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = koopman(&["diagnose", "-o", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `pipeline` first"));

    ok(&["kernel", "-n", "300", "-q", "4", "-o", s(dir.path())]);
    let out = koopman(&["diagnose", "-o", s(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `pipeline` first"));
}

#[test]
fn diagnose_writes_cross_q_tables() {
    let dir = tempfile::tempdir().unwrap();
    small_pipeline(dir.path(), &[]);
    let out = ok(&["diagnose", "-o", s(dir.path())]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("Q=20"));
    let d = dir.path().join("diagnostics");
    let (h, rows) = read_csv(&d.join("commutator.csv"));
    assert_eq!(h, "q,commutator,ratio_to_smallest_q");
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][2], 1.0);
    let (_, gaps) = read_csv(&d.join("pair_gaps.csv"));
    assert_eq!(gaps.len(), 8);
    assert!(gaps.iter().all(|r| r[2] >= 0.0));
    let (_, dir_rows) = read_csv(&d.join("dirichlet.csv"));
    assert_eq!(dir_rows.len(), 12);
    for f in ["dispersion.csv", "skew.csv"] {
        assert!(d.join(f).exists());
    }
}

#[test]
fn parallel_sweep_matches_sequential() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    small_pipeline(&a, &[]);
    small_pipeline(&b, &["--parallel-q", "true"]);
    for pa in tables(&a) {
        let pb = b.join(pa.strip_prefix(&a).unwrap());
        assert_eq!(fs::read(&pa).unwrap(), fs::read(&pb).unwrap(), "{}", pa.display());
    }
}

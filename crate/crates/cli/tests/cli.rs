use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fmcw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmcw")).args(args).output().expect("run fmcw")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn small_htable(dir: &TempDir) -> PathBuf {
    let p = dir.path().join("h.csv");
    let o = fmcw(&["hfit", "--out", s(&p), "--snr-min", "-20", "--snr-max", "60", "--snr-step", "5", "--samples", "2000"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    p
}

/// Parses `d_hat_m,v_hat_mps,objective,runtime_ms` output.
fn estimate_row(o: &Output) -> Vec<f64> {
    let out = stdout(o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("d_hat_m,v_hat_mps,objective,runtime_ms"));
    lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect()
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.cfg", "seed = 5\ntarget.d_m = 42\n");
    let (a, b) = (dir.path().join("a.bin"), dir.path().join("b.bin"));
    for out in [&a, &b] {
        let o = fmcw(&["simulate", "--config", s(&cfg), "--out", s(out)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let (x, y) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(x, y);
    assert_eq!(&x[..8], b"FMCWMEAS");
    let o = fmcw(&["simulate", "--config", s(&cfg), "--out", s(&b), "--seed", "6"]);
    assert_eq!(code(&o), 0);
    assert_ne!(std::fs::read(&b).unwrap(), x);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("m.bin");
    let cfg = write_config(&dir, "bad.cfg", "seed = 1\ntarget.d_m = -5\n");
    let o = fmcw(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("target.d_m") && stderr(&o).contains("line 2"), "{}", stderr(&o));

    let cfg = write_config(&dir, "unknown.cfg", "acq.sample_rate = 1e9\n");
    let o = fmcw(&["simulate", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("acq.sample_rate"));

    let o = fmcw(&["simulate", "--config", s(&dir.path().join("absent.cfg")), "--out", s(&out)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn estimate_noiseless_iff_and_exit_codes() {
    let dir = TempDir::new().unwrap();
    let h = small_htable(&dir);
    let cfg = write_config(&dir, "c.cfg", "target.d_m = 250.125\n");
    let meas = dir.path().join("m.bin");
    let o = fmcw(&["simulate", "--config", s(&cfg), "--out", s(&meas), "--noiseless"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let o = fmcw(&["estimate", s(&meas), "--method", "iff", "--htable", s(&h)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let row = estimate_row(&o);
    assert!((row[0] - 250.125).abs() < 5e-3, "{row:?}");
    assert!(row[3] >= 0.0);

    let o = fmcw(&["estimate", s(&meas), "--method", "iff"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("hfit"));

    let o = fmcw(&["estimate", s(&meas), "--method", "tsuchida"]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));

    let o = fmcw(&["estimate", s(&meas), "--method", "bogus"]);
    assert_eq!(code(&o), 2);

    // aliased beat frequencies: the estimate completes even though it is wrong
    let o = fmcw(&["estimate", s(&meas), "--method", "periodogram"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!((estimate_row(&o)[0] - 250.125).abs() > 1.0);

    std::fs::write(&meas, b"not a measurement").unwrap();
    let o = fmcw(&["estimate", s(&meas), "--method", "mf"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_outputs_and_determinism() {
    let dir = TempDir::new().unwrap();
    let h = small_htable(&dir);
    let text = format!(
        "seed = 11\nsweep.distances_m = 20, 90\nsweep.methods = lorentzian, iff\nsweep.trials = 3\niff.htable = {}\n",
        h.display()
    );
    let cfg = write_config(&dir, "s.cfg", &text);
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let o = fmcw(&["sweep", "--config", s(&cfg), "--out", s(&a)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = fmcw(&["sweep", "--config", s(&cfg), "--out", s(&b), "--jobs", "1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let records = std::fs::read_to_string(&a).unwrap();
    let mut lines = records.lines();
    assert_eq!(
        lines.next(),
        Some("distance_m,velocity_mps,method,trial,seed,d_hat_m,v_hat_mps,abs_err_d_m,abs_err_v_mps,runtime_ms,converged")
    );
    assert_eq!(lines.count(), 2 * 2 * 3);
    let sa = std::fs::read_to_string(dir.path().join("a_summary.csv")).unwrap();
    let sb = std::fs::read_to_string(dir.path().join("b_summary.csv")).unwrap();
    assert_eq!(sa, sb);
    assert!(sa.starts_with("distance_m,velocity_mps,method,rmse_d,rmse_v,se_std\n"));
    assert_eq!(sa.lines().count(), 1 + 4);
}

#[test]
fn sweep_single_trial_rmse_is_abs_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "s.cfg", "sweep.distances_m = 40\nsweep.methods = mf\nsweep.trials = 1\n");
    let out = dir.path().join("r.csv");
    let o = fmcw(&["sweep", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rec = std::fs::read_to_string(&out).unwrap();
    let err: f64 = rec.lines().nth(1).unwrap().split(',').nth(7).unwrap().parse().unwrap();
    let sum = std::fs::read_to_string(dir.path().join("r_summary.csv")).unwrap();
    let rmse: f64 = sum.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse().unwrap();
    assert!((rmse - err).abs() <= 1e-12 * err.max(1.0));
}

#[test]
fn sweep_rejects_bad_specs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.csv");
    let cfg = write_config(&dir, "e.cfg", "sweep.methods = ,\n");
    assert_eq!(code(&fmcw(&["sweep", "--config", s(&cfg), "--out", s(&out)])), 2);
    let cfg = write_config(&dir, "far.cfg", "sweep.distances_m = 700\nsweep.methods = mf\n");
    assert_eq!(code(&fmcw(&["sweep", "--config", s(&cfg), "--out", s(&out)])), 2);
    let cfg = write_config(&dir, "iff.cfg", "sweep.methods = iff\n");
    assert_eq!(code(&fmcw(&["sweep", "--config", s(&cfg), "--out", s(&out)])), 3);
}

fn bound_rows(o: &Output) -> Vec<(String, f64)> {
    assert_eq!(code(o), 0, "{}", stderr(o));
    stdout(o)
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[1].parse().unwrap())
        })
        .collect()
}

#[test]
fn bounds_crb_below_mcrb() {
    let dir = TempDir::new().unwrap();
    let h = small_htable(&dir);
    let cfg = write_config(&dir, "b.cfg", "bounds.distances_m = 30, 150, 420\n");
    let crb = bound_rows(&fmcw(&["bounds", "--config", s(&cfg), "--method", "crb", "--htable", s(&h)]));
    let mcrb = bound_rows(&fmcw(&["bounds", "--config", s(&cfg), "--method", "mcrb", "--htable", s(&h)]));
    assert_eq!(crb.len(), 3);
    for (c, m) in crb.iter().zip(&mcrb) {
        assert_eq!(c.0, m.0);
        assert!(c.1 <= m.1 * (1.0 + 1e-9), "{c:?} {m:?}");
    }
}

#[test]
fn bounds_awgn_scales_with_sampling_rate() {
    let dir = TempDir::new().unwrap();
    let a = write_config(&dir, "a.cfg", "bounds.distances_m = 50\n");
    let b = write_config(&dir, "b.cfg", "bounds.distances_m = 50\nacq.fs_hz = 400e6\n");
    let va = bound_rows(&fmcw(&["bounds", "--config", s(&a), "--method", "awgn-cbf"]))[0].1;
    let vb = bound_rows(&fmcw(&["bounds", "--config", s(&b), "--method", "awgn-cbf"]))[0].1;
    assert!((vb / va - 0.5).abs() < 2e-3, "{}", vb / va);
}

#[test]
fn bounds_mmcrb_table() {
    let o = fmcw(&["bounds", "--method", "mmcrb"]);
    let rows = bound_rows(&o);
    let names: Vec<&str> = rows.iter().map(|r| r.0.as_str()).collect();
    assert_eq!(names, ["triangular", "sinusoidal", "smooth-stair"]);
    for ((_, v), want) in rows.iter().zip([5.362e-2, 4.820e-2, 3.214e-2]) {
        assert!((v.sqrt() / want - 1.0).abs() < 0.03, "{} vs {want}", v.sqrt());
    }
}

#[test]
fn hfit_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o = fmcw(&["hfit", "--out", s(p), "--seed", "3", "--samples", "2000"]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    assert!(text.starts_with("# samples_per_point=2000 seed=3\nsnr_db,variance\n"));
    let rows: Vec<(f64, f64)> = text
        .lines()
        .skip(2)
        .map(|l| {
            let (x, y) = l.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.first().unwrap().0, -30.0);
    assert_eq!(rows.last().unwrap().0, 40.0);
    assert!(rows.windows(2).all(|w| w[1].1 <= w[0].1));
    let o = fmcw(&["hfit", "--out", s(&a), "--snr-min", "10", "--snr-max", "0"]);
    assert_eq!(code(&o), 2);
}

use std::path::PathBuf;
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("arh1-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn arh1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arh1")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

#[test]
fn table_run_is_reproducible() {
    let dir = scratch("table");
    let out = dir.to_str().unwrap();
    let args = ["table", "2", "--scale-N", "0.05", "--scale-n", "0.1", "--seed", "11", "--out", out];
    let first = arh1(&args);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stderr));
    let csv = std::fs::read_to_string(dir.join("table2.csv")).unwrap();
    assert!(csv.starts_with("table,n,k_n,method,metric,value,paper_value,N,seed\n"));
    // 3 sample sizes x 3 methods
    assert_eq!(csv.lines().count(), 10);
    assert!(csv.lines().skip(1).all(|l| l.split(',').count() == 9));
    let meta = std::fs::read_to_string(dir.join("table2.meta")).unwrap();
    assert!(meta.contains("config_hash = "));
    assert!(dir.join("table2_bosq_error.dat").exists());
    assert_eq!(code(&arh1(&args)), 0);
    assert_eq!(std::fs::read_to_string(dir.join("table2.csv")).unwrap(), csv);
}

#[test]
fn unscaled_rows_carry_printed_values() {
    let dir = scratch("paper");
    let o = arh1(&["table", "1", "--scale-N", "0.05", "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let csv = std::fs::read_to_string(dir.join("table1.csv")).unwrap();
    let row = csv.lines().find(|l| l.starts_with("1,15000,6,componentwise/alpha5,emse")).unwrap();
    assert_eq!(row.split(',').nth(6), Some("3.74e-4"));
}

#[test]
fn config_errors_exit_2() {
    let dir = scratch("config");
    let bad = dir.join("bad.cfg");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let out = dir.to_str().unwrap();
    assert_eq!(code(&arh1(&["estimate", "--config", bad.to_str().unwrap(), "--out", out])), 2);
    assert_eq!(code(&arh1(&["table", "1", "--scale-n", "0.00001", "--out", out])), 2);
    assert_eq!(code(&arh1(&["table", "12", "--out", out])), 2);
    assert_eq!(code(&arh1(&["table", "1", "--scale-N", "2", "--out", out])), 2);
    assert_eq!(code(&arh1(&["estimate", "--config", "/nonexistent/file.cfg"])), 2);
    assert_eq!(code(&arh1(&["frobnicate"])), 2);
}

#[test]
fn numerical_failure_exits_3() {
    let dir = scratch("numeric");
    let cfg = dir.join("rank.cfg");
    // 20 simulated components cannot support a rank-30 inverse
    std::fs::write(&cfg, "n_grid = 200\nN = 1\nmodel.components = 20\nbasis = empirical\ngrid.p = 64\nestimators = fpca\nfpca.q = 30\n").unwrap();
    let o = arh1(&["estimate", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn simulate_and_estimate_from_config() {
    let dir = scratch("sim");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "# small empirical run\nn_grid = 300, 600\nN = 3\nbasis = empirical\ngrid.h_t = 0.08\nestimators = componentwise, bosq\ntruncation.kind = log_n\n",
    )
    .unwrap();
    let out = dir.to_str().unwrap();
    let o = arh1(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let coeffs = std::fs::read_to_string(dir.join("coefficients.csv")).unwrap();
    assert_eq!(coeffs.lines().count(), 301);
    let curves = std::fs::read_to_string(dir.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next().unwrap().split(',').count(), 52);
    let o = arh1(&["estimate", "--config", cfg.to_str().unwrap(), "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.join("estimate.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn oracle_and_rates() {
    let dir = scratch("oracle");
    let out = dir.to_str().unwrap();
    let o = arh1(&["oracle", "--scale-N", "0.02", "--out", out]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(dir.join("oracle.csv")).unwrap();
    assert_eq!(text.lines().count(), 17);
    let o = arh1(&["rates", "--scale-N", "0.1", "--scale-n", "0.1", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("emse slope"));
    assert!(dir.join("rates_fit.csv").exists());
    assert!(dir.join("rates_reference_emse.dat").exists());
}

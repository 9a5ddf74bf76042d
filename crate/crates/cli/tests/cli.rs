use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn egp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_egp"))
        .args(args)
        .env("NO_COLOR", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Data rows (comment and header stripped) split into fields.
fn rows(o: &Output) -> Vec<Vec<String>> {
    let text = stdout(o);
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config: command="));
    lines.next().expect("header row");
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn header(o: &Output) -> String {
    stdout(o).lines().nth(1).unwrap().to_string()
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(name)
}

fn f(s: &str) -> f64 {
    s.parse().unwrap()
}

#[test]
fn flux_sweep_columns_and_sudden_limit() {
    let o = egp(&["flux-sweep", "--period-list", "0.01,1"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(header(&o), "AT,phi,phi_adiabatic");
    let r = rows(&o);
    assert_eq!(r.len(), 2);
    assert!(f(&r[0][1]).abs() < 0.01);
    for row in &r {
        assert!((f(&row[2]) - 0.59907).abs() < 1e-5);
    }
}

#[test]
fn flux_sweep_approaches_the_adiabatic_value() {
    let o = egp(&["flux-sweep", "--period-list", "100"]);
    assert_eq!(code(&o), 0);
    assert!((f(&rows(&o)[0][1]) - 0.59907).abs() < 0.01);
}

#[test]
fn empty_period_list_is_a_config_error() {
    let cfg = scratch("empty.toml");
    fs::write(&cfg, "period-list = []\n").unwrap();
    let o = egp(&["flux-sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert_eq!(code(&egp(&["flux-sweep", "--period-list="])), 2);
}

#[test]
fn config_file_rejects_unknown_keys_and_yields_to_flags() {
    let bad = scratch("unknown.toml");
    fs::write(&bad, "L = [4]\nsteps_per_cycle = 10\n").unwrap();
    let o = egp(&["winding", "--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("config error"));

    let good = scratch("bench.toml");
    fs::write(&good, "L = [2, 3]\nfraction = 0.1\n").unwrap();
    let o = egp(&["bench", "--config", good.to_str().unwrap(), "--L", "1,2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).starts_with("# config: command=bench L=1,2 "));
    assert!(stdout(&o).lines().next().unwrap().contains("fraction=0.1"));
    assert_eq!(rows(&o).len(), 2);
}

#[test]
fn invalid_values_exit_2() {
    assert_eq!(code(&egp(&["winding", "--offset", "1.5"])), 2);
    assert_eq!(code(&egp(&["scaling", "--L", "4,8"])), 2);
    assert_eq!(code(&egp(&["winding", "--beta", "-1"])), 2);
    assert_eq!(code(&egp(&["winding", "--loop", "moebius"])), 2);
}

#[test]
fn scaling_respects_the_decay_bound() {
    let o = egp(&["scaling", "--L", "4,8,16"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(header(&o), "L,abs_T,det_term_phase,epsilon_bound,classical_bound");
    let r = rows(&o);
    assert_eq!(r.len(), 3);
    for (i, row) in r.iter().enumerate() {
        let abs_t = f(&row[1]);
        assert!(abs_t > 0.0);
        assert!(2.0 * f(&row[2]).abs() <= f(&row[3]));
        if i > 0 {
            assert!(abs_t < f(&r[i - 1][1]));
        }
    }
}

#[test]
fn thermal_pump_has_no_winding_but_zak_winds() {
    let o = egp(&["winding", "--loop", "rmm-thermal", "--zak"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let err = stderr(&o);
    assert!(err.contains("ΔP = 0, M = 0"));
    assert!(err.contains("Zak winding 1"));
    assert_eq!(header(&o), "loop,L,seed,lambda,p_unwrapped,abs_t,det_term_phase,im_mean_term");
}

#[test]
fn squeezed_loops_over_twenty_seeds() {
    let o = egp(&["winding", "--loop", "random-squeezed", "--count", "20", "--L", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stderr(&o).matches("ΔP = 0, M = 0").count(), 20);
}

#[test]
fn winding_output_is_deterministic() {
    let a = egp(&["winding", "--loop", "random-classical", "--count", "2", "--seed", "7"]);
    let b = egp(&["winding", "--loop", "random-classical", "--count", "2", "--seed", "7"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let seeds: Vec<String> = rows(&a).iter().map(|r| r[2].clone()).collect();
    let first_eight = seeds.iter().position(|s| s == "8").unwrap();
    assert!(seeds[..first_eight].iter().all(|s| s == "7"));
}

#[test]
fn detector_alarm_exits_4() {
    let o = egp(&["winding", "--inject-fault"]);
    assert_eq!(code(&o), 4);
    assert!(stderr(&o).contains("theorem violation"));
}

#[test]
fn oracle_check_gates() {
    let o = egp(&["oracle-check"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(rows(&o).iter().all(|r| f(&r[2]) <= 1e-8 && f(&r[3]) <= 1e-8));
    assert_eq!(code(&egp(&["oracle-check", "--inject-fault"])), 5);
    assert_eq!(code(&egp(&["oracle-check", "--cutoff", "2"])), 3);
}

#[test]
fn bench_writes_to_file() {
    let path = scratch("bench.csv");
    let o = egp(&["bench", "--L", "1,4,8", "--output", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = fs::read_to_string(&path).unwrap();
    let mut lines = text.lines().skip(1);
    assert_eq!(lines.next().unwrap(), "L,n,dense_seconds,reduced_seconds,relative_det_error");
    for line in lines {
        let err: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(err <= 1e-10);
    }
}

#[test]
fn chern_family_has_zero_polarization_chern_number() {
    let o = egp(&["chern", "--L", "4", "--samples", "16"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stderr(&o).contains("polarization Chern 0"));
    let r = rows(&o);
    let first = f(&r[0][2]);
    let last = f(&r[r.len() - 1][2]);
    assert!((last - first).abs() < 1e-6);
}

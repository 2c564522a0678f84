//! End-to-end tests of the binary: golden-file determinism, exit codes, and
//! report structure.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_bunchkit")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("spawn bunchkit")
}

fn run_ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn tmp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bunchkit-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_else(|e| panic!("read {path:?}: {e}"))
}

fn simulate_into(dir: &Path, extra: &[&str]) {
    let mut args = vec![
        "simulate",
        "--output-dir",
        dir.to_str().unwrap(),
        "--seed",
        "11",
        "--n-workers",
        "400",
        "--n-weeks",
        "6",
        "--n-firms",
        "20",
        "--p-mass",
        "0.06",
        "--pto-prob",
        "0.15",
        "--snap",
    ];
    args.extend_from_slice(extra);
    run_ok(&args);
}

#[test]
fn golden_artifacts_are_reproducible_across_runs_and_threads() {
    let d1 = tmp_dir("gold1");
    let d2 = tmp_dir("gold2");
    simulate_into(&d1, &["--threads", "2"]);
    simulate_into(&d2, &["--threads", "1"]);
    for name in ["paychecks.csv", "latent.csv", "simulate_report.json"] {
        assert_eq!(read(&d1.join(name)), read(&d2.join(name)), "{name} differs");
    }

    let input = d1.join("paychecks.csv");
    let before = read(&input);
    let e1 = tmp_dir("est1");
    let e2 = tmp_dir("est2");
    for (dir, threads) in [(&e1, "2"), (&e2, "1")] {
        run_ok(&[
            "estimate",
            "--input",
            input.to_str().unwrap(),
            "--output-dir",
            dir.to_str().unwrap(),
            "--seed",
            "5",
            "--reps",
            "80",
            "--p-method",
            "pto",
            "--threads",
            threads,
        ]);
    }
    assert_eq!(
        read(&e1.join("estimate_report.json")),
        read(&e2.join("estimate_report.json")),
        "estimate reports differ across thread counts"
    );
    // inputs are never mutated
    assert_eq!(before, read(&input));
}

#[test]
fn estimate_with_fixed_p_reports_one_method() {
    let d = tmp_dir("fixedp");
    simulate_into(&d, &[]);
    let out = tmp_dir("fixedp-est");
    run_ok(&[
        "estimate",
        "--input",
        d.join("paychecks.csv").to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--reps",
        "40",
        "--p-method",
        "fixed",
        "--p-value",
        "0",
    ]);
    let text = String::from_utf8(read(&out.join("estimate_report.json"))).unwrap();
    assert!(text.contains("\"p_method\": \"fixed\""));
    assert!(text.contains("\"p\": 0.0"));
    assert_eq!(text.matches("\"p_method\"").count(), 2); // config + estimate
    assert!(text.contains("\"ate_lower\""));
    assert!(text.contains("\"saez_epsilon\""));
}

#[test]
fn group_by_blocks_partition_the_rows() {
    // splice two simulated panels into one table with distinct
    // pay_frequency tags and disjoint worker/firm ids
    let d1 = tmp_dir("grp-a");
    let d2 = tmp_dir("grp-b");
    simulate_into(&d1, &[]);
    run_ok(&[
        "simulate",
        "--output-dir",
        d2.to_str().unwrap(),
        "--seed",
        "12",
        "--n-workers",
        "400",
        "--n-weeks",
        "6",
        "--n-firms",
        "20",
        "--p-mass",
        "0.06",
        "--pto-prob",
        "0.15",
        "--snap",
    ]);
    let a = String::from_utf8(read(&d1.join("paychecks.csv"))).unwrap();
    let b = String::from_utf8(read(&d2.join("paychecks.csv"))).unwrap();
    let mut combined = a;
    for line in b.lines().skip(1) {
        let relabeled = line
            .replacen("w", "v", 1)
            .replacen(",f", ",g", 1)
            .replace(",weekly,", ",biweekly,");
        combined.push_str(&relabeled);
        combined.push('\n');
    }
    let dir = tmp_dir("grp-mixed");
    let input = dir.join("mixed.csv");
    std::fs::write(&input, &combined).unwrap();

    let out = tmp_dir("grp-est");
    run_ok(&[
        "estimate",
        "--input",
        input.to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--seed",
        "9",
        "--reps",
        "20",
        "--p-method",
        "fixed",
        "--p-value",
        "0",
        "--group-by",
        "pay_frequency",
    ]);
    let text = String::from_utf8(read(&out.join("estimate_report.json"))).unwrap();
    assert!(text.contains("\"group\": \"weekly\""));
    assert!(text.contains("\"group\": \"biweekly\""));
    // pooled counts: each block reports its own 2400 rows
    assert_eq!(text.matches("\"n_rows\": 2400").count(), 2);
}

#[test]
fn policy_and_diagnose_emit_artifacts() {
    let d = tmp_dir("pol");
    simulate_into(&d, &[]);
    let out = tmp_dir("pol-out");
    run_ok(&[
        "policy",
        "--input",
        d.join("paychecks.csv").to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--p-method",
        "pto",
    ]);
    let report = String::from_utf8(read(&out.join("policy_report.json"))).unwrap();
    assert!(report.contains("\"effect_of_kink_lower\""));
    assert!(report.contains("\"double_time_new_buncher_valuation\": \"k_hours\""));
    let curve = String::from_utf8(read(&out.join("kink_shift_curve.csv"))).unwrap();
    assert!(curve.starts_with("k_prime,bunch_lo,bunch_hi,hours_lo,hours_hi"));
    assert!(curve.lines().count() > 10);

    let dout = tmp_dir("diag-out");
    run_ok(&[
        "diagnose",
        "--input",
        d.join("paychecks.csv").to_str().unwrap(),
        "--output-dir",
        dout.to_str().unwrap(),
    ]);
    let diag = String::from_utf8(read(&dout.join("diagnose_report.json"))).unwrap();
    assert!(diag.contains("\"bunching_mass\""));
    assert!(diag.contains("\"p_pto\""));
    let hist = String::from_utf8(read(&dout.join("histogram.csv"))).unwrap();
    assert!(hist.starts_with("bin_left,bin_right,count,share"));
}

#[test]
fn bootstrap_subcommand_dumps_replicates() {
    let d = tmp_dir("boot");
    simulate_into(&d, &[]);
    let out = tmp_dir("boot-out");
    run_ok(&[
        "bootstrap",
        "--input",
        d.join("paychecks.csv").to_str().unwrap(),
        "--output-dir",
        out.to_str().unwrap(),
        "--seed",
        "21",
        "--reps",
        "25",
        "--p-method",
        "pto",
    ]);
    let text = String::from_utf8(read(&out.join("bootstrap.json"))).unwrap();
    assert!(text.contains("\"se_ate_lower\""));
    assert!(text.matches("\"ate_upper\"").count() >= 25);
}

#[test]
fn exit_codes_distinguish_failure_classes() {
    // usage: missing required --seed
    let usage = run(&[
        "estimate",
        "--input",
        "/tmp/x.csv",
        "--output-dir",
        "/tmp/y",
    ]);
    assert_eq!(usage.status.code(), Some(1), "usage errors exit 1");

    // I/O: input file does not exist
    let io = run(&[
        "estimate",
        "--input",
        "/definitely/not/here.csv",
        "--output-dir",
        "/tmp/y",
        "--seed",
        "1",
    ]);
    assert_eq!(io.status.code(), Some(4), "io errors exit 4");

    // data validation: malformed CSV
    let dir = tmp_dir("badcsv");
    let bad = dir.join("bad.csv");
    std::fs::write(&bad, "not,a,paycheck\n1,2,3\n").unwrap();
    let data = run(&[
        "estimate",
        "--input",
        bad.to_str().unwrap(),
        "--output-dir",
        dir.to_str().unwrap(),
        "--seed",
        "1",
    ]);
    assert_eq!(data.status.code(), Some(2), "data errors exit 2");

    // estimation infeasibility: fixed p above the bunching mass
    let d = tmp_dir("infeas");
    simulate_into(&d, &[]);
    let inf = run(&[
        "estimate",
        "--input",
        d.join("paychecks.csv").to_str().unwrap(),
        "--output-dir",
        d.to_str().unwrap(),
        "--seed",
        "1",
        "--p-method",
        "fixed",
        "--p-value",
        "0.99",
    ]);
    assert_eq!(inf.status.code(), Some(3), "estimation errors exit 3");
}

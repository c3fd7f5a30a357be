//! End-to-end tests of the binary: every subcommand through a real
//! process, with exit codes, file outputs, and stream contents checked
//! against the documented contracts.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use svdmarg::{generate_synthetic, CovMode, Hyperparams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_svdmarg"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}, stderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: &Path) -> Value {
    let text = std::fs::read_to_string(path).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn gen_into(dir: &Path, n: usize, k: usize, seed: u64) {
    let out = run_in(
        dir,
        &[
            "gen",
            "--n",
            &n.to_string(),
            "--k",
            &k.to_string(),
            "--seed",
            &seed.to_string(),
            "--out-dir",
            ".",
        ],
    );
    assert_ok(&out);
}

fn fit_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["fit", "--x", "X.csv", "--y", "y.csv", "--out", "summary.json"];
    args.extend_from_slice(extra);
    args
}

#[test]
fn gen_is_byte_identical_per_seed_and_rejects_empty_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = run_in(
            dir.path(),
            &["gen", "--n", "40", "--k", "3", "--seed", "7", "--out-dir", d.to_str().unwrap()],
        );
        assert_ok(&out);
    }
    for name in ["X.csv", "y.csv", "beta_true.csv"] {
        let left = std::fs::read(a.join(name)).unwrap();
        let right = std::fs::read(b.join(name)).unwrap();
        assert_eq!(left, right, "{name} differs between identical seeds");
        assert!(!left.is_empty());
    }

    let out = run_in(
        dir.path(),
        &["gen", "--n", "0", "--k", "3", "--seed", "7", "--out-dir", "z"],
    );
    assert_eq!(out.status.code(), Some(11));
    assert!(String::from_utf8_lossy(&out.stderr).contains("n and k"));
}

#[test]
fn fit_round_trips_the_in_memory_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 100, 10, 3);
    let out = run_in(dir.path(), &fit_args(&[]));
    assert_ok(&out);

    let json = read_json(&dir.path().join("summary.json"));
    assert_eq!(json["schema"], "svdmarg-summary-v1");
    assert_eq!(json["n"], 100);
    assert_eq!(json["k"], 10);
    assert_eq!(json["cov_mode"], "exact");
    assert_eq!(json["grid"]["nodes_per_axis"], 200);

    // The CSV layer is lossless and the pipeline is deterministic, so
    // the round trip reproduces the in-memory summary exactly, well
    // inside the documented 1e-15.
    let (data, _) = generate_synthetic::<f64>(100, 10, 3);
    let (expected, _) = svdmarg::fit(&data, &Hyperparams::default(), CovMode::Exact).unwrap();
    assert_eq!(json["mean_sigma1"].as_f64().unwrap(), expected.mean_sigma1);
    assert_eq!(json["mean_sigma2"].as_f64().unwrap(), expected.mean_sigma2);
    assert_eq!(json["var_sigma1"].as_f64().unwrap(), expected.var_sigma1);
    for i in 0..10 {
        assert_eq!(
            json["mean_beta"][i].as_f64().unwrap(),
            expected.mean_beta[i],
            "mean_beta[{i}]"
        );
        for j in 0..10 {
            assert_eq!(
                json["cov_beta"][i][j].as_f64().unwrap(),
                expected.cov_beta[(i, j)],
                "cov_beta[{i}][{j}]"
            );
        }
    }

    // Model floats carry 17 significant digits in the document text.
    let text = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let line = text
        .lines()
        .find(|l| l.contains("\"mean_sigma1\""))
        .unwrap();
    let digits = line
        .split(": ")
        .nth(1)
        .unwrap()
        .trim_end_matches(',')
        .split('e')
        .next()
        .unwrap()
        .chars()
        .filter(|c| c.is_ascii_digit())
        .count();
    assert_eq!(digits, 17, "not 17 significant digits: {line}");
}

#[test]
fn cov_modes_share_means_and_differ_in_covariance() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 60, 4, 9);
    let out = run_in(dir.path(), &fit_args(&["--cov-mode", "exact"]));
    assert_ok(&out);
    let exact = read_json(&dir.path().join("summary.json"));
    let out = run_in(
        dir.path(),
        &["fit", "--x", "X.csv", "--y", "y.csv", "--cov-mode", "paper", "--out", "paper.json"],
    );
    assert_ok(&out);
    let paper = read_json(&dir.path().join("paper.json"));

    assert_eq!(exact["mean_beta"], paper["mean_beta"]);
    assert_eq!(exact["mean_sigma1"], paper["mean_sigma1"]);
    assert_ne!(exact["cov_beta"], paper["cov_beta"]);
}

#[test]
fn malformed_csv_exits_with_the_parse_code_and_cites_the_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("X.csv"), "c1,c2\n1,2\n3,oops\n4,5\n").unwrap();
    std::fs::write(dir.path().join("y.csv"), "1\n2\n3\n").unwrap();
    let out = run_in(dir.path(), &fit_args(&[]));
    assert_eq!(out.status.code(), Some(10));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3") && stderr.contains("oops"), "{stderr}");
    assert!(!dir.path().join("summary.json").exists());
}

#[test]
fn transpose_reads_the_flipped_layout() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 30, 3, 5);
    let x = svdmarg_cli::csvio::read_matrix(&dir.path().join("X.csv"), false).unwrap();
    svdmarg_cli::csvio::write_matrix(&dir.path().join("Xt.csv"), &x.transpose()).unwrap();

    let out = run_in(dir.path(), &fit_args(&[]));
    assert_ok(&out);
    let plain = read_json(&dir.path().join("summary.json"));
    let out = run_in(
        dir.path(),
        &["fit", "--x", "Xt.csv", "--y", "y.csv", "--transpose", "--out", "t.json"],
    );
    assert_ok(&out);
    let flipped = read_json(&dir.path().join("t.json"));
    assert_eq!(plain["mean_beta"], flipped["mean_beta"]);
    assert_eq!(plain["cov_beta"], flipped["cov_beta"]);
}

#[test]
fn fit_writes_to_stdout_when_out_is_dash() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 20, 2, 13);
    let out = run_in(dir.path(), &["fit", "--x", "X.csv", "--y", "y.csv", "--out", "-"]);
    assert_ok(&out);
    let json: Value = serde_json::from_slice(&out.stdout).expect("stdout should be the document");
    assert_eq!(json["schema"], "svdmarg-summary-v1");
}

#[test]
fn gen_then_fit_recovers_the_signal() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 100, 10, 3);
    let out = run_in(dir.path(), &fit_args(&[]));
    assert_ok(&out);
    let json = read_json(&dir.path().join("summary.json"));
    let truth = svdmarg_cli::csvio::read_vector(&dir.path().join("beta_true.csv")).unwrap();

    let est: Vec<f64> = (0..10).map(|i| json["mean_beta"][i].as_f64().unwrap()).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (me, mt) = (mean(&est), mean(truth.as_slice()));
    let mut num = 0.0;
    let mut de = 0.0;
    let mut dt = 0.0;
    for i in 0..10 {
        let (a, b) = (est[i] - me, truth[i] - mt);
        num += a * b;
        de += a * a;
        dt += b * b;
    }
    let r = num / (de * dt).sqrt();
    assert!(r > 0.5, "Pearson r between estimate and truth is {r:.3}");
}

#[test]
fn sample_writes_a_deterministic_chain() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 30, 3, 21);
    let args = [
        "sample", "--x", "X.csv", "--y", "y.csv", "--draws", "300", "--warmup", "100", "--seed",
        "9",
    ];
    let mut with_out = args.to_vec();
    with_out.extend(["--out", "c1.csv"]);
    assert_ok(&run_in(dir.path(), &with_out));
    let mut with_out = args.to_vec();
    with_out.extend(["--out", "c2.csv"]);
    assert_ok(&run_in(dir.path(), &with_out));

    let a = std::fs::read(dir.path().join("c1.csv")).unwrap();
    let b = std::fs::read(dir.path().join("c2.csv")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the chain byte for byte");

    let text = String::from_utf8(a).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "sigma1,sigma2,beta_1,beta_2,beta_3");
    assert_eq!(lines.len(), 301);
}

#[test]
fn bench_reference_row_reports_zero_error_at_500_nodes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["bench", "--sizes", "20x2", "--nodes", "500", "--seed", "2", "--out", "bench.csv"],
    );
    assert_ok(&out);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,k,arm,nodes,draws,precompute_s,integrate_s,sample_s,total_s,max_err"
    );
    assert_eq!(lines.len(), 2);
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&fields[..4], &["20", "2", "trap", "500"]);
    assert_eq!(fields[9].parse::<f64>().unwrap(), 0.0, "self-comparison must be exact");

    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("max_err") && table.contains("trap"), "{table}");
}

#[test]
fn bench_covers_both_arms_and_scales_with_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "bench", "--sizes", "20x2,400x12", "--arm", "both", "--draws", "400", "--warmup",
            "200", "--seed", "3", "--out", "bench.csv",
        ],
    );
    assert_ok(&out);
    let text = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][2], "trap");
    assert_eq!(rows[1][2], "svd-mcmc");
    assert_eq!(rows[1][4], "400", "sampler row carries its draw count");
    assert!(rows[1][3].is_empty(), "sampler row has no node count");

    // The sampler's first moments sit near the quadrature reference
    // even with a short chain.
    assert!(rows[1][9].parse::<f64>().unwrap() < 0.5);

    // Total quadrature time grows with n k^2 between well-separated
    // sizes.
    let total = |r: &[&str]| r[8].parse::<f64>().unwrap();
    assert!(
        total(&rows[2]) >= total(&rows[0]),
        "trap totals not nondecreasing: {} then {}",
        total(&rows[0]),
        total(&rows[2])
    );
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 25, 2, 4);
    std::fs::write(dir.path().join("svdmarg.conf"), "gamma = 4\nnodes = 120\n").unwrap();

    let out = run_in(
        dir.path(),
        &["fit", "--config", "svdmarg.conf", "--x", "X.csv", "--y", "y.csv", "--out", "a.json"],
    );
    assert_ok(&out);
    let a = read_json(&dir.path().join("a.json"));
    assert_eq!(a["gamma"].as_f64().unwrap(), 4.0);
    assert_eq!(a["grid"]["nodes_per_axis"], 120);

    let out = run_in(
        dir.path(),
        &[
            "fit", "--config", "svdmarg.conf", "--gamma", "2", "--x", "X.csv", "--y", "y.csv",
            "--out", "b.json",
        ],
    );
    assert_ok(&out);
    let b = read_json(&dir.path().join("b.json"));
    assert_eq!(b["gamma"].as_f64().unwrap(), 2.0, "explicit flag must beat the config");
    assert_eq!(b["grid"]["nodes_per_axis"], 120);

    std::fs::write(dir.path().join("bad.conf"), "gama = 4\n").unwrap();
    let out = run_in(
        dir.path(),
        &["fit", "--config", "bad.conf", "--x", "X.csv", "--y", "y.csv"],
    );
    assert_eq!(out.status.code(), Some(11));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gama"));

    std::fs::write(dir.path().join("worse.conf"), "nodes = many\n").unwrap();
    let out = run_in(
        dir.path(),
        &["fit", "--config", "worse.conf", "--x", "X.csv", "--y", "y.csv"],
    );
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
}

#[test]
fn missing_required_option_names_itself() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["fit", "--y", "y.csv"]);
    assert_eq!(out.status.code(), Some(11));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--x"));
}

#[test]
fn thread_cap_leaves_the_result_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 40, 4, 6);
    assert_ok(&run_in(dir.path(), &fit_args(&[])));
    let free = read_json(&dir.path().join("summary.json"));

    let out = bin()
        .current_dir(dir.path())
        .env("SVDMARG_THREADS", "1")
        .args(["fit", "--x", "X.csv", "--y", "y.csv", "--out", "env.json"])
        .output()
        .unwrap();
    assert_ok(&out);
    let env = read_json(&dir.path().join("env.json"));
    let capped = run_in(
        dir.path(),
        &["fit", "--threads", "1", "--x", "X.csv", "--y", "y.csv", "--out", "flag.json"],
    );
    assert_ok(&capped);
    let flag = read_json(&dir.path().join("flag.json"));

    for doc in [&env, &flag] {
        assert_eq!(free["mean_beta"], doc["mean_beta"]);
        assert_eq!(free["cov_beta"], doc["cov_beta"]);
        assert_eq!(free["mean_sigma1"], doc["mean_sigma1"]);
    }

    let out = bin()
        .current_dir(dir.path())
        .env("SVDMARG_THREADS", "abc")
        .args(["fit", "--x", "X.csv", "--y", "y.csv"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(11));
}

#[test]
fn nodes_below_two_are_rejected_as_validation() {
    let dir = tempfile::tempdir().unwrap();
    gen_into(dir.path(), 20, 2, 8);
    let out = run_in(dir.path(), &fit_args(&["--nodes", "1"]));
    assert_eq!(out.status.code(), Some(11));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid_nodes"));
}

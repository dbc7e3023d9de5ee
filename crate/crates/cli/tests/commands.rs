use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use knnclutter_cli::{exit, RunReport};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_knnclutter"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> u8 {
    o.status.code().expect("exited normally") as u8
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path, scenario: &str, seed: u64) -> PathBuf {
    let out = dir.join(format!("s{scenario}_{seed}.csv"));
    let o = run(&[
        "simulate",
        "--scenario",
        scenario,
        "--seed",
        &seed.to_string(),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), exit::OK, "{}", String::from_utf8_lossy(&o.stderr));
    out
}

fn data_rows(p: &Path) -> usize {
    fs::read_to_string(p).unwrap().lines().count() - 1
}

fn report(p: &Path) -> RunReport {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn simulate_scenario_three_size() {
    let dir = tempfile::tempdir().unwrap();
    let n = data_rows(&simulate(dir.path(), "3", 1));
    // 450 expected, Poisson sd ~ 21
    assert!((n as f64 - 450.0).abs() < 4.0 * 450f64.sqrt(), "{n}");
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = fs::read(simulate(dir.path(), "4", 7)).unwrap();
    let b = run(&[
        "simulate",
        "--scenario",
        "4",
        "--seed",
        "7",
        "--out",
        s(&dir.path().join("again.csv")),
    ]);
    assert_eq!(code(&b), 0);
    assert_eq!(a, fs::read(dir.path().join("again.csv")).unwrap());
}

#[test]
fn missing_output_directory_is_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("x.csv");
    let o = run(&["simulate", "--scenario", "1", "--out", s(&out)]);
    assert_eq!(code(&o), exit::IO);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing"));
}

#[test]
fn classify_fixed_k_passthrough() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "3", 2);
    let out = dir.path().join("l.csv");
    let o = run(&["classify", "--in", s(&input), "--k", "10", "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("l.json"));
    assert_eq!(r.iterations[0].k_used, 10);
    assert_eq!(r.n, data_rows(&input));
    assert_eq!(data_rows(&out), data_rows(&input));
    let text = fs::read_to_string(&out).unwrap();
    for (i, line) in text.lines().skip(1).enumerate() {
        assert!(line.starts_with(&format!("{i},")));
    }
}

#[test]
fn classify_too_few_points() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("tiny.csv");
    fs::write(&input, "x,y\n0,0\n1,0\n0,1\n").unwrap();
    let o = run(&[
        "classify",
        "--in",
        s(&input),
        "--k",
        "5",
        "--out",
        s(&dir.path().join("l.csv")),
    ]);
    assert_eq!(code(&o), exit::NUMERIC);
    assert_ne!(exit::NUMERIC, exit::IO);
}

#[test]
fn parse_error_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "x,y\n0,0\n1,oops\n").unwrap();
    let o = run(&[
        "classify",
        "--in",
        s(&input),
        "--k",
        "1",
        "--out",
        s(&dir.path().join("l.csv")),
    ]);
    assert_eq!(code(&o), exit::PARSE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn missing_input_is_io_failure() {
    let o = run(&[
        "classify",
        "--in",
        "/nonexistent/in.csv",
        "--k",
        "1",
        "--out",
        "/tmp/x.csv",
    ]);
    assert_eq!(code(&o), exit::IO);
}

#[test]
fn usage_errors() {
    assert_eq!(
        code(&run(&["classify", "--in", "a.csv", "--out", "b.csv"])),
        exit::USAGE
    );
    assert_eq!(
        code(&run(&[
            "classify", "--in", "a.csv", "--k", "3", "--auto-k", "--out", "b.csv"
        ])),
        exit::USAGE
    );
    assert_eq!(
        code(&run(&["simulate", "--scenario", "9", "--out", "x.csv"])),
        exit::USAGE
    );
    let o = bin()
        .args(["simulate", "--scenario", "1", "--out", "/tmp/never.csv"])
        .env("KNNCLUTTER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), exit::USAGE);
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "3", 3);
    let mut outs = Vec::new();
    for threads in ["1", "2"] {
        let out = dir.path().join(format!("c{threads}.csv"));
        let o = bin()
            .args([
                "entropy-curve",
                "--in",
                s(&input),
                "--k-max",
                "12",
                "--out",
                s(&out),
            ])
            .env("KNNCLUTTER_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(code(&o), 0);
        outs.push(fs::read(out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn iterate_single_iteration_writes_one_iteration_file() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "4", 1);
    let prefix = dir.path().join("run");
    let o = run(&[
        "iterate",
        "--in",
        s(&input),
        "--auto-k",
        "--max-iter",
        "1",
        "--out",
        s(&prefix),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let iter_files: Vec<_> = fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with("run_iter"))
        .collect();
    assert_eq!(iter_files.len(), 1);
    let r = report(&dir.path().join("run_report.json"));
    assert_eq!(r.j_hat, 1);
    assert_eq!(r.iterations.len(), 1);
    assert_eq!(
        data_rows(&dir.path().join("run_labels.csv")),
        data_rows(&input)
    );
    assert_eq!(
        fs::read_to_string(dir.path().join("run_labels.csv")).unwrap(),
        fs::read_to_string(dir.path().join("run_iter1.csv")).unwrap()
    );
}

#[test]
fn iterate_without_truth_labels() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "3", 4);
    let bare = dir.path().join("bare.csv");
    let text: String = fs::read_to_string(&input)
        .unwrap()
        .lines()
        .map(|l| l.rsplit_once(',').unwrap().0.to_string() + "\n")
        .collect();
    fs::write(&bare, text).unwrap();
    let prefix = dir.path().join("run");
    let o = run(&[
        "iterate",
        "--in",
        s(&bare),
        "--k",
        "10",
        "--out",
        s(&prefix),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&dir.path().join("run_report.json"));
    assert_eq!(r.s_sequence().len(), r.iterations.len());
    assert!(r.j_hat >= 1);

    // metrics need truth
    let o = run(&[
        "metrics",
        "--pred",
        s(&dir.path().join("run_labels.csv")),
        "--truth",
        s(&bare),
    ]);
    assert_eq!(code(&o), exit::PARSE);
}

#[test]
fn entropy_curve_explicit_set() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "3", 5);
    let out = dir.path().join("c.csv");
    let o = run(&[
        "entropy-curve",
        "--in",
        s(&input),
        "--k-set",
        "2,4,8",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&out).unwrap();
    let ks: Vec<&str> = text.lines().map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["k", "2", "4", "8"]);
}

#[test]
fn entropy_curve_default_set_is_clipped() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("twenty.csv");
    let mut body = String::from("x,y\n");
    for i in 0..20 {
        let t = i as f64 * 0.7;
        body.push_str(&format!(
            "{},{}\n",
            t.cos() * (1.0 + i as f64),
            t.sin() * (1.0 + 0.3 * i as f64)
        ));
    }
    fs::write(&input, body).unwrap();
    let out = dir.path().join("c.csv");
    let o = run(&["entropy-curve", "--in", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(data_rows(&out), 18);

    let o = run(&[
        "entropy-curve",
        "--in",
        s(&input),
        "--k-max",
        "35",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), exit::NUMERIC);
}

#[test]
fn metrics_identity_and_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "2", 6);
    let out = dir.path().join("m.csv");
    let o = run(&[
        "metrics",
        "--pred",
        s(&input),
        "--truth",
        s(&input),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("tpr=1 fpr=0 acc=1"));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("tpr,fpr,acc,tp,fp,tn,fn\n1.0,0.0,1.0,"));

    let short = dir.path().join("short.csv");
    let full = fs::read_to_string(&input).unwrap();
    let lines: Vec<&str> = full.lines().take(10).collect();
    fs::write(&short, lines.join("\n") + "\n").unwrap();
    let o = run(&["metrics", "--pred", s(&short), "--truth", s(&input)]);
    assert_eq!(code(&o), exit::PARSE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("length mismatch"));
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("bench.json");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn bench_single_replicate_has_zero_se() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [3], "k_modes": [10, "auto"], "iterations": 2, "replicates": 1, "seed": 5}"#,
    );
    let out = dir.path().join("b.csv");
    let o = run(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scenario,k_mode,iteration,tpr,fpr,acc,se_tpr,se_fpr,se_acc,replicates,seed"
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for r in &rows {
        assert_eq!(&r[6..9], ["0.0", "0.0", "0.0"]);
        assert_eq!(r[9], "1");
    }
    assert_eq!(rows[0][1], "10");
    assert_eq!(rows[2][1], "auto");
}

#[test]
fn bench_rejects_bad_config_before_simulating() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [3, 9], "k_modes": [10], "iterations": 1, "replicates": 2, "seed": 5}"#,
    );
    let o = run(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), exit::USAGE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenarios"));
    assert!(!out.exists());

    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [3], "k_modes": [10], "iterations": 1, "replicates": 2, "seed": 5, "colour": 1}"#,
    );
    let o = run(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), exit::USAGE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));

    let cfg = write_config(
        dir.path(),
        r#"{"scenarios": [3], "k_modes": [10], "iterations": 1, "replicates": 0, "seed": 5}"#,
    );
    let o = run(&["bench", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&o), exit::USAGE);
    assert!(String::from_utf8_lossy(&o.stderr).contains("replicates"));

    let cfg = write_config(dir.path(), r#"{"scenarios": [3"#);
    assert_eq!(
        code(&run(&["bench", "--config", s(&cfg), "--out", s(&out)])),
        exit::PARSE
    );
}

#[test]
fn entropy_curve_on_aggregate_design_levels_off() {
    let dir = tempfile::tempdir().unwrap();
    let input = simulate(dir.path(), "aggregate", 8);
    let out = dir.path().join("c.csv");
    let o = run(&["entropy-curve", "--in", s(&input), "--out", s(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    let s_k: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(s_k.len(), 35);
    let peak = s_k.iter().cloned().fold(0.0, f64::max);
    let tail = &s_k[20..];
    let spread = tail.iter().cloned().fold(0.0, f64::max)
        - tail.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(s_k[0] >= s_k[34]);
    assert!(spread <= 0.1 * peak, "tail spread {spread} vs peak {peak}");
}

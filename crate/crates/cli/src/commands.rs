use std::path::{Path, PathBuf};
use std::time::Instant;

use knnclutter::{
    classify, default_k_set, em_fit, entropy_curve, fit_segmented, knn_distances, make_scenario,
    rates, run_benchmark, run_iterative, select_k, BenchConfig, EmConfig, Error, IterationConfig,
    KMode, Labels, ScenarioSpec,
};

use crate::args::{
    BenchArgs, ClassifyArgs, Command, CurveArgs, EmArgs, IterateArgs, KChoice, KSetArgs,
    MetricsArgs, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::io::{self, LabelRow};
use crate::report::{Changepoint, IterationSummary, RunReport};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Classify(a) => cmd_classify(&a),
        Command::Iterate(a) => cmd_iterate(&a),
        Command::EntropyCurve(a) => cmd_entropy_curve(&a),
        Command::Metrics(a) => cmd_metrics(&a),
        Command::Bench(a) => cmd_bench(&a),
    }
}

/// Caps the global worker pool from the value of `KNNCLUTTER_THREADS`.
pub fn configure_threads(value: Option<&str>) -> CliResult<()> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Usage(format!(
            "KNNCLUTTER_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    // a pool that already exists keeps its size
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn k_mode(k: &KChoice) -> KMode {
    match k.k {
        Some(k) => KMode::Fixed(k),
        None => KMode::Auto,
    }
}

fn em_config(a: &EmArgs) -> CliResult<EmConfig> {
    let mut em = EmConfig::default();
    if let Some(tol) = a.em_tol {
        if tol.is_nan() || tol <= 0.0 {
            return Err(CliError::Usage("--em-tol must be positive".into()));
        }
        em.tol = tol;
    }
    if let Some(m) = a.em_max_iter {
        if m == 0 {
            return Err(CliError::Usage("--em-max-iter must be at least 1".into()));
        }
        em.max_iter = m;
    }
    Ok(em)
}

/// Explicit sets are used as given and fail if too large for the pattern; the
/// default upper end is clipped to n - 2 with a warning.
pub fn resolve_k_set(a: &KSetArgs, n: usize) -> CliResult<Vec<usize>> {
    if let Some(ks) = &a.k_set {
        return Ok(ks.clone());
    }
    let lo = a.k_min.unwrap_or(1);
    let hi = match a.k_max {
        Some(hi) => hi,
        None => {
            let full = knnclutter::kselect::DEFAULT_K_MAX;
            let clipped = default_k_set(n).last().copied().unwrap_or(0);
            if clipped < full {
                eprintln!("warning: {n} points; candidate K clipped to {lo}..={clipped}");
            }
            clipped
        }
    };
    if lo == 0 {
        return Err(CliError::Usage("--k-min must be at least 1".into()));
    }
    if hi < lo {
        if a.k_max.is_none() {
            return Err(Error::TooFewPoints { n, k: lo }.into());
        }
        return Err(CliError::Usage(format!(
            "--k-min {lo} exceeds --k-max {hi}"
        )));
    }
    Ok((lo..=hi).collect())
}

fn elapsed(timing: bool, start: Instant) -> Option<f64> {
    timing.then(|| start.elapsed().as_secs_f64())
}

fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    let pattern = make_scenario(&ScenarioSpec::preset(a.scenario, a.seed))?;
    io::write_pattern(&a.out, &pattern)
}

fn cmd_classify(a: &ClassifyArgs) -> CliResult<()> {
    let start = Instant::now();
    let file = io::read_pattern(&a.input)?;
    let pattern = &file.pattern;
    let em = em_config(&a.em)?;
    let mode = k_mode(&a.k);

    let (k_set, summary, fit) = match mode {
        KMode::Fixed(k) => {
            let fit = em_fit(&knn_distances(pattern, k)?, None, &em)?;
            (vec![k], IterationSummary::from_fit(1, k, &fit), fit)
        }
        KMode::Auto => {
            let k_set = resolve_k_set(&a.k_set, pattern.len())?;
            let sel = select_k(pattern, &k_set, &em)?;
            let fit = sel
                .fit
                .clone()
                .ok_or(Error::DegenerateComponent { iter: em.max_iter })?;
            let summary = IterationSummary {
                s_j: Some(sel.curve.total()),
                per_k_entropy: sel.curve.s.clone(),
                changepoint: Some(Changepoint::from(&sel.segmented)),
                ..IterationSummary::from_fit(1, sel.k_hat, &fit)
            };
            (k_set, summary, fit)
        }
    };
    let labels = classify(&fit);
    io::write_labels(
        &a.out,
        pattern.points().iter().enumerate().map(|(i, &p)| LabelRow {
            index: i,
            point: p,
            is_feature: labels.is_feature[i],
            delta: fit.delta[i],
        }),
    )?;
    let report = RunReport {
        command: "classify".into(),
        input_sha256: file.sha256,
        n: pattern.len(),
        k_mode: mode,
        k_set,
        final_feature_count: labels.feature_count(),
        iterations: vec![summary],
        j_hat: 1,
        halt: None,
        wall_time_s: elapsed(a.timing, start),
    };
    let report_path = a
        .report
        .clone()
        .unwrap_or_else(|| a.out.with_extension("json"));
    io::write_atomic(&report_path, report.to_json().as_bytes())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn iteration_path(prefix: &Path, j: usize) -> PathBuf {
    with_suffix(prefix, &format!("_iter{j}.csv"))
}

pub fn final_labels_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "_labels.csv")
}

pub fn report_path(prefix: &Path) -> PathBuf {
    with_suffix(prefix, "_report.json")
}

fn cmd_iterate(a: &IterateArgs) -> CliResult<()> {
    let start = Instant::now();
    let file = io::read_pattern(&a.input)?;
    let pattern = &file.pattern;
    let config = IterationConfig {
        k_mode: k_mode(&a.k),
        k_set: resolve_k_set(&a.k_set, pattern.len())?,
        max_iter: a.max_iter,
        min_points: a.min_points,
        em: em_config(&a.em)?,
    };
    let trace = run_iterative(pattern, &config)?;
    let points = pattern.points();

    for r in &trace.records {
        io::write_labels(
            &iteration_path(&a.out, r.iteration),
            r.original_index
                .iter()
                .enumerate()
                .map(|(i, &orig)| LabelRow {
                    index: orig,
                    point: points[orig],
                    is_feature: r.labels.is_feature[i],
                    delta: r.fit.delta[i],
                }),
        )?;
    }

    // posterior from the last selected iteration each point took part in
    let mut delta = vec![0.0; pattern.len()];
    for r in &trace.records[..trace.j_hat] {
        for (i, &orig) in r.original_index.iter().enumerate() {
            delta[orig] = r.fit.delta[i];
        }
    }
    io::write_labels(
        &final_labels_path(&a.out),
        points.iter().enumerate().map(|(i, &p)| LabelRow {
            index: i,
            point: p,
            is_feature: trace.final_labels.is_feature[i],
            delta: delta[i],
        }),
    )?;

    let iterations = trace
        .records
        .iter()
        .map(|r| {
            let cp = match config.k_mode {
                KMode::Auto => fit_segmented(&r.per_k_entropy)
                    .ok()
                    .map(|s| Changepoint::from(&s)),
                KMode::Fixed(_) => None,
            };
            IterationSummary::from_record(r, cp)
        })
        .collect();
    let report = RunReport {
        command: "iterate".into(),
        input_sha256: file.sha256,
        n: pattern.len(),
        k_mode: config.k_mode,
        k_set: config.k_set.clone(),
        iterations,
        j_hat: trace.j_hat,
        halt: Some(trace.halt),
        final_feature_count: trace.final_labels.feature_count(),
        wall_time_s: elapsed(a.timing, start),
    };
    io::write_atomic(&report_path(&a.out), report.to_json().as_bytes())
}

#[derive(serde::Serialize)]
struct CurveRow {
    k: usize,
    entropy: f64,
}

fn cmd_entropy_curve(a: &CurveArgs) -> CliResult<()> {
    let file = io::read_pattern(&a.input)?;
    let k_set = resolve_k_set(&a.k_set, file.pattern.len())?;
    let curve = entropy_curve(&file.pattern, &k_set, &em_config(&a.em)?)?;
    for (k, d) in curve.k_set.iter().zip(&curve.diagnostics) {
        if let Some(d) = d {
            eprintln!("warning: K = {k}: {d}; entropy recorded as 0");
        }
    }
    let rows: Vec<CurveRow> = curve
        .k_set
        .iter()
        .zip(&curve.s)
        .map(|(&k, &entropy)| CurveRow { k, entropy })
        .collect();
    io::write_serialized(&a.out, &rows)
}

fn cmd_metrics(a: &MetricsArgs) -> CliResult<()> {
    let pred = io::read_label_column(&a.pred)?
        .ok_or_else(|| CliError::parse(&a.pred, Some(1), "needs an is_feature or label column"))?;
    let truth = io::read_label_column(&a.truth)?;
    let labels = Labels {
        is_feature: pred.iter().map(|l| l.is_feature()).collect(),
    };
    let r = rates(&labels, truth.as_deref())?;
    println!(
        "tpr={} fpr={} acc={} tp={} fp={} tn={} fn={}",
        r.tpr, r.fpr, r.acc, r.tp, r.fp, r.tn, r.fn_
    );
    if let Some(out) = &a.out {
        io::write_serialized(out, &[r])?;
    }
    Ok(())
}

fn read_bench_config(path: &Path) -> CliResult<BenchConfig> {
    let bytes = io::read_bytes(path)?;
    let de = &mut serde_json::Deserializer::from_slice(&bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_data() {
            CliError::Usage(format!("{}: key '{key}': {inner}", path.display()))
        } else {
            CliError::parse(path, Some(inner.line() as u64), inner.to_string())
        }
    })
}

fn cmd_bench(a: &BenchArgs) -> CliResult<()> {
    let mut config = read_bench_config(&a.config)?;
    if let Some(r) = a.replicates {
        config.replicates = r;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    config.validate()?;
    let rows = run_benchmark(&config)?;
    io::write_serialized(&a.out, &rows)
}

//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.
//!
//! Run with `cargo test -p whisker-harness --test acceptance`.

use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use rand::seq::SliceRandom;
use rand::Rng;
use whisker_core::analysis::fit_log_regression;
use whisker_core::detector::{calibrate_and_detect, DetectorConfig, TriggerMode};
use whisker_core::features::{features_from_taxels, FeatureConfig, FeatureVector};
use whisker_core::learn::{evaluate, read_jsonl, train, Family, LabeledDataset, ModelSpec, Task};
use whisker_core::seed;
use whisker_core::taxel::{extract_taxels, render_frame, TaxelGridConfig, TaxelMatrix};
use whisker_core::{CHANNELS, GRID};
use whisker_harness::cli::{run, Cli};
use whisker_harness::experiments::{direction_trials, speed_sweep};
use whisker_harness::ExperimentConfig;

// tolerances and limits
const FEATURE_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1.0 / 255.0;
const MIN_R2: f64 = 0.95;
const SELF_CONSISTENCY_TOL: f64 = 1e-9;
const ENSEMBLE_PATTERNS_MIN: f64 = 0.90;
const ENSEMBLE_DEPTHS_MIN: f64 = 0.90;
const ENSEMBLE_SPECIMENS_MIN: f64 = 0.80;
const CHANCE: f64 = 0.10;
const CHANCE_TOL: f64 = 0.05;
const RANDOM_STREAMS: usize = 50;

const LIMIT_FEATURES: Duration = Duration::from_secs(1);
const LIMIT_TRACE: Duration = Duration::from_secs(1);
const LIMIT_SPEED: Duration = Duration::from_secs(30);
const LIMIT_DIRECTION: Duration = Duration::from_secs(60);
const LIMIT_CLASSIFY: Duration = Duration::from_secs(600);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_matrix<R: Rng>(rng: &mut R, idx: usize) -> TaxelMatrix {
    let mut o = TaxelMatrix::zeros(idx);
    for row in o.values.iter_mut() {
        for v in row.iter_mut() {
            // include exact zeros so the epsilon floor is exercised
            *v = if rng.gen_bool(0.1) { 0.0 } else { rng.gen() };
        }
    }
    o
}

fn feature_oracle(o: &TaxelMatrix, eps: f64) -> [f64; CHANNELS] {
    let mut f = [0.0; CHANNELS];
    for i in 0..GRID {
        let mut s = 0.0;
        for j in 0..GRID {
            s += o.values[i][j];
        }
        f[i] = if s > eps { s.ln() } else { eps.ln() };
    }
    for j in 0..GRID {
        let mut s = 0.0;
        for i in 0..GRID {
            s += o.values[i][j];
        }
        f[GRID + j] = if s > eps { s.ln() } else { eps.ln() };
    }
    f
}

fn criterion_features() -> Outcome {
    let t0 = Instant::now();
    let cfg = FeatureConfig::default();
    let mut rng = seed::rng(1);
    let mut worst: f64 = 0.0;
    let mut transpose_ok = true;
    for n in 0..1000 {
        let o = random_matrix(&mut rng, n);
        let f = features_from_taxels(&o, &cfg);
        let want = feature_oracle(&o, cfg.epsilon);
        for k in 0..CHANNELS {
            worst = worst.max((f.f[k] - want[k]).abs());
        }
        let ft = features_from_taxels(&o.transpose(), &cfg);
        transpose_ok &= ft.f[..GRID] == f.f[GRID..] && ft.f[GRID..] == f.f[..GRID];
    }
    let elapsed = t0.elapsed();
    outcome(
        worst <= FEATURE_TOL && transpose_ok && elapsed < LIMIT_FEATURES,
        format!("max |err| {worst:.1e}, transpose exact {transpose_ok}, {elapsed:?}"),
    )
}

/// What one run of the capture procedure produced.
#[derive(Debug, PartialEq)]
struct Trace {
    triggers: Vec<(usize, usize)>,
    windows: Vec<Vec<[f64; CHANNELS]>>,
    discarded: usize,
}

/// Step-by-step interpreter of the capture procedure with the threshold
/// taken verbatim.
fn reference_capture(stream: &[[f64; CHANNELS]], m: usize, c: usize, b: f64, l: usize) -> Trace {
    let calib = 5 * m;
    let mut eta = [0.0; CHANNELS];
    for frame in &stream[..calib] {
        for k in 0..CHANNELS {
            eta[k] += frame[k];
        }
    }
    for e in eta.iter_mut() {
        *e /= 5.0;
    }
    let mut trace = Trace {
        triggers: vec![],
        windows: vec![],
        discarded: 0,
    };
    let mut t = calib;
    while t + m <= stream.len() {
        let mut fired = None;
        for k in 0..CHANNELS {
            let mut sum = 0.0;
            for w in 0..m {
                sum += stream[t + w][k];
            }
            if sum > b * eta[k] {
                fired = Some(k);
                break;
            }
        }
        match fired {
            Some(k) => {
                if t - c + l <= stream.len() {
                    trace.triggers.push((t, k + 1));
                    trace.windows.push(stream[t - c..t - c + l].to_vec());
                } else {
                    trace.discarded += 1;
                }
                t += l;
            }
            None => t += m,
        }
    }
    trace
}

fn run_detector(stream: &[[f64; CHANNELS]], cfg: &DetectorConfig) -> Trace {
    let fv: Vec<FeatureVector> = stream
        .iter()
        .enumerate()
        .map(|(i, f)| FeatureVector {
            f: *f,
            frame_index: i,
        })
        .collect();
    let d = calibrate_and_detect(&fv, cfg).expect("detector runs");
    Trace {
        triggers: d
            .samples
            .iter()
            .map(|s| (s.trigger_frame, s.trigger_channel))
            .collect(),
        windows: d.samples.iter().map(|s| s.x.clone()).collect(),
        discarded: d.discarded,
    }
}

fn criterion_trace() -> Outcome {
    let t0 = Instant::now();
    let mut problems = Vec::new();

    // hand trace: one active channel, m=2 b=2 c=1 l=4
    let mut hand = vec![[0.0; CHANNELS]; 16];
    for (i, f) in hand.iter_mut().enumerate() {
        f[0] = match i {
            0..=9 => 1.0,
            10 | 11 => 2.5,
            _ => 1.0,
        };
    }
    for mode in [TriggerMode::Literal, TriggerMode::Shifted] {
        let cfg = DetectorConfig {
            m: 2,
            c: 1,
            b: 2.0,
            l: 4,
            mode,
            ..Default::default()
        };
        let got = run_detector(&hand, &cfg);
        let expected_window: Vec<f64> = vec![1.0, 2.5, 2.5, 1.0];
        let window_ok = got.windows.len() == 1
            && got.windows[0].iter().map(|f| f[0]).collect::<Vec<_>>() == expected_window;
        if got.triggers != vec![(10, 1)]
            || !window_ok
            || got != reference_capture(&hand, 2, 1, 2.0, 4)
        {
            problems.push(format!("hand trace ({mode:?}) gave {:?}", got.triggers));
        }
    }

    let mut rng = seed::rng(2);
    let mut total_triggers = 0;
    for case in 0..RANDOM_STREAMS {
        let m = rng.gen_range(1..=5);
        let c = rng.gen_range(0..=(5 * m).min(10));
        let l = rng.gen_range(c + 1..=c + 20);
        let b = rng.gen_range(1.0..3.0);
        let len = rng.gen_range(5 * m + 10..=5 * m + 200);
        let mut stream = vec![[0.0; CHANNELS]; len];
        for f in stream.iter_mut() {
            for v in f.iter_mut() {
                *v = rng.gen_range(0.0..1.0);
            }
        }
        for _ in 0..rng.gen_range(0..6) {
            let start = rng.gen_range(5 * m..len);
            let k = rng.gen_range(0..CHANNELS);
            for f in stream.iter_mut().skip(start).take(rng.gen_range(1..8)) {
                f[k] += rng.gen_range(1.0..6.0);
            }
        }
        let cfg = DetectorConfig {
            m,
            c,
            b,
            l,
            mode: TriggerMode::Literal,
            ..Default::default()
        };
        let want = reference_capture(&stream, m, c, b, l);
        let got = run_detector(&stream, &cfg);
        total_triggers += want.triggers.len();
        if got != want {
            problems.push(format!(
                "stream {case}: {:?} vs reference {:?}",
                got.triggers, want.triggers
            ));
        }
    }
    let elapsed = t0.elapsed();
    let pass = problems.is_empty() && elapsed < LIMIT_TRACE;
    let detail = if problems.is_empty() {
        format!(
            "hand trace + {RANDOM_STREAMS} streams ({total_triggers} captures) match, {elapsed:?}"
        )
    } else {
        problems.join("; ")
    };
    outcome(pass, detail)
}

fn criterion_round_trip() -> Outcome {
    let grid = TaxelGridConfig::default();
    let mut rng = seed::rng(3);
    let mut worst: f64 = 0.0;
    for n in 0..100 {
        let o = random_matrix(&mut rng, n);
        let back = extract_taxels(&render_frame(&o, &grid).unwrap(), &grid).unwrap();
        for i in 0..GRID {
            for j in 0..GRID {
                worst = worst.max((back.values[i][j] - o.values[i][j]).abs());
            }
        }
    }
    outcome(
        worst <= ROUND_TRIP_TOL,
        format!("max |err| {worst:.5} (limit {ROUND_TRIP_TOL:.5})"),
    )
}

fn criterion_speed() -> Outcome {
    let t0 = Instant::now();
    let cfg = ExperimentConfig::default();
    let sweep = match speed_sweep(&cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("sweep failed: {e}")),
    };
    let fit = sweep.fit;
    let r2 = fit.r2.unwrap_or(0.0);

    // exact points from the published model must be recovered
    let exact: Vec<(f64, f64)> = cfg
        .analysis
        .sweep_speeds
        .iter()
        .map(|&v| (v, 151.06 - 56.29 * v.log10()))
        .collect();
    let back = fit_log_regression(&exact).expect("exact fit");
    let err = (back.intercept - 151.06)
        .abs()
        .max((back.slope + 56.29).abs());
    let elapsed = t0.elapsed();
    outcome(
        sweep.points.len() == 55
            && fit.n == 55
            && fit.slope < 0.0
            && r2 >= MIN_R2
            && err <= SELF_CONSISTENCY_TOL
            && elapsed < LIMIT_SPEED,
        format!(
            "{} slides, slope {:.2}, intercept {:.2}, r2 {:.4}; self-consistency err {err:.1e}; {elapsed:?}",
            sweep.points.len(),
            fit.slope,
            fit.intercept,
            r2
        ),
    )
}

fn criterion_direction() -> Outcome {
    let t0 = Instant::now();
    let trials = match direction_trials(&ExperimentConfig::default()) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("trials failed: {e}")),
    };
    let correct = trials.iter().filter(|t| t.correct()).count();
    let elapsed = t0.elapsed();
    outcome(
        trials.len() == 9 * 4 * 25 && correct == trials.len() && elapsed < LIMIT_DIRECTION,
        format!("{correct}/{} correct, {elapsed:?}", trials.len()),
    )
}

struct PipelineRun {
    report: whisker_core::learn::ReportGrid,
    dataset: Vec<u8>,
    digests: Vec<(String, String)>,
    elapsed: Duration,
}

fn pipeline(dir: &Path) -> Result<PipelineRun, String> {
    let t0 = Instant::now();
    let cli = Cli::try_parse_from([
        "whisker",
        "pipeline",
        "--seed",
        "0",
        "--out",
        dir.to_str().unwrap(),
    ])
    .map_err(|e| e.to_string())?;
    let manifest = run(cli).map_err(|e| e.to_string())?;
    let report =
        serde_json::from_slice(&std::fs::read(dir.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    Ok(PipelineRun {
        report,
        dataset: std::fs::read(dir.join("dataset.jsonl")).map_err(|e| e.to_string())?,
        digests: manifest.output_digests(),
        elapsed: t0.elapsed(),
    })
}

fn criterion_classification(run: &PipelineRun) -> Outcome {
    let grid = &run.report;
    let acc = |t: Task, m: &str| grid.accuracy(t, m).unwrap_or(f64::NAN);
    let mut pass = run.elapsed < LIMIT_CLASSIFY;
    let mut cells = Vec::new();
    for m in ["bagged_trees", "boosted_trees"] {
        let (s, p, d) = (
            acc(Task::Specimens10, m),
            acc(Task::Patterns4, m),
            acc(Task::Depths4, m),
        );
        pass &=
            p >= ENSEMBLE_PATTERNS_MIN && d >= ENSEMBLE_DEPTHS_MIN && s >= ENSEMBLE_SPECIMENS_MIN;
        cells.push(format!("{m} s/p/d {s:.2}/{p:.2}/{d:.2}"));
    }
    let linear = acc(Task::Specimens10, "linear_margin");
    pass &= linear < acc(Task::Specimens10, "bagged_trees")
        && linear < acc(Task::Specimens10, "boosted_trees");
    let n_tests: Vec<usize> = grid.reports.iter().map(|r| r.n_test).collect();
    pass &= grid.reports.len() == 9 && n_tests.iter().all(|&n| n == 100);
    outcome(
        pass,
        format!(
            "{}; linear_margin specimens10 {linear:.2}; n_test 100; pipeline {:?}",
            cells.join("; "),
            run.elapsed
        ),
    )
}

fn criterion_determinism(a: &PipelineRun, b: &PipelineRun) -> Outcome {
    let same_data = a.dataset == b.dataset;
    let acc = |r: &PipelineRun| {
        r.report
            .reports
            .iter()
            .map(|x| (x.accuracy, x.confusion.clone()))
            .collect::<Vec<_>>()
    };
    let same_acc = acc(a) == acc(b);
    let same_digests = a.digests == b.digests;
    outcome(
        same_data && same_acc && same_digests,
        format!(
            "dataset identical {same_data}, accuracies identical {same_acc}, {} manifest digests identical {same_digests}",
            a.digests.len()
        ),
    )
}

fn criterion_chance(dir: &Path) -> Outcome {
    let cfg = ExperimentConfig::default();
    let samples = match std::fs::File::open(dir.join("dataset.jsonl")) {
        Ok(f) => read_jsonl(std::io::BufReader::new(f)).expect("dataset parses"),
        Err(e) => return outcome(false, format!("no dataset: {e}")),
    };
    let data = LabeledDataset::new(samples, cfg.dataset().split_seed()).expect("valid dataset");
    let split = whisker_harness::experiments::split_dataset(&cfg, &data).expect("split");
    let mut train_set = data.subset(&split.train);
    let test_set = data.subset(&split.test);
    let mut labels: Vec<_> = train_set.samples.iter().map(|s| s.label.clone()).collect();
    labels.shuffle(&mut seed::rng(seed::derive(cfg.seed, &["shuffle"])));
    for (s, l) in train_set.samples.iter_mut().zip(labels) {
        s.label = l;
    }

    let mut pass = true;
    let mut cells = Vec::new();
    for family in Family::defaults() {
        let spec = ModelSpec {
            train_seed: cfg.train_seed(Task::Specimens10, &family),
            family,
        };
        let model = train(&spec, &train_set, Task::Specimens10).expect("training");
        let r = evaluate(&model, &test_set).expect("evaluation");
        pass &= (r.accuracy - CHANCE).abs() <= CHANCE_TOL;
        cells.push(format!("{} {:.2}", r.model, r.accuracy));
    }
    outcome(
        pass,
        format!(
            "{} (target {CHANCE:.2} +/- {CHANCE_TOL:.2})",
            cells.join(", ")
        ),
    )
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("1 feature oracle", criterion_features()),
        ("2 capture trace", criterion_trace()),
        ("3 render round trip", criterion_round_trip()),
        ("4 speed regression", criterion_speed()),
        ("5 direction", criterion_direction()),
    ];

    let dirs = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    match (pipeline(dirs.0.path()), pipeline(dirs.1.path())) {
        (Ok(a), Ok(b)) => {
            results.push(("6 texture classification", criterion_classification(&a)));
            results.push(("7 determinism", criterion_determinism(&a, &b)));
        }
        (Err(e), _) | (_, Err(e)) => {
            results.push((
                "6 texture classification",
                outcome(false, format!("pipeline failed: {e}")),
            ));
            results.push(("7 determinism", outcome(false, "pipeline failed")));
        }
    }
    results.push(("8 chance level", criterion_chance(dirs.0.path())));

    let mut failed = 0;
    for (name, o) in &results {
        println!(
            "{} {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        failed += !o.pass as usize;
    }
    println!(
        "acceptance: {}/{} passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

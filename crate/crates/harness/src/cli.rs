//! `whisker` command line.
//!
//! Settings are resolved in this order, later winning: built-in defaults,
//! the `--config` JSON file, environment variables (`WHISKER_OUT`,
//! `WHISKER_WORKERS`), command-line flags.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use whisker_core::features::features_stream;
use whisker_core::learn::{build_dataset, train, ModelSpec};
use whisker_core::learn::{
    evaluate, read_jsonl, write_jsonl, Family, LabeledDataset, Model, ReportGrid, Task,
};
use whisker_core::sim::{Pattern, TextureSpec};
use whisker_core::taxel::{read_taxels_csv, render_frame, write_taxels_csv};

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};
use crate::experiments::{
    self, direction_trials, speed_sweep, write_direction_csv, write_sweep_csv,
};
use crate::manifest::{verify, FileDigest, RunManifest, StageRecord};
use crate::plot::{Chart, Mark, Series};

#[derive(Debug, Parser)]
#[command(
    name = "whisker",
    version,
    about = "Simulate, capture, analyse and classify whisker-array slides"
)]
pub struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "WHISKER_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads for dataset builds and model training (default: CPU count).
    #[arg(long, global = true, env = "WHISKER_WORKERS")]
    pub workers: Option<usize>,
    /// Root seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate slides and write taxel CSV streams.
    Simulate(SimulateArgs),
    /// Build a labelled dataset of captured samples.
    Dataset(DatasetArgs),
    /// Split a dataset and train classifiers on the training part.
    Train(TrainArgs),
    /// Score trained models on the held-out part of the split.
    Eval(EvalArgs),
    /// Run the speed sweep and fit duration against log10(speed).
    FitSpeed(FitSpeedArgs),
    /// Identify slide direction over seeded slides of every textured specimen.
    Direction(DirectionArgs),
    /// Draw SVG charts with CSV twins from earlier outputs.
    Plot(PlotArgs),
    /// simulate, dataset, train, eval, fit-speed, direction and plot in one go.
    Pipeline(DatasetArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value = "saw")]
    pub pattern: Pattern,
    #[arg(long, default_value_t = 3)]
    pub depth: u8,
    /// One or more speeds in mm/s.
    #[arg(long, num_args = 1.., default_values_t = [150.0])]
    pub speed: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub direction: u16,
    /// Slides per speed.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
    /// Also write every frame as a PPM image.
    #[arg(long)]
    pub frames: bool,
}

#[derive(Debug, Args)]
pub struct DatasetArgs {
    /// Slides per specimen (default: 100)
    #[arg(long)]
    pub slides: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset JSONL (default: OUT/dataset.jsonl).
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Tasks to train (default: all configured).
    #[arg(long, num_args = 1..)]
    pub task: Vec<Task>,
    /// Model families to train (default: all configured).
    #[arg(long, num_args = 1..)]
    pub model: Vec<Family>,
    /// Held-out fraction per class (default: 0.1)
    #[arg(long)]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Directory holding model files and split.json (default: OUT/models).
    #[arg(long)]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitSpeedArgs {
    /// Sweep speeds in mm/s (default: 100 to 200 in steps of 10)
    #[arg(long, num_args = 1..)]
    pub speeds: Vec<f64>,
    /// Slides per speed (default: 5)
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Swept texture pattern (default: tri)
    #[arg(long)]
    pub pattern: Option<Pattern>,
    /// Swept texture depth in mm (default: 3)
    #[arg(long)]
    pub depth: Option<u8>,
}

#[derive(Debug, Args)]
pub struct DirectionArgs {
    /// Slides per direction and specimen.
    #[arg(long)]
    pub seeds: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Taxel CSV of one slide for the channel-trace chart (default: first
    /// slide_*.csv in OUT).
    #[arg(long)]
    pub slide: Option<PathBuf>,
}

/// Resolved settings shared by every command.
pub struct Ctx {
    pub cfg: ExperimentConfig,
    pub out: PathBuf,
}

impl Ctx {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut cfg = match &cli.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = cli.seed {
            cfg.seed = s;
        }
        if let Some(o) = &cli.out {
            cfg.out_dir = o.clone();
        }
        if let Some(0) = cli.workers {
            return Err(HarnessError::Usage("--workers must be at least 1".into()));
        }
        let out = cfg.out_dir.clone();
        Ok(Self { cfg, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn digest(&self, path: &Path) -> Result<FileDigest> {
        FileDigest::of(path, &self.out)
    }

    fn stage(&self, command: &str, started: Instant) -> StageRecord {
        StageRecord {
            command: command.into(),
            config_digest: self.cfg.digest(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            elapsed_ms: started.elapsed().as_millis() as u64,
            summary: serde_json::Value::Null,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| HarnessError::Data(format!("cannot open {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn speed_tag(v: f64) -> String {
    let s = format!("{v}");
    s.replace('.', "p")
}

pub fn simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<StageRecord> {
    let t0 = Instant::now();
    let texture = TextureSpec::new(args.pattern, args.depth)?;
    if args.repeats == 0 || args.speed.is_empty() {
        return Err(HarnessError::Usage(
            "need at least one speed and one repeat".into(),
        ));
    }
    let mut outputs = Vec::new();
    for &speed in &args.speed {
        for r in 0..args.repeats {
            // the first slide uses the root seed itself so `--seed 42` means 42
            let seed = if r == 0 {
                ctx.cfg.seed
            } else {
                ctx.cfg.stage_seed(&["repeat", &r.to_string()])
            };
            let slide = experiments::slide_with(&ctx.cfg, speed, args.direction, seed);
            let taxels = experiments::simulate(&ctx.cfg, &texture, &slide)?;
            let stem = format!(
                "slide_{}{}_v{}_d{}_r{}",
                texture.pattern,
                texture.depth_mm,
                speed_tag(speed),
                args.direction,
                r
            );
            let path = ctx.path(&format!("{stem}.csv"));
            let mut w = create(&path)?;
            write_taxels_csv(&mut w, &taxels)?;
            w.flush()?;
            drop(w);
            outputs.push(ctx.digest(&path)?);
            if args.frames {
                for o in &taxels {
                    let frame = render_frame(o, &ctx.cfg.grid)?;
                    let p = ctx.path(&format!("{stem}_frames/frame_{:05}.ppm", o.frame_index));
                    let mut w = create(&p)?;
                    frame.write_ppm(&mut w)?;
                    w.flush()?;
                }
            }
        }
    }
    let mut stage = ctx.stage("simulate", t0);
    stage.summary = serde_json::json!({ "slides": outputs.len(), "frames_written": args.frames });
    stage.outputs = outputs;
    Ok(stage)
}

pub fn dataset(ctx: &Ctx, args: &DatasetArgs) -> Result<StageRecord> {
    let t0 = Instant::now();
    let mut build = ctx.cfg.dataset();
    if let Some(n) = args.slides {
        build.slides_per_specimen = n;
    }
    let (data, report) = build_dataset(&build)?;
    let path = ctx.path("dataset.jsonl");
    let mut w = create(&path)?;
    write_jsonl(&mut w, &data.samples)?;
    w.flush()?;
    drop(w);
    let mut stage = ctx.stage("dataset", t0);
    stage.summary = serde_json::json!({
        "samples": data.len(),
        "slides_per_specimen": build.slides_per_specimen,
        "split_seed": data.split_seed,
        "first_attempt_ok": report.first_attempt_ok,
        "reseeds": report.reseeds,
    });
    stage.outputs = vec![ctx.digest(&path)?];
    Ok(stage)
}

/// Train/test indices plus the digest of the dataset they index into.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitFile {
    pub dataset_sha256: String,
    pub test_fraction: f64,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn load_dataset(
    ctx: &Ctx,
    path: &Path,
    manifest: &RunManifest,
) -> Result<(LabeledDataset, FileDigest)> {
    let digest = verify(path, &ctx.out, manifest)?;
    let samples = read_jsonl(open(path)?)?;
    let data = LabeledDataset::new(samples, ctx.cfg.dataset().split_seed())
        .map_err(|e| HarnessError::Data(e.to_string()))?;
    if data.is_empty() {
        return Err(HarnessError::Data(format!(
            "{} has no samples",
            path.display()
        )));
    }
    Ok((data, digest))
}

fn model_file(task: Task, family: &Family) -> String {
    format!("{}__{}.json", task.name(), family.name())
}

pub fn train_cmd(ctx: &Ctx, args: &TrainArgs, manifest: &RunManifest) -> Result<StageRecord> {
    let t0 = Instant::now();
    let path = args
        .dataset
        .clone()
        .unwrap_or_else(|| ctx.path("dataset.jsonl"));
    let (data, input) = load_dataset(ctx, &path, manifest)?;
    let mut cfg = ctx.cfg.clone();
    if let Some(f) = args.test_fraction {
        cfg.learning.test_fraction = f;
    }
    cfg.validate()?;
    let split = experiments::split_dataset(&cfg, &data)?;
    let tasks = if args.task.is_empty() {
        cfg.learning.tasks.clone()
    } else {
        args.task.clone()
    };
    let families = if args.model.is_empty() {
        cfg.learning.models.clone()
    } else {
        args.model.clone()
    };

    let dir = ctx.path("models");
    fs::create_dir_all(&dir)?;
    let split_path = dir.join("split.json");
    let split_file = SplitFile {
        dataset_sha256: input.sha256.clone(),
        test_fraction: cfg.learning.test_fraction,
        train: split.train.clone(),
        test: split.test.clone(),
    };
    write_text(&split_path, &serde_json::to_string(&split_file)?)?;
    let mut outputs = vec![ctx.digest(&split_path)?];

    let train_set = data.subset(&split.train);
    for &task in &tasks {
        for family in &families {
            let spec = ModelSpec {
                family: family.clone(),
                train_seed: cfg.train_seed(task, family),
            };
            let model = train(&spec, &train_set, task)?;
            let p = dir.join(model_file(task, family));
            write_text(&p, &model.to_json()?)?;
            outputs.push(ctx.digest(&p)?);
        }
    }
    let mut stage = ctx.stage("train", t0);
    stage.inputs = vec![input];
    stage.summary = serde_json::json!({ "train": split.train.len(), "test": split.test.len() });
    stage.outputs = outputs;
    Ok(stage)
}

pub fn eval_cmd(
    ctx: &Ctx,
    args: &EvalArgs,
    manifest: &RunManifest,
) -> Result<(StageRecord, ReportGrid)> {
    let t0 = Instant::now();
    let path = args
        .dataset
        .clone()
        .unwrap_or_else(|| ctx.path("dataset.jsonl"));
    let dir = args.models.clone().unwrap_or_else(|| ctx.path("models"));
    let (data, input) = load_dataset(ctx, &path, manifest)?;
    let split_path = dir.join("split.json");
    let split: SplitFile = serde_json::from_reader(open(&split_path)?)
        .map_err(|e| HarnessError::Data(format!("corrupt {}: {e}", split_path.display())))?;
    if split.dataset_sha256 != input.sha256 {
        return Err(HarnessError::Data(
            "split.json was made for a different dataset".into(),
        ));
    }
    if split.test.is_empty() {
        return Err(HarnessError::Usage(
            "test split is empty; nothing to evaluate".into(),
        ));
    }
    if split.test.iter().any(|&i| i >= data.len()) {
        return Err(HarnessError::Data(
            "split.json indexes past the dataset".into(),
        ));
    }
    let test = data.subset(&split.test);

    let mut names: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .is_some_and(|n| n.to_string_lossy().contains("__"))
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(HarnessError::Data(format!(
            "no model files in {}",
            dir.display()
        )));
    }
    let mut inputs = vec![input, verify(&split_path, &ctx.out, manifest)?];
    let mut grid = ReportGrid::default();
    // report rows follow the configured order, not file-name order
    let mut loaded = Vec::new();
    for p in &names {
        inputs.push(verify(p, &ctx.out, manifest)?);
        let text = fs::read_to_string(p)?;
        let model = Model::from_json(&text)
            .map_err(|e| HarnessError::Data(format!("{}: {e}", p.display())))?;
        loaded.push(model);
    }
    let order = |m: &Model| {
        let t = Task::ALL
            .iter()
            .position(|&t| t == m.task)
            .unwrap_or(usize::MAX);
        let f = Family::defaults()
            .iter()
            .position(|f| f.name() == m.spec.family.name())
            .unwrap_or(usize::MAX);
        (t, f)
    };
    loaded.sort_by_key(order);
    for model in &loaded {
        grid.reports.push(evaluate(model, &test)?);
    }

    let csv_path = ctx.path("report.csv");
    let mut w = create(&csv_path)?;
    grid.write_csv(&mut w)?;
    w.flush()?;
    drop(w);
    let md_path = ctx.path("report.md");
    write_text(&md_path, &grid.to_markdown())?;
    let json_path = ctx.path("report.json");
    write_text(&json_path, &serde_json::to_string_pretty(&grid)?)?;

    let mut stage = ctx.stage("eval", t0);
    stage.inputs = inputs;
    stage.summary = serde_json::json!(grid
        .reports
        .iter()
        .map(|r| serde_json::json!({ "task": r.task.name(), "model": r.model, "accuracy": r.accuracy }))
        .collect::<Vec<_>>());
    stage.outputs = vec![
        ctx.digest(&csv_path)?,
        ctx.digest(&md_path)?,
        ctx.digest(&json_path)?,
    ];
    Ok((stage, grid))
}

pub fn fit_speed(ctx: &Ctx, args: &FitSpeedArgs) -> Result<StageRecord> {
    let t0 = Instant::now();
    let mut cfg = ctx.cfg.clone();
    if !args.speeds.is_empty() {
        cfg.analysis.sweep_speeds = args.speeds.clone();
    }
    if let Some(r) = args.repeats {
        cfg.analysis.sweep_repeats = r;
    }
    if let Some(p) = args.pattern {
        cfg.analysis.sweep_pattern = p;
    }
    if let Some(d) = args.depth {
        cfg.analysis.sweep_depth_mm = d;
    }
    cfg.validate()?;
    let sweep = speed_sweep(&cfg)?;
    let csv_path = ctx.path("sweep.csv");
    let mut w = create(&csv_path)?;
    write_sweep_csv(&mut w, &sweep)?;
    w.flush()?;
    drop(w);
    let fit_path = ctx.path("fit.json");
    write_text(&fit_path, &serde_json::to_string_pretty(&sweep.fit)?)?;
    let mut stage = ctx.stage("fit-speed", t0);
    stage.summary = serde_json::to_value(sweep.fit)?;
    stage.outputs = vec![ctx.digest(&csv_path)?, ctx.digest(&fit_path)?];
    Ok(stage)
}

pub fn direction(ctx: &Ctx, args: &DirectionArgs) -> Result<StageRecord> {
    let t0 = Instant::now();
    let mut cfg = ctx.cfg.clone();
    if let Some(n) = args.seeds {
        cfg.analysis.direction_seeds = n;
    }
    let trials = direction_trials(&cfg)?;
    let correct = trials.iter().filter(|t| t.correct()).count();
    let csv_path = ctx.path("direction.csv");
    let mut w = create(&csv_path)?;
    write_direction_csv(&mut w, &trials)?;
    w.flush()?;
    drop(w);
    let mut stage = ctx.stage("direction", t0);
    stage.summary = serde_json::json!({
        "trials": trials.len(),
        "correct": correct,
        "accuracy": if trials.is_empty() { 0.0 } else { correct as f64 / trials.len() as f64 },
    });
    stage.outputs = vec![ctx.digest(&csv_path)?];
    Ok(stage)
}

pub fn plot(ctx: &Ctx, args: &PlotArgs, manifest: &RunManifest) -> Result<StageRecord> {
    let t0 = Instant::now();
    let mut inputs = Vec::new();
    let mut outputs = Vec::new();

    let sweep_path = ctx.path("sweep.csv");
    let fit_path = ctx.path("fit.json");
    if sweep_path.exists() && fit_path.exists() {
        inputs.push(verify(&sweep_path, &ctx.out, manifest)?);
        inputs.push(verify(&fit_path, &ctx.out, manifest)?);
        let points = experiments::read_sweep_csv(open(&sweep_path)?)?;
        let fit: whisker_core::analysis::RegressionFit = serde_json::from_reader(open(&fit_path)?)
            .map_err(|e| HarnessError::Data(format!("corrupt {}: {e}", fit_path.display())))?;
        let measured: Vec<(f64, f64)> = points
            .iter()
            .filter_map(|p| p.duration_frames.map(|d| (p.speed_mm_s, d as f64)))
            .collect();
        let (lo, hi) = measured
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| {
                (a.min(p.0), b.max(p.0))
            });
        let curve: Vec<(f64, f64)> = if lo.is_finite() {
            (0..=50)
                .map(|i| lo + (hi - lo) * i as f64 / 50.0)
                .map(|v| (v, fit.predict(v)))
                .collect()
        } else {
            Vec::new()
        };
        let series = [
            Series {
                name: "measured".into(),
                points: measured.clone(),
                mark: Mark::Points,
            },
            Series {
                name: "fit".into(),
                points: curve,
                mark: Mark::Line,
            },
        ];
        let title = format!(
            "duration = {:.2} {} {:.2} log10(v), r2 = {}",
            fit.intercept,
            if fit.slope < 0.0 { "-" } else { "+" },
            fit.slope.abs(),
            fit.r2.map_or_else(|| "n/a".into(), |r| format!("{r:.3}"))
        );
        let svg = Chart {
            title: &title,
            x_label: "speed (mm/s)",
            y_label: "event duration (frames)",
            series: &series,
        }
        .to_svg();
        let p = ctx.path("speed_fit.svg");
        write_text(&p, &svg)?;
        outputs.push(ctx.digest(&p)?);
        let p = ctx.path("speed_fit.csv");
        let mut w = csv::Writer::from_writer(create(&p)?);
        w.write_record(["speed_mm_s", "duration_frames", "fitted_frames"])?;
        for (v, d) in &measured {
            w.write_record([
                v.to_string(),
                d.to_string(),
                format!("{:.6}", fit.predict(*v)),
            ])?;
        }
        w.flush()?;
        drop(w);
        outputs.push(ctx.digest(&p)?);
    }

    let slide = match &args.slide {
        Some(p) => Some(p.clone()),
        None => first_slide(&ctx.out)?,
    };
    if let Some(slide) = slide {
        inputs.push(verify(&slide, &ctx.out, manifest)?);
        let taxels = read_taxels_csv(open(&slide)?)?;
        let stream = features_stream(&taxels, &ctx.cfg.features);
        let series: Vec<Series> = (0..whisker_core::CHANNELS)
            .map(|k| Series {
                name: if k < 5 {
                    format!("row {}", k + 1)
                } else {
                    format!("col {}", k - 4)
                },
                points: stream
                    .iter()
                    .map(|f| (f.frame_index as f64, f.f[k]))
                    .collect(),
                mark: Mark::Line,
            })
            .collect();
        let svg = Chart {
            title: "channel features",
            x_label: "frame",
            y_label: "ln(sum of taxels)",
            series: &series,
        }
        .to_svg();
        let p = ctx.path("traces.svg");
        write_text(&p, &svg)?;
        outputs.push(ctx.digest(&p)?);
        let p = ctx.path("traces.csv");
        let mut w = create(&p)?;
        whisker_core::features::write_features_csv(&mut w, &stream)?;
        w.flush()?;
        drop(w);
        outputs.push(ctx.digest(&p)?);
    }

    if outputs.is_empty() {
        return Err(HarnessError::Data(format!(
            "nothing to plot in {}: run fit-speed or simulate first",
            ctx.out.display()
        )));
    }
    let mut stage = ctx.stage("plot", t0);
    stage.inputs = inputs;
    stage.outputs = outputs;
    Ok(stage)
}

fn first_slide(dir: &Path) -> Result<Option<PathBuf>> {
    if !dir.exists() {
        return Ok(None);
    }
    let mut found: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            name.starts_with("slide_") && name.ends_with(".csv")
        })
        .collect();
    found.sort();
    Ok(found.into_iter().next())
}

/// Run one parsed command line. Returns the manifest as saved.
pub fn run(cli: Cli) -> Result<RunManifest> {
    let ctx = Ctx::from_cli(&cli)?;
    ctx.cfg.validate()?;
    let pool = {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cli.workers {
            b = b.num_threads(n);
        }
        b.build().map_err(|e| HarnessError::Usage(e.to_string()))?
    };
    fs::create_dir_all(&ctx.out)?;
    let mut manifest = RunManifest::open(&ctx.out, ctx.cfg.seed)?;

    pool.install(|| -> Result<()> {
        match &cli.command {
            Command::Simulate(a) => manifest.record(simulate(&ctx, a)?),
            Command::Dataset(a) => manifest.record(dataset(&ctx, a)?),
            Command::Train(a) => {
                let s = train_cmd(&ctx, a, &manifest)?;
                manifest.record(s);
            }
            Command::Eval(a) => {
                let (s, grid) = eval_cmd(&ctx, a, &manifest)?;
                print!("{}", grid.to_markdown());
                manifest.record(s);
            }
            Command::FitSpeed(a) => manifest.record(fit_speed(&ctx, a)?),
            Command::Direction(a) => manifest.record(direction(&ctx, a)?),
            Command::Plot(a) => {
                let s = plot(&ctx, a, &manifest)?;
                manifest.record(s);
            }
            Command::Pipeline(a) => {
                let sim = SimulateArgs {
                    pattern: ctx.cfg.analysis.sweep_pattern,
                    depth: ctx.cfg.analysis.sweep_depth_mm,
                    speed: vec![ctx.cfg.simulator.slide.speed_mm_s],
                    direction: ctx.cfg.simulator.slide.direction_deg,
                    repeats: 1,
                    frames: false,
                };
                manifest.record(simulate(&ctx, &sim)?);
                manifest.record(dataset(&ctx, a)?);
                let s = train_cmd(
                    &ctx,
                    &TrainArgs {
                        dataset: None,
                        task: vec![],
                        model: vec![],
                        test_fraction: None,
                    },
                    &manifest,
                )?;
                manifest.record(s);
                let (s, grid) = eval_cmd(
                    &ctx,
                    &EvalArgs {
                        dataset: None,
                        models: None,
                    },
                    &manifest,
                )?;
                print!("{}", grid.to_markdown());
                manifest.record(s);
                manifest.record(fit_speed(
                    &ctx,
                    &FitSpeedArgs {
                        speeds: vec![],
                        repeats: None,
                        pattern: None,
                        depth: None,
                    },
                )?);
                manifest.record(direction(&ctx, &DirectionArgs { seeds: None })?);
                let s = plot(&ctx, &PlotArgs { slide: None }, &manifest)?;
                manifest.record(s);
            }
        }
        Ok(())
    })?;
    manifest.save(&ctx.out)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "whisker",
            "simulate",
            "--pattern",
            "saw",
            "--depth",
            "3",
            "--speed",
            "150",
            "--direction",
            "0",
            "--seed",
            "42",
            "--out",
            "x",
        ])
        .unwrap();
        let ctx = Ctx::from_cli(&cli).unwrap();
        assert_eq!(ctx.cfg.seed, 42);
        assert_eq!(ctx.out, PathBuf::from("x"));
        assert!(Cli::try_parse_from(["whisker", "simulate", "--pattern", "zigzag"]).is_err());
    }

    #[test]
    fn speed_tags_are_path_safe() {
        assert_eq!(speed_tag(150.0), "150");
        assert_eq!(speed_tag(112.5), "112p5");
    }
}

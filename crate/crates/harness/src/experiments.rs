//! Experiment drivers shared by the CLI and the acceptance suite.

use serde::{Deserialize, Serialize};
use whisker_core::analysis::{
    event_duration, fit_log_regression, identify_direction, RegressionFit,
};
use whisker_core::detector::{calibrate_and_detect, TactileSample};
use whisker_core::features::features_stream;
use whisker_core::learn::{
    evaluate, split, train, LabeledDataset, Model, ModelSpec, ReportGrid, Split, Task,
};
use whisker_core::sim::{simulate_slide, SlideConfig, TextureSpec};
use whisker_core::taxel::TaxelMatrix;

use crate::config::ExperimentConfig;
use crate::error::{HarnessError, Result};

/// Taxel stream of one slide under the configured simulator.
pub fn simulate(
    cfg: &ExperimentConfig,
    texture: &TextureSpec,
    slide: &SlideConfig,
) -> Result<Vec<TaxelMatrix>> {
    Ok(simulate_slide(texture, slide, &cfg.simulator.array)?)
}

pub fn slide_with(
    cfg: &ExperimentConfig,
    speed_mm_s: f64,
    direction_deg: u16,
    seed: u64,
) -> SlideConfig {
    SlideConfig {
        speed_mm_s,
        direction_deg,
        seed,
        ..cfg.simulator.slide.clone()
    }
}

/// Single capture of a stream, if the detector produced exactly one.
pub fn single_capture(
    cfg: &ExperimentConfig,
    taxels: &[TaxelMatrix],
) -> Result<Option<TactileSample>> {
    let stream = features_stream(taxels, &cfg.features);
    let mut d = calibrate_and_detect(&stream, &cfg.detector)?;
    Ok(if d.samples.len() == 1 {
        d.samples.pop()
    } else {
        None
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub speed_mm_s: f64,
    pub repeat: usize,
    pub seed: u64,
    pub duration_frames: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedSweep {
    pub points: Vec<SweepPoint>,
    pub fit: RegressionFit,
}

/// Slide the sweep texture at every configured speed, measure event
/// durations and fit them against `log10(speed)`.
pub fn speed_sweep(cfg: &ExperimentConfig) -> Result<SpeedSweep> {
    let texture = cfg.analysis.sweep_texture()?;
    let mut points = Vec::new();
    for (si, &speed) in cfg.analysis.sweep_speeds.iter().enumerate() {
        for repeat in 0..cfg.analysis.sweep_repeats {
            let seed = cfg.stage_seed(&["sweep", &si.to_string(), &repeat.to_string()]);
            let slide = slide_with(cfg, speed, cfg.simulator.slide.direction_deg, seed);
            let taxels = simulate(cfg, &texture, &slide)?;
            points.push(SweepPoint {
                speed_mm_s: speed,
                repeat,
                seed,
                duration_frames: event_duration(&taxels, &cfg.analysis.duration),
            });
        }
    }
    let pairs: Vec<(f64, f64)> = points
        .iter()
        .filter_map(|p| p.duration_frames.map(|d| (p.speed_mm_s, d as f64)))
        .collect();
    let missing = points.len() - pairs.len();
    if missing > 0 {
        log::warn!("{missing} sweep slides had no valid frame and were left out of the fit");
    }
    let fit = fit_log_regression(&pairs)?;
    Ok(SpeedSweep { points, fit })
}

pub fn write_sweep_csv<W: std::io::Write>(w: W, sweep: &SpeedSweep) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "speed_mm_s",
        "repeat",
        "seed",
        "duration_frames",
        "fitted_frames",
    ])?;
    for p in &sweep.points {
        out.write_record([
            p.speed_mm_s.to_string(),
            p.repeat.to_string(),
            p.seed.to_string(),
            p.duration_frames
                .map_or_else(String::new, |d| d.to_string()),
            format!("{:.6}", sweep.fit.predict(p.speed_mm_s)),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepPoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |what: &str| HarnessError::Data(format!("sweep csv: bad {what} in {rec:?}"));
        out.push(SweepPoint {
            speed_mm_s: field(0).parse().map_err(|_| bad("speed"))?,
            repeat: field(1).parse().map_err(|_| bad("repeat"))?,
            seed: field(2).parse().map_err(|_| bad("seed"))?,
            duration_frames: match field(3) {
                "" => None,
                s => Some(s.parse().map_err(|_| bad("duration"))?),
            },
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionTrial {
    pub specimen: u8,
    pub direction_deg: u16,
    pub seed: u64,
    /// `None` when the slide did not give exactly one capture or the
    /// ordering was ambiguous.
    pub estimated_deg: Option<u16>,
    pub row_corr: Option<f64>,
    pub col_corr: Option<f64>,
}

impl DirectionTrial {
    pub fn correct(&self) -> bool {
        self.estimated_deg == Some(self.direction_deg)
    }
}

/// Every non-flat specimen in all four directions, `direction_seeds` slides
/// each. Direction is read from the captured sample.
pub fn direction_trials(cfg: &ExperimentConfig) -> Result<Vec<DirectionTrial>> {
    let mut out = Vec::new();
    for texture in TextureSpec::specimens()
        .into_iter()
        .filter(|t| t.depth_mm > 0)
    {
        let id = texture.specimen_id();
        for direction in [0u16, 90, 180, 270] {
            for i in 0..cfg.analysis.direction_seeds {
                let seed = cfg.stage_seed(&[
                    "direction",
                    &id.to_string(),
                    &direction.to_string(),
                    &i.to_string(),
                ]);
                let slide = slide_with(cfg, cfg.simulator.slide.speed_mm_s, direction, seed);
                let taxels = simulate(cfg, &texture, &slide)?;
                let est = single_capture(cfg, &taxels)?
                    .map(|s| identify_direction(&s.frames(), cfg.analysis.activation));
                let (estimated_deg, row_corr, col_corr) = match est {
                    Some(Ok(e)) => (Some(e.direction_deg), Some(e.row_corr), Some(e.col_corr)),
                    _ => (None, None, None),
                };
                out.push(DirectionTrial {
                    specimen: id,
                    direction_deg: direction,
                    seed,
                    estimated_deg,
                    row_corr,
                    col_corr,
                });
            }
        }
    }
    Ok(out)
}

pub fn write_direction_csv<W: std::io::Write>(w: W, trials: &[DirectionTrial]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "specimen",
        "direction_deg",
        "seed",
        "estimated_deg",
        "row_corr",
        "col_corr",
    ])?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
    for t in trials {
        out.write_record([
            t.specimen.to_string(),
            t.direction_deg.to_string(),
            t.seed.to_string(),
            t.estimated_deg.map_or_else(String::new, |d| d.to_string()),
            opt(t.row_corr),
            opt(t.col_corr),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub struct Classification {
    pub split: Split,
    pub models: Vec<Model>,
    pub grid: ReportGrid,
}

pub fn split_dataset(cfg: &ExperimentConfig, data: &LabeledDataset) -> Result<Split> {
    Ok(split(
        &data.labels(Task::Specimens10),
        cfg.learning.test_fraction,
        data.split_seed,
    )?)
}

/// Train every configured model on every configured task and score it on the
/// held-out split.
pub fn classify(cfg: &ExperimentConfig, data: &LabeledDataset) -> Result<Classification> {
    let split = split_dataset(cfg, data)?;
    if split.test.is_empty() {
        return Err(HarnessError::Usage("test split is empty".into()));
    }
    let (train_set, test_set) = (data.subset(&split.train), data.subset(&split.test));
    let mut models = Vec::new();
    let mut grid = ReportGrid::default();
    for &task in &cfg.learning.tasks {
        for family in &cfg.learning.models {
            let spec = ModelSpec {
                family: family.clone(),
                train_seed: cfg.train_seed(task, family),
            };
            let model = train(&spec, &train_set, task)?;
            grid.reports.push(evaluate(&model, &test_set)?);
            models.push(model);
        }
    }
    Ok(Classification {
        split,
        models,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_csv_round_trip() {
        let sweep = SpeedSweep {
            points: vec![
                SweepPoint {
                    speed_mm_s: 100.0,
                    repeat: 0,
                    seed: 3,
                    duration_frames: Some(40),
                },
                SweepPoint {
                    speed_mm_s: 200.0,
                    repeat: 1,
                    seed: 4,
                    duration_frames: None,
                },
            ],
            fit: RegressionFit {
                intercept: 1.0,
                slope: -1.0,
                r2: Some(1.0),
                n: 1,
            },
        };
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &sweep).unwrap();
        assert_eq!(read_sweep_csv(&buf[..]).unwrap(), sweep.points);
    }

    #[test]
    fn small_sweep_has_negative_slope() {
        let mut cfg = ExperimentConfig::default();
        cfg.analysis.sweep_speeds = vec![100.0, 150.0, 200.0];
        cfg.analysis.sweep_repeats = 2;
        let s = speed_sweep(&cfg).unwrap();
        assert_eq!(s.points.len(), 6);
        assert!(s.fit.slope < 0.0);
    }
}

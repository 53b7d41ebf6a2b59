use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Matrix, Task};
use crate::detector::{calibrate_and_detect, DetectorConfig, SampleLabel, TactileSample};
use crate::features::{features_stream, FeatureConfig};
use crate::seed;
use crate::sim::{simulate_slide, SlideConfig, TextureSpec, WhiskerArraySpec};
use crate::{Error, Result};

/// Everything needed to reproduce a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BuildConfig {
    pub slides_per_specimen: usize,
    pub root_seed: u64,
    /// Template for every slide. Its seed is replaced per slide.
    pub slide: SlideConfig,
    pub array: WhiskerArraySpec,
    pub features: FeatureConfig,
    pub detector: DetectorConfig,
    /// Attempts per slide before giving up on it.
    pub max_attempts: usize,
    /// Minimum fraction of slides per specimen that must yield exactly one
    /// capture on the first attempt.
    pub min_capture_rate: f64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            slides_per_specimen: 100,
            root_seed: 0,
            slide: SlideConfig::default(),
            array: WhiskerArraySpec::default(),
            features: FeatureConfig::default(),
            detector: DetectorConfig::default(),
            max_attempts: 5,
            min_capture_rate: 0.95,
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slides_per_specimen == 0 {
            return Err(Error::Config(
                "slides_per_specimen must be at least 1".into(),
            ));
        }
        if self.max_attempts == 0 {
            return Err(Error::Config("max_attempts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_capture_rate) {
            return Err(Error::Config("min_capture_rate must lie in [0, 1]".into()));
        }
        self.slide.validate()?;
        self.array.validate()?;
        self.features.validate()?;
        self.detector.validate()
    }

    pub fn split_seed(&self) -> u64 {
        seed::derive(self.root_seed, &["split"])
    }

    /// Seed of one slide attempt.
    pub fn slide_seed(&self, specimen: u8, slide: usize, attempt: usize) -> u64 {
        seed::derive(
            self.root_seed,
            &[
                "dataset",
                &specimen.to_string(),
                &slide.to_string(),
                &attempt.to_string(),
            ],
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    /// Per specimen (index 0 is specimen 1): slides that gave exactly one
    /// capture on the first attempt.
    pub first_attempt_ok: Vec<usize>,
    /// Per specimen: extra attempts spent on re-seeding.
    pub reseeds: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub samples: Vec<TactileSample>,
    pub split_seed: u64,
}

impl LabeledDataset {
    /// Check that every sample is labelled, has the same shape and carries a
    /// consistent specimen/pattern/depth triple.
    pub fn new(samples: Vec<TactileSample>, split_seed: u64) -> Result<Self> {
        let width = samples.first().map_or(0, |s| s.x.len());
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != width {
                return Err(Error::Dataset(format!(
                    "sample {i} has {} frames, expected {width}",
                    s.x.len()
                )));
            }
            let label = s
                .label
                .as_ref()
                .ok_or_else(|| Error::Dataset(format!("sample {i} is unlabelled")))?;
            let spec = TextureSpec::from_specimen_id(label.specimen)
                .map_err(|e| Error::Dataset(format!("sample {i}: {e}")))?;
            if spec.pattern != label.pattern || spec.depth_mm != label.depth_mm {
                return Err(Error::Dataset(format!(
                    "sample {i}: specimen {} is {}{}, label says {}{}",
                    label.specimen, spec.pattern, spec.depth_mm, label.pattern, label.depth_mm
                )));
            }
        }
        Ok(Self {
            samples,
            split_seed,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn label(&self, i: usize) -> &SampleLabel {
        self.samples[i]
            .label
            .as_ref()
            .expect("validated on construction")
    }

    pub fn labels(&self, task: Task) -> Vec<usize> {
        (0..self.len())
            .map(|i| task.class_of(self.label(i)))
            .collect()
    }

    /// Flattened features and class labels.
    pub fn design(&self, task: Task) -> Result<(Matrix, Vec<usize>)> {
        let rows: Vec<Vec<f64>> = self.samples.iter().map(TactileSample::flatten).collect();
        Ok((Matrix::from_rows(&rows)?, self.labels(task)))
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            split_seed: self.split_seed,
        }
    }

    /// SHA-256 of the JSONL serialization.
    pub fn digest(&self) -> Result<String> {
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &self.samples)?;
        Ok(seed::digest_hex(&buf))
    }
}

pub fn write_jsonl<W: Write>(mut w: W, samples: &[TactileSample]) -> Result<()> {
    for s in samples {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<TactileSample>> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        out.push(s);
    }
    Ok(out)
}

struct SlideOutcome {
    sample: TactileSample,
    first_attempt_ok: bool,
    attempts: usize,
}

fn run_slide(cfg: &BuildConfig, texture: TextureSpec, slide_idx: usize) -> Result<SlideOutcome> {
    let specimen = texture.specimen_id();
    let digest = cfg.detector.digest();
    for attempt in 0..cfg.max_attempts {
        let seed = cfg.slide_seed(specimen, slide_idx, attempt);
        let slide = SlideConfig {
            seed,
            ..cfg.slide.clone()
        };
        let taxels = simulate_slide(&texture, &slide, &cfg.array)?;
        let stream = features_stream(&taxels, &cfg.features);
        let detection = calibrate_and_detect(&stream, &cfg.detector)?;
        if detection.samples.len() == 1 {
            let mut sample = detection.samples.into_iter().next().unwrap();
            sample.label = Some(SampleLabel {
                specimen,
                pattern: texture.pattern,
                depth_mm: texture.depth_mm,
                speed_mm_s: slide.speed_mm_s,
                direction_deg: slide.direction_deg,
            });
            sample.seed = Some(seed);
            sample.config_digest = digest.clone();
            return Ok(SlideOutcome {
                sample,
                first_attempt_ok: attempt == 0,
                attempts: attempt + 1,
            });
        }
        log::warn!(
            "specimen {specimen} slide {slide_idx} attempt {attempt}: {} captures ({} discarded), re-seeding",
            detection.samples.len(),
            detection.discarded
        );
    }
    Err(Error::Dataset(format!(
        "specimen {specimen} slide {slide_idx}: no single capture in {} attempts",
        cfg.max_attempts
    )))
}

/// Simulate `slides_per_specimen` slides of every specimen and keep one
/// capture per slide. Slides run on the current rayon pool; output order is
/// specimen-major regardless of scheduling.
pub fn build_dataset(cfg: &BuildConfig) -> Result<(LabeledDataset, BuildReport)> {
    cfg.validate()?;
    let jobs: Vec<(TextureSpec, usize)> = TextureSpec::specimens()
        .into_iter()
        .flat_map(|t| (0..cfg.slides_per_specimen).map(move |i| (t, i)))
        .collect();
    let outcomes: Vec<Result<SlideOutcome>> = jobs
        .par_iter()
        .map(|&(t, i)| run_slide(cfg, t, i))
        .collect();

    let mut report = BuildReport {
        first_attempt_ok: vec![0; 10],
        reseeds: vec![0; 10],
    };
    let mut samples = Vec::with_capacity(jobs.len());
    let mut failures = Vec::new();
    for ((t, _), outcome) in jobs.iter().zip(outcomes) {
        let k = t.specimen_id() as usize - 1;
        match outcome {
            Ok(o) => {
                report.first_attempt_ok[k] += o.first_attempt_ok as usize;
                report.reseeds[k] += o.attempts - 1;
                samples.push(o.sample);
            }
            Err(e) => failures.push(e.to_string()),
        }
    }

    let low: Vec<String> = report
        .first_attempt_ok
        .iter()
        .enumerate()
        .filter(|&(_, &ok)| (ok as f64) < cfg.min_capture_rate * cfg.slides_per_specimen as f64)
        .map(|(k, &ok)| format!("specimen {}: {ok}/{}", k + 1, cfg.slides_per_specimen))
        .collect();
    if !low.is_empty() || !failures.is_empty() {
        let mut msg = format!(
            "capture rate below {:.0}%: [{}]",
            cfg.min_capture_rate * 100.0,
            low.join(", ")
        );
        if !failures.is_empty() {
            msg.push_str(&format!(
                "; {} slides failed, first: {}",
                failures.len(),
                failures[0]
            ));
        }
        return Err(Error::Dataset(msg));
    }

    Ok((LabeledDataset::new(samples, cfg.split_seed())?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::Pattern;

    fn small(n: usize) -> BuildConfig {
        BuildConfig {
            slides_per_specimen: n,
            root_seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn one_slide_per_specimen() {
        let (data, report) = build_dataset(&small(1)).unwrap();
        assert_eq!(data.len(), 10);
        let ids: Vec<u8> = (0..10).map(|i| data.label(i).specimen).collect();
        assert_eq!(ids, (1..=10).collect::<Vec<u8>>());
        assert!(data.samples.iter().all(|s| s.x.len() == 70));
        assert_eq!(report.first_attempt_ok.iter().sum::<usize>(), 10);
    }

    #[test]
    fn digest_is_reproducible() {
        let (a, _) = build_dataset(&small(2)).unwrap();
        let (b, _) = build_dataset(&small(2)).unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        let (c, _) = build_dataset(&BuildConfig {
            root_seed: 8,
            ..small(2)
        })
        .unwrap();
        assert_ne!(a.digest().unwrap(), c.digest().unwrap());
    }

    #[test]
    fn jsonl_round_trip() {
        let (data, _) = build_dataset(&small(1)).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &data.samples).unwrap();
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, data.samples);
    }

    #[test]
    fn impossible_capture_rate_fails() {
        // a capture longer than the whole stream is always discarded
        let mut cfg = small(1);
        cfg.detector.l = 500;
        cfg.max_attempts = 2;
        let err = build_dataset(&cfg).unwrap_err();
        assert!(
            matches!(err, Error::Dataset(ref m) if m.contains("capture rate")),
            "{err}"
        );
    }

    #[test]
    fn inconsistent_labels_rejected() {
        let (data, _) = build_dataset(&small(1)).unwrap();
        let mut s = data.samples[3].clone();
        s.label.as_mut().unwrap().pattern = Pattern::Saw;
        assert!(LabeledDataset::new(vec![s], 0).is_err());
        let mut s = data.samples[0].clone();
        s.label = None;
        assert!(LabeledDataset::new(vec![s], 0).is_err());
    }
}

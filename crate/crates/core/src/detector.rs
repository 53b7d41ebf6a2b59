//! Event-driven capture of fixed-length tactile samples.
//!
//! The detector first consumes `5 * m` pre-contact frames and records, per
//! channel, the mean `m`-frame window sum `eta_k`. It then scans the stream
//! in steps of `m` frames. At each step the channels are tested in order
//! `k = 1..=10`; the first channel whose window sum exceeds `b * eta_k`
//! triggers a capture of frames `t - c ..= t + l - c - 1`, and scanning
//! resumes at `t + l`.
//!
//! Log features are mostly negative before contact, which turns `b > 1` into
//! a threshold *below* the baseline. In [`TriggerMode::Shifted`] a channel
//! whose calibration window contains negative values is compared after
//! subtracting the analytic floor `m * ln(epsilon)` from both sides.
//! Channels with nonnegative calibration data are compared verbatim, so the
//! two modes agree on nonnegative streams.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::sim::Pattern;
use crate::{Error, Result, CHANNELS};

/// Number of windows averaged during calibration.
pub const BASELINE_WINDOWS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TriggerMode {
    Literal,
    #[default]
    Shifted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    /// Window width in frames.
    pub m: usize,
    /// Frames captured before the trigger position.
    pub c: usize,
    /// Threshold multiplier.
    pub b: f64,
    /// Sample length in frames.
    pub l: usize,
    pub mode: TriggerMode,
    /// Floor used by the feature stage; sets the shift in shifted mode.
    pub epsilon: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            m: 5,
            c: 10,
            b: 1.2,
            l: 70,
            mode: TriggerMode::Shifted,
            epsilon: 1e-6,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::Config("window width m must be at least 1".into()));
        }
        if self.c >= self.l {
            return Err(Error::Config(format!(
                "backtrack c={} must be below sample length l={}",
                self.c, self.l
            )));
        }
        if self.c > BASELINE_WINDOWS * self.m {
            return Err(Error::Config(format!(
                "backtrack c={} reaches before calibration (5*m = {})",
                self.c,
                BASELINE_WINDOWS * self.m
            )));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(Error::Config(
                "threshold multiplier b must be positive".into(),
            ));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::Config("epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn calibration_frames(&self) -> usize {
        BASELINE_WINDOWS * self.m
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        crate::seed::digest_hex(&serde_json::to_vec(self).expect("config serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    /// Mean window sum per channel.
    pub eta: [f64; CHANNELS],
    /// Amount subtracted from both sides of the trigger comparison.
    pub offset: [f64; CHANNELS],
    /// First frame after calibration.
    pub calibration_end: usize,
}

impl Baseline {
    /// Threshold that the (unshifted) window sum of channel `k` must exceed.
    pub fn threshold(&self, k: usize, b: f64) -> f64 {
        b * (self.eta[k] - self.offset[k]) + self.offset[k]
    }
}

pub fn calibrate(stream: &[FeatureVector], cfg: &DetectorConfig) -> Result<Baseline> {
    cfg.validate()?;
    let needed = cfg.calibration_frames();
    if stream.len() < needed {
        return Err(Error::CalibrationUnderrun {
            needed,
            available: stream.len(),
        });
    }
    let mut eta = [0.0; CHANNELS];
    let mut negative = [false; CHANNELS];
    for fv in &stream[..needed] {
        for k in 0..CHANNELS {
            eta[k] += fv.f[k];
            negative[k] |= fv.f[k] < 0.0;
        }
    }
    let shift = cfg.m as f64 * cfg.epsilon.ln();
    let mut offset = [0.0; CHANNELS];
    for k in 0..CHANNELS {
        eta[k] /= BASELINE_WINDOWS as f64;
        if cfg.mode == TriggerMode::Shifted && negative[k] {
            offset[k] = shift;
        }
    }
    Ok(Baseline {
        eta,
        offset,
        calibration_end: needed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLabel {
    /// Specimen id, 1..=10.
    pub specimen: u8,
    pub pattern: Pattern,
    pub depth_mm: u8,
    pub speed_mm_s: f64,
    pub direction_deg: u16,
}

/// One captured sample. Serialized as a JSONL record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TactileSample {
    /// `l` consecutive feature frames, each with 10 channels.
    pub x: Vec<[f64; CHANNELS]>,
    pub trigger_frame: usize,
    /// 1-based channel index.
    pub trigger_channel: usize,
    pub label: Option<SampleLabel>,
    pub seed: Option<u64>,
    pub config_digest: String,
}

impl TactileSample {
    pub fn channel(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.x.iter().map(move |f| f[k])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.x.iter().flatten().copied().collect()
    }

    /// Frames as feature vectors, indexed from the capture start.
    pub fn frames(&self) -> Vec<FeatureVector> {
        self.x
            .iter()
            .enumerate()
            .map(|(i, f)| FeatureVector {
                f: *f,
                frame_index: i,
            })
            .collect()
    }
}

/// Streaming detector. Feed frames in order with [`Detector::push`].
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    digest: String,
    baseline: Option<Baseline>,
    calib: Vec<FeatureVector>,
    /// Recent frames; `history[0]` is stream position `history_start`.
    history: VecDeque<[f64; CHANNELS]>,
    history_start: usize,
    /// Stream position of the next frame to arrive.
    seen: usize,
    /// Start of the next window to test.
    next_t: usize,
    /// (start, trigger frame, channel) of a capture still filling.
    pending: Option<(usize, usize, usize)>,
    discarded: usize,
}

impl Detector {
    /// A detector that calibrates itself on the first `5 * m` frames.
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::build(cfg, None))
    }

    /// A detector with an existing baseline. The stream must still be fed
    /// from position 0; scanning starts at `baseline.calibration_end`.
    pub fn with_baseline(cfg: DetectorConfig, baseline: Baseline) -> Result<Self> {
        cfg.validate()?;
        Ok(Self::build(cfg, Some(baseline)))
    }

    fn build(cfg: DetectorConfig, baseline: Option<Baseline>) -> Self {
        let next_t = baseline
            .as_ref()
            .map_or(cfg.calibration_frames(), |b| b.calibration_end);
        Self {
            digest: cfg.digest(),
            cfg,
            baseline,
            calib: Vec::new(),
            history: VecDeque::new(),
            history_start: 0,
            seen: 0,
            next_t,
            pending: None,
            discarded: 0,
        }
    }

    pub fn baseline(&self) -> Option<&Baseline> {
        self.baseline.as_ref()
    }

    /// Captures dropped because the stream ended before they were complete.
    pub fn discarded(&self) -> usize {
        self.discarded
    }

    fn frame(&self, pos: usize) -> &[f64; CHANNELS] {
        &self.history[pos - self.history_start]
    }

    pub fn push(&mut self, fv: &FeatureVector) -> Result<Option<TactileSample>> {
        let pos = self.seen;
        self.seen += 1;
        self.history.push_back(fv.f);

        if self.baseline.is_none() {
            self.calib.push(*fv);
            if self.calib.len() == self.cfg.calibration_frames() {
                self.baseline = Some(calibrate(&self.calib, &self.cfg)?);
                self.calib.clear();
            }
        }

        let mut out = None;
        if let Some((start, trigger, channel)) = self.pending {
            if pos + 1 == start + self.cfg.l {
                let x = (start..=pos).map(|p| *self.frame(p)).collect();
                out = Some(TactileSample {
                    x,
                    trigger_frame: trigger,
                    trigger_channel: channel + 1,
                    label: None,
                    seed: None,
                    config_digest: self.digest.clone(),
                });
                self.pending = None;
            }
        }

        let due = self.pending.is_none() && pos + 1 == self.next_t + self.cfg.m;
        if let Some(baseline) = self.baseline.as_ref().filter(|_| due) {
            let t = self.next_t;
            let hit = (0..CHANNELS).find(|&k| {
                let sum: f64 = (t..t + self.cfg.m).map(|p| self.frame(p)[k]).sum();
                sum - baseline.offset[k] > self.cfg.b * (baseline.eta[k] - baseline.offset[k])
            });
            match hit {
                Some(k) => {
                    self.pending = Some((t - self.cfg.c, t, k));
                    self.next_t = t + self.cfg.l;
                    // a capture may already be complete when l - c <= m
                    let start = t - self.cfg.c;
                    if pos + 1 >= start + self.cfg.l {
                        let x = (start..start + self.cfg.l)
                            .map(|p| *self.frame(p))
                            .collect();
                        out = Some(TactileSample {
                            x,
                            trigger_frame: t,
                            trigger_channel: k + 1,
                            label: None,
                            seed: None,
                            config_digest: self.digest.clone(),
                        });
                        self.pending = None;
                    }
                }
                None => self.next_t = t + self.cfg.m,
            }
        }

        // keep enough history for the earliest capture start still possible
        let keep_from = match self.pending {
            Some((start, _, _)) => start,
            None => self.next_t.saturating_sub(self.cfg.c),
        };
        while self.history_start < keep_from && !self.history.is_empty() {
            self.history.pop_front();
            self.history_start += 1;
        }
        Ok(out)
    }

    /// Close the stream, counting an unfinished capture as discarded.
    pub fn finish(&mut self) -> usize {
        if self.pending.take().is_some() {
            self.discarded += 1;
        }
        self.discarded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub samples: Vec<TactileSample>,
    pub discarded: usize,
}

/// Run the detector over a whole stream whose first frames were used for
/// `baseline`.
pub fn detect(
    stream: &[FeatureVector],
    baseline: &Baseline,
    cfg: &DetectorConfig,
) -> Result<Detection> {
    let mut det = Detector::with_baseline(cfg.clone(), baseline.clone())?;
    let mut samples = Vec::new();
    for fv in stream {
        if let Some(s) = det.push(fv)? {
            samples.push(s);
        }
    }
    let discarded = det.finish();
    Ok(Detection { samples, discarded })
}

/// Calibrate on the stream head, then detect over the whole stream.
pub fn calibrate_and_detect(stream: &[FeatureVector], cfg: &DetectorConfig) -> Result<Detection> {
    let baseline = calibrate(stream, cfg)?;
    detect(stream, &baseline, cfg)
}

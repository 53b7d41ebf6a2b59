//! Slide-level analysis: event duration, speed regression and direction.

use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::taxel::TaxelMatrix;
use crate::{Error, Result, CHANNELS, GRID};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationConfig {
    /// A frame is valid when its 25-taxel sum exceeds this value.
    pub valid_threshold: f64,
}

impl Default for DurationConfig {
    fn default() -> Self {
        Self {
            valid_threshold: 0.0475,
        }
    }
}

/// Frames between the first and last valid frame, or `None` when no frame
/// is valid.
pub fn event_duration(stream: &[TaxelMatrix], cfg: &DurationConfig) -> Option<usize> {
    let valid = |o: &TaxelMatrix| {
        let s = o.total();
        s > cfg.valid_threshold && s != 0.0
    };
    let first = stream.iter().position(valid)?;
    let last = stream.iter().rposition(valid)?;
    Some(last - first)
}

/// `duration = intercept + slope * log10(speed)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub intercept: f64,
    pub slope: f64,
    /// `None` when the durations have zero variance.
    pub r2: Option<f64>,
    pub n: usize,
}

impl RegressionFit {
    pub fn predict(&self, speed: f64) -> f64 {
        self.intercept + self.slope * speed.log10()
    }
}

/// Ordinary least squares of duration on `log10(speed)`.
pub fn fit_log_regression(points: &[(f64, f64)]) -> Result<RegressionFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least 2 points, got {n}"
        )));
    }
    if let Some(&(s, _)) = points.iter().find(|(s, _)| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::DegenerateFit(format!("speed {s} has no logarithm")));
    }
    let xs: Vec<f64> = points.iter().map(|(s, _)| s.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, d)| d).collect();
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= f64::EPSILON * nf * mx.abs().max(1.0) {
        return Err(Error::DegenerateFit("all speeds are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = (ss_tot > 0.0).then(|| (1.0 - ss_res / ss_tot).clamp(0.0, 1.0));
    Ok(RegressionFit {
        intercept,
        slope,
        r2,
        n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum ActivationRule {
    /// Frame of each channel's maximum (first one on ties).
    #[default]
    Argmax,
    /// First frame at which a channel rises past `fraction` of its own
    /// min-to-max range.
    FirstCrossing { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionEstimate {
    pub direction_deg: u16,
    /// Rank correlation between activation time and row index.
    pub row_corr: f64,
    /// Rank correlation between activation time and column index.
    pub col_corr: f64,
}

/// Activation frame per channel.
pub fn activation_times(stream: &[FeatureVector], rule: ActivationRule) -> [usize; CHANNELS] {
    let mut out = [0; CHANNELS];
    for (k, slot) in out.iter_mut().enumerate() {
        let mut series = stream.iter().map(|fv| fv.f[k]);
        *slot = match rule {
            ActivationRule::Argmax => {
                let mut best = (0, f64::NEG_INFINITY);
                for (t, v) in series.enumerate() {
                    if v > best.1 {
                        best = (t, v);
                    }
                }
                best.0
            }
            ActivationRule::FirstCrossing { fraction } => {
                let (lo, hi) = stream
                    .iter()
                    .map(|fv| fv.f[k])
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                        (lo.min(v), hi.max(v))
                    });
                let level = lo + fraction * (hi - lo);
                series.position(|v| v > level).unwrap_or(0)
            }
        };
    }
    out
}

/// Average ranks (1-based), ties share the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman correlation between `times` and their index. Zero when the
/// times carry no ordering.
pub fn rank_correlation(times: &[f64]) -> f64 {
    let n = times.len();
    let rx: Vec<f64> = (1..=n).map(|i| i as f64).collect();
    let ry = ranks(times);
    let mean = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in rx.iter().zip(&ry) {
        sxy += (x - mean) * (y - mean);
        sxx += (x - mean).powi(2);
        syy += (y - mean).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Classify the slide direction from the order in which rows or columns
/// light up.
///
/// Columns lighting in ascending order mean 0° (+x), descending 180° (-x).
/// Rows lighting in descending order mean 90° (+y), ascending 270° (-y).
/// The axis with the stronger rank correlation decides.
pub fn identify_direction(
    stream: &[FeatureVector],
    rule: ActivationRule,
) -> Result<DirectionEstimate> {
    if stream.is_empty() {
        return Err(Error::IndeterminateDirection {
            rows: 0.0,
            cols: 0.0,
        });
    }
    let times = activation_times(stream, rule);
    let as_f64 = |s: &[usize]| s.iter().map(|&t| t as f64).collect::<Vec<_>>();
    let row_corr = rank_correlation(&as_f64(&times[..GRID]));
    let col_corr = rank_correlation(&as_f64(&times[GRID..]));
    let direction_deg = if col_corr.abs() > row_corr.abs() {
        if col_corr > 0.0 {
            0
        } else {
            180
        }
    } else if row_corr.abs() > col_corr.abs() {
        if row_corr < 0.0 {
            90
        } else {
            270
        }
    } else {
        return Err(Error::IndeterminateDirection {
            rows: row_corr,
            cols: col_corr,
        });
    };
    Ok(DirectionEstimate {
        direction_deg,
        row_corr,
        col_corr,
    })
}

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub epochs: usize,
}

impl Default for LinearParams {
    fn default() -> Self {
        Self { c: 1.0, epochs: 50 }
    }
}

impl LinearParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config("linear_margin: c must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config(
                "linear_margin: epochs must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// One-vs-rest hinge-loss classifier on standardized features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearMargin {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// One weight row per class; the last entry is the bias.
    pub weights: Vec<Vec<f64>>,
}

impl LinearMargin {
    pub fn fit(
        p: &LinearParams,
        x: &Matrix,
        y: &[usize],
        classes: usize,
        train_seed: u64,
    ) -> Result<Self> {
        p.validate()?;
        let (n, d) = (x.rows, x.cols);
        let mut mean = vec![0.0; d];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; d];
        for i in 0..n {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    0.0
                }
            })
            .collect();

        // standardized rows with a trailing 1 for the bias
        let z: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r: Vec<f64> = x
                    .row(i)
                    .iter()
                    .zip(&mean)
                    .zip(&scale)
                    .map(|((v, m), s)| (v - m) * s)
                    .collect();
                r.push(1.0);
                r
            })
            .collect();

        let lambda = 1.0 / (p.c * n as f64);
        let weights = (0..classes)
            .into_par_iter()
            .map(|k| {
                let target: Vec<f64> = y.iter().map(|&c| if c == k { 1.0 } else { -1.0 }).collect();
                let rng_seed = seed::derive(train_seed, &["linear", &k.to_string()]);
                pegasos(&z, &target, lambda, p.epochs, rng_seed)
            })
            .collect();
        Ok(Self {
            mean,
            scale,
            weights,
        })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let z: Vec<f64> = x
            .iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) * s)
            .collect();
        self.weights
            .iter()
            .map(|w| {
                let (bias, w) = w.split_last().expect("bias");
                w.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>() + bias
            })
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in v.iter().enumerate() {
        if s > v[best] {
            best = i;
        }
    }
    best
}

/// Stochastic subgradient descent on the L2-regularized hinge loss with step
/// `1 / (lambda t)`. The weight vector is kept as `scale * v` so the shrink
/// step costs O(1).
fn pegasos(z: &[Vec<f64>], y: &[f64], lambda: f64, epochs: usize, rng_seed: u64) -> Vec<f64> {
    let d = z[0].len();
    let mut v = vec![0.0; d];
    let mut scale = 1.0;
    let mut order: Vec<usize> = (0..z.len()).collect();
    let mut rng = seed::rng(rng_seed);
    let mut t = 0usize;
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = y[i] * scale * dot(&v, &z[i]);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                // first step: w becomes exactly zero before the update
                v.iter_mut().for_each(|a| *a = 0.0);
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if margin < 1.0 {
                let step = eta * y[i] / scale;
                for (a, b) in v.iter_mut().zip(&z[i]) {
                    *a += step * b;
                }
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|a| *a *= scale);
                scale = 1.0;
            }
        }
    }
    v.iter().map(|a| a * scale).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::argmax;
use super::tree::{grow_regressor, Binned, Tree};
use super::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BoostParams {
    pub rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub max_bins: usize,
    pub min_samples_leaf: usize,
}

impl Default for BoostParams {
    fn default() -> Self {
        Self {
            rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            max_bins: 64,
            min_samples_leaf: 1,
        }
    }
}

impl BoostParams {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.max_depth == 0 {
            return Err(Error::Config(
                "boosted_trees: rounds and max_depth must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::Config(
                "boosted_trees: learning_rate must lie in (0, 1]".into(),
            ));
        }
        if !(2..=u16::MAX as usize).contains(&self.max_bins) || self.min_samples_leaf == 0 {
            return Err(Error::Config(
                "boosted_trees: bad max_bins or min_samples_leaf".into(),
            ));
        }
        Ok(())
    }
}

/// Gradient boosting with squared error on one-hot class scores. Each round
/// adds one regression tree per class, fitted to that class's residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedTrees {
    pub init: Vec<f64>,
    /// `rounds[r][k]` is the tree for class `k` in round `r`.
    pub rounds: Vec<Vec<Tree>>,
}

impl BoostedTrees {
    pub fn fit(p: &BoostParams, x: &Matrix, y: &[usize], classes: usize) -> Result<Self> {
        p.validate()?;
        let n = x.rows;
        let data = Binned::new(x, p.max_bins);
        let mut init = vec![0.0; classes];
        for &c in y {
            init[c] += 1.0 / n as f64;
        }
        // per-class running scores
        let mut score: Vec<Vec<f64>> = init.iter().map(|&v| vec![v; n]).collect();
        let mut rounds = Vec::with_capacity(p.rounds);
        for _ in 0..p.rounds {
            let trees: Vec<Tree> = score
                .par_iter_mut()
                .enumerate()
                .map(|(k, s)| {
                    let residual: Vec<f64> =
                        (0..n).map(|i| (y[i] == k) as u8 as f64 - s[i]).collect();
                    let tree = grow_regressor(
                        &data,
                        &residual,
                        p.max_depth,
                        p.min_samples_leaf,
                        p.learning_rate,
                    );
                    for (i, v) in s.iter_mut().enumerate() {
                        *v += tree.leaf_value(x.row(i))[0];
                    }
                    tree
                })
                .collect();
            rounds.push(trees);
        }
        Ok(Self { init, rounds })
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        let mut s = self.init.clone();
        for round in &self.rounds {
            for (v, t) in s.iter_mut().zip(round) {
                *v += t.leaf_value(x)[0];
            }
        }
        s
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.scores(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn learns_interval_classes() {
        let rows: Vec<Vec<f64>> = (0..90)
            .map(|i| vec![i as f64, ((i * 7) % 13) as f64])
            .collect();
        let y: Vec<usize> = (0..90).map(|i| i / 30).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = BoostedTrees::fit(&BoostParams::default(), &x, &y, 3).unwrap();
        let correct = (0..90).filter(|&i| m.predict(x.row(i)) == y[i]).count();
        assert_eq!(correct, 90);
        assert_eq!(m.rounds.len(), 100);
        assert!(m.rounds.iter().flatten().all(|t| t.depth() <= 3));
    }

    #[test]
    fn scores_start_at_priors() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 9) as f64, (i % 4) as f64])
            .collect();
        let y: Vec<usize> = (0..40).map(|i| (i % 9 > 4) as usize).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let m = BoostedTrees::fit(
            &BoostParams {
                rounds: 5,
                ..Default::default()
            },
            &x,
            &y,
            2,
        )
        .unwrap();
        let s = m.scores(x.row(3));
        assert!(s.iter().all(|v| v.is_finite()));
        // class scores start at the priors
        assert!((m.init.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

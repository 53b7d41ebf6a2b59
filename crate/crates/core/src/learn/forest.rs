use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::argmax;
use super::tree::{grow_classifier, ClassTreeParams, Tree};
use super::Matrix;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows every tree until its leaves are pure.
    pub max_depth: Option<usize>,
    /// Features scored per split; `None` means `round(sqrt(d))`.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: None,
            max_features: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Config(
                "bagged_trees: n_trees must be at least 1".into(),
            ));
        }
        if self.max_features == Some(0) {
            return Err(Error::Config(
                "bagged_trees: max_features must be at least 1".into(),
            ));
        }
        if self.min_samples_split < 2 {
            return Err(Error::Config(
                "bagged_trees: min_samples_split must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

/// Bootstrap-aggregated gini trees. Prediction averages leaf class
/// frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaggedTrees {
    pub classes: usize,
    pub trees: Vec<Tree>,
}

impl BaggedTrees {
    pub fn fit(
        p: &ForestParams,
        x: &Matrix,
        y: &[usize],
        classes: usize,
        train_seed: u64,
    ) -> Result<Self> {
        p.validate()?;
        let n = x.rows;
        let tree_params = ClassTreeParams {
            classes,
            max_depth: p.max_depth,
            max_features: p
                .max_features
                .unwrap_or_else(|| ((x.cols as f64).sqrt().round() as usize).max(1))
                .min(x.cols),
            min_samples_split: p.min_samples_split,
        };
        let trees = (0..p.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(train_seed, &["tree", &t.to_string()]));
                let samples: Vec<usize> = if p.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_classifier(x, y, samples, &tree_params, &mut rng)
            })
            .collect();
        Ok(Self { classes, trees })
    }

    pub fn proba(&self, x: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf_value(x)) {
                *a += b;
            }
        }
        let k = self.trees.len() as f64;
        p.iter_mut().for_each(|a| *a /= k);
        p
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax(&self.proba(x))
    }
}

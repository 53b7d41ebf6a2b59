//! Texture classification: dataset assembly, stratified split, three
//! classifier families and accuracy reporting.

mod boost;
mod dataset;
mod eval;
mod forest;
mod linear;
mod split;
mod tree;

use serde::{Deserialize, Serialize};

use crate::detector::SampleLabel;
use crate::sim::DEPTHS_MM;
use crate::{Error, Result};

pub use boost::{BoostParams, BoostedTrees};
pub use dataset::{
    build_dataset, read_jsonl, write_jsonl, BuildConfig, BuildReport, LabeledDataset,
};
pub use eval::{evaluate, evaluate_raw, EvalReport, ReportGrid};
pub use forest::{BaggedTrees, ForestParams};
pub use linear::{LinearMargin, LinearParams};
pub use split::{split, Split};

/// Which label a model predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Specimens10,
    Patterns4,
    Depths4,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Specimens10, Task::Patterns4, Task::Depths4];

    pub fn classes(self) -> usize {
        match self {
            Task::Specimens10 => 10,
            Task::Patterns4 | Task::Depths4 => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Specimens10 => "specimens10",
            Task::Patterns4 => "patterns4",
            Task::Depths4 => "depths4",
        }
    }

    /// Zero-based class index of a label under this task.
    pub fn class_of(self, label: &SampleLabel) -> usize {
        match self {
            Task::Specimens10 => label.specimen as usize - 1,
            Task::Patterns4 => label.pattern.index(),
            Task::Depths4 => DEPTHS_MM
                .iter()
                .position(|&d| d == label.depth_mm)
                .expect("validated depth"),
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::Specimens10 => crate::sim::TextureSpec::specimens()
                .iter()
                .map(|t| format!("{}{}", t.pattern, t.depth_mm))
                .collect(),
            Task::Patterns4 => crate::sim::Pattern::ALL
                .iter()
                .map(|p| p.to_string())
                .collect(),
            Task::Depths4 => DEPTHS_MM.iter().map(|d| format!("{d}mm")).collect(),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "specimens10" | "specimens" => Ok(Task::Specimens10),
            "patterns4" | "patterns" => Ok(Task::Patterns4),
            "depths4" | "depths" => Ok(Task::Depths4),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

/// Dense row-major design matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub data: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl Matrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dataset("rows have different lengths".into()));
        }
        Ok(Self {
            data: rows.iter().flatten().copied().collect(),
            rows: rows.len(),
            cols,
        })
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    LinearMargin(LinearParams),
    BaggedTrees(ForestParams),
    BoostedTrees(BoostParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::LinearMargin(_) => "linear_margin",
            Family::BaggedTrees(_) => "bagged_trees",
            Family::BoostedTrees(_) => "boosted_trees",
        }
    }

    /// The three families with their default hyperparameters.
    pub fn defaults() -> [Family; 3] {
        [
            Family::LinearMargin(LinearParams::default()),
            Family::BaggedTrees(ForestParams::default()),
            Family::BoostedTrees(BoostParams::default()),
        ]
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "linear_margin" | "linear" => Ok(Family::LinearMargin(LinearParams::default())),
            "bagged_trees" | "forest" => Ok(Family::BaggedTrees(ForestParams::default())),
            "boosted_trees" | "boost" => Ok(Family::BoostedTrees(BoostParams::default())),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub train_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Classifier {
    LinearMargin(LinearMargin),
    BaggedTrees(BaggedTrees),
    BoostedTrees(BoostedTrees),
}

impl Classifier {
    pub fn predict(&self, x: &[f64]) -> usize {
        match self {
            Classifier::LinearMargin(m) => m.predict(x),
            Classifier::BaggedTrees(m) => m.predict(x),
            Classifier::BoostedTrees(m) => m.predict(x),
        }
    }
}

pub const MODEL_FORMAT: &str = "whisker-model";
pub const MODEL_VERSION: u32 = 1;

/// A trained model with enough metadata to be evaluated on its own.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub format: String,
    pub version: u32,
    pub task: Task,
    pub spec: ModelSpec,
    /// Classes present in the training set.
    pub trained_classes: Vec<usize>,
    pub classifier: Classifier,
}

impl Model {
    pub fn predict(&self, x: &[f64]) -> usize {
        self.classifier.predict(x)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Model = serde_json::from_str(s)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::Parse(format!(
                "unsupported model file {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}

/// Train on raw feature rows and zero-based class labels.
pub fn train_raw(
    spec: &ModelSpec,
    x: &Matrix,
    y: &[usize],
    classes: usize,
    task: Task,
) -> Result<Model> {
    if x.rows == 0 || x.rows != y.len() {
        return Err(Error::DegenerateModel(
            "empty or mismatched training set".into(),
        ));
    }
    let mut seen: Vec<usize> = y.to_vec();
    seen.sort_unstable();
    seen.dedup();
    if seen.len() < 2 {
        return Err(Error::DegenerateModel(format!(
            "training set has a single class ({:?})",
            seen
        )));
    }
    let classifier = match &spec.family {
        Family::LinearMargin(p) => {
            Classifier::LinearMargin(LinearMargin::fit(p, x, y, classes, spec.train_seed)?)
        }
        Family::BaggedTrees(p) => {
            Classifier::BaggedTrees(BaggedTrees::fit(p, x, y, classes, spec.train_seed)?)
        }
        Family::BoostedTrees(p) => Classifier::BoostedTrees(BoostedTrees::fit(p, x, y, classes)?),
    };
    Ok(Model {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        task,
        spec: spec.clone(),
        trained_classes: seen,
        classifier,
    })
}

/// Train a model for `task` on a labelled dataset.
pub fn train(spec: &ModelSpec, data: &LabeledDataset, task: Task) -> Result<Model> {
    let (x, y) = data.design(task)?;
    train_raw(spec, &x, &y, task.classes(), task)
}

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Matrix, Model, Task};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: Task,
    pub model: String,
    pub accuracy: f64,
    /// `confusion[truth][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub n_test: usize,
    /// Test samples whose true class never appeared in training. They are
    /// scored like any other sample and therefore always count as errors.
    pub unseen_label: usize,
}

impl EvalReport {
    pub fn correct(&self) -> usize {
        (0..self.confusion.len())
            .map(|i| self.confusion[i][i])
            .sum()
    }
}

pub fn evaluate_raw(model: &Model, x: &Matrix, y: &[usize]) -> Result<EvalReport> {
    if x.rows == 0 {
        return Err(Error::Dataset("test set is empty".into()));
    }
    let k = model.task.classes();
    let mut confusion = vec![vec![0; k]; k];
    let mut unseen = 0;
    for (i, &truth) in y.iter().enumerate() {
        if model.trained_classes.binary_search(&truth).is_err() {
            unseen += 1;
        }
        confusion[truth][model.predict(x.row(i))] += 1;
    }
    if unseen > 0 {
        log::warn!("{unseen} test samples have labels absent from training");
    }
    let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
    Ok(EvalReport {
        task: model.task,
        model: model.spec.family.name().into(),
        accuracy: correct as f64 / x.rows as f64,
        confusion,
        n_test: x.rows,
        unseen_label: unseen,
    })
}

/// Score a model on a labelled test set.
pub fn evaluate(model: &Model, test: &LabeledDataset) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Dataset("test set is empty".into()));
    }
    let (x, y) = test.design(model.task)?;
    evaluate_raw(model, &x, &y)
}

/// Accuracy grid with tasks as rows and models as columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportGrid {
    pub reports: Vec<EvalReport>,
}

impl ReportGrid {
    pub fn accuracy(&self, task: Task, model: &str) -> Option<f64> {
        self.reports
            .iter()
            .find(|r| r.task == task && r.model == model)
            .map(|r| r.accuracy)
    }

    fn axes(&self) -> (Vec<Task>, Vec<String>) {
        let mut tasks: Vec<Task> = Vec::new();
        let mut models: Vec<String> = Vec::new();
        for r in &self.reports {
            if !tasks.contains(&r.task) {
                tasks.push(r.task);
            }
            if !models.contains(&r.model) {
                models.push(r.model.clone());
            }
        }
        (tasks, models)
    }

    pub fn to_markdown(&self) -> String {
        let (tasks, models) = self.axes();
        let mut s = format!("| task | {} |\n", models.join(" | "));
        s.push_str(&format!("|---|{}\n", "---:|".repeat(models.len())));
        for t in tasks {
            let cells: Vec<String> = models
                .iter()
                .map(|m| {
                    self.accuracy(t, m)
                        .map_or_else(|| "-".into(), |a| format!("{:.1}%", 100.0 * a))
                })
                .collect();
            s.push_str(&format!("| {} | {} |\n", t.name(), cells.join(" | ")));
        }
        s
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "task",
            "model",
            "accuracy",
            "correct",
            "n_test",
            "unseen_label",
        ])?;
        for r in &self.reports {
            out.write_record([
                r.task.name().to_string(),
                r.model.clone(),
                format!("{:.6}", r.accuracy),
                r.correct().to_string(),
                r.n_test.to_string(),
                r.unseen_label.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

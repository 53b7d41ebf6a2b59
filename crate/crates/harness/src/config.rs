use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use whisker_core::analysis::{ActivationRule, DurationConfig};
use whisker_core::detector::DetectorConfig;
use whisker_core::features::FeatureConfig;
use whisker_core::learn::{BuildConfig, Family, Task};
use whisker_core::seed;
use whisker_core::sim::{Pattern, SlideConfig, TextureSpec, WhiskerArraySpec};
use whisker_core::taxel::TaxelGridConfig;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulatorConfig {
    pub slide: SlideConfig,
    pub array: WhiskerArraySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub duration: DurationConfig,
    pub activation: ActivationRule,
    /// Texture slid over in the speed sweep.
    pub sweep_pattern: Pattern,
    pub sweep_depth_mm: u8,
    pub sweep_speeds: Vec<f64>,
    pub sweep_repeats: usize,
    /// Seeded slides per direction and non-flat specimen.
    pub direction_seeds: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            duration: DurationConfig::default(),
            activation: ActivationRule::default(),
            sweep_pattern: Pattern::Tri,
            sweep_depth_mm: 3,
            sweep_speeds: (0..=10).map(|i| 100.0 + 10.0 * i as f64).collect(),
            sweep_repeats: 5,
            direction_seeds: 25,
        }
    }
}

impl AnalysisConfig {
    pub fn sweep_texture(&self) -> Result<TextureSpec> {
        Ok(TextureSpec::new(self.sweep_pattern, self.sweep_depth_mm)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningConfig {
    pub slides_per_specimen: usize,
    pub test_fraction: f64,
    pub max_attempts: usize,
    pub min_capture_rate: f64,
    pub tasks: Vec<Task>,
    pub models: Vec<Family>,
}

impl Default for LearningConfig {
    fn default() -> Self {
        Self {
            slides_per_specimen: 100,
            test_fraction: 0.1,
            max_attempts: 5,
            min_capture_rate: 0.95,
            tasks: Task::ALL.to_vec(),
            models: Family::defaults().to_vec(),
        }
    }
}

/// Every knob of an experiment run. Loaded from one JSON document; missing
/// fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub grid: TaxelGridConfig,
    pub features: FeatureConfig,
    pub detector: DetectorConfig,
    pub simulator: SimulatorConfig,
    pub analysis: AnalysisConfig,
    pub learning: LearningConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            grid: TaxelGridConfig::default(),
            features: FeatureConfig::default(),
            detector: DetectorConfig::default(),
            simulator: SimulatorConfig::default(),
            analysis: AnalysisConfig::default(),
            learning: LearningConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Usage(format!("cannot read config {}: {e}", path.display()))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| HarnessError::Usage(format!("bad config {}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.features.validate()?;
        self.detector.validate()?;
        self.simulator.slide.validate()?;
        self.simulator.array.validate()?;
        self.analysis.sweep_texture()?;
        if self.analysis.sweep_speeds.is_empty() || self.analysis.sweep_repeats == 0 {
            return Err(HarnessError::Usage(
                "speed sweep needs speeds and repeats".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.learning.test_fraction) {
            return Err(HarnessError::Usage(
                "test_fraction must lie in [0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Content hash of everything that can change an output. The output
    /// directory is excluded so a run can be relocated.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        seed::digest_hex(&serde_json::to_vec(&c).expect("config serializes"))
    }

    pub fn dataset(&self) -> BuildConfig {
        BuildConfig {
            slides_per_specimen: self.learning.slides_per_specimen,
            root_seed: self.stage_seed(&["dataset"]),
            slide: self.simulator.slide.clone(),
            array: self.simulator.array.clone(),
            features: self.features,
            detector: self.detector.clone(),
            max_attempts: self.learning.max_attempts,
            min_capture_rate: self.learning.min_capture_rate,
        }
    }

    pub fn stage_seed(&self, path: &[&str]) -> u64 {
        seed::derive(self.seed, path)
    }

    pub fn train_seed(&self, task: Task, family: &Family) -> u64 {
        self.stage_seed(&["train", task.name(), family.name()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_digest() {
        let c = ExperimentConfig::default();
        let back: ExperimentConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.digest(), c.digest());
        let moved = ExperimentConfig {
            out_dir: "elsewhere".into(),
            ..c.clone()
        };
        assert_eq!(moved.digest(), c.digest());
        let reseeded = ExperimentConfig {
            seed: 1,
            ..c.clone()
        };
        assert_ne!(reseeded.digest(), c.digest());
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"seed": 9, "learning": {"slides_per_specimen": 3}}"#).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.learning.slides_per_specimen, 3);
        assert_eq!(c.learning.test_fraction, 0.1);
        assert_eq!(c.analysis.sweep_speeds.len(), 11);
    }

    #[test]
    fn invalid_sweep_texture() {
        let mut c = ExperimentConfig::default();
        c.analysis.sweep_depth_mm = 5;
        assert!(matches!(c.validate(), Err(HarnessError::Usage(_))));
    }
}

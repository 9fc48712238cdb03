//! Strict JSON pipeline configuration. `{}` is a complete configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compose::{ComposeParams, HarmonyConfig};
use crate::gesture::{Archetype, ClassifyParams, DEFAULT_MOTIF_EPSILON};
use crate::prep::{PrepParams, DEFAULT_ROUGHNESS_SATURATION};
use crate::segmentation::SegmentationParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{file}: cannot read: {source}")]
    Io {
        file: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: key `{key}`: {message}")]
    Parse {
        file: PathBuf,
        key: String,
        message: String,
    },
    #[error("{file}: key `{key}`: {message}")]
    Invalid {
        file: PathBuf,
        key: String,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    pub flat: f64,
    pub transient: f64,
    pub transient_window_s: f64,
    pub granular: f64,
    pub chaotic_rough: f64,
    pub fit_rrmse: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        let c = ClassifyParams::default();
        Thresholds {
            flat: c.flat,
            transient: c.transient,
            transient_window_s: c.transient_window,
            granular: c.granular,
            chaotic_rough: c.chaotic_rough,
            fit_rrmse: c.fit_rrmse,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub rate_hz: f64,
    pub smooth_window_s: f64,
    pub min_segment_s: f64,
    pub penalty_beta: f64,
    pub roughness_saturation: f64,
    pub motif_epsilon: f64,
    pub thresholds: Thresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let prep = PrepParams::default();
        let seg = SegmentationParams::default();
        AnalysisConfig {
            rate_hz: prep.analysis_rate,
            smooth_window_s: prep.smooth_window,
            min_segment_s: seg.min_segment,
            penalty_beta: seg.penalty_beta,
            roughness_saturation: DEFAULT_ROUGHNESS_SATURATION,
            motif_epsilon: DEFAULT_MOTIF_EPSILON,
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureConfig {
    pub lambda_max: f64,
    pub grain_ms: f64,
}

impl Default for TextureConfig {
    fn default() -> Self {
        let c = ComposeParams::default();
        TextureConfig {
            lambda_max: c.lambda_max,
            grain_ms: c.grain_ms,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Override {
    pub segment_index: usize,
    pub archetype: Archetype,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub analysis: AnalysisConfig,
    pub manual_boundaries_s: Option<Vec<f64>>,
    pub overrides: Option<Vec<Override>>,
    pub harmony: HarmonyConfig,
    pub texture: TextureConfig,
    pub seed: u64,
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl PipelineConfig {
    /// Parses and validates `text`; `file` only labels errors.
    pub fn from_json(file: &Path, text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: PipelineConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let key = e.path().to_string();
            ConfigError::Parse {
                file: file.to_path_buf(),
                key: if key == "." { "(root)".into() } else { key },
                message: e.into_inner().to_string(),
            }
        })?;
        cfg.validate().map_err(|(key, message)| ConfigError::Invalid {
            file: file.to_path_buf(),
            key,
            message,
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            file: path.to_path_buf(),
            source,
        })?;
        Self::from_json(path, &text)
    }

    /// Range checks; the error names the key.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let a = &self.analysis;
        let bad = |key: &str, msg: &str| Err((key.to_string(), msg.to_string()));
        for (key, v) in [
            ("analysis.rate_hz", a.rate_hz),
            ("analysis.min_segment_s", a.min_segment_s),
            ("analysis.penalty_beta", a.penalty_beta),
            ("analysis.roughness_saturation", a.roughness_saturation),
            ("analysis.motif_epsilon", a.motif_epsilon),
            ("texture.grain_ms", self.texture.grain_ms),
        ] {
            if !positive(v) {
                return bad(key, "must be a positive number");
            }
        }
        if !(a.smooth_window_s >= 0.0 && a.smooth_window_s.is_finite()) {
            return bad("analysis.smooth_window_s", "must be zero or positive");
        }
        if !(self.texture.lambda_max >= 0.0 && self.texture.lambda_max <= 100.0) {
            return bad("texture.lambda_max", "must lie in [0, 100]");
        }
        if let Err(msg) = self.classify_params().validate() {
            let field = msg.split_whitespace().next().unwrap_or("");
            let key = match field {
                "transient_window" => "analysis.thresholds.transient_window_s".to_string(),
                "roughness_saturation" => "analysis.roughness_saturation".to_string(),
                f => format!("analysis.thresholds.{f}"),
            };
            return Err((key, msg));
        }
        if let Some(b) = &self.manual_boundaries_s {
            if b.iter().any(|t| !t.is_finite()) {
                return bad("manual_boundaries_s", "must be finite numbers");
            }
            if !b.windows(2).all(|w| w[0] < w[1]) {
                return bad("manual_boundaries_s", "must be strictly increasing");
            }
        }
        if let Some(ov) = &self.overrides {
            for (i, w) in ov.iter().enumerate() {
                if ov[..i].iter().any(|o| o.segment_index == w.segment_index) {
                    return Err((format!("overrides[{i}].segment_index"), "duplicate segment index".into()));
                }
            }
        }
        self.harmony
            .validate()
            .map_err(|(field, msg)| (format!("harmony.{field}"), msg))
    }

    pub fn prep_params(&self) -> PrepParams {
        PrepParams {
            analysis_rate: self.analysis.rate_hz,
            smooth_window: self.analysis.smooth_window_s,
        }
    }

    pub fn segmentation_params(&self) -> SegmentationParams {
        SegmentationParams {
            min_segment: self.analysis.min_segment_s,
            penalty_beta: self.analysis.penalty_beta,
            manual_boundaries: self.manual_boundaries_s.clone(),
            noise_sigma: None,
        }
    }

    pub fn classify_params(&self) -> ClassifyParams {
        let t = &self.analysis.thresholds;
        ClassifyParams {
            flat: t.flat,
            transient: t.transient,
            transient_window: t.transient_window_s,
            granular: t.granular,
            chaotic_rough: t.chaotic_rough,
            fit_rrmse: t.fit_rrmse,
            roughness_saturation: self.analysis.roughness_saturation,
            ..ClassifyParams::default()
        }
    }

    pub fn compose_params(&self) -> ComposeParams {
        ComposeParams {
            harmony: self.harmony.clone(),
            lambda_max: self.texture.lambda_max,
            grain_ms: self.texture.grain_ms,
            ..ComposeParams::default()
        }
    }
}

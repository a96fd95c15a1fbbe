//! Experiment configuration: a JSON document with strict field checking.

use std::fmt;
use std::path::PathBuf;

use gw2i_core::asymptotics::{Base, HeavyProfile, ImmigrationVariant, RandomSumCase};
use gw2i_core::tailstats::WindowOptions;
use gw2i_core::{Law, ScenarioSpec};
use serde::{Deserialize, Serialize};

/// Largest horizon accepted for predictions.
pub const MAX_HORIZON: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Simulate,
    Predict,
    Verify,
    CheckAppendix,
}

impl Mode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "simulate" => Some(Mode::Simulate),
            "predict" => Some(Mode::Predict),
            "verify" => Some(Mode::Verify),
            "check-appendix" => Some(Mode::CheckAppendix),
            _ => None,
        }
    }
}

/// One random-sum check of `check-appendix` mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSumSpec {
    pub case: RandomSumCase,
    #[serde(rename = "law_tau")]
    pub tau: Law,
    #[serde(rename = "law_zeta")]
    pub zeta: Law,
    /// Overrides the experiment-wide window for this check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<WindowOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<HeavyProfile>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub rveps_variant: ImmigrationVariant,
    /// Also tabulate the exact law of `X_n` on `0..=truncation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<u64>,
    #[serde(default)]
    pub window: WindowOptions,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub random_sums: Vec<RandomSumSpec>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("gw2i-out")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// Dotted path of the offending field, empty for document-level errors.
    pub path: String,
    pub message: String,
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        Self {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.path.is_empty() || self.path == "." {
            f.write_str(&self.message)
        } else {
            write!(f, "{}: {}", self.path, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::at("", "missing scenario"));
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let config: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ConfigError::at(&path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.scenario
            .validate()
            .map_err(|e| ConfigError::at("scenario", e.to_string()))?;
        if self.scenario.horizon > MAX_HORIZON {
            return Err(ConfigError::at(
                "scenario.horizon",
                format!("horizon {} exceeds {MAX_HORIZON}", self.scenario.horizon),
            ));
        }
        if let Some(p) = &self.profile {
            if !(p.index.is_finite() && p.index > 0.0) {
                return Err(ConfigError::at("profile.index", format!("{} must be > 0", p.index)));
            }
            if !p.light_moment_order.is_finite() {
                return Err(ConfigError::at("profile.light_moment_order", "must be finite"));
            }
            if let Some(b) = p.heavy.iter().find(|b| matches!(b, Base::Tau | Base::Zeta)) {
                return Err(ConfigError::at("profile.heavy", format!("`{b}` is not a process primitive")));
            }
        }
        validate_window(&self.window, "window")?;
        for (i, rs) in self.random_sums.iter().enumerate() {
            if let Some(w) = &rs.window {
                validate_window(w, &format!("random_sums[{i}].window"))?;
            }
        }
        match self.mode {
            Mode::Predict | Mode::Verify if self.profile.is_none() => Err(ConfigError::at(
                "profile",
                format!("required for mode {}", mode_name(self.mode)),
            )),
            Mode::CheckAppendix if self.random_sums.is_empty() => {
                Err(ConfigError::at("random_sums", "required for mode check-appendix"))
            }
            _ => Ok(()),
        }
    }
}

fn validate_window(w: &WindowOptions, path: &str) -> Result<(), ConfigError> {
    if !(w.tolerance.is_finite() && w.tolerance > 0.0) {
        return Err(ConfigError::at(&format!("{path}.tolerance"), "must be finite and > 0"));
    }
    if !w.calibration_floor.is_finite() {
        return Err(ConfigError::at(&format!("{path}.calibration_floor"), "must be finite"));
    }
    Ok(())
}

pub fn mode_name(mode: Mode) -> &'static str {
    match mode {
        Mode::Simulate => "simulate",
        Mode::Predict => "predict",
        Mode::Verify => "verify",
        Mode::CheckAppendix => "check-appendix",
    }
}

//! Experiment description files.

use hwisec::channel_sim::TGrid;
use hwisec::core_model::Scenario;
use hwisec::design_opt::SweepSpec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Closed-form bounds for one configuration.
    Evaluate,
    /// Monte Carlo estimates next to the closed-form bounds.
    Simulate,
    /// One-parameter sweep of a closed-form objective.
    Sweep,
    /// A registered figure experiment.
    Reproduce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Paper,
    Desk,
}

/// Slot grid policy as written in the file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TGridSpec {
    Full,
    Uniform(usize),
    Slots(Vec<usize>),
}

impl From<&TGridSpec> for TGrid {
    fn from(s: &TGridSpec) -> Self {
        match s {
            TGridSpec::Full => TGrid::Full,
            TGridSpec::Uniform(n) => TGrid::Uniform(*n),
            TGridSpec::Slots(v) => TGrid::Slots(v.clone()),
        }
    }
}

fn default_t_grid() -> TGridSpec {
    TGridSpec::Uniform(20)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McBlock {
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_t_grid")]
    pub t_grid: TGridSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Scale>,
}

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("malformed experiment file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid experiment: {0}")]
    Invalid(String),
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, SpecError> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.check_blocks()?;
        Ok(spec)
    }

    /// Every block the mode needs is present and no foreign block is given.
    fn check_blocks(&self) -> Result<(), SpecError> {
        let need = |present: bool, block: &str| {
            if present {
                Ok(())
            } else {
                Err(SpecError::Invalid(format!(
                    "mode {:?} requires a `{block}` block",
                    self.mode
                )))
            }
        };
        let forbid = |present: bool, block: &str| {
            if present {
                Err(SpecError::Invalid(format!(
                    "mode {:?} does not take a `{block}` block",
                    self.mode
                )))
            } else {
                Ok(())
            }
        };
        match self.mode {
            Mode::Evaluate => {
                need(self.config.is_some(), "config")?;
                forbid(self.mc.is_some(), "mc")?;
                forbid(self.sweep.is_some(), "sweep")?;
                forbid(self.figure.is_some(), "figure")?;
            }
            Mode::Simulate => {
                need(self.config.is_some(), "config")?;
                need(self.mc.is_some(), "mc")?;
                forbid(self.sweep.is_some(), "sweep")?;
                forbid(self.figure.is_some(), "figure")?;
            }
            Mode::Sweep => {
                need(self.config.is_some(), "config")?;
                need(self.sweep.is_some(), "sweep")?;
                forbid(self.mc.is_some(), "mc")?;
                forbid(self.figure.is_some(), "figure")?;
            }
            Mode::Reproduce => {
                need(self.figure.is_some(), "figure")?;
                forbid(self.config.is_some(), "config")?;
                forbid(self.sweep.is_some(), "sweep")?;
            }
        }
        if self.mode != Mode::Reproduce && self.scale.is_some() {
            return Err(SpecError::Invalid(
                "`scale` only applies to reproduce".into(),
            ));
        }
        if let Some(mc) = &self.mc {
            if mc.trials < 2 {
                return Err(SpecError::Invalid("mc.trials must be at least 2".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_field_is_a_parse_error() {
        let e = ExperimentSpec::from_json(r#"{"mode":"evaluate","confg":{}}"#).unwrap_err();
        assert!(matches!(e, SpecError::Parse(_)));
    }

    #[test]
    fn missing_block_is_invalid() {
        let e = ExperimentSpec::from_json(r#"{"mode":"reproduce"}"#).unwrap_err();
        assert!(matches!(e, SpecError::Invalid(_)));
    }

    #[test]
    fn t_grid_forms() {
        let mc: McBlock =
            serde_json::from_str(r#"{"trials":10,"seed":1,"t_grid":"full"}"#).unwrap();
        assert_eq!(mc.t_grid, TGridSpec::Full);
        let mc: McBlock =
            serde_json::from_str(r#"{"trials":10,"seed":1,"t_grid":{"slots":[5,9]}}"#).unwrap();
        assert_eq!(mc.t_grid, TGridSpec::Slots(vec![5, 9]));
        let mc: McBlock = serde_json::from_str(r#"{"trials":10,"seed":1}"#).unwrap();
        assert_eq!(mc.t_grid, TGridSpec::Uniform(20));
    }
}

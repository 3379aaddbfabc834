//! Mission configuration: matching tolerances, decision thresholds and routing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::net::RoutingPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Matching {
    pub position_tolerance: f64,
    pub size_tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceThresholds {
    pub high: f64,
    pub medium: f64,
}

/// Discrete confidence level fed to the identity network.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ClLevel {
    High,
    Medium,
    Low,
}

impl ClLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClLevel::High => "high",
            ClLevel::Medium => "medium",
            ClLevel::Low => "low",
        }
    }
}

impl ConfidenceThresholds {
    pub fn level(&self, cl: f64) -> ClLevel {
        if cl >= self.high {
            ClLevel::High
        } else if cl >= self.medium {
            ClLevel::Medium
        } else {
            ClLevel::Low
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub known: f64,
    pub hazard: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionConfig {
    pub matching: Matching,
    pub confidence: ConfidenceThresholds,
    pub thresholds: Thresholds,
    pub routing: RoutingPolicy,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(String),
    #[error("config does not parse: {0}")]
    Parse(String),
    #[error("invalid config field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

impl MissionConfig {
    pub fn from_toml(text: &str) -> Result<MissionConfig, ConfigError> {
        let cfg: MissionConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<MissionConfig, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        MissionConfig::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |field: &str, message: &str| {
            Err(ConfigError::Invalid {
                field: field.into(),
                message: message.into(),
            })
        };
        if !(self.matching.position_tolerance > 0.0) {
            return bad("matching.position_tolerance", "must be positive");
        }
        if !(self.matching.size_tolerance > 0.0) {
            return bad("matching.size_tolerance", "must be positive");
        }
        let c = &self.confidence;
        if !(0.0 <= c.medium && c.medium <= c.high && c.high <= 1.0) {
            return bad("confidence", "need 0 <= medium <= high <= 1");
        }
        for (name, t) in [("thresholds.known", self.thresholds.known), ("thresholds.hazard", self.thresholds.hazard)] {
            if !(0.0..=1.0).contains(&t) {
                return bad(name, "must lie in [0, 1]");
            }
        }
        if let Err(kind) = self.routing.validate() {
            return bad(&format!("routing.{kind}"), "every recipient set must include rcc");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    #[test]
    fn shipped_config_loads() {
        let cfg = bundled::mission_config();
        assert_eq!(cfg.matching.position_tolerance, 0.30);
        assert_eq!(cfg.confidence.level(0.79), ClLevel::Medium);
        assert_eq!(cfg.confidence.level(0.85), ClLevel::High);
        assert_eq!(cfg.confidence.level(0.5999), ClLevel::Low);
    }

    #[test]
    fn routing_without_rcc_is_rejected() {
        let text = bundled::MISSION_CONFIG.replace(r#"hazard = ["all", "rcc"]"#, r#"hazard = ["all"]"#);
        match MissionConfig::from_toml(&text) {
            Err(ConfigError::Invalid { field, .. }) => assert_eq!(field, "routing.hazard"),
            other => panic!("{other:?}"),
        }
    }
}

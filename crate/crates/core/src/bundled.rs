//! Mission artifacts compiled into the crate.

use std::sync::Arc;

use crate::bayes::MissionNets;
use crate::config::MissionConfig;
use crate::ontology::{parse_schema, SchemaDef};
use crate::perception::{Scenario, ScenarioError};

pub const MISSION_SCHEMA: &str = include_str!("../data/mission.schema");
pub const MISSION_NETS: &str = include_str!("../data/mission.bn");
pub const MISSION_CONFIG: &str = include_str!("../data/mission.toml");

/// Names and sources of the bundled scenarios.
pub const SCENARIOS: &[(&str, &str)] = &[(
    "mission_fig6",
    include_str!("../data/scenarios/mission_fig6.toml"),
)];

pub fn mission_schema() -> Arc<SchemaDef> {
    Arc::new(parse_schema(MISSION_SCHEMA).expect("bundled schema parses"))
}

pub fn mission_nets() -> MissionNets {
    MissionNets::parse(MISSION_NETS).expect("bundled networks parse")
}

pub fn mission_config() -> MissionConfig {
    MissionConfig::from_toml(MISSION_CONFIG).expect("bundled config parses")
}

pub fn scenario_source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Loads a bundled scenario by name.
pub fn scenario(name: &str) -> Result<Scenario, ScenarioError> {
    let text = scenario_source(name)
        .ok_or_else(|| ScenarioError::Io(format!("no bundled scenario named `{name}`")))?;
    Scenario::from_toml(text)
}

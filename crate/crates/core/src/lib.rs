//! Dynamic Contextual Mission Data (DCMD) for teams of simulated ground vehicles.
//!
//! Each agent carries an ontology-typed knowledge graph loaded with a-priori mission
//! information. Detections produced at waypoints are assessed with identity matching
//! plus exact Bayesian-network inference. The outcome is written back into the graph
//! and shared with the team over a role-routed message bus.
//!
//! Module map:
//!
//! * [`ontology`] – layered type system and schema file parser
//! * [`graphstore`] – per-agent typed knowledge graph with snapshots
//! * [`query`] – small textual match/fetch/insert language over the graph store
//! * [`bayes`] – discrete Bayesian networks and variable elimination
//! * [`assessment`] – identity matching, evidence compilation and hazard assessment
//! * [`perception`] – scenario files and the synthetic waypoint detector
//! * [`net`] – DCMD updates and the role-routed in-process bus
//! * [`agents`] – Explorer/Verifier state machines and the mission runner

pub mod agents;
pub mod assessment;
pub mod bayes;
pub mod bundled;
mod codec;
pub mod config;
pub mod graphstore;
pub mod net;
pub mod ontology;
pub mod perception;
pub mod query;
mod time;

pub use time::{Timestamp, TimestampParseError};

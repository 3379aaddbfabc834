//! DCMD updates and how they travel between agents.

mod bus;
mod routing;
mod wire;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Timestamp;

pub use bus::{Bus, BusError, Delivery, Subscriber};
pub use routing::{route, Audience, Roster, RoutingPolicy};
pub use wire::{decode_update, encode_update, DecodeError, WIRE_MAGIC, WIRE_VERSION};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateKind {
    KnownObject,
    NewObject,
    Hazard,
    Verification,
}

impl UpdateKind {
    pub const ALL: [UpdateKind; 4] = [
        UpdateKind::KnownObject,
        UpdateKind::NewObject,
        UpdateKind::Hazard,
        UpdateKind::Verification,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UpdateKind::KnownObject => "known_object",
            UpdateKind::NewObject => "new_object",
            UpdateKind::Hazard => "hazard",
            UpdateKind::Verification => "verification",
        }
    }

    pub fn parse(s: &str) -> Option<UpdateKind> {
        UpdateKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn tag(self) -> u8 {
        self as u8
    }

    fn from_tag(tag: u8) -> Option<UpdateKind> {
        UpdateKind::ALL.get(tag as usize).copied()
    }
}

impl fmt::Display for UpdateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One assessed object carried by an update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UpdateObject {
    /// Detector label, e.g. `boat`.
    pub obj_name: String,
    /// Assessed identity, e.g. `rigid_hulled_inflatable_boat1`.
    pub identity: String,
    /// Namespace of the identity: `a_priori` for known objects, otherwise the agent that
    /// first created it.
    pub origin_agent: String,
    /// Name of the general-class document (and schema type) the identity belongs to.
    pub general_class: String,
    pub position: [f64; 3],
    pub height: f64,
    pub width: f64,
    pub obj_cl: f64,
    pub position_cl: f64,
    pub size_cl: f64,
    /// Posterior of the identity decision, P(known) or P(new).
    pub posterior: f64,
    pub is_known: bool,
    pub status: String,
    pub hazard_probability: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardInfo {
    pub identity: String,
    pub origin_agent: String,
    pub probability: f64,
    pub position: [f64; 3],
    /// Identities of the associated weapon and person records.
    pub components: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationInfo {
    /// `verified_by_<agent>` or `unconfirmed_by_<agent>`.
    pub status: String,
    pub identity: String,
    pub origin_agent: String,
    pub verified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DcmdUpdate {
    pub msg_id: String,
    pub source_agent: String,
    pub timestamp: Timestamp,
    pub kind: UpdateKind,
    pub event_id: String,
    pub area: String,
    pub objects: Vec<UpdateObject>,
    pub hazard: Option<HazardInfo>,
    pub verification: Option<VerificationInfo>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid update: {0}")]
pub struct InvalidUpdate(pub String);

fn unit(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl DcmdUpdate {
    pub fn validate(&self) -> Result<(), InvalidUpdate> {
        let fail = |m: String| Err(InvalidUpdate(m));
        if self.msg_id.is_empty() || self.source_agent.is_empty() {
            return fail("msg_id and source_agent must be non-empty".into());
        }
        if self.kind == UpdateKind::Hazard && self.hazard.is_none() {
            return fail("hazard update without hazard info".into());
        }
        if self.kind == UpdateKind::Verification && self.verification.is_none() {
            return fail("verification update without verification info".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !unit(o.posterior) {
                return fail(format!("objects[{i}].posterior {} outside [0, 1]", o.posterior));
            }
            for (name, cl) in [("obj_cl", o.obj_cl), ("position_cl", o.position_cl), ("size_cl", o.size_cl)] {
                if !unit(cl) {
                    return fail(format!("objects[{i}].{name} {cl} outside [0, 1]"));
                }
            }
            if let Some(p) = o.hazard_probability {
                if !unit(p) {
                    return fail(format!("objects[{i}].hazard_probability {p} outside [0, 1]"));
                }
            }
            if !o.position.iter().chain([&o.height, &o.width]).all(|v| v.is_finite()) {
                return fail(format!("objects[{i}] has a non-finite coordinate or size"));
            }
        }
        if let Some(h) = &self.hazard {
            if !unit(h.probability) || !h.position.iter().all(|v| v.is_finite()) {
                return fail("hazard probability or position out of range".into());
            }
        }
        Ok(())
    }
}

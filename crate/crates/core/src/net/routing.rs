use serde::{Deserialize, Serialize};

use super::{DcmdUpdate, UpdateKind};
use crate::perception::Role;

/// Recipient-set term in a routing rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Audience {
    Explorers,
    Verifiers,
    /// Every team member.
    All,
    Rcc,
}

impl Audience {
    fn includes(self, role: Role) -> bool {
        match self {
            Audience::Explorers => role == Role::Explorer,
            Audience::Verifiers => role == Role::Verifier,
            Audience::All => true,
            Audience::Rcc => false,
        }
    }
}

/// Update kind to recipient set. Every kind must be listed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingPolicy {
    pub known_object: Vec<Audience>,
    pub new_object: Vec<Audience>,
    pub hazard: Vec<Audience>,
    pub verification: Vec<Audience>,
}

impl Default for RoutingPolicy {
    fn default() -> Self {
        use Audience::*;
        RoutingPolicy {
            known_object: vec![Explorers, Rcc],
            new_object: vec![All, Rcc],
            hazard: vec![All, Rcc],
            verification: vec![All, Rcc],
        }
    }
}

impl RoutingPolicy {
    pub fn audience(&self, kind: UpdateKind) -> &[Audience] {
        match kind {
            UpdateKind::KnownObject => &self.known_object,
            UpdateKind::NewObject => &self.new_object,
            UpdateKind::Hazard => &self.hazard,
            UpdateKind::Verification => &self.verification,
        }
    }

    /// Fails with the first kind whose recipient set leaves out the RCC.
    pub fn validate(&self) -> Result<(), UpdateKind> {
        for kind in UpdateKind::ALL {
            if !self.audience(kind).contains(&Audience::Rcc) {
                return Err(kind);
            }
        }
        Ok(())
    }
}

/// Team members and the observer, as known to the router.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Roster {
    /// Sorted by id.
    agents: Vec<(String, Role)>,
    pub rcc: String,
}

impl Roster {
    pub fn new(mut agents: Vec<(String, Role)>, rcc: &str) -> Self {
        agents.sort();
        agents.dedup_by(|a, b| a.0 == b.0);
        Roster {
            agents,
            rcc: rcc.to_string(),
        }
    }

    pub fn agents(&self) -> &[(String, Role)] {
        &self.agents
    }

    pub fn role_of(&self, id: &str) -> Option<Role> {
        self.agents.iter().find(|(a, _)| a == id).map(|(_, r)| *r)
    }
}

/// Recipients of an update: team members in id order, then the RCC. The source never
/// receives its own update.
pub fn route(policy: &RoutingPolicy, roster: &Roster, update: &DcmdUpdate) -> Vec<String> {
    let audience = policy.audience(update.kind);
    let mut out: Vec<String> = roster
        .agents
        .iter()
        .filter(|(id, role)| *id != update.source_agent && audience.iter().any(|a| a.includes(*role)))
        .map(|(id, _)| id.clone())
        .collect();
    if audience.contains(&Audience::Rcc) && roster.rcc != update.source_agent {
        out.push(roster.rcc.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Timestamp;

    fn roster() -> Roster {
        Roster::new(
            vec![
                ("dcmdobot3".into(), Role::Explorer),
                ("dcmdobot1".into(), Role::Verifier),
                ("dcmdobot4".into(), Role::Explorer),
                ("dcmdobot2".into(), Role::Verifier),
            ],
            "rcc",
        )
    }

    fn update(kind: UpdateKind, source: &str) -> DcmdUpdate {
        DcmdUpdate {
            msg_id: "m".into(),
            source_agent: source.into(),
            timestamp: Timestamp::default(),
            kind,
            event_id: "e".into(),
            area: "a".into(),
            objects: vec![],
            hazard: None,
            verification: None,
        }
    }

    #[test]
    fn hazard_reaches_whole_team_and_rcc() {
        let r = route(&RoutingPolicy::default(), &roster(), &update(UpdateKind::Hazard, "dcmdobot3"));
        assert_eq!(r, vec!["dcmdobot1", "dcmdobot2", "dcmdobot4", "rcc"]);
    }

    #[test]
    fn verification_reaches_everyone_else() {
        let r = route(&RoutingPolicy::default(), &roster(), &update(UpdateKind::Verification, "dcmdobot1"));
        assert_eq!(r, vec!["dcmdobot2", "dcmdobot3", "dcmdobot4", "rcc"]);
    }

    #[test]
    fn known_object_goes_to_explorers() {
        let r = route(&RoutingPolicy::default(), &roster(), &update(UpdateKind::KnownObject, "dcmdobot3"));
        assert_eq!(r, vec!["dcmdobot4", "rcc"]);
    }

    #[test]
    fn lone_agent_reaches_only_rcc() {
        let solo = Roster::new(vec![("a".into(), Role::Explorer)], "rcc");
        for kind in UpdateKind::ALL {
            assert_eq!(route(&RoutingPolicy::default(), &solo, &update(kind, "a")), vec!["rcc"]);
        }
    }
}

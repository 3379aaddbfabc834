use std::collections::BTreeMap;
use std::sync::Arc;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::{explorer_step, receive, verifier_step, AgentState, Env, LogEvent, MissionLog, Phase};
use crate::bayes::MissionNets;
use crate::config::{ConfigError, MissionConfig};
use crate::graphstore::{load_a_priori, LoadError, Store};
use crate::net::{Bus, BusError, DcmdUpdate, Subscriber, UpdateKind};
use crate::ontology::SchemaDef;
use crate::perception::{agent_stream, FieldIssue, Role, Scenario};
use crate::Timestamp;

/// Upper bound on scheduler iterations; a mission that needs more is treated as stuck.
const MAX_STEPS: usize = 1_000_000;


#[derive(Debug, thiserror::Error)]
pub enum MissionError {
    #[error("scenario is invalid: {}", issues(.0))]
    InvalidScenario(Vec<FieldIssue>),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("a-priori load failed: {0}")]
    Load(#[from] LoadError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("deadlock at {time}: {diagnostic}")]
    Deadlock { time: Timestamp, diagnostic: String },
}

fn issues(list: &[FieldIssue]) -> String {
    list.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnownSummary {
    pub identity: String,
    pub area: String,
    pub confirmed_by: Option<String>,
    pub confirmed_at: Option<Timestamp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HazardSummary {
    pub identity: String,
    pub origin_agent: String,
    pub general_class: String,
    pub area: String,
    pub probability: f64,
    pub detected_at: Timestamp,
    pub verifier: Option<String>,
    pub verified: bool,
    pub status: Option<String>,
    pub verified_at: Option<Timestamp>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub scenario: String,
    pub seed: u64,
    pub success: bool,
    pub start: Timestamp,
    pub end: Timestamp,
    pub known_objects: Vec<KnownSummary>,
    pub hazards: Vec<HazardSummary>,
    pub updates_published: usize,
    pub deliveries: usize,
    pub final_phases: BTreeMap<String, Phase>,
    pub nets_checksum: String,
}

impl MissionSummary {
    pub fn known_confirmed(&self) -> usize {
        self.known_objects.iter().filter(|k| k.confirmed_by.is_some()).count()
    }

    pub fn hazards_verified(&self) -> usize {
        self.hazards.iter().filter(|h| h.verified).count()
    }

    /// Short human-readable report.
    pub fn render(&self) -> String {
        let mut out = format!(
            "mission {} (seed {}): {}\n{} -> {}\nknown objects confirmed: {}/{}\n",
            self.scenario,
            self.seed,
            if self.success { "complete" } else { "FAILED" },
            self.start,
            self.end,
            self.known_confirmed(),
            self.known_objects.len()
        );
        for k in &self.known_objects {
            match (&k.confirmed_by, k.confirmed_at) {
                (Some(a), Some(t)) => out.push_str(&format!("  {} in {}: confirmed by {a} at {t}\n", k.identity, k.area)),
                _ => out.push_str(&format!("  {} in {}: not confirmed\n", k.identity, k.area)),
            }
        }
        out.push_str(&format!("hazards verified: {}/{}\n", self.hazards_verified(), self.hazards.len()));
        for h in &self.hazards {
            out.push_str(&format!(
                "  {} in {} (P={:.2}) detected by {} at {}: {}\n",
                h.identity,
                h.area,
                h.probability,
                h.origin_agent,
                h.detected_at,
                match (&h.status, h.verified_at) {
                    (Some(s), Some(t)) => format!("{s} at {t}"),
                    _ => "not verified".to_string(),
                }
            ));
        }
        out
    }
}

/// Static inputs shared by every agent of a mission.
#[derive(Clone, Debug)]
pub struct MissionKit {
    pub schema: Arc<SchemaDef>,
    pub nets: MissionNets,
    pub config: MissionConfig,
}

impl MissionKit {
    pub fn bundled() -> Self {
        MissionKit {
            schema: crate::bundled::mission_schema(),
            nets: crate::bundled::mission_nets(),
            config: crate::bundled::mission_config(),
        }
    }
}

pub struct MissionOutcome {
    pub log: MissionLog,
    pub stores: BTreeMap<String, Store>,
    pub summary: MissionSummary,
    /// Every update published during the mission, in publish order.
    pub published: Vec<DcmdUpdate>,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs the scenario to completion. `seed` replaces the scenario's own seed.
pub fn run_mission(scenario: &Scenario, seed: u64, kit: &MissionKit) -> Result<MissionOutcome, MissionError> {
    let problems = scenario.validate();
    if !problems.is_empty() {
        return Err(MissionError::InvalidScenario(problems));
    }
    kit.config.validate()?;
    let clock = &scenario.clock;

    let mut bus = Bus::new(kit.config.routing.clone(), clock.latency, agent_stream(seed, "bus").next_u64());
    let mut agents: BTreeMap<String, AgentState> = BTreeMap::new();
    for spec in &scenario.agents {
        let mut store = Store::new(kit.schema.clone());
        load_a_priori(&mut store, scenario)?;
        bus.subscribe(&spec.id, Subscriber::Agent(spec.role));
        agents.insert(spec.id.clone(), AgentState::new(spec, store, seed));
    }
    bus.subscribe(&scenario.rcc, Subscriber::Observer);

    let mut env = Env {
        scenario,
        nets: &kit.nets,
        config: &kit.config,
        bus,
        log: MissionLog::new(),
        assignments: BTreeMap::new(),
        verifier_positions: scenario
            .agents_with_role(Role::Verifier)
            .map(|a| (a.id.clone(), a.start))
            .collect(),
        published: Vec::new(),
    };
    env.log.push(
        clock.origin,
        &scenario.rcc,
        LogEvent::MissionStart {
            scenario: scenario.name.clone(),
            seed,
            nets_checksum: kit.nets.checksum.clone(),
            schema_hash: hex(&kit.schema.hash()),
        },
    );

    let mut wake: BTreeMap<String, Timestamp> = BTreeMap::new();
    for (id, a) in agents.iter_mut() {
        if a.role != Role::Explorer {
            continue;
        }
        match a.waypoint_queue.front() {
            Some(wp) => {
                let t = super::travel(&env, a.position, wp.position);
                wake.insert(id.clone(), clock.origin.add_seconds(t));
            }
            None => super::set_phase(a, &mut env, clock.origin, Phase::Done),
        }
    }

    let mut deliveries = 0usize;
    let mut now = clock.origin;
    let mut steps = 0usize;
    loop {
        let next = [env.bus.next_ready(), wake.values().min().copied()].into_iter().flatten().min();
        let Some(t) = next else { break };
        now = t;
        steps += 1;
        if steps > MAX_STEPS {
            return Err(MissionError::Deadlock {
                time: now,
                diagnostic: format!("no completion after {MAX_STEPS} scheduler steps"),
            });
        }
        for d in env.bus.deliver_due(now)? {
            deliveries += 1;
            match agents.get_mut(&d.recipient) {
                Some(agent) => {
                    if let Some(w) = receive(agent, &mut env, &d) {
                        wake.insert(d.recipient.clone(), w);
                    }
                }
                None => env.log.push(
                    now,
                    &d.recipient,
                    LogEvent::Received {
                        msg_id: d.update.msg_id.clone(),
                        kind: d.update.kind,
                        sender: d.sender.clone(),
                        applied: true,
                    },
                ),
            }
        }
        let due: Vec<String> = wake.iter().filter(|(_, &w)| w == now).map(|(id, _)| id.clone()).collect();
        for id in due {
            wake.remove(&id);
            let agent = agents.get_mut(&id).expect("scheduled agent exists");
            let next = match agent.role {
                Role::Explorer => explorer_step(agent, &mut env, now)?,
                Role::Verifier => verifier_step(agent, &mut env, now)?,
            };
            if let Some(w) = next {
                wake.insert(id, w);
            }
        }
    }

    let stuck: Vec<String> = agents
        .values()
        .filter(|a| match a.role {
            Role::Explorer => a.phase != Phase::Done,
            Role::Verifier => a.phase != Phase::Idle || !a.pending_verifications.is_empty(),
        })
        .map(|a| format!("{} is {:?} with {} pending", a.agent_id, a.phase, a.pending_verifications.len()))
        .collect();
    if !stuck.is_empty() {
        return Err(MissionError::Deadlock {
            time: now,
            diagnostic: stuck.join("; "),
        });
    }
    env.bus.shutdown();

    let summary = summarize(scenario, seed, kit, &env, &agents, now, deliveries);
    env.log.push(now, &scenario.rcc, LogEvent::MissionEnd { success: summary.success });
    env.log.sort();
    Ok(MissionOutcome {
        log: env.log,
        stores: agents.into_iter().map(|(id, a)| (id, a.store)).collect(),
        summary,
        published: env.published,
    })
}

fn summarize(
    scenario: &Scenario,
    seed: u64,
    kit: &MissionKit,
    env: &Env,
    agents: &BTreeMap<String, AgentState>,
    end: Timestamp,
    deliveries: usize,
) -> MissionSummary {
    let explorers: Vec<&str> = scenario.agents_with_role(Role::Explorer).map(|a| a.id.as_str()).collect();
    let known_objects = scenario
        .a_priori
        .iter()
        .map(|k| {
            let first = env
                .published
                .iter()
                .filter(|u| explorers.contains(&u.source_agent.as_str()))
                .find(|u| u.objects.iter().any(|o| o.is_known && o.identity == k.identity));
            KnownSummary {
                identity: k.identity.clone(),
                area: k.area.clone(),
                confirmed_by: first.map(|u| u.source_agent.clone()),
                confirmed_at: first.map(|u| u.timestamp),
            }
        })
        .collect::<Vec<_>>();

    let hazards = env
        .published
        .iter()
        .filter(|u| u.kind == UpdateKind::Hazard)
        .filter_map(|u| {
            let h = u.hazard.as_ref()?;
            let general_class = u
                .objects
                .iter()
                .find(|o| o.identity == h.identity)
                .map(|o| o.general_class.clone())
                .unwrap_or_default();
            let verification = env.published.iter().find_map(|v| {
                v.verification
                    .as_ref()
                    .filter(|vi| vi.identity == h.identity && vi.origin_agent == h.origin_agent)
                    .map(|vi| (v, vi))
            });
            Some(HazardSummary {
                identity: h.identity.clone(),
                origin_agent: h.origin_agent.clone(),
                general_class,
                area: u.area.clone(),
                probability: h.probability,
                detected_at: u.timestamp,
                verifier: env.assignments.get(&u.msg_id).cloned(),
                verified: verification.is_some_and(|(_, vi)| vi.verified),
                status: verification.map(|(_, vi)| vi.status.clone()),
                verified_at: verification.map(|(v, _)| v.timestamp),
            })
        })
        .collect::<Vec<_>>();

    let success = known_objects.iter().all(|k| k.confirmed_by.is_some()) && hazards.iter().all(|h| h.verified);
    MissionSummary {
        scenario: scenario.name.clone(),
        seed,
        success,
        start: scenario.clock.origin,
        end,
        known_objects,
        hazards,
        updates_published: env.published.len(),
        deliveries,
        final_phases: agents.iter().map(|(id, a)| (id.clone(), a.phase)).collect(),
        nets_checksum: kit.nets.checksum.clone(),
    }
}

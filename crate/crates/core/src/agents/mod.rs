//! Explorer and Verifier state machines and the discrete-event mission runner.
//!
//! Every agent owns its store and its random stream. Agents only exchange
//! [`DcmdUpdate`]s over the [`Bus`]; the runner advances simulated time to the next
//! wake-up or delivery, handling deliveries before agent steps at equal times and
//! agents in id order.

mod log;
mod runner;

use std::collections::{BTreeMap, VecDeque};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assessment::{apply_update, assess_object, represent_assessment, Applied, DetectionRecord};
use crate::bayes::MissionNets;
use crate::config::MissionConfig;
use crate::graphstore::Store;
use crate::net::{Bus, DcmdUpdate, Delivery, UpdateKind, UpdateObject, VerificationInfo};
use crate::perception::{agent_stream, sense, AgentSpec, Role, Scenario, Waypoint};
use crate::Timestamp;

pub use log::{AssessedObject, LogEvent, LogParseError, LogRecord, MissionLog};
pub use runner::{run_mission, HazardSummary, KnownSummary, MissionError, MissionKit, MissionOutcome, MissionSummary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Idle,
    Exploring,
    EnRoute,
    Verifying,
    Done,
}

/// A hazard a Verifier has been asked to confirm.
#[derive(Clone, Debug, PartialEq)]
pub struct HazardRef {
    pub identity: String,
    pub origin_agent: String,
    pub position: [f64; 3],
    /// The hazard update as received, used to compare the re-sensed objects.
    pub update: DcmdUpdate,
}

#[derive(Clone, Debug)]
pub struct AgentState {
    pub agent_id: String,
    pub role: Role,
    pub phase: Phase,
    pub position: [f64; 2],
    pub waypoint_queue: VecDeque<Waypoint>,
    pub store: Store,
    pub pending_verifications: VecDeque<HazardRef>,
    rng: ChaCha8Rng,
    events: u64,
    messages: u64,
}

impl AgentState {
    pub fn new(spec: &AgentSpec, store: Store, seed: u64) -> Self {
        AgentState {
            agent_id: spec.id.clone(),
            role: spec.role,
            phase: match spec.role {
                Role::Explorer => Phase::Exploring,
                Role::Verifier => Phase::Idle,
            },
            position: spec.start,
            waypoint_queue: spec.waypoints.iter().cloned().collect(),
            store,
            pending_verifications: VecDeque::new(),
            rng: agent_stream(seed, &spec.id),
            events: 0,
            messages: 0,
        }
    }

    fn next_event_id(&mut self) -> String {
        self.events += 1;
        format!("{}-e{}", self.agent_id, self.events)
    }

    fn next_msg_id(&mut self) -> String {
        self.messages += 1;
        format!("{}-m{}", self.agent_id, self.messages)
    }
}

/// Shared mission context handed to each step.
pub struct Env<'a> {
    pub scenario: &'a Scenario,
    pub nets: &'a MissionNets,
    pub config: &'a MissionConfig,
    pub bus: Bus,
    pub log: MissionLog,
    /// Hazard update id to assigned verifier.
    pub assignments: BTreeMap<String, String>,
    /// Verifier positions as last reported, used for assignment.
    pub verifier_positions: BTreeMap<String, [f64; 2]>,
    pub published: Vec<DcmdUpdate>,
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn travel(env: &Env, from: [f64; 2], to: [f64; 2]) -> f64 {
    distance(from, to) / env.scenario.clock.speed
}

fn set_phase(state: &mut AgentState, env: &mut Env, now: Timestamp, to: Phase) {
    if state.phase != to {
        env.log.push(now, &state.agent_id, LogEvent::Phase { from: state.phase, to });
        state.phase = to;
    }
}

fn publish(state: &mut AgentState, env: &mut Env, now: Timestamp, update: &DcmdUpdate) -> Result<(), MissionError> {
    let recipients = env.bus.publish(update, now)?;
    env.log.push(
        now,
        &state.agent_id,
        LogEvent::Sent {
            msg_id: update.msg_id.clone(),
            kind: update.kind,
            recipients,
        },
    );
    env.published.push(update.clone());
    Ok(())
}

/// Picks the Verifier for a hazard: the nearest one with nothing assigned, else the
/// least loaded, ties by distance then id.
fn assign_verifier(env: &Env, hazard: [f64; 2]) -> Option<String> {
    let load = |v: &str| env.assignments.values().filter(|a| a.as_str() == v).count();
    env.verifier_positions
        .iter()
        .map(|(id, pos)| (load(id), distance(*pos, hazard), id))
        .min_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(b.2)))
        .map(|(_, _, id)| id.clone())
}

/// Handles arrival at the next waypoint, including the detection event found there.
/// Returns the next wake-up time, or `None` once the route is finished.
pub fn explorer_step(state: &mut AgentState, env: &mut Env, now: Timestamp) -> Result<Option<Timestamp>, MissionError> {
    debug_assert_eq!(state.role, Role::Explorer);
    let Some(wp) = state.waypoint_queue.pop_front() else {
        set_phase(state, env, now, Phase::Done);
        return Ok(None);
    };
    state.position = wp.position;
    let id = state.agent_id.clone();
    env.log.push(
        now,
        &id,
        LogEvent::Arrived {
            waypoint: wp.name.clone(),
            position: wp.position,
        },
    );
    let event_id = state.next_event_id();
    let reading = sense(env.scenario, &id, wp.position, &mut state.rng, &event_id, now);
    if !reading.detections.is_empty() {
        env.log.push(
            now,
            &id,
            LogEvent::Detection {
                event_id: event_id.clone(),
                detections: reading.detections.clone(),
            },
        );
        process_event(state, env, now, &event_id, &reading.detections)?;
    }
    match state.waypoint_queue.front() {
        Some(next) => {
            let dwell = env.scenario.clock.dwell + travel(env, wp.position, next.position);
            Ok(Some(now.add_seconds(dwell)))
        }
        None => {
            set_phase(state, env, now, Phase::Done);
            Ok(None)
        }
    }
}

fn process_event(
    state: &mut AgentState,
    env: &mut Env,
    now: Timestamp,
    event_id: &str,
    dets: &[DetectionRecord],
) -> Result<(), MissionError> {
    let id = state.agent_id.clone();
    let results = match assess_object(&state.store, dets, env.nets, env.config) {
        Ok(r) => r,
        Err(e) => {
            env.log.push(
                now,
                &id,
                LogEvent::AssessmentFailed {
                    event_id: event_id.to_string(),
                    message: e.to_string(),
                },
            );
            return Ok(());
        }
    };
    env.log.push(
        now,
        &id,
        LogEvent::Assessment {
            event_id: event_id.to_string(),
            objects: results.iter().map(AssessedObject::from).collect(),
        },
    );
    let msg_id = state.next_msg_id();
    let (update, ids) = match represent_assessment(&mut state.store, dets, &results, &msg_id) {
        Ok(x) => x,
        Err(e) => {
            env.log.push(
                now,
                &id,
                LogEvent::AssessmentFailed {
                    event_id: event_id.to_string(),
                    message: e.to_string(),
                },
            );
            return Ok(());
        }
    };
    env.log.push(now, &id, LogEvent::Inserted { msg_id: msg_id.clone(), things: ids.len() });
    publish(state, env, now, &update)?;
    if let Some(h) = &update.hazard {
        if let Some(verifier) = assign_verifier(env, [h.position[0], h.position[1]]) {
            env.assignments.insert(msg_id.clone(), verifier.clone());
            env.log.push(
                now,
                &id,
                LogEvent::VerifierActivation {
                    hazard: h.identity.clone(),
                    origin_agent: h.origin_agent.clone(),
                    msg_id,
                    verifier,
                },
            );
        }
    }
    Ok(())
}

/// Point `standoff` metres short of `target` on the straight line from `from`.
fn standoff_point(from: [f64; 2], target: [f64; 2], standoff: f64) -> [f64; 2] {
    let d = distance(from, target);
    if d <= standoff || d == 0.0 {
        return from;
    }
    let k = (d - standoff) / d;
    [from[0] + (target[0] - from[0]) * k, from[1] + (target[1] - from[1]) * k]
}

fn head_to_next(state: &mut AgentState, env: &mut Env, now: Timestamp) -> Option<Timestamp> {
    let Some(h) = state.pending_verifications.front() else {
        set_phase(state, env, now, Phase::Idle);
        return None;
    };
    let target = standoff_point(state.position, [h.position[0], h.position[1]], env.scenario.clock.verify_standoff);
    let t = travel(env, state.position, target);
    set_phase(state, env, now, Phase::EnRoute);
    Some(now.add_seconds(t))
}

/// Handles a Verifier wake-up: arrival at a hazard (re-sense, confirm, share) or the
/// end of the dwell that follows it.
pub fn verifier_step(state: &mut AgentState, env: &mut Env, now: Timestamp) -> Result<Option<Timestamp>, MissionError> {
    debug_assert_eq!(state.role, Role::Verifier);
    match state.phase {
        Phase::EnRoute => {
            let hazard = state.pending_verifications.front().cloned().expect("en route with a pending hazard");
            let at = standoff_point(
                state.position,
                [hazard.position[0], hazard.position[1]],
                env.scenario.clock.verify_standoff,
            );
            state.position = at;
            env.verifier_positions.insert(state.agent_id.clone(), at);
            set_phase(state, env, now, Phase::Verifying);
            verify(state, env, now, &hazard)?;
            Ok(Some(now.add_seconds(env.scenario.clock.dwell)))
        }
        Phase::Verifying => {
            state.pending_verifications.pop_front();
            Ok(head_to_next(state, env, now))
        }
        _ => Ok(None),
    }
}

fn verify(state: &mut AgentState, env: &mut Env, now: Timestamp, hazard: &HazardRef) -> Result<(), MissionError> {
    let id = state.agent_id.clone();
    let event_id = state.next_event_id();
    let reading = sense(env.scenario, &id, state.position, &mut state.rng, &event_id, now);
    env.log.push(
        now,
        &id,
        LogEvent::Detection {
            event_id: event_id.clone(),
            detections: reading.detections.clone(),
        },
    );
    let tol = env.config.matching.position_tolerance;
    let info = hazard.update.hazard.as_ref().expect("hazard update");
    let wanted: Vec<&UpdateObject> = hazard
        .update
        .objects
        .iter()
        .filter(|o| o.identity == info.identity || info.components.contains(&o.identity))
        .collect();
    let mut used = vec![false; reading.detections.len()];
    let mut seen: Vec<Option<&DetectionRecord>> = Vec::with_capacity(wanted.len());
    for o in &wanted {
        let best = reading
            .detections
            .iter()
            .enumerate()
            .filter(|(i, d)| !used[*i] && d.obj_name == o.obj_name)
            .map(|(i, d)| (i, d, distance([d.position[0], d.position[1]], [o.position[0], o.position[1]])))
            .filter(|(_, _, dist)| *dist <= tol)
            .min_by(|a, b| a.2.total_cmp(&b.2));
        seen.push(best.map(|(i, d, _)| {
            used[i] = true;
            d
        }));
    }
    let verified = !wanted.is_empty() && seen.iter().all(Option::is_some);
    let status = format!("{}_by_{id}", if verified { "verified" } else { "unconfirmed" });
    let objects = wanted
        .iter()
        .zip(&seen)
        .map(|(o, d)| {
            let mut obj = (*o).clone();
            if let Some(d) = d {
                obj.position = d.position;
                obj.height = d.height;
                obj.width = d.width;
                obj.obj_cl = d.obj_cl;
                obj.position_cl = d.position_cl;
                obj.size_cl = d.size_cl;
            }
            obj.status = status.clone();
            obj
        })
        .collect();
    let msg_id = state.next_msg_id();
    let update = DcmdUpdate {
        msg_id: msg_id.clone(),
        source_agent: id.clone(),
        timestamp: now,
        kind: UpdateKind::Verification,
        event_id,
        area: hazard.update.area.clone(),
        objects,
        hazard: None,
        verification: Some(VerificationInfo {
            status: status.clone(),
            identity: hazard.identity.clone(),
            origin_agent: hazard.origin_agent.clone(),
            verified,
        }),
    };
    env.log.push(
        now,
        &id,
        LogEvent::Verification {
            hazard: hazard.identity.clone(),
            origin_agent: hazard.origin_agent.clone(),
            verified,
            status,
        },
    );
    match apply_update(&mut state.store, &update) {
        Ok(Applied::Inserted(ids)) => {
            env.log.push(now, &id, LogEvent::Inserted { msg_id, things: ids.len() });
        }
        Ok(Applied::Duplicate) => {}
        Err(e) => env.log.push(now, &id, LogEvent::ApplyFailed { msg_id, message: e.to_string() }),
    }
    publish(state, env, now, &update)
}

/// Applies a delivered update to the recipient's store. A Verifier that receives a
/// hazard assigned to it queues the hazard and, when idle, sets off. Returns a new
/// wake-up time when the agent starts moving.
pub fn receive(state: &mut AgentState, env: &mut Env, delivery: &Delivery) -> Option<Timestamp> {
    let u = &delivery.update;
    let now = delivery.at;
    let id = state.agent_id.clone();
    match apply_update(&mut state.store, u) {
        Ok(applied) => env.log.push(
            now,
            &id,
            LogEvent::Received {
                msg_id: u.msg_id.clone(),
                kind: u.kind,
                sender: delivery.sender.clone(),
                applied: matches!(applied, Applied::Inserted(_)),
            },
        ),
        Err(e) => env.log.push(
            now,
            &id,
            LogEvent::ApplyFailed {
                msg_id: u.msg_id.clone(),
                message: e.to_string(),
            },
        ),
    }
    if state.role != Role::Verifier || env.assignments.get(&u.msg_id) != Some(&id) {
        return None;
    }
    let h = u.hazard.as_ref()?;
    state.pending_verifications.push_back(HazardRef {
        identity: h.identity.clone(),
        origin_agent: h.origin_agent.clone(),
        position: h.position,
        update: u.clone(),
    });
    if state.phase == Phase::Idle {
        head_to_next(state, env, now)
    } else {
        None
    }
}

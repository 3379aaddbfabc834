use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Phase;
use crate::assessment::{AssessmentResult, DetectionRecord};
use crate::net::UpdateKind;
use crate::Timestamp;

/// Compact view of one assessed object for the log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssessedObject {
    pub obj_name: String,
    pub identity: String,
    pub p_known: f64,
    pub is_known: bool,
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hazard_probability: Option<f64>,
}

impl From<&AssessmentResult> for AssessedObject {
    fn from(r: &AssessmentResult) -> Self {
        AssessedObject {
            obj_name: r.obj_name.clone(),
            identity: r.identity.clone(),
            p_known: r.p_known,
            is_known: r.is_known,
            status: r.status.clone(),
            hazard_probability: r.hazard.as_ref().map(|h| h.probability),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum LogEvent {
    MissionStart {
        scenario: String,
        seed: u64,
        nets_checksum: String,
        schema_hash: String,
    },
    Phase {
        from: Phase,
        to: Phase,
    },
    Arrived {
        waypoint: String,
        position: [f64; 2],
    },
    Detection {
        event_id: String,
        detections: Vec<DetectionRecord>,
    },
    Assessment {
        event_id: String,
        objects: Vec<AssessedObject>,
    },
    AssessmentFailed {
        event_id: String,
        message: String,
    },
    Inserted {
        msg_id: String,
        things: usize,
    },
    Sent {
        msg_id: String,
        kind: UpdateKind,
        recipients: Vec<String>,
    },
    Received {
        msg_id: String,
        kind: UpdateKind,
        sender: String,
        applied: bool,
    },
    ApplyFailed {
        msg_id: String,
        message: String,
    },
    VerifierActivation {
        hazard: String,
        origin_agent: String,
        msg_id: String,
        verifier: String,
    },
    Verification {
        hazard: String,
        origin_agent: String,
        verified: bool,
        status: String,
    },
    MissionEnd {
        success: bool,
    },
}

impl LogEvent {
    pub fn name(&self) -> &'static str {
        match self {
            LogEvent::MissionStart { .. } => "mission_start",
            LogEvent::Phase { .. } => "phase",
            LogEvent::Arrived { .. } => "arrived",
            LogEvent::Detection { .. } => "detection",
            LogEvent::Assessment { .. } => "assessment",
            LogEvent::AssessmentFailed { .. } => "assessment_failed",
            LogEvent::Inserted { .. } => "inserted",
            LogEvent::Sent { .. } => "sent",
            LogEvent::Received { .. } => "received",
            LogEvent::ApplyFailed { .. } => "apply_failed",
            LogEvent::VerifierActivation { .. } => "verifier_activation",
            LogEvent::Verification { .. } => "verification",
            LogEvent::MissionEnd { .. } => "mission_end",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time: Timestamp,
    pub agent: String,
    pub seq: u64,
    #[serde(flatten)]
    pub event: LogEvent,
}

#[derive(Debug, thiserror::Error)]
#[error("log line {line}: {source}")]
pub struct LogParseError {
    pub line: usize,
    #[source]
    pub source: serde_json::Error,
}

/// Mission event records, ordered by (time, agent, seq).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MissionLog {
    pub records: Vec<LogRecord>,
    next_seq: u64,
}

impl MissionLog {
    pub fn new() -> Self {
        MissionLog::default()
    }

    pub fn push(&mut self, time: Timestamp, agent: &str, event: LogEvent) {
        self.records.push(LogRecord {
            time,
            agent: agent.to_string(),
            seq: self.next_seq,
            event,
        });
        self.next_seq += 1;
    }

    pub fn sort(&mut self) {
        self.records
            .sort_by(|a, b| (a.time, &a.agent, a.seq).cmp(&(b.time, &b.agent, b.seq)));
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("log records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<MissionLog, LogParseError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(line).map_err(|source| LogParseError { line: i + 1, source })?);
        }
        let next_seq = records.iter().map(|r: &LogRecord| r.seq + 1).max().unwrap_or(0);
        Ok(MissionLog { records, next_seq })
    }

    /// One line per record grouped under a heading per timestamp.
    pub fn timeline(&self) -> String {
        let mut out = String::new();
        let mut current = None;
        for r in &self.records {
            if current != Some(r.time) {
                let _ = writeln!(out, "[{}]", r.time);
                current = Some(r.time);
            }
            let _ = writeln!(out, "  {:<10} {}", r.agent, describe(&r.event));
        }
        out
    }
}

fn describe(e: &LogEvent) -> String {
    match e {
        LogEvent::MissionStart { scenario, seed, .. } => format!("mission {scenario} started with seed {seed}"),
        LogEvent::Phase { from, to } => format!("{from:?} -> {to:?}"),
        LogEvent::Arrived { waypoint, position } => {
            format!("arrived at {waypoint} ({:.2}, {:.2})", position[0], position[1])
        }
        LogEvent::Detection { event_id, detections } => {
            let names: Vec<&str> = detections.iter().map(|d| d.obj_name.as_str()).collect();
            format!("{event_id}: detected [{}]", names.join(", "))
        }
        LogEvent::Assessment { event_id, objects } => {
            let items: Vec<String> = objects
                .iter()
                .map(|o| match o.hazard_probability {
                    Some(p) => format!("{} {} (P(hazard)={p:.2})", o.identity, o.status),
                    None => format!("{} {} (P(known)={:.2})", o.identity, o.status, o.p_known),
                })
                .collect();
            format!("{event_id}: {}", items.join("; "))
        }
        LogEvent::AssessmentFailed { event_id, message } => format!("{event_id}: assessment failed: {message}"),
        LogEvent::Inserted { msg_id, things } => format!("{msg_id}: {things} things inserted"),
        LogEvent::Sent { msg_id, kind, recipients } => {
            format!("sent {kind} {msg_id} to {}", recipients.join(", "))
        }
        LogEvent::Received { msg_id, kind, sender, applied } => format!(
            "received {kind} {msg_id} from {sender}{}",
            if *applied { "" } else { " (already known)" }
        ),
        LogEvent::ApplyFailed { msg_id, message } => format!("{msg_id}: could not apply: {message}"),
        LogEvent::VerifierActivation { hazard, verifier, .. } => format!("{hazard} assigned to {verifier}"),
        LogEvent::Verification { hazard, status, .. } => format!("{hazard}: {status}"),
        LogEvent::MissionEnd { success } => {
            format!("mission {}", if *success { "complete" } else { "failed" })
        }
    }
}

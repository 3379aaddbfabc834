use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{decode_update, encode_update, route, DcmdUpdate, DecodeError, InvalidUpdate, Roster, RoutingPolicy};
use crate::perception::Role;
use crate::Timestamp;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BusError {
    #[error("bus is closed")]
    Closed,
    #[error("`{0}` is not subscribed")]
    UnknownAgent(String),
    #[error(transparent)]
    Invalid(#[from] InvalidUpdate),
    #[error("frame from `{sender}` failed to decode: {source}")]
    Decode {
        sender: String,
        #[source]
        source: DecodeError,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subscriber {
    Agent(Role),
    /// Receives everything routed to the RCC; never publishes.
    Observer,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Delivery {
    pub recipient: String,
    pub sender: String,
    pub at: Timestamp,
    pub update: DcmdUpdate,
}

#[derive(Clone, Debug)]
struct InFlight {
    ready: Timestamp,
    msg_id: String,
    frame: Vec<u8>,
}

/// Simulated-time publish/subscribe bus.
///
/// Each (recipient, sender) pair has its own FIFO queue, so one sender's updates always
/// arrive in publish order. When several senders have updates ready for the same
/// recipient, a seeded stream picks which queue goes next.
#[derive(Debug)]
pub struct Bus {
    policy: RoutingPolicy,
    latency_centis: i64,
    agents: Vec<(String, Role)>,
    observer: Option<String>,
    queues: BTreeMap<(String, String), VecDeque<InFlight>>,
    delivered: BTreeSet<(String, String)>,
    rng: ChaCha8Rng,
    closed: bool,
}

impl Bus {
    /// `latency` is rounded to whole centiseconds, minimum one.
    pub fn new(policy: RoutingPolicy, latency_seconds: f64, seed: u64) -> Self {
        Bus {
            policy,
            latency_centis: ((latency_seconds * 100.0).round() as i64).max(1),
            agents: Vec::new(),
            observer: None,
            queues: BTreeMap::new(),
            delivered: BTreeSet::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            closed: false,
        }
    }

    pub fn subscribe(&mut self, id: &str, who: Subscriber) {
        match who {
            Subscriber::Agent(role) => {
                if !self.agents.iter().any(|(a, _)| a == id) {
                    self.agents.push((id.to_string(), role));
                }
            }
            Subscriber::Observer => self.observer = Some(id.to_string()),
        }
    }

    pub fn roster(&self) -> Roster {
        Roster::new(self.agents.clone(), self.observer.as_deref().unwrap_or(""))
    }

    /// Encodes the update once and queues it for every routed recipient. Returns the
    /// recipient list.
    pub fn publish(&mut self, update: &DcmdUpdate, now: Timestamp) -> Result<Vec<String>, BusError> {
        if self.closed {
            return Err(BusError::Closed);
        }
        if !self.agents.iter().any(|(a, _)| *a == update.source_agent) {
            return Err(BusError::UnknownAgent(update.source_agent.clone()));
        }
        update.validate()?;
        let frame = encode_update(update);
        let mut recipients = route(&self.policy, &self.roster(), update);
        recipients.retain(|r| !r.is_empty());
        let ready = now.add_centis(self.latency_centis);
        for r in &recipients {
            self.queues
                .entry((r.clone(), update.source_agent.clone()))
                .or_default()
                .push_back(InFlight {
                    ready,
                    msg_id: update.msg_id.clone(),
                    frame: frame.clone(),
                });
        }
        Ok(recipients)
    }

    /// Earliest time at which some queued update becomes deliverable.
    pub fn next_ready(&self) -> Option<Timestamp> {
        self.queues.values().filter_map(|q| q.front()).map(|m| m.ready).min()
    }

    pub fn in_flight(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    /// Removes and decodes every update deliverable at `now`, recipients in id order.
    /// A message id is delivered to a given recipient at most once.
    pub fn deliver_due(&mut self, now: Timestamp) -> Result<Vec<Delivery>, BusError> {
        let recipients: BTreeSet<String> = self.queues.keys().map(|(r, _)| r.clone()).collect();
        let mut out = Vec::new();
        for recipient in recipients {
            loop {
                let ready: Vec<String> = self
                    .queues
                    .iter()
                    .filter(|((r, _), q)| *r == recipient && q.front().is_some_and(|m| m.ready <= now))
                    .map(|((_, s), _)| s.clone())
                    .collect();
                let Some(sender) = ready.choose(&mut self.rng).cloned() else { break };
                let key = (recipient.clone(), sender.clone());
                let msg = self.queues.get_mut(&key).and_then(VecDeque::pop_front).expect("ready head");
                if self.queues[&key].is_empty() {
                    self.queues.remove(&key);
                }
                if !self.delivered.insert((recipient.clone(), msg.msg_id.clone())) {
                    continue;
                }
                let update = decode_update(&msg.frame).map_err(|source| BusError::Decode {
                    sender: sender.clone(),
                    source,
                })?;
                out.push(Delivery {
                    recipient: recipient.clone(),
                    sender,
                    at: now,
                    update,
                });
            }
        }
        Ok(out)
    }

    /// Further publishes fail; queued updates can still be drained.
    pub fn shutdown(&mut self) {
        self.closed = true;
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

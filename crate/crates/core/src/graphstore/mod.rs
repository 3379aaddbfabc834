//! Per-agent knowledge graph.
//!
//! A [`Store`] holds entity and relation instances typed by a [`SchemaDef`]. Every
//! write is checked against the schema and either fully applied or rejected with the
//! store untouched. Ids are monotonically increasing and never reused.

mod apriori;
mod pattern;
mod snapshot;
mod value;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use crate::ontology::{SchemaDef, TypeKind, ValueKind};

pub use apriori::{load_a_priori, LoadError, A_PRIORI_ORIGIN};
pub use pattern::{AttrPred, Binding, Bound, Clause, Pattern, PatternError};
pub use snapshot::SnapshotError;
pub use value::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ThingId(pub u64);

impl fmt::Display for ThingId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

pub type Attributes = BTreeMap<String, Value>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThingInstance {
    pub id: ThingId,
    pub type_name: String,
    pub attributes: Attributes,
    /// Relations only: role name to players, in insertion order.
    pub role_players: BTreeMap<String, Vec<ThingId>>,
}

impl ThingInstance {
    pub fn attr(&self, name: &str) -> Option<&Value> {
        self.attributes.get(name)
    }

    pub fn str_attr(&self, name: &str) -> Option<&str> {
        self.attributes.get(name).and_then(Value::as_str)
    }

    pub fn f64_attr(&self, name: &str) -> Option<f64> {
        self.attributes.get(name).and_then(Value::as_f64)
    }

    pub fn players(&self, role: &str) -> &[ThingId] {
        self.role_players.get(role).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Reference to a role player while building a batch: an existing thing or an earlier
/// member of the same batch.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum PlayerRef {
    Stored(ThingId),
    Batch(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewThing {
    pub type_name: String,
    pub attributes: Attributes,
    pub role_players: BTreeMap<String, Vec<PlayerRef>>,
}

impl NewThing {
    pub fn new(type_name: impl Into<String>) -> Self {
        NewThing {
            type_name: type_name.into(),
            attributes: Attributes::new(),
            role_players: BTreeMap::new(),
        }
    }

    pub fn with(mut self, attribute: &str, value: impl Into<Value>) -> Self {
        self.attributes.insert(attribute.to_string(), value.into());
        self
    }

    pub fn player(mut self, role: &str, player: PlayerRef) -> Self {
        self.role_players
            .entry(role.to_string())
            .or_default()
            .push(player);
        self
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("`{0}` is not an entity or relation type")]
    NotInstantiable(String),
    #[error("type `{type_name}` does not own attribute `{attribute}`")]
    UnownedAttribute { type_name: String, attribute: String },
    #[error("attribute `{attribute}` expects {expected}, got {found}")]
    ValueKindMismatch {
        attribute: String,
        expected: ValueKind,
        found: ValueKind,
    },
    #[error("attribute `{0}` is NaN")]
    NotANumber(String),
    #[error("relation `{relation}` has no role `{role}`")]
    UnknownRole { relation: String, role: String },
    #[error("`{player_type}` may not play `{role}` in `{relation}`")]
    IllegalRolePlayer {
        relation: String,
        role: String,
        player_type: String,
    },
    #[error("relation `{0}` needs at least one role player")]
    NoRolePlayers(String),
    #[error("dangling reference to {0}")]
    DanglingReference(ThingId),
    #[error("batch reference {0} does not point at an earlier batch member")]
    BadBatchReference(usize),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("batch item {index}: {source}")]
pub struct BatchError {
    pub index: usize,
    #[source]
    pub source: StoreError,
}

#[derive(Clone, Debug)]
pub struct Store {
    schema: Arc<SchemaDef>,
    things: BTreeMap<ThingId, ThingInstance>,
    next_id: u64,
    by_type: BTreeMap<String, BTreeSet<ThingId>>,
    by_attr: BTreeMap<String, BTreeMap<Value, BTreeSet<ThingId>>>,
    /// player id -> (role, relation id)
    plays: BTreeMap<ThingId, BTreeSet<(String, ThingId)>>,
}

/// Stores are isomorphic when they hold the same things under the same ids, share a
/// schema and will hand out the same next id.
impl PartialEq for Store {
    fn eq(&self, other: &Self) -> bool {
        self.next_id == other.next_id
            && self.things == other.things
            && (Arc::ptr_eq(&self.schema, &other.schema) || self.schema == other.schema)
    }
}

impl Store {
    pub fn new(schema: Arc<SchemaDef>) -> Self {
        Store {
            schema,
            things: BTreeMap::new(),
            next_id: 1,
            by_type: BTreeMap::new(),
            by_attr: BTreeMap::new(),
            plays: BTreeMap::new(),
        }
    }

    pub fn schema(&self) -> &SchemaDef {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<SchemaDef> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.things.len()
    }

    pub fn is_empty(&self) -> bool {
        self.things.is_empty()
    }

    pub fn next_id(&self) -> ThingId {
        ThingId(self.next_id)
    }

    pub fn get(&self, id: ThingId) -> Option<&ThingInstance> {
        self.things.get(&id)
    }

    /// All things in id order.
    pub fn things(&self) -> impl Iterator<Item = &ThingInstance> {
        self.things.values()
    }

    /// Things whose type is `type_name` or a subtype of it, in id order.
    pub fn things_of_type(&self, type_name: &str) -> Vec<&ThingInstance> {
        let mut ids: BTreeSet<ThingId> = BTreeSet::new();
        for t in self.schema.descendants(type_name) {
            if let Some(set) = self.by_type.get(t) {
                ids.extend(set.iter().copied());
            }
        }
        ids.iter().map(|id| &self.things[id]).collect()
    }

    /// Relations in which `player` fills `role`.
    pub fn relations_played(&self, player: ThingId, role: &str) -> Vec<ThingId> {
        self.plays
            .get(&player)
            .map(|set| {
                set.iter()
                    .filter(|(r, _)| r == role)
                    .map(|(_, rel)| *rel)
                    .collect()
            })
            .unwrap_or_default()
    }

    pub(crate) fn ids_with_value(&self, attribute: &str, value: &Value) -> BTreeSet<ThingId> {
        self.by_attr
            .get(attribute)
            .and_then(|m| m.get(value))
            .cloned()
            .unwrap_or_default()
    }

    pub(crate) fn ids_in_range(&self, attribute: &str, lo: &Value, hi: &Value) -> BTreeSet<ThingId> {
        let mut out = BTreeSet::new();
        if lo > hi {
            return out;
        }
        if let Some(m) = self.by_attr.get(attribute) {
            for (v, ids) in m.range(lo.clone()..=hi.clone()) {
                if v.kind() == lo.kind() {
                    out.extend(ids.iter().copied());
                }
            }
        }
        out
    }

    pub(crate) fn ids_of_exact_type(&self, type_name: &str) -> Option<&BTreeSet<ThingId>> {
        self.by_type.get(type_name)
    }

    pub(crate) fn plays_index(&self, player: ThingId) -> Option<&BTreeSet<(String, ThingId)>> {
        self.plays.get(&player)
    }

    /// Inserts one entity or relation.
    pub fn insert_thing(
        &mut self,
        type_name: &str,
        attributes: Attributes,
        role_players: BTreeMap<String, Vec<ThingId>>,
    ) -> Result<ThingId, StoreError> {
        let spec = NewThing {
            type_name: type_name.to_string(),
            attributes,
            role_players: role_players
                .into_iter()
                .map(|(r, ps)| (r, ps.into_iter().map(PlayerRef::Stored).collect()))
                .collect(),
        };
        self.insert_batch(vec![spec])
            .map(|ids| ids[0])
            .map_err(|e| e.source)
    }

    /// Inserts several things atomically. Later members may reference earlier ones via
    /// [`PlayerRef::Batch`]. On error nothing is written.
    pub fn insert_batch(&mut self, batch: Vec<NewThing>) -> Result<Vec<ThingId>, BatchError> {
        let mut batch_types: Vec<&str> = Vec::with_capacity(batch.len());
        for (index, spec) in batch.iter().enumerate() {
            self.check(spec, &batch_types)
                .map_err(|source| BatchError { index, source })?;
            batch_types.push(&spec.type_name);
        }
        let base = self.next_id;
        let ids: Vec<ThingId> = (0..batch.len() as u64).map(|i| ThingId(base + i)).collect();
        for (spec, &id) in batch.into_iter().zip(&ids) {
            let role_players = spec
                .role_players
                .into_iter()
                .map(|(role, players)| {
                    let resolved = players
                        .into_iter()
                        .map(|p| match p {
                            PlayerRef::Stored(id) => id,
                            PlayerRef::Batch(i) => ids[i],
                        })
                        .collect();
                    (role, resolved)
                })
                .collect();
            self.commit(ThingInstance {
                id,
                type_name: spec.type_name,
                attributes: spec.attributes,
                role_players,
            });
        }
        self.next_id = base + ids.len() as u64;
        Ok(ids)
    }

    fn check(&self, spec: &NewThing, batch_types: &[&str]) -> Result<(), StoreError> {
        let schema = &*self.schema;
        let kind = schema
            .kind_of(&spec.type_name)
            .ok_or_else(|| StoreError::UnknownType(spec.type_name.clone()))?;
        if kind == TypeKind::Attribute || SchemaDef::is_root(&spec.type_name) {
            return Err(StoreError::NotInstantiable(spec.type_name.clone()));
        }
        check_attributes(schema, &spec.type_name, &spec.attributes)?;

        match kind {
            TypeKind::Entity => {
                if let Some(role) = spec.role_players.keys().next() {
                    return Err(StoreError::UnknownRole {
                        relation: spec.type_name.clone(),
                        role: role.clone(),
                    });
                }
            }
            _ => {
                if spec.role_players.values().all(Vec::is_empty) {
                    return Err(StoreError::NoRolePlayers(spec.type_name.clone()));
                }
                for (role, players) in &spec.role_players {
                    if schema.role(&spec.type_name, role).is_none() {
                        return Err(StoreError::UnknownRole {
                            relation: spec.type_name.clone(),
                            role: role.clone(),
                        });
                    }
                    for p in players {
                        let player_type = match *p {
                            PlayerRef::Stored(id) => self
                                .things
                                .get(&id)
                                .map(|t| t.type_name.as_str())
                                .ok_or(StoreError::DanglingReference(id))?,
                            PlayerRef::Batch(i) => *batch_types
                                .get(i)
                                .ok_or(StoreError::BadBatchReference(i))?,
                        };
                        if !schema.allows_player(&spec.type_name, role, player_type) {
                            return Err(StoreError::IllegalRolePlayer {
                                relation: spec.type_name.clone(),
                                role: role.clone(),
                                player_type: player_type.to_string(),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn commit(&mut self, thing: ThingInstance) {
        let id = thing.id;
        self.by_type
            .entry(thing.type_name.clone())
            .or_default()
            .insert(id);
        for (name, value) in &thing.attributes {
            self.by_attr
                .entry(name.clone())
                .or_default()
                .entry(value.clone())
                .or_default()
                .insert(id);
        }
        for (role, players) in &thing.role_players {
            for p in players {
                self.plays.entry(*p).or_default().insert((role.clone(), id));
            }
        }
        self.next_id = self.next_id.max(id.0 + 1);
        self.things.insert(id, thing);
    }

    /// Re-checks every stored thing against the schema and referential integrity.
    pub fn validate_all(&self) -> Vec<(ThingId, StoreError)> {
        let mut out = Vec::new();
        for thing in self.things.values() {
            if let Err(e) = self.check_stored(thing) {
                out.push((thing.id, e));
            }
        }
        out
    }

    fn check_stored(&self, thing: &ThingInstance) -> Result<(), StoreError> {
        let spec = NewThing {
            type_name: thing.type_name.clone(),
            attributes: thing.attributes.clone(),
            role_players: thing
                .role_players
                .iter()
                .map(|(r, ps)| (r.clone(), ps.iter().map(|&p| PlayerRef::Stored(p)).collect()))
                .collect(),
        };
        self.check(&spec, &[])
    }

    /// Runs a pattern; see [`Pattern`].
    pub fn match_pattern(&self, pattern: &Pattern) -> Result<Vec<Binding>, PatternError> {
        pattern::run(self, pattern)
    }

    pub fn snapshot(&self) -> Vec<u8> {
        snapshot::write(self)
    }

    pub fn restore(schema: Arc<SchemaDef>, bytes: &[u8]) -> Result<Store, SnapshotError> {
        snapshot::read(schema, bytes)
    }
}

fn check_attributes(
    schema: &SchemaDef,
    type_name: &str,
    attributes: &Attributes,
) -> Result<(), StoreError> {
    for (name, value) in attributes {
        let expected = schema
            .value_kind(name)
            .filter(|_| schema.owns_attribute(type_name, name))
            .ok_or_else(|| StoreError::UnownedAttribute {
                type_name: type_name.to_string(),
                attribute: name.clone(),
            })?;
        if value.kind() != expected {
            return Err(StoreError::ValueKindMismatch {
                attribute: name.clone(),
                expected,
                found: value.kind(),
            });
        }
        if matches!(value, Value::Double(d) if d.is_nan()) {
            return Err(StoreError::NotANumber(name.clone()));
        }
    }
    Ok(())
}

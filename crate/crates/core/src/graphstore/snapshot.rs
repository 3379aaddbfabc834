//! Binary snapshot format.
//!
//! ```text
//! "DKB1"             4 bytes
//! schema hash        32 bytes (SHA-256 of the canonical schema text)
//! next id            u64
//! thing count        u64
//! thing records      u32 length prefix + body, ascending id order
//!   id u64 | type str | n_attr u32 | (name str, tag u8, value)* | n_roles u32 | (role str, n u32, id u64*)*
//! ```
//!
//! Integers are little-endian, strings are u32 length + UTF-8, doubles are raw IEEE bits.
//! Value tags: 0 string, 1 double, 2 datetime (i64 centiseconds), 3 boolean (u8).

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{Attributes, NewThing, PlayerRef, Store, StoreError, ThingId, ThingInstance, Value};
use crate::codec::{ReadError, Reader, Writer};
use crate::ontology::SchemaDef;
use crate::Timestamp;

pub const MAGIC: &[u8; 4] = b"DKB1";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SnapshotError {
    #[error("bad magic at offset 0")]
    BadMagic,
    #[error("snapshot was written for a different schema")]
    SchemaMismatch,
    #[error("truncated snapshot at offset {offset}")]
    Truncated { offset: usize },
    #[error("corrupt snapshot at offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
    #[error("invalid thing at offset {offset}: {source}")]
    Invalid {
        offset: usize,
        #[source]
        source: StoreError,
    },
}

impl SnapshotError {
    pub fn offset(&self) -> usize {
        match self {
            SnapshotError::BadMagic => 0,
            SnapshotError::SchemaMismatch => 4,
            SnapshotError::Truncated { offset }
            | SnapshotError::Corrupt { offset, .. }
            | SnapshotError::Invalid { offset, .. } => *offset,
        }
    }
}

impl From<ReadError> for SnapshotError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Truncated { offset, .. } => SnapshotError::Truncated { offset },
            ReadError::BadUtf8 { offset } => SnapshotError::Corrupt {
                offset,
                reason: "invalid UTF-8".into(),
            },
        }
    }
}

pub(super) fn write(store: &Store) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(MAGIC);
    w.bytes(&store.schema.hash());
    w.u64(store.next_id);
    w.u64(store.things.len() as u64);
    for thing in store.things.values() {
        w.framed(|w| {
            w.u64(thing.id.0);
            w.str(&thing.type_name);
            w.u32(thing.attributes.len() as u32);
            for (name, value) in &thing.attributes {
                w.str(name);
                match value {
                    Value::String(s) => {
                        w.u8(0);
                        w.str(s);
                    }
                    Value::Double(d) => {
                        w.u8(1);
                        w.f64(*d);
                    }
                    Value::Datetime(t) => {
                        w.u8(2);
                        w.i64(t.centis());
                    }
                    Value::Boolean(b) => {
                        w.u8(3);
                        w.u8(*b as u8);
                    }
                }
            }
            w.u32(thing.role_players.len() as u32);
            for (role, players) in &thing.role_players {
                w.str(role);
                w.u32(players.len() as u32);
                for p in players {
                    w.u64(p.0);
                }
            }
        });
    }
    w.buf
}

pub(super) fn read(schema: Arc<SchemaDef>, bytes: &[u8]) -> Result<Store, SnapshotError> {
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(|_| SnapshotError::BadMagic)? != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if r.take(32)? != schema.hash() {
        return Err(SnapshotError::SchemaMismatch);
    }
    let next_id = r.u64()?;
    let count = r.u64()?;
    let mut store = Store::new(schema);
    let mut last: u64 = 0;
    for _ in 0..count {
        let record_at = r.offset();
        let len = r.u32()? as usize;
        let body_at = r.offset();
        let thing = read_thing(&mut r)?;
        if r.offset() - body_at != len {
            return Err(SnapshotError::Corrupt {
                offset: record_at,
                reason: format!("record length {len} does not match contents"),
            });
        }
        if thing.id.0 <= last || thing.id.0 >= next_id {
            return Err(SnapshotError::Corrupt {
                offset: record_at,
                reason: format!("id {} out of order", thing.id),
            });
        }
        last = thing.id.0;
        let spec = NewThing {
            type_name: thing.type_name.clone(),
            attributes: thing.attributes.clone(),
            role_players: thing
                .role_players
                .iter()
                .map(|(k, v)| (k.clone(), v.iter().map(|&p| PlayerRef::Stored(p)).collect()))
                .collect(),
        };
        store
            .check(&spec, &[])
            .map_err(|source| SnapshotError::Invalid {
                offset: record_at,
                source,
            })?;
        store.commit(thing);
    }
    if r.remaining() != 0 {
        return Err(SnapshotError::Corrupt {
            offset: r.offset(),
            reason: "trailing bytes".into(),
        });
    }
    store.next_id = next_id.max(1);
    Ok(store)
}

fn read_thing(r: &mut Reader<'_>) -> Result<ThingInstance, SnapshotError> {
    let id = ThingId(r.u64()?);
    let type_name = r.str()?;
    let n_attr = r.u32()?;
    let mut attributes = Attributes::new();
    for _ in 0..n_attr {
        let name = r.str()?;
        let tag_at = r.offset();
        let value = match r.u8()? {
            0 => Value::String(r.str()?),
            1 => Value::Double(r.f64()?),
            2 => Value::Datetime(Timestamp::from_centis(r.i64()?)),
            3 => match r.u8()? {
                0 => Value::Boolean(false),
                1 => Value::Boolean(true),
                b => {
                    return Err(SnapshotError::Corrupt {
                        offset: tag_at + 1,
                        reason: format!("bad boolean byte {b}"),
                    })
                }
            },
            t => {
                return Err(SnapshotError::Corrupt {
                    offset: tag_at,
                    reason: format!("unknown value tag {t}"),
                })
            }
        };
        attributes.insert(name, value);
    }
    let n_roles = r.u32()?;
    let mut role_players = BTreeMap::new();
    for _ in 0..n_roles {
        let role = r.str()?;
        let n = r.u32()? as usize;
        if n > r.remaining() / 8 {
            return Err(SnapshotError::Truncated {
                offset: r.offset(),
            });
        }
        let mut players = Vec::with_capacity(n);
        for _ in 0..n {
            players.push(ThingId(r.u64()?));
        }
        role_players.insert(role, players);
    }
    Ok(ThingInstance {
        id,
        type_name,
        attributes,
        role_players,
    })
}

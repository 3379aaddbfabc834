//! Wire format of a DCMD update.
//!
//! ```text
//! "DCMD"              4 bytes
//! version             u8 (currently 1)
//! body length         u32
//! body:
//!   msg_id str | source_agent str | timestamp i64 (centiseconds) | kind u8
//!   event_id str | area str
//!   n_objects u32, each object:
//!     obj_name str | identity str | origin_agent str | general_class str
//!     x f64 | y f64 | z f64 | height f64 | width f64
//!     obj_cl f64 | position_cl f64 | size_cl f64 | posterior f64
//!     is_known u8 | status str | has_hazard_probability u8 [| f64]
//!   has_hazard u8 [| identity str | origin_agent str | probability f64 | x y z f64
//!                  | n_components u32 | component str*]
//!   has_verification u8 [| status str | identity str | origin_agent str | verified u8]
//! ```
//!
//! Integers are little-endian, strings are u32 length + UTF-8, doubles are raw IEEE bits.
//! Kind tags: 0 known_object, 1 new_object, 2 hazard, 3 verification.

use super::{DcmdUpdate, HazardInfo, UpdateKind, UpdateObject, VerificationInfo};
use crate::codec::{ReadError, Reader, Writer};
use crate::Timestamp;

pub const WIRE_MAGIC: &[u8; 4] = b"DCMD";
pub const WIRE_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DecodeError {
    #[error("bad magic at offset 0")]
    BadMagic,
    #[error("unsupported wire version {version} at offset 4")]
    UnknownVersion { version: u8 },
    #[error("truncated frame at offset {offset}")]
    Truncated { offset: usize },
    #[error("corrupt frame at offset {offset}: {reason}")]
    Corrupt { offset: usize, reason: String },
}

impl DecodeError {
    pub fn offset(&self) -> usize {
        match self {
            DecodeError::BadMagic => 0,
            DecodeError::UnknownVersion { .. } => 4,
            DecodeError::Truncated { offset } | DecodeError::Corrupt { offset, .. } => *offset,
        }
    }
}

impl From<ReadError> for DecodeError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Truncated { offset, .. } => DecodeError::Truncated { offset },
            ReadError::BadUtf8 { offset } => DecodeError::Corrupt {
                offset,
                reason: "invalid UTF-8".into(),
            },
        }
    }
}

pub fn encode_update(u: &DcmdUpdate) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(WIRE_MAGIC);
    w.u8(WIRE_VERSION);
    w.framed(|w| {
        w.str(&u.msg_id);
        w.str(&u.source_agent);
        w.i64(u.timestamp.centis());
        w.u8(u.kind.tag());
        w.str(&u.event_id);
        w.str(&u.area);
        w.u32(u.objects.len() as u32);
        for o in &u.objects {
            w.str(&o.obj_name);
            w.str(&o.identity);
            w.str(&o.origin_agent);
            w.str(&o.general_class);
            for v in o.position {
                w.f64(v);
            }
            for v in [o.height, o.width, o.obj_cl, o.position_cl, o.size_cl, o.posterior] {
                w.f64(v);
            }
            w.u8(o.is_known as u8);
            w.str(&o.status);
            match o.hazard_probability {
                Some(p) => {
                    w.u8(1);
                    w.f64(p);
                }
                None => w.u8(0),
            }
        }
        match &u.hazard {
            Some(h) => {
                w.u8(1);
                w.str(&h.identity);
                w.str(&h.origin_agent);
                w.f64(h.probability);
                for v in h.position {
                    w.f64(v);
                }
                w.u32(h.components.len() as u32);
                for c in &h.components {
                    w.str(c);
                }
            }
            None => w.u8(0),
        }
        match &u.verification {
            Some(v) => {
                w.u8(1);
                w.str(&v.status);
                w.str(&v.identity);
                w.str(&v.origin_agent);
                w.u8(v.verified as u8);
            }
            None => w.u8(0),
        }
    });
    w.buf
}

fn flag(r: &mut Reader<'_>) -> Result<bool, DecodeError> {
    let at = r.offset();
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(DecodeError::Corrupt {
            offset: at,
            reason: format!("expected 0 or 1, found {b}"),
        }),
    }
}

fn point(r: &mut Reader<'_>) -> Result<[f64; 3], DecodeError> {
    Ok([r.f64()?, r.f64()?, r.f64()?])
}

/// Decodes one frame. The input must contain exactly one frame.
pub fn decode_update(bytes: &[u8]) -> Result<DcmdUpdate, DecodeError> {
    let mut r = Reader::new(bytes);
    if r.take(4).map_err(|_| DecodeError::BadMagic)? != WIRE_MAGIC {
        return Err(DecodeError::BadMagic);
    }
    let version = r.u8()?;
    if version != WIRE_VERSION {
        return Err(DecodeError::UnknownVersion { version });
    }
    let len_at = r.offset();
    let len = r.u32()? as usize;
    let body_at = r.offset();
    if r.remaining() < len {
        return Err(DecodeError::Truncated { offset: len_at });
    }
    let msg_id = r.str()?;
    let source_agent = r.str()?;
    let timestamp = Timestamp::from_centis(r.i64()?);
    let kind_at = r.offset();
    let tag = r.u8()?;
    let kind = UpdateKind::from_tag(tag).ok_or_else(|| DecodeError::Corrupt {
        offset: kind_at,
        reason: format!("unknown update kind {tag}"),
    })?;
    let event_id = r.str()?;
    let area = r.str()?;
    let n = r.u32()? as usize;
    let mut objects = Vec::with_capacity(n.min(r.remaining() / 64));
    for _ in 0..n {
        let obj_name = r.str()?;
        let identity = r.str()?;
        let origin_agent = r.str()?;
        let general_class = r.str()?;
        let position = point(&mut r)?;
        let height = r.f64()?;
        let width = r.f64()?;
        let obj_cl = r.f64()?;
        let position_cl = r.f64()?;
        let size_cl = r.f64()?;
        let posterior = r.f64()?;
        let is_known = flag(&mut r)?;
        let status = r.str()?;
        let hazard_probability = if flag(&mut r)? { Some(r.f64()?) } else { None };
        objects.push(UpdateObject {
            obj_name,
            identity,
            origin_agent,
            general_class,
            position,
            height,
            width,
            obj_cl,
            position_cl,
            size_cl,
            posterior,
            is_known,
            status,
            hazard_probability,
        });
    }
    let hazard = if flag(&mut r)? {
        let identity = r.str()?;
        let origin_agent = r.str()?;
        let probability = r.f64()?;
        let position = point(&mut r)?;
        let k = r.u32()? as usize;
        let mut components = Vec::with_capacity(k.min(r.remaining() / 4));
        for _ in 0..k {
            components.push(r.str()?);
        }
        Some(HazardInfo {
            identity,
            origin_agent,
            probability,
            position,
            components,
        })
    } else {
        None
    };
    let verification = if flag(&mut r)? {
        Some(VerificationInfo {
            status: r.str()?,
            identity: r.str()?,
            origin_agent: r.str()?,
            verified: flag(&mut r)?,
        })
    } else {
        None
    };
    if r.offset() - body_at != len {
        return Err(DecodeError::Corrupt {
            offset: len_at,
            reason: format!("frame length {len} does not match body"),
        });
    }
    if r.remaining() != 0 {
        return Err(DecodeError::Corrupt {
            offset: r.offset(),
            reason: "trailing bytes".into(),
        });
    }
    Ok(DcmdUpdate {
        msg_id,
        source_agent,
        timestamp,
        kind,
        event_id,
        area,
        objects,
        hazard,
        verification,
    })
}

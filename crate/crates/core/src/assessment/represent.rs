use std::collections::BTreeMap;

use super::{lit, run, AssessError, AssessmentResult, DetectionRecord};
use crate::graphstore::{NewThing, PlayerRef, Store, ThingId};
use crate::net::{DcmdUpdate, HazardInfo, UpdateKind, UpdateObject};
use crate::perception::Category;

/// Outcome of applying an update to a store.
#[derive(Clone, Debug, PartialEq)]
pub enum Applied {
    /// The update's `msg_id` was already represented; nothing was inserted.
    Duplicate,
    Inserted(Vec<ThingId>),
}

/// Packages the assessed records of one event as a shareable update.
pub fn build_update(dets: &[DetectionRecord], results: &[AssessmentResult], msg_id: &str) -> DcmdUpdate {
    let first = &dets[0];
    let objects: Vec<UpdateObject> = dets
        .iter()
        .zip(results)
        .map(|(d, r)| UpdateObject {
            obj_name: d.obj_name.clone(),
            identity: r.identity.clone(),
            origin_agent: r.origin_agent.clone(),
            general_class: r.general_class.clone(),
            position: d.position,
            height: d.height,
            width: d.width,
            obj_cl: d.obj_cl,
            position_cl: d.position_cl,
            size_cl: d.size_cl,
            posterior: r.posterior,
            is_known: r.is_known,
            status: r.status.clone(),
            hazard_probability: r.hazard.as_ref().map(|h| h.probability),
        })
        .collect();
    let hazard = dets.iter().zip(results).find(|(_, r)| r.is_hazard()).map(|(d, r)| HazardInfo {
        identity: r.identity.clone(),
        origin_agent: r.origin_agent.clone(),
        probability: r.hazard.as_ref().map_or(0.0, |h| h.probability),
        position: d.position,
        components: results
            .iter()
            .filter(|c| matches!(c.category, Category::Weapon | Category::Person))
            .map(|c| c.identity.clone())
            .collect(),
    });
    let kind = if hazard.is_some() {
        UpdateKind::Hazard
    } else if results.iter().any(|r| !r.is_known) {
        UpdateKind::NewObject
    } else {
        UpdateKind::KnownObject
    };
    DcmdUpdate {
        msg_id: msg_id.to_string(),
        source_agent: first.source_agent.clone(),
        timestamp: first.timestamp,
        kind,
        event_id: first.event_id.clone(),
        area: first.area.clone(),
        objects,
        hazard,
        verification: None,
    }
}

fn find_entity(store: &Store, o: &UpdateObject) -> Result<Option<ThingId>, AssessError> {
    let text = if o.is_known {
        format!(
            "match $k isa artifact_model, has identity_name {}, has known_object true; fetch $k;",
            lit(&o.identity)
        )
    } else {
        format!(
            "match $k isa artifact_model, has identity_name {}, has origin_agent {}, has known_object false; fetch $k;",
            lit(&o.identity),
            lit(&o.origin_agent)
        )
    };
    Ok(run(store, &text)?.rows.first().and_then(|r| r[0].thing()))
}

fn class_document(store: &Store, general_class: &str) -> Result<Option<ThingId>, AssessError> {
    let text = format!(
        "match $d isa general_class_document, has class_name {}; fetch $d;",
        lit(general_class)
    );
    Ok(run(store, &text)?.rows.first().and_then(|r| r[0].thing()))
}

/// Represents an update in a store: one `processed_image` for the event, one
/// `processed_image_object` per object, each linked to the entity it is about. New
/// identities are created on first sight as instances of their general class.
///
/// Applying an update whose `msg_id` is already present changes nothing.
pub fn apply_update(store: &mut Store, update: &DcmdUpdate) -> Result<Applied, AssessError> {
    let seen = format!(
        "match $i isa processed_image, has msg_id {}; fetch $i;",
        lit(&update.msg_id)
    );
    if !run(store, &seen)?.is_empty() {
        return Ok(Applied::Duplicate);
    }

    let mut batch = vec![NewThing::new("processed_image")
        .with("event_id", update.event_id.as_str())
        .with("msg_id", update.msg_id.as_str())
        .with("update_kind", update.kind.as_str())
        .with("timestamp", update.timestamp)
        .with("source_agent", update.source_agent.as_str())
        .with("area_name", update.area.as_str())];
    let mut created: BTreeMap<(&str, &str), usize> = BTreeMap::new();

    for o in &update.objects {
        let entity = match find_entity(store, o)? {
            Some(id) => PlayerRef::Stored(id),
            None if o.is_known => {
                return Err(AssessError::UnknownIdentity {
                    identity: o.identity.clone(),
                    origin: o.origin_agent.clone(),
                })
            }
            None => match created.get(&(o.identity.as_str(), o.origin_agent.as_str())) {
                Some(&i) => PlayerRef::Batch(i),
                None => {
                    let doc = class_document(store, &o.general_class)?
                        .ok_or_else(|| AssessError::UnknownClass(o.general_class.clone()))?;
                    let i = batch.len();
                    let [x, y, z] = o.position;
                    batch.push(
                        NewThing::new(o.general_class.as_str())
                            .with("identity_name", o.identity.as_str())
                            .with("obj_class", o.obj_name.as_str())
                            .with("known_object", false)
                            .with("origin_agent", o.origin_agent.as_str())
                            .with("pos_x", x)
                            .with("pos_y", y)
                            .with("pos_z", z),
                    );
                    batch.push(
                        NewThing::new("class_description")
                            .player("document", PlayerRef::Stored(doc))
                            .player("described", PlayerRef::Batch(i)),
                    );
                    created.insert((o.identity.as_str(), o.origin_agent.as_str()), i);
                    PlayerRef::Batch(i)
                }
            },
        };
        let [x, y, z] = o.position;
        let mut obj = NewThing::new("processed_image_object")
            .with("obj_name", o.obj_name.as_str())
            .with("identity_name", o.identity.as_str())
            .with("general_class", o.general_class.as_str())
            .with("pos_x", x)
            .with("pos_y", y)
            .with("pos_z", z)
            .with("height", o.height)
            .with("width", o.width)
            .with("obj_cl", o.obj_cl)
            .with("position_cl", o.position_cl)
            .with("size_cl", o.size_cl)
            .with("posterior", o.posterior)
            .with("status", o.status.as_str())
            .with("is_hazard", o.status == "hazard")
            .with("timestamp", update.timestamp)
            .with("source_agent", update.source_agent.as_str())
            .with("area_name", update.area.as_str())
            .with("event_id", update.event_id.as_str());
        if let Some(p) = o.hazard_probability {
            obj = obj.with("hazard_probability", p);
        }
        let oi = batch.len();
        batch.push(obj);
        batch.push(
            NewThing::new("image_part")
                .player("whole", PlayerRef::Batch(0))
                .player("part", PlayerRef::Batch(oi)),
        );
        batch.push(
            NewThing::new("update_of")
                .player("subject", PlayerRef::Batch(oi))
                .player("object", entity),
        );
    }
    let ids = store.insert_batch(batch)?;
    Ok(Applied::Inserted(ids))
}

/// Builds the update for an assessed event and applies it to the agent's own store.
pub fn represent_assessment(
    store: &mut Store,
    dets: &[DetectionRecord],
    results: &[AssessmentResult],
    msg_id: &str,
) -> Result<(DcmdUpdate, Vec<ThingId>), AssessError> {
    let update = build_update(dets, results, msg_id);
    match apply_update(store, &update)? {
        Applied::Inserted(ids) => Ok((update, ids)),
        Applied::Duplicate => Ok((update, Vec::new())),
    }
}

use std::collections::BTreeMap;

use super::{BatchError, NewThing, PlayerRef, Store};
use crate::perception::Scenario;

/// Value of `origin_agent` on records that come from mission planning rather than
/// from an agent.
pub const A_PRIORI_ORIGIN: &str = "a_priori";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("a-priori information must be loaded into an empty store")]
    NotEmpty,
    #[error("scenario class `{label}` maps to `{general_class}`, which is not an artifact_model subtype")]
    NotAnArtifact { label: String, general_class: String },
    #[error("a-priori record `{identity}` uses unknown class label `{label}`")]
    UnknownLabel { identity: String, label: String },
    #[error("a-priori record `{identity}` names unknown area `{area}`")]
    UnknownArea { identity: String, area: String },
    #[error("scenario does not fit the schema: {0}")]
    Schema(#[from] BatchError),
}

/// Loads mission context, areas, team members, one general-class document per class
/// and one artifact record per known object. Returns the number of things inserted.
pub fn load_a_priori(store: &mut Store, scenario: &Scenario) -> Result<usize, LoadError> {
    if !store.is_empty() {
        return Err(LoadError::NotEmpty);
    }
    for class in &scenario.classes {
        if !matches!(store.schema().is_subtype(&class.general_class, "artifact_model"), Ok(true)) {
            return Err(LoadError::NotAnArtifact {
                label: class.label.clone(),
                general_class: class.general_class.clone(),
            });
        }
    }

    let mut batch = vec![NewThing::new("mission_context")
        .with("mission_name", scenario.mission.name.as_str())
        .with("objective", scenario.mission.objective.as_str())];

    let mut areas = BTreeMap::new();
    for area in &scenario.areas {
        areas.insert(area.name.as_str(), batch.len());
        batch.push(NewThing::new("operational_area").with("area_name", area.name.as_str()));
    }
    for agent in &scenario.agents {
        batch.push(
            NewThing::new("ugv_agent")
                .with("agent_name", agent.id.as_str())
                .with("team_role", agent.role.as_str()),
        );
    }
    let mut docs = BTreeMap::new();
    for class in &scenario.classes {
        if docs.contains_key(class.general_class.as_str()) {
            continue;
        }
        docs.insert(class.general_class.as_str(), batch.len());
        let mut doc = NewThing::new("general_class_document")
            .with("class_name", class.general_class.as_str())
            .with("obj_class", class.label.as_str())
            .with("category", class.category.as_str());
        if !class.description.is_empty() {
            doc = doc.with("description", class.description.as_str());
        }
        batch.push(doc);
    }

    for known in &scenario.a_priori {
        let class = scenario
            .class(&known.label)
            .ok_or_else(|| LoadError::UnknownLabel {
                identity: known.identity.clone(),
                label: known.label.clone(),
            })?;
        let area = *areas
            .get(known.area.as_str())
            .ok_or_else(|| LoadError::UnknownArea {
                identity: known.identity.clone(),
                area: known.area.clone(),
            })?;
        let obj = batch.len();
        let [x, y, z] = known.position;
        batch.push(
            NewThing::new(class.general_class.as_str())
                .with("identity_name", known.identity.as_str())
                .with("obj_class", class.label.as_str())
                .with("known_object", true)
                .with("origin_agent", A_PRIORI_ORIGIN)
                .with("pos_x", x)
                .with("pos_y", y)
                .with("pos_z", z),
        );
        let size = batch.len();
        batch.push(
            NewThing::new("size_quality")
                .with("height", known.height)
                .with("width", known.width),
        );
        batch.push(
            NewThing::new("quality_relation")
                .player("bearer", PlayerRef::Batch(obj))
                .player("quality", PlayerRef::Batch(size)),
        );
        if let Some(affiliation) = &known.affiliation {
            let q = batch.len();
            batch.push(NewThing::new("affiliation_quality").with("affiliation", affiliation.as_str()));
            batch.push(
                NewThing::new("quality_relation")
                    .player("bearer", PlayerRef::Batch(obj))
                    .player("quality", PlayerRef::Batch(q)),
            );
        }
        batch.push(
            NewThing::new("assigned_location")
                .player("located", PlayerRef::Batch(obj))
                .player("location", PlayerRef::Batch(area)),
        );
        batch.push(
            NewThing::new("class_description")
                .player("document", PlayerRef::Batch(docs[class.general_class.as_str()]))
                .player("described", PlayerRef::Batch(obj)),
        );
    }
    let n = batch.len();
    store.insert_batch(batch)?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::super::tests::mission_store;
    use super::super::Pattern;
    use super::*;
    use crate::bundled;

    fn loaded() -> (Store, Scenario) {
        let scenario = bundled::scenario("mission_fig6").unwrap();
        let mut store = mission_store();
        load_a_priori(&mut store, &scenario).unwrap();
        (store, scenario)
    }

    #[test]
    fn artifact_models_are_exactly_the_known_objects() {
        let (store, scenario) = loaded();
        let mut found: Vec<_> = store
            .things_of_type("artifact_model")
            .into_iter()
            .map(|t| t.str_attr("identity_name").unwrap().to_string())
            .collect();
        found.sort();
        let mut expected: Vec<_> = scenario.a_priori.iter().map(|k| k.identity.clone()).collect();
        expected.sort();
        assert_eq!(found, expected);
    }

    #[test]
    fn boat_is_assigned_to_village_port() {
        let (store, _) = loaded();
        let p = Pattern::new()
            .isa("b", "rigid_hulled_inflatable_boat")
            .has_eq("b", "identity_name", "rigid_hulled_inflatable_boat1")
            .isa("l", "assigned_location")
            .role("l", "located", "b")
            .role("l", "location", "a")
            .isa("a", "operational_area")
            .has_eq("a", "area_name", "village_port");
        assert_eq!(store.match_pattern(&p).unwrap().len(), 1);
    }

    #[test]
    fn grenade_launcher_has_class_document_only() {
        let (store, _) = loaded();
        let docs = store.match_pattern(
            &Pattern::new()
                .isa("d", "general_class_document")
                .has_eq("d", "class_name", "mk19_grenade_launcher"),
        );
        assert_eq!(docs.unwrap().len(), 1);
        assert!(store.things_of_type("mk19_grenade_launcher").is_empty());
    }

    #[test]
    fn no_known_objects_loads_context_only() {
        let mut scenario = bundled::scenario("mission_fig6").unwrap();
        scenario.a_priori.clear();
        let mut store = mission_store();
        let n = load_a_priori(&mut store, &scenario).unwrap();
        assert_eq!(n, store.len());
        assert!(store.things_of_type("artifact_model").is_empty());
        assert_eq!(store.things_of_type("mission_context").len(), 1);
    }

    #[test]
    fn second_load_is_refused() {
        let (mut store, scenario) = loaded();
        assert_eq!(load_a_priori(&mut store, &scenario), Err(LoadError::NotEmpty));
    }

    #[test]
    fn loaded_store_conforms() {
        let (store, _) = loaded();
        assert!(store.validate_all().is_empty());
    }
}

use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::{Store, ThingId, ThingInstance, Value};
use crate::ontology::{SchemaDef, TypeKind, ValueKind};

/// Predicate on one attribute of a thing variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AttrPred {
    Eq(Value),
    /// Closed interval; doubles and datetimes only.
    Range(Value, Value),
    /// Binds the attribute value to a value variable.
    Bind(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Clause {
    /// The thing bound to `var` is of `type_name` or a subtype.
    Isa { var: String, type_name: String },
    Has {
        var: String,
        attribute: String,
        pred: AttrPred,
    },
    /// `player` fills `role` of the relation bound to `relation`.
    Role {
        relation: String,
        role: String,
        player: String,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pattern {
    pub clauses: Vec<Clause>,
}

impl Pattern {
    pub fn new() -> Self {
        Pattern::default()
    }

    pub fn isa(mut self, var: &str, type_name: &str) -> Self {
        self.clauses.push(Clause::Isa {
            var: var.into(),
            type_name: type_name.into(),
        });
        self
    }

    pub fn has(mut self, var: &str, attribute: &str, pred: AttrPred) -> Self {
        self.clauses.push(Clause::Has {
            var: var.into(),
            attribute: attribute.into(),
            pred,
        });
        self
    }

    pub fn has_eq(self, var: &str, attribute: &str, value: impl Into<Value>) -> Self {
        self.has(var, attribute, AttrPred::Eq(value.into()))
    }

    pub fn bind(self, var: &str, attribute: &str, value_var: &str) -> Self {
        self.has(var, attribute, AttrPred::Bind(value_var.into()))
    }

    pub fn role(mut self, relation: &str, role: &str, player: &str) -> Self {
        self.clauses.push(Clause::Role {
            relation: relation.into(),
            role: role.into(),
            player: player.into(),
        });
        self
    }

    /// Thing variables and value variables, each sorted by name.
    pub fn variables(&self) -> (Vec<String>, Vec<String>) {
        let mut things = BTreeSet::new();
        let mut values = BTreeSet::new();
        for c in &self.clauses {
            match c {
                Clause::Isa { var, .. } => {
                    things.insert(var.clone());
                }
                Clause::Has { var, pred, .. } => {
                    things.insert(var.clone());
                    if let AttrPred::Bind(v) = pred {
                        values.insert(v.clone());
                    }
                }
                Clause::Role {
                    relation, player, ..
                } => {
                    things.insert(relation.clone());
                    things.insert(player.clone());
                }
            }
        }
        (things.into_iter().collect(), values.into_iter().collect())
    }

    /// Checks the pattern against a schema.
    pub fn check(&self, schema: &SchemaDef) -> Result<(), PatternError> {
        let (things, values) = self.variables();
        if let Some(v) = things.iter().find(|t| values.contains(t)) {
            return Err(PatternError::VariableKindConflict(v.clone()));
        }
        let mut relation_types: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for c in &self.clauses {
            match c {
                Clause::Isa { var, type_name } => match schema.kind_of(type_name) {
                    None => return Err(PatternError::UnknownType(type_name.clone())),
                    Some(TypeKind::Attribute) => {
                        return Err(PatternError::NotAThingType(type_name.clone()))
                    }
                    Some(_) => relation_types.entry(var).or_default().push(type_name),
                },
                Clause::Has {
                    attribute, pred, ..
                } => {
                    let kind = schema
                        .value_kind(attribute)
                        .ok_or_else(|| PatternError::UnknownAttribute(attribute.clone()))?;
                    match pred {
                        AttrPred::Eq(v) => expect_kind(attribute, kind, v)?,
                        AttrPred::Range(lo, hi) => {
                            if !matches!(kind, ValueKind::Double | ValueKind::Datetime) {
                                return Err(PatternError::RangeNotOrdered(attribute.clone()));
                            }
                            expect_kind(attribute, kind, lo)?;
                            expect_kind(attribute, kind, hi)?;
                        }
                        AttrPred::Bind(_) => {}
                    }
                }
                Clause::Role { .. } => {}
            }
        }
        for c in &self.clauses {
            if let Clause::Role { relation, role, .. } = c {
                let declared = match relation_types.get(relation.as_str()) {
                    Some(types) => types.iter().any(|t| schema.role(t, role).is_some()),
                    None => schema.any_relation_has_role(role),
                };
                if !declared {
                    return Err(PatternError::UnknownRole(role.clone()));
                }
            }
        }
        Ok(())
    }
}

fn expect_kind(attribute: &str, expected: ValueKind, v: &Value) -> Result<(), PatternError> {
    if v.kind() == expected {
        Ok(())
    } else {
        Err(PatternError::ValueKindMismatch {
            attribute: attribute.to_string(),
            expected,
            found: v.kind(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error("unknown type `{0}` in pattern")]
    UnknownType(String),
    #[error("`{0}` is an attribute type and cannot bind a thing")]
    NotAThingType(String),
    #[error("unknown attribute `{0}` in pattern")]
    UnknownAttribute(String),
    #[error("no relation type declares role `{0}`")]
    UnknownRole(String),
    #[error("attribute `{attribute}` expects {expected}, pattern gives {found}")]
    ValueKindMismatch {
        attribute: String,
        expected: ValueKind,
        found: ValueKind,
    },
    #[error("range predicate on non-numeric attribute `{0}`")]
    RangeNotOrdered(String),
    #[error("variable `{0}` used both as a thing and as a value")]
    VariableKindConflict(String),
}

/// What a variable is bound to.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Bound {
    Thing(ThingId),
    Value(Value),
}

/// One solution: variable name to bound thing or value.
pub type Binding = BTreeMap<String, Bound>;

struct Plan<'a> {
    store: &'a Store,
    clauses: &'a [Clause],
    vars: Vec<String>,
    /// Indexed candidates per thing variable; `None` means every thing.
    statics: Vec<Option<BTreeSet<ThingId>>>,
    isa_sets: Vec<HashSet<&'a str>>,
}

pub(super) fn run(store: &Store, pattern: &Pattern) -> Result<Vec<Binding>, PatternError> {
    pattern.check(store.schema())?;
    let (vars, _) = pattern.variables();
    let schema = store.schema();

    let mut isa_sets = Vec::new();
    let mut statics: Vec<Option<BTreeSet<ThingId>>> = Vec::new();
    for var in &vars {
        let mut cand: Option<BTreeSet<ThingId>> = None;
        let mut narrow = |set: BTreeSet<ThingId>| {
            cand = Some(match cand.take() {
                None => set,
                Some(c) => c.intersection(&set).copied().collect(),
            });
        };
        for c in &pattern.clauses {
            match c {
                Clause::Isa { var: v, type_name } if v == var => {
                    let mut set = BTreeSet::new();
                    for t in schema.descendants(type_name) {
                        if let Some(ids) = store.ids_of_exact_type(t) {
                            set.extend(ids.iter().copied());
                        }
                    }
                    narrow(set);
                }
                Clause::Has {
                    var: v,
                    attribute,
                    pred,
                } if v == var => match pred {
                    AttrPred::Eq(value) => narrow(store.ids_with_value(attribute, value)),
                    AttrPred::Range(lo, hi) => narrow(store.ids_in_range(attribute, lo, hi)),
                    AttrPred::Bind(_) => {}
                },
                _ => {}
            }
        }
        statics.push(cand);
    }
    for c in &pattern.clauses {
        if let Clause::Isa { type_name, .. } = c {
            isa_sets.push(schema.descendants(type_name).into_iter().collect());
        } else {
            isa_sets.push(HashSet::new());
        }
    }

    let plan = Plan {
        store,
        clauses: &pattern.clauses,
        vars,
        statics,
        isa_sets,
    };
    let mut out = Vec::new();
    let mut things: BTreeMap<&str, ThingId> = BTreeMap::new();
    let mut values: BTreeMap<&str, Value> = BTreeMap::new();
    plan.extend(&mut things, &mut values, &mut out);
    out.sort();
    Ok(out)
}

impl<'a> Plan<'a> {
    fn extend(
        &'a self,
        things: &mut BTreeMap<&'a str, ThingId>,
        values: &mut BTreeMap<&'a str, Value>,
        out: &mut Vec<Binding>,
    ) {
        let Some((idx, candidates)) = self.next_var(things) else {
            let mut b: Binding = things
                .iter()
                .map(|(k, v)| (k.to_string(), Bound::Thing(*v)))
                .collect();
            b.extend(
                values
                    .iter()
                    .map(|(k, v)| (k.to_string(), Bound::Value(v.clone()))),
            );
            out.push(b);
            return;
        };
        let var = self.vars[idx].as_str();
        for id in candidates {
            things.insert(var, id);
            let mut newly_bound = Vec::new();
            if self.consistent(var, things, values, &mut newly_bound) {
                self.extend(things, values, out);
            }
            for v in newly_bound {
                values.remove(v);
            }
            things.remove(var);
        }
    }

    /// Picks the next variable to assign and its candidate ids (ascending).
    fn next_var(&self, things: &BTreeMap<&str, ThingId>) -> Option<(usize, Vec<ThingId>)> {
        let unassigned: Vec<usize> = (0..self.vars.len())
            .filter(|&i| !things.contains_key(self.vars[i].as_str()))
            .collect();
        if unassigned.is_empty() {
            return None;
        }
        let mut best: Option<(usize, BTreeSet<ThingId>)> = None;
        for &i in &unassigned {
            if let Some(dynamic) = self.linked_candidates(&self.vars[i], things) {
                let set = match &self.statics[i] {
                    Some(s) => dynamic.intersection(s).copied().collect(),
                    None => dynamic,
                };
                if best.as_ref().is_none_or(|(_, b)| set.len() < b.len()) {
                    best = Some((i, set));
                }
            }
        }
        if let Some((i, set)) = best {
            return Some((i, set.into_iter().collect()));
        }
        let i = *unassigned
            .iter()
            .min_by_key(|&&i| {
                self.statics[i]
                    .as_ref()
                    .map(BTreeSet::len)
                    .unwrap_or(usize::MAX)
            })
            .expect("non-empty");
        let cands = match &self.statics[i] {
            Some(s) => s.iter().copied().collect(),
            None => self.store.things().map(|t| t.id).collect(),
        };
        Some((i, cands))
    }

    /// Candidates implied by role clauses connecting `var` to assigned variables.
    fn linked_candidates(
        &self,
        var: &str,
        things: &BTreeMap<&str, ThingId>,
    ) -> Option<BTreeSet<ThingId>> {
        let mut acc: Option<BTreeSet<ThingId>> = None;
        for c in self.clauses {
            let Clause::Role {
                relation,
                role,
                player,
            } = c
            else {
                continue;
            };
            let set: BTreeSet<ThingId> = if relation == var && player != var {
                match things.get(player.as_str()) {
                    Some(&p) => self
                        .store
                        .plays_index(p)
                        .map(|s| {
                            s.iter()
                                .filter(|(r, _)| r == role)
                                .map(|(_, rel)| *rel)
                                .collect()
                        })
                        .unwrap_or_default(),
                    None => continue,
                }
            } else if player == var && relation != var {
                match things.get(relation.as_str()) {
                    Some(&r) => self
                        .store
                        .get(r)
                        .map(|t| t.players(role).iter().copied().collect())
                        .unwrap_or_default(),
                    None => continue,
                }
            } else {
                continue;
            };
            acc = Some(match acc {
                None => set,
                Some(a) => a.intersection(&set).copied().collect(),
            });
        }
        acc
    }

    /// Checks every clause that mentions `var` and is fully assigned.
    fn consistent(
        &'a self,
        var: &str,
        things: &BTreeMap<&'a str, ThingId>,
        values: &mut BTreeMap<&'a str, Value>,
        newly_bound: &mut Vec<&'a str>,
    ) -> bool {
        let thing = |v: &str| -> Option<&ThingInstance> {
            things.get(v).and_then(|id| self.store.get(*id))
        };
        for (ci, c) in self.clauses.iter().enumerate() {
            match c {
                Clause::Isa { var: v, .. } if v == var => {
                    let t = thing(v).expect("assigned");
                    if !self.isa_sets[ci].contains(t.type_name.as_str()) {
                        return false;
                    }
                }
                Clause::Has {
                    var: v,
                    attribute,
                    pred,
                } if v == var => {
                    let t = thing(v).expect("assigned");
                    let Some(actual) = t.attr(attribute) else {
                        return false;
                    };
                    match pred {
                        AttrPred::Eq(expected) => {
                            if actual != expected {
                                return false;
                            }
                        }
                        AttrPred::Range(lo, hi) => {
                            if actual.kind() != lo.kind() || actual < lo || actual > hi {
                                return false;
                            }
                        }
                        AttrPred::Bind(value_var) => match values.get(value_var.as_str()) {
                            Some(bound) => {
                                if bound != actual {
                                    return false;
                                }
                            }
                            None => {
                                values.insert(value_var.as_str(), actual.clone());
                                newly_bound.push(value_var.as_str());
                            }
                        },
                    }
                }
                Clause::Role {
                    relation,
                    role,
                    player,
                } if relation == var || player == var => {
                    let (Some(r), Some(&p)) = (thing(relation), things.get(player.as_str()))
                    else {
                        continue;
                    };
                    if !r.players(role).contains(&p) {
                        return false;
                    }
                }
                _ => {}
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::mission_store;
    use super::super::{NewThing, PlayerRef};
    use super::*;

    #[test]
    fn empty_store_matches_nothing() {
        let s = mission_store();
        let p = Pattern::new().isa("x", "artifact_model");
        assert!(s.match_pattern(&p).unwrap().is_empty());
    }

    #[test]
    fn empty_pattern_has_one_empty_solution() {
        let s = mission_store();
        assert_eq!(s.match_pattern(&Pattern::new()).unwrap(), vec![Binding::new()]);
    }

    #[test]
    fn match_by_attribute_and_join_through_relation() {
        let mut s = mission_store();
        let ids = s
            .insert_batch(vec![
                NewThing::new("processed_image").with("event_id", "e1"),
                NewThing::new("processed_image_object")
                    .with("obj_name", "boat")
                    .with("pos_x", 0.79),
                NewThing::new("processed_image_object")
                    .with("obj_name", "army_maritime")
                    .with("pos_x", 0.85),
                NewThing::new("image_part")
                    .player("whole", PlayerRef::Batch(0))
                    .player("part", PlayerRef::Batch(1)),
                NewThing::new("image_part")
                    .player("whole", PlayerRef::Batch(0))
                    .player("part", PlayerRef::Batch(2)),
            ])
            .unwrap();

        let boat = Pattern::new()
            .isa("x", "processed_image_object")
            .has_eq("x", "obj_name", "boat")
            .bind("x", "pos_x", "px");
        let rows = s.match_pattern(&boat).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["x"], Bound::Thing(ids[1]));
        assert_eq!(rows[0]["px"], Bound::Value(Value::Double(0.79)));

        let parts = Pattern::new()
            .isa("img", "processed_image")
            .has_eq("img", "event_id", "e1")
            .isa("r", "part_of")
            .role("r", "whole", "img")
            .role("r", "part", "o")
            .bind("o", "obj_name", "n");
        let rows = s.match_pattern(&parts).unwrap();
        let names: Vec<_> = rows.iter().map(|b| b["n"].clone()).collect();
        assert_eq!(
            names,
            vec![
                Bound::Value("army_maritime".into()),
                Bound::Value("boat".into())
            ]
        );

        let ranged = Pattern::new().has(
            "x",
            "pos_x",
            AttrPred::Range(Value::Double(0.8), Value::Double(0.9)),
        );
        let rows = s.match_pattern(&ranged).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["x"], Bound::Thing(ids[2]));
    }

    #[test]
    fn shared_value_variable_joins() {
        let mut s = mission_store();
        s.insert_batch(vec![
            NewThing::new("processed_image").with("event_id", "e1"),
            NewThing::new("processed_image_object").with("event_id", "e1"),
            NewThing::new("processed_image_object").with("event_id", "e2"),
        ])
        .unwrap();
        let p = Pattern::new()
            .isa("img", "processed_image")
            .bind("img", "event_id", "e")
            .isa("o", "processed_image_object")
            .bind("o", "event_id", "e");
        assert_eq!(s.match_pattern(&p).unwrap().len(), 1);
    }

    #[test]
    fn pattern_errors() {
        let s = mission_store();
        let cases = [
            (Pattern::new().isa("x", "tank"), "unknown type"),
            (Pattern::new().isa("x", "pos_x"), "attribute type"),
            (Pattern::new().has_eq("x", "colour", "red"), "unknown attribute"),
            (Pattern::new().has_eq("x", "pos_x", "far"), "expects"),
            (
                Pattern::new().has("x", "obj_name", AttrPred::Range("a".into(), "b".into())),
                "range",
            ),
            (Pattern::new().role("r", "driver", "x"), "role"),
            (
                Pattern::new().isa("r", "image_part").role("r", "bearer", "x"),
                "role",
            ),
            (Pattern::new().bind("x", "obj_name", "x"), "both"),
        ];
        for (p, needle) in cases {
            let err = s.match_pattern(&p).unwrap_err().to_string();
            assert!(err.contains(needle), "{err}");
        }
    }
}

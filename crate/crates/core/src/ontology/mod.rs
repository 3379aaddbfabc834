//! Layered type system for the mission knowledge graph.
//!
//! Every type sits in a forest under three built-in roots (`entity`, `relation`,
//! `attribute`). Entity and relation types carry a layer tag: `upper` for the
//! domain-independent top categories, `mid` for the shared mission-relevant layer and
//! `domain` for mission-specific types. Relation types declare roles together with the
//! types allowed to play them; subtyping makes any descendant of an allowed player
//! acceptable.

mod parser;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use sha2::{Digest, Sha256};

pub use parser::parse_schema;

pub const ENTITY_ROOT: &str = "entity";
pub const RELATION_ROOT: &str = "relation";
pub const ATTRIBUTE_ROOT: &str = "attribute";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TypeKind {
    Entity,
    Relation,
    Attribute,
}

impl TypeKind {
    pub fn root(self) -> &'static str {
        match self {
            TypeKind::Entity => ENTITY_ROOT,
            TypeKind::Relation => RELATION_ROOT,
            TypeKind::Attribute => ATTRIBUTE_ROOT,
        }
    }

    pub fn keyword(self) -> &'static str {
        self.root()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Upper,
    Mid,
    Domain,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Upper => "upper",
            Layer::Mid => "mid",
            Layer::Domain => "domain",
        }
    }

    pub fn parse(s: &str) -> Option<Layer> {
        match s {
            "upper" => Some(Layer::Upper),
            "mid" => Some(Layer::Mid),
            "domain" => Some(Layer::Domain),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ValueKind {
    String,
    Double,
    Datetime,
    Boolean,
}

impl ValueKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueKind::String => "string",
            ValueKind::Double => "double",
            ValueKind::Datetime => "datetime",
            ValueKind::Boolean => "boolean",
        }
    }

    pub fn parse(s: &str) -> Option<ValueKind> {
        match s {
            "string" => Some(ValueKind::String),
            "double" => Some(ValueKind::Double),
            "datetime" => Some(ValueKind::Datetime),
            "boolean" => Some(ValueKind::Boolean),
            _ => None,
        }
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An entity type.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDecl {
    pub name: String,
    pub parent: String,
    pub layer: Layer,
    pub owns: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoleDecl {
    pub name: String,
    pub players: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub parent: String,
    pub layer: Layer,
    pub roles: Vec<RoleDecl>,
    pub owns: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AttributeDecl {
    pub name: String,
    pub value_kind: ValueKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OntologyError {
    #[error("{line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("type `{name}` declared more than once (line {line})")]
    DuplicateType { name: String, line: usize },
    #[error("type `{name}` has unknown parent `{parent}`")]
    UnknownParent { name: String, parent: String },
    #[error("subtype cycle through `{0}`")]
    Cycle(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
}

/// The typed ontology. Built-in roots are implicit and never stored in the maps.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SchemaDef {
    pub entity_types: BTreeMap<String, TypeDecl>,
    pub relation_types: BTreeMap<String, RelationDecl>,
    pub attribute_types: BTreeMap<String, AttributeDecl>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ViolationKind {
    DuplicateName,
    ReservedName,
    UnknownParent(String),
    ParentKindMismatch(String),
    Cycle,
    MissingRole,
    UnknownPlayer { role: String, player: String },
    UnknownAttribute(String),
    OrphanDomain,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub type_name: String,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.type_name;
        match &self.kind {
            ViolationKind::DuplicateName => write!(f, "{t}: name used by more than one type"),
            ViolationKind::ReservedName => write!(f, "{t}: redeclares a built-in root"),
            ViolationKind::UnknownParent(p) => write!(f, "{t}: unknown parent `{p}`"),
            ViolationKind::ParentKindMismatch(p) => {
                write!(f, "{t}: parent `{p}` is a different kind of type")
            }
            ViolationKind::Cycle => write!(f, "{t}: part of a subtype cycle"),
            ViolationKind::MissingRole => write!(f, "{t}: relation declares no roles"),
            ViolationKind::UnknownPlayer { role, player } => {
                write!(f, "{t}: role `{role}` allows unknown player type `{player}`")
            }
            ViolationKind::UnknownAttribute(a) => write!(f, "{t}: owns unknown attribute `{a}`"),
            ViolationKind::OrphanDomain => {
                write!(f, "{t}: domain type without an upper or mid-layer ancestor")
            }
        }
    }
}

impl SchemaDef {
    pub fn new() -> Self {
        SchemaDef::default()
    }

    pub fn is_root(name: &str) -> bool {
        matches!(name, ENTITY_ROOT | RELATION_ROOT | ATTRIBUTE_ROOT)
    }

    pub fn kind_of(&self, name: &str) -> Option<TypeKind> {
        match name {
            ENTITY_ROOT => Some(TypeKind::Entity),
            RELATION_ROOT => Some(TypeKind::Relation),
            ATTRIBUTE_ROOT => Some(TypeKind::Attribute),
            _ if self.entity_types.contains_key(name) => Some(TypeKind::Entity),
            _ if self.relation_types.contains_key(name) => Some(TypeKind::Relation),
            _ if self.attribute_types.contains_key(name) => Some(TypeKind::Attribute),
            _ => None,
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.kind_of(name).is_some()
    }

    /// Direct parent; `None` for the roots and for unknown names.
    pub fn parent_of(&self, name: &str) -> Option<&str> {
        if let Some(t) = self.entity_types.get(name) {
            Some(&t.parent)
        } else if let Some(r) = self.relation_types.get(name) {
            Some(&r.parent)
        } else if self.attribute_types.contains_key(name) {
            Some(ATTRIBUTE_ROOT)
        } else {
            None
        }
    }

    pub fn layer_of(&self, name: &str) -> Option<Layer> {
        if Self::is_root(name) {
            Some(Layer::Upper)
        } else if let Some(t) = self.entity_types.get(name) {
            Some(t.layer)
        } else {
            self.relation_types.get(name).map(|r| r.layer)
        }
    }

    /// `name` followed by each ancestor up to its root. Stops early on a cycle or a
    /// dangling parent.
    pub fn ancestors<'a>(&'a self, name: &'a str) -> Vec<&'a str> {
        let mut chain = vec![name];
        let mut current = name;
        while let Some(p) = self.parent_of(current) {
            if chain.contains(&p) {
                break;
            }
            chain.push(p);
            current = p;
        }
        chain
    }

    /// Reflexive, transitive subtype test.
    pub fn is_subtype(&self, child: &str, parent: &str) -> Result<bool, OntologyError> {
        for n in [child, parent] {
            if !self.contains(n) {
                return Err(OntologyError::UnknownType(n.to_string()));
            }
        }
        Ok(self.ancestors(child).contains(&parent))
    }

    /// Every type that is a subtype of `name`, including itself, in name order.
    pub fn descendants(&self, name: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self
            .entity_types
            .keys()
            .chain(self.relation_types.keys())
            .chain(self.attribute_types.keys())
            .map(String::as_str)
            .filter(|t| self.ancestors(t).contains(&name))
            .collect();
        if let Some(root) = [ENTITY_ROOT, RELATION_ROOT, ATTRIBUTE_ROOT].into_iter().find(|r| *r == name) {
            out.push(root);
        }
        out.sort_unstable();
        out
    }

    pub fn value_kind(&self, attribute: &str) -> Option<ValueKind> {
        self.attribute_types.get(attribute).map(|a| a.value_kind)
    }

    fn own_attributes(&self, name: &str) -> Option<&BTreeSet<String>> {
        if let Some(t) = self.entity_types.get(name) {
            Some(&t.owns)
        } else {
            self.relation_types.get(name).map(|r| &r.owns)
        }
    }

    /// True when `type_name` or one of its ancestors owns `attribute`.
    pub fn owns_attribute(&self, type_name: &str, attribute: &str) -> bool {
        self.ancestors(type_name)
            .iter()
            .filter_map(|t| self.own_attributes(t))
            .any(|owns| owns.contains(attribute))
    }

    /// Effective roles of a relation: its own, then inherited ones it does not redeclare.
    pub fn roles_of(&self, relation: &str) -> Vec<&RoleDecl> {
        let mut roles: Vec<&RoleDecl> = Vec::new();
        for t in self.ancestors(relation) {
            if let Some(r) = self.relation_types.get(t) {
                for role in &r.roles {
                    if !roles.iter().any(|seen| seen.name == role.name) {
                        roles.push(role);
                    }
                }
            }
        }
        roles
    }

    pub fn role(&self, relation: &str, role: &str) -> Option<&RoleDecl> {
        self.roles_of(relation).into_iter().find(|r| r.name == role)
    }

    /// True when some relation type (or its inheritance) declares `role`.
    pub fn any_relation_has_role(&self, role: &str) -> bool {
        self.relation_types
            .values()
            .any(|r| r.roles.iter().any(|d| d.name == role))
    }

    /// Whether an instance of `player_type` may fill `role` of `relation`.
    pub fn allows_player(&self, relation: &str, role: &str, player_type: &str) -> bool {
        match self.role(relation, role) {
            Some(decl) => {
                let ancestors = self.ancestors(player_type);
                decl.players.iter().any(|p| ancestors.contains(&p.as_str()))
            }
            None => false,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_schema(self)
    }

    /// Canonical text form, accepted by [`parse_schema`].
    pub fn print(&self) -> String {
        let mut out = String::new();
        for a in self.attribute_types.values() {
            out.push_str(&format!("attribute {} value {};\n", a.name, a.value_kind));
        }
        for e in self.entity_types.values() {
            out.push_str(&format!("entity {} sub {}", e.name, e.parent));
            for o in &e.owns {
                out.push_str(&format!(", owns {o}"));
            }
            out.push_str(&format!(" layer({});\n", e.layer.as_str()));
        }
        for r in self.relation_types.values() {
            out.push_str(&format!("relation {} sub {}", r.name, r.parent));
            for role in &r.roles {
                for p in &role.players {
                    out.push_str(&format!(", relates {}:{}", role.name, p));
                }
            }
            for o in &r.owns {
                out.push_str(&format!(", owns {o}"));
            }
            out.push_str(&format!(" layer({});\n", r.layer.as_str()));
        }
        out
    }

    /// SHA-256 of the canonical text form.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.print().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }
}

/// Checks every schema invariant and returns one entry per problem found.
pub fn validate_schema(schema: &SchemaDef) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |type_name: &str, kind: ViolationKind| {
        out.push(Violation {
            type_name: type_name.to_string(),
            kind,
        })
    };

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for name in schema
        .entity_types
        .keys()
        .chain(schema.relation_types.keys())
        .chain(schema.attribute_types.keys())
    {
        *seen.entry(name).or_default() += 1;
        if SchemaDef::is_root(name) {
            push(name, ViolationKind::ReservedName);
        }
    }
    for (name, count) in &seen {
        if *count > 1 {
            push(name, ViolationKind::DuplicateName);
        }
    }

    let parents = schema
        .entity_types
        .values()
        .map(|e| (e.name.as_str(), e.parent.as_str(), TypeKind::Entity))
        .chain(
            schema
                .relation_types
                .values()
                .map(|r| (r.name.as_str(), r.parent.as_str(), TypeKind::Relation)),
        );
    for (name, parent, kind) in parents {
        match schema.kind_of(parent) {
            None => push(name, ViolationKind::UnknownParent(parent.to_string())),
            Some(k) if k != kind => {
                push(name, ViolationKind::ParentKindMismatch(parent.to_string()))
            }
            Some(_) => {}
        }
        if on_cycle(schema, name) {
            push(name, ViolationKind::Cycle);
        }
    }

    for r in schema.relation_types.values() {
        if schema.roles_of(&r.name).is_empty() {
            push(&r.name, ViolationKind::MissingRole);
        }
        for role in &r.roles {
            for p in &role.players {
                if !matches!(
                    schema.kind_of(p),
                    Some(TypeKind::Entity) | Some(TypeKind::Relation)
                ) {
                    push(
                        &r.name,
                        ViolationKind::UnknownPlayer {
                            role: role.name.clone(),
                            player: p.clone(),
                        },
                    );
                }
            }
        }
    }

    let owners = schema
        .entity_types
        .values()
        .map(|e| (&e.name, &e.owns))
        .chain(schema.relation_types.values().map(|r| (&r.name, &r.owns)));
    for (name, owns) in owners {
        for a in owns {
            if !schema.attribute_types.contains_key(a) {
                push(name, ViolationKind::UnknownAttribute(a.clone()));
            }
        }
    }

    let layered = schema
        .entity_types
        .values()
        .map(|e| (&e.name, e.layer))
        .chain(schema.relation_types.values().map(|r| (&r.name, r.layer)));
    for (name, layer) in layered {
        if layer == Layer::Domain {
            let anchored = schema.ancestors(name).iter().skip(1).any(|a| {
                !SchemaDef::is_root(a)
                    && matches!(schema.layer_of(a), Some(Layer::Upper) | Some(Layer::Mid))
            });
            if !anchored {
                push(name, ViolationKind::OrphanDomain);
            }
        }
    }

    out.sort();
    out.dedup();
    out
}

fn on_cycle(schema: &SchemaDef, name: &str) -> bool {
    let mut current = name;
    let mut steps = 0usize;
    let limit = schema.entity_types.len() + schema.relation_types.len() + 1;
    while let Some(p) = schema.parent_of(current) {
        if p == name {
            return true;
        }
        steps += 1;
        if steps > limit {
            return false;
        }
        current = p;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mini() -> SchemaDef {
        parse_schema(
            "attribute name value string;\n\
             entity artifact sub entity, owns name layer(upper);\n\
             entity artifact_model sub artifact layer(mid);\n\
             entity armoured_humvee sub artifact_model layer(domain);\n\
             relation describes sub relation, relates document:artifact, relates described:artifact layer(mid);",
        )
        .unwrap()
    }

    #[test]
    fn subtype_is_reflexive_and_transitive() {
        let s = mini();
        assert!(s.is_subtype("armoured_humvee", "armoured_humvee").unwrap());
        assert!(s.is_subtype("armoured_humvee", "artifact_model").unwrap());
        assert!(s.is_subtype("armoured_humvee", "entity").unwrap());
        assert!(!s.is_subtype("artifact_model", "armoured_humvee").unwrap());
        assert!(!s.is_subtype("entity", "attribute").unwrap());
    }

    #[test]
    fn subtype_of_unknown_type_errors() {
        let s = mini();
        assert_eq!(
            s.is_subtype("tank", "entity"),
            Err(OntologyError::UnknownType("tank".into()))
        );
    }

    #[test]
    fn inherited_ownership() {
        let s = mini();
        assert!(s.owns_attribute("armoured_humvee", "name"));
        assert!(!s.owns_attribute("describes", "name"));
    }

    #[test]
    fn relation_without_roles_is_a_violation() {
        let mut s = mini();
        s.relation_types.insert(
            "empty_rel".into(),
            RelationDecl {
                name: "empty_rel".into(),
                parent: RELATION_ROOT.into(),
                layer: Layer::Mid,
                roles: vec![],
                owns: BTreeSet::new(),
            },
        );
        assert_eq!(
            validate_schema(&s),
            vec![Violation {
                type_name: "empty_rel".into(),
                kind: ViolationKind::MissingRole
            }]
        );
    }

    #[test]
    fn orphan_domain_type_is_a_violation() {
        let s = parse_schema("entity stray sub entity layer(domain);").unwrap();
        assert_eq!(
            validate_schema(&s),
            vec![Violation {
                type_name: "stray".into(),
                kind: ViolationKind::OrphanDomain
            }]
        );
    }

    #[test]
    fn programmatic_cycle_and_duplicates_are_reported() {
        let mut s = SchemaDef::new();
        for (n, p) in [("x", "y"), ("y", "x")] {
            s.entity_types.insert(
                n.into(),
                TypeDecl {
                    name: n.into(),
                    parent: p.into(),
                    layer: Layer::Mid,
                    owns: BTreeSet::new(),
                },
            );
        }
        s.attribute_types.insert(
            "x".into(),
            AttributeDecl {
                name: "x".into(),
                value_kind: ValueKind::String,
            },
        );
        let v = validate_schema(&s);
        assert!(v.contains(&Violation {
            type_name: "x".into(),
            kind: ViolationKind::Cycle
        }));
        assert!(v.contains(&Violation {
            type_name: "x".into(),
            kind: ViolationKind::DuplicateName
        }));
    }

    #[test]
    fn unknown_player_and_attribute() {
        let mut s = mini();
        s.relation_types.get_mut("describes").unwrap().roles[0]
            .players
            .push("ghost".into());
        s.entity_types
            .get_mut("artifact")
            .unwrap()
            .owns
            .insert("colour".into());
        let kinds: Vec<_> = validate_schema(&s).into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&ViolationKind::UnknownAttribute("colour".into())));
        assert!(kinds.contains(&ViolationKind::UnknownPlayer {
            role: "document".into(),
            player: "ghost".into()
        }));
    }

    #[test]
    fn narrowed_roles_override_inherited_ones() {
        let s = parse_schema(
            "entity thing sub entity layer(upper);\n\
             entity doc sub thing layer(mid);\n\
             relation part_of sub relation, relates whole:thing, relates part:thing layer(mid);\n\
             relation doc_part sub part_of, relates whole:doc layer(domain);",
        )
        .unwrap();
        let roles: Vec<_> = s.roles_of("doc_part").iter().map(|r| r.name.clone()).collect();
        assert_eq!(roles, vec!["whole", "part"]);
        assert!(s.allows_player("doc_part", "whole", "doc"));
        assert!(!s.allows_player("doc_part", "whole", "thing"));
        assert!(s.allows_player("doc_part", "part", "doc"));
    }
}

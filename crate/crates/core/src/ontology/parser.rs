use std::collections::{BTreeMap, BTreeSet};

use super::{
    AttributeDecl, Layer, OntologyError, RelationDecl, RoleDecl, SchemaDef, TypeDecl, ValueKind,
};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Comma,
    Semi,
    Colon,
    LParen,
    RParen,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, OntologyError> {
    let mut out = Vec::new();
    for (line_idx, line) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let mut chars = line.char_indices().peekable();
        while let Some(&(i, c)) = chars.peek() {
            let column = line[..i].chars().count() + 1;
            let punct = match c {
                ',' => Some(Tok::Comma),
                ';' => Some(Tok::Semi),
                ':' => Some(Tok::Colon),
                '(' => Some(Tok::LParen),
                ')' => Some(Tok::RParen),
                _ => None,
            };
            if let Some(tok) = punct {
                out.push(Spanned {
                    tok,
                    line: line_no,
                    column,
                });
                chars.next();
            } else if c == '#' {
                break;
            } else if c.is_whitespace() {
                chars.next();
            } else if c.is_ascii_alphabetic() || c == '_' {
                let mut ident = String::new();
                while let Some(&(_, c)) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' || c == '-' {
                        ident.push(c);
                        chars.next();
                    } else {
                        break;
                    }
                }
                out.push(Spanned {
                    tok: Tok::Ident(ident),
                    line: line_no,
                    column,
                });
            } else {
                return Err(OntologyError::Syntax {
                    line: line_no,
                    column,
                    message: format!("unexpected character `{c}`"),
                });
            }
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    end: (usize, usize),
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks
            .get(self.pos)
            .map(|s| (s.line, s.column))
            .unwrap_or(self.end)
    }

    fn error(&self, message: impl Into<String>) -> OntologyError {
        let (line, column) = self.here();
        OntologyError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, OntologyError> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error(format!("expected {what}"))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), OntologyError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error(format!("expected `{kw}`"))),
        }
    }

    fn punct(&mut self, tok: Tok, shown: &str) -> Result<(), OntologyError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{shown}`")))
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }
}

enum Decl {
    Entity(TypeDecl),
    Relation(RelationDecl),
    Attribute(AttributeDecl),
}

impl Decl {
    fn name(&self) -> &str {
        match self {
            Decl::Entity(d) => &d.name,
            Decl::Relation(d) => &d.name,
            Decl::Attribute(d) => &d.name,
        }
    }
}

/// Parses the schema declaration language.
///
/// ```text
/// entity <name> sub <parent> [, owns <attr> ...] [layer(upper|mid|domain)] ;
/// relation <name> sub <parent>, relates <role>:<player> [, ...] [, owns <attr> ...] [layer(..)] ;
/// attribute <name> value <string|double|datetime|boolean> ;
/// ```
///
/// A missing layer annotation means `domain`. Forward references are allowed.
pub fn parse_schema(text: &str) -> Result<SchemaDef, OntologyError> {
    let toks = tokenize(text)?;
    let lines = text.lines().count().max(1);
    let last_col = text.lines().last().map(|l| l.chars().count() + 1).unwrap_or(1);
    let mut p = Parser {
        toks,
        pos: 0,
        end: (lines, last_col),
    };

    let mut decls: Vec<(Decl, usize)> = Vec::new();
    while p.peek().is_some() {
        let line = p.here().0;
        let kind = p.ident("`entity`, `relation` or `attribute`")?;
        let decl = match kind.as_str() {
            "entity" | "relation" => parse_thing_decl(&mut p, kind == "relation")?,
            "attribute" => {
                let name = p.ident("attribute name")?;
                p.keyword("value")?;
                let vk = p.ident("value kind")?;
                let value_kind = ValueKind::parse(&vk).ok_or_else(|| {
                    p.pos -= 1;
                    p.error(format!("unknown value kind `{vk}`"))
                })?;
                Decl::Attribute(AttributeDecl { name, value_kind })
            }
            other => {
                p.pos -= 1;
                return Err(p.error(format!(
                    "expected `entity`, `relation` or `attribute`, found `{other}`"
                )));
            }
        };
        p.punct(Tok::Semi, ";")?;
        decls.push((decl, line));
    }

    let mut schema = SchemaDef::new();
    let mut lines_by_name: BTreeMap<String, usize> = BTreeMap::new();
    for (decl, line) in decls {
        let name = decl.name().to_string();
        if SchemaDef::is_root(&name) || lines_by_name.contains_key(&name) {
            return Err(OntologyError::DuplicateType { name, line });
        }
        lines_by_name.insert(name.clone(), line);
        match decl {
            Decl::Entity(d) => {
                schema.entity_types.insert(name, d);
            }
            Decl::Relation(d) => {
                schema.relation_types.insert(name, d);
            }
            Decl::Attribute(d) => {
                schema.attribute_types.insert(name, d);
            }
        }
    }

    let parent_links = schema
        .entity_types
        .values()
        .map(|e| (&e.name, &e.parent))
        .chain(schema.relation_types.values().map(|r| (&r.name, &r.parent)));
    for (name, parent) in parent_links {
        if !schema.contains(parent) {
            return Err(OntologyError::UnknownParent {
                name: name.clone(),
                parent: parent.clone(),
            });
        }
    }
    for name in schema.entity_types.keys().chain(schema.relation_types.keys()) {
        if super::on_cycle(&schema, name) {
            return Err(OntologyError::Cycle(name.clone()));
        }
    }
    Ok(schema)
}

fn parse_thing_decl(p: &mut Parser, is_relation: bool) -> Result<Decl, OntologyError> {
    let name = p.ident("type name")?;
    p.keyword("sub")?;
    let parent = p.ident("parent type")?;
    let mut owns = BTreeSet::new();
    let mut roles: Vec<RoleDecl> = Vec::new();
    let mut layer = Layer::Domain;

    while p.peek() == Some(&Tok::Comma) {
        p.pos += 1;
        if p.at_keyword("owns") {
            p.pos += 1;
            owns.insert(p.ident("attribute name")?);
        } else if is_relation && p.at_keyword("relates") {
            p.pos += 1;
            let role = p.ident("role name")?;
            p.punct(Tok::Colon, ":")?;
            let player = p.ident("player type")?;
            match roles.iter_mut().find(|r| r.name == role) {
                Some(r) => {
                    if !r.players.contains(&player) {
                        r.players.push(player);
                    }
                }
                None => roles.push(RoleDecl {
                    name: role,
                    players: vec![player],
                }),
            }
        } else if p.at_keyword("layer") {
            break;
        } else if is_relation {
            return Err(p.error("expected `owns` or `relates`"));
        } else {
            return Err(p.error("expected `owns`"));
        }
    }
    if p.at_keyword("layer") {
        p.pos += 1;
        p.punct(Tok::LParen, "(")?;
        let l = p.ident("layer")?;
        layer = Layer::parse(&l).ok_or_else(|| {
            p.pos -= 1;
            p.error(format!("unknown layer `{l}`, expected upper, mid or domain"))
        })?;
        p.punct(Tok::RParen, ")")?;
    }

    Ok(if is_relation {
        Decl::Relation(RelationDecl {
            name,
            parent,
            layer,
            roles,
            owns,
        })
    } else {
        Decl::Entity(TypeDecl {
            name,
            parent,
            layer,
            owns,
        })
    })
}

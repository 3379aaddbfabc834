use std::collections::BTreeMap;
use std::fmt;

use super::{Operand, QueryAst, QueryError, Statement};
use crate::graphstore::{AttrPred, Binding, Bound, NewThing, Pattern, PatternError, PlayerRef, Store, ThingId, Value};
use crate::ontology::{SchemaDef, ValueKind};
use crate::Timestamp;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Cell {
    Thing(ThingId),
    Value(Value),
}

impl Cell {
    pub fn thing(&self) -> Option<ThingId> {
        match self {
            Cell::Thing(id) => Some(*id),
            Cell::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<&Value> {
        match self {
            Cell::Value(v) => Some(v),
            Cell::Thing(_) => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Thing(id) => write!(f, "{id}"),
            Cell::Value(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl ResultSet {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tab-separated table with a `$var` header line.
    pub fn render(&self) -> String {
        let mut out = self
            .columns
            .iter()
            .map(|c| format!("${c}"))
            .collect::<Vec<_>>()
            .join("\t");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_string).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

fn literal(schema: &SchemaDef, var: &str, attribute: &str, op: &Operand) -> Result<Value, QueryError> {
    let kind = schema.value_kind(attribute);
    let bad = |message: String| QueryError::Operand {
        var: var.to_string(),
        attribute: attribute.to_string(),
        message,
    };
    Ok(match (op, kind) {
        (Operand::Str(s), Some(ValueKind::Datetime)) => Value::Datetime(
            s.parse::<Timestamp>()
                .map_err(|e| bad(format!("not a timestamp: {e}")))?,
        ),
        (Operand::Str(s), _) => Value::String(s.clone()),
        (Operand::Num(n), _) => Value::Double(*n),
        (Operand::Bool(b), _) => Value::Boolean(*b),
        (Operand::Var(_) | Operand::Range(..), _) => return Err(bad("not a literal".into())),
    })
}

fn statement_pattern(schema: &SchemaDef, s: &Statement) -> Result<Pattern, QueryError> {
    let mut p = Pattern::new().isa(&s.var, &s.type_name);
    for (role, player) in &s.roles {
        p = p.role(&s.var, role, player);
    }
    for (attr, op) in &s.has {
        let pred = match op {
            Operand::Var(v) => AttrPred::Bind(v.clone()),
            Operand::Range(lo, hi) => AttrPred::Range(Value::Double(*lo), Value::Double(*hi)),
            lit => AttrPred::Eq(literal(schema, &s.var, attr, lit)?),
        };
        p = p.has(&s.var, attr, pred);
    }
    Ok(p)
}

/// Translates the match clause of a query into a graph-store pattern.
pub fn to_pattern(schema: &SchemaDef, ast: &QueryAst) -> Result<Pattern, QueryError> {
    let mut all = Pattern::new();
    for s in &ast.matches {
        let p = statement_pattern(schema, s)?;
        p.check(schema).map_err(|source| QueryError::Pattern {
            var: s.var.clone(),
            source,
        })?;
        all.clauses.extend(p.clauses);
    }
    all.check(schema).map_err(|source| QueryError::Pattern {
        var: match &source {
            PatternError::VariableKindConflict(v) => v.clone(),
            _ => ast.matches.first().map(|s| s.var.clone()).unwrap_or_default(),
        },
        source,
    })?;
    Ok(all)
}

fn bindings(store: &Store, ast: &QueryAst) -> Result<Vec<Binding>, QueryError> {
    if ast.matches.is_empty() {
        return Ok(vec![Binding::new()]);
    }
    let pattern = to_pattern(store.schema(), ast)?;
    store.match_pattern(&pattern).map_err(|source| QueryError::Pattern {
        var: ast.matches[0].var.clone(),
        source,
    })
}

/// Runs a read query without needing write access.
pub fn execute_read(store: &Store, ast: &QueryAst) -> Result<ResultSet, QueryError> {
    let rows = bindings(store, ast)?
        .into_iter()
        .map(|b| {
            ast.fetch
                .iter()
                .map(|v| match &b[v] {
                    Bound::Thing(id) => Cell::Thing(*id),
                    Bound::Value(val) => Cell::Value(val.clone()),
                })
                .collect()
        })
        .collect();
    Ok(ResultSet {
        columns: ast.fetch.clone(),
        rows,
    })
}

/// Executes a query. Inserts run as one batch covering every match binding, so either
/// all of them land or none do. The result lists the new ids per binding.
pub fn execute(store: &mut Store, ast: &QueryAst) -> Result<ResultSet, QueryError> {
    if ast.inserts.is_empty() {
        return execute_read(store, ast);
    }
    let found = bindings(store, ast)?;
    let n = ast.inserts.len();
    let mut batch = Vec::with_capacity(found.len() * n);
    for (bi, binding) in found.iter().enumerate() {
        let base = bi * n;
        let local: BTreeMap<&str, usize> = ast
            .inserts
            .iter()
            .enumerate()
            .map(|(k, s)| (s.var.as_str(), base + k))
            .collect();
        for s in &ast.inserts {
            let mut thing = NewThing::new(s.type_name.as_str());
            for (attr, op) in &s.has {
                let value = match op {
                    Operand::Var(v) => match binding.get(v) {
                        Some(Bound::Value(val)) => val.clone(),
                        _ => {
                            return Err(QueryError::Operand {
                                var: s.var.clone(),
                                attribute: attr.clone(),
                                message: format!("${v} is not a value variable"),
                            })
                        }
                    },
                    lit => literal(store.schema(), &s.var, attr, lit)?,
                };
                thing.attributes.insert(attr.clone(), value);
            }
            for (role, player) in &s.roles {
                let r = match binding.get(player) {
                    Some(Bound::Thing(id)) => PlayerRef::Stored(*id),
                    _ => PlayerRef::Batch(local[player.as_str()]),
                };
                thing = thing.player(role, r);
            }
            batch.push(thing);
        }
    }
    let ids = store.insert_batch(batch).map_err(|source| QueryError::Insert {
        var: ast.inserts[source.index % n].var.clone(),
        source,
    })?;
    Ok(ResultSet {
        columns: ast.inserts.iter().map(|s| s.var.clone()).collect(),
        rows: ids.chunks(n).map(|c| c.iter().map(|&id| Cell::Thing(id)).collect()).collect(),
    })
}

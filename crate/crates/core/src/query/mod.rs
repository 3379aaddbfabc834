//! A small match/fetch/insert language over the graph store.
//!
//! ```text
//! query     := [match] (fetch | insert)
//! match     := "match" statement+
//! statement := var "isa" type has* ";"
//!            | var "(" role ":" var ("," role ":" var)* ")" "isa" type has* ";"
//! has       := "," "has" attribute operand
//! operand   := string | number | "true" | "false" | var | "[" number "," number "]"
//! fetch     := "fetch" var ("," var)* ";"
//! insert    := "insert" statement+
//! ```
//!
//! String operands are coerced to timestamps for datetime attributes. Ranges are
//! closed and only allowed in match clauses. Comments start with `#`.

mod exec;
mod lexer;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use crate::graphstore::{BatchError, PatternError};

pub use exec::{execute, execute_read, to_pattern, Cell, ResultSet};
pub use parser::{parse_query, parse_query_bytes};

#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Str(String),
    Num(f64),
    Bool(bool),
    Var(String),
    Range(f64, f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Statement {
    pub var: String,
    pub type_name: String,
    /// Role name and player variable, relations only.
    pub roles: Vec<(String, String)>,
    pub has: Vec<(String, Operand)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QueryKind {
    Read,
    Insert,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryAst {
    pub matches: Vec<Statement>,
    pub fetch: Vec<String>,
    pub inserts: Vec<Statement>,
}

impl QueryAst {
    pub fn kind(&self) -> QueryKind {
        if self.inserts.is_empty() {
            QueryKind::Read
        } else {
            QueryKind::Insert
        }
    }

    /// Thing variables and value variables bound by the match clause.
    pub fn bound_variables(&self) -> (BTreeSet<&str>, BTreeSet<&str>) {
        let mut things = BTreeSet::new();
        let mut values = BTreeSet::new();
        for s in &self.matches {
            things.insert(s.var.as_str());
            for (_, p) in &s.roles {
                things.insert(p.as_str());
            }
            for (_, op) in &s.has {
                if let Operand::Var(v) = op {
                    values.insert(v.as_str());
                }
            }
        }
        (things, values)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("syntax error at {line}:{column}: found {found}{}", expected_list(.expected))]
    Syntax {
        line: usize,
        column: usize,
        expected: Vec<String>,
        found: String,
    },
    #[error("unbound variable ${var} at {line}:{column}")]
    Unbound { var: String, line: usize, column: usize },
    #[error("${var} at {line}:{column} is already bound")]
    Rebound { var: String, line: usize, column: usize },
    #[error("statement for ${var}: {source}")]
    Pattern {
        var: String,
        #[source]
        source: PatternError,
    },
    #[error("operand for `{attribute}` on ${var}: {message}")]
    Operand {
        var: String,
        attribute: String,
        message: String,
    },
    #[error("insert of ${var} rejected: {source}")]
    Insert {
        var: String,
        #[source]
        source: BatchError,
    },
}

fn expected_list(expected: &[String]) -> String {
    if expected.is_empty() {
        String::new()
    } else {
        format!(", expected one of: {}", expected.join(", "))
    }
}

impl QueryError {
    /// Source position, when the error has one.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            QueryError::Syntax { line, column, .. }
            | QueryError::Unbound { line, column, .. }
            | QueryError::Rebound { line, column, .. } => Some((*line, *column)),
            _ => None,
        }
    }
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn number(x: f64) -> String {
    // `{:?}` always prints a round-trippable form.
    format!("{x:?}")
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Str(s) => f.write_str(&quote(s)),
            Operand::Num(n) => f.write_str(&number(*n)),
            Operand::Bool(b) => write!(f, "{b}"),
            Operand::Var(v) => write!(f, "${v}"),
            Operand::Range(lo, hi) => write!(f, "[{}, {}]", number(*lo), number(*hi)),
        }
    }
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.var)?;
        if !self.roles.is_empty() {
            let roles: Vec<String> = self.roles.iter().map(|(r, p)| format!("{r}: ${p}")).collect();
            write!(f, " ({})", roles.join(", "))?;
        }
        write!(f, " isa {}", self.type_name)?;
        for (a, op) in &self.has {
            write!(f, ", has {a} {op}")?;
        }
        f.write_str(";")
    }
}

/// Canonical single-line text; `parse_query(&ast.to_string())` yields the same AST.
impl fmt::Display for QueryAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.matches.is_empty() {
            parts.push("match".to_string());
            parts.extend(self.matches.iter().map(Statement::to_string));
        }
        if self.inserts.is_empty() {
            let vars: Vec<String> = self.fetch.iter().map(|v| format!("${v}")).collect();
            parts.push(format!("fetch {};", vars.join(", ")));
        } else {
            parts.push("insert".into());
            parts.extend(self.inserts.iter().map(Statement::to_string));
        }
        f.write_str(&parts.join(" "))
    }
}

pub fn unparse(ast: &QueryAst) -> String {
    ast.to_string()
}

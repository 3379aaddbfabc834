use std::collections::BTreeSet;

use super::lexer::{tokenize, Spanned, Tok};
use super::{Operand, QueryAst, QueryError, Statement};

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail(&self, expected: &[&str]) -> QueryError {
        let t = self.peek();
        QueryError::Syntax {
            line: t.line,
            column: t.column,
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: t.tok.describe(),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w == kw)
    }

    fn keyword(&mut self, kw: &str) -> Result<(), QueryError> {
        if self.at_keyword(kw) {
            self.advance();
            Ok(())
        } else {
            Err(self.fail(&[kw]))
        }
    }

    fn punct(&mut self, tok: Tok, name: &str) -> Result<(), QueryError> {
        if self.peek().tok == tok {
            self.advance();
            Ok(())
        } else {
            Err(self.fail(&[name]))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String, QueryError> {
        match &self.peek().tok {
            Tok::Ident(w) => {
                let w = w.clone();
                self.advance();
                Ok(w)
            }
            _ => Err(self.fail(&[what])),
        }
    }

    fn var(&mut self) -> Result<(String, usize, usize), QueryError> {
        let t = self.peek().clone();
        match t.tok {
            Tok::Var(v) => {
                self.advance();
                Ok((v, t.line, t.column))
            }
            _ => Err(self.fail(&["$variable"])),
        }
    }

    fn roles(&mut self) -> Result<Vec<(String, String, usize, usize)>, QueryError> {
        self.punct(Tok::LParen, "`(`")?;
        let mut roles = Vec::new();
        loop {
            let role = self.ident("role name")?;
            self.punct(Tok::Colon, "`:`")?;
            let (player, l, c) = self.var()?;
            roles.push((role, player, l, c));
            match self.peek().tok {
                Tok::Comma => {
                    self.advance();
                }
                Tok::RParen => {
                    self.advance();
                    return Ok(roles);
                }
                _ => return Err(self.fail(&["`,`", "`)`"])),
            }
        }
    }

    fn operand(&mut self, allow_range: bool) -> Result<(Operand, usize, usize), QueryError> {
        let t = self.peek().clone();
        let op = match t.tok {
            Tok::Str(s) => Operand::Str(s),
            Tok::Num(n) => Operand::Num(n),
            Tok::Ident(ref w) if w == "true" => Operand::Bool(true),
            Tok::Ident(ref w) if w == "false" => Operand::Bool(false),
            Tok::Var(v) => Operand::Var(v),
            Tok::LBracket if allow_range => {
                self.advance();
                let lo = self.number()?;
                self.punct(Tok::Comma, "`,`")?;
                let hi = self.number()?;
                if self.peek().tok != Tok::RBracket {
                    return Err(self.fail(&["`]`"]));
                }
                Operand::Range(lo, hi)
            }
            _ => {
                let mut expected = vec!["string", "number", "`true`", "`false`", "$variable"];
                if allow_range {
                    expected.push("`[`");
                }
                return Err(self.fail(&expected));
            }
        };
        self.advance();
        Ok((op, t.line, t.column))
    }

    fn number(&mut self) -> Result<f64, QueryError> {
        match self.peek().tok {
            Tok::Num(n) => {
                self.advance();
                Ok(n)
            }
            _ => Err(self.fail(&["number"])),
        }
    }

    /// Parses one statement. Variable occurrences are reported through `seen` as
    /// (name, line, column, is_role_player, is_value).
    fn statement(&mut self, in_match: bool, seen: &mut Vec<Occurrence>) -> Result<Statement, QueryError> {
        let (var, l, c) = self.var()?;
        seen.push(Occurrence { var: var.clone(), line: l, column: c, use_: Use::Subject });
        let mut roles = Vec::new();
        if self.peek().tok == Tok::LParen {
            roles = self.roles()?;
        }
        self.keyword("isa")?;
        let type_name = self.ident("type name")?;
        if roles.is_empty() && self.peek().tok == Tok::LParen {
            roles = self.roles()?;
        }
        for (_, p, l, c) in &roles {
            seen.push(Occurrence { var: p.clone(), line: *l, column: *c, use_: Use::Player });
        }
        let mut has = Vec::new();
        loop {
            match self.peek().tok {
                Tok::Comma => {
                    self.advance();
                    self.keyword("has")?;
                    let attr = self.ident("attribute name")?;
                    let (op, l, c) = self.operand(in_match)?;
                    if let Operand::Var(v) = &op {
                        seen.push(Occurrence { var: v.clone(), line: l, column: c, use_: Use::Value });
                    }
                    has.push((attr, op));
                }
                Tok::Semi => {
                    self.advance();
                    break;
                }
                _ => {
                    let expected: &[&str] = if has.is_empty() && roles.is_empty() {
                        &["`,`", "`;`", "`(`"]
                    } else {
                        &["`,`", "`;`"]
                    };
                    return Err(self.fail(expected));
                }
            }
        }
        Ok(Statement {
            var,
            type_name,
            roles: roles.into_iter().map(|(r, p, _, _)| (r, p)).collect(),
            has,
        })
    }

    fn query(&mut self) -> Result<QueryAst, QueryError> {
        let mut matches = Vec::new();
        let mut match_seen = Vec::new();
        if self.at_keyword("match") {
            self.advance();
            matches.push(self.statement(true, &mut match_seen)?);
            while matches!(self.peek().tok, Tok::Var(_)) {
                matches.push(self.statement(true, &mut match_seen)?);
            }
        }
        let bound_things: BTreeSet<String> = match_seen
            .iter()
            .filter(|o| o.use_ != Use::Value)
            .map(|o| o.var.clone())
            .collect();
        let bound_values: BTreeSet<String> = match_seen
            .iter()
            .filter(|o| o.use_ == Use::Value)
            .map(|o| o.var.clone())
            .collect();

        let mut fetch = Vec::new();
        let mut inserts = Vec::new();
        if self.at_keyword("fetch") {
            self.advance();
            loop {
                let (v, l, c) = self.var()?;
                if !bound_things.contains(&v) && !bound_values.contains(&v) {
                    return Err(QueryError::Unbound { var: v, line: l, column: c });
                }
                fetch.push(v);
                match self.peek().tok {
                    Tok::Comma => {
                        self.advance();
                    }
                    Tok::Semi => {
                        self.advance();
                        break;
                    }
                    _ => return Err(self.fail(&["`,`", "`;`"])),
                }
            }
        } else if self.at_keyword("insert") {
            self.advance();
            let mut introduced: BTreeSet<String> = BTreeSet::new();
            loop {
                let mut seen = Vec::new();
                let s = self.statement(false, &mut seen)?;
                for o in &seen {
                    let ok = match o.use_ {
                        Use::Subject => !bound_things.contains(&o.var)
                            && !bound_values.contains(&o.var)
                            && !introduced.contains(&o.var),
                        Use::Player => bound_things.contains(&o.var) || introduced.contains(&o.var),
                        Use::Value => bound_values.contains(&o.var),
                    };
                    if !ok {
                        let (var, line, column) = (o.var.clone(), o.line, o.column);
                        return Err(if o.use_ == Use::Subject {
                            QueryError::Rebound { var, line, column }
                        } else {
                            QueryError::Unbound { var, line, column }
                        });
                    }
                }
                introduced.insert(s.var.clone());
                inserts.push(s);
                if !matches!(self.peek().tok, Tok::Var(_)) {
                    break;
                }
            }
        } else if matches.is_empty() {
            return Err(self.fail(&["`match`", "`fetch`", "`insert`"]));
        } else {
            return Err(self.fail(&["$variable", "`fetch`", "`insert`"]));
        }
        if self.peek().tok != Tok::Eof {
            return Err(self.fail(&["end of input"]));
        }
        Ok(QueryAst {
            matches,
            fetch,
            inserts,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Use {
    Subject,
    Player,
    Value,
}

struct Occurrence {
    var: String,
    line: usize,
    column: usize,
    use_: Use,
}

pub fn parse_query(text: &str) -> Result<QueryAst, QueryError> {
    let toks = tokenize(text)?;
    Parser { toks, pos: 0 }.query()
}

/// Parses raw bytes; invalid UTF-8 is reported as a syntax error at the offending byte.
pub fn parse_query_bytes(bytes: &[u8]) -> Result<QueryAst, QueryError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_query(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = 1 + good.iter().filter(|&&b| b == b'\n').count();
            let line_start = good.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = 1 + String::from_utf8_lossy(&good[line_start..]).chars().count();
            Err(QueryError::Syntax {
                line,
                column,
                expected: Vec::new(),
                found: "invalid UTF-8".into(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::query::{unparse, QueryKind};
    use proptest::prelude::*;

    #[test]
    fn read_query_shape() {
        let q = parse_query(r#"match $x isa processed_image_object, has obj_name "boat"; fetch $x;"#).unwrap();
        assert_eq!(q.kind(), QueryKind::Read);
        assert_eq!(q.matches.len(), 1);
        assert_eq!(q.matches[0].type_name, "processed_image_object");
        assert_eq!(q.matches[0].has, vec![("obj_name".to_string(), Operand::Str("boat".into()))]);
        assert_eq!(q.fetch, vec!["x"]);
    }

    #[test]
    fn unbound_insert_player() {
        let err = parse_query("match $a isa artifact_model; insert $d isa dcmd_link (prior: $a, update: $u);")
            .unwrap_err();
        assert_eq!(
            err,
            QueryError::Unbound {
                var: "u".into(),
                line: 1,
                column: 74
            }
        );
    }

    #[test]
    fn syntax_error_lists_expected_tokens() {
        let err = parse_query("match $x isa t has a 1; fetch $x;").unwrap_err();
        match err {
            QueryError::Syntax { line, column, expected, .. } => {
                assert_eq!((line, column), (1, 16));
                assert_eq!(expected, vec!["`,`", "`;`", "`(`"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn positions_span_lines() {
        let err = parse_query("match\n  $x isa t;\n  fetch $y;").unwrap_err();
        assert_eq!(err.position(), Some((3, 9)));
    }

    #[test]
    fn both_relation_forms_parse_equal() {
        let a = parse_query("match $x isa t; $r (p: $x) isa rel; fetch $r;").unwrap();
        let b = parse_query("match $x isa t; $r isa rel (p: $x); fetch $r;").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ranges_only_in_match() {
        assert!(parse_query("match $x isa t, has pos_x [0.1, 0.5]; fetch $x;").is_ok());
        assert!(matches!(
            parse_query("insert $x isa t, has pos_x [0.1, 0.5];"),
            Err(QueryError::Syntax { .. })
        ));
    }

    #[test]
    fn rebinding_in_insert_rejected() {
        assert!(matches!(
            parse_query("match $x isa t; insert $x isa t;"),
            Err(QueryError::Rebound { .. })
        ));
    }

    #[test]
    fn unparse_round_trip_examples() {
        for q in [
            r#"match $x isa processed_image_object, has obj_name "a \"quoted\" \\ name"; fetch $x;"#,
            "match $k isa artifact_model, has known_object true, has pos_x [-0.5, 1e-3], has pos_y $y; fetch $k, $y;",
            r#"insert $i isa processed_image, has event_id "e1", has timestamp "14:49:47.16"; $o isa processed_image_object, has pos_x 0.79; $p (whole: $i, part: $o) isa image_part;"#,
        ] {
            let ast = parse_query(q).unwrap();
            let text = unparse(&ast);
            assert_eq!(parse_query(&text).unwrap(), ast, "{text}");
            assert_eq!(unparse(&parse_query(&text).unwrap()), text);
        }
    }

    #[test]
    fn invalid_utf8_is_a_syntax_error() {
        let err = parse_query_bytes(b"match $x\n isa \xff").unwrap_err();
        assert_eq!(err.position(), Some((2, 6)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn never_panics_on_bytes(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
            let _ = parse_query_bytes(&bytes);
        }

        #[test]
        fn never_panics_on_token_soup(parts in proptest::collection::vec(
            prop_oneof![
                Just("match"), Just("fetch"), Just("insert"), Just("isa"), Just("has"),
                Just("$x"), Just("$y"), Just("t"), Just(","), Just(";"), Just(":"),
                Just("("), Just(")"), Just("["), Just("]"), Just("\"s\""), Just("1.5"), Just("true"),
            ], 0..30)) {
            let text = parts.join(" ");
            if let Ok(ast) = parse_query(&text) {
                prop_assert_eq!(parse_query(&unparse(&ast)).unwrap(), ast);
            }
        }
    }
}

//! Text format for network definitions.
//!
//! ```text
//! # comment
//! network hazard
//!   variable weapon_present true false
//!   variable hazard true false
//!   node weapon_present
//!     row 0.2 0.8
//!   node hazard | weapon_present
//!     row true : 0.9 0.1
//!     row false : 0.05 0.95
//! end
//! ```
//!
//! Rows of a node with parents are keyed by parent states in parent order and may
//! appear in any order, but every configuration must appear exactly once.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{BayesError, BayesNet, Node, Variable};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NetFileError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("network `{network}`: {source}")]
    Invalid {
        network: String,
        #[source]
        source: BayesError,
    },
    #[error("missing network `{0}`")]
    MissingNetwork(String),
    #[error("network `{network}` does not declare `{variable}` with states {expected}")]
    Contract {
        network: String,
        variable: String,
        expected: String,
    },
}

struct PendingNode {
    line: usize,
    child: String,
    parents: Vec<String>,
    rows: Vec<(usize, Vec<String>, Vec<f64>)>,
}

struct PendingNet {
    name: String,
    variables: Vec<Variable>,
    nodes: Vec<PendingNode>,
}

fn syntax(line: usize, message: impl Into<String>) -> NetFileError {
    NetFileError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses every `network ... end` block in the file.
pub fn parse_net_file(text: &str) -> Result<BTreeMap<String, BayesNet>, NetFileError> {
    let mut nets = BTreeMap::new();
    let mut current: Option<PendingNet> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some(&head) = words.first() else { continue };
        match (head, current.as_mut()) {
            ("network", None) => {
                let [_, name] = words[..] else {
                    return Err(syntax(line, "expected `network <name>`"));
                };
                if nets.contains_key(name) {
                    return Err(syntax(line, format!("network `{name}` defined twice")));
                }
                current = Some(PendingNet {
                    name: name.to_string(),
                    variables: Vec::new(),
                    nodes: Vec::new(),
                });
            }
            ("network", Some(_)) => return Err(syntax(line, "nested `network`; missing `end`?")),
            (_, None) => return Err(syntax(line, format!("`{head}` outside a network block"))),
            ("variable", Some(net)) => {
                if words.len() < 3 {
                    return Err(syntax(line, "expected `variable <name> <state> <state> ...`"));
                }
                net.variables.push(Variable {
                    name: words[1].to_string(),
                    states: words[2..].iter().map(|s| s.to_string()).collect(),
                });
            }
            ("node", Some(net)) => {
                let (child, parents) = match words[..] {
                    [_, child] => (child, Vec::new()),
                    [_, child, "|", ref rest @ ..] if !rest.is_empty() => {
                        (child, rest.iter().map(|s| s.to_string()).collect())
                    }
                    _ => return Err(syntax(line, "expected `node <name> [| <parent> ...]`")),
                };
                net.nodes.push(PendingNode {
                    line,
                    child: child.to_string(),
                    parents,
                    rows: Vec::new(),
                });
            }
            ("row", Some(net)) => {
                let node = net
                    .nodes
                    .last_mut()
                    .ok_or_else(|| syntax(line, "`row` before any `node`"))?;
                let rest = &words[1..];
                let (key, probs) = match rest.iter().position(|w| *w == ":") {
                    Some(p) => (&rest[..p], &rest[p + 1..]),
                    None => (&rest[..0], rest),
                };
                if key.len() != node.parents.len() {
                    return Err(syntax(
                        line,
                        format!("row key needs {} parent states", node.parents.len()),
                    ));
                }
                let probs = probs
                    .iter()
                    .map(|w| w.parse::<f64>().map_err(|_| syntax(line, format!("bad number `{w}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                node.rows
                    .push((line, key.iter().map(|s| s.to_string()).collect(), probs));
            }
            ("end", Some(_)) => {
                let net = current.take().expect("inside block");
                let name = net.name.clone();
                nets.insert(name, build(net)?);
            }
            (other, Some(_)) => return Err(syntax(line, format!("unknown keyword `{other}`"))),
        }
    }
    if let Some(net) = current {
        return Err(syntax(
            text.lines().count(),
            format!("network `{}` is missing `end`", net.name),
        ));
    }
    Ok(nets)
}

fn build(net: PendingNet) -> Result<BayesNet, NetFileError> {
    let invalid = |source| NetFileError::Invalid {
        network: net.name.clone(),
        source,
    };
    let vars: BTreeMap<&str, &Variable> =
        net.variables.iter().map(|v| (v.name.as_str(), v)).collect();
    let mut nodes = Vec::new();
    for v in &net.variables {
        let found: Vec<&PendingNode> = net.nodes.iter().filter(|n| n.child == v.name).collect();
        let pn = match found[..] {
            [one] => one,
            [] => {
                return Err(invalid(BayesError::BadCpt {
                    variable: v.name.clone(),
                    reason: "no node block".into(),
                }))
            }
            [_, second, ..] => return Err(syntax(second.line, format!("second node for `{}`", v.name))),
        };
        let mut parent_vars = Vec::new();
        for p in &pn.parents {
            parent_vars.push(
                *vars
                    .get(p.as_str())
                    .ok_or_else(|| invalid(BayesError::UnknownVariable(p.clone())))?,
            );
        }
        let configs: usize = parent_vars.iter().map(|p| p.states.len()).product();
        let mut table: Vec<Option<Vec<f64>>> = vec![None; configs];
        for (line, key, probs) in &pn.rows {
            if probs.len() != v.states.len() {
                return Err(syntax(*line, format!("expected {} probabilities", v.states.len())));
            }
            let mut idx = 0;
            for (state, pv) in key.iter().zip(&parent_vars) {
                let s = pv
                    .state_index(state)
                    .ok_or_else(|| syntax(*line, format!("`{}` has no state `{state}`", pv.name)))?;
                idx = idx * pv.states.len() + s;
            }
            if table[idx].replace(probs.clone()).is_some() {
                return Err(syntax(*line, "duplicate row"));
            }
        }
        let mut flat = Vec::with_capacity(configs * v.states.len());
        for (i, row) in table.into_iter().enumerate() {
            let row = row.ok_or_else(|| {
                syntax(pn.line, format!("node `{}` is missing row {i}", v.name))
            })?;
            flat.extend(row);
        }
        nodes.push(Node {
            variable: v.clone(),
            parents: pn.parents.clone(),
            table: flat,
        });
    }
    if let Some(orphan) = net.nodes.iter().find(|n| !vars.contains_key(n.child.as_str())) {
        return Err(syntax(orphan.line, format!("node for undeclared variable `{}`", orphan.child)));
    }
    BayesNet::new(nodes).map_err(invalid)
}

/// The two networks used by object assessment, plus the checksum of their source.
#[derive(Clone, Debug, PartialEq)]
pub struct MissionNets {
    pub identity: BayesNet,
    pub hazard: BayesNet,
    /// SHA-256 of the file text, lowercase hex.
    pub checksum: String,
}

pub const IDENTITY_EVIDENCE: [&str; 6] = [
    "object_match",
    "position_match",
    "size_match",
    "obj_CL_level",
    "position_CL_level",
    "size_CL_level",
];

impl MissionNets {
    pub fn parse(text: &str) -> Result<MissionNets, NetFileError> {
        let mut nets = parse_net_file(text)?;
        let identity = nets
            .remove("identity")
            .ok_or_else(|| NetFileError::MissingNetwork("identity".into()))?;
        let hazard = nets
            .remove("hazard")
            .ok_or_else(|| NetFileError::MissingNetwork("hazard".into()))?;
        let require = |net: &BayesNet, network: &str, var: &str, states: &[&str]| {
            match net.variable(var) {
                Some(v) if v.states.iter().map(String::as_str).eq(states.iter().copied()) => Ok(()),
                _ => Err(NetFileError::Contract {
                    network: network.into(),
                    variable: var.into(),
                    expected: states.join("/"),
                }),
            }
        };
        require(&identity, "identity", "object_identity", &["known", "new"])?;
        for var in &IDENTITY_EVIDENCE[..3] {
            require(&identity, "identity", var, &["match", "no_match"])?;
        }
        for var in &IDENTITY_EVIDENCE[3..] {
            require(&identity, "identity", var, &["high", "medium", "low"])?;
        }
        require(&hazard, "hazard", "object_identity", &["known", "new"])?;
        for var in ["hazard", "weapon_present", "person_present"] {
            require(&hazard, "hazard", var, &["true", "false"])?;
        }
        let digest = Sha256::digest(text.as_bytes());
        let checksum = digest.iter().map(|b| format!("{b:02x}")).collect();
        Ok(MissionNets {
            identity,
            hazard,
            checksum,
        })
    }
}

//! Discrete Bayesian networks with exact inference by Variable Elimination.

mod factor;
mod file;

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

pub use factor::{factor_product, sum_out, Factor};
pub use file::{parse_net_file, MissionNets, NetFileError, IDENTITY_EVIDENCE};

/// Largest joint table the brute-force oracle will enumerate.
pub const BRUTE_FORCE_LIMIT: usize = 1 << 24;

/// Tolerance applied when checking that CPT rows sum to one.
pub const CPT_TOLERANCE: f64 = 1e-9;

pub type Evidence = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BayesError {
    #[error("malformed factor: {0}")]
    MalformedFactor(String),
    #[error("cardinality mismatch for `{variable}`: {left} vs {right}")]
    CardinalityMismatch {
        variable: String,
        left: usize,
        right: usize,
    },
    #[error("variable `{0}` is not in the factor scope")]
    NotInScope(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{0}` declared twice")]
    DuplicateVariable(String),
    #[error("variable `{variable}` needs at least two unique states")]
    BadStates { variable: String },
    #[error("variable `{variable}` has no state `{state}`")]
    UnknownState { variable: String, state: String },
    #[error("parent graph has a cycle through `{0}`")]
    Cycle(String),
    #[error("CPT of `{variable}`: {reason}")]
    BadCpt { variable: String, reason: String },
    #[error("query variable `{0}` is also observed")]
    QueryInEvidence(String),
    #[error("evidence has probability zero")]
    ImpossibleEvidence,
    #[error("joint table of {0} entries exceeds the enumeration limit")]
    JointTooLarge(u128),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub states: Vec<String>,
}

impl Variable {
    pub fn new(name: &str, states: &[&str]) -> Self {
        Variable {
            name: name.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn state_index(&self, state: &str) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }
}

/// Declaration of one node: its variable, ordered parents, and a CPT laid out row by
/// row over parent configurations (last parent fastest), one entry per child state.
#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub variable: Variable,
    pub parents: Vec<String>,
    pub table: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BayesNet {
    variables: Vec<Variable>,
    index: BTreeMap<String, usize>,
    parents: Vec<Vec<String>>,
    /// Scope is parents followed by the child.
    cpts: Vec<Factor>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    pub variable: String,
    pub states: Vec<String>,
    pub probs: Vec<f64>,
}

impl Distribution {
    pub fn p(&self, state: &str) -> f64 {
        self.states
            .iter()
            .position(|s| s == state)
            .map(|i| self.probs[i])
            .unwrap_or(0.0)
    }

    pub fn max_abs_diff(&self, other: &Distribution) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl BayesNet {
    pub fn new(nodes: Vec<Node>) -> Result<BayesNet, BayesError> {
        let mut index = BTreeMap::new();
        let mut variables = Vec::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            let v = &n.variable;
            if index.insert(v.name.clone(), i).is_some() {
                return Err(BayesError::DuplicateVariable(v.name.clone()));
            }
            let unique: BTreeSet<&String> = v.states.iter().collect();
            if v.states.len() < 2 || unique.len() != v.states.len() {
                return Err(BayesError::BadStates {
                    variable: v.name.clone(),
                });
            }
            variables.push(v.clone());
        }
        let mut parents = Vec::with_capacity(nodes.len());
        let mut cpts = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let child = &n.variable;
            let mut scope = Vec::new();
            let mut cards = Vec::new();
            for p in &n.parents {
                let pi = *index
                    .get(p)
                    .ok_or_else(|| BayesError::UnknownVariable(p.clone()))?;
                if scope.contains(p) || p == &child.name {
                    return Err(BayesError::BadCpt {
                        variable: child.name.clone(),
                        reason: format!("parent `{p}` listed twice or is the child"),
                    });
                }
                scope.push(p.clone());
                cards.push(variables[pi].states.len());
            }
            scope.push(child.name.clone());
            cards.push(child.states.len());
            let f = Factor::new(scope, cards, n.table.clone()).map_err(|e| BayesError::BadCpt {
                variable: child.name.clone(),
                reason: e.to_string(),
            })?;
            let k = child.states.len();
            for (row, chunk) in f.values().chunks(k).enumerate() {
                let sum: f64 = chunk.iter().sum();
                if (sum - 1.0).abs() > CPT_TOLERANCE {
                    return Err(BayesError::BadCpt {
                        variable: child.name.clone(),
                        reason: format!("row {row} sums to {sum}"),
                    });
                }
            }
            parents.push(n.parents.clone());
            cpts.push(f);
        }
        let net = BayesNet {
            variables,
            index,
            parents,
            cpts,
        };
        net.check_acyclic()?;
        Ok(net)
    }

    fn check_acyclic(&self) -> Result<(), BayesError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut mark = vec![0u8; self.variables.len()];
        fn visit(net: &BayesNet, i: usize, mark: &mut [u8]) -> Result<(), BayesError> {
            match mark[i] {
                1 => return Err(BayesError::Cycle(net.variables[i].name.clone())),
                2 => return Ok(()),
                _ => {}
            }
            mark[i] = 1;
            for p in &net.parents[i] {
                visit(net, net.index[p], mark)?;
            }
            mark[i] = 2;
            Ok(())
        }
        for i in 0..self.variables.len() {
            visit(self, i, &mut mark)?;
        }
        Ok(())
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, name: &str) -> Option<&Variable> {
        self.index.get(name).map(|&i| &self.variables[i])
    }

    pub fn parents(&self, name: &str) -> Option<&[String]> {
        self.index.get(name).map(|&i| self.parents[i].as_slice())
    }

    pub fn cpt(&self, name: &str) -> Option<&Factor> {
        self.index.get(name).map(|&i| &self.cpts[i])
    }

    pub fn cpts(&self) -> &[Factor] {
        &self.cpts
    }

    /// Checks the query and evidence against the net and returns evidence as state
    /// indices.
    fn resolve(&self, query: &str, evidence: &Evidence) -> Result<BTreeMap<String, usize>, BayesError> {
        if !self.index.contains_key(query) {
            return Err(BayesError::UnknownVariable(query.to_string()));
        }
        if evidence.contains_key(query) {
            return Err(BayesError::QueryInEvidence(query.to_string()));
        }
        let mut out = BTreeMap::new();
        for (var, state) in evidence {
            let v = self
                .variable(var)
                .ok_or_else(|| BayesError::UnknownVariable(var.clone()))?;
            let s = v.state_index(state).ok_or_else(|| BayesError::UnknownState {
                variable: var.clone(),
                state: state.clone(),
            })?;
            out.insert(var.clone(), s);
        }
        Ok(out)
    }

    fn distribution(&self, query: &str, values: &[f64]) -> Result<Distribution, BayesError> {
        let z: f64 = values.iter().sum();
        if !(z > 0.0) {
            return Err(BayesError::ImpossibleEvidence);
        }
        let v = self.variable(query).expect("resolved query");
        Ok(Distribution {
            variable: query.to_string(),
            states: v.states.clone(),
            probs: values.iter().map(|x| x / z).collect(),
        })
    }
}

/// Min-fill elimination order over all hidden variables, ties broken by name.
pub fn elimination_order(
    net: &BayesNet,
    query: &str,
    evidence: &Evidence,
) -> Result<Vec<String>, BayesError> {
    net.resolve(query, evidence)?;
    let hidden: BTreeSet<&str> = net
        .variables
        .iter()
        .map(|v| v.name.as_str())
        .filter(|n| *n != query && !evidence.contains_key(*n))
        .collect();
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for f in &net.cpts {
        let vars: Vec<&str> = f
            .scope()
            .iter()
            .map(String::as_str)
            .filter(|v| !evidence.contains_key(*v))
            .collect();
        for &a in &vars {
            let entry = adj.entry(a).or_default();
            for &b in &vars {
                if a != b {
                    entry.insert(b);
                }
            }
        }
    }
    let mut remaining = hidden;
    let mut order = Vec::with_capacity(remaining.len());
    while !remaining.is_empty() {
        let fill = |v: &str| -> usize {
            let ns: Vec<&str> = adj.get(v).map(|s| s.iter().copied().collect()).unwrap_or_default();
            let mut missing = 0;
            for (i, a) in ns.iter().enumerate() {
                for b in &ns[i + 1..] {
                    if !adj[a].contains(b) {
                        missing += 1;
                    }
                }
            }
            missing
        };
        // BTreeSet iteration is name-ordered, so min_by_key keeps the first (smallest) name.
        let next = *remaining.iter().min_by_key(|v| fill(v)).expect("non-empty");
        let ns: Vec<&str> = adj.get(next).map(|s| s.iter().copied().collect()).unwrap_or_default();
        for &a in &ns {
            for &b in &ns {
                if a != b {
                    adj.get_mut(a).expect("neighbour").insert(b);
                }
            }
            adj.get_mut(a).expect("neighbour").remove(next);
        }
        adj.remove(next);
        remaining.remove(next);
        order.push(next.to_string());
    }
    Ok(order)
}

/// Exact posterior of `query` given `evidence` by Variable Elimination with the min-fill
/// order.
pub fn posterior(net: &BayesNet, query: &str, evidence: &Evidence) -> Result<Distribution, BayesError> {
    let order = elimination_order(net, query, evidence)?;
    posterior_with_order(net, query, evidence, &order)
}

/// Variable Elimination with a caller-chosen order. The order must list every hidden
/// variable exactly once.
pub fn posterior_with_order(
    net: &BayesNet,
    query: &str,
    evidence: &Evidence,
    order: &[String],
) -> Result<Distribution, BayesError> {
    let observed = net.resolve(query, evidence)?;
    let mut factors: Vec<Factor> = Vec::with_capacity(net.cpts.len());
    for cpt in &net.cpts {
        let mut f = cpt.clone();
        for (var, &s) in &observed {
            if f.card_of(var).is_some() {
                f = f.reduce(var, s)?;
            }
        }
        factors.push(f);
    }
    for var in order {
        if var == query || observed.contains_key(var) {
            return Err(BayesError::MalformedFactor(format!(
                "`{var}` cannot be eliminated"
            )));
        }
        let (touching, rest): (Vec<Factor>, Vec<Factor>) =
            factors.into_iter().partition(|f| f.card_of(var).is_some());
        factors = rest;
        if touching.is_empty() {
            continue;
        }
        let mut prod = Factor::unit();
        for f in &touching {
            prod = prod.product(f)?;
        }
        factors.push(prod.sum_out(var)?);
    }
    let mut result = Factor::unit();
    for f in &factors {
        result = result.product(f)?;
    }
    if result.scope() != [query.to_string()] {
        return Err(BayesError::MalformedFactor(
            "elimination order did not cover every hidden variable".into(),
        ));
    }
    net.distribution(query, result.values())
}

/// Exact posterior by enumerating the full joint. Test oracle; refuses joints larger
/// than [`BRUTE_FORCE_LIMIT`].
pub fn brute_force_posterior(
    net: &BayesNet,
    query: &str,
    evidence: &Evidence,
) -> Result<Distribution, BayesError> {
    let observed = net.resolve(query, evidence)?;
    let cards: Vec<usize> = net.variables.iter().map(|v| v.states.len()).collect();
    let size: u128 = cards.iter().map(|&c| c as u128).product();
    if size > BRUTE_FORCE_LIMIT as u128 {
        return Err(BayesError::JointTooLarge(size));
    }
    let q = net.index[query];
    let fixed: Vec<Option<usize>> = net
        .variables
        .iter()
        .map(|v| observed.get(&v.name).copied())
        .collect();
    let positions: Vec<Vec<usize>> = net
        .cpts
        .iter()
        .map(|f| f.scope().iter().map(|v| net.index[v]).collect())
        .collect();
    let mut sums = vec![0.0; cards[q]];
    let mut assignment = vec![0usize; cards.len()];
    let mut local = Vec::new();
    for _ in 0..size {
        let consistent = fixed
            .iter()
            .zip(&assignment)
            .all(|(f, a)| f.map_or(true, |s| s == *a));
        if consistent {
            let mut p = 1.0;
            for (f, pos) in net.cpts.iter().zip(&positions) {
                local.clear();
                local.extend(pos.iter().map(|&i| assignment[i]));
                p *= f.get(&local);
            }
            sums[assignment[q]] += p;
        }
        factor::advance(&mut assignment, &cards);
    }
    net.distribution(query, &sums)
}

/// Random binary-variable network for property tests: variables `v00..`, each with up
/// to `max_parents` parents drawn from earlier variables, CPT rows uniform on the simplex.
pub fn random_net<R: Rng>(rng: &mut R, n_vars: usize, max_parents: usize) -> BayesNet {
    let mut nodes = Vec::with_capacity(n_vars);
    for i in 0..n_vars {
        let name = format!("v{i:02}");
        let k = rng.random_range(0..=max_parents.min(i));
        let mut parents: Vec<usize> = Vec::new();
        while parents.len() < k {
            let p = rng.random_range(0..i);
            if !parents.contains(&p) {
                parents.push(p);
            }
        }
        let rows = 1usize << parents.len();
        let mut table = Vec::with_capacity(rows * 2);
        for _ in 0..rows {
            let p: f64 = rng.random();
            table.push(p);
            table.push(1.0 - p);
        }
        nodes.push(Node {
            variable: Variable::new(&name, &["t", "f"]),
            parents: parents.iter().map(|p| format!("v{p:02}")).collect(),
            table,
        });
    }
    BayesNet::new(nodes).expect("generated net is valid")
}

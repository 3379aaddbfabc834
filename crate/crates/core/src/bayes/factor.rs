use super::BayesError;

/// Dense table over an ordered scope. The last scope variable varies fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct Factor {
    scope: Vec<String>,
    cards: Vec<usize>,
    values: Vec<f64>,
}

impl Factor {
    pub fn new(scope: Vec<String>, cards: Vec<usize>, values: Vec<f64>) -> Result<Self, BayesError> {
        if scope.len() != cards.len() {
            return Err(BayesError::MalformedFactor(
                "scope and cardinality lists differ in length".into(),
            ));
        }
        for (i, v) in scope.iter().enumerate() {
            if scope[..i].contains(v) {
                return Err(BayesError::MalformedFactor(format!("`{v}` repeated in scope")));
            }
        }
        let size: usize = cards.iter().product();
        if values.len() != size {
            return Err(BayesError::MalformedFactor(format!(
                "table has {} entries, scope needs {size}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(BayesError::MalformedFactor(format!("entry {bad} is not a non-negative number")));
        }
        Ok(Factor { scope, cards, values })
    }

    /// The constant factor over the empty scope.
    pub fn unit() -> Self {
        Factor {
            scope: Vec::new(),
            cards: Vec::new(),
            values: vec![1.0],
        }
    }

    pub fn scope(&self) -> &[String] {
        &self.scope
    }

    pub fn cards(&self) -> &[usize] {
        &self.cards
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn card_of(&self, var: &str) -> Option<usize> {
        self.position(var).map(|i| self.cards[i])
    }

    fn position(&self, var: &str) -> Option<usize> {
        self.scope.iter().position(|v| v == var)
    }

    fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.cards.len()];
        for i in (0..self.cards.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.cards[i + 1];
        }
        strides
    }

    /// Value at a full assignment given in scope order.
    pub fn get(&self, assignment: &[usize]) -> f64 {
        let idx: usize = assignment
            .iter()
            .zip(self.strides())
            .map(|(a, s)| a * s)
            .sum();
        self.values[idx]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Pointwise product over the union of both scopes (self's variables first).
    pub fn product(&self, other: &Factor) -> Result<Factor, BayesError> {
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        for (v, &c) in other.scope.iter().zip(&other.cards) {
            match self.card_of(v) {
                Some(mine) if mine != c => {
                    return Err(BayesError::CardinalityMismatch {
                        variable: v.clone(),
                        left: mine,
                        right: c,
                    })
                }
                Some(_) => {}
                None => {
                    scope.push(v.clone());
                    cards.push(c);
                }
            }
        }
        let a_map: Vec<usize> = self.scope.iter().map(|v| pos(&scope, v)).collect();
        let b_map: Vec<usize> = other.scope.iter().map(|v| pos(&scope, v)).collect();
        let a_strides = self.strides();
        let b_strides = other.strides();
        let size: usize = cards.iter().product();
        let mut values = Vec::with_capacity(size);
        let mut assignment = vec![0usize; scope.len()];
        for _ in 0..size {
            let ai: usize = a_map.iter().zip(&a_strides).map(|(&p, s)| assignment[p] * s).sum();
            let bi: usize = b_map.iter().zip(&b_strides).map(|(&p, s)| assignment[p] * s).sum();
            values.push(self.values[ai] * other.values[bi]);
            advance(&mut assignment, &cards);
        }
        Ok(Factor { scope, cards, values })
    }

    /// Sums the variable out of the scope.
    pub fn sum_out(&self, var: &str) -> Result<Factor, BayesError> {
        let k = self
            .position(var)
            .ok_or_else(|| BayesError::NotInScope(var.to_string()))?;
        let inner: usize = self.cards[k + 1..].iter().product();
        let card = self.cards[k];
        let outer: usize = self.cards[..k].iter().product();
        let mut values = vec![0.0; outer * inner];
        for o in 0..outer {
            for s in 0..card {
                let base = (o * card + s) * inner;
                for i in 0..inner {
                    values[o * inner + i] += self.values[base + i];
                }
            }
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Ok(Factor { scope, cards, values })
    }

    /// Restricts the variable to one state and drops it from the scope.
    pub fn reduce(&self, var: &str, state: usize) -> Result<Factor, BayesError> {
        let k = self
            .position(var)
            .ok_or_else(|| BayesError::NotInScope(var.to_string()))?;
        let card = self.cards[k];
        if state >= card {
            return Err(BayesError::MalformedFactor(format!(
                "state index {state} out of range for `{var}`"
            )));
        }
        let inner: usize = self.cards[k + 1..].iter().product();
        let outer: usize = self.cards[..k].iter().product();
        let mut values = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            let base = (o * card + state) * inner;
            values.extend_from_slice(&self.values[base..base + inner]);
        }
        let mut scope = self.scope.clone();
        let mut cards = self.cards.clone();
        scope.remove(k);
        cards.remove(k);
        Ok(Factor { scope, cards, values })
    }
}

fn pos(scope: &[String], v: &str) -> usize {
    scope.iter().position(|s| s == v).expect("variable in union scope")
}

/// Odometer increment, last position fastest.
pub(super) fn advance(assignment: &mut [usize], cards: &[usize]) {
    for i in (0..assignment.len()).rev() {
        assignment[i] += 1;
        if assignment[i] < cards[i] {
            return;
        }
        assignment[i] = 0;
    }
}

pub fn factor_product(a: &Factor, b: &Factor) -> Result<Factor, BayesError> {
    a.product(b)
}

pub fn sum_out(f: &Factor, var: &str) -> Result<Factor, BayesError> {
    f.sum_out(var)
}

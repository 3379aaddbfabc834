use std::cmp::Ordering;
use std::fmt;

use crate::ontology::ValueKind;
use crate::Timestamp;

/// A typed attribute value.
///
/// Equality and ordering are total: doubles compare by IEEE total order, so two
/// doubles are equal exactly when their bit patterns are equal.
#[derive(Clone, Debug)]
pub enum Value {
    String(String),
    Double(f64),
    Datetime(Timestamp),
    Boolean(bool),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::String(_) => ValueKind::String,
            Value::Double(_) => ValueKind::Double,
            Value::Datetime(_) => ValueKind::Datetime,
            Value::Boolean(_) => ValueKind::Boolean,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Double(d) => Some(*d),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Boolean(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_timestamp(&self) -> Option<Timestamp> {
        match self {
            Value::Datetime(t) => Some(*t),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::String(_) => 0,
            Value::Double(_) => 1,
            Value::Datetime(_) => 2,
            Value::Boolean(_) => 3,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::String(a), Value::String(b)) => a.cmp(b),
            (Value::Double(a), Value::Double(b)) => a.total_cmp(b),
            (Value::Datetime(a), Value::Datetime(b)) => a.cmp(b),
            (Value::Boolean(a), Value::Boolean(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::String(s) => write!(f, "{s:?}"),
            Value::Double(d) => write!(f, "{d}"),
            Value::Datetime(t) => write!(f, "{t}"),
            Value::Boolean(b) => write!(f, "{b}"),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::String(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::String(s)
    }
}

impl From<f64> for Value {
    fn from(d: f64) -> Self {
        Value::Double(d)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Boolean(b)
    }
}

impl From<Timestamp> for Value {
    fn from(t: Timestamp) -> Self {
        Value::Datetime(t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubles_compare_bitwise() {
        assert_eq!(Value::Double(0.79), Value::Double(0.79));
        assert_ne!(Value::Double(0.0), Value::Double(-0.0));
        assert!(Value::Double(-1.0) < Value::Double(2.5));
    }

    #[test]
    fn kinds_never_compare_equal() {
        assert_ne!(Value::from("1"), Value::from(1.0));
        assert_ne!(Value::from(true), Value::from("true"));
    }
}

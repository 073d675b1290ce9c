use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::GraphError;

/// Scalar property value. Nested values are not representable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

pub type Properties = BTreeMap<String, PropValue>;

impl PropValue {
    /// Equality as used by query predicates: integers and floats compare numerically.
    pub fn loose_eq(&self, other: &PropValue) -> bool {
        match (self, other) {
            (PropValue::Int(a), PropValue::Float(b)) | (PropValue::Float(b), PropValue::Int(a)) => {
                (*a as f64) == *b
            }
            _ => self == other,
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            PropValue::Bool(_) => "boolean",
            PropValue::Int(_) => "integer",
            PropValue::Float(_) => "float",
            PropValue::Str(_) => "string",
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

// Bitwise float equality so that structural comparisons (round-trips, graph
// equality) are reflexive.
impl PartialEq for PropValue {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (PropValue::Bool(a), PropValue::Bool(b)) => a == b,
            (PropValue::Int(a), PropValue::Int(b)) => a == b,
            (PropValue::Float(a), PropValue::Float(b)) => a.to_bits() == b.to_bits(),
            (PropValue::Str(a), PropValue::Str(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for PropValue {}

impl std::hash::Hash for PropValue {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            PropValue::Bool(b) => b.hash(state),
            PropValue::Int(i) => i.hash(state),
            PropValue::Float(f) => f.to_bits().hash(state),
            PropValue::Str(s) => s.hash(state),
        }
    }
}

impl PartialOrd for PropValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PropValue {
    fn cmp(&self, other: &Self) -> Ordering {
        fn rank(v: &PropValue) -> u8 {
            match v {
                PropValue::Bool(_) => 0,
                PropValue::Int(_) => 1,
                PropValue::Float(_) => 2,
                PropValue::Str(_) => 3,
            }
        }
        match (self, other) {
            (PropValue::Bool(a), PropValue::Bool(b)) => a.cmp(b),
            (PropValue::Int(a), PropValue::Int(b)) => a.cmp(b),
            (PropValue::Float(a), PropValue::Float(b)) => a.total_cmp(b),
            (PropValue::Str(a), PropValue::Str(b)) => a.cmp(b),
            _ => rank(self).cmp(&rank(other)),
        }
    }
}

impl fmt::Display for PropValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropValue::Bool(b) => write!(f, "{b}"),
            PropValue::Int(i) => write!(f, "{i}"),
            PropValue::Float(x) => write!(f, "{x:?}"),
            PropValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for PropValue {
    fn from(s: &str) -> Self {
        PropValue::Str(s.to_string())
    }
}

impl From<String> for PropValue {
    fn from(s: String) -> Self {
        PropValue::Str(s)
    }
}

impl From<i64> for PropValue {
    fn from(i: i64) -> Self {
        PropValue::Int(i)
    }
}

impl From<bool> for PropValue {
    fn from(b: bool) -> Self {
        PropValue::Bool(b)
    }
}

impl TryFrom<serde_json::Value> for PropValue {
    type Error = GraphError;

    fn try_from(value: serde_json::Value) -> Result<Self, Self::Error> {
        use serde_json::Value;
        match value {
            Value::Bool(b) => Ok(PropValue::Bool(b)),
            Value::String(s) => Ok(PropValue::Str(s)),
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(PropValue::Int(i))
                } else if let Some(f) = n.as_f64() {
                    Ok(PropValue::Float(f))
                } else {
                    Err(GraphError::InvalidPropertyValue(format!("number out of range: {n}")))
                }
            }
            other => Err(GraphError::InvalidPropertyValue(format!(
                "expected a scalar, got {other}"
            ))),
        }
    }
}

/// Converts an arbitrary JSON object into scalar properties.
pub fn properties_from_json(
    map: serde_json::Map<String, serde_json::Value>,
) -> Result<Properties, GraphError> {
    map.into_iter()
        .map(|(k, v)| PropValue::try_from(v).map(|v| (k, v)))
        .collect()
}

pub(crate) fn check_properties(props: &Properties) -> Result<(), GraphError> {
    for (key, value) in props {
        if key.is_empty() {
            return Err(GraphError::InvalidPropertyValue("empty property key".into()));
        }
        if let PropValue::Float(f) = value {
            if !f.is_finite() {
                return Err(GraphError::InvalidPropertyValue(format!(
                    "property {key:?} is not a finite number"
                )));
            }
        }
    }
    Ok(())
}

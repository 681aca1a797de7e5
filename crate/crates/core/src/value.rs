//! Runtime values flowing through relations, with SQL-compatible comparison
//! semantics.
//!
//! Three comparison flavors exist because SQL uses three: predicate
//! comparisons follow three-valued logic with binary text collation,
//! `ORDER BY` uses a total order (nulls first, case-folded text), and
//! grouping/dedup uses exact keys with numeric canonicalization so that
//! `2` and `2.0` land in the same group.

use std::cmp::Ordering;
use std::fmt;

/// A single cell value. `Int` and `Float` are both "number" simple-typed;
/// they compare numerically against each other.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Null,
    Int(i64),
    Float(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(f) => Some(*f),
            _ => None,
        }
    }

    /// Three-valued equality: `None` when either side is NULL.
    /// Numbers compare numerically across `Int`/`Float`; text compares
    /// byte-exact (binary collation); number-vs-text is a definite false.
    pub fn sql_eq(&self, other: &Value) -> Option<bool> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Text(a), Value::Text(b)) => Some(a == b),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Some(x == y),
                _ => Some(false),
            },
        }
    }

    /// Three-valued ordering for `<`, `<=`, `>`, `>=`. `None` when either
    /// side is NULL. Cross-class comparisons order numbers before text,
    /// mirroring SQLite storage-class ordering.
    pub fn sql_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Null, _) | (_, Value::Null) => None,
            (Value::Text(a), Value::Text(b)) => Some(a.cmp(b)),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Some(x.partial_cmp(&y).unwrap_or(Ordering::Equal)),
                (Some(_), None) => Some(Ordering::Less),
                (None, Some(_)) => Some(Ordering::Greater),
                (None, None) => unreachable!("text/text handled above"),
            },
        }
    }

    /// Total order used by `ORDER BY`: NULL first, then numbers numerically,
    /// then text compared by its case-folded form (binary collation of the
    /// canonical lowercase).
    pub fn order_cmp(&self, other: &Value) -> Ordering {
        use Value::*;
        match (self, other) {
            (Null, Null) => Ordering::Equal,
            (Null, _) => Ordering::Less,
            (_, Null) => Ordering::Greater,
            (Text(a), Text(b)) => a.to_lowercase().cmp(&b.to_lowercase()),
            (Text(_), _) => Ordering::Greater,
            (_, Text(_)) => Ordering::Less,
            (a, b) => {
                let (x, y) = (a.as_f64().unwrap(), b.as_f64().unwrap());
                x.partial_cmp(&y).unwrap_or(Ordering::Equal)
            }
        }
    }

    /// SQL LIKE with `%` and `_`, case-insensitive (the embedded backend's
    /// default LIKE behavior). `None` when either side is NULL.
    pub fn sql_like(&self, pattern: &Value) -> Option<bool> {
        let text = match self {
            Value::Null => return None,
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => fmt_float(*f),
        };
        let pat = match pattern {
            Value::Null => return None,
            Value::Text(s) => s.clone(),
            Value::Int(i) => i.to_string(),
            Value::Float(f) => fmt_float(*f),
        };
        Some(like_match(
            &text.to_lowercase().chars().collect::<Vec<_>>(),
            &pat.to_lowercase().chars().collect::<Vec<_>>(),
        ))
    }

    /// Canonical key for grouping, DISTINCT, and bag comparison. Integral
    /// floats collapse onto integers so `2` and `2.0` share a group.
    pub fn canon(&self) -> CanonValue {
        match self {
            Value::Null => CanonValue::Null,
            Value::Int(i) => CanonValue::Int(*i),
            Value::Float(f) => {
                if f.fract() == 0.0 && f.abs() < (1i64 << 53) as f64 {
                    CanonValue::Int(*f as i64)
                } else {
                    CanonValue::Float(f.to_bits())
                }
            }
            Value::Text(s) => CanonValue::Text(s.clone()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => write!(f, ""),
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{}", fmt_float(*x)),
            Value::Text(s) => write!(f, "{s}"),
        }
    }
}

/// Exact, hashable, orderable key form of a [`Value`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CanonValue {
    Null,
    Int(i64),
    Float(u64),
    Text(String),
}

fn fmt_float(f: f64) -> String {
    if f.fract() == 0.0 && f.abs() < 1e15 {
        format!("{f:.1}")
    } else {
        format!("{f}")
    }
}

fn like_match(text: &[char], pat: &[char]) -> bool {
    match pat.first() {
        None => text.is_empty(),
        Some('%') => {
            if like_match(text, &pat[1..]) {
                return true;
            }
            !text.is_empty() && like_match(&text[1..], pat)
        }
        Some('_') => !text.is_empty() && like_match(&text[1..], &pat[1..]),
        Some(c) => text.first() == Some(c) && like_match(&text[1..], &pat[1..]),
    }
}

/// Three-valued AND.
pub fn and3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(false), _) | (_, Some(false)) => Some(false),
        (Some(true), Some(true)) => Some(true),
        _ => None,
    }
}

/// Three-valued OR.
pub fn or3(a: Option<bool>, b: Option<bool>) -> Option<bool> {
    match (a, b) {
        (Some(true), _) | (_, Some(true)) => Some(true),
        (Some(false), Some(false)) => Some(false),
        _ => None,
    }
}

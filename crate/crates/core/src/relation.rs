//! In-memory bag of rows with a named, typed column header — the
//! interpreter's currency.

use crate::schema::SimpleType;
use crate::value::Value;

#[derive(Debug, Clone, PartialEq)]
pub struct RelColumn {
    pub name: String,
    pub ty: SimpleType,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub columns: Vec<RelColumn>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(columns: Vec<(String, SimpleType)>) -> Self {
        Relation {
            columns: columns
                .into_iter()
                .map(|(name, ty)| RelColumn { name, ty })
                .collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_rows(mut self, rows: Vec<Vec<Value>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == self.columns.len()));
        self.rows = rows;
        self
    }

    /// Case-insensitive column position lookup.
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns
            .iter()
            .position(|c| c.name.eq_ignore_ascii_case(name))
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    /// Render as RFC 4180 CSV with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = csv::WriterBuilder::new().from_writer(Vec::new());
        out.write_record(self.columns.iter().map(|c| c.name.as_str()))
            .expect("csv header");
        for row in &self.rows {
            out.write_record(row.iter().map(|v| v.to_string()))
                .expect("csv row");
        }
        String::from_utf8(out.into_inner().expect("csv flush")).expect("csv utf8")
    }

    /// Bag equality: same header width and the same multiset of rows under
    /// exact value keys. Column names are not compared.
    pub fn bag_eq(&self, other: &Relation) -> bool {
        if self.arity() != other.arity() || self.rows.len() != other.rows.len() {
            return false;
        }
        let key = |rows: &[Vec<Value>]| {
            let mut keys: Vec<Vec<crate::value::CanonValue>> = rows
                .iter()
                .map(|r| r.iter().map(|v| v.canon()).collect())
                .collect();
            keys.sort();
            keys
        };
        key(&self.rows) == key(&other.rows)
    }
}

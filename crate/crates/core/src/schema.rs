//! Schema catalog: tables, columns, simplified types, and key declarations.
//!
//! Identifier matching is case-insensitive everywhere; the original case is
//! preserved for emission.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The closed set of simplified column types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimpleType {
    Text,
    Number,
    Date,
    Other,
}

impl SimpleType {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimpleType::Text => "text",
            SimpleType::Number => "number",
            SimpleType::Date => "date",
            SimpleType::Other => "other",
        }
    }
}

impl std::fmt::Display for SimpleType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    #[serde(rename = "type")]
    pub simple_type: SimpleType,
    /// Sampled cell values used by the rich schema encoding; optional.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForeignKey {
    pub column: String,
    pub ref_table: String,
    pub ref_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    #[serde(default)]
    pub primary_key: Vec<String>,
    #[serde(default)]
    pub foreign_keys: Vec<ForeignKey>,
}

impl TableDef {
    /// Case-insensitive column lookup.
    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.columns
            .iter()
            .find(|c| c.name.eq_ignore_ascii_case(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaCatalog {
    pub schema_id: String,
    pub tables: Vec<TableDef>,
}

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("duplicate table name `{0}`")]
    DuplicateTable(String),
    #[error("duplicate column `{column}` in table `{table}`")]
    DuplicateColumn { table: String, column: String },
    #[error("primary key column `{column}` not declared in table `{table}`")]
    UnknownPrimaryKeyColumn { table: String, column: String },
    #[error("foreign key in `{table}` references unknown {what} `{name}`")]
    DanglingForeignKey {
        table: String,
        what: &'static str,
        name: String,
    },
    #[error("schema JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SchemaCatalog {
    pub fn new(schema_id: impl Into<String>, tables: Vec<TableDef>) -> Result<Self, SchemaError> {
        let catalog = SchemaCatalog {
            schema_id: schema_id.into(),
            tables,
        };
        catalog.check()?;
        Ok(catalog)
    }

    /// Parse from the JSON document format
    /// `{ "schema_id": ..., "tables": [ { "name", "columns", "primary_key", "foreign_keys" } ] }`.
    pub fn from_json(text: &str) -> Result<Self, SchemaError> {
        let catalog: SchemaCatalog = serde_json::from_str(text)?;
        catalog.check()?;
        Ok(catalog)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self, SchemaError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalog serializes")
    }

    /// Case-insensitive table lookup.
    pub fn table(&self, name: &str) -> Option<&TableDef> {
        self.tables
            .iter()
            .find(|t| t.name.eq_ignore_ascii_case(name))
    }

    fn check(&self) -> Result<(), SchemaError> {
        let mut seen = std::collections::HashSet::new();
        for table in &self.tables {
            if !seen.insert(table.name.to_lowercase()) {
                return Err(SchemaError::DuplicateTable(table.name.clone()));
            }
            let mut cols = std::collections::HashSet::new();
            for col in &table.columns {
                if !cols.insert(col.name.to_lowercase()) {
                    return Err(SchemaError::DuplicateColumn {
                        table: table.name.clone(),
                        column: col.name.clone(),
                    });
                }
            }
            for pk in &table.primary_key {
                if table.column(pk).is_none() {
                    return Err(SchemaError::UnknownPrimaryKeyColumn {
                        table: table.name.clone(),
                        column: pk.clone(),
                    });
                }
            }
        }
        for table in &self.tables {
            for fk in &table.foreign_keys {
                if table.column(&fk.column).is_none() {
                    return Err(SchemaError::DanglingForeignKey {
                        table: table.name.clone(),
                        what: "local column",
                        name: fk.column.clone(),
                    });
                }
                match self.table(&fk.ref_table) {
                    None => {
                        return Err(SchemaError::DanglingForeignKey {
                            table: table.name.clone(),
                            what: "table",
                            name: fk.ref_table.clone(),
                        })
                    }
                    Some(target) => {
                        if target.column(&fk.ref_column).is_none() {
                            return Err(SchemaError::DanglingForeignKey {
                                table: table.name.clone(),
                                what: "column",
                                name: format!("{}.{}", fk.ref_table, fk.ref_column),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// True when (a, b) or (b, a) is a declared primary/foreign key pair.
    pub fn is_key_pair(&self, ta: &str, ca: &str, tb: &str, cb: &str) -> bool {
        let fk_covers = |t: &str, c: &str, rt: &str, rc: &str| {
            self.table(t).is_some_and(|td| {
                td.foreign_keys.iter().any(|fk| {
                    fk.column.eq_ignore_ascii_case(c)
                        && fk.ref_table.eq_ignore_ascii_case(rt)
                        && fk.ref_column.eq_ignore_ascii_case(rc)
                })
            })
        };
        fk_covers(ta, ca, tb, cb) || fk_covers(tb, cb, ta, ca)
    }
}

//! Embedded reference backend over SQLite. Loaded from the same in-memory
//! [`Database`] the interpreter evaluates against, so both oracles see
//! identical data.

use rusqlite::types::ValueRef;
use rusqlite::Connection;

use super::{BackendError, DatabaseBackend, Dialect, ResultSet};
use crate::interp::Database;
use crate::schema::SimpleType;
use crate::value::Value;

pub struct SqliteBackend {
    conn: Connection,
}

impl SqliteBackend {
    pub fn in_memory() -> Result<Self, BackendError> {
        let conn = Connection::open_in_memory().map_err(sql_err)?;
        Ok(SqliteBackend { conn })
    }

    /// In-memory backend preloaded with a database.
    pub fn with_database(db: &Database) -> Result<Self, BackendError> {
        let mut backend = Self::in_memory()?;
        backend.load(db)?;
        Ok(backend)
    }
}

fn sql_err(e: rusqlite::Error) -> BackendError {
    BackendError::new(e.to_string())
}

fn quoted(name: &str) -> String {
    format!("\"{}\"", name.replace('"', "\"\""))
}

fn affinity(ty: SimpleType) -> &'static str {
    match ty {
        // NUMERIC affinity keeps integers integral and reals real.
        SimpleType::Number => "NUMERIC",
        _ => "TEXT",
    }
}

impl DatabaseBackend for SqliteBackend {
    fn dialect(&self) -> Dialect {
        Dialect::ansi()
    }

    fn load(&mut self, db: &Database) -> Result<(), BackendError> {
        let tx = self.conn.transaction().map_err(sql_err)?;
        for (name, relation) in db.tables() {
            tx.execute_batch(&format!("DROP TABLE IF EXISTS {}", quoted(name)))
                .map_err(sql_err)?;
            let cols = relation
                .columns
                .iter()
                .map(|c| format!("{} {}", quoted(&c.name), affinity(c.ty)))
                .collect::<Vec<_>>()
                .join(", ");
            tx.execute_batch(&format!("CREATE TABLE {} ({cols})", quoted(name)))
                .map_err(sql_err)?;
            if relation.rows.is_empty() {
                continue;
            }
            let placeholders = vec!["?"; relation.arity()].join(", ");
            let mut stmt = tx
                .prepare(&format!(
                    "INSERT INTO {} VALUES ({placeholders})",
                    quoted(name)
                ))
                .map_err(sql_err)?;
            for row in &relation.rows {
                let params: Vec<rusqlite::types::Value> =
                    row.iter().map(to_sqlite).collect();
                stmt.execute(rusqlite::params_from_iter(params))
                    .map_err(sql_err)?;
            }
        }
        tx.commit().map_err(sql_err)
    }

    fn execute(&mut self, sql: &str) -> Result<ResultSet, BackendError> {
        let mut stmt = self.conn.prepare(sql).map_err(sql_err)?;
        let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let n = columns.len();
        let mut rows = Vec::new();
        let mut cursor = stmt.query([]).map_err(sql_err)?;
        while let Some(row) = cursor.next().map_err(sql_err)? {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                out.push(from_sqlite(row.get_ref(i).map_err(sql_err)?));
            }
            rows.push(out);
        }
        Ok(ResultSet::new(columns, rows, false))
    }

    fn close(&mut self) -> Result<(), BackendError> {
        Ok(())
    }
}

fn to_sqlite(v: &Value) -> rusqlite::types::Value {
    match v {
        Value::Null => rusqlite::types::Value::Null,
        Value::Int(i) => rusqlite::types::Value::Integer(*i),
        Value::Float(f) => rusqlite::types::Value::Real(*f),
        Value::Text(s) => rusqlite::types::Value::Text(s.clone()),
    }
}

fn from_sqlite(v: ValueRef<'_>) -> Value {
    match v {
        ValueRef::Null => Value::Null,
        ValueRef::Integer(i) => Value::Int(i),
        ValueRef::Real(f) => Value::Float(f),
        ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into_owned()),
        ValueRef::Blob(b) => Value::Text(String::from_utf8_lossy(b).into_owned()),
    }
}

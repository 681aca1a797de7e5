//! Compilation of QPL to Common Table Expression SQL, execution through a
//! pluggable backend, and execution-accuracy equivalence of result sets.
//!
//! Every step becomes one named CTE clause (`Scan_1`, `Aggregate_2`, ...);
//! the final select reads the root clause. Ordering is only guaranteed at
//! an ordered root, where the emitted ORDER BY carries the declared keys
//! plus all output columns as a deterministic tiebreak (matching the
//! interpreter). Every ORDER BY key takes a case-insensitive collation;
//! collations are ignored for non-text values, so this is uniform.

mod sqlite;

pub use sqlite::SqliteBackend;

use std::fmt;

use thiserror::Error;

use crate::ast::{
    plan_root, AggArg, ColumnRef, Literal, OpKind, Operand, OutputExpr, Predicate,
    QplNode, QplPlan, SortDir, StepId,
};
use crate::interp::Database;
use crate::relation::Relation;
use crate::schema::SchemaCatalog;
use crate::value::Value;

/// Default relative tolerance for numeric result comparison.
pub const EPSILON: f64 = 1e-6;

/// Capability descriptor for a SQL dialect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dialect {
    pub name: String,
    /// `TOP k WITH TIES` support (T-SQL style).
    pub top_with_ties: bool,
    /// Window functions (`RANK() OVER`).
    pub window_functions: bool,
}

impl Dialect {
    /// The embedded ANSI-style default: LIMIT for top-k, window functions
    /// for ties.
    pub fn ansi() -> Self {
        Dialect {
            name: "ansi".into(),
            top_with_ties: false,
            window_functions: true,
        }
    }

    /// A deliberately constrained dialect with neither ties mechanism.
    pub fn no_window() -> Self {
        Dialect {
            name: "no-window".into(),
            top_with_ties: false,
            window_functions: false,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "ansi" | "sqlite" | "default" => Some(Dialect::ansi()),
            "no-window" => Some(Dialect::no_window()),
            "tsql" => Some(Dialect {
                name: "tsql".into(),
                top_with_ties: true,
                window_functions: true,
            }),
            _ => None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CompileError {
    #[error("step {step}: WithTies requires TOP ... WITH TIES or window functions; dialect `{dialect}` has neither")]
    UnsupportedDialectFeature { step: StepId, dialect: String },
    #[error("table `{0}` is not in the schema")]
    UnknownTable(String),
    #[error(transparent)]
    Structure(#[from] crate::ast::StructureError),
}

/// A compiled CTE program: one clause per plan step, in step order.
#[derive(Debug, Clone, PartialEq)]
pub struct CteProgram {
    pub clauses: Vec<(String, String)>,
    pub final_select: String,
    /// The plan root was Sort/TopSort: the final select's row order is
    /// meaningful.
    pub ordered: bool,
}

impl CteProgram {
    /// Render as executable SQL: `WITH ` prefix, clauses joined with `,\n`.
    pub fn to_sql(&self) -> String {
        let clauses = self
            .clauses
            .iter()
            .map(|(name, body)| format!("{name} AS (\n    {body}\n)"))
            .collect::<Vec<_>>()
            .join(",\n");
        format!("WITH\n{clauses}\n{}", self.final_select)
    }
}

impl fmt::Display for CteProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sql())
    }
}

fn clause_name(op: OpKind, step: StepId) -> String {
    format!("{}_{}", op.name(), step.0)
}

/// Quote an identifier only when necessary (SQL keyword or non-word
/// characters); plans written against sane schemas emit bare names.
fn ident(name: &str) -> String {
    const KEYWORDS: &[&str] = &[
        "select", "from", "where", "group", "order", "by", "join", "on", "as", "union", "all",
        "limit", "and", "or", "not", "table", "index", "primary", "foreign", "key", "references",
        "distinct", "exists", "case", "when", "then", "else", "end", "left", "right", "inner",
        "outer", "cross", "natural", "using", "having", "between", "like", "is", "null", "in",
        "to", "set", "values", "default", "check", "unique", "constraint", "desc", "asc", "with",
        "offset", "top",
    ];
    let word = name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_')
        && name
            .chars()
            .next()
            .is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    if word && !KEYWORDS.contains(&name.to_lowercase().as_str()) {
        name.to_string()
    } else {
        format!("\"{}\"", name.replace('"', "\"\""))
    }
}

fn literal_sql(lit: &Literal) -> String {
    lit.to_string()
}

/// How predicate column references render in the current clause.
enum PredSql<'a> {
    /// Scan/unary: bare column names.
    Unqualified,
    /// Binary: `#n.col` maps to `<cte>.col`; bare names bind by unique
    /// membership in one side's output list.
    Binary {
        left: (StepId, &'a str, &'a [String]),
        right: (StepId, &'a str, &'a [String]),
    },
}

fn column_sql(c: &ColumnRef, scope: &PredSql) -> String {
    match scope {
        PredSql::Unqualified => ident(&c.name),
        PredSql::Binary { left, right } => match c.qualifier {
            Some(q) if q == left.0 => format!("{}.{}", left.1, ident(&c.name)),
            Some(q) if q == right.0 => format!("{}.{}", right.1, ident(&c.name)),
            Some(_) => ident(&c.name),
            None => {
                let in_left = left.2.iter().any(|n| n.eq_ignore_ascii_case(&c.name));
                let in_right = right.2.iter().any(|n| n.eq_ignore_ascii_case(&c.name));
                match (in_left, in_right) {
                    (true, false) => format!("{}.{}", left.1, ident(&c.name)),
                    (false, true) => format!("{}.{}", right.1, ident(&c.name)),
                    _ => ident(&c.name),
                }
            }
        },
    }
}

fn operand_sql(operand: &Operand, scope: &PredSql) -> String {
    match operand {
        Operand::Column(c) => column_sql(c, scope),
        Operand::Literal(lit) => literal_sql(lit),
    }
}

fn comparison_sql(cmp: &crate::ast::Comparison, scope: &PredSql) -> String {
    let lhs = operand_sql(&cmp.lhs, scope);
    match &cmp.rhs {
        Some(rhs) => format!(
            "{lhs} {} {}",
            cmp.op.symbol(),
            operand_sql(rhs, scope)
        ),
        None => format!("{lhs} {}", cmp.op.symbol()),
    }
}

/// QPL connectives chain left-associatively with no AND/OR precedence;
/// parenthesize when the chain mixes them so SQL agrees.
fn predicate_sql(pred: &Predicate, scope: &PredSql) -> String {
    let mixed = pred.rest.windows(2).any(|w| w[0].0 != w[1].0);
    let mut sql = comparison_sql(&pred.first, scope);
    for (conn, cmp) in &pred.rest {
        let rhs = comparison_sql(cmp, scope);
        sql = if mixed {
            format!("({sql}) {} {rhs}", conn.keyword())
        } else {
            format!("{sql} {} {rhs}", conn.keyword())
        };
    }
    sql
}

fn output_item_sql(expr: &OutputExpr) -> String {
    match expr {
        OutputExpr::Column(c) => ident(&c.name),
        OutputExpr::Aggregate {
            func,
            arg,
            distinct,
            alias,
        } => {
            let arg = match arg {
                AggArg::Star => "*".to_string(),
                AggArg::Column(name) => ident(name),
            };
            if *distinct {
                format!("{}(DISTINCT {arg}) AS {}", func.name(), ident(alias))
            } else {
                format!("{}({arg}) AS {}", func.name(), ident(alias))
            }
        }
    }
}

/// ORDER BY terms: declared keys first, then all output columns ascending
/// as a deterministic tiebreak. Keys collate case-insensitively (ignored
/// for non-text values).
fn order_terms(node: &QplNode) -> Vec<String> {
    let mut terms = Vec::new();
    for (key, dir) in node.order_by.as_deref().unwrap_or(&[]) {
        terms.push(format!(
            "{} COLLATE NOCASE {}",
            ident(key),
            match dir {
                SortDir::Asc => "ASC",
                SortDir::Desc => "DESC",
            }
        ));
    }
    for expr in &node.output {
        if let OutputExpr::Column(c) = expr {
            terms.push(format!("{} COLLATE NOCASE ASC", ident(&c.name)));
        }
    }
    terms
}

/// A Sort/TopSort select over `input`: projection, deterministic ORDER BY,
/// and the dialect's top-k mechanism.
fn sorted_select(
    input: &str,
    node: &QplNode,
    step: StepId,
    dialect: &Dialect,
) -> Result<String, CompileError> {
    let cols = node
        .output
        .iter()
        .map(output_item_sql)
        .collect::<Vec<_>>()
        .join(", ");
    let order = order_terms(node).join(", ");
    match (node.op, node.rows, node.with_ties == Some(true)) {
        (OpKind::Sort, _, _) => Ok(format!("SELECT {cols} FROM {input} ORDER BY {order}")),
        (OpKind::TopSort, Some(k), false) => Ok(format!(
            "SELECT {cols} FROM {input} ORDER BY {order} LIMIT {k}"
        )),
        (OpKind::TopSort, Some(k), true) => {
            if dialect.top_with_ties {
                Ok(format!(
                    "SELECT TOP {k} WITH TIES {cols} FROM {input} ORDER BY {order}"
                ))
            } else if dialect.window_functions {
                let rank_order = node
                    .order_by
                    .as_deref()
                    .unwrap_or(&[])
                    .iter()
                    .map(|(key, dir)| {
                        format!(
                            "{} COLLATE NOCASE {}",
                            ident(key),
                            match dir {
                                SortDir::Asc => "ASC",
                                SortDir::Desc => "DESC",
                            }
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(", ");
                Ok(format!(
                    "SELECT {cols} FROM (SELECT *, RANK() OVER (ORDER BY {rank_order}) AS qpl_rank_ FROM {input}) WHERE qpl_rank_ <= {k} ORDER BY {order}"
                ))
            } else {
                Err(CompileError::UnsupportedDialectFeature {
                    step,
                    dialect: dialect.name.clone(),
                })
            }
        }
        _ => unreachable!("sorted_select only for Sort/TopSort"),
    }
}

/// Compile a validated plan into one CTE clause per step.
pub fn compile_to_cte(
    plan: &QplPlan,
    schema: &SchemaCatalog,
    dialect: &Dialect,
) -> Result<CteProgram, CompileError> {
    let root = plan_root(plan)?;
    let mut clauses = Vec::with_capacity(plan.len());
    for line in plan.lines() {
        let body = clause_sql(plan, line.step, &line.node, schema, dialect)?;
        clauses.push((clause_name(line.node.op, line.step), body));
    }
    let root_node = plan.node(root).expect("root exists");
    let root_clause = clause_name(root_node.op, root);
    let ordered = matches!(root_node.op, OpKind::Sort | OpKind::TopSort);
    let final_select = if ordered {
        let out_names = root_node.output_names();
        let keys_in_output = root_node
            .order_by
            .as_deref()
            .unwrap_or(&[])
            .iter()
            .all(|(key, _)| out_names.iter().any(|n| n.eq_ignore_ascii_case(key)));
        if keys_in_output {
            format!(
                "SELECT * FROM {root_clause} ORDER BY {}",
                order_terms(root_node).join(", ")
            )
        } else {
            // A sort key that is not projected cannot be re-ordered on
            // after the clause; derive the final select from the root's
            // input instead.
            let input = plan.node(root_node.inputs[0]).expect("input exists");
            let input_clause = clause_name(input.op, root_node.inputs[0]);
            sorted_select(&input_clause, root_node, root, dialect)?
        }
    } else {
        format!("SELECT * FROM {root_clause}")
    };
    Ok(CteProgram {
        clauses,
        final_select,
        ordered,
    })
}

fn clause_sql(
    plan: &QplPlan,
    step: StepId,
    node: &QplNode,
    schema: &SchemaCatalog,
    dialect: &Dialect,
) -> Result<String, CompileError> {
    let cte = |k: StepId| clause_name(plan.node(k).expect("input exists").op, k);
    let distinct = if node.distinct == Some(true) {
        "DISTINCT "
    } else {
        ""
    };
    let plain_cols = || {
        node.output
            .iter()
            .map(output_item_sql)
            .collect::<Vec<_>>()
            .join(", ")
    };
    match node.op {
        OpKind::Scan => {
            let table = node.table_name.as_deref().expect("scan has a table");
            if schema.table(table).is_none() {
                return Err(CompileError::UnknownTable(table.to_string()));
            }
            let mut sql = format!("SELECT {distinct}{} FROM {}", plain_cols(), ident(table));
            if let Some(pred) = &node.predicate {
                sql.push_str(&format!(
                    " WHERE {}",
                    predicate_sql(pred, &PredSql::Unqualified)
                ));
            }
            Ok(sql)
        }
        OpKind::Filter => {
            let input = cte(node.inputs[0]);
            let pred = node.predicate.as_ref().expect("filter has a predicate");
            Ok(format!(
                "SELECT {distinct}{} FROM {input} WHERE {}",
                plain_cols(),
                predicate_sql(pred, &PredSql::Unqualified)
            ))
        }
        OpKind::Aggregate => {
            let input = cte(node.inputs[0]);
            let mut sql = format!("SELECT {} FROM {input}", plain_cols());
            if let Some(group_by) = &node.group_by {
                let keys = group_by
                    .iter()
                    .map(|g| ident(g))
                    .collect::<Vec<_>>()
                    .join(", ");
                sql.push_str(&format!(" GROUP BY {keys}"));
            }
            Ok(sql)
        }
        OpKind::Sort | OpKind::TopSort => {
            sorted_select(&cte(node.inputs[0]), node, step, dialect)
        }
        OpKind::Join => {
            let (l, r) = (node.inputs[0], node.inputs[1]);
            let (lc, rc) = (cte(l), cte(r));
            let left_names = plan.node(l).expect("left exists").output_names();
            let right_names = plan.node(r).expect("right exists").output_names();
            // Clause names embed step numbers, so even a self-join of the
            // same table scans two distinct CTEs.
            let scope = PredSql::Binary {
                left: (l, &lc, &left_names),
                right: (r, &rc, &right_names),
            };
            let cols = binary_output_sql(node, &scope);
            Ok(match &node.predicate {
                Some(pred) => format!(
                    "SELECT {distinct}{cols} FROM {lc} JOIN {rc} ON {}",
                    predicate_sql(pred, &scope)
                ),
                None => format!("SELECT {distinct}{cols} FROM {lc} CROSS JOIN {rc}"),
            })
        }
        OpKind::Except | OpKind::Intersect => {
            let (l, r) = (node.inputs[0], node.inputs[1]);
            let (lc, rc) = (cte(l), cte(r));
            let left_names = plan.node(l).expect("left exists").output_names();
            let right_names = plan.node(r).expect("right exists").output_names();
            let scope = PredSql::Binary {
                left: (l, &lc, &left_names),
                right: (r, &rc, &right_names),
            };
            let cols = binary_output_sql(node, &scope);
            let condition = match &node.predicate {
                Some(pred) => predicate_sql(pred, &scope),
                None => {
                    // Default equality over identically named columns.
                    let shared: Vec<String> = left_names
                        .iter()
                        .filter(|n| {
                            right_names.iter().any(|m| m.eq_ignore_ascii_case(n))
                        })
                        .map(|n| format!("{lc}.{col} = {rc}.{col}", col = ident(n)))
                        .collect();
                    if shared.is_empty() {
                        "1 = 1".to_string()
                    } else {
                        shared.join(" AND ")
                    }
                }
            };
            let exists = if node.op == OpKind::Intersect {
                "EXISTS"
            } else {
                "NOT EXISTS"
            };
            Ok(format!(
                "SELECT {cols} FROM {lc} WHERE {exists} (SELECT 1 FROM {rc} WHERE {condition})"
            ))
        }
        OpKind::Union => {
            let (l, r) = (node.inputs[0], node.inputs[1]);
            let (lc, rc) = (cte(l), cte(r));
            let left_names = plan.node(l).expect("left exists").output_names();
            let right_names = plan.node(r).expect("right exists").output_names();
            // Each qualified output resolves to a position in its named
            // input; the same position applies to the other side.
            let mut positions = Vec::new();
            for expr in &node.output {
                let OutputExpr::Column(c) = expr else { continue };
                let names = if c.qualifier == Some(l) {
                    &left_names
                } else {
                    &right_names
                };
                let pos = names
                    .iter()
                    .position(|n| n.eq_ignore_ascii_case(&c.name))
                    .unwrap_or(0);
                positions.push(pos);
            }
            let out_names = node.output_names();
            let left_sel = positions
                .iter()
                .zip(&out_names)
                .map(|(&p, name)| {
                    format!("{} AS {}", ident(&left_names[p]), ident(name))
                })
                .collect::<Vec<_>>()
                .join(", ");
            let right_sel = positions
                .iter()
                .map(|&p| ident(&right_names[p]))
                .collect::<Vec<_>>()
                .join(", ");
            Ok(format!(
                "SELECT {left_sel} FROM {lc} UNION ALL SELECT {right_sel} FROM {rc}"
            ))
        }
    }
}

/// Binary outputs always alias to their resolved (collision-renamed) name.
fn binary_output_sql(node: &QplNode, scope: &PredSql) -> String {
    let names = node.output_names();
    node.output
        .iter()
        .zip(&names)
        .map(|(expr, name)| {
            let OutputExpr::Column(c) = expr else {
                return ident(name);
            };
            format!("{} AS {}", column_sql(c, scope), ident(name))
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// One executed result set, normalized: integral floats collapse to
/// integers and text loses trailing spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub ordered: bool,
}

impl ResultSet {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<Value>>, ordered: bool) -> Self {
        let rows = rows
            .into_iter()
            .map(|row| row.into_iter().map(normalize_value).collect())
            .collect();
        ResultSet {
            columns,
            rows,
            ordered,
        }
    }

    pub fn from_relation(rel: &Relation, ordered: bool) -> Self {
        ResultSet::new(
            rel.columns.iter().map(|c| c.name.clone()).collect(),
            rel.rows.clone(),
            ordered,
        )
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn normalize_value(v: Value) -> Value {
    match v {
        Value::Float(f) if f.fract() == 0.0 && f.abs() < (1i64 << 53) as f64 => {
            Value::Int(f as i64)
        }
        Value::Text(s) => Value::Text(s.trim_end_matches(' ').to_string()),
        other => other,
    }
}

#[derive(Debug, Error)]
#[error("backend error{}: {message}", clause.as_ref().map(|c| format!(" in {c}")).unwrap_or_default())]
pub struct BackendError {
    pub message: String,
    /// Name of the failing CTE clause, when it could be located.
    pub clause: Option<String>,
}

impl BackendError {
    pub fn new(message: impl Into<String>) -> Self {
        BackendError {
            message: message.into(),
            clause: None,
        }
    }
}

/// Execution backend contract. Instances are single-consumer; open one per
/// worker for parallel evaluation.
pub trait DatabaseBackend {
    fn dialect(&self) -> Dialect;
    /// Load the schema's tables and rows; replaces existing content.
    fn load(&mut self, db: &Database) -> Result<(), BackendError>;
    /// Run one read-only statement. Row order is as returned by the
    /// engine; the caller owns the ordered flag.
    fn execute(&mut self, sql: &str) -> Result<ResultSet, BackendError>;
    fn close(&mut self) -> Result<(), BackendError>;
}

/// Execute a compiled program, tagging the result with the program's
/// ordered flag. Backend failures are attributed to the first failing
/// clause by probing clause prefixes.
pub fn execute(
    program: &CteProgram,
    backend: &mut dyn DatabaseBackend,
) -> Result<ResultSet, BackendError> {
    match backend.execute(&program.to_sql()) {
        Ok(mut rs) => {
            rs.ordered = program.ordered;
            Ok(rs)
        }
        Err(err) => {
            for k in 0..program.clauses.len() {
                let prefix = CteProgram {
                    clauses: program.clauses[..=k].to_vec(),
                    final_select: format!("SELECT * FROM {} LIMIT 0", program.clauses[k].0),
                    ordered: false,
                };
                if backend.execute(&prefix.to_sql()).is_err() {
                    return Err(BackendError {
                        message: err.message,
                        clause: Some(program.clauses[k].0.clone()),
                    });
                }
            }
            Err(err)
        }
    }
}

/// Are two result sets equivalent under execution-accuracy rules? Rows
/// compare as bags (column names ignored, positional) with numeric values
/// within relative `epsilon`; as sequences when both sides are ordered.
pub fn results_equivalent(a: &ResultSet, b: &ResultSet, epsilon: f64) -> bool {
    if a.columns.len() != b.columns.len() || a.rows.len() != b.rows.len() {
        return false;
    }
    let row_eq = |x: &Vec<Value>, y: &Vec<Value>| {
        x.iter().zip(y.iter()).all(|(a, b)| value_eq(a, b, epsilon))
    };
    if a.ordered && b.ordered {
        a.rows.iter().zip(b.rows.iter()).all(|(x, y)| row_eq(x, y))
    } else {
        let sorted = |rows: &[Vec<Value>]| {
            let mut rows: Vec<Vec<Value>> = rows.to_vec();
            rows.sort_by(|x, y| {
                let kx: Vec<_> = x.iter().map(|v| v.canon()).collect();
                let ky: Vec<_> = y.iter().map(|v| v.canon()).collect();
                kx.cmp(&ky)
            });
            rows
        };
        sorted(&a.rows)
            .iter()
            .zip(sorted(&b.rows).iter())
            .all(|(x, y)| row_eq(x, y))
    }
}

fn value_eq(a: &Value, b: &Value, epsilon: f64) -> bool {
    match (a, b) {
        (Value::Null, Value::Null) => true,
        (Value::Text(x), Value::Text(y)) => x == y,
        (a, b) => match (a.as_f64(), b.as_f64()) {
            (Some(x), Some(y)) => {
                if x == y {
                    true
                } else {
                    (x - y).abs() <= epsilon * x.abs().max(y.abs()).max(1.0)
                }
            }
            _ => false,
        },
    }
}

/// Outcome of comparing a predicted plan's execution against a gold SQL
/// query.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub matched: bool,
    /// The gold query returned zero rows: a match carries less evidence.
    pub empty_gold: bool,
    pub failure: Option<MatchFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MatchFailure {
    Compile(String),
    Backend {
        clause: Option<String>,
        message: String,
    },
    Mismatch,
}

/// Execution match: run the gold SQL and the compiled prediction on the
/// same backend and compare result sets. Backend and compile failures
/// count as non-matches with a recorded cause.
pub fn execution_match(
    gold_sql: &str,
    predicted: &QplPlan,
    backend: &mut dyn DatabaseBackend,
    schema: &SchemaCatalog,
) -> MatchOutcome {
    let gold = match backend.execute(gold_sql) {
        Ok(rs) => rs,
        Err(err) => {
            return MatchOutcome {
                matched: false,
                empty_gold: false,
                failure: Some(MatchFailure::Backend {
                    clause: err.clause,
                    message: format!("gold query failed: {}", err.message),
                }),
            }
        }
    };
    let empty_gold = gold.is_empty();
    let program = match compile_to_cte(predicted, schema, &backend.dialect()) {
        Ok(p) => p,
        Err(err) => {
            return MatchOutcome {
                matched: false,
                empty_gold,
                failure: Some(MatchFailure::Compile(err.to_string())),
            }
        }
    };
    let predicted_rs = match execute(&program, backend) {
        Ok(rs) => rs,
        Err(err) => {
            return MatchOutcome {
                matched: false,
                empty_gold,
                failure: Some(MatchFailure::Backend {
                    clause: err.clause,
                    message: err.message,
                }),
            }
        }
    };
    let matched = results_equivalent(&gold, &predicted_rs, EPSILON);
    MatchOutcome {
        matched,
        empty_gold,
        failure: (!matched).then_some(MatchFailure::Mismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::schema::{ColumnDef, SimpleType, TableDef};

    fn documents_schema() -> SchemaCatalog {
        SchemaCatalog::new(
            "documents_toy",
            vec![TableDef {
                name: "Documents".into(),
                columns: vec![
                    ColumnDef {
                        name: "Document_ID".into(),
                        simple_type: SimpleType::Number,
                        values: None,
                    },
                    ColumnDef {
                        name: "Template_ID".into(),
                        simple_type: SimpleType::Number,
                        values: None,
                    },
                ],
                primary_key: vec!["Document_ID".into()],
                foreign_keys: vec![],
            }],
        )
        .unwrap()
    }

    const DOCS_PLAN: &str = "\
#1 = Scan Table [ Documents ] Output [ Template_ID ]
#2 = Aggregate [ #1 ] GroupBy [ Template_ID ] Output [ COUNT(*) AS Count, Template_ID ]";

    fn ws_tokens(sql: &str) -> Vec<String> {
        sql.replace('(', " ( ")
            .replace(')', " ) ")
            .replace(',', " , ")
            .split_whitespace()
            .map(|s| s.to_string())
            .collect()
    }

    #[test]
    fn count_by_template_compiles_to_the_expected_cte() {
        let plan = parse(DOCS_PLAN).unwrap();
        let program = compile_to_cte(&plan, &documents_schema(), &Dialect::ansi()).unwrap();
        let expected = "\
WITH
Scan_1 AS (
    SELECT Template_ID FROM Documents
),
Aggregate_2 AS (
    SELECT COUNT(*) AS Count, Template_ID
    FROM Scan_1
    GROUP BY Template_ID
)
SELECT * FROM Aggregate_2";
        assert_eq!(ws_tokens(&program.to_sql()), ws_tokens(expected));
    }

    #[test]
    fn clause_names_follow_op_and_step() {
        let plan = parse(DOCS_PLAN).unwrap();
        let program = compile_to_cte(&plan, &documents_schema(), &Dialect::ansi()).unwrap();
        assert_eq!(program.clauses.len(), plan.len());
        assert_eq!(program.clauses[0].0, "Scan_1");
        assert_eq!(program.clauses[1].0, "Aggregate_2");
        assert_eq!(program.final_select, "SELECT * FROM Aggregate_2");
    }

    #[test]
    fn single_scan_program() {
        let schema = SchemaCatalog::new(
            "s",
            vec![TableDef {
                name: "country".into(),
                columns: vec![ColumnDef {
                    name: "Code".into(),
                    simple_type: SimpleType::Text,
                    values: None,
                }],
                primary_key: vec![],
                foreign_keys: vec![],
            }],
        )
        .unwrap();
        let plan = parse("#1 = Scan Table [ country ] Output [ Code ]").unwrap();
        let program = compile_to_cte(&plan, &schema, &Dialect::ansi()).unwrap();
        assert_eq!(
            ws_tokens(&program.to_sql()),
            ws_tokens("WITH Scan_1 AS (SELECT Code FROM country) SELECT * FROM Scan_1")
        );
    }

    #[test]
    fn with_ties_needs_a_capable_dialect() {
        let schema = documents_schema();
        let plan = parse(
            "#1 = Scan Table [ Documents ] Output [ Template_ID ]\n#2 = TopSort [ #1 ] Rows [ 2 ] OrderBy [ Template_ID DESC ] WithTies [ true ] Output [ Template_ID ]",
        )
        .unwrap();
        assert!(compile_to_cte(&plan, &schema, &Dialect::ansi()).is_ok());
        let err = compile_to_cte(&plan, &schema, &Dialect::no_window()).unwrap_err();
        assert!(matches!(
            err,
            CompileError::UnsupportedDialectFeature { .. }
        ));
        let tsql = compile_to_cte(&plan, &schema, &Dialect::by_name("tsql").unwrap()).unwrap();
        assert!(tsql.to_sql().contains("TOP 2 WITH TIES"));
    }

    #[test]
    fn results_equivalent_is_bag_based_when_unordered() {
        let a = ResultSet::new(
            vec!["a".into(), "b".into()],
            vec![
                vec![Value::Int(2), Value::Int(1)],
                vec![Value::Int(1), Value::Int(2)],
            ],
            false,
        );
        let b = ResultSet::new(
            vec!["x".into(), "y".into()],
            vec![
                vec![Value::Int(1), Value::Int(2)],
                vec![Value::Int(2), Value::Int(1)],
            ],
            false,
        );
        assert!(results_equivalent(&a, &b, 0.0));
    }

    #[test]
    fn tolerance_and_ordering_rules() {
        let a = ResultSet::new(vec!["v".into()], vec![vec![Value::Float(1.0000001)]], false);
        let b = ResultSet::new(vec!["v".into()], vec![vec![Value::Int(1)]], false);
        assert!(results_equivalent(&a, &b, 1e-6));
        assert!(!results_equivalent(&a, &b, 0.0));

        let x = ResultSet::new(
            vec!["t".into()],
            vec![
                vec![Value::Text("a".into())],
                vec![Value::Text("b".into())],
            ],
            true,
        );
        let y = ResultSet::new(
            vec!["t".into()],
            vec![
                vec![Value::Text("b".into())],
                vec![Value::Text("a".into())],
            ],
            true,
        );
        assert!(!results_equivalent(&x, &y, 0.0));
        let y_unordered = ResultSet { ordered: false, ..y.clone() };
        let x_unordered = ResultSet { ordered: false, ..x.clone() };
        assert!(results_equivalent(&x_unordered, &y_unordered, 0.0));
    }

    #[test]
    fn equivalence_relation_at_zero_epsilon() {
        let rows = vec![vec![Value::Int(2)], vec![Value::Float(2.5)]];
        let a = ResultSet::new(vec!["v".into()], rows.clone(), false);
        let b = ResultSet::new(vec!["v".into()], rows.clone(), false);
        assert!(results_equivalent(&a, &a, 0.0));
        assert!(results_equivalent(&a, &b, 0.0) == results_equivalent(&b, &a, 0.0));
    }

    #[test]
    fn normalization_collapses_integral_floats_and_trailing_spaces() {
        let rs = ResultSet::new(
            vec!["a".into(), "b".into()],
            vec![vec![Value::Float(2.0), Value::Text("x  ".into())]],
            false,
        );
        assert_eq!(rs.rows[0], vec![Value::Int(2), Value::Text("x".into())]);
    }
}

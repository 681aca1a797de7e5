//! Reference interpreter: evaluates plans directly over in-memory
//! relations. Serves as the differential-testing oracle for the CTE
//! compiler, so its semantics deliberately track the embedded SQL backend:
//! three-valued predicate logic, NULL-ignoring aggregates (except
//! COUNT(*)), bag semantics unless `Distinct [ true ]`, case-insensitive
//! LIKE, case-folded text ordering, and a deterministic whole-row tiebreak
//! in Sort/TopSort.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use thiserror::Error;

use crate::ast::{
    plan_root, AggArg, AggFunc, ColumnRef, CompareOp, Comparison, Connective, Literal, OpKind,
    Operand, OutputExpr, Predicate, QplNode, QplPlan, SortDir, StepId,
};
use crate::relation::{RelColumn, Relation};
use crate::schema::{SchemaCatalog, SchemaError, SimpleType};
use crate::value::{and3, or3, CanonValue, Value};

/// A schema plus one relation per table.
#[derive(Debug, Clone)]
pub struct Database {
    pub schema: SchemaCatalog,
    tables: HashMap<String, Relation>,
}

#[derive(Debug, Error)]
pub enum DbError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("no CSV file for table `{0}`")]
    MissingTableFile(String),
    #[error("table `{table}`: column `{column}` missing from CSV header")]
    MissingColumn { table: String, column: String },
    #[error("table `{table}`: CSV column `{column}` is not in the schema")]
    ExtraColumn { table: String, column: String },
    #[error("table `{table}` row {row}: `{value}` is not a number")]
    BadNumber {
        table: String,
        row: usize,
        value: String,
    },
    #[error("relation for `{table}` does not match its declared columns")]
    HeaderMismatch { table: String },
}

impl Database {
    /// Empty relations for every table in the schema.
    pub fn empty(schema: SchemaCatalog) -> Self {
        let tables = schema
            .tables
            .iter()
            .map(|t| {
                let rel = Relation::new(
                    t.columns
                        .iter()
                        .map(|c| (c.name.clone(), c.simple_type))
                        .collect(),
                );
                (t.name.to_lowercase(), rel)
            })
            .collect();
        Database { schema, tables }
    }

    /// Load `schema.json` plus one CSV per table (header row, RFC 4180)
    /// from a directory. An empty string in a `number` column reads as
    /// NULL.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, DbError> {
        let dir = dir.as_ref();
        let schema = SchemaCatalog::from_json_file(dir.join("schema.json"))?;
        let mut db = Database::empty(schema.clone());
        for table in &schema.tables {
            let path = find_csv(dir, &table.name)
                .ok_or_else(|| DbError::MissingTableFile(table.name.clone()))?;
            let mut reader = csv::ReaderBuilder::new().from_path(&path)?;
            let headers = reader.headers()?.clone();
            for header in headers.iter() {
                if table.column(header).is_none() {
                    return Err(DbError::ExtraColumn {
                        table: table.name.clone(),
                        column: header.to_string(),
                    });
                }
            }
            let positions: Vec<usize> = table
                .columns
                .iter()
                .map(|c| {
                    headers
                        .iter()
                        .position(|h| h.eq_ignore_ascii_case(&c.name))
                        .ok_or_else(|| DbError::MissingColumn {
                            table: table.name.clone(),
                            column: c.name.clone(),
                        })
                })
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for (i, record) in reader.records().enumerate() {
                let record = record?;
                let row = table
                    .columns
                    .iter()
                    .zip(&positions)
                    .map(|(col, &pos)| {
                        let raw = record.get(pos).unwrap_or("");
                        parse_cell(raw, col.simple_type).ok_or_else(|| DbError::BadNumber {
                            table: table.name.clone(),
                            row: i + 2,
                            value: raw.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                rows.push(row);
            }
            let rel = db
                .tables
                .get_mut(&table.name.to_lowercase())
                .expect("table relation pre-created");
            rel.rows = rows;
        }
        Ok(db)
    }

    pub fn table(&self, name: &str) -> Option<&Relation> {
        self.tables.get(&name.to_lowercase())
    }

    /// Replace a table's rows. The relation header must match the declared
    /// columns.
    pub fn set_table(&mut self, name: &str, relation: Relation) -> Result<(), DbError> {
        let table = self
            .schema
            .table(name)
            .ok_or_else(|| DbError::MissingTableFile(name.to_string()))?;
        let matches = table.columns.len() == relation.columns.len()
            && table
                .columns
                .iter()
                .zip(&relation.columns)
                .all(|(a, b)| a.name.eq_ignore_ascii_case(&b.name) && a.simple_type == b.ty);
        if !matches {
            return Err(DbError::HeaderMismatch {
                table: name.to_string(),
            });
        }
        self.tables.insert(name.to_lowercase(), relation);
        Ok(())
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.schema
            .tables
            .iter()
            .map(|t| (t.name.as_str(), &self.tables[&t.name.to_lowercase()]))
    }
}

fn find_csv(dir: &Path, table: &str) -> Option<std::path::PathBuf> {
    let exact = dir.join(format!("{table}.csv"));
    if exact.exists() {
        return Some(exact);
    }
    let want = format!("{}.csv", table.to_lowercase());
    std::fs::read_dir(dir).ok()?.find_map(|entry| {
        let entry = entry.ok()?;
        let name = entry.file_name().to_string_lossy().to_lowercase();
        (name == want).then(|| entry.path())
    })
}

fn parse_cell(raw: &str, ty: SimpleType) -> Option<Value> {
    match ty {
        SimpleType::Number => {
            if raw.is_empty() {
                Some(Value::Null)
            } else if let Ok(i) = raw.parse::<i64>() {
                Some(Value::Int(i))
            } else if let Ok(f) = raw.parse::<f64>() {
                Some(Value::Float(f))
            } else {
                None
            }
        }
        _ => Some(Value::Text(raw.to_string())),
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("step {step}: table `{table}` is not in the database")]
    UnknownTable { step: StepId, table: String },
    #[error("step {step}: no column `{name}` in scope")]
    UnknownColumn { step: StepId, name: String },
    #[error("step {step}: `#{reference}` does not name an input of this step")]
    BadReference { step: StepId, reference: u32 },
    #[error("step {step}: {message}")]
    Domain { step: StepId, message: String },
    #[error(transparent)]
    Structure(#[from] crate::ast::StructureError),
}

/// Evaluate the plan and return the root step's relation.
pub fn eval_plan(plan: &QplPlan, db: &Database) -> Result<Relation, EvalError> {
    let root = plan_root(plan)?;
    let trace = eval_plan_trace(plan, db)?;
    Ok(trace[root.0 as usize - 1].clone())
}

/// Evaluate every step bottom-up and return all intermediate relations,
/// indexed by step (step `#k` at `k - 1`). Evaluating any step in
/// isolation yields the same relation the full evaluation produces here.
pub fn eval_plan_trace(plan: &QplPlan, db: &Database) -> Result<Vec<Relation>, EvalError> {
    let mut trace: Vec<Relation> = Vec::with_capacity(plan.len());
    for line in plan.lines() {
        let rel = eval_node(line.step, &line.node, &trace, db)?;
        trace.push(rel);
    }
    Ok(trace)
}

fn eval_node(
    step: StepId,
    node: &QplNode,
    trace: &[Relation],
    db: &Database,
) -> Result<Relation, EvalError> {
    let input = |k: StepId| -> &Relation { &trace[k.0 as usize - 1] };
    match node.op {
        OpKind::Scan => {
            let table_name = node.table_name.as_deref().expect("scan has a table");
            let table = db.table(table_name).ok_or_else(|| EvalError::UnknownTable {
                step,
                table: table_name.to_string(),
            })?;
            let rows = filter_rows(step, table, node.predicate.as_ref())?;
            project(step, node, table, rows)
        }
        OpKind::Filter => {
            let rel = input(node.inputs[0]);
            let rows = filter_rows(step, rel, node.predicate.as_ref())?;
            project(step, node, rel, rows)
        }
        OpKind::Sort => {
            let rel = input(node.inputs[0]);
            let rows = sorted_rows(step, rel, node)?;
            project(step, node, rel, rows)
        }
        OpKind::TopSort => {
            let rel = input(node.inputs[0]);
            let mut rows = sorted_rows(step, rel, node)?;
            let k = node.rows.expect("TopSort has Rows") as usize;
            if node.with_ties == Some(true) {
                rows = keep_with_ties(step, rel, node, rows, k)?;
            } else {
                rows.truncate(k);
            }
            project(step, node, rel, rows)
        }
        OpKind::Aggregate => eval_aggregate(step, node, input(node.inputs[0])),
        OpKind::Join => eval_join(step, node, input(node.inputs[0]), input(node.inputs[1])),
        OpKind::Except | OpKind::Intersect => {
            eval_semi_anti(step, node, input(node.inputs[0]), input(node.inputs[1]))
        }
        OpKind::Union => eval_union(step, node, input(node.inputs[0]), input(node.inputs[1])),
    }
}

fn col_index(step: StepId, rel: &Relation, name: &str) -> Result<usize, EvalError> {
    rel.column_index(name)
        .ok_or_else(|| EvalError::UnknownColumn {
            step,
            name: name.to_string(),
        })
}

/// Row scope for operand resolution: one relation for Scan/unary
/// predicates, two step-tagged relations for binary predicates.
enum Scope<'a> {
    One(&'a Relation, &'a [Value]),
    Two {
        left: (StepId, &'a Relation, &'a [Value]),
        right: (StepId, &'a Relation, &'a [Value]),
    },
}

fn operand_value(step: StepId, operand: &Operand, scope: &Scope) -> Result<Value, EvalError> {
    match operand {
        Operand::Literal(Literal::Int(i)) => Ok(Value::Int(*i)),
        Operand::Literal(Literal::Dec(d)) => Ok(Value::Float(*d)),
        Operand::Literal(Literal::Str(s)) => Ok(Value::Text(s.clone())),
        Operand::Column(ColumnRef { qualifier, name }) => match scope {
            Scope::One(rel, row) => {
                if let Some(q) = qualifier {
                    return Err(EvalError::BadReference {
                        step,
                        reference: q.0,
                    });
                }
                Ok(row[col_index(step, rel, name)?].clone())
            }
            Scope::Two { left, right } => match qualifier {
                Some(q) if *q == left.0 => Ok(left.2[col_index(step, left.1, name)?].clone()),
                Some(q) if *q == right.0 => Ok(right.2[col_index(step, right.1, name)?].clone()),
                Some(q) => Err(EvalError::BadReference {
                    step,
                    reference: q.0,
                }),
                None => {
                    // Bind by unique name across the two inputs.
                    match (left.1.column_index(name), right.1.column_index(name)) {
                        (Some(i), None) => Ok(left.2[i].clone()),
                        (None, Some(i)) => Ok(right.2[i].clone()),
                        _ => Err(EvalError::UnknownColumn {
                            step,
                            name: name.to_string(),
                        }),
                    }
                }
            },
        },
    }
}

fn eval_comparison(
    step: StepId,
    cmp: &Comparison,
    scope: &Scope,
) -> Result<Option<bool>, EvalError> {
    let lhs = operand_value(step, &cmp.lhs, scope)?;
    match cmp.op {
        CompareOp::IsNull => return Ok(Some(lhs.is_null())),
        CompareOp::IsNotNull => return Ok(Some(!lhs.is_null())),
        _ => {}
    }
    let rhs = operand_value(step, cmp.rhs.as_ref().expect("rhs present"), scope)?;
    Ok(match cmp.op {
        CompareOp::Eq => lhs.sql_eq(&rhs),
        CompareOp::Ne => lhs.sql_eq(&rhs).map(|b| !b),
        CompareOp::Lt => lhs.sql_cmp(&rhs).map(|o| o == std::cmp::Ordering::Less),
        CompareOp::Le => lhs.sql_cmp(&rhs).map(|o| o != std::cmp::Ordering::Greater),
        CompareOp::Gt => lhs.sql_cmp(&rhs).map(|o| o == std::cmp::Ordering::Greater),
        CompareOp::Ge => lhs.sql_cmp(&rhs).map(|o| o != std::cmp::Ordering::Less),
        CompareOp::Like => lhs.sql_like(&rhs),
        CompareOp::NotLike => lhs.sql_like(&rhs).map(|b| !b),
        CompareOp::IsNull | CompareOp::IsNotNull => unreachable!(),
    })
}

/// Left-associative chain with no precedence between AND and OR.
fn eval_predicate(
    step: StepId,
    pred: &Predicate,
    scope: &Scope,
) -> Result<Option<bool>, EvalError> {
    let mut acc = eval_comparison(step, &pred.first, scope)?;
    for (conn, cmp) in &pred.rest {
        let next = eval_comparison(step, cmp, scope)?;
        acc = match conn {
            Connective::And => and3(acc, next),
            Connective::Or => or3(acc, next),
        };
    }
    Ok(acc)
}

fn filter_rows(
    step: StepId,
    rel: &Relation,
    pred: Option<&Predicate>,
) -> Result<Vec<Vec<Value>>, EvalError> {
    let mut rows = Vec::new();
    for row in &rel.rows {
        let keep = match pred {
            None => true,
            Some(p) => eval_predicate(step, p, &Scope::One(rel, row))? == Some(true),
        };
        if keep {
            rows.push(row.clone());
        }
    }
    Ok(rows)
}

/// Sort by the declared keys, then by every output column ascending — the
/// same deterministic tiebreak the compiler emits, so ordered roots compare
/// as sequences.
fn sorted_rows(step: StepId, rel: &Relation, node: &QplNode) -> Result<Vec<Vec<Value>>, EvalError> {
    let keys: Vec<(usize, SortDir)> = node
        .order_by
        .as_ref()
        .expect("sort has OrderBy")
        .iter()
        .map(|(name, dir)| Ok((col_index(step, rel, name)?, *dir)))
        .collect::<Result<_, EvalError>>()?;
    let tiebreak: Vec<usize> = node
        .output
        .iter()
        .map(|o| match o {
            OutputExpr::Column(c) => col_index(step, rel, &c.name),
            OutputExpr::Aggregate { .. } => Err(EvalError::Domain {
                step,
                message: "aggregate output in Sort".into(),
            }),
        })
        .collect::<Result<_, _>>()?;
    let mut rows = rel.rows.clone();
    rows.sort_by(|a, b| {
        for (idx, dir) in &keys {
            let ord = a[*idx].order_cmp(&b[*idx]);
            let ord = match dir {
                SortDir::Asc => ord,
                SortDir::Desc => ord.reverse(),
            };
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        for idx in &tiebreak {
            let ord = a[*idx].order_cmp(&b[*idx]);
            if ord != std::cmp::Ordering::Equal {
                return ord;
            }
        }
        std::cmp::Ordering::Equal
    });
    Ok(rows)
}

/// Keep the first `k` sorted rows plus every row tying with the k-th on
/// the declared sort keys.
fn keep_with_ties(
    step: StepId,
    rel: &Relation,
    node: &QplNode,
    rows: Vec<Vec<Value>>,
    k: usize,
) -> Result<Vec<Vec<Value>>, EvalError> {
    if k == 0 {
        return Ok(Vec::new());
    }
    if rows.len() <= k {
        return Ok(rows);
    }
    let keys: Vec<usize> = node
        .order_by
        .as_ref()
        .expect("TopSort has OrderBy")
        .iter()
        .map(|(name, _)| col_index(step, rel, name))
        .collect::<Result<_, _>>()?;
    let boundary = rows[k - 1].clone();
    let ties_boundary = |row: &[Value]| {
        keys.iter()
            .all(|&i| row[i].order_cmp(&boundary[i]) == std::cmp::Ordering::Equal)
    };
    let mut kept: Vec<Vec<Value>> = rows[..k].to_vec();
    for row in &rows[k..] {
        if ties_boundary(row) {
            kept.push(row.clone());
        } else {
            break;
        }
    }
    Ok(kept)
}

fn project(
    step: StepId,
    node: &QplNode,
    src: &Relation,
    rows: Vec<Vec<Value>>,
) -> Result<Relation, EvalError> {
    let indices: Vec<usize> = node
        .output
        .iter()
        .map(|o| match o {
            OutputExpr::Column(c) => col_index(step, src, &c.name),
            OutputExpr::Aggregate { .. } => Err(EvalError::Domain {
                step,
                message: "aggregate expressions appear only in Aggregate nodes".into(),
            }),
        })
        .collect::<Result<_, _>>()?;
    let columns: Vec<RelColumn> = node
        .output_names()
        .into_iter()
        .zip(&indices)
        .map(|(name, &i)| RelColumn {
            name,
            ty: src.columns[i].ty,
        })
        .collect();
    let mut out_rows: Vec<Vec<Value>> = rows
        .into_iter()
        .map(|row| indices.iter().map(|&i| row[i].clone()).collect())
        .collect();
    if node.distinct == Some(true) {
        out_rows = dedupe(out_rows);
    }
    Ok(Relation {
        columns,
        rows: out_rows,
    })
}

fn dedupe(rows: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    let mut seen: HashSet<Vec<CanonValue>> = HashSet::new();
    rows.into_iter()
        .filter(|row| seen.insert(row.iter().map(|v| v.canon()).collect()))
        .collect()
}

fn eval_aggregate(step: StepId, node: &QplNode, input: &Relation) -> Result<Relation, EvalError> {
    let group_by = node.group_by.clone().unwrap_or_default();
    let key_idx: Vec<usize> = group_by
        .iter()
        .map(|name| col_index(step, input, name))
        .collect::<Result<_, _>>()?;

    // Groups keyed by canonical values; NULLs group together, 2 and 2.0
    // share a group.
    let mut order: Vec<Vec<CanonValue>> = Vec::new();
    let mut groups: HashMap<Vec<CanonValue>, Vec<usize>> = HashMap::new();
    for (i, row) in input.rows.iter().enumerate() {
        let key: Vec<CanonValue> = key_idx.iter().map(|&k| row[k].canon()).collect();
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(i);
    }
    // A global aggregate over an empty input still yields one row.
    if key_idx.is_empty() && input.rows.is_empty() {
        order.push(Vec::new());
        groups.insert(Vec::new(), Vec::new());
    }

    let mut types = Vec::new();
    for expr in &node.output {
        let ty = match expr {
            OutputExpr::Column(c) => input.columns[col_index(step, input, &c.name)?].ty,
            OutputExpr::Aggregate { func, arg, .. } => match func {
                AggFunc::Count | AggFunc::Sum | AggFunc::Avg => SimpleType::Number,
                AggFunc::Min | AggFunc::Max => match arg {
                    AggArg::Star => SimpleType::Other,
                    AggArg::Column(name) => input.columns[col_index(step, input, name)?].ty,
                },
            },
        };
        types.push(ty);
    }
    let columns: Vec<RelColumn> = node
        .output_names()
        .into_iter()
        .zip(types)
        .map(|(name, ty)| RelColumn { name, ty })
        .collect();

    let mut rows = Vec::new();
    for key in &order {
        let members = &groups[key];
        let mut row = Vec::with_capacity(node.output.len());
        for expr in &node.output {
            let value = match expr {
                OutputExpr::Column(c) => {
                    let idx = col_index(step, input, &c.name)?;
                    members
                        .first()
                        .map(|&i| input.rows[i][idx].clone())
                        .unwrap_or(Value::Null)
                }
                OutputExpr::Aggregate {
                    func,
                    arg,
                    distinct,
                    ..
                } => compute_aggregate(step, input, members, *func, arg, *distinct)?,
            };
            row.push(value);
        }
        rows.push(row);
    }
    Ok(Relation { columns, rows })
}

fn compute_aggregate(
    step: StepId,
    input: &Relation,
    members: &[usize],
    func: AggFunc,
    arg: &AggArg,
    distinct: bool,
) -> Result<Value, EvalError> {
    if func == AggFunc::Count && matches!(arg, AggArg::Star) {
        return Ok(Value::Int(members.len() as i64));
    }
    let AggArg::Column(name) = arg else {
        return Err(EvalError::Domain {
            step,
            message: format!("{} requires a column argument", func.name()),
        });
    };
    let idx = col_index(step, input, name)?;
    let mut values: Vec<&Value> = members
        .iter()
        .map(|&i| &input.rows[i][idx])
        .filter(|v| !v.is_null())
        .collect();
    if distinct {
        let mut seen = HashSet::new();
        values.retain(|v| seen.insert(v.canon()));
    }
    Ok(match func {
        AggFunc::Count => Value::Int(values.len() as i64),
        AggFunc::Sum | AggFunc::Avg => {
            if values.is_empty() {
                return Ok(Value::Null);
            }
            let mut int_sum: i64 = 0;
            let mut float_sum = 0.0;
            let mut all_int = true;
            for v in &values {
                match v {
                    Value::Int(i) => {
                        int_sum = int_sum.wrapping_add(*i);
                        float_sum += *i as f64;
                    }
                    Value::Float(f) => {
                        all_int = false;
                        float_sum += *f;
                    }
                    _ => {
                        return Err(EvalError::Domain {
                            step,
                            message: format!("{} over non-numeric values", func.name()),
                        })
                    }
                }
            }
            if func == AggFunc::Avg {
                Value::Float(float_sum / values.len() as f64)
            } else if all_int {
                Value::Int(int_sum)
            } else {
                Value::Float(float_sum)
            }
        }
        AggFunc::Min | AggFunc::Max => {
            if values.is_empty() {
                return Ok(Value::Null);
            }
            let mut best = values[0];
            for v in &values[1..] {
                let ord = v.sql_cmp(best).unwrap_or(std::cmp::Ordering::Equal);
                let better = match func {
                    AggFunc::Min => ord == std::cmp::Ordering::Less,
                    _ => ord == std::cmp::Ordering::Greater,
                };
                if better {
                    best = v;
                }
            }
            best.clone()
        }
    })
}

/// Resolve a binary node's qualified outputs to (is_left, column index).
fn binary_out_indices(
    step: StepId,
    node: &QplNode,
    left: &Relation,
    right: &Relation,
) -> Result<Vec<(bool, usize)>, EvalError> {
    node.output
        .iter()
        .map(|o| {
            let OutputExpr::Column(c) = o else {
                return Err(EvalError::Domain {
                    step,
                    message: "aggregate expressions appear only in Aggregate nodes".into(),
                });
            };
            let qual = c.qualifier.ok_or(EvalError::Domain {
                step,
                message: format!("binary output `{}` must be qualified", c.name),
            })?;
            if qual == node.inputs[0] {
                Ok((true, col_index(step, left, &c.name)?))
            } else if qual == node.inputs[1] {
                Ok((false, col_index(step, right, &c.name)?))
            } else {
                Err(EvalError::BadReference {
                    step,
                    reference: qual.0,
                })
            }
        })
        .collect()
}

fn binary_columns(
    node: &QplNode,
    out_idx: &[(bool, usize)],
    left: &Relation,
    right: &Relation,
) -> Vec<RelColumn> {
    node.output_names()
        .into_iter()
        .zip(out_idx)
        .map(|(name, &(is_left, i))| RelColumn {
            name,
            ty: if is_left {
                left.columns[i].ty
            } else {
                right.columns[i].ty
            },
        })
        .collect()
}

fn eval_join(
    step: StepId,
    node: &QplNode,
    left: &Relation,
    right: &Relation,
) -> Result<Relation, EvalError> {
    let out_idx = binary_out_indices(step, node, left, right)?;
    let columns = binary_columns(node, &out_idx, left, right);
    let mut rows = Vec::new();
    for l in &left.rows {
        for r in &right.rows {
            let keep = match &node.predicate {
                None => true,
                Some(p) => {
                    let scope = Scope::Two {
                        left: (node.inputs[0], left, l),
                        right: (node.inputs[1], right, r),
                    };
                    eval_predicate(step, p, &scope)? == Some(true)
                }
            };
            if keep {
                rows.push(
                    out_idx
                        .iter()
                        .map(|&(is_left, i)| if is_left { l[i].clone() } else { r[i].clone() })
                        .collect(),
                );
            }
        }
    }
    if node.distinct == Some(true) {
        rows = dedupe(rows);
    }
    Ok(Relation { columns, rows })
}

/// Except keeps left rows with no matching right row (anti-join);
/// Intersect keeps left rows with at least one match (semi-join). A
/// missing Intersect predicate defaults to equality over identically named
/// columns. Neither deduplicates.
fn eval_semi_anti(
    step: StepId,
    node: &QplNode,
    left: &Relation,
    right: &Relation,
) -> Result<Relation, EvalError> {
    let out_idx = binary_out_indices(step, node, left, right)?;
    for (is_left, _) in &out_idx {
        if !is_left {
            return Err(EvalError::Domain {
                step,
                message: format!("{} outputs must reference the left input", node.op),
            });
        }
    }
    let columns = binary_columns(node, &out_idx, left, right);
    let default_pairs: Vec<(usize, usize)> = if node.predicate.is_none() {
        left.columns
            .iter()
            .enumerate()
            .filter_map(|(i, lc)| right.column_index(&lc.name).map(|j| (i, j)))
            .collect()
    } else {
        Vec::new()
    };
    let matches = |l: &Vec<Value>, r: &Vec<Value>| -> Result<bool, EvalError> {
        match &node.predicate {
            Some(p) => {
                let scope = Scope::Two {
                    left: (node.inputs[0], left, l),
                    right: (node.inputs[1], right, r),
                };
                Ok(eval_predicate(step, p, &scope)? == Some(true))
            }
            None => Ok(default_pairs
                .iter()
                .all(|&(i, j)| l[i].sql_eq(&r[j]) == Some(true))),
        }
    };
    let want_match = node.op == OpKind::Intersect;
    let mut rows = Vec::new();
    for l in &left.rows {
        let mut any = false;
        for r in &right.rows {
            if matches(l, r)? {
                any = true;
                break;
            }
        }
        if any == want_match {
            rows.push(out_idx.iter().map(|&(_, i)| l[i].clone()).collect());
        }
    }
    Ok(Relation { columns, rows })
}

/// Positional bag union: each qualified output names a column of one
/// input; its position applies to both sides.
fn eval_union(
    step: StepId,
    node: &QplNode,
    left: &Relation,
    right: &Relation,
) -> Result<Relation, EvalError> {
    if left.arity() != right.arity() {
        return Err(EvalError::Domain {
            step,
            message: format!(
                "Union inputs have different arity ({} vs {})",
                left.arity(),
                right.arity()
            ),
        });
    }
    let positions: Vec<usize> = node
        .output
        .iter()
        .map(|o| {
            let OutputExpr::Column(c) = o else {
                return Err(EvalError::Domain {
                    step,
                    message: "aggregate expressions appear only in Aggregate nodes".into(),
                });
            };
            let qual = c.qualifier.ok_or(EvalError::Domain {
                step,
                message: format!("binary output `{}` must be qualified", c.name),
            })?;
            let rel = if qual == node.inputs[0] {
                left
            } else if qual == node.inputs[1] {
                right
            } else {
                return Err(EvalError::BadReference {
                    step,
                    reference: qual.0,
                });
            };
            col_index(step, rel, &c.name)
        })
        .collect::<Result<_, _>>()?;
    let columns: Vec<RelColumn> = node
        .output_names()
        .into_iter()
        .zip(&positions)
        .map(|(name, &i)| RelColumn {
            name,
            ty: left.columns[i].ty,
        })
        .collect();
    let mut rows: Vec<Vec<Value>> = Vec::new();
    for row in left.rows.iter().chain(right.rows.iter()) {
        rows.push(positions.iter().map(|&i| row[i].clone()).collect());
    }
    Ok(Relation { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::schema::{ColumnDef, TableDef};

    fn museum_db() -> Database {
        let col = |name: &str, ty| ColumnDef {
            name: name.into(),
            simple_type: ty,
            values: None,
        };
        let schema = SchemaCatalog::new(
            "museum_toy",
            vec![
                TableDef {
                    name: "Visitor".into(),
                    columns: vec![
                        col("ID", SimpleType::Number),
                        col("Name", SimpleType::Text),
                        col("Level_of_membership", SimpleType::Number),
                    ],
                    primary_key: vec!["ID".into()],
                    foreign_keys: vec![],
                },
                TableDef {
                    name: "Visit".into(),
                    columns: vec![
                        col("visitor_ID", SimpleType::Number),
                        col("Total_spent", SimpleType::Number),
                    ],
                    primary_key: vec![],
                    foreign_keys: vec![],
                },
            ],
        )
        .unwrap();
        let mut db = Database::empty(schema);
        let visitor = Relation::new(vec![
            ("ID".into(), SimpleType::Number),
            ("Name".into(), SimpleType::Text),
            ("Level_of_membership".into(), SimpleType::Number),
        ])
        .with_rows(vec![
            vec![Value::Int(1), Value::Text("Ann".into()), Value::Int(1)],
            vec![Value::Int(2), Value::Text("Bob".into()), Value::Int(2)],
        ]);
        let visit = Relation::new(vec![
            ("visitor_ID".into(), SimpleType::Number),
            ("Total_spent".into(), SimpleType::Number),
        ])
        .with_rows(vec![
            vec![Value::Int(1), Value::Int(10)],
            vec![Value::Int(1), Value::Int(5)],
            vec![Value::Int(2), Value::Int(99)],
        ]);
        db.set_table("Visitor", visitor).unwrap();
        db.set_table("Visit", visit).unwrap();
        db
    }

    const MUSEUM_PLAN: &str = "\
#1 = Scan Table [ visitor ] Predicate [ Level_of_membership = 1 ] Output [ ID ]
#2 = Scan Table [ visit ] Output [ visitor_ID, Total_spent ]
#3 = Join [ #1, #2 ] Predicate [ #1.ID = #2.visitor_ID ] Output [ #2.Total_spent ]
#4 = Aggregate [ #3 ] Output [ SUM(Total_spent) AS Sum_Total_spent ]";

    #[test]
    fn sum_of_member_level_one_spending_is_fifteen() {
        // Hand evaluation: visitor 1 has level 1; their visits spent 10 and
        // 5; 10 + 5 = 15.
        let db = museum_db();
        let plan = parse(MUSEUM_PLAN).unwrap();
        let result = eval_plan(&plan, &db).unwrap();
        assert_eq!(result.columns[0].name, "Sum_Total_spent");
        assert_eq!(result.rows, vec![vec![Value::Int(15)]]);
    }

    #[test]
    fn scan_over_empty_table_keeps_the_header() {
        let mut db = museum_db();
        db.set_table(
            "Visit",
            Relation::new(vec![
                ("visitor_ID".into(), SimpleType::Number),
                ("Total_spent".into(), SimpleType::Number),
            ]),
        )
        .unwrap();
        let plan = parse("#1 = Scan Table [ visit ] Output [ Total_spent ]").unwrap();
        let rel = eval_plan(&plan, &db).unwrap();
        assert_eq!(rel.rows.len(), 0);
        assert_eq!(rel.columns[0].name, "Total_spent");
    }

    #[test]
    fn count_by_key_over_documents() {
        // Documents hold templates 1, 1, 2 — counting by template gives
        // {(2,1),(1,2)} as a bag.
        let schema = SchemaCatalog::new(
            "documents_toy",
            vec![TableDef {
                name: "Documents".into(),
                columns: vec![ColumnDef {
                    name: "Template_ID".into(),
                    simple_type: SimpleType::Number,
                    values: None,
                }],
                primary_key: vec![],
                foreign_keys: vec![],
            }],
        )
        .unwrap();
        let mut db = Database::empty(schema);
        db.set_table(
            "Documents",
            Relation::new(vec![("Template_ID".into(), SimpleType::Number)]).with_rows(vec![
                vec![Value::Int(1)],
                vec![Value::Int(1)],
                vec![Value::Int(2)],
            ]),
        )
        .unwrap();
        let plan = parse(
            "#1 = Scan Table [ Documents ] Output [ Template_ID ]\n#2 = Aggregate [ #1 ] GroupBy [ Template_ID ] Output [ COUNT(*) AS Count, Template_ID ]",
        )
        .unwrap();
        let rel = eval_plan(&plan, &db).unwrap();
        let expected = Relation::new(vec![
            ("Count".into(), SimpleType::Number),
            ("Template_ID".into(), SimpleType::Number),
        ])
        .with_rows(vec![
            vec![Value::Int(2), Value::Int(1)],
            vec![Value::Int(1), Value::Int(2)],
        ]);
        assert!(rel.bag_eq(&expected));
    }

    #[test]
    fn global_aggregate_over_empty_input_yields_one_row() {
        let mut db = museum_db();
        db.set_table(
            "Visit",
            Relation::new(vec![
                ("visitor_ID".into(), SimpleType::Number),
                ("Total_spent".into(), SimpleType::Number),
            ]),
        )
        .unwrap();
        let plan = parse(
            "#1 = Scan Table [ visit ] Output [ Total_spent ]\n#2 = Aggregate [ #1 ] Output [ COUNT(*) AS n, SUM(Total_spent) AS s ]",
        )
        .unwrap();
        let rel = eval_plan(&plan, &db).unwrap();
        assert_eq!(rel.rows, vec![vec![Value::Int(0), Value::Null]]);
    }

    #[test]
    fn filter_scan_fusion_holds() {
        let db = museum_db();
        let fused = parse(
            "#1 = Scan Table [ visit ] Predicate [ Total_spent > 7 ] Output [ visitor_ID, Total_spent ]",
        )
        .unwrap();
        let split = parse(
            "#1 = Scan Table [ visit ] Output [ visitor_ID, Total_spent ]\n#2 = Filter [ #1 ] Predicate [ Total_spent > 7 ] Output [ visitor_ID, Total_spent ]",
        )
        .unwrap();
        let a = eval_plan(&fused, &db).unwrap();
        let b = eval_plan(&split, &db).unwrap();
        assert!(a.bag_eq(&b));
    }

    #[test]
    fn topsort_with_ties_extends_past_k() {
        let schema = SchemaCatalog::new(
            "t",
            vec![TableDef {
                name: "scores".into(),
                columns: vec![
                    ColumnDef {
                        name: "name".into(),
                        simple_type: SimpleType::Text,
                        values: None,
                    },
                    ColumnDef {
                        name: "grade".into(),
                        simple_type: SimpleType::Number,
                        values: None,
                    },
                ],
                primary_key: vec![],
                foreign_keys: vec![],
            }],
        )
        .unwrap();
        let mut db = Database::empty(schema);
        db.set_table(
            "scores",
            Relation::new(vec![
                ("name".into(), SimpleType::Text),
                ("grade".into(), SimpleType::Number),
            ])
            .with_rows(vec![
                vec![Value::Text("a".into()), Value::Int(90)],
                vec![Value::Text("b".into()), Value::Int(90)],
                vec![Value::Text("c".into()), Value::Int(80)],
            ]),
        )
        .unwrap();
        let with_ties = parse(
            "#1 = Scan Table [ scores ] Output [ name, grade ]\n#2 = TopSort [ #1 ] Rows [ 1 ] OrderBy [ grade DESC ] WithTies [ true ] Output [ name ]",
        )
        .unwrap();
        let rel = eval_plan(&with_ties, &db).unwrap();
        assert_eq!(rel.rows.len(), 2);

        let without = parse(
            "#1 = Scan Table [ scores ] Output [ name, grade ]\n#2 = TopSort [ #1 ] Rows [ 1 ] OrderBy [ grade DESC ] Output [ name ]",
        )
        .unwrap();
        let rel = eval_plan(&without, &db).unwrap();
        assert_eq!(rel.rows.len(), 1);
        // Deterministic tiebreak: among the two grade-90 rows, "a" sorts
        // before "b" on the output column.
        assert_eq!(rel.rows[0], vec![Value::Text("a".into())]);
    }

    #[test]
    fn except_is_an_anti_join() {
        let db = museum_db();
        // Visitors with no visit spending over 50.
        let text = "\
#1 = Scan Table [ visitor ] Output [ ID, Name ]
#2 = Scan Table [ visit ] Predicate [ Total_spent > 50 ] Output [ visitor_ID ]
#3 = Except [ #1, #2 ] Predicate [ #1.ID = #2.visitor_ID ] Output [ #1.Name ]";
        let rel = eval_plan(&parse(text).unwrap(), &db).unwrap();
        assert_eq!(rel.rows, vec![vec![Value::Text("Ann".into())]]);
    }

    #[test]
    fn intersect_is_a_semi_join() {
        let db = museum_db();
        let text = "\
#1 = Scan Table [ visitor ] Output [ ID ]
#2 = Scan Table [ visit ] Predicate [ Total_spent > 50 ] Output [ visitor_ID, Total_spent ]
#3 = Intersect [ #1, #2 ] Predicate [ #1.ID = #2.visitor_ID ] Output [ #1.ID ]";
        let rel = eval_plan(&parse(text).unwrap(), &db).unwrap();
        assert_eq!(rel.rows, vec![vec![Value::Int(2)]]);
    }

    #[test]
    fn union_is_a_positional_bag_union() {
        let db = museum_db();
        let text = "\
#1 = Scan Table [ visitor ] Output [ ID ]
#2 = Scan Table [ visit ] Output [ visitor_ID ]
#3 = Union [ #1, #2 ] Output [ #1.ID ]";
        let rel = eval_plan(&parse(text).unwrap(), &db).unwrap();
        assert_eq!(rel.rows.len(), 5); // 2 visitors + 3 visits, duplicates kept
    }

    #[test]
    fn null_comparisons_drop_rows() {
        let mut db = museum_db();
        db.set_table(
            "Visit",
            Relation::new(vec![
                ("visitor_ID".into(), SimpleType::Number),
                ("Total_spent".into(), SimpleType::Number),
            ])
            .with_rows(vec![
                vec![Value::Int(1), Value::Null],
                vec![Value::Int(2), Value::Int(10)],
            ]),
        )
        .unwrap();
        let keep = parse(
            "#1 = Scan Table [ visit ] Predicate [ Total_spent < 999 ] Output [ visitor_ID ]",
        )
        .unwrap();
        let rel = eval_plan(&keep, &db).unwrap();
        assert_eq!(rel.rows, vec![vec![Value::Int(2)]]);

        let nulls = parse(
            "#1 = Scan Table [ visit ] Predicate [ Total_spent IS NULL ] Output [ visitor_ID ]",
        )
        .unwrap();
        let rel = eval_plan(&nulls, &db).unwrap();
        assert_eq!(rel.rows, vec![vec![Value::Int(1)]]);
    }

    #[test]
    fn subplan_evaluation_matches_trace() {
        let db = museum_db();
        let plan = parse(MUSEUM_PLAN).unwrap();
        let trace = eval_plan_trace(&plan, &db).unwrap();
        for line in plan.lines() {
            let sub = crate::ast::subplan(&plan, line.step).unwrap();
            let standalone = eval_plan(&sub, &db).unwrap();
            let full = &trace[line.step.0 as usize - 1];
            assert_eq!(&standalone, full, "step {} diverged", line.step);
        }
    }

    #[test]
    fn replacing_a_subtree_with_its_output_relation_preserves_the_root() {
        // Context-freeness: an operator's output depends only on its
        // inputs. Materialize steps #1..#3 of the museum plan as a literal
        // table and re-run the aggregate over a scan of it.
        let db = museum_db();
        let plan = parse(MUSEUM_PLAN).unwrap();
        let trace = eval_plan_trace(&plan, &db).unwrap();
        let join_output = trace[2].clone();

        let schema = SchemaCatalog::new(
            "materialized",
            vec![TableDef {
                name: "sub".into(),
                columns: join_output
                    .columns
                    .iter()
                    .map(|c| ColumnDef {
                        name: c.name.clone(),
                        simple_type: c.ty,
                        values: None,
                    })
                    .collect(),
                primary_key: vec![],
                foreign_keys: vec![],
            }],
        )
        .unwrap();
        let mut mat_db = Database::empty(schema);
        mat_db.set_table("sub", join_output).unwrap();

        let rewritten = parse(
            "#1 = Scan Table [ sub ] Output [ Total_spent ]\n#2 = Aggregate [ #1 ] Output [ SUM(Total_spent) AS Sum_Total_spent ]",
        )
        .unwrap();
        let root_via_literal = eval_plan(&rewritten, &mat_db).unwrap();
        let root_direct = eval_plan(&plan, &db).unwrap();
        assert!(root_via_literal.bag_eq(&root_direct));
    }

    #[test]
    fn csv_loading_reads_empty_number_cells_as_null() {
        let dir = std::env::temp_dir().join(format!("qpl_csv_{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(
            dir.join("schema.json"),
            r#"{"schema_id":"csv_toy","tables":[{"name":"t","columns":[{"name":"n","type":"number"},{"name":"s","type":"text"}],"primary_key":[],"foreign_keys":[]}]}"#,
        )
        .unwrap();
        std::fs::write(dir.join("t.csv"), "n,s\n1,a\n,\n2.5,\"b,c\"\n").unwrap();
        let db = Database::load_dir(&dir).unwrap();
        let rel = db.table("t").unwrap();
        assert_eq!(
            rel.rows,
            vec![
                vec![Value::Int(1), Value::Text("a".into())],
                vec![Value::Null, Value::Text("".into())],
                vec![Value::Float(2.5), Value::Text("b,c".into())],
            ]
        );
        std::fs::remove_dir_all(&dir).unwrap();

        let missing = Database::load_dir(std::env::temp_dir().join("qpl_definitely_missing"));
        assert!(missing.is_err());
    }
}

//! Schema-aware semantic validation of parsed plans.
//!
//! Diagnostics mirror the machine-checkable error classes observed in
//! model-predicted plans: wrong table, wrong column, broken tree structure,
//! type mismatches, bad step qualifications, and aggregate misuse, plus two
//! advisory classes (joins not over declared key pairs, string constants
//! not found among sampled values).
//!
//! Column flow model: a unary node sees exactly its input's output list; a
//! binary node sees the union of both inputs' output lists behind mandatory
//! `#n.` qualification.

use serde_json::json;

use crate::ast::{
    AggArg, AggFunc, ColumnRef, CompareOp, Comparison, Literal, OpKind, Operand, OutputExpr,
    QplNode, QplPlan, StepId,
};
use crate::schema::{SchemaCatalog, SimpleType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DiagnosticClass {
    WrongTable,
    WrongColumn,
    WrongStructure,
    TypeMismatch,
    BadQualification,
    BadAggregate,
    BadJoinKey,
    UnknownValue,
}

impl DiagnosticClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagnosticClass::WrongTable => "WrongTable",
            DiagnosticClass::WrongColumn => "WrongColumn",
            DiagnosticClass::WrongStructure => "WrongStructure",
            DiagnosticClass::TypeMismatch => "TypeMismatch",
            DiagnosticClass::BadQualification => "BadQualification",
            DiagnosticClass::BadAggregate => "BadAggregate",
            DiagnosticClass::BadJoinKey => "BadJoinKey",
            DiagnosticClass::UnknownValue => "UnknownValue",
        }
    }

    pub fn severity(&self) -> Severity {
        match self {
            DiagnosticClass::BadJoinKey | DiagnosticClass::UnknownValue => Severity::Warning,
            _ => Severity::Error,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub step: StepId,
    pub class: DiagnosticClass,
    pub message: String,
}

impl Diagnostic {
    pub fn severity(&self) -> Severity {
        self.class.severity()
    }

    /// One JSON line: `{"step": 3, "class": "WrongColumn", "severity": "error", "message": "..."}`.
    pub fn to_json(&self) -> String {
        json!({
            "step": self.step.0,
            "class": self.class.as_str(),
            "severity": match self.severity() {
                Severity::Error => "error",
                Severity::Warning => "warning",
            },
            "message": self.message,
        })
        .to_string()
    }
}

/// True when any error-class diagnostic is present (warnings do not count).
pub fn has_errors(diags: &[Diagnostic]) -> bool {
    diags.iter().any(|d| d.severity() == Severity::Error)
}

#[derive(Debug, Clone)]
struct FlowCol {
    name: String,
    ty: SimpleType,
    /// Originating (table, column) when traceable through projections.
    src: Option<(String, String)>,
}

/// Per-step visible output columns; `None` when an upstream error made the
/// flow unknowable (suppresses cascading noise).
type Flow = Option<Vec<FlowCol>>;

/// Validate a plan against a schema. An empty (or warning-only) result
/// means the plan is semantically well-formed and will compile and bind.
pub fn validate(plan: &QplPlan, schema: &SchemaCatalog) -> Vec<Diagnostic> {
    let mut ctx = Ctx {
        schema,
        diags: Vec::new(),
        flows: Vec::with_capacity(plan.len()),
    };
    for line in plan.lines() {
        let flow = ctx.check_node(line.step, &line.node);
        ctx.flows.push(flow);
    }
    ctx.check_structure(plan);
    ctx.diags
}

struct Ctx<'a> {
    schema: &'a SchemaCatalog,
    diags: Vec<Diagnostic>,
    flows: Vec<Flow>,
}

impl<'a> Ctx<'a> {
    fn push(&mut self, step: StepId, class: DiagnosticClass, message: String) {
        self.diags.push(Diagnostic {
            step,
            class,
            message,
        });
    }

    fn flow_of(&self, step: StepId) -> Flow {
        self.flows.get(step.0 as usize - 1).cloned().flatten()
    }

    fn check_structure(&mut self, plan: &QplPlan) {
        let last = StepId(plan.len() as u32);
        let mut roots = Vec::new();
        for line in plan.lines() {
            let consumers = plan.consumers(line.step);
            if consumers.is_empty() {
                roots.push(line.step);
            } else if consumers.len() > 1 {
                self.push(
                    line.step,
                    DiagnosticClass::WrongStructure,
                    format!(
                        "step {} is consumed by more than one step ({}); plans are trees",
                        line.step,
                        consumers
                            .iter()
                            .map(|s| s.to_string())
                            .collect::<Vec<_>>()
                            .join(", ")
                    ),
                );
            }
        }
        if roots.len() > 1 {
            for root in roots.iter().filter(|s| **s != last) {
                self.push(
                    *root,
                    DiagnosticClass::WrongStructure,
                    format!("step {root} is not consumed by any later step; plan is not a connected tree"),
                );
            }
        }
    }

    fn check_node(&mut self, step: StepId, node: &QplNode) -> Flow {
        match node.op {
            OpKind::Scan => self.check_scan(step, node),
            OpKind::Aggregate => self.check_aggregate(step, node),
            OpKind::Filter | OpKind::Sort | OpKind::TopSort => self.check_unary(step, node),
            OpKind::Join | OpKind::Except | OpKind::Intersect | OpKind::Union => {
                self.check_binary(step, node)
            }
        }
    }

    fn check_scan(&mut self, step: StepId, node: &QplNode) -> Flow {
        let table_name = node.table_name.as_deref().expect("scan has a table");
        let Some(table) = self.schema.table(table_name) else {
            self.push(
                step,
                DiagnosticClass::WrongTable,
                format!(
                    "table `{table_name}` is not in schema `{}`",
                    self.schema.schema_id
                ),
            );
            return None;
        };
        let avail: Vec<FlowCol> = table
            .columns
            .iter()
            .map(|c| FlowCol {
                name: c.name.clone(),
                ty: c.simple_type,
                src: Some((table.name.clone(), c.name.clone())),
            })
            .collect();
        if let Some(pred) = node.predicate.clone() {
            self.check_predicate(step, &pred, &PredScope::Unary(&avail));
        }
        self.project(step, node, &avail)
    }

    fn check_unary(&mut self, step: StepId, node: &QplNode) -> Flow {
        let input = node.inputs[0];
        let avail = self.flow_of(input)?;
        if let Some(pred) = &node.predicate {
            self.check_predicate(step, pred, &PredScope::Unary(&avail));
        }
        if let Some(order_by) = &node.order_by {
            for (col, _) in order_by {
                if lookup(&avail, col).is_none() {
                    self.push(
                        step,
                        DiagnosticClass::WrongColumn,
                        format!("sort key `{col}` is not a column of {input}"),
                    );
                }
            }
        }
        self.project(step, node, &avail)
    }

    fn check_aggregate(&mut self, step: StepId, node: &QplNode) -> Flow {
        let input = node.inputs[0];
        let avail = self.flow_of(input)?;
        let group_by = node.group_by.clone().unwrap_or_default();
        for col in &group_by {
            if lookup(&avail, col).is_none() {
                self.push(
                    step,
                    DiagnosticClass::WrongColumn,
                    format!("grouping column `{col}` is not a column of {input}"),
                );
            }
        }
        let mut out = Vec::new();
        for expr in &node.output {
            match expr {
                OutputExpr::Column(c) => {
                    let Some(found) = lookup(&avail, &c.name).cloned() else {
                        self.push(
                            step,
                            DiagnosticClass::WrongColumn,
                            format!("output column `{}` is not a column of {input}", c.name),
                        );
                        return None;
                    };
                    if !group_by.iter().any(|g| g.eq_ignore_ascii_case(&c.name)) {
                        self.push(
                            step,
                            DiagnosticClass::BadAggregate,
                            format!(
                                "non-aggregated output column `{}` does not appear in GroupBy",
                                c.name
                            ),
                        );
                    }
                    out.push(found);
                }
                OutputExpr::Aggregate {
                    func, arg, alias, ..
                } => {
                    let arg_ty = match arg {
                        AggArg::Star => None,
                        AggArg::Column(name) => match lookup(&avail, name) {
                            Some(col) => Some(col.ty),
                            None => {
                                self.push(
                                    step,
                                    DiagnosticClass::WrongColumn,
                                    format!(
                                        "aggregate argument `{name}` is not a column of {input}"
                                    ),
                                );
                                return None;
                            }
                        },
                    };
                    if matches!(func, AggFunc::Sum | AggFunc::Avg)
                        && arg_ty != Some(SimpleType::Number)
                    {
                        self.push(
                            step,
                            DiagnosticClass::BadAggregate,
                            format!("{} requires a number column", func.name()),
                        );
                    }
                    let ty = match func {
                        AggFunc::Count | AggFunc::Sum | AggFunc::Avg => SimpleType::Number,
                        AggFunc::Min | AggFunc::Max => arg_ty.unwrap_or(SimpleType::Other),
                    };
                    out.push(FlowCol {
                        name: alias.clone(),
                        ty,
                        src: None,
                    });
                }
            }
        }
        self.check_duplicate_outputs(step, node);
        Some(apply_names(out, node))
    }

    /// Projection for Scan/Filter/Sort/TopSort: every output is a plain
    /// column of the available set.
    fn project(&mut self, step: StepId, node: &QplNode, avail: &[FlowCol]) -> Flow {
        let mut out = Vec::new();
        for expr in &node.output {
            let OutputExpr::Column(c) = expr else {
                self.push(
                    step,
                    DiagnosticClass::BadAggregate,
                    "aggregate expressions appear only in Aggregate nodes".into(),
                );
                return None;
            };
            if c.qualifier.is_some() {
                self.push(
                    step,
                    DiagnosticClass::BadQualification,
                    format!("`{c}` is qualified, but {} outputs are unqualified", node.op),
                );
                return None;
            }
            let Some(found) = lookup(avail, &c.name).cloned() else {
                let scope = match node.op {
                    OpKind::Scan => {
                        format!("table `{}`", node.table_name.as_deref().unwrap_or("?"))
                    }
                    _ => node.inputs[0].to_string(),
                };
                self.push(
                    step,
                    DiagnosticClass::WrongColumn,
                    format!("output column `{}` is not a column of {scope}", c.name),
                );
                return None;
            };
            out.push(found);
        }
        self.check_duplicate_outputs(step, node);
        Some(apply_names(out, node))
    }

    /// Duplicate output names in non-binary nodes have no deterministic
    /// meaning downstream; binary collisions are renamed instead.
    fn check_duplicate_outputs(&mut self, step: StepId, node: &QplNode) {
        if node.op.is_binary() {
            return;
        }
        let mut seen = std::collections::HashSet::new();
        for expr in &node.output {
            let name = match expr {
                OutputExpr::Column(c) => c.name.to_lowercase(),
                OutputExpr::Aggregate { alias, .. } => alias.to_lowercase(),
            };
            if !seen.insert(name.clone()) {
                self.push(
                    step,
                    DiagnosticClass::WrongColumn,
                    format!("duplicate output column `{name}`"),
                );
            }
        }
    }

    fn check_binary(&mut self, step: StepId, node: &QplNode) -> Flow {
        let (left, right) = (node.inputs[0], node.inputs[1]);
        let left_flow = self.flow_of(left);
        let right_flow = self.flow_of(right);

        if let Some(pred) = &node.predicate {
            if let (Some(lf), Some(rf)) = (&left_flow, &right_flow) {
                self.check_predicate(
                    step,
                    pred,
                    &PredScope::Binary {
                        left: (left, lf),
                        right: (right, rf),
                    },
                );
            }
            self.check_binary_predicate_shape(step, node, pred);
        } else {
            match node.op {
                OpKind::Join => self.push(
                    step,
                    DiagnosticClass::BadJoinKey,
                    "Join without a predicate is a cross product".into(),
                ),
                OpKind::Intersect => {
                    // Predicate-free Intersect defaults to equality over
                    // identically named columns; there must be at least one.
                    if let (Some(lf), Some(rf)) = (&left_flow, &right_flow) {
                        let shared = lf
                            .iter()
                            .any(|l| rf.iter().any(|r| r.name.eq_ignore_ascii_case(&l.name)));
                        if !shared {
                            self.push(
                                step,
                                DiagnosticClass::WrongColumn,
                                "predicate-free Intersect requires identically named columns"
                                    .into(),
                            );
                        }
                    }
                }
                _ => {}
            }
        }
        if node.op == OpKind::Join {
            if let Some(pred) = &node.predicate {
                if let (Some(lf), Some(rf)) = (&left_flow, &right_flow) {
                    self.check_join_key(step, pred, (left, lf), (right, rf));
                }
            }
        }

        // Union aligns positionally: equal arity required.
        if node.op == OpKind::Union {
            if let (Some(lf), Some(rf)) = (&left_flow, &right_flow) {
                if lf.len() != rf.len() {
                    self.push(
                        step,
                        DiagnosticClass::WrongStructure,
                        format!(
                            "Union inputs have different arity ({} vs {})",
                            lf.len(),
                            rf.len()
                        ),
                    );
                    return None;
                }
            }
        }

        let mut out = Vec::new();
        for expr in &node.output {
            let OutputExpr::Column(c) = expr else {
                self.push(
                    step,
                    DiagnosticClass::BadAggregate,
                    "aggregate expressions appear only in Aggregate nodes".into(),
                );
                return None;
            };
            let Some(qual) = c.qualifier else {
                self.push(
                    step,
                    DiagnosticClass::BadQualification,
                    format!("binary output `{}` must be `#n.`-qualified", c.name),
                );
                return None;
            };
            if qual != left && qual != right {
                self.push(
                    step,
                    DiagnosticClass::BadQualification,
                    format!("`{c}` does not reference an input of this step ({left}, {right})"),
                );
                return None;
            }
            if matches!(node.op, OpKind::Except | OpKind::Intersect) && qual == right {
                self.push(
                    step,
                    DiagnosticClass::BadQualification,
                    format!(
                        "{} passes through its left input; `{c}` references the right",
                        node.op
                    ),
                );
                return None;
            }
            let flow = if qual == left { &left_flow } else { &right_flow };
            let Some(flow) = flow else { return None };
            let Some(found) = lookup(flow, &c.name).cloned() else {
                self.push(
                    step,
                    DiagnosticClass::BadQualification,
                    format!("`{c}`: step {qual} does not output a column `{}`", c.name),
                );
                return None;
            };
            out.push(found);
        }
        Some(apply_names(out, node))
    }

    /// Advisory check on binary predicates: referencing only one side.
    fn check_binary_predicate_shape(
        &mut self,
        step: StepId,
        node: &QplNode,
        pred: &crate::ast::Predicate,
    ) {
        let mut sides = std::collections::HashSet::new();
        for cmp in pred.comparisons() {
            for operand in std::iter::once(&cmp.lhs).chain(cmp.rhs.iter()) {
                if let Operand::Column(ColumnRef {
                    qualifier: Some(q), ..
                }) = operand
                {
                    sides.insert(*q);
                }
            }
        }
        if sides.len() < 2 {
            self.push(
                step,
                DiagnosticClass::BadJoinKey,
                format!(
                    "{} predicate references only one input; result may be degenerate",
                    node.op
                ),
            );
        }
    }

    fn check_join_key(
        &mut self,
        step: StepId,
        pred: &crate::ast::Predicate,
        left: (StepId, &Vec<FlowCol>),
        right: (StepId, &Vec<FlowCol>),
    ) {
        let resolve = |operand: &Operand| -> Option<(String, String)> {
            let Operand::Column(c) = operand else {
                return None;
            };
            let flow = match c.qualifier {
                Some(q) if q == left.0 => left.1,
                Some(q) if q == right.0 => right.1,
                _ => return None,
            };
            lookup(flow, &c.name).and_then(|f| f.src.clone())
        };
        let over_key_pair = pred.comparisons().any(|cmp| {
            if cmp.op != CompareOp::Eq {
                return false;
            }
            let (Some((ta, ca)), Some(rhs)) = (resolve(&cmp.lhs), cmp.rhs.as_ref()) else {
                return false;
            };
            let Some((tb, cb)) = resolve(rhs) else {
                return false;
            };
            self.schema.is_key_pair(&ta, &ca, &tb, &cb)
        });
        if !over_key_pair {
            self.push(
                step,
                DiagnosticClass::BadJoinKey,
                "join predicate is not an equality over a declared primary/foreign key pair"
                    .into(),
            );
        }
    }

    fn check_predicate(&mut self, step: StepId, pred: &crate::ast::Predicate, scope: &PredScope) {
        for cmp in pred.comparisons() {
            self.check_comparison(step, cmp, scope);
        }
    }

    fn check_comparison(&mut self, step: StepId, cmp: &Comparison, scope: &PredScope) {
        let lhs = self.resolve_operand(step, &cmp.lhs, scope);
        let rhs = cmp
            .rhs
            .as_ref()
            .map(|r| self.resolve_operand(step, r, scope));
        if !cmp.op.takes_rhs() {
            return;
        }
        let (Some(lhs), Some(Some(rhs))) = (lhs, rhs) else {
            return; // resolution already diagnosed
        };
        match (&lhs, &rhs) {
            (Resolved::Col(a), Resolved::Col(b)) => {
                if (a.ty == SimpleType::Number) != (b.ty == SimpleType::Number) {
                    self.push(
                        step,
                        DiagnosticClass::TypeMismatch,
                        format!(
                            "comparing `{}` ({}) with `{}` ({})",
                            a.name, a.ty, b.name, b.ty
                        ),
                    );
                }
            }
            (Resolved::Col(col), Resolved::Lit(lit)) | (Resolved::Lit(lit), Resolved::Col(col)) => {
                self.check_col_literal(step, cmp, col, lit);
            }
            (Resolved::Lit(_), Resolved::Lit(_)) => {}
        }
    }

    fn check_col_literal(&mut self, step: StepId, cmp: &Comparison, col: &FlowCol, lit: &Literal) {
        let is_like = matches!(cmp.op, CompareOp::Like | CompareOp::NotLike);
        match lit {
            Literal::Int(_) | Literal::Dec(_) => {
                if col.ty != SimpleType::Number || is_like {
                    self.push(
                        step,
                        DiagnosticClass::TypeMismatch,
                        format!(
                            "comparing `{}` ({}) with the number literal {lit}",
                            col.name, col.ty
                        ),
                    );
                }
            }
            Literal::Str(s) => {
                if col.ty == SimpleType::Number {
                    self.push(
                        step,
                        DiagnosticClass::TypeMismatch,
                        format!("comparing `{}` (number) with the string '{s}'", col.name),
                    );
                } else if cmp.op == CompareOp::Eq {
                    // Advisory: flag constants that do not appear among the
                    // column's sampled values.
                    if let Some((table, column)) = &col.src {
                        if let Some(values) = self
                            .schema
                            .table(table)
                            .and_then(|t| t.column(column))
                            .and_then(|c| c.values.as_ref())
                        {
                            if !values.iter().any(|v| v == s) {
                                self.push(
                                    step,
                                    DiagnosticClass::UnknownValue,
                                    format!(
                                        "'{s}' is not among the sampled values of {table}.{column}"
                                    ),
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    fn resolve_operand(
        &mut self,
        step: StepId,
        operand: &Operand,
        scope: &PredScope,
    ) -> Option<Resolved> {
        match operand {
            Operand::Literal(lit) => Some(Resolved::Lit(lit.clone())),
            Operand::Column(c) => match scope {
                PredScope::Unary(avail) => {
                    if let Some(q) = c.qualifier {
                        self.push(
                            step,
                            DiagnosticClass::BadQualification,
                            format!(
                                "`{c}` is qualified, but this predicate sees only one input (#{})",
                                q.0
                            ),
                        );
                        return None;
                    }
                    match lookup(avail, &c.name) {
                        Some(found) => Some(Resolved::Col(found.clone())),
                        None => {
                            self.push(
                                step,
                                DiagnosticClass::WrongColumn,
                                format!("predicate column `{}` is not in scope", c.name),
                            );
                            None
                        }
                    }
                }
                PredScope::Binary { left, right } => match c.qualifier {
                    Some(q) if q == left.0 || q == right.0 => {
                        let flow = if q == left.0 { left.1 } else { right.1 };
                        match lookup(flow, &c.name) {
                            Some(found) => Some(Resolved::Col(found.clone())),
                            None => {
                                self.push(
                                    step,
                                    DiagnosticClass::BadQualification,
                                    format!(
                                        "`{c}`: step {q} does not output a column `{}`",
                                        c.name
                                    ),
                                );
                                None
                            }
                        }
                    }
                    Some(q) => {
                        self.push(
                            step,
                            DiagnosticClass::BadQualification,
                            format!("`{c}` references {q}, which is not an input of this step"),
                        );
                        None
                    }
                    None => {
                        // Unqualified in a binary predicate: bind by unique
                        // name across both inputs.
                        let in_left = lookup(left.1, &c.name);
                        let in_right = lookup(right.1, &c.name);
                        match (in_left, in_right) {
                            (Some(found), None) => Some(Resolved::Col(found.clone())),
                            (None, Some(found)) => Some(Resolved::Col(found.clone())),
                            (Some(_), Some(_)) => {
                                self.push(
                                    step,
                                    DiagnosticClass::BadQualification,
                                    format!(
                                        "`{}` is ambiguous: both inputs output it; qualify with `#n.`",
                                        c.name
                                    ),
                                );
                                None
                            }
                            (None, None) => {
                                self.push(
                                    step,
                                    DiagnosticClass::WrongColumn,
                                    format!("predicate column `{}` is not in scope", c.name),
                                );
                                None
                            }
                        }
                    }
                },
            },
        }
    }
}

/// Overwrite flow names with the node's resolved (collision-renamed) output
/// names.
fn apply_names(mut flow: Vec<FlowCol>, node: &QplNode) -> Vec<FlowCol> {
    for (col, name) in flow.iter_mut().zip(node.output_names()) {
        col.name = name;
    }
    flow
}

enum PredScope<'f> {
    Unary(&'f [FlowCol]),
    Binary {
        left: (StepId, &'f Vec<FlowCol>),
        right: (StepId, &'f Vec<FlowCol>),
    },
}

enum Resolved {
    Col(FlowCol),
    Lit(Literal),
}

fn lookup<'f>(flow: &'f [FlowCol], name: &str) -> Option<&'f FlowCol> {
    flow.iter().find(|c| c.name.eq_ignore_ascii_case(name))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse;
    use crate::schema::{ColumnDef, ForeignKey, TableDef};

    fn col(name: &str, ty: SimpleType) -> ColumnDef {
        ColumnDef {
            name: name.into(),
            simple_type: ty,
            values: None,
        }
    }

    fn world_schema() -> SchemaCatalog {
        SchemaCatalog::new(
            "world_toy",
            vec![
                TableDef {
                    name: "country".into(),
                    columns: vec![
                        col("Code", SimpleType::Text),
                        col("Name", SimpleType::Text),
                        col("HeadOfState", SimpleType::Text),
                        col("Population", SimpleType::Number),
                    ],
                    primary_key: vec!["Code".into()],
                    foreign_keys: vec![],
                },
                TableDef {
                    name: "countrylanguage".into(),
                    columns: vec![
                        col("CountryCode", SimpleType::Text),
                        col("Language", SimpleType::Text),
                        col("IsOfficial", SimpleType::Text),
                    ],
                    primary_key: vec![],
                    foreign_keys: vec![ForeignKey {
                        column: "CountryCode".into(),
                        ref_table: "country".into(),
                        ref_column: "Code".into(),
                    }],
                },
            ],
        )
        .unwrap()
    }

    const FIG_TEXT: &str = "\
#1 = Scan Table [ country ] Predicate [ HeadOfState = 'Beatrix' ] Output [ Code, HeadOfState ]
#2 = Scan Table [ countrylanguage ] Output [ CountryCode, Language, IsOfficial ]
#3 = Filter [ #2 ] Predicate [ IsOfficial = 'T' ] Output [ CountryCode, Language ]
#4 = Join [ #1, #3 ] Predicate [ #3.CountryCode = #1.Code ] Output [ #3.Language ]";

    #[test]
    fn gold_plan_validates_cleanly() {
        let diags = validate(&parse(FIG_TEXT).unwrap(), &world_schema());
        assert_eq!(diags, vec![]);
    }

    #[test]
    fn dropped_join_line_is_a_structure_error() {
        let text = "\
#1 = Scan Table [ country ] Predicate [ HeadOfState = 'Beatrix' ] Output [ Code, HeadOfState ]
#2 = Scan Table [ countrylanguage ] Output [ CountryCode, Language, IsOfficial ]
#3 = Filter [ #2 ] Predicate [ IsOfficial = 'T' ] Output [ CountryCode, Language ]";
        let plan = parse(text).unwrap();
        // Oracle: reference counting over step mentions. #1 is consumed by
        // nobody; #3 is the final step; so exactly one extra root exists.
        let consumed: Vec<u32> = plan
            .lines()
            .iter()
            .flat_map(|l| l.node.inputs.iter().map(|s| s.0))
            .collect();
        assert!(!consumed.contains(&1));
        let diags = validate(&plan, &world_schema());
        let classes: Vec<_> = diags.iter().map(|d| d.class).collect();
        assert_eq!(classes, vec![DiagnosticClass::WrongStructure]);
        assert_eq!(diags[0].step, StepId(1));
    }

    #[test]
    fn unknown_table_is_wrong_table() {
        let plan = parse("#1 = Scan Table [ Visitors ] Output [ x ]").unwrap();
        let schema = SchemaCatalog::new(
            "s",
            vec![TableDef {
                name: "Visitor".into(),
                columns: vec![col("x", SimpleType::Number)],
                primary_key: vec![],
                foreign_keys: vec![],
            }],
        )
        .unwrap();
        let diags = validate(&plan, &schema);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].class, DiagnosticClass::WrongTable);
    }

    #[test]
    fn string_on_number_column_is_type_mismatch() {
        let plan = parse(
            "#1 = Scan Table [ country ] Predicate [ Population = 'old' ] Output [ Code ]",
        )
        .unwrap();
        let diags = validate(&plan, &world_schema());
        assert!(diags
            .iter()
            .any(|d| d.class == DiagnosticClass::TypeMismatch));
    }

    #[test]
    fn number_on_text_column_is_type_mismatch() {
        let plan =
            parse("#1 = Scan Table [ country ] Predicate [ Name = 3 ] Output [ Code ]").unwrap();
        let diags = validate(&plan, &world_schema());
        assert_eq!(diags[0].class, DiagnosticClass::TypeMismatch);
    }

    #[test]
    fn unknown_output_column_is_wrong_column() {
        let plan = parse("#1 = Scan Table [ country ] Output [ Kode ]").unwrap();
        let diags = validate(&plan, &world_schema());
        assert_eq!(diags[0].class, DiagnosticClass::WrongColumn);
    }

    #[test]
    fn qualification_must_name_an_input() {
        let text = "\
#1 = Scan Table [ country ] Output [ Code ]
#2 = Scan Table [ countrylanguage ] Output [ CountryCode ]
#3 = Scan Table [ country ] Output [ Name ]
#4 = Join [ #2, #3 ] Predicate [ #2.CountryCode = #3.Name ] Output [ #1.Code ]";
        let plan = parse(text).unwrap();
        let diags = validate(&plan, &world_schema());
        assert!(diags
            .iter()
            .any(|d| d.class == DiagnosticClass::BadQualification && d.step == StepId(4)));
    }

    #[test]
    fn aggregate_output_outside_group_by_is_flagged() {
        let text = "\
#1 = Scan Table [ countrylanguage ] Output [ CountryCode, Language ]
#2 = Aggregate [ #1 ] GroupBy [ CountryCode ] Output [ COUNT(*) AS n, Language ]";
        let plan = parse(text).unwrap();
        let diags = validate(&plan, &world_schema());
        assert!(diags
            .iter()
            .any(|d| d.class == DiagnosticClass::BadAggregate));
    }

    #[test]
    fn sum_over_text_is_flagged() {
        let text = "\
#1 = Scan Table [ country ] Output [ Name ]
#2 = Aggregate [ #1 ] Output [ SUM(Name) AS s ]";
        let diags = validate(&parse(text).unwrap(), &world_schema());
        assert!(diags
            .iter()
            .any(|d| d.class == DiagnosticClass::BadAggregate));
    }

    #[test]
    fn join_not_over_key_pair_warns() {
        let text = "\
#1 = Scan Table [ country ] Output [ Code, Name ]
#2 = Scan Table [ countrylanguage ] Output [ CountryCode, Language ]
#3 = Join [ #1, #2 ] Predicate [ #1.Name = #2.Language ] Output [ #1.Code ]";
        let diags = validate(&parse(text).unwrap(), &world_schema());
        assert!(diags.iter().any(|d| d.class == DiagnosticClass::BadJoinKey));
        assert!(!has_errors(&diags));
    }

    #[test]
    fn constant_not_in_sampled_values_warns() {
        let mut schema = world_schema();
        schema.tables[1].columns[2].values = Some(vec!["T".into(), "F".into()]);
        let plan = parse(
            "#1 = Scan Table [ countrylanguage ] Predicate [ IsOfficial = 'Y' ] Output [ Language ]",
        )
        .unwrap();
        let diags = validate(&plan, &schema);
        assert_eq!(diags[0].class, DiagnosticClass::UnknownValue);
        assert_eq!(diags[0].severity(), Severity::Warning);

        let ok = parse(
            "#1 = Scan Table [ countrylanguage ] Predicate [ IsOfficial = 'T' ] Output [ Language ]",
        )
        .unwrap();
        assert_eq!(validate(&ok, &schema), vec![]);
    }

    #[test]
    fn union_arity_mismatch_is_structural() {
        let text = "\
#1 = Scan Table [ country ] Output [ Code, Name ]
#2 = Scan Table [ countrylanguage ] Output [ Language ]
#3 = Union [ #1, #2 ] Output [ #1.Code ]";
        let diags = validate(&parse(text).unwrap(), &world_schema());
        assert!(diags
            .iter()
            .any(|d| d.class == DiagnosticClass::WrongStructure));
    }

    #[test]
    fn duplicate_unary_outputs_are_flagged() {
        let plan = parse("#1 = Scan Table [ country ] Output [ Code, Code ]").unwrap();
        let diags = validate(&plan, &world_schema());
        assert!(diags
            .iter()
            .any(|d| d.class == DiagnosticClass::WrongColumn));
    }

    #[test]
    fn adding_a_column_never_introduces_errors() {
        let plans = [
            FIG_TEXT.to_string(),
            "#1 = Scan Table [ country ] Output [ Kode ]".to_string(),
            "#1 = Scan Table [ country ] Predicate [ Population = 'old' ] Output [ Code ]"
                .to_string(),
        ];
        for text in &plans {
            let plan = parse(text).unwrap();
            let mut schema = world_schema();
            let before = validate(&plan, &schema)
                .into_iter()
                .filter(|d| d.severity() == Severity::Error)
                .count();
            schema.tables[0]
                .columns
                .push(col("brand_new_col", SimpleType::Date));
            let after = validate(&plan, &schema)
                .into_iter()
                .filter(|d| d.severity() == Severity::Error)
                .count();
            assert!(after <= before);
        }
    }

    #[test]
    fn diagnostics_serialize_to_json_lines() {
        let d = Diagnostic {
            step: StepId(2),
            class: DiagnosticClass::WrongColumn,
            message: "output column `x` is not a column of #1".into(),
        };
        let parsed: serde_json::Value = serde_json::from_str(&d.to_json()).unwrap();
        assert_eq!(parsed["step"], 2);
        assert_eq!(parsed["class"], "WrongColumn");
        assert_eq!(parsed["severity"], "error");
    }
}

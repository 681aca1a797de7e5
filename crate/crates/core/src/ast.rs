//! Abstract syntax of QPL plans: numbered operator lines forming a rooted
//! tree over step references, ordered bottom-up.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// 1-based step index; `#3` on the surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StepId(pub u32);

impl fmt::Display for StepId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The nine stream operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum OpKind {
    #[default]
    Scan,
    Aggregate,
    Filter,
    Sort,
    TopSort,
    Join,
    Except,
    Intersect,
    Union,
}

impl OpKind {
    pub fn name(&self) -> &'static str {
        match self {
            OpKind::Scan => "Scan",
            OpKind::Aggregate => "Aggregate",
            OpKind::Filter => "Filter",
            OpKind::Sort => "Sort",
            OpKind::TopSort => "TopSort",
            OpKind::Join => "Join",
            OpKind::Except => "Except",
            OpKind::Intersect => "Intersect",
            OpKind::Union => "Union",
        }
    }

    /// Number of input streams: 0 for Scan, 1 for unary, 2 for binary.
    pub fn arity(&self) -> usize {
        match self {
            OpKind::Scan => 0,
            OpKind::Aggregate | OpKind::Filter | OpKind::Sort | OpKind::TopSort => 1,
            OpKind::Join | OpKind::Except | OpKind::Intersect | OpKind::Union => 2,
        }
    }

    pub fn is_binary(&self) -> bool {
        self.arity() == 2
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Column reference, optionally qualified by the producing step (`#2.Code`).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRef {
    pub qualifier: Option<StepId>,
    pub name: String,
}

impl ColumnRef {
    pub fn plain(name: impl Into<String>) -> Self {
        ColumnRef {
            qualifier: None,
            name: name.into(),
        }
    }

    pub fn qualified(step: u32, name: impl Into<String>) -> Self {
        ColumnRef {
            qualifier: Some(StepId(step)),
            name: name.into(),
        }
    }
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.qualifier {
            Some(step) => write!(f, "{step}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Str(String),
    Int(i64),
    Dec(f64),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Str(s) => write!(f, "'{}'", s.replace('\'', "''")),
            Literal::Int(i) => write!(f, "{i}"),
            Literal::Dec(d) => {
                if d.fract() == 0.0 && d.abs() < 1e15 {
                    write!(f, "{d:.1}")
                } else {
                    write!(f, "{d}")
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Column(ColumnRef),
    Literal(Literal),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Column(c) => c.fmt(f),
            Operand::Literal(l) => l.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Like,
    NotLike,
    IsNull,
    IsNotNull,
}

impl CompareOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "<>",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
            CompareOp::Like => "LIKE",
            CompareOp::NotLike => "NOT LIKE",
            CompareOp::IsNull => "IS NULL",
            CompareOp::IsNotNull => "IS NOT NULL",
        }
    }

    /// IS NULL and IS NOT NULL take no right-hand operand.
    pub fn takes_rhs(&self) -> bool {
        !matches!(self, CompareOp::IsNull | CompareOp::IsNotNull)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub lhs: Operand,
    pub op: CompareOp,
    pub rhs: Option<Operand>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.rhs {
            Some(rhs) => write!(f, "{} {} {}", self.lhs, self.op.symbol(), rhs),
            None => write!(f, "{} {}", self.lhs, self.op.symbol()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connective {
    And,
    Or,
}

impl Connective {
    pub fn keyword(&self) -> &'static str {
        match self {
            Connective::And => "AND",
            Connective::Or => "OR",
        }
    }
}

/// A flat comparison chain; connectives apply left-associatively with no
/// precedence between AND and OR.
#[derive(Debug, Clone, PartialEq)]
pub struct Predicate {
    pub first: Comparison,
    pub rest: Vec<(Connective, Comparison)>,
}

impl Predicate {
    pub fn single(cmp: Comparison) -> Self {
        Predicate {
            first: cmp,
            rest: Vec::new(),
        }
    }

    pub fn comparisons(&self) -> impl Iterator<Item = &Comparison> {
        std::iter::once(&self.first).chain(self.rest.iter().map(|(_, c)| c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggFunc {
    Count,
    Sum,
    Avg,
    Min,
    Max,
}

impl AggFunc {
    pub fn name(&self) -> &'static str {
        match self {
            AggFunc::Count => "COUNT",
            AggFunc::Sum => "SUM",
            AggFunc::Avg => "AVG",
            AggFunc::Min => "MIN",
            AggFunc::Max => "MAX",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AggArg {
    Star,
    Column(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutputExpr {
    Column(ColumnRef),
    Aggregate {
        func: AggFunc,
        arg: AggArg,
        distinct: bool,
        alias: String,
    },
}

impl fmt::Display for OutputExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputExpr::Column(c) => c.fmt(f),
            OutputExpr::Aggregate {
                func,
                arg,
                distinct,
                alias,
            } => {
                let arg = match arg {
                    AggArg::Star => "*".to_string(),
                    AggArg::Column(c) => c.clone(),
                };
                if *distinct {
                    write!(f, "{}(DISTINCT {arg}) AS {alias}", func.name())
                } else {
                    write!(f, "{}({arg}) AS {alias}", func.name())
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SortDir {
    Asc,
    Desc,
}

impl SortDir {
    pub fn keyword(&self) -> &'static str {
        match self {
            SortDir::Asc => "ASC",
            SortDir::Desc => "DESC",
        }
    }
}

/// One operator node. Clause fields are optional per the grammar; which
/// combinations are legal for each operator is enforced by
/// [`QplPlan::new`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct QplNode {
    pub op: OpKind,
    pub inputs: Vec<StepId>,
    /// Scan only.
    pub table_name: Option<String>,
    pub predicate: Option<Predicate>,
    /// Aggregate only.
    pub group_by: Option<Vec<String>>,
    /// Sort / TopSort.
    pub order_by: Option<Vec<(String, SortDir)>>,
    /// TopSort only.
    pub rows: Option<u64>,
    /// Sort / TopSort.
    pub with_ties: Option<bool>,
    /// Scan / Filter / Join.
    pub distinct: Option<bool>,
    pub output: Vec<OutputExpr>,
}


impl QplNode {
    /// Every step reference mentioned anywhere in the node's arguments:
    /// inputs, predicate operands, and qualified output columns.
    pub fn referenced_steps(&self) -> Vec<StepId> {
        let mut steps = self.inputs.clone();
        if let Some(pred) = &self.predicate {
            for cmp in pred.comparisons() {
                for operand in std::iter::once(&cmp.lhs).chain(cmp.rhs.iter()) {
                    if let Operand::Column(ColumnRef {
                        qualifier: Some(s), ..
                    }) = operand
                    {
                        steps.push(*s);
                    }
                }
            }
        }
        for out in &self.output {
            if let OutputExpr::Column(ColumnRef {
                qualifier: Some(s), ..
            }) = out
            {
                steps.push(*s);
            }
        }
        steps
    }

    /// The column names this node emits, in output-list order. Aggregates
    /// contribute their alias; qualified references contribute the bare
    /// column name. Repeated names are disambiguated deterministically with
    /// `_2`, `_3`, ... suffixes (self-join collisions).
    pub fn output_names(&self) -> Vec<String> {
        let mut used: HashSet<String> = HashSet::new();
        let mut names = Vec::with_capacity(self.output.len());
        for out in &self.output {
            let base = match out {
                OutputExpr::Column(c) => c.name.clone(),
                OutputExpr::Aggregate { alias, .. } => alias.clone(),
            };
            let mut candidate = base.clone();
            let mut n = 1;
            while !used.insert(candidate.to_lowercase()) {
                n += 1;
                candidate = format!("{base}_{n}");
            }
            names.push(candidate);
        }
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QplLine {
    pub step: StepId,
    pub node: QplNode,
}

/// A parsed plan: steps numbered exactly 1..N, all references pointing to
/// earlier steps. Construction rejects numbering and ordering violations;
/// connectedness (single root, single consumer) is diagnosed separately by
/// [`plan_root`] and the validator so that malformed-but-grammatical plans
/// can still be inspected.
#[derive(Debug, Clone, PartialEq)]
pub struct QplPlan {
    lines: Vec<QplLine>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("plan has no steps")]
    Empty,
    #[error("step {found} out of order: expected #{expected}")]
    BadNumbering { expected: u32, found: StepId },
    #[error("step {step} references {reference}, which is not an earlier step")]
    ForwardReference { step: StepId, reference: StepId },
    #[error("step {step}: {op} takes {expected} input(s), found {found}")]
    ArityMismatch {
        step: StepId,
        op: OpKind,
        expected: usize,
        found: usize,
    },
    #[error("step {step}: {op} requires clause {clause}")]
    MissingClause {
        step: StepId,
        op: OpKind,
        clause: &'static str,
    },
    #[error("step {step}: {op} does not accept clause {clause}")]
    UnexpectedClause {
        step: StepId,
        op: OpKind,
        clause: &'static str,
    },
    #[error("step {step}: output list is empty")]
    EmptyOutput { step: StepId },
    #[error("plan is not a connected tree: steps {0:?} are all unconsumed")]
    MultipleRoots(Vec<StepId>),
}

impl QplPlan {
    pub fn new(lines: Vec<(u32, QplNode)>) -> Result<Self, StructureError> {
        if lines.is_empty() {
            return Err(StructureError::Empty);
        }
        for (i, (step, node)) in lines.iter().enumerate() {
            let step = StepId(*step);
            let expected = i as u32 + 1;
            if step.0 != expected {
                return Err(StructureError::BadNumbering {
                    expected,
                    found: step,
                });
            }
            for reference in node.referenced_steps() {
                if reference.0 == 0 || reference.0 >= step.0 {
                    return Err(StructureError::ForwardReference { step, reference });
                }
            }
            check_shape(step, node)?;
        }
        Ok(QplPlan {
            lines: lines
                .into_iter()
                .map(|(step, node)| QplLine {
                    step: StepId(step),
                    node,
                })
                .collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn lines(&self) -> &[QplLine] {
        &self.lines
    }

    pub fn node(&self, step: StepId) -> Option<&QplNode> {
        self.lines.get(step.0 as usize - 1).map(|l| &l.node)
    }

    /// Steps each step is consumed by (as a plan input, not a predicate or
    /// output mention), one entry per consuming input slot so `[ #1, #1 ]`
    /// counts twice.
    pub fn consumers(&self, step: StepId) -> Vec<StepId> {
        self.lines
            .iter()
            .flat_map(|l| {
                l.node
                    .inputs
                    .iter()
                    .filter(move |s| **s == step)
                    .map(move |_| l.step)
            })
            .collect()
    }
}

/// The unique final step no other step consumes — the plan's root.
pub fn plan_root(plan: &QplPlan) -> Result<StepId, StructureError> {
    let consumed: HashSet<StepId> = plan
        .lines()
        .iter()
        .flat_map(|l| l.node.inputs.iter().copied())
        .collect();
    let roots: Vec<StepId> = plan
        .lines()
        .iter()
        .map(|l| l.step)
        .filter(|s| !consumed.contains(s))
        .collect();
    match roots.as_slice() {
        [root] => Ok(*root),
        _ => Err(StructureError::MultipleRoots(roots)),
    }
}

/// The column names `step` emits, in output-list order (aggregate aliases
/// for aggregate expressions). Pure over the AST.
pub fn output_arity(plan: &QplPlan, step: StepId) -> Vec<String> {
    plan.node(step)
        .map(|n| n.output_names())
        .unwrap_or_default()
}

/// Extract the subtree rooted at `step` as a standalone plan, renumbering
/// steps to 1..M while preserving relative order. Every QPL sub-plan is a
/// valid executable plan in its own right.
pub fn subplan(plan: &QplPlan, step: StepId) -> Result<QplPlan, StructureError> {
    let mut keep: Vec<StepId> = Vec::new();
    let mut stack = vec![step];
    let mut seen = HashSet::new();
    while let Some(s) = stack.pop() {
        if seen.insert(s) {
            keep.push(s);
            if let Some(node) = plan.node(s) {
                stack.extend(node.inputs.iter().copied());
            }
        }
    }
    keep.sort();
    let remap: std::collections::HashMap<StepId, u32> = keep
        .iter()
        .enumerate()
        .map(|(i, s)| (*s, i as u32 + 1))
        .collect();
    let remap_ref = |c: &mut ColumnRef| {
        if let Some(q) = c.qualifier {
            c.qualifier = Some(StepId(remap[&q]));
        }
    };
    let lines = keep
        .iter()
        .map(|s| {
            let mut node = plan.node(*s).expect("kept step exists").clone();
            for input in &mut node.inputs {
                *input = StepId(remap[input]);
            }
            if let Some(pred) = &mut node.predicate {
                for cmp in std::iter::once(&mut pred.first)
                    .chain(pred.rest.iter_mut().map(|(_, c)| c))
                {
                    if let Operand::Column(c) = &mut cmp.lhs {
                        remap_ref(c);
                    }
                    if let Some(Operand::Column(c)) = &mut cmp.rhs {
                        remap_ref(c);
                    }
                }
            }
            for out in &mut node.output {
                if let OutputExpr::Column(c) = out {
                    remap_ref(c);
                }
            }
            (remap[s], node)
        })
        .collect();
    QplPlan::new(lines)
}

fn check_shape(step: StepId, node: &QplNode) -> Result<(), StructureError> {
    let op = node.op;
    let expected = op.arity();
    if node.inputs.len() != expected {
        return Err(StructureError::ArityMismatch {
            step,
            op,
            expected,
            found: node.inputs.len(),
        });
    }
    if node.output.is_empty() {
        return Err(StructureError::EmptyOutput { step });
    }
    let missing = |clause| StructureError::MissingClause { step, op, clause };
    let unexpected = |clause| StructureError::UnexpectedClause { step, op, clause };

    if (op == OpKind::Scan) != node.table_name.is_some() {
        return Err(if op == OpKind::Scan {
            missing("Table")
        } else {
            unexpected("Table")
        });
    }
    match op {
        OpKind::Filter | OpKind::Except if node.predicate.is_none() => {
            return Err(missing("Predicate"))
        }
        OpKind::Aggregate | OpKind::Sort | OpKind::TopSort | OpKind::Union
            if node.predicate.is_some() =>
        {
            return Err(unexpected("Predicate"))
        }
        _ => {}
    }
    if node.group_by.is_some() && op != OpKind::Aggregate {
        return Err(unexpected("GroupBy"));
    }
    match op {
        OpKind::Sort | OpKind::TopSort => {
            if node.order_by.as_ref().is_none_or(|o| o.is_empty()) {
                return Err(missing("OrderBy"));
            }
        }
        _ if node.order_by.is_some() => return Err(unexpected("OrderBy")),
        _ => {}
    }
    if op == OpKind::TopSort {
        if node.rows.is_none() {
            return Err(missing("Rows"));
        }
    } else if node.rows.is_some() {
        return Err(unexpected("Rows"));
    }
    if node.with_ties.is_some() && !matches!(op, OpKind::Sort | OpKind::TopSort) {
        return Err(unexpected("WithTies"));
    }
    if node.distinct.is_some() && !matches!(op, OpKind::Scan | OpKind::Filter | OpKind::Join) {
        return Err(unexpected("Distinct"));
    }
    for out in &node.output {
        match out {
            OutputExpr::Aggregate { func, arg, .. } => {
                if op != OpKind::Aggregate {
                    return Err(unexpected("aggregate output"));
                }
                if matches!(arg, AggArg::Star) && *func != AggFunc::Count {
                    return Err(unexpected("* argument"));
                }
            }
            OutputExpr::Column(c) => {
                if op.is_binary() && c.qualifier.is_none() {
                    return Err(missing("qualified output column"));
                }
                if !op.is_binary() && c.qualifier.is_some() {
                    return Err(unexpected("qualified output column"));
                }
            }
        }
    }
    Ok(())
}

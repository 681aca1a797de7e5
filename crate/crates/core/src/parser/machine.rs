//! Token-level incremental parser for QPL.
//!
//! The grammar is regular (numbered lines with a fixed clause order and flat
//! comparison lists), so the parser is an explicit state machine fed one
//! token at a time. Each state knows exactly which tokens it accepts, which
//! gives three things at once: precise rejection positions with expected
//! token sets, a sound Continuable/Rejected decision for partial trailing
//! tokens, and the ability to synthesize a valid continuation from any live
//! state (the constrained-decoding contract).
//!
//! Step numbering (`1..N` in order) and backward-only references are
//! enforced during feeding; they are prefix-decidable. Connectedness is not
//! (a later line can always consume an open root), so it is left to the
//! validator.

use crate::ast::{
    AggArg, AggFunc, ColumnRef, CompareOp, Comparison, Connective, Literal, OpKind, Operand,
    OutputExpr, Predicate, QplNode, QplPlan, SortDir, StepId,
};
use crate::schema::SchemaCatalog;

use super::lexer::{Partial, Tok};

/// Words that cannot be used as identifiers (exact-case match).
pub(crate) const RESERVED: &[&str] = &[
    "Scan", "Table", "Aggregate", "Filter", "Sort", "TopSort", "Join", "Except", "Intersect",
    "Union", "Predicate", "Distinct", "DISTINCT", "Output", "GroupBy", "OrderBy", "WithTies",
    "Rows", "AND", "OR", "ASC", "DESC", "LIKE", "NOT", "IS", "NULL", "AS", "COUNT", "SUM", "AVG",
    "MIN", "MAX", "true", "false",
];

fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

const OP_NAMES: &[(&str, OpKind)] = &[
    ("Scan", OpKind::Scan),
    ("Aggregate", OpKind::Aggregate),
    ("Filter", OpKind::Filter),
    ("Sort", OpKind::Sort),
    ("TopSort", OpKind::TopSort),
    ("Join", OpKind::Join),
    ("Except", OpKind::Except),
    ("Intersect", OpKind::Intersect),
    ("Union", OpKind::Union),
];

const AGG_NAMES: &[(&str, AggFunc)] = &[
    ("COUNT", AggFunc::Count),
    ("SUM", AggFunc::Sum),
    ("AVG", AggFunc::Avg),
    ("MIN", AggFunc::Min),
    ("MAX", AggFunc::Max),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BoolClause {
    Distinct,
    WithTies,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum St {
    LineStart,
    StepNum,
    AfterStepNum,
    OpKeyword,
    ScanTableKw,
    ScanLB,
    ScanTableName,
    ScanRB,
    InputLB,
    InputHash1,
    InputNum1,
    InputAfter1,
    InputHash2,
    InputNum2,
    InputRB,
    ClauseStart,
    PredLB,
    CmpLhs,
    CmpLhsQNum,
    CmpLhsQDot,
    CmpLhsQCol,
    CmpOp,
    CmpNot,
    CmpIs,
    CmpIsNot,
    CmpRhs,
    CmpRhsQNum,
    CmpRhsQDot,
    CmpRhsQCol,
    CmpNext,
    BoolLB(BoolClause),
    BoolVal(BoolClause),
    BoolRB(BoolClause),
    GroupLB,
    GroupCol,
    GroupNext,
    OrderLB,
    OrderCol,
    OrderDir,
    OrderNext,
    RowsLB,
    RowsVal,
    RowsRB,
    OutLB,
    OutItem,
    OutQNum,
    OutQDot,
    OutQCol,
    AggLP,
    AggArgStart,
    AggArgCol,
    AggRP,
    AggAs,
    AggAlias,
    OutNext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutCtx {
    Plain,
    Agg,
    Qualif,
}

fn out_ctx(op: OpKind) -> OutCtx {
    match op {
        OpKind::Aggregate => OutCtx::Agg,
        OpKind::Join | OpKind::Except | OpKind::Intersect | OpKind::Union => OutCtx::Qualif,
        _ => OutCtx::Plain,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clause {
    Predicate,
    Distinct,
    GroupBy,
    OrderBy,
    Rows,
    WithTies,
    Output,
}

impl Clause {
    fn keyword(&self) -> &'static str {
        match self {
            Clause::Predicate => "Predicate",
            Clause::Distinct => "Distinct",
            Clause::GroupBy => "GroupBy",
            Clause::OrderBy => "OrderBy",
            Clause::Rows => "Rows",
            Clause::WithTies => "WithTies",
            Clause::Output => "Output",
        }
    }
}

#[derive(Default)]
struct Builder {
    op: Option<OpKind>,
    table: Option<String>,
    inputs: Vec<StepId>,
    pred_first: Option<Comparison>,
    pred_rest: Vec<(Connective, Comparison)>,
    pred_seen: bool,
    pend_conn: Option<Connective>,
    pend_lhs: Option<Operand>,
    pend_op: Option<CompareOp>,
    pend_qual: Option<u32>,
    group_by: Option<Vec<String>>,
    order_by: Option<Vec<(String, SortDir)>>,
    pend_order_col: Option<String>,
    rows: Option<u64>,
    with_ties: Option<bool>,
    distinct: Option<bool>,
    output: Vec<OutputExpr>,
    pend_agg_func: Option<AggFunc>,
    pend_agg_distinct: bool,
    pend_agg_arg: Option<AggArg>,
}

pub(crate) struct Machine<'s> {
    schema: Option<&'s SchemaCatalog>,
    st: St,
    lines: Vec<(u32, QplNode)>,
    cur: Builder,
}

impl<'s> Machine<'s> {
    pub(crate) fn new(schema: Option<&'s SchemaCatalog>) -> Self {
        Machine {
            schema,
            st: St::LineStart,
            lines: Vec::new(),
            cur: Builder::default(),
        }
    }

    /// A full program has been consumed: at a line boundary with at least
    /// one committed line.
    pub(crate) fn accepting(&self) -> bool {
        self.st == St::LineStart && !self.lines.is_empty()
    }

    pub(crate) fn into_plan(self) -> Result<QplPlan, crate::ast::StructureError> {
        QplPlan::new(self.lines)
    }

    fn op(&self) -> OpKind {
        self.cur.op.expect("operator set before clause states")
    }

    fn next_step(&self) -> u32 {
        self.lines.len() as u32 + 1
    }

    fn max_ref(&self) -> u32 {
        self.lines.len() as u32
    }

    fn allowed_clauses(&self) -> Vec<Clause> {
        let b = &self.cur;
        let mut out = Vec::new();
        match self.op() {
            OpKind::Scan | OpKind::Join => {
                if !b.pred_seen && b.distinct.is_none() {
                    out.push(Clause::Predicate);
                }
                if b.distinct.is_none() {
                    out.push(Clause::Distinct);
                }
                out.push(Clause::Output);
            }
            OpKind::Aggregate => {
                if b.group_by.is_none() {
                    out.push(Clause::GroupBy);
                }
                out.push(Clause::Output);
            }
            OpKind::Filter => {
                if !b.pred_seen {
                    out.push(Clause::Predicate);
                } else {
                    if b.distinct.is_none() {
                        out.push(Clause::Distinct);
                    }
                    out.push(Clause::Output);
                }
            }
            OpKind::Sort => {
                if b.order_by.is_none() {
                    out.push(Clause::OrderBy);
                } else {
                    if b.with_ties.is_none() {
                        out.push(Clause::WithTies);
                    }
                    out.push(Clause::Output);
                }
            }
            OpKind::TopSort => {
                if b.rows.is_none() {
                    out.push(Clause::Rows);
                } else if b.order_by.is_none() {
                    out.push(Clause::OrderBy);
                } else {
                    if b.with_ties.is_none() {
                        out.push(Clause::WithTies);
                    }
                    out.push(Clause::Output);
                }
            }
            OpKind::Except => {
                if !b.pred_seen {
                    out.push(Clause::Predicate);
                } else {
                    out.push(Clause::Output);
                }
            }
            OpKind::Intersect => {
                if !b.pred_seen {
                    out.push(Clause::Predicate);
                }
                out.push(Clause::Output);
            }
            OpKind::Union => out.push(Clause::Output),
        }
        out
    }

    fn scan_table_def(&self) -> Option<&crate::schema::TableDef> {
        let schema = self.schema?;
        let table = self.cur.table.as_deref()?;
        schema.table(table)
    }

    /// The scanned-output column check applies only to Scan nodes.
    fn checks_scan_columns(&self) -> bool {
        self.schema.is_some() && self.cur.op == Some(OpKind::Scan)
    }

    fn commit_comparison(&mut self) {
        let cmp = Comparison {
            lhs: self.cur.pend_lhs.take().expect("lhs pending"),
            op: self.cur.pend_op.take().expect("op pending"),
            rhs: None,
        };
        self.push_comparison(cmp);
    }

    fn commit_comparison_rhs(&mut self, rhs: Operand) {
        let cmp = Comparison {
            lhs: self.cur.pend_lhs.take().expect("lhs pending"),
            op: self.cur.pend_op.take().expect("op pending"),
            rhs: Some(rhs),
        };
        self.push_comparison(cmp);
    }

    fn push_comparison(&mut self, cmp: Comparison) {
        match self.cur.pend_conn.take() {
            None => self.cur.pred_first = Some(cmp),
            Some(conn) => self.cur.pred_rest.push((conn, cmp)),
        }
    }

    fn commit_line(&mut self) {
        let b = std::mem::take(&mut self.cur);
        let predicate = b.pred_first.map(|first| Predicate {
            first,
            rest: b.pred_rest,
        });
        let node = QplNode {
            op: b.op.expect("operator set"),
            inputs: b.inputs,
            table_name: b.table,
            predicate,
            group_by: b.group_by,
            order_by: b.order_by,
            rows: b.rows,
            with_ties: b.with_ties,
            distinct: b.distinct,
            output: b.output,
        };
        let step = self.next_step();
        self.lines.push((step, node));
        self.st = St::LineStart;
    }

    /// Consume one token. On rejection the machine state is left unchanged
    /// so `expected()` describes the failure point.
    pub(crate) fn feed(&mut self, token: &Tok) -> Result<(), ()> {
        use St::*;
        match (self.st, token) {
            (LineStart, Tok::Hash) => self.st = StepNum,
            (StepNum, Tok::Int(v)) if *v == self.next_step() as i64 => self.st = AfterStepNum,
            (AfterStepNum, Tok::Eq) => self.st = OpKeyword,
            (OpKeyword, Tok::Word(w)) => {
                let op = OP_NAMES
                    .iter()
                    .find(|(name, _)| name == w)
                    .map(|(_, op)| *op)
                    .ok_or(())?;
                // The first line cannot reference an earlier step, so it
                // must be a Scan.
                if self.lines.is_empty() && op != OpKind::Scan {
                    return Err(());
                }
                self.cur.op = Some(op);
                self.st = match op.arity() {
                    0 => ScanTableKw,
                    _ => InputLB,
                };
            }
            (ScanTableKw, Tok::Word(w)) if w == "Table" => self.st = ScanLB,
            (ScanLB, Tok::LBracket) => self.st = ScanTableName,
            (ScanTableName, Tok::Word(w)) if !is_reserved(w) => {
                if let Some(schema) = self.schema {
                    if schema.table(w).is_none() {
                        return Err(());
                    }
                }
                self.cur.table = Some(w.clone());
                self.st = ScanRB;
            }
            (ScanRB, Tok::RBracket) => self.st = ClauseStart,

            (InputLB, Tok::LBracket) => self.st = InputHash1,
            (InputHash1, Tok::Hash) => self.st = InputNum1,
            (InputNum1, Tok::Int(v)) if *v >= 1 && *v <= self.max_ref() as i64 => {
                self.cur.inputs.push(StepId(*v as u32));
                self.st = InputAfter1;
            }
            (InputAfter1, Tok::RBracket) if self.op().arity() == 1 => self.st = ClauseStart,
            (InputAfter1, Tok::Comma) if self.op().arity() == 2 => self.st = InputHash2,
            (InputHash2, Tok::Hash) => self.st = InputNum2,
            (InputNum2, Tok::Int(v)) if *v >= 1 && *v <= self.max_ref() as i64 => {
                self.cur.inputs.push(StepId(*v as u32));
                self.st = InputRB;
            }
            (InputRB, Tok::RBracket) => self.st = ClauseStart,

            (ClauseStart, Tok::Word(w)) => {
                let clause = self
                    .allowed_clauses()
                    .into_iter()
                    .find(|c| c.keyword() == w)
                    .ok_or(())?;
                self.st = match clause {
                    Clause::Predicate => {
                        self.cur.pred_seen = true;
                        PredLB
                    }
                    Clause::Distinct => BoolLB(BoolClause::Distinct),
                    Clause::WithTies => BoolLB(BoolClause::WithTies),
                    Clause::GroupBy => GroupLB,
                    Clause::OrderBy => OrderLB,
                    Clause::Rows => RowsLB,
                    Clause::Output => OutLB,
                };
            }

            (PredLB, Tok::LBracket) => self.st = CmpLhs,
            (CmpLhs | CmpRhs, Tok::Word(w)) if !is_reserved(w) => {
                let operand = Operand::Column(ColumnRef::plain(w.clone()));
                if self.st == CmpLhs {
                    self.cur.pend_lhs = Some(operand);
                    self.st = CmpOp;
                } else {
                    self.commit_comparison_rhs(operand);
                    self.st = CmpNext;
                }
            }
            (CmpLhs | CmpRhs, Tok::Str(s)) => {
                let operand = Operand::Literal(Literal::Str(s.clone()));
                if self.st == CmpLhs {
                    self.cur.pend_lhs = Some(operand);
                    self.st = CmpOp;
                } else {
                    self.commit_comparison_rhs(operand);
                    self.st = CmpNext;
                }
            }
            (CmpLhs | CmpRhs, Tok::Int(v)) => {
                let operand = Operand::Literal(Literal::Int(*v));
                if self.st == CmpLhs {
                    self.cur.pend_lhs = Some(operand);
                    self.st = CmpOp;
                } else {
                    self.commit_comparison_rhs(operand);
                    self.st = CmpNext;
                }
            }
            (CmpLhs | CmpRhs, Tok::Dec(v)) => {
                let operand = Operand::Literal(Literal::Dec(*v));
                if self.st == CmpLhs {
                    self.cur.pend_lhs = Some(operand);
                    self.st = CmpOp;
                } else {
                    self.commit_comparison_rhs(operand);
                    self.st = CmpNext;
                }
            }
            (CmpLhs, Tok::Hash) => self.st = CmpLhsQNum,
            (CmpLhsQNum, Tok::Int(v)) if *v >= 1 && *v <= self.max_ref() as i64 => {
                self.cur.pend_qual = Some(*v as u32);
                self.st = CmpLhsQDot;
            }
            (CmpLhsQDot, Tok::Dot) => self.st = CmpLhsQCol,
            (CmpLhsQCol, Tok::Word(w)) if !is_reserved(w) => {
                let step = self.cur.pend_qual.take().expect("qualifier pending");
                self.cur.pend_lhs = Some(Operand::Column(ColumnRef::qualified(step, w.clone())));
                self.st = CmpOp;
            }
            (CmpRhs, Tok::Hash) => self.st = CmpRhsQNum,
            (CmpRhsQNum, Tok::Int(v)) if *v >= 1 && *v <= self.max_ref() as i64 => {
                self.cur.pend_qual = Some(*v as u32);
                self.st = CmpRhsQDot;
            }
            (CmpRhsQDot, Tok::Dot) => self.st = CmpRhsQCol,
            (CmpRhsQCol, Tok::Word(w)) if !is_reserved(w) => {
                let step = self.cur.pend_qual.take().expect("qualifier pending");
                let operand = Operand::Column(ColumnRef::qualified(step, w.clone()));
                self.commit_comparison_rhs(operand);
                self.st = CmpNext;
            }

            (CmpOp, Tok::Eq) => {
                self.cur.pend_op = Some(CompareOp::Eq);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Ne) => {
                self.cur.pend_op = Some(CompareOp::Ne);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Lt) => {
                self.cur.pend_op = Some(CompareOp::Lt);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Le) => {
                self.cur.pend_op = Some(CompareOp::Le);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Gt) => {
                self.cur.pend_op = Some(CompareOp::Gt);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Ge) => {
                self.cur.pend_op = Some(CompareOp::Ge);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Word(w)) if w == "LIKE" => {
                self.cur.pend_op = Some(CompareOp::Like);
                self.st = CmpRhs;
            }
            (CmpOp, Tok::Word(w)) if w == "NOT" => self.st = CmpNot,
            (CmpOp, Tok::Word(w)) if w == "IS" => self.st = CmpIs,
            (CmpNot, Tok::Word(w)) if w == "LIKE" => {
                self.cur.pend_op = Some(CompareOp::NotLike);
                self.st = CmpRhs;
            }
            (CmpIs, Tok::Word(w)) if w == "NULL" => {
                self.cur.pend_op = Some(CompareOp::IsNull);
                self.commit_comparison();
                self.st = CmpNext;
            }
            (CmpIs, Tok::Word(w)) if w == "NOT" => self.st = CmpIsNot,
            (CmpIsNot, Tok::Word(w)) if w == "NULL" => {
                self.cur.pend_op = Some(CompareOp::IsNotNull);
                self.commit_comparison();
                self.st = CmpNext;
            }
            (CmpNext, Tok::Word(w)) if w == "AND" => {
                self.cur.pend_conn = Some(Connective::And);
                self.st = CmpLhs;
            }
            (CmpNext, Tok::Word(w)) if w == "OR" => {
                self.cur.pend_conn = Some(Connective::Or);
                self.st = CmpLhs;
            }
            (CmpNext, Tok::RBracket) => self.st = ClauseStart,

            (BoolLB(c), Tok::LBracket) => self.st = BoolVal(c),
            (BoolVal(c), Tok::Word(w)) if w == "true" || w == "false" => {
                let value = w == "true";
                match c {
                    BoolClause::Distinct => self.cur.distinct = Some(value),
                    BoolClause::WithTies => self.cur.with_ties = Some(value),
                }
                self.st = BoolRB(c);
            }
            (BoolRB(_), Tok::RBracket) => self.st = ClauseStart,

            (GroupLB, Tok::LBracket) => self.st = GroupCol,
            (GroupCol, Tok::Word(w)) if !is_reserved(w) => {
                self.cur.group_by.get_or_insert_with(Vec::new).push(w.clone());
                self.st = GroupNext;
            }
            (GroupNext, Tok::Comma) => self.st = GroupCol,
            (GroupNext, Tok::RBracket) => self.st = ClauseStart,

            (OrderLB, Tok::LBracket) => self.st = OrderCol,
            (OrderCol, Tok::Word(w)) if !is_reserved(w) => {
                self.cur.pend_order_col = Some(w.clone());
                self.st = OrderDir;
            }
            (OrderDir, Tok::Word(w)) if w == "ASC" || w == "DESC" => {
                let col = self.cur.pend_order_col.take().expect("order column pending");
                let dir = if w == "ASC" { SortDir::Asc } else { SortDir::Desc };
                self.cur.order_by.get_or_insert_with(Vec::new).push((col, dir));
                self.st = OrderNext;
            }
            (OrderNext, Tok::Comma) => self.st = OrderCol,
            (OrderNext, Tok::RBracket) => self.st = ClauseStart,

            (RowsLB, Tok::LBracket) => self.st = RowsVal,
            (RowsVal, Tok::Int(v)) if *v >= 1 => {
                self.cur.rows = Some(*v as u64);
                self.st = RowsRB;
            }
            (RowsRB, Tok::RBracket) => self.st = ClauseStart,

            (OutLB, Tok::LBracket) => self.st = OutItem,
            (OutItem, Tok::Word(w)) if out_ctx(self.op()) != OutCtx::Qualif => {
                if out_ctx(self.op()) == OutCtx::Agg {
                    if let Some((_, func)) = AGG_NAMES.iter().find(|(name, _)| name == w) {
                        self.cur.pend_agg_func = Some(*func);
                        self.st = AggLP;
                        return Ok(());
                    }
                }
                if is_reserved(w) {
                    return Err(());
                }
                if self.checks_scan_columns() {
                    match self.scan_table_def() {
                        Some(table) if table.column(w).is_some() => {}
                        _ => return Err(()),
                    }
                }
                self.cur.output.push(OutputExpr::Column(ColumnRef::plain(w.clone())));
                self.st = OutNext;
            }
            (OutItem, Tok::Hash) if out_ctx(self.op()) == OutCtx::Qualif => self.st = OutQNum,
            (OutQNum, Tok::Int(v)) if *v >= 1 && *v <= self.max_ref() as i64 => {
                self.cur.pend_qual = Some(*v as u32);
                self.st = OutQDot;
            }
            (OutQDot, Tok::Dot) => self.st = OutQCol,
            (OutQCol, Tok::Word(w)) if !is_reserved(w) => {
                let step = self.cur.pend_qual.take().expect("qualifier pending");
                self.cur
                    .output
                    .push(OutputExpr::Column(ColumnRef::qualified(step, w.clone())));
                self.st = OutNext;
            }

            (AggLP, Tok::LParen) => self.st = AggArgStart,
            (AggArgStart, Tok::Star) if self.cur.pend_agg_func == Some(AggFunc::Count) => {
                self.cur.pend_agg_arg = Some(AggArg::Star);
                self.st = AggRP;
            }
            (AggArgStart, Tok::Word(w)) if w == "DISTINCT" => {
                self.cur.pend_agg_distinct = true;
                self.st = AggArgCol;
            }
            (AggArgStart | AggArgCol, Tok::Word(w)) if !is_reserved(w) => {
                self.cur.pend_agg_arg = Some(AggArg::Column(w.clone()));
                self.st = AggRP;
            }
            (AggRP, Tok::RParen) => self.st = AggAs,
            (AggAs, Tok::Word(w)) if w == "AS" => self.st = AggAlias,
            (AggAlias, Tok::Word(w)) if !is_reserved(w) => {
                let func = self.cur.pend_agg_func.take().expect("agg func pending");
                let arg = self.cur.pend_agg_arg.take().expect("agg arg pending");
                let distinct = std::mem::take(&mut self.cur.pend_agg_distinct);
                self.cur.output.push(OutputExpr::Aggregate {
                    func,
                    arg,
                    distinct,
                    alias: w.clone(),
                });
                self.st = OutNext;
            }

            (OutNext, Tok::Comma) => self.st = OutItem,
            (OutNext, Tok::RBracket) => self.commit_line(),

            _ => return Err(()),
        }
        Ok(())
    }

    /// Human-readable descriptions of the tokens acceptable in the current
    /// state.
    pub(crate) fn expected(&self) -> Vec<String> {
        use St::*;
        let strs: Vec<String> = match self.st {
            LineStart => vec!["'#'".into()],
            StepNum => vec![format!("step number {}", self.next_step())],
            AfterStepNum => vec!["'='".into()],
            OpKeyword => {
                if self.lines.is_empty() {
                    vec!["'Scan'".into()]
                } else {
                    OP_NAMES.iter().map(|(n, _)| format!("'{n}'")).collect()
                }
            }
            ScanTableKw => vec!["'Table'".into()],
            ScanLB | InputLB | PredLB | BoolLB(_) | GroupLB | OrderLB | RowsLB | OutLB => {
                vec!["'['".into()]
            }
            ScanTableName => vec!["table name".into()],
            ScanRB | InputRB | BoolRB(_) | RowsRB => vec!["']'".into()],
            InputHash1 | InputHash2 => vec!["'#'".into()],
            InputNum1 | InputNum2 | OutQNum | CmpLhsQNum | CmpRhsQNum => {
                vec!["earlier step number".into()]
            }
            InputAfter1 => {
                if self.op().arity() == 2 {
                    vec!["','".into()]
                } else {
                    vec!["']'".into()]
                }
            }
            ClauseStart => self
                .allowed_clauses()
                .iter()
                .map(|c| format!("'{}'", c.keyword()))
                .collect(),
            CmpLhs | CmpRhs => vec![
                "column name".into(),
                "'#'".into(),
                "literal".into(),
            ],
            CmpOp => vec!["comparison operator".into()],
            CmpNot => vec!["'LIKE'".into()],
            CmpIs => vec!["'NULL'".into(), "'NOT'".into()],
            CmpIsNot => vec!["'NULL'".into()],
            CmpLhsQDot | CmpRhsQDot | OutQDot => vec!["'.'".into()],
            CmpLhsQCol | CmpRhsQCol | OutQCol | GroupCol | OrderCol | AggArgCol => {
                vec!["column name".into()]
            }
            CmpNext => vec!["'AND'".into(), "'OR'".into(), "']'".into()],
            BoolVal(_) => vec!["'true'".into(), "'false'".into()],
            GroupNext | OrderNext | OutNext => vec!["','".into(), "']'".into()],
            OrderDir => vec!["'ASC'".into(), "'DESC'".into()],
            RowsVal => vec!["positive integer".into()],
            OutItem => match out_ctx(self.op()) {
                OutCtx::Plain => vec!["column name".into()],
                OutCtx::Agg => vec!["column name".into(), "aggregate function".into()],
                OutCtx::Qualif => vec!["'#'".into()],
            },
            AggLP => vec!["'('".into()],
            AggArgStart => {
                let mut v = vec!["'DISTINCT'".into(), "column name".into()];
                if self.cur.pend_agg_func == Some(AggFunc::Count) {
                    v.insert(0, "'*'".into());
                }
                v
            }
            AggRP => vec!["')'".into()],
            AggAs => vec!["'AS'".into()],
            AggAlias => vec!["alias".into()],
        };
        strs
    }

    /// Whether some continuation exists from the current state at
    /// end-of-input. Every state is live except a schema-checked Scan output
    /// item over a table with no columns.
    pub(crate) fn eoi_live(&self) -> bool {
        if self.st == St::OutItem && self.checks_scan_columns() {
            return self.scan_table_def().is_some_and(|t| !t.columns.is_empty());
        }
        true
    }

    /// Whether a trailing partial token could still extend to an acceptable
    /// token in the current state.
    pub(crate) fn partial_fits(&self, partial: &Partial) -> bool {
        match partial {
            Partial::Word { text, .. } => self.word_fits(text),
            Partial::Num { text, .. } => self.num_fits(text),
            Partial::Str { .. } => matches!(self.st, St::CmpLhs | St::CmpRhs),
            Partial::Angle { .. } => self.st == St::CmpOp,
        }
    }

    fn word_fits(&self, text: &str) -> bool {
        use St::*;
        let prefix_of = |candidates: &[&str]| candidates.iter().any(|c| c.starts_with(text));
        match self.st {
            OpKeyword => {
                if self.lines.is_empty() {
                    "Scan".starts_with(text)
                } else {
                    OP_NAMES.iter().any(|(n, _)| n.starts_with(text))
                }
            }
            ScanTableKw => "Table".starts_with(text),
            ScanTableName => match self.schema {
                Some(schema) => schema
                    .tables
                    .iter()
                    .any(|t| starts_with_ci(&t.name, text)),
                None => true,
            },
            ClauseStart => self
                .allowed_clauses()
                .iter()
                .any(|c| c.keyword().starts_with(text)),
            CmpLhs | CmpRhs => true,
            CmpOp => prefix_of(&["LIKE", "NOT", "IS"]),
            CmpNot => "LIKE".starts_with(text),
            CmpIs => prefix_of(&["NULL", "NOT"]),
            CmpIsNot => "NULL".starts_with(text),
            CmpNext => prefix_of(&["AND", "OR"]),
            BoolVal(_) => prefix_of(&["true", "false"]),
            GroupCol | OrderCol | CmpLhsQCol | CmpRhsQCol | OutQCol | AggArgCol | AggAlias => true,
            OrderDir => prefix_of(&["ASC", "DESC"]),
            OutItem => match out_ctx(self.op()) {
                OutCtx::Qualif => false,
                OutCtx::Agg => true,
                OutCtx::Plain => {
                    if self.checks_scan_columns() {
                        self.scan_table_def().is_some_and(|t| {
                            t.columns.iter().any(|c| starts_with_ci(&c.name, text))
                        })
                    } else {
                        true
                    }
                }
            },
            AggArgStart => true,
            AggAs => "AS".starts_with(text),
            _ => false,
        }
    }

    fn num_fits(&self, text: &str) -> bool {
        use St::*;
        let digits_only = !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit());
        match self.st {
            StepNum => digits_only && self.next_step().to_string().starts_with(text),
            InputNum1 | InputNum2 | OutQNum | CmpLhsQNum | CmpRhsQNum => {
                digits_only
                    && (1..=self.max_ref()).any(|k| k.to_string().starts_with(text))
            }
            RowsVal => digits_only,
            CmpLhs | CmpRhs => true,
            _ => false,
        }
    }
}

fn starts_with_ci(name: &str, prefix: &str) -> bool {
    name.len() >= prefix.len() && name[..prefix.len()].eq_ignore_ascii_case(prefix)
}

/// Synthesize a suffix that extends `machine`'s consumed input to a complete
/// program, or `None` if the state is dead. `partial` is the trailing token
/// fragment, if any; the returned string starts with its completion.
pub(crate) fn complete_from(mut machine: Machine, partial: Option<&Partial>) -> Option<String> {
    let mut out = String::new();

    if let Some(partial) = partial {
        if !machine.partial_fits(partial) {
            return None;
        }
        let (suffix, token) = complete_partial(&machine, partial)?;
        out.push_str(&suffix);
        machine.feed(&token).ok()?;
    }

    for _ in 0..512 {
        if machine.accepting() {
            return Some(out);
        }
        let (text, token) = default_token(&machine)?;
        out.push(' ');
        out.push_str(&text);
        machine.feed(&token).ok()?;
    }
    None
}

fn complete_partial(machine: &Machine, partial: &Partial) -> Option<(String, Tok)> {
    use St::*;
    Some(match partial {
        Partial::Str { .. } => ("'".into(), Tok::Str(String::new())),
        Partial::Angle { ch, .. } => (
            String::new(),
            if *ch == '<' { Tok::Lt } else { Tok::Gt },
        ),
        Partial::Num { text, .. } => {
            let target = match machine.st {
                StepNum => machine.next_step().to_string(),
                InputNum1 | InputNum2 | OutQNum | CmpLhsQNum | CmpRhsQNum => (1..=machine
                    .max_ref())
                    .map(|k| k.to_string())
                    .find(|k| k.starts_with(text.as_str()))?,
                RowsVal => {
                    if text.parse::<i64>().is_ok_and(|v| v >= 1) {
                        text.clone()
                    } else {
                        format!("{text}1")
                    }
                }
                CmpLhs | CmpRhs => {
                    if text.ends_with('.') || text == "-" {
                        format!("{text}5")
                    } else {
                        text.clone()
                    }
                }
                _ => return None,
            };
            let suffix = target[text.len()..].to_string();
            let token = if target.contains('.') {
                Tok::Dec(target.parse().ok()?)
            } else {
                Tok::Int(target.parse().ok()?)
            };
            (suffix, token)
        }
        Partial::Word { text, .. } => {
            let keyword_target = |candidates: &[&str]| -> Option<String> {
                candidates
                    .iter()
                    .find(|c| c.starts_with(text.as_str()))
                    .map(|c| c.to_string())
            };
            let identifier_target = || -> String {
                if is_reserved(text) {
                    format!("{text}x")
                } else {
                    text.clone()
                }
            };
            let target = match machine.st {
                OpKeyword => {
                    if machine.lines.is_empty() {
                        keyword_target(&["Scan"])?
                    } else {
                        keyword_target(
                            &OP_NAMES.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
                        )?
                    }
                }
                ScanTableKw => keyword_target(&["Table"])?,
                ScanTableName => match machine.schema {
                    Some(schema) => schema
                        .tables
                        .iter()
                        .find(|t| starts_with_ci(&t.name, text))
                        .map(|t| {
                            let mut s = text.clone();
                            s.push_str(&t.name[text.len()..]);
                            s
                        })?,
                    None => identifier_target(),
                },
                ClauseStart => keyword_target(
                    &machine
                        .allowed_clauses()
                        .iter()
                        .map(|c| c.keyword())
                        .collect::<Vec<_>>(),
                )?,
                CmpOp => keyword_target(&["LIKE", "IS", "NOT"])?,
                CmpNot => keyword_target(&["LIKE"])?,
                CmpIs => keyword_target(&["NULL", "NOT"])?,
                CmpIsNot => keyword_target(&["NULL"])?,
                CmpNext => keyword_target(&["AND", "OR"])?,
                BoolVal(_) => keyword_target(&["true", "false"])?,
                OrderDir => keyword_target(&["ASC", "DESC"])?,
                AggAs => keyword_target(&["AS"])?,
                OutItem if machine.checks_scan_columns() => {
                    let table = machine.scan_table_def()?;
                    let col = table
                        .columns
                        .iter()
                        .find(|c| starts_with_ci(&c.name, text))?;
                    let mut s = text.clone();
                    s.push_str(&col.name[text.len()..]);
                    s
                }
                CmpLhs | CmpRhs | GroupCol | OrderCol | CmpLhsQCol | CmpRhsQCol | OutQCol
                | AggArgCol | AggAlias | OutItem | AggArgStart => identifier_target(),
                _ => return None,
            };
            let suffix = target[text.len()..].to_string();
            (suffix, Tok::Word(target))
        }
    })
}

/// One token that makes progress toward an accepting state.
fn default_token(machine: &Machine) -> Option<(String, Tok)> {
    use St::*;
    let word = |w: &str| (w.to_string(), Tok::Word(w.to_string()));
    Some(match machine.st {
        LineStart => ("#".into(), Tok::Hash),
        StepNum => {
            let n = machine.next_step();
            (n.to_string(), Tok::Int(n as i64))
        }
        AfterStepNum => ("=".into(), Tok::Eq),
        OpKeyword => word("Scan"),
        ScanTableKw => word("Table"),
        ScanLB | InputLB | PredLB | BoolLB(_) | GroupLB | OrderLB | RowsLB | OutLB => {
            ("[".into(), Tok::LBracket)
        }
        ScanTableName => match machine.schema {
            Some(schema) => {
                let t = schema.tables.first()?;
                (t.name.clone(), Tok::Word(t.name.clone()))
            }
            None => word("t"),
        },
        ScanRB | InputRB | BoolRB(_) | RowsRB => ("]".into(), Tok::RBracket),
        InputHash1 | InputHash2 => ("#".into(), Tok::Hash),
        InputNum1 | InputNum2 | OutQNum | CmpLhsQNum | CmpRhsQNum => ("1".into(), Tok::Int(1)),
        InputAfter1 => {
            if machine.op().arity() == 2 {
                (",".into(), Tok::Comma)
            } else {
                ("]".into(), Tok::RBracket)
            }
        }
        ClauseStart => {
            // Output is always last in the allowed set; a pending required
            // clause is the only entry when one remains.
            let clause = *machine.allowed_clauses().last()?;
            word(clause.keyword())
        }
        CmpLhs => word("x"),
        CmpOp => ("=".into(), Tok::Eq),
        CmpNot => word("LIKE"),
        CmpIs | CmpIsNot => word("NULL"),
        CmpRhs => ("0".into(), Tok::Int(0)),
        CmpNext => ("]".into(), Tok::RBracket),
        CmpLhsQDot | CmpRhsQDot | OutQDot => (".".into(), Tok::Dot),
        CmpLhsQCol | CmpRhsQCol | OutQCol | GroupCol | OrderCol | AggArgCol => word("x"),
        BoolVal(_) => word("true"),
        GroupNext | OrderNext | OutNext => ("]".into(), Tok::RBracket),
        OrderDir => word("ASC"),
        RowsVal => ("1".into(), Tok::Int(1)),
        OutItem => match out_ctx(machine.op()) {
            OutCtx::Qualif => ("#".into(), Tok::Hash),
            _ => {
                if machine.checks_scan_columns() {
                    let col = machine.scan_table_def()?.columns.first()?;
                    (col.name.clone(), Tok::Word(col.name.clone()))
                } else {
                    word("x")
                }
            }
        },
        AggLP => ("(".into(), Tok::LParen),
        AggArgStart => {
            if machine.cur.pend_agg_func == Some(AggFunc::Count) {
                ("*".into(), Tok::Star)
            } else {
                word("x")
            }
        }
        AggRP => (")".into(), Tok::RParen),
        AggAs => word("AS"),
        AggAlias => word("agg"),
    })
}


//! Shared test support: fixture paths and a seeded generator of random
//! schemas, databases, and valid plans for differential testing.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use qpl_core::interp::Database;
use qpl_core::{
    AggArg, AggFunc, ColumnDef, ColumnRef, CompareOp, Comparison, Connective, Literal, OpKind,
    Operand, OutputExpr, Predicate, QplNode, QplPlan, Relation, SchemaCatalog, SimpleType,
    SortDir, StepId, TableDef, Value,
};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn db_dir(db_id: &str) -> PathBuf {
    fixtures_dir().join("dbs").join(db_id)
}

pub fn load_fixture_db(db_id: &str) -> Database {
    Database::load_dir(db_dir(db_id)).expect("fixture database loads")
}

const TEXT_POOL: &[&str] = &["red", "blue", "green", "alpha", "beta", "delta", "k1", "k2"];
const LIKE_POOL: &[&str] = &["%a%", "b%", "%1", "_ed", "red", "%e%"];
// Shared across tables so predicate-free Intersect has names to align on.
const COLUMN_POOL: &[(&str, SimpleType)] = &[
    ("id", SimpleType::Number),
    ("name", SimpleType::Text),
    ("val", SimpleType::Number),
    ("score", SimpleType::Number),
    ("tag", SimpleType::Text),
    ("num", SimpleType::Number),
];

pub struct PlanGen {
    pub rng: StdRng,
    alias_counter: usize,
}

type Cols = Vec<(String, SimpleType)>;

impl PlanGen {
    pub fn new(seed: u64) -> Self {
        PlanGen {
            rng: StdRng::seed_from_u64(seed),
            alias_counter: 0,
        }
    }

    pub fn gen_database(&mut self, tag: usize) -> Database {
        let n_tables = self.rng.gen_range(1..=3);
        let mut tables = Vec::new();
        for t in 0..n_tables {
            let n_cols = self.rng.gen_range(1..=COLUMN_POOL.len());
            let mut pool: Vec<&(&str, SimpleType)> = COLUMN_POOL.iter().collect();
            pool.shuffle(&mut self.rng);
            let columns: Vec<ColumnDef> = pool[..n_cols]
                .iter()
                .map(|(name, ty)| ColumnDef {
                    name: name.to_string(),
                    simple_type: *ty,
                    values: None,
                })
                .collect();
            tables.push(TableDef {
                name: format!("t{t}"),
                columns,
                primary_key: vec![],
                foreign_keys: vec![],
            });
        }
        let schema = SchemaCatalog::new(format!("gen_{tag}"), tables).expect("generated schema");
        let mut db = Database::empty(schema.clone());
        for table in &schema.tables {
            let n_rows = if self.rng.gen_bool(0.1) {
                0
            } else if self.rng.gen_bool(0.1) {
                self.rng.gen_range(30..=50)
            } else {
                self.rng.gen_range(1..=25)
            };
            let mut rows = Vec::with_capacity(n_rows);
            for _ in 0..n_rows {
                let row: Vec<Value> = table
                    .columns
                    .iter()
                    .map(|c| self.gen_value(c.simple_type))
                    .collect();
                rows.push(row);
            }
            let rel = Relation::new(
                table
                    .columns
                    .iter()
                    .map(|c| (c.name.clone(), c.simple_type))
                    .collect(),
            )
            .with_rows(rows);
            db.set_table(&table.name, rel).expect("matching header");
        }
        db
    }

    fn gen_value(&mut self, ty: SimpleType) -> Value {
        match ty {
            SimpleType::Number => {
                if self.rng.gen_bool(0.12) {
                    Value::Null
                } else if self.rng.gen_bool(0.3) {
                    Value::Float(self.rng.gen_range(-9..=9) as f64 + 0.5)
                } else {
                    Value::Int(self.rng.gen_range(-9..=9))
                }
            }
            _ => {
                if self.rng.gen_bool(0.1) {
                    Value::Null
                } else {
                    Value::Text(TEXT_POOL.choose(&mut self.rng).unwrap().to_string())
                }
            }
        }
    }

    /// A random valid plan over the database's schema, tree depth at most
    /// `max_depth`.
    pub fn gen_plan(&mut self, db: &Database, max_depth: usize) -> QplPlan {
        let mut lines: Vec<QplNode> = Vec::new();
        self.gen_subtree(&db.schema, &mut lines, max_depth);
        
        QplPlan::new(
            lines
                .into_iter()
                .enumerate()
                .map(|(i, node)| (i as u32 + 1, node))
                .collect(),
        )
        .expect("generated plan is structurally valid")
    }

    fn push(&mut self, lines: &mut Vec<QplNode>, node: QplNode, types: Vec<SimpleType>) -> (StepId, Cols) {
        let names = node.output_names();
        lines.push(node);
        let cols = names.into_iter().zip(types).collect();
        (StepId(lines.len() as u32), cols)
    }

    fn gen_subtree(
        &mut self,
        schema: &SchemaCatalog,
        lines: &mut Vec<QplNode>,
        depth: usize,
    ) -> (StepId, Cols) {
        if depth == 0 {
            return self.gen_scan(schema, lines);
        }
        match self.rng.gen_range(0..100) {
            0..=19 => self.gen_scan(schema, lines),
            20..=34 => self.gen_filter(schema, lines, depth),
            35..=47 => self.gen_aggregate(schema, lines, depth),
            48..=57 => self.gen_sort(schema, lines, depth, false),
            58..=67 => self.gen_sort(schema, lines, depth, true),
            68..=81 => self.gen_join(schema, lines, depth),
            82..=87 => self.gen_semi_anti(schema, lines, depth, OpKind::Except),
            88..=93 => self.gen_semi_anti(schema, lines, depth, OpKind::Intersect),
            _ => self.gen_union(schema, lines),
        }
    }

    fn gen_scan(&mut self, schema: &SchemaCatalog, lines: &mut Vec<QplNode>) -> (StepId, Cols) {
        let table = schema.tables[self.rng.gen_range(0..schema.tables.len())].clone();
        let all: Cols = table
            .columns
            .iter()
            .map(|c| (c.name.clone(), c.simple_type))
            .collect();
        let outs = self.pick_subset(&all);
        let node = QplNode {
            op: OpKind::Scan,
            table_name: Some(table.name.clone()),
            predicate: self
                .rng
                .gen_bool(0.5)
                .then(|| self.gen_predicate(&all))
                .flatten(),
            distinct: self.rng.gen_bool(0.2).then(|| self.rng.gen_bool(0.8)),
            output: outs
                .iter()
                .map(|(n, _)| OutputExpr::Column(ColumnRef::plain(n.clone())))
                .collect(),
            ..Default::default()
        };
        let types = outs.iter().map(|(_, t)| *t).collect();
        self.push(lines, node, types)
    }

    fn gen_filter(
        &mut self,
        schema: &SchemaCatalog,
        lines: &mut Vec<QplNode>,
        depth: usize,
    ) -> (StepId, Cols) {
        let (input, cols) = self.gen_subtree(schema, lines, depth - 1);
        let pred = self
            .gen_predicate(&cols)
            .expect("inputs always have columns");
        let outs = self.pick_subset(&cols);
        let node = QplNode {
            op: OpKind::Filter,
            inputs: vec![input],
            predicate: Some(pred),
            distinct: self.rng.gen_bool(0.15).then_some(true),
            output: outs
                .iter()
                .map(|(n, _)| OutputExpr::Column(ColumnRef::plain(n.clone())))
                .collect(),
            ..Default::default()
        };
        let types = outs.iter().map(|(_, t)| *t).collect();
        self.push(lines, node, types)
    }

    fn gen_aggregate(
        &mut self,
        schema: &SchemaCatalog,
        lines: &mut Vec<QplNode>,
        depth: usize,
    ) -> (StepId, Cols) {
        let (input, cols) = self.gen_subtree(schema, lines, depth - 1);
        let n_keys = self.rng.gen_range(0..=cols.len().min(2));
        let mut shuffled = cols.clone();
        shuffled.shuffle(&mut self.rng);
        let keys: Cols = shuffled[..n_keys].to_vec();
        let mut output: Vec<OutputExpr> = keys
            .iter()
            .map(|(n, _)| OutputExpr::Column(ColumnRef::plain(n.clone())))
            .collect();
        let mut types: Vec<SimpleType> = keys.iter().map(|(_, t)| *t).collect();
        let numbers: Cols = cols
            .iter()
            .filter(|(_, t)| *t == SimpleType::Number)
            .cloned()
            .collect();
        let n_aggs = if self.rng.gen_bool(0.5) { 1 } else { 2 };
        for _ in 0..n_aggs {
            self.alias_counter += 1;
            let alias = format!("agg{}", self.alias_counter);
            let (func, arg, distinct, ty) = match self.rng.gen_range(0..6) {
                0 => (AggFunc::Count, AggArg::Star, false, SimpleType::Number),
                1 => {
                    let (c, _) = &cols[self.rng.gen_range(0..cols.len())];
                    (AggFunc::Count, AggArg::Column(c.clone()), false, SimpleType::Number)
                }
                2 => {
                    let (c, _) = &cols[self.rng.gen_range(0..cols.len())];
                    (AggFunc::Count, AggArg::Column(c.clone()), true, SimpleType::Number)
                }
                3 | 4 if !numbers.is_empty() => {
                    let (c, _) = &numbers[self.rng.gen_range(0..numbers.len())];
                    let func = if self.rng.gen_bool(0.5) {
                        AggFunc::Sum
                    } else {
                        AggFunc::Avg
                    };
                    (func, AggArg::Column(c.clone()), false, SimpleType::Number)
                }
                _ => {
                    let (c, ty) = &cols[self.rng.gen_range(0..cols.len())];
                    let func = if self.rng.gen_bool(0.5) {
                        AggFunc::Min
                    } else {
                        AggFunc::Max
                    };
                    (func, AggArg::Column(c.clone()), false, *ty)
                }
            };
            output.push(OutputExpr::Aggregate {
                func,
                arg,
                distinct,
                alias,
            });
            types.push(ty);
        }
        let node = QplNode {
            op: OpKind::Aggregate,
            inputs: vec![input],
            group_by: (!keys.is_empty())
                .then(|| keys.iter().map(|(n, _)| n.clone()).collect()),
            output,
            ..Default::default()
        };
        self.push(lines, node, types)
    }

    fn gen_sort(
        &mut self,
        schema: &SchemaCatalog,
        lines: &mut Vec<QplNode>,
        depth: usize,
        top: bool,
    ) -> (StepId, Cols) {
        let (input, cols) = self.gen_subtree(schema, lines, depth - 1);
        let n_keys = self.rng.gen_range(1..=cols.len().min(2));
        let mut shuffled = cols.clone();
        shuffled.shuffle(&mut self.rng);
        let order_by: Vec<(String, SortDir)> = shuffled[..n_keys]
            .iter()
            .map(|(n, _)| {
                let dir = if self.rng.gen_bool(0.5) {
                    SortDir::Asc
                } else {
                    SortDir::Desc
                };
                (n.clone(), dir)
            })
            .collect();
        let outs = self.pick_subset(&cols);
        let node = QplNode {
            op: if top { OpKind::TopSort } else { OpKind::Sort },
            inputs: vec![input],
            order_by: Some(order_by),
            rows: top.then(|| self.rng.gen_range(1..=5)),
            with_ties: if top {
                match self.rng.gen_range(0..3) {
                    0 => Some(true),
                    1 => Some(false),
                    _ => None,
                }
            } else {
                None
            },
            output: outs
                .iter()
                .map(|(n, _)| OutputExpr::Column(ColumnRef::plain(n.clone())))
                .collect(),
            ..Default::default()
        };
        let types = outs.iter().map(|(_, t)| *t).collect();
        self.push(lines, node, types)
    }

    fn gen_join(
        &mut self,
        schema: &SchemaCatalog,
        lines: &mut Vec<QplNode>,
        depth: usize,
    ) -> (StepId, Cols) {
        let (left, lcols) = self.gen_subtree(schema, lines, depth - 1);
        let (right, rcols) = self.gen_subtree(schema, lines, depth - 1);
        let predicate = if self.rng.gen_bool(0.85) {
            self.gen_cross_predicate(left, &lcols, right, &rcols)
        } else {
            None
        };
        // Outputs drawn from both sides, qualified; repeats are renamed.
        let n_out = self.rng.gen_range(1..=4usize);
        let mut output = Vec::new();
        let mut types = Vec::new();
        for _ in 0..n_out {
            let from_left = self.rng.gen_bool(0.5);
            let (step, cols) = if from_left {
                (left, &lcols)
            } else {
                (right, &rcols)
            };
            let (name, ty) = &cols[self.rng.gen_range(0..cols.len())];
            output.push(OutputExpr::Column(ColumnRef {
                qualifier: Some(step),
                name: name.clone(),
            }));
            types.push(*ty);
        }
        let node = QplNode {
            op: OpKind::Join,
            inputs: vec![left, right],
            predicate,
            distinct: self.rng.gen_bool(0.15).then_some(true),
            output,
            ..Default::default()
        };
        self.push(lines, node, types)
    }

    fn gen_semi_anti(
        &mut self,
        schema: &SchemaCatalog,
        lines: &mut Vec<QplNode>,
        depth: usize,
        op: OpKind,
    ) -> (StepId, Cols) {
        let (left, lcols) = self.gen_subtree(schema, lines, depth - 1);
        let (right, rcols) = self.gen_subtree(schema, lines, depth - 1);
        let shared_names = lcols
            .iter()
            .any(|(l, _)| rcols.iter().any(|(r, _)| r.eq_ignore_ascii_case(l)));
        let predicate = if op == OpKind::Intersect && shared_names && self.rng.gen_bool(0.3) {
            None
        } else {
            Some(
                self.gen_cross_predicate(left, &lcols, right, &rcols)
                    .unwrap_or_else(|| {
                        // No type-compatible pair: a one-sided null check is
                        // still a grammatical predicate.
                        Predicate::single(Comparison {
                            lhs: Operand::Column(ColumnRef {
                                qualifier: Some(left),
                                name: lcols[0].0.clone(),
                            }),
                            op: CompareOp::IsNotNull,
                            rhs: None,
                        })
                    }),
            )
        };
        let outs = self.pick_subset(&lcols);
        let node = QplNode {
            op,
            inputs: vec![left, right],
            predicate,
            output: outs
                .iter()
                .map(|(n, _)| {
                    OutputExpr::Column(ColumnRef {
                        qualifier: Some(left),
                        name: n.clone(),
                    })
                })
                .collect(),
            ..Default::default()
        };
        let types = outs.iter().map(|(_, t)| *t).collect();
        self.push(lines, node, types)
    }

    /// Union inputs are two scans of one table over the same column list,
    /// so arity and positional types line up by construction.
    fn gen_union(&mut self, schema: &SchemaCatalog, lines: &mut Vec<QplNode>) -> (StepId, Cols) {
        let table = schema.tables[self.rng.gen_range(0..schema.tables.len())].clone();
        let all: Cols = table
            .columns
            .iter()
            .map(|c| (c.name.clone(), c.simple_type))
            .collect();
        let outs = self.pick_subset(&all);
        let side_scan = |gen: &mut Self, lines: &mut Vec<QplNode>| {
            let node = QplNode {
                op: OpKind::Scan,
                table_name: Some(table.name.clone()),
                predicate: gen
                    .rng
                    .gen_bool(0.5)
                    .then(|| gen.gen_predicate(&all))
                    .flatten(),
                output: outs
                    .iter()
                    .map(|(n, _)| OutputExpr::Column(ColumnRef::plain(n.clone())))
                    .collect(),
                ..Default::default()
            };
            let types = outs.iter().map(|(_, t)| *t).collect();
            gen.push(lines, node, types)
        };
        let (left, _) = side_scan(self, lines);
        let (right, _) = side_scan(self, lines);
        let output: Vec<OutputExpr> = outs
            .iter()
            .map(|(n, _)| {
                let side = if self.rng.gen_bool(0.5) { left } else { right };
                OutputExpr::Column(ColumnRef {
                    qualifier: Some(side),
                    name: n.clone(),
                })
            })
            .collect();
        let node = QplNode {
            op: OpKind::Union,
            inputs: vec![left, right],
            output,
            ..Default::default()
        };
        let types = outs.iter().map(|(_, t)| *t).collect();
        self.push(lines, node, types)
    }

    fn pick_subset(&mut self, cols: &Cols) -> Cols {
        let n = self.rng.gen_range(1..=cols.len());
        let mut shuffled = cols.clone();
        shuffled.shuffle(&mut self.rng);
        shuffled.truncate(n);
        shuffled
    }

    fn gen_predicate(&mut self, cols: &Cols) -> Option<Predicate> {
        if cols.is_empty() {
            return None;
        }
        let n = self.rng.gen_range(1..=3);
        let first = self.gen_comparison(cols);
        let rest = (1..n)
            .map(|_| {
                let conn = if self.rng.gen_bool(0.6) {
                    Connective::And
                } else {
                    Connective::Or
                };
                (conn, self.gen_comparison(cols))
            })
            .collect();
        Some(Predicate { first, rest })
    }

    fn gen_comparison(&mut self, cols: &Cols) -> Comparison {
        let (name, ty) = cols[self.rng.gen_range(0..cols.len())].clone();
        let lhs = Operand::Column(ColumnRef::plain(name));
        match ty {
            SimpleType::Number => match self.rng.gen_range(0..8) {
                0 => Comparison {
                    lhs,
                    op: CompareOp::IsNull,
                    rhs: None,
                },
                1 => Comparison {
                    lhs,
                    op: CompareOp::IsNotNull,
                    rhs: None,
                },
                k => {
                    let op = [
                        CompareOp::Eq,
                        CompareOp::Ne,
                        CompareOp::Lt,
                        CompareOp::Le,
                        CompareOp::Gt,
                        CompareOp::Ge,
                    ][k - 2];
                    let rhs = if self.rng.gen_bool(0.3) {
                        Literal::Dec(self.rng.gen_range(-9..=9) as f64 + 0.5)
                    } else {
                        Literal::Int(self.rng.gen_range(-9..=9))
                    };
                    Comparison {
                        lhs,
                        op,
                        rhs: Some(Operand::Literal(rhs)),
                    }
                }
            },
            _ => match self.rng.gen_range(0..6) {
                0 => Comparison {
                    lhs,
                    op: CompareOp::IsNull,
                    rhs: None,
                },
                1 => Comparison {
                    lhs,
                    op: CompareOp::IsNotNull,
                    rhs: None,
                },
                2 => Comparison {
                    lhs,
                    op: CompareOp::Like,
                    rhs: Some(Operand::Literal(Literal::Str(
                        LIKE_POOL.choose(&mut self.rng).unwrap().to_string(),
                    ))),
                },
                3 => Comparison {
                    lhs,
                    op: CompareOp::NotLike,
                    rhs: Some(Operand::Literal(Literal::Str(
                        LIKE_POOL.choose(&mut self.rng).unwrap().to_string(),
                    ))),
                },
                k => Comparison {
                    lhs,
                    op: if k == 4 { CompareOp::Eq } else { CompareOp::Ne },
                    rhs: Some(Operand::Literal(Literal::Str(
                        TEXT_POOL.choose(&mut self.rng).unwrap().to_string(),
                    ))),
                },
            },
        }
    }

    /// An equality predicate between type-compatible columns of the two
    /// sides, optionally strengthened with a literal comparison.
    fn gen_cross_predicate(
        &mut self,
        left: StepId,
        lcols: &Cols,
        right: StepId,
        rcols: &Cols,
    ) -> Option<Predicate> {
        let mut pairs: Vec<((String, SimpleType), (String, SimpleType))> = Vec::new();
        for l in lcols {
            for r in rcols {
                if (l.1 == SimpleType::Number) == (r.1 == SimpleType::Number) {
                    pairs.push((l.clone(), r.clone()));
                }
            }
        }
        let (l, r) = pairs.choose(&mut self.rng)?.clone();
        let first = Comparison {
            lhs: Operand::Column(ColumnRef {
                qualifier: Some(left),
                name: l.0,
            }),
            op: CompareOp::Eq,
            rhs: Some(Operand::Column(ColumnRef {
                qualifier: Some(right),
                name: r.0,
            })),
        };
        let mut rest = Vec::new();
        if self.rng.gen_bool(0.25) {
            let side_cols = if self.rng.gen_bool(0.5) { lcols } else { rcols };
            let side = if std::ptr::eq(side_cols, lcols) {
                left
            } else {
                right
            };
            let mut cmp = self.gen_comparison(side_cols);
            if let Operand::Column(c) = &mut cmp.lhs {
                c.qualifier = Some(side);
            }
            rest.push((Connective::And, cmp));
        }
        Some(Predicate { first, rest })
    }
}

//! Toolchain for the Query Plan Language (QPL): a modular dataflow language
//! that encodes SQL query semantics as a numbered tree of tuple-stream
//! operators.
//!
//! The crate provides:
//! - core domain types: schema catalogs, QPL plans, values, relations
//!   ([`schema`], [`ast`], [`value`], [`relation`])
//! - a whole-program and incremental prefix parser plus a canonical
//!   pretty-printer ([`parser`])
//! - schema-aware semantic validation with a machine-checkable error
//!   taxonomy ([`validator`])
//! - a reference interpreter over in-memory relations ([`interp`])
//! - a compiler from QPL to CTE SQL with a pluggable execution backend and
//!   result-set equivalence checking ([`compile`])
//! - schema-to-text encoders, the question-decomposition prompt builder and
//!   chat client, and the QPL-QD alignment scorer ([`encode`])
//! - a dataset-level execution-accuracy evaluation harness ([`harness`])

pub mod ast;
pub mod compile;
pub mod encode;
pub mod harness;
pub mod interp;
pub mod parser;
pub mod relation;
pub mod schema;
pub mod validator;
pub mod value;

pub use ast::{
    plan_root, subplan, AggArg, AggFunc, ColumnRef, CompareOp, Comparison, Connective, Literal,
    OpKind, Operand, OutputExpr, Predicate, QplLine, QplNode, QplPlan, SortDir, StepId,
    StructureError,
};
pub use relation::Relation;
pub use schema::{ColumnDef, SchemaCatalog, SchemaError, SimpleType, TableDef};
pub use value::Value;

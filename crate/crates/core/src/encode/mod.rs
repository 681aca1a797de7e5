//! Schema-to-text encoders for model prompting, the question-decomposition
//! prompt builder, the chat-completion client, and the QPL-QD alignment
//! scorer.

mod align;
mod client;

pub use align::{align_qd_qpl, AlignmentReport};
pub use client::{generate_qd, split_qd_steps, ChatError, EndpointConfig, QdResponse};

use crate::ast::QplPlan;
use crate::parser::pretty_print;
use crate::schema::SchemaCatalog;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EncodingStyle {
    Simple,
    Rich,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodedSchema {
    pub style: EncodingStyle,
    pub text: String,
}

/// Simple encoding: one `Table <name> (<columns>)` line per table.
pub fn encode_simple(schema: &SchemaCatalog) -> EncodedSchema {
    let text = schema
        .tables
        .iter()
        .map(|t| {
            let cols = t
                .columns
                .iter()
                .map(|c| c.name.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            format!("Table {} ({cols})", t.name)
        })
        .collect::<Vec<_>>()
        .join("\n");
    EncodedSchema {
        style: EncodingStyle::Simple,
        text,
    }
}

/// The flat model-input serialization:
/// `Question | Schema Name | Table1 : Col11, Col12 | Table2 : ...`.
pub fn model_input(question: &str, schema: &SchemaCatalog) -> String {
    let mut parts = vec![question.to_string(), schema.schema_id.clone()];
    for table in &schema.tables {
        let cols = table
            .columns
            .iter()
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        parts.push(format!("{} : {cols}", table.name));
    }
    parts.join(" | ")
}

#[derive(Debug, Clone)]
pub struct RichOptions {
    /// Longest question n-gram matched against sampled values.
    pub max_ngram: usize,
    pub annotate_values: bool,
}

impl Default for RichOptions {
    fn default() -> Self {
        RichOptions {
            max_ngram: 4,
            annotate_values: true,
        }
    }
}

/// Rich encoding: `CREATE TABLE` blocks with simplified types, key
/// declarations, and value annotations on columns whose sampled values
/// contain an n-gram of the question.
pub fn encode_rich(schema: &SchemaCatalog, question: &str) -> EncodedSchema {
    encode_rich_with(schema, question, &RichOptions::default())
}

pub fn encode_rich_with(
    schema: &SchemaCatalog,
    question: &str,
    options: &RichOptions,
) -> EncodedSchema {
    let ngrams = if options.annotate_values {
        question_ngrams(question, options.max_ngram)
    } else {
        Vec::new()
    };
    let blocks: Vec<String> = schema
        .tables
        .iter()
        .map(|table| {
            let mut items: Vec<String> = table
                .columns
                .iter()
                .map(|col| {
                    let matched: Vec<&str> = col
                        .values
                        .as_deref()
                        .unwrap_or(&[])
                        .iter()
                        .filter(|v| ngrams.iter().any(|n| n.eq_ignore_ascii_case(v)))
                        .map(|v| v.as_str())
                        .collect();
                    if matched.is_empty() {
                        format!("{} {}", col.name, col.simple_type)
                    } else {
                        format!("{} {} ( {} )", col.name, col.simple_type, matched.join(", "))
                    }
                })
                .collect();
            if !table.primary_key.is_empty() {
                items.push(format!("primary key ( {} )", table.primary_key.join(", ")));
            }
            for fk in &table.foreign_keys {
                items.push(format!(
                    "foreign key ( {} ) references {} ( {} )",
                    fk.column, fk.ref_table, fk.ref_column
                ));
            }
            format!("CREATE TABLE {} (\n\t{})", table.name, items.join(",\n\t"))
        })
        .collect();
    EncodedSchema {
        style: EncodingStyle::Rich,
        text: blocks.join("\n\n"),
    }
}

/// All word n-grams of the question, n = 1..=max, whitespace-joined.
/// Words are maximal alphanumeric runs, so punctuation does not block a
/// match.
fn question_ngrams(question: &str, max_ngram: usize) -> Vec<String> {
    let words: Vec<&str> = question
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    let mut ngrams = Vec::new();
    for n in 1..=max_ngram.max(1) {
        for window in words.windows(n) {
            ngrams.push(window.join(" "));
        }
    }
    ngrams
}

const PREAMBLE: &str = include_str!("../../assets/qd_prompt/preamble.txt");
const GRAMMAR: &str = include_str!("../../assets/qd_prompt/grammar.txt");
const EXAMPLES: [&str; 6] = [
    include_str!("../../assets/qd_prompt/example_1.txt"),
    include_str!("../../assets/qd_prompt/example_2.txt"),
    include_str!("../../assets/qd_prompt/example_3.txt"),
    include_str!("../../assets/qd_prompt/example_4.txt"),
    include_str!("../../assets/qd_prompt/example_5.txt"),
    include_str!("../../assets/qd_prompt/example_6.txt"),
];

/// Assemble the question-decomposition prompt: fixed preamble, grammar
/// text, six bundled few-shot examples, and the filled
/// Schema/Question/QPL trailer. Byte-identical across runs for fixed
/// inputs.
pub fn build_qd_prompt(schema: &EncodedSchema, question: &str, plan: &QplPlan) -> String {
    debug_assert_eq!(schema.style, EncodingStyle::Simple);
    let mut prompt = String::new();
    prompt.push_str(PREAMBLE);
    prompt.push('\n');
    prompt.push_str(GRAMMAR);
    prompt.push('\n');
    for example in EXAMPLES {
        prompt.push_str(example);
        prompt.push('\n');
    }
    prompt.push_str("Now your turn:\n\nSchema:\n");
    prompt.push_str(&schema.text);
    prompt.push_str("\n\nQuestion:\n");
    prompt.push_str(question);
    prompt.push_str("\n\nQPL Plan:\n");
    prompt.push_str(&pretty_print(plan));
    prompt.push_str("\n\nNatural Language Plan:\n");
    prompt
}

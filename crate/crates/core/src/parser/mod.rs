//! Concrete-syntax parser for QPL: whole-program mode, incremental prefix
//! mode (the contract a constrained decoder needs), and a canonical
//! pretty-printer.
//!
//! Whitespace between tokens is insignificant; a step line may be
//! terminated by a newline (canonical in files) or a single space (token
//! streams emitted by a decoder). Positions in outcomes and errors are
//! character offsets.

mod lexer;
mod machine;
mod pretty;

use thiserror::Error;

use crate::ast::QplPlan;
use crate::schema::SchemaCatalog;

use lexer::{lex_prefix, lex_whole, Partial, Tok};
use machine::{complete_from, Machine};

pub use pretty::pretty_print;

/// Outcome of an incremental prefix parse.
#[derive(Debug, Clone, PartialEq)]
pub enum ParseOutcome {
    /// The text is itself a complete, well-formed program.
    Complete(QplPlan),
    /// The text is a valid start: some suffix extends it to a program.
    Continuable,
    /// No extension of the text parses. `position` is the character offset
    /// of the offending token.
    Rejected {
        position: usize,
        expected: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at offset {position}: {detail}")]
pub struct SyntaxError {
    /// Character offset of the failure.
    pub position: usize,
    /// Token classes that would have been accepted.
    pub expected: Vec<String>,
    pub detail: String,
}

impl SyntaxError {
    fn from_expected(position: usize, expected: Vec<String>) -> Self {
        let detail = if expected.is_empty() {
            "unexpected input".to_string()
        } else {
            format!("expected {}", expected.join(" | "))
        };
        SyntaxError {
            position,
            expected,
            detail,
        }
    }
}

fn char_offset(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].chars().count()
}

/// Parse a complete QPL program.
pub fn parse(text: &str) -> Result<QplPlan, SyntaxError> {
    let tokens = lex_whole(text).map_err(|e| SyntaxError {
        position: char_offset(text, e.position),
        expected: Vec::new(),
        detail: e.message,
    })?;
    let mut machine = Machine::new(None);
    for token in &tokens {
        if machine.feed(&token.tok).is_err() {
            return Err(SyntaxError::from_expected(
                char_offset(text, token.start),
                machine.expected(),
            ));
        }
    }
    if !machine.accepting() {
        return Err(SyntaxError::from_expected(
            char_offset(text, text.len()),
            machine.expected(),
        ));
    }
    machine.into_plan().map_err(|e| SyntaxError {
        position: char_offset(text, text.len()),
        expected: Vec::new(),
        detail: e.to_string(),
    })
}

#[allow(clippy::large_enum_variant)]
enum Run<'s> {
    Complete(QplPlan),
    Continuable {
        machine: Machine<'s>,
        partial: Option<Partial>,
    },
    Rejected {
        byte: usize,
        expected: Vec<String>,
    },
}

fn run_machine<'s>(text: &str, schema: Option<&'s SchemaCatalog>) -> Run<'s> {
    let lexed = match lex_prefix(text) {
        Ok(lexed) => lexed,
        Err(e) => {
            return Run::Rejected {
                byte: e.position,
                expected: vec![e.message],
            }
        }
    };
    let mut machine = Machine::new(schema);
    for token in &lexed.tokens {
        if machine.feed(&token.tok).is_err() {
            return Run::Rejected {
                byte: token.start,
                expected: machine.expected(),
            };
        }
    }
    match lexed.partial {
        None => {
            if machine.accepting() {
                let plan = machine.into_plan().expect("machine enforces plan shape");
                Run::Complete(plan)
            } else if machine.eoi_live() {
                Run::Continuable {
                    machine,
                    partial: None,
                }
            } else {
                let expected = machine.expected();
                Run::Rejected {
                    byte: text.len(),
                    expected,
                }
            }
        }
        Some(partial) => {
            if machine.partial_fits(&partial) {
                return Run::Continuable {
                    machine,
                    partial: Some(partial),
                };
            }
            // A trailing "12." can also be the integer 12 followed by a
            // qualifier dot (`#12.col`), which the single-token view cannot
            // see. Try that split before rejecting.
            if let Partial::Num { text: num, start } = &partial {
                if let Some(digits) = num.strip_suffix('.') {
                    if let Ok(v) = digits.parse::<i64>() {
                        if machine.feed(&Tok::Int(v)).is_ok() && machine.feed(&Tok::Dot).is_ok() {
                            return Run::Continuable {
                                machine,
                                partial: None,
                            };
                        }
                    }
                    let expected = machine.expected();
                    return Run::Rejected {
                        byte: *start,
                        expected,
                    };
                }
            }
            let expected = machine.expected();
            Run::Rejected {
                byte: partial.start(),
                expected,
            }
        }
    }
}

/// Incrementally parse a prefix: is the text a complete program, a valid
/// start of one, or unextendable?
pub fn parse_prefix(text: &str) -> ParseOutcome {
    outcome(text, run_machine(text, None))
}

/// As [`parse_prefix`], additionally rejecting completed Scan table names
/// that are not in the schema and completed Scan output columns that are
/// not in the scanned table. Cross-step column flow is the validator's job.
pub fn parse_prefix_schema_aware(text: &str, schema: &SchemaCatalog) -> ParseOutcome {
    outcome(text, run_machine(text, Some(schema)))
}

fn outcome(text: &str, run: Run<'_>) -> ParseOutcome {
    match run {
        Run::Complete(plan) => ParseOutcome::Complete(plan),
        Run::Continuable { .. } => ParseOutcome::Continuable,
        Run::Rejected { byte, expected } => ParseOutcome::Rejected {
            position: char_offset(text, byte),
            expected,
        },
    }
}

/// Synthesize one complete program extending `text`, or `None` when no
/// extension parses. Intended for decoder integrations and testing the
/// Continuable contract.
pub fn sample_completion(text: &str, schema: Option<&SchemaCatalog>) -> Option<String> {
    match run_machine(text, schema) {
        Run::Complete(_) => Some(text.to_string()),
        Run::Continuable { machine, partial } => {
            complete_from(machine, partial.as_ref()).map(|suffix| format!("{text}{suffix}"))
        }
        Run::Rejected { .. } => None,
    }
}

/// Byte spans of the tokens of a complete program; useful for token-level
/// mutation testing.
pub fn token_spans(text: &str) -> Result<Vec<(usize, usize)>, SyntaxError> {
    let tokens = lex_whole(text).map_err(|e| SyntaxError {
        position: char_offset(text, e.position),
        expected: Vec::new(),
        detail: e.message,
    })?;
    Ok(tokens.into_iter().map(|t| (t.start, t.end)).collect())
}

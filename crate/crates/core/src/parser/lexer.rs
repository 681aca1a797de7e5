//! Tokenizer for QPL surface syntax. Whitespace (including newlines) is
//! insignificant between tokens.
//!
//! The prefix lexer additionally reports a trailing *partial* token when the
//! input ends mid-token (`Pre` could still become `Predicate`), which the
//! incremental parser resolves against the current machine state.

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Hash,
    Eq,
    LBracket,
    RBracket,
    Comma,
    Dot,
    LParen,
    RParen,
    Star,
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
    Word(String),
    Int(i64),
    Dec(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    /// Byte offsets into the source.
    pub start: usize,
    pub end: usize,
}

/// A trailing token fragment that touches end-of-input and could lex
/// differently if more characters arrive.
#[derive(Debug, Clone, PartialEq)]
pub enum Partial {
    /// Identifier or keyword fragment.
    Word { text: String, start: usize },
    /// Number fragment: digits, optionally signed, possibly ending in `.`.
    Num { text: String, start: usize },
    /// Unterminated string literal.
    Str { start: usize },
    /// A lone `<` or `>` that could extend to `<=`, `<>`, `>=`.
    Angle { ch: char, start: usize },
}

impl Partial {
    pub fn start(&self) -> usize {
        match self {
            Partial::Word { start, .. }
            | Partial::Num { start, .. }
            | Partial::Str { start }
            | Partial::Angle { start, .. } => *start,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    /// Byte offset of the offending character.
    pub position: usize,
    pub message: String,
}

pub struct PrefixLex {
    pub tokens: Vec<Token>,
    pub partial: Option<Partial>,
}

/// Lex a complete program. Unterminated strings and dangling signs are
/// errors.
pub fn lex_whole(text: &str) -> Result<Vec<Token>, LexError> {
    let lexed = lex(text, false)?;
    debug_assert!(lexed.partial.is_none());
    Ok(lexed.tokens)
}

/// Lex a prefix. Errors are reserved for characters that cannot start or
/// continue any token regardless of future input.
pub fn lex_prefix(text: &str) -> Result<PrefixLex, LexError> {
    lex(text, true)
}

fn lex(text: &str, prefix: bool) -> Result<PrefixLex, LexError> {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut tokens = Vec::new();
    let mut partial = None;
    let mut i = 0;

    while i < len {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let simple = |tok: Tok| Token {
            tok,
            start,
            end: start + 1,
        };
        match c {
            '#' => {
                tokens.push(simple(Tok::Hash));
                i += 1;
            }
            '=' => {
                tokens.push(simple(Tok::Eq));
                i += 1;
            }
            '[' => {
                tokens.push(simple(Tok::LBracket));
                i += 1;
            }
            ']' => {
                tokens.push(simple(Tok::RBracket));
                i += 1;
            }
            ',' => {
                tokens.push(simple(Tok::Comma));
                i += 1;
            }
            '.' => {
                tokens.push(simple(Tok::Dot));
                i += 1;
            }
            '(' => {
                tokens.push(simple(Tok::LParen));
                i += 1;
            }
            ')' => {
                tokens.push(simple(Tok::RParen));
                i += 1;
            }
            '*' => {
                tokens.push(simple(Tok::Star));
                i += 1;
            }
            '<' | '>' => {
                i += 1;
                if i == len && prefix {
                    partial = Some(Partial::Angle { ch: c, start });
                    break;
                }
                let two = if i < len { bytes[i] as char } else { '\0' };
                let tok = match (c, two) {
                    ('<', '=') => {
                        i += 1;
                        Tok::Le
                    }
                    ('<', '>') => {
                        i += 1;
                        Tok::Ne
                    }
                    ('>', '=') => {
                        i += 1;
                        Tok::Ge
                    }
                    ('<', _) => Tok::Lt,
                    (_, _) => Tok::Gt,
                };
                tokens.push(Token {
                    tok,
                    start,
                    end: i,
                });
            }
            '\'' => {
                let mut value = String::new();
                let mut j = i + 1;
                let mut terminated = false;
                while j < len {
                    if bytes[j] == b'\'' {
                        if j + 1 < len && bytes[j + 1] == b'\'' {
                            value.push('\'');
                            j += 2;
                        } else {
                            terminated = true;
                            j += 1;
                            break;
                        }
                    } else {
                        let ch_len = utf8_len(bytes[j]);
                        value.push_str(&text[j..j + ch_len]);
                        j += ch_len;
                    }
                }
                if terminated {
                    tokens.push(Token {
                        tok: Tok::Str(value),
                        start,
                        end: j,
                    });
                    i = j;
                } else if prefix {
                    partial = Some(Partial::Str { start });
                    break;
                } else {
                    return Err(LexError {
                        position: start,
                        message: "unterminated string literal".into(),
                    });
                }
            }
            '-' => {
                if i + 1 < len && bytes[i + 1].is_ascii_digit() {
                    let (tok_or_partial, next) = lex_number(text, start, prefix);
                    i = next;
                    match tok_or_partial {
                        NumOut::Tokens(ts) => tokens.extend(ts),
                        NumOut::Partial(p) => {
                            partial = Some(p);
                            break;
                        }
                    }
                } else if i + 1 == len && prefix {
                    partial = Some(Partial::Num {
                        text: "-".into(),
                        start,
                    });
                    break;
                } else {
                    return Err(LexError {
                        position: start,
                        message: "`-` must begin a numeric literal".into(),
                    });
                }
            }
            _ if c.is_ascii_digit() => {
                let (tok_or_partial, next) = lex_number(text, start, prefix);
                i = next;
                match tok_or_partial {
                    NumOut::Tokens(ts) => tokens.extend(ts),
                    NumOut::Partial(p) => {
                        partial = Some(p);
                        break;
                    }
                }
            }
            _ if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while j < len
                    && ((bytes[j] as char).is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let word = &text[i..j];
                if j == len && prefix {
                    partial = Some(Partial::Word {
                        text: word.to_string(),
                        start,
                    });
                    break;
                }
                tokens.push(Token {
                    tok: Tok::Word(word.to_string()),
                    start,
                    end: j,
                });
                i = j;
            }
            _ => {
                return Err(LexError {
                    position: start,
                    message: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    Ok(PrefixLex { tokens, partial })
}

enum NumOut {
    Tokens(Vec<Token>),
    Partial(Partial),
}

/// Lex a number starting at `start` (possibly signed). `12.5` is a decimal;
/// `12.x` is the integer 12 followed by a Dot token. `12.` at end-of-input
/// in prefix mode is a partial number, since digits may still follow.
fn lex_number(text: &str, start: usize, prefix: bool) -> (NumOut, usize) {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut j = start;
    if bytes[j] == b'-' {
        j += 1;
    }
    while j < len && bytes[j].is_ascii_digit() {
        j += 1;
    }
    let int_end = j;
    if j == len && prefix {
        return (
            NumOut::Partial(Partial::Num {
                text: text[start..j].to_string(),
                start,
            }),
            j,
        );
    }
    if j < len && bytes[j] == b'.' {
        if j + 1 < len && bytes[j + 1].is_ascii_digit() {
            j += 1;
            while j < len && bytes[j].is_ascii_digit() {
                j += 1;
            }
            if j == len && prefix {
                return (
                    NumOut::Partial(Partial::Num {
                        text: text[start..j].to_string(),
                        start,
                    }),
                    j,
                );
            }
            let value: f64 = text[start..j].parse().expect("decimal digits parse");
            return (
                NumOut::Tokens(vec![Token {
                    tok: Tok::Dec(value),
                    start,
                    end: j,
                }]),
                j,
            );
        }
        if j + 1 == len && prefix {
            // Trailing "12." — a decimal may still be forming, but it could
            // also be an integer followed by a Dot (`#12.col`). The driver
            // decides from parser state.
            return (
                NumOut::Partial(Partial::Num {
                    text: text[start..j + 1].to_string(),
                    start,
                }),
                j + 1,
            );
        }
    }
    let value: i64 = text[start..int_end].parse().expect("integer digits parse");
    (
        NumOut::Tokens(vec![Token {
            tok: Tok::Int(value),
            start,
            end: int_end,
        }]),
        int_end,
    )
}

fn utf8_len(first: u8) -> usize {
    match first {
        b if b < 0x80 => 1,
        b if b >= 0xF0 => 4,
        b if b >= 0xE0 => 3,
        _ => 2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        lex_whole(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn qualified_reference_lexes_as_hash_int_dot_word() {
        assert_eq!(
            kinds("#3.CountryCode"),
            vec![
                Tok::Hash,
                Tok::Int(3),
                Tok::Dot,
                Tok::Word("CountryCode".into())
            ]
        );
    }

    #[test]
    fn decimal_versus_qualifier_dot() {
        assert_eq!(kinds("1.5"), vec![Tok::Dec(1.5)]);
        assert_eq!(
            kinds("1.x"),
            vec![Tok::Int(1), Tok::Dot, Tok::Word("x".into())]
        );
        assert_eq!(kinds("-2"), vec![Tok::Int(-2)]);
        assert_eq!(kinds("-2.5"), vec![Tok::Dec(-2.5)]);
    }

    #[test]
    fn string_escapes_doubled_quote() {
        assert_eq!(kinds("'it''s'"), vec![Tok::Str("it's".into())]);
        assert!(lex_whole("'open").is_err());
    }

    #[test]
    fn comparison_operators() {
        assert_eq!(kinds("< <= > >= <> ="), vec![
            Tok::Lt, Tok::Le, Tok::Gt, Tok::Ge, Tok::Ne, Tok::Eq
        ]);
    }

    #[test]
    fn prefix_mode_reports_partials() {
        let lexed = lex_prefix("#1 = Scan Table [ country ] Pre").unwrap();
        assert_eq!(
            lexed.partial,
            Some(Partial::Word {
                text: "Pre".into(),
                start: 28
            })
        );
        let lexed = lex_prefix("Predicate [ x = 'ab").unwrap();
        assert!(matches!(lexed.partial, Some(Partial::Str { .. })));
        let lexed = lex_prefix("Rows [ 12.").unwrap();
        assert_eq!(
            lexed.partial,
            Some(Partial::Num {
                text: "12.".into(),
                start: 7
            })
        );
        let lexed = lex_prefix("x <").unwrap();
        assert!(matches!(lexed.partial, Some(Partial::Angle { ch: '<', .. })));
    }

    #[test]
    fn whitespace_after_token_closes_it() {
        let lexed = lex_prefix("#1 = Scan ").unwrap();
        assert_eq!(lexed.partial, None);
        assert_eq!(lexed.tokens.len(), 4);
    }

    #[test]
    fn invalid_character_is_an_error() {
        assert!(lex_whole("Output [ a; ]").is_err());
        assert!(lex_prefix("Output [ a; ]").is_err());
    }
}

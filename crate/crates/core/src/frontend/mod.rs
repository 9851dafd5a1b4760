//! Front end for the Python subset: lexing, top-level function extraction
//! and variable scope analysis.

mod function;
mod pretok;
mod scope;
mod token;

pub use function::{extract_functions, FunctionSource};
pub use pretok::{read_pretokenized, tokens_from_jsonl};
pub use scope::{analyze_scope, find_slots, Scope, Slot, VarSite};
pub use token::{
    classify, is_identifier, is_keyword, render, tokenize, Token, TokenKind, DEDENT_TEXT,
    INDENT_TEXT, INDENT_WIDTH, KEYWORDS, NEWLINE_TEXT,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LexError {
    #[error("line {line}: unterminated string literal")]
    UnterminatedString { line: usize },
    #[error("line {line}: tabs and spaces mixed in indentation")]
    MixedIndentation { line: usize },
    #[error("line {line}: indentation does not match any enclosing level")]
    BadIndentation { line: usize },
    #[error("line {line}: character {ch:?} is not part of the language")]
    InvalidCharacter { ch: char, line: usize },
    #[error("line {line}: closing bracket without opening bracket")]
    UnbalancedBracket { line: usize },
    #[error("line {line}: bracket still open at end of input")]
    UnclosedBracket { line: usize },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("token {index}: malformed function header: {reason}")]
    MalformedHeader { index: usize, reason: &'static str },
    #[error("token {index}: function body is not terminated")]
    UnterminatedBody { index: usize },
    #[error("pre-tokenized input line {line}: {reason}")]
    BadPretokenized { line: usize, reason: String },
}

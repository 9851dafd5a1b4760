//! Indentation-aware lexer for the Python subset.

use serde::{Deserialize, Serialize};
use std::fmt;

use super::LexError;

/// Reserved words of the subset. Everything else matching the identifier
/// pattern is an `Ident`.
pub const KEYWORDS: &[&str] = &[
    "def", "return", "if", "else", "elif", "for", "while", "in", "not", "and", "or", "None",
    "True", "False", "pass", "global",
];

/// Multi- and single-character operators, longest first.
const OPERATORS: &[&str] = &["==", "!=", "<=", ">=", "=", "+", "-", "*", "/", "%", "<", ">"];

const PUNCT: &[char] = &['.', ',', ':', '(', ')', '[', ']', '{', '}'];

/// Spaces per indentation level.
pub const INDENT_WIDTH: usize = 2;

pub const NEWLINE_TEXT: &str = "<NEWLINE>";
pub const INDENT_TEXT: &str = "<INDENT>";
pub const DEDENT_TEXT: &str = "<DEDENT>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenKind {
    Keyword,
    Ident,
    Number,
    String,
    Operator,
    Punct,
    Newline,
    Indent,
    Dedent,
}

impl TokenKind {
    /// True for tokens drawn from the fixed alphabet of the subset
    /// (keywords, operators, punctuation and layout tokens).
    pub fn is_fixed(self) -> bool {
        !matches!(self, TokenKind::Ident | TokenKind::Number | TokenKind::String)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub kind: TokenKind,
    pub index: usize,
}

impl Token {
    pub fn new(text: impl Into<String>, kind: TokenKind, index: usize) -> Self {
        Self {
            text: text.into(),
            kind,
            index,
        }
    }

    pub fn is(&self, kind: TokenKind, text: &str) -> bool {
        self.kind == kind && self.text == text
    }

    pub fn is_punct(&self, text: &str) -> bool {
        self.is(TokenKind::Punct, text)
    }

    pub fn is_keyword(&self, text: &str) -> bool {
        self.is(TokenKind::Keyword, text)
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} {}", self.kind, self.text)
    }
}

pub fn is_keyword(text: &str) -> bool {
    KEYWORDS.contains(&text)
}

/// Returns true if `text` is a legal identifier of the subset.
pub fn is_identifier(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !is_keyword(text)
}

/// Classifies the text of a single token by the lexical rules alone.
/// Used when tokens arrive as plain strings (e.g. dataset files).
pub fn classify(text: &str) -> Option<TokenKind> {
    match text {
        NEWLINE_TEXT => return Some(TokenKind::Newline),
        INDENT_TEXT => return Some(TokenKind::Indent),
        DEDENT_TEXT => return Some(TokenKind::Dedent),
        _ => {}
    }
    if is_keyword(text) {
        Some(TokenKind::Keyword)
    } else if is_identifier(text) {
        Some(TokenKind::Ident)
    } else if OPERATORS.contains(&text) {
        Some(TokenKind::Operator)
    } else if text.chars().count() == 1 && PUNCT.contains(&text.chars().next()?) {
        Some(TokenKind::Punct)
    } else if !text.is_empty() && text.chars().all(|c| c.is_ascii_digit()) {
        Some(TokenKind::Number)
    } else if text.len() >= 2
        && (text.starts_with('\'') && text.ends_with('\'')
            || text.starts_with('"') && text.ends_with('"'))
    {
        Some(TokenKind::String)
    } else {
        None
    }
}

struct Lexer<'a> {
    src: &'a str,
    tokens: Vec<Token>,
    indents: Vec<usize>,
    depth: usize,
    line: usize,
}

impl<'a> Lexer<'a> {
    fn push(&mut self, text: impl Into<String>, kind: TokenKind) {
        let index = self.tokens.len();
        self.tokens.push(Token::new(text, kind, index));
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let src = self.src;
        for raw_line in src.split_inclusive('\n') {
            self.line += 1;
            let line = raw_line.strip_suffix('\n').unwrap_or(raw_line);
            let line = line.strip_suffix('\r').unwrap_or(line);
            self.lex_line(line)?;
        }
        if self.depth > 0 {
            return Err(LexError::UnclosedBracket { line: self.line });
        }
        if matches!(self.tokens.last(), Some(t) if t.kind != TokenKind::Newline && t.kind != TokenKind::Dedent)
        {
            self.push(NEWLINE_TEXT, TokenKind::Newline);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(DEDENT_TEXT, TokenKind::Dedent);
        }
        Ok(self.tokens)
    }

    fn lex_line(&mut self, line: &str) -> Result<(), LexError> {
        let bytes = line.as_bytes();
        let mut pos = 0;

        if self.depth == 0 {
            let ws_end = bytes
                .iter()
                .position(|&b| b != b' ' && b != b'\t')
                .unwrap_or(bytes.len());
            if ws_end == bytes.len() {
                return Ok(());
            }
            let leading = &line[..ws_end];
            if leading.contains('\t') {
                return Err(LexError::MixedIndentation { line: self.line });
            }
            self.indent_to(ws_end)?;
            pos = ws_end;
        }

        while pos < bytes.len() {
            let c = bytes[pos];
            match c {
                b' ' | b'\t' => pos += 1,
                b'\'' | b'"' => {
                    let close = line[pos + 1..]
                        .find(c as char)
                        .ok_or(LexError::UnterminatedString { line: self.line })?;
                    let end = pos + 1 + close + 1;
                    self.push(&line[pos..end], TokenKind::String);
                    pos = end;
                }
                b'0'..=b'9' => {
                    let end = pos
                        + bytes[pos..]
                            .iter()
                            .take_while(|b| b.is_ascii_digit())
                            .count();
                    self.push(&line[pos..end], TokenKind::Number);
                    pos = end;
                }
                c if c.is_ascii_alphabetic() || c == b'_' => {
                    let end = pos
                        + bytes[pos..]
                            .iter()
                            .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
                            .count();
                    let word = &line[pos..end];
                    let kind = if is_keyword(word) {
                        TokenKind::Keyword
                    } else {
                        TokenKind::Ident
                    };
                    self.push(word, kind);
                    pos = end;
                }
                _ => {
                    if let Some(op) = OPERATORS.iter().find(|op| line[pos..].starts_with(*op)) {
                        self.push(*op, TokenKind::Operator);
                        pos += op.len();
                    } else if PUNCT.contains(&(c as char)) {
                        match c {
                            b'(' | b'[' | b'{' => self.depth += 1,
                            b')' | b']' | b'}' => {
                                self.depth = self
                                    .depth
                                    .checked_sub(1)
                                    .ok_or(LexError::UnbalancedBracket { line: self.line })?;
                            }
                            _ => {}
                        }
                        self.push((c as char).to_string(), TokenKind::Punct);
                        pos += 1;
                    } else {
                        let ch = line[pos..].chars().next().unwrap_or('\0');
                        return Err(LexError::InvalidCharacter { ch, line: self.line });
                    }
                }
            }
        }
        if self.depth == 0 {
            self.push(NEWLINE_TEXT, TokenKind::Newline);
        }
        Ok(())
    }

    fn indent_to(&mut self, width: usize) -> Result<(), LexError> {
        let current = *self.indents.last().unwrap_or(&0);
        if width > current {
            if width != current + INDENT_WIDTH {
                return Err(LexError::BadIndentation { line: self.line });
            }
            self.indents.push(width);
            self.push(INDENT_TEXT, TokenKind::Indent);
        } else {
            while width < *self.indents.last().unwrap_or(&0) {
                self.indents.pop();
                self.push(DEDENT_TEXT, TokenKind::Dedent);
            }
            if width != *self.indents.last().unwrap_or(&0) {
                return Err(LexError::BadIndentation { line: self.line });
            }
        }
        Ok(())
    }
}

/// Splits source text into tokens. INDENT/DEDENT are emitted on changes of
/// leading whitespace and all DEDENTs are closed at end of input. Newlines
/// inside brackets are joined.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    Lexer {
        src: source,
        tokens: Vec::new(),
        indents: vec![0],
        depth: 0,
        line: 0,
    }
    .run()
}

/// Renders tokens back to source with canonical whitespace: one space between
/// tokens on a line and `INDENT_WIDTH` spaces per level.
pub fn render(tokens: &[Token]) -> String {
    let mut out = String::new();
    let mut level = 0usize;
    let mut at_line_start = true;
    for tok in tokens {
        match tok.kind {
            TokenKind::Newline => {
                out.push('\n');
                at_line_start = true;
            }
            TokenKind::Indent => level += 1,
            TokenKind::Dedent => level = level.saturating_sub(1),
            _ => {
                if at_line_start {
                    out.extend(std::iter::repeat_n(' ', level * INDENT_WIDTH));
                    at_line_start = false;
                } else {
                    out.push(' ');
                }
                out.push_str(&tok.text);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use TokenKind::*;

    fn kinds_texts(tokens: &[Token]) -> Vec<(TokenKind, &str)> {
        tokens.iter().map(|t| (t.kind, t.text.as_str())).collect()
    }

    #[test]
    fn simple_assignment() {
        let toks = tokenize("x = 1\n").unwrap();
        assert_eq!(
            kinds_texts(&toks),
            vec![(Ident, "x"), (Operator, "="), (Number, "1"), (Newline, NEWLINE_TEXT)]
        );
    }

    #[test]
    fn empty_source() {
        assert!(tokenize("").unwrap().is_empty());
        assert!(tokenize("\n\n  \n").unwrap().is_empty());
    }

    #[test]
    fn function_with_indent() {
        let toks = tokenize("def f(a):\n  return a\n").unwrap();
        assert_eq!(
            kinds_texts(&toks),
            vec![
                (Keyword, "def"),
                (Ident, "f"),
                (Punct, "("),
                (Ident, "a"),
                (Punct, ")"),
                (Punct, ":"),
                (Newline, NEWLINE_TEXT),
                (Indent, INDENT_TEXT),
                (Keyword, "return"),
                (Ident, "a"),
                (Newline, NEWLINE_TEXT),
                (Dedent, DEDENT_TEXT),
            ]
        );
        for (i, t) in toks.iter().enumerate() {
            assert_eq!(t.index, i);
        }
    }

    #[test]
    fn missing_final_newline_and_nested_dedents() {
        let toks = tokenize("def f(a):\n  if a:\n    return a").unwrap();
        let tail: Vec<_> = toks.iter().rev().take(3).map(|t| t.kind).collect();
        assert_eq!(tail, vec![Dedent, Dedent, Newline]);
    }

    #[test]
    fn brackets_join_lines() {
        let toks = tokenize("x = f(a,\n  b)\n").unwrap();
        assert_eq!(toks.iter().filter(|t| t.kind == Newline).count(), 1);
        assert!(toks.iter().all(|t| t.kind != Indent));
    }

    #[test]
    fn operators_longest_match() {
        let toks = tokenize("a <= b == c != d >= e\n").unwrap();
        let ops: Vec<_> = toks
            .iter()
            .filter(|t| t.kind == Operator)
            .map(|t| t.text.as_str())
            .collect();
        assert_eq!(ops, vec!["<=", "==", "!=", ">="]);
    }

    #[test]
    fn strings_both_quotes() {
        let toks = tokenize("s = 'a b' + \"c\"\n").unwrap();
        assert_eq!(toks[2].text, "'a b'");
        assert_eq!(toks[2].kind, String);
        assert_eq!(toks[4].text, "\"c\"");
    }

    #[test]
    fn errors() {
        assert!(matches!(
            tokenize("s = 'abc\n"),
            Err(LexError::UnterminatedString { line: 1 })
        ));
        assert!(matches!(
            tokenize("def f():\n \tpass\n"),
            Err(LexError::MixedIndentation { line: 2 })
        ));
        assert!(matches!(
            tokenize("x = a @ b\n"),
            Err(LexError::InvalidCharacter { ch: '@', line: 1 })
        ));
        assert!(matches!(
            tokenize("def f():\n   pass\n"),
            Err(LexError::BadIndentation { line: 2 })
        ));
        assert!(matches!(
            tokenize("x = (a\n"),
            Err(LexError::UnclosedBracket { .. })
        ));
    }

    #[test]
    fn ident_invariant() {
        let toks = tokenize("def g(x_1, _y):\n  return not x_1 or _y\n").unwrap();
        for t in toks.iter().filter(|t| t.kind == Ident) {
            assert!(is_identifier(&t.text), "{}", t.text);
        }
    }

    #[test]
    fn classify_matches_lexer() {
        let src = "def f(a, b):\n  x = a[0] + 'q'\n  return x <= b\n";
        for t in tokenize(src).unwrap() {
            assert_eq!(classify(&t.text), Some(t.kind), "{}", t.text);
        }
    }
}

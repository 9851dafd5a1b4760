use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::scope::{analyze_scope, find_slots, Slot, VarSite};
use super::token::{Token, TokenKind};
use super::ParseError;

/// A top-level function: its own token sequence (re-indexed from zero) plus
/// the variable information derived from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionSource {
    /// Stable identifier, unique within a corpus.
    pub id: String,
    pub name: String,
    pub tokens: Vec<Token>,
    /// Variables defined in the function, including formal parameters.
    pub defs: BTreeSet<String>,
    /// Load-context occurrences of defined variables, in token order.
    pub uses: Vec<VarSite>,
    /// Store-context occurrences (parameters, assignment and loop targets,
    /// `global` names), in token order.
    pub def_sites: Vec<VarSite>,
    pub slots: Vec<Slot>,
}

impl FunctionSource {
    /// Builds a function record from a token span that starts with `def`.
    /// Token indices are rewritten to be positions within `tokens`.
    pub fn from_tokens(id: impl Into<String>, mut tokens: Vec<Token>) -> Result<Self, ParseError> {
        for (i, t) in tokens.iter_mut().enumerate() {
            t.index = i;
        }
        check_header(&tokens, 0)?;
        let name = tokens[1].text.clone();
        let scope = analyze_scope(&tokens);
        let mut f = FunctionSource {
            id: id.into(),
            name,
            tokens,
            defs: scope.defs,
            uses: scope.uses,
            def_sites: scope.def_sites,
            slots: Vec::new(),
        };
        f.slots = find_slots(&f);
        Ok(f)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.text.clone()).collect()
    }

    /// Positions of every variable occurrence (definitions and uses), sorted.
    pub fn variable_positions(&self) -> Vec<usize> {
        let mut pos: Vec<usize> = self
            .uses
            .iter()
            .chain(self.def_sites.iter())
            .map(|s| s.index)
            .collect();
        pos.sort_unstable();
        pos.dedup();
        pos
    }
}

/// Validates `def NAME ( ... ) :` starting at `start`; returns the index one
/// past the colon.
fn check_header(tokens: &[Token], start: usize) -> Result<usize, ParseError> {
    let err = |index, reason| ParseError::MalformedHeader { index, reason };
    if !tokens.get(start).is_some_and(|t| t.is_keyword("def")) {
        return Err(err(start, "expected `def`"));
    }
    if !tokens
        .get(start + 1)
        .is_some_and(|t| t.kind == TokenKind::Ident)
    {
        return Err(err(start + 1, "missing function name"));
    }
    if !tokens.get(start + 2).is_some_and(|t| t.is_punct("(")) {
        return Err(err(start + 2, "missing `(`"));
    }
    let mut depth = 0usize;
    let mut i = start + 2;
    loop {
        let Some(t) = tokens.get(i) else {
            return Err(err(i, "missing `)`"));
        };
        if t.kind == TokenKind::Newline {
            return Err(err(i, "missing `)`"));
        }
        if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
            depth += 1;
        } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
            depth -= 1;
            if depth == 0 {
                break;
            }
        }
        i += 1;
    }
    if !tokens.get(i + 1).is_some_and(|t| t.is_punct(":")) {
        return Err(err(i + 1, "missing `:`"));
    }
    Ok(i + 2)
}

/// Finds the end (exclusive) of a function whose header ends at `body_start`.
fn body_end(tokens: &[Token], def_index: usize, body_start: usize) -> Result<usize, ParseError> {
    let unterminated = ParseError::UnterminatedBody { index: def_index };
    let block = tokens.get(body_start).map(|t| t.kind) == Some(TokenKind::Newline)
        && tokens.get(body_start + 1).map(|t| t.kind) == Some(TokenKind::Indent);
    if !block {
        // Single-line body: runs to the end of the logical line.
        let nl = tokens[body_start..]
            .iter()
            .position(|t| t.kind == TokenKind::Newline)
            .ok_or(unterminated)?;
        return Ok(body_start + nl + 1);
    }
    let mut level = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(body_start + 1) {
        match t.kind {
            TokenKind::Indent => level += 1,
            TokenKind::Dedent => {
                level -= 1;
                if level == 0 {
                    return Ok(i + 1);
                }
            }
            _ => {}
        }
    }
    Err(unterminated)
}

/// Extracts one record per unique top-level `def`. Nested definitions remain
/// inside their parent's span. Functions with identical token text are kept
/// once (first occurrence wins). Records get ids `NAME@INDEX` where INDEX is
/// the position of `def` in the file.
pub fn extract_functions(file_tokens: &[Token]) -> Result<Vec<FunctionSource>, ParseError> {
    let mut out = Vec::new();
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut level = 0usize;
    let mut line_start = true;
    let mut i = 0;
    while i < file_tokens.len() {
        let t = &file_tokens[i];
        match t.kind {
            TokenKind::Indent => level += 1,
            TokenKind::Dedent => level = level.saturating_sub(1),
            TokenKind::Newline => {
                line_start = true;
                i += 1;
                continue;
            }
            _ if line_start && level == 0 && t.is_keyword("def") => {
                let body_start = check_header(file_tokens, i)?;
                let end = body_end(file_tokens, i, body_start)?;
                let span = file_tokens[i..end].to_vec();
                let key: Vec<String> = span.iter().map(|t| t.text.clone()).collect();
                if seen.insert(key) {
                    let id = format!("{}@{}", file_tokens[i + 1].text, i);
                    out.push(FunctionSource::from_tokens(id, span)?);
                }
                i = end;
                line_start = true;
                continue;
            }
            _ => {}
        }
        if !matches!(t.kind, TokenKind::Indent | TokenKind::Dedent) {
            line_start = false;
        }
        i += 1;
    }
    Ok(out)
}

//! Ingestion of token streams produced by external tools: one JSON object
//! per line with `text` and `kind`.

use std::io::BufRead;

use serde::Deserialize;

use super::token::{is_identifier, Token, TokenKind};
use super::ParseError;

#[derive(Deserialize)]
struct RawToken {
    text: String,
    kind: TokenKind,
}

pub fn tokens_from_jsonl<R: BufRead>(reader: R) -> Result<Vec<Token>, ParseError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let bad = |reason: String| ParseError::BadPretokenized {
            line: n + 1,
            reason,
        };
        let line = line.map_err(|e| bad(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawToken = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if raw.kind == TokenKind::Ident && !is_identifier(&raw.text) {
            return Err(bad(format!("{:?} is not a valid identifier", raw.text)));
        }
        let index = out.len();
        out.push(Token::new(raw.text, raw.kind, index));
    }
    Ok(out)
}

pub fn read_pretokenized(path: &std::path::Path) -> Result<Vec<Token>, ParseError> {
    let file = std::fs::File::open(path).map_err(|e| ParseError::BadPretokenized {
        line: 0,
        reason: format!("{}: {e}", path.display()),
    })?;
    tokens_from_jsonl(std::io::BufReader::new(file))
}

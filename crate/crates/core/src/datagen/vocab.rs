use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::DatagenError;
use crate::frontend::FunctionSource;

pub const PAD_TOKEN: &str = "<pad>";
pub const NO_FAULT_TOKEN: &str = "<no_fault>";
pub const HOLE_TOKEN: &str = "<hole>";
pub const UNK_TOKEN: &str = "<unk>";

pub const PAD_ID: usize = 0;
pub const NO_FAULT_ID: usize = 1;
pub const HOLE_ID: usize = 2;
pub const UNK_ID: usize = 3;

const RESERVED: [&str; 4] = [PAD_TOKEN, NO_FAULT_TOKEN, HOLE_TOKEN, UNK_TOKEN];

/// Token vocabulary. Ids `0..4` are reserved; the lexer can never produce a
/// token spelled like a reserved entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    token_to_id: HashMap<String, usize>,
    id_to_token: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct VocabFile {
    reserved: BTreeMap<String, usize>,
    tokens: BTreeMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let token_to_id = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            token_to_id,
            id_to_token: tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.id_to_token.len()
    }

    pub fn is_empty(&self) -> bool {
        self.id_to_token.is_empty()
    }

    /// Id of `token`, or [`UNK_ID`] when absent.
    pub fn id(&self, token: &str) -> usize {
        self.token_to_id.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.token_to_id.contains_key(token)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.id_to_token.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.id_to_token
    }

    pub fn to_json(&self) -> String {
        let reserved = RESERVED
            .iter()
            .enumerate()
            .map(|(i, t)| (t.to_string(), i))
            .collect();
        let tokens = self
            .id_to_token
            .iter()
            .enumerate()
            .skip(RESERVED.len())
            .map(|(i, t)| (t.clone(), i))
            .collect();
        serde_json::to_string_pretty(&VocabFile { reserved, tokens }).expect("vocab serializes")
    }

    pub fn from_json(json: &str) -> Result<Self, DatagenError> {
        let file: VocabFile = serde_json::from_str(json)?;
        for (i, t) in RESERVED.iter().enumerate() {
            if file.reserved.get(*t) != Some(&i) {
                return Err(DatagenError::Config(format!("reserved token {t} must have id {i}")));
            }
        }
        let n = RESERVED.len() + file.tokens.len();
        let mut tokens: Vec<Option<String>> = vec![None; n];
        for (i, t) in RESERVED.iter().enumerate() {
            tokens[i] = Some(t.to_string());
        }
        for (t, &i) in &file.tokens {
            if i < RESERVED.len() || i >= n || tokens[i].is_some() {
                return Err(DatagenError::Config(format!("bad id {i} for token {t:?}")));
            }
            tokens[i] = Some(t.clone());
        }
        Ok(Self::from_tokens(tokens.into_iter().map(Option::unwrap).collect()))
    }

    /// SHA-256 of the serialized vocabulary, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

/// Reserved tokens first, then corpus tokens by descending frequency. Ties
/// put fixed-alphabet tokens (keywords, operators, layout) before
/// identifiers and literals, then order lexicographically.
pub fn build_vocab(corpus: &[FunctionSource], max_size: usize) -> Result<Vocab, DatagenError> {
    if max_size < RESERVED.len() {
        return Err(DatagenError::Config(format!(
            "vocabulary size {max_size} leaves no room for reserved tokens"
        )));
    }
    let mut counts: HashMap<&str, (usize, bool)> = HashMap::new();
    for f in corpus {
        for t in &f.tokens {
            counts.entry(t.text.as_str()).or_insert((0, t.kind.is_fixed())).0 += 1;
        }
    }
    if counts.is_empty() {
        return Err(DatagenError::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, usize, bool)> =
        counts.into_iter().map(|(t, (c, fixed))| (t, c, fixed)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(b.2.cmp(&a.2)).then(a.0.cmp(b.0)));
    let tokens = RESERVED
        .iter()
        .map(|s| s.to_string())
        .chain(
            ranked
                .into_iter()
                .take(max_size - RESERVED.len())
                .map(|(t, _, _)| t.to_string()),
        )
        .collect();
    Ok(Vocab::from_tokens(tokens))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{extract_functions, tokenize};

    fn corpus(src: &str) -> Vec<FunctionSource> {
        extract_functions(&tokenize(src).unwrap()).unwrap()
    }

    #[test]
    fn frequency_order_and_reserved() {
        // a: 5 occurrences, b: 3
        let c = corpus("def f(a, b):\n  a = a + b\n  b = a * b\n  return a + a\n");
        let v = build_vocab(&c, 64).unwrap();
        assert_eq!(v.token(NO_FAULT_ID), Some(NO_FAULT_TOKEN));
        assert_eq!(v.id(HOLE_TOKEN), HOLE_ID);
        assert!(v.id("a") < v.id("b"));
        assert_eq!(v.id("zzz_rare"), UNK_ID);
    }

    #[test]
    fn fixed_tokens_win_ties() {
        // `def` and `f` both occur once; the keyword ranks first.
        let c = corpus("def f(x, y):\n  return x\n");
        let v = build_vocab(&c, 64).unwrap();
        assert!(v.id("def") < v.id("f"));
    }

    #[test]
    fn truncation_maps_rare_to_unk() {
        let c = corpus("def f(a, b):\n  a = a + b\n  return a\n");
        let v = build_vocab(&c, 6).unwrap();
        assert_eq!(v.len(), 6);
        assert_eq!(v.id("a"), 4);
        assert_eq!(v.id("f"), UNK_ID);
    }

    #[test]
    fn errors() {
        assert!(matches!(build_vocab(&[], 10), Err(DatagenError::EmptyCorpus)));
        let c = corpus("def f(a):\n  return a\n");
        assert!(build_vocab(&c, 3).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = corpus("def f(a, b):\n  return a + b\n");
        let v = build_vocab(&c, 100).unwrap();
        let back = Vocab::from_json(&v.to_json()).unwrap();
        assert_eq!(back, v);
        for t in v.tokens() {
            assert_eq!(back.token(back.id(t)), Some(t.as_str()));
        }
    }
}

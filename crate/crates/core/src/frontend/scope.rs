//! Function-level variable analysis: definitions, load-context uses and
//! repair slots.
//!
//! Rules, for a single function:
//! * definitions are formal parameters, assignment targets (left of a
//!   top-level `=`), `for` loop targets and names listed after `global`;
//! * a use is an occurrence of a defined name that is not itself a target,
//!   does not follow `.`, is not the function name and is not a keyword
//!   argument name (an identifier directly before `=` inside a call);
//! * subscripts and attribute receivers on the left of `=` are loads;
//! * bodies of nested `def`s are opaque and contribute nothing.

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::function::FunctionSource;
use super::token::{Token, TokenKind};

/// One occurrence of a variable name at a token position.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarSite {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scope {
    pub defs: BTreeSet<String>,
    pub uses: Vec<VarSite>,
    pub def_sites: Vec<VarSite>,
}

/// A variable-use location eligible for a misuse bug or a hole.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub token_index: usize,
    pub var_name: String,
    pub candidates: BTreeSet<String>,
}

#[derive(Default)]
struct Collector {
    stores: Vec<usize>,
    loads: Vec<usize>,
}

impl Collector {
    /// Scans `range` as an expression. With `targets` set, top-level names
    /// that end a target (followed by `,`, `=` or the end of the range) are
    /// recorded as stores.
    fn scan(&mut self, tokens: &[Token], range: Range<usize>, targets: bool) {
        let mut stack: Vec<&str> = Vec::new();
        let end = range.end;
        for k in range {
            let t = &tokens[k];
            match t.kind {
                TokenKind::Punct if matches!(t.text.as_str(), "(" | "[" | "{") => {
                    stack.push(t.text.as_str());
                    continue;
                }
                TokenKind::Punct if matches!(t.text.as_str(), ")" | "]" | "}") => {
                    stack.pop();
                    continue;
                }
                TokenKind::Ident => {}
                _ => continue,
            }
            if k > 0 && tokens[k - 1].is_punct(".") {
                continue;
            }
            let next = tokens.get(k + 1);
            let next_is_assign = next.is_some_and(|n| n.is(TokenKind::Operator, "="));
            if targets && stack.is_empty() {
                let ends_target =
                    k + 1 == end || next_is_assign || next.is_some_and(|n| n.is_punct(","));
                if ends_target {
                    self.stores.push(k);
                    continue;
                }
            }
            if next_is_assign && stack.last() == Some(&"(") {
                // keyword argument name
                continue;
            }
            self.loads.push(k);
        }
    }
}

/// Position of the first token in `range` satisfying `pred` at bracket depth 0.
fn find_top_level(
    tokens: &[Token],
    range: Range<usize>,
    pred: impl Fn(&Token) -> bool,
) -> Option<usize> {
    let mut depth = 0i32;
    for k in range {
        let t = &tokens[k];
        if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
            depth += 1;
        } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
            depth -= 1;
        } else if depth == 0 && pred(t) {
            return Some(k);
        }
    }
    None
}

fn simple_statement(tokens: &[Token], range: Range<usize>, c: &mut Collector, globals: &mut Vec<usize>) {
    if range.is_empty() {
        return;
    }
    let first = &tokens[range.start];
    if first.is_keyword("global") {
        globals.extend(
            (range.start + 1..range.end).filter(|&k| tokens[k].kind == TokenKind::Ident),
        );
        return;
    }
    let mut seg_start = range.start;
    let mut segments = Vec::new();
    while let Some(eq) = find_top_level(tokens, seg_start..range.end, |t| {
        t.is(TokenKind::Operator, "=")
    }) {
        segments.push(seg_start..eq);
        seg_start = eq + 1;
    }
    for target in segments {
        c.scan(tokens, target, true);
    }
    c.scan(tokens, seg_start..range.end, false);
}

fn statement(tokens: &[Token], range: Range<usize>, c: &mut Collector, globals: &mut Vec<usize>) {
    if range.is_empty() {
        return;
    }
    let first = &tokens[range.start];
    let compound = ["if", "elif", "while", "for", "else"]
        .iter()
        .any(|kw| first.is_keyword(kw));
    if !compound {
        simple_statement(tokens, range, c, globals);
        return;
    }
    let Some(colon) = find_top_level(tokens, range.clone(), |t| t.is_punct(":")) else {
        c.scan(tokens, range.start + 1..range.end, false);
        return;
    };
    if first.is_keyword("for") {
        let header = range.start + 1..colon;
        match find_top_level(tokens, header.clone(), |t| t.is_keyword("in")) {
            Some(in_pos) => {
                c.scan(tokens, header.start..in_pos, true);
                c.scan(tokens, in_pos + 1..colon, false);
            }
            None => c.scan(tokens, header, false),
        }
    } else {
        c.scan(tokens, range.start + 1..colon, false);
    }
    statement(tokens, colon + 1..range.end, c, globals);
}

/// Computes definitions, uses and definition sites of a function token span
/// beginning with `def`. Pure and deterministic.
pub fn analyze_scope(tokens: &[Token]) -> Scope {
    let mut params = Vec::new();
    let mut k = 3;
    let mut depth = 1;
    while k < tokens.len() && depth > 0 {
        let t = &tokens[k];
        if t.is_punct("(") || t.is_punct("[") || t.is_punct("{") {
            depth += 1;
        } else if t.is_punct(")") || t.is_punct("]") || t.is_punct("}") {
            depth -= 1;
        } else if depth == 1
            && t.kind == TokenKind::Ident
            && (tokens[k - 1].is_punct("(") || tokens[k - 1].is_punct(","))
        {
            params.push(k);
        }
        k += 1;
    }
    // k now points at the header colon.
    let body_start = k + 1;

    let mut c = Collector::default();
    let mut globals = Vec::new();
    let mut i = body_start;
    while i < tokens.len() {
        let t = &tokens[i];
        if matches!(
            t.kind,
            TokenKind::Newline | TokenKind::Indent | TokenKind::Dedent
        ) {
            i += 1;
            continue;
        }
        let end = tokens[i..]
            .iter()
            .position(|t| t.kind == TokenKind::Newline)
            .map_or(tokens.len(), |p| i + p);
        if t.is_keyword("def") {
            i = end + 1;
            if tokens.get(i).map(|t| t.kind) == Some(TokenKind::Indent) {
                let mut level = 0;
                while i < tokens.len() {
                    match tokens[i].kind {
                        TokenKind::Indent => level += 1,
                        TokenKind::Dedent => {
                            level -= 1;
                            if level == 0 {
                                i += 1;
                                break;
                            }
                        }
                        _ => {}
                    }
                    i += 1;
                }
            }
            continue;
        }
        statement(tokens, i..end, &mut c, &mut globals);
        i = end + 1;
    }

    let def_positions: Vec<usize> = params
        .iter()
        .chain(c.stores.iter())
        .chain(globals.iter())
        .copied()
        .collect();
    let defs: BTreeSet<String> = def_positions
        .iter()
        .map(|&p| tokens[p].text.clone())
        .collect();
    let site = |p: usize| VarSite {
        name: tokens[p].text.clone(),
        index: p,
    };
    let mut uses: Vec<VarSite> = c
        .loads
        .iter()
        .copied()
        .filter(|&p| defs.contains(&tokens[p].text))
        .map(site)
        .collect();
    uses.sort_by_key(|s| s.index);
    let mut def_sites: Vec<VarSite> = def_positions.into_iter().map(site).collect();
    def_sites.sort_by_key(|s| s.index);
    def_sites.dedup();
    Scope {
        defs,
        uses,
        def_sites,
    }
}

/// One slot per use, in token order, each with the function's definitions as
/// candidates. Functions with fewer than two definitions have no slots.
pub fn find_slots(f: &FunctionSource) -> Vec<Slot> {
    if f.defs.len() < 2 {
        return Vec::new();
    }
    f.uses
        .iter()
        .map(|u| Slot {
            token_index: u.index,
            var_name: u.name.clone(),
            candidates: f.defs.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{extract_functions, tokenize};

    fn func(src: &str) -> FunctionSource {
        let mut fs = extract_functions(&tokenize(src).unwrap()).unwrap();
        assert_eq!(fs.len(), 1);
        fs.remove(0)
    }

    fn names(set: &BTreeSet<String>) -> Vec<&str> {
        set.iter().map(String::as_str).collect()
    }

    fn use_pairs(f: &FunctionSource) -> Vec<(&str, usize)> {
        f.uses.iter().map(|u| (u.name.as_str(), u.index)).collect()
    }

    #[test]
    fn params_and_return_uses() {
        // def f ( a , b ) : return a + b
        // 0   1 2 3 4 5 6 7 8      9 10 11
        let f = func("def f(a, b): return a + b\n");
        assert_eq!(names(&f.defs), vec!["a", "b"]);
        assert_eq!(use_pairs(&f), vec![("a", 9), ("b", 11)]);
        let slots = find_slots(&f);
        assert_eq!(slots.len(), 2);
        assert!(slots.iter().all(|s| names(&s.candidates) == vec!["a", "b"]));
    }

    #[test]
    fn no_variables() {
        let f = func("def g():\n  pass\n");
        assert!(f.defs.is_empty());
        assert!(f.uses.is_empty());
        assert!(find_slots(&f).is_empty());
    }

    #[test]
    fn attribute_rule() {
        let f = func("def h(x):\n  y = x\n  return y.size\n");
        assert_eq!(names(&f.defs), vec!["x", "y"]);
        let x_rhs = f.tokens.iter().rposition(|t| t.text == "x").unwrap();
        let y_recv = f.tokens.iter().rposition(|t| t.text == "y").unwrap();
        assert!(use_pairs(&f).contains(&("x", x_rhs)));
        assert!(use_pairs(&f).contains(&("y", y_recv)));
        assert!(f.uses.iter().all(|u| u.name != "size"));
        assert_eq!(f.uses.len(), 2);
    }

    #[test]
    fn single_candidate_has_no_slots() {
        let f = func("def f(a):\n  return a\n");
        assert_eq!(f.uses.len(), 1);
        assert!(find_slots(&f).is_empty());
    }

    #[test]
    fn subscript_on_lhs_is_load() {
        let f = func("def f(seq, x):\n  seq[x] = 13\n  return seq\n");
        let pairs = use_pairs(&f);
        assert_eq!(pairs.iter().filter(|(n, _)| *n == "seq").count(), 2);
        assert_eq!(pairs.iter().filter(|(n, _)| *n == "x").count(), 1);
        assert_eq!(f.def_sites.len(), 2);
    }

    #[test]
    fn keyword_arguments_and_attributes_skipped() {
        let f = func("def f(url, params):\n  data = fetch(url, params=params)\n  return data.url\n");
        let used: Vec<_> = use_pairs(&f).into_iter().map(|(n, _)| n).collect();
        assert_eq!(used, vec!["url", "params", "data"]);
    }

    #[test]
    fn for_targets_and_globals_define() {
        let src = "def f(items):\n  global total\n  for i, item in items:\n    total = total + item\n  return total\n";
        let f = func(src);
        assert_eq!(names(&f.defs), vec!["i", "item", "items", "total"]);
        let used: Vec<_> = use_pairs(&f).into_iter().map(|(n, _)| n).collect();
        assert_eq!(used, vec!["items", "total", "item", "total"]);
    }

    #[test]
    fn chained_and_tuple_assignment() {
        let f = func("def f(p):\n  a = b = p\n  c, d = a, b\n  return c + d\n");
        assert_eq!(names(&f.defs), vec!["a", "b", "c", "d", "p"]);
        let used: Vec<_> = use_pairs(&f).into_iter().map(|(n, _)| n).collect();
        assert_eq!(used, vec!["p", "a", "b", "c", "d"]);
    }

    #[test]
    fn inline_compound_body() {
        let f = func("def f(a, b):\n  if a: return b\n  while b < a: b = b + 1\n  return a\n");
        assert_eq!(names(&f.defs), vec!["a", "b"]);
        let used: Vec<_> = use_pairs(&f).into_iter().map(|(n, _)| n).collect();
        assert_eq!(used, vec!["a", "b", "b", "a", "b", "a"]);
    }

    #[test]
    fn nested_def_body_opaque() {
        let src = "def f(a, b):\n  def g(c):\n    return a + c\n  return g(b)\n";
        let f = func(src);
        assert_eq!(names(&f.defs), vec!["a", "b"]);
        assert_eq!(use_pairs(&f).len(), 1);
    }

    #[test]
    fn validate_sources_slots() {
        let src = "def validate_sources(sources):\n  object_name = get_content(sources, 'obj')\n  subject_name = get_content(sources, 'subj')\n  result = Result()\n  result.objects.append(object_name)\n  result.subjects.append(subject_name)\n  return result\n";
        let f = func(src);
        let slots = find_slots(&f);
        // Plain reads: sources twice, object_name, subject_name, returned result.
        let plain: Vec<_> = slots
            .iter()
            .filter(|s| !f.tokens[s.token_index + 1].is_punct("."))
            .map(|s| s.var_name.as_str())
            .collect();
        assert_eq!(
            plain,
            vec!["sources", "sources", "object_name", "subject_name", "result"]
        );
        // Attribute receivers are loads too.
        assert_eq!(slots.len(), 7);
        for s in &slots {
            assert_eq!(s.candidates.len(), 4);
        }
    }

    #[test]
    fn deterministic() {
        let src = "def f(a, b):\n  c = a + b\n  return c * a\n";
        let toks = tokenize(src).unwrap();
        assert_eq!(analyze_scope(&toks), analyze_scope(&toks));
    }
}

//! Seeded generator for a small synthetic corpus in the Python subset.
//!
//! Functions bind a few scalar variables (`user`, `page`, ...) and a few
//! collections (`items`, `lines`, ...) and use each of them once or twice.
//! Some uses name the variable again through a string or an attribute;
//! others only constrain its kind, as `emit(x)` takes a scalar and
//! `x.sort()` a collection:
//!
//! ```text
//! def collect_user(src, page, result):
//!   user = get_content(src, 'user')
//!   if user:
//!     result.users.append(user)
//!   items = load_all(src, 'items')
//!   items.sort()
//!   emit(page)
//!   store('items', items)
//!   return result
//! ```

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const SCALAR_STEMS: [&str; 8] = ["user", "page", "node", "file", "task", "word", "event", "token"];

pub const COLLECTION_STEMS: [&str; 6] = ["items", "lines", "groups", "records", "rows", "names"];

const VERBS: [&str; 6] = ["collect", "handle", "merge", "build", "update", "scan"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub scalars: Vec<String>,
    pub collections: Vec<String>,
    /// Variables per function, at least one of each kind.
    pub min_vars: usize,
    pub max_vars: usize,
    pub max_uses: usize,
    /// Probability that a variable is a parameter rather than a local.
    pub param_prob: f64,
    /// Probability that a use statement names its variable again.
    pub hint_prob: f64,
    /// Probability that a use statement is guarded by `if VAR:`.
    pub guard_prob: f64,
    /// Probability of an extra `link(a, b)` whose argument order carries no
    /// information.
    pub pair_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            scalars: SCALAR_STEMS.iter().map(|s| s.to_string()).collect(),
            collections: COLLECTION_STEMS.iter().map(|s| s.to_string()).collect(),
            min_vars: 2,
            max_vars: 4,
            max_uses: 2,
            param_prob: 0.4,
            hint_prob: 0.5,
            guard_prob: 0.3,
            pair_prob: 0.3,
        }
    }
}

fn use_statement<R: Rng>(rng: &mut R, cfg: &SynthConfig, var: &str, scalar: bool, out: &mut String) {
    let guard = rng.gen_bool(cfg.guard_prob);
    let indent = if guard { "    " } else { "  " };
    if guard {
        out.push_str(&format!("  if {var}:\n"));
    }
    let hinted = rng.gen_bool(cfg.hint_prob);
    let stmt = match (scalar, hinted, rng.gen_bool(0.5)) {
        (true, true, true) => format!("log('{var}', {var})"),
        (true, true, false) => format!("result.{var}s.append({var})"),
        (true, false, true) => format!("emit({var})"),
        (true, false, false) => format!("result.add({var})"),
        (false, true, true) => format!("store('{var}', {var})"),
        (false, true, false) => format!("result.{var}.extend({var})"),
        (false, false, true) => format!("{var}.sort()"),
        (false, false, false) => format!("result.extend({var})"),
    };
    out.push_str(&format!("{indent}{stmt}\n"));
}

/// Source of one function named `name`.
pub fn generate_function<R: Rng>(rng: &mut R, cfg: &SynthConfig, name: &str) -> String {
    let hi = cfg.max_vars.min(cfg.scalars.len() + cfg.collections.len()).max(2);
    let lo = cfg.min_vars.clamp(2, hi);
    let k = rng.gen_range(lo..=hi);
    let n_scalar = rng.gen_range(1.max(k.saturating_sub(cfg.collections.len()))..=(k - 1).min(cfg.scalars.len()));
    let mut vars: Vec<(&str, bool)> = cfg
        .scalars
        .choose_multiple(rng, n_scalar)
        .map(|s| (s.as_str(), true))
        .collect();
    vars.extend(
        cfg.collections
            .choose_multiple(rng, k - n_scalar)
            .map(|s| (s.as_str(), false)),
    );
    let params: Vec<&str> = vars
        .iter()
        .filter(|_| rng.gen_bool(cfg.param_prob))
        .map(|v| v.0)
        .collect();

    let mut header = vec!["src"];
    header.extend(&params);
    header.push("result");
    let mut out = format!("def {name}({}):\n", header.join(", "));

    let mut uses: Vec<(&str, bool)> = Vec::new();
    for &v in &vars {
        for _ in 0..rng.gen_range(1..=cfg.max_uses.max(1)) {
            uses.push(v);
        }
    }
    uses.shuffle(rng);
    let mut defined: Vec<&str> = params.clone();
    for (var, scalar) in uses {
        if !defined.contains(&var) {
            let loader = if scalar { "get_content" } else { "load_all" };
            out.push_str(&format!("  {var} = {loader}(src, '{var}')\n"));
            defined.push(var);
        }
        use_statement(rng, cfg, var, scalar, &mut out);
    }
    if rng.gen_bool(cfg.pair_prob) {
        let pair: Vec<&(&str, bool)> = vars.choose_multiple(rng, 2).collect();
        out.push_str(&format!("  link({}, {})\n", pair[0].0, pair[1].0));
    }
    out.push_str("  return result\n");
    out
}

/// `n` functions separated by blank lines, reproducible from `seed`.
pub fn generate_corpus(cfg: &SynthConfig, n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for i in 0..n {
        let verb = VERBS[rng.gen_range(0..VERBS.len())];
        let stem = &cfg.scalars[rng.gen_range(0..cfg.scalars.len())];
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&generate_function(&mut rng, cfg, &format!("{verb}_{stem}")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{extract_functions, tokenize};

    #[test]
    fn corpus_parses_and_has_slots() {
        let text = generate_corpus(&SynthConfig::default(), 200, 9);
        let fns = extract_functions(&tokenize(&text).unwrap()).unwrap();
        assert_eq!(fns.len(), 200);
        for f in &fns {
            assert!(f.slots.len() >= 3, "{}", f.id);
            assert!(f.slots.iter().any(|s| s.var_name != "result"));
            assert!(f.len() < 200);
            for s in &f.slots {
                assert_eq!(f.tokens[s.token_index].text, s.var_name);
            }
        }
    }

    #[test]
    fn reproducible() {
        let cfg = SynthConfig::default();
        assert_eq!(generate_corpus(&cfg, 30, 1), generate_corpus(&cfg, 30, 1));
        assert_ne!(generate_corpus(&cfg, 30, 1), generate_corpus(&cfg, 30, 2));
    }
}

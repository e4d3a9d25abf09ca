//! Helpers shared by the integration tests: fixture paths, schema checks,
//! and brute-force reference implementations of the metrics.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn fixture(rel: &str) -> PathBuf {
    crate_dir().join("tests/fixtures").join(rel)
}

pub fn schema(rel: &str) -> Value {
    let path = crate_dir().join("schemas").join(rel);
    let raw = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    serde_json::from_str(&raw).expect("schema is JSON")
}

/// Errors (as strings) from validating `instance` against a shipped schema.
pub fn schema_errors(rel: &str, instance: &Value) -> Vec<String> {
    let validator = jsonschema::validator_for(&schema(rel)).expect("schema compiles");
    validator
        .iter_errors(instance)
        .map(|e| e.to_string())
        .collect()
}

pub fn assert_valid(rel: &str, instance: &Value) {
    let errors = schema_errors(rel, instance);
    assert!(errors.is_empty(), "{rel}: {errors:?}\n{instance}");
}

/// Runs the CLI in-process and returns (exit code, stdout, stderr).
pub fn run_cli(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["minuted"];
    argv.extend_from_slice(args);
    let code = minuted::cli::run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).expect("utf-8 stdout"),
        String::from_utf8(err).expect("utf-8 stderr"),
    )
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

pub const VOCAB: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

pub fn random_tokens(rng: &mut ChaCha8Rng, min: usize, max: usize) -> Vec<&'static str> {
    let len = rng.gen_range(min..=max);
    (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect()
}

// --- brute-force metric oracles -------------------------------------------

pub fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn div(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Clipped n-gram overlap computed by matching each candidate n-gram
/// against a shrinking pool of reference n-grams.
pub fn rouge_n_oracle(cand: &[&str], reference: &[&str], n: usize) -> (f64, f64, f64) {
    let grams = |t: &[&str]| -> Vec<Vec<String>> {
        if t.len() < n {
            return Vec::new();
        }
        (0..=t.len() - n)
            .map(|i| t[i..i + n].iter().map(|s| s.to_string()).collect())
            .collect()
    };
    let cg = grams(cand);
    let mut pool = grams(reference);
    let total_ref = pool.len();
    let mut matches = 0;
    for g in &cg {
        if let Some(pos) = pool.iter().position(|r| r == g) {
            pool.remove(pos);
            matches += 1;
        }
    }
    let (p, r) = (div(matches, cg.len()), div(matches, total_ref));
    (p, r, f1(p, r))
}

/// Longest common subsequence: exhaustive over subsequences of `a` for
/// short inputs, memoized top-down recursion otherwise.
pub fn lcs_oracle(a: &[&str], b: &[&str]) -> usize {
    if a.len() > 16 {
        let mut memo = std::collections::HashMap::new();
        return lcs_recursive(a, b, 0, 0, &mut memo);
    }
    let is_subseq = |s: &[&str]| {
        let mut it = b.iter();
        s.iter().all(|x| it.any(|y| y == x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let k = mask.count_ones() as usize;
        if k <= best {
            continue;
        }
        let sub: Vec<&str> = (0..a.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| a[i])
            .collect();
        if is_subseq(&sub) {
            best = k;
        }
    }
    best
}

fn lcs_recursive(
    a: &[&str],
    b: &[&str],
    i: usize,
    j: usize,
    memo: &mut std::collections::HashMap<(usize, usize), usize>,
) -> usize {
    if i == a.len() || j == b.len() {
        return 0;
    }
    if let Some(&v) = memo.get(&(i, j)) {
        return v;
    }
    let v = if a[i] == b[j] {
        1 + lcs_recursive(a, b, i + 1, j + 1, memo)
    } else {
        lcs_recursive(a, b, i + 1, j, memo).max(lcs_recursive(a, b, i, j + 1, memo))
    };
    memo.insert((i, j), v);
    v
}

pub fn rouge_l_oracle(cand: &[&str], reference: &[&str]) -> (f64, f64, f64) {
    let l = lcs_oracle(cand, reference);
    let (p, r) = (div(l, cand.len()), div(l, reference.len()));
    (p, r, f1(p, r))
}

/// Greedy max-cosine matching over explicit one-hot vectors in `VOCAB`.
pub fn bert_oracle(cand: &[&str], reference: &[&str]) -> (f64, f64, f64) {
    let one_hot = |t: &str| -> Vec<f64> {
        VOCAB
            .iter()
            .map(|v| if *v == t { 1.0 } else { 0.0 })
            .collect()
    };
    let cos = |x: &[f64], y: &[f64]| -> f64 {
        let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
        let ny = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        dot / (nx * ny)
    };
    let c: Vec<Vec<f64>> = cand.iter().map(|t| one_hot(t)).collect();
    let r: Vec<Vec<f64>> = reference.iter().map(|t| one_hot(t)).collect();
    let best =
        |x: &Vec<f64>, ys: &[Vec<f64>]| ys.iter().map(|y| cos(x, y)).fold(f64::MIN, f64::max);
    let p = c.iter().map(|x| best(x, &r)).sum::<f64>() / c.len() as f64;
    let rc = r.iter().map(|y| best(y, &c)).sum::<f64>() / r.len() as f64;
    (p, rc, f1(p, rc))
}

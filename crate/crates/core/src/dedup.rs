//! Substring-duplication profiling over word tokens: within-split and
//! cross-split duplication probabilities per window length, and filtering of
//! evaluation sentences that share long verbatim substrings with training
//! data. Windows are compared through a 128-bit polynomial rolling hash
//! (two independent 61-bit hashes); windows never cross sentence boundaries.

use std::collections::HashMap;

use serde::Serialize;

use crate::rng::fnv1a64;

const MOD: u64 = (1 << 61) - 1;
const BASE1: u64 = 1_000_000_007;
const BASE2: u64 = 998_244_353;

fn mulmod(a: u64, b: u64) -> u64 {
    let t = a as u128 * b as u128;
    let folded = ((t >> 61) + (t & MOD as u128)) as u64;
    if folded >= MOD {
        folded - MOD
    } else {
        folded
    }
}

fn addmod(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= MOD {
        s - MOD
    } else {
        s
    }
}

/// Prefix hashes of one token sequence under both bases.
struct PrefixHash {
    h1: Vec<u64>,
    h2: Vec<u64>,
    p1: Vec<u64>,
    p2: Vec<u64>,
}

impl PrefixHash {
    fn new(tokens: &[String]) -> PrefixHash {
        let n = tokens.len();
        let mut h1 = Vec::with_capacity(n + 1);
        let mut h2 = Vec::with_capacity(n + 1);
        let mut p1 = Vec::with_capacity(n + 1);
        let mut p2 = Vec::with_capacity(n + 1);
        h1.push(0);
        h2.push(0);
        p1.push(1);
        p2.push(1);
        for (i, token) in tokens.iter().enumerate() {
            // keep token hashes inside the field
            let t = fnv1a64(token.as_bytes()) % MOD;
            h1.push(addmod(mulmod(h1[i], BASE1), t));
            h2.push(addmod(mulmod(h2[i], BASE2), t));
            p1.push(mulmod(p1[i], BASE1));
            p2.push(mulmod(p2[i], BASE2));
        }
        PrefixHash { h1, h2, p1, p2 }
    }

    fn len(&self) -> usize {
        self.h1.len() - 1
    }

    /// Combined 128-bit digest of tokens[l..r].
    fn window(&self, l: usize, r: usize) -> u128 {
        let w = r - l;
        let d1 = addmod(self.h1[r], MOD - mulmod(self.h1[l], self.p1[w]));
        let d2 = addmod(self.h2[r], MOD - mulmod(self.h2[l], self.p2[w]));
        ((d1 as u128) << 61) | d2 as u128
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DupKind {
    Within,
    Cross,
}

impl std::fmt::Display for DupKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DupKind::Within => "within",
            DupKind::Cross => "cross",
        })
    }
}

/// Duplication probability per substring length.
#[derive(Debug, Clone, Serialize)]
pub struct DupProfile {
    pub lengths: Vec<usize>,
    pub probs: Vec<f64>,
    pub kind: DupKind,
    /// Series name in CSV reports; defaults to the kind.
    pub label: String,
}

/// All length-L window digests of a split, with occurrence counts.
pub struct SubstringIndex {
    pub window_len: usize,
    counts: HashMap<u128, u32>,
}

impl SubstringIndex {
    pub fn build(side: &[Vec<String>], window_len: usize) -> SubstringIndex {
        assert!(window_len >= 1);
        let mut counts = HashMap::new();
        for tokens in side {
            let ph = PrefixHash::new(tokens);
            for l in 0..(ph.len() + 1).saturating_sub(window_len) {
                *counts.entry(ph.window(l, l + window_len)).or_insert(0) += 1;
            }
        }
        SubstringIndex { window_len, counts }
    }

    pub fn contains(&self, digest: u128) -> bool {
        self.counts.contains_key(&digest)
    }

    /// True if any length-`window_len` window of `tokens` occurs in the index.
    pub fn contains_any_window(&self, tokens: &[String]) -> bool {
        if tokens.len() < self.window_len {
            return false;
        }
        let ph = PrefixHash::new(tokens);
        (0..=tokens.len() - self.window_len)
            .any(|l| self.contains(ph.window(l, l + self.window_len)))
    }
}

/// Fraction of length-L windows that occur at two or more positions across
/// the whole side, for each requested L.
pub fn dup_within(side: &[Vec<String>], lengths: &[usize]) -> DupProfile {
    let probs = lengths
        .iter()
        .map(|&len| {
            let index = SubstringIndex::build(side, len);
            let total: u64 = index.counts.values().map(|&c| c as u64).sum();
            if total == 0 {
                return 0.0;
            }
            let duplicated: u64 = index
                .counts
                .values()
                .filter(|&&c| c >= 2)
                .map(|&c| c as u64)
                .sum();
            duplicated as f64 / total as f64
        })
        .collect();
    DupProfile {
        lengths: lengths.to_vec(),
        probs,
        kind: DupKind::Within,
        label: "within".to_string(),
    }
}

/// Fraction of eval-side length-L windows that also occur anywhere in the
/// train side, for each requested L.
pub fn dup_cross(
    eval_side: &[Vec<String>],
    train_side: &[Vec<String>],
    lengths: &[usize],
) -> DupProfile {
    let probs = lengths
        .iter()
        .map(|&len| {
            let index = SubstringIndex::build(train_side, len);
            let mut total = 0u64;
            let mut hits = 0u64;
            for tokens in eval_side {
                let ph = PrefixHash::new(tokens);
                for l in 0..(ph.len() + 1).saturating_sub(len) {
                    total += 1;
                    if index.contains(ph.window(l, l + len)) {
                        hits += 1;
                    }
                }
            }
            if total == 0 {
                0.0
            } else {
                hits as f64 / total as f64
            }
        })
        .collect();
    DupProfile {
        lengths: lengths.to_vec(),
        probs,
        kind: DupKind::Cross,
        label: "cross".to_string(),
    }
}

/// Partition evaluation items by substring leakage: an item is removed when
/// its measured token sequence contains any window longer than `min_len`
/// tokens that occurs verbatim in the train side. Returns (kept, removed)
/// index lists over `eval_measured`.
pub fn filter_leaky(
    eval_measured: &[Vec<String>],
    train_side: &[Vec<String>],
    min_len: usize,
) -> (Vec<usize>, Vec<usize>) {
    assert!(min_len >= 1);
    // A duplicated window longer than min_len exists iff one of exactly
    // min_len + 1 tokens does.
    let index = SubstringIndex::build(train_side, min_len + 1);
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, tokens) in eval_measured.iter().enumerate() {
        if index.contains_any_window(tokens) {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    (kept, removed)
}

/// Alternate, count-based reading of the leak filter: an item is removed
/// when more than `max_count` of its length-`window_len` windows occur in the
/// train side. Returns (kept, removed) index lists over `eval_measured`.
pub fn filter_leaky_count(
    eval_measured: &[Vec<String>],
    train_side: &[Vec<String>],
    window_len: usize,
    max_count: usize,
) -> (Vec<usize>, Vec<usize>) {
    let index = SubstringIndex::build(train_side, window_len);
    let mut kept = Vec::new();
    let mut removed = Vec::new();
    for (i, tokens) in eval_measured.iter().enumerate() {
        let hits = if tokens.len() < window_len {
            0
        } else {
            let ph = PrefixHash::new(tokens);
            (0..=tokens.len() - window_len)
                .filter(|&l| index.contains(ph.window(l, l + window_len)))
                .count()
        };
        if hits > max_count {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    (kept, removed)
}

/// CSV plot data: "length,series,prob", one row per (profile, length).
pub fn profile_report(profiles: &[DupProfile]) -> String {
    let mut out = String::from("length,series,prob\n");
    for profile in profiles {
        for (&len, &prob) in profile.lengths.iter().zip(&profile.probs) {
            out.push_str(&format!("{len},{},{prob}\n", profile.label));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64;

    fn toks(sentences: &[&str]) -> Vec<Vec<String>> {
        sentences
            .iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    /// Exact O(n^2) oracle comparing token slices directly.
    fn oracle_within(side: &[Vec<String>], len: usize) -> f64 {
        let windows: Vec<&[String]> = side
            .iter()
            .flat_map(|s| s.windows(len))
            .collect();
        if windows.is_empty() {
            return 0.0;
        }
        let dup = windows
            .iter()
            .filter(|w| windows.iter().filter(|v| v == w).count() >= 2)
            .count();
        dup as f64 / windows.len() as f64
    }

    fn oracle_cross(eval: &[Vec<String>], train: &[Vec<String>], len: usize) -> f64 {
        let train_windows: Vec<&[String]> = train.iter().flat_map(|s| s.windows(len)).collect();
        let eval_windows: Vec<&[String]> = eval.iter().flat_map(|s| s.windows(len)).collect();
        if eval_windows.is_empty() {
            return 0.0;
        }
        let hits = eval_windows
            .iter()
            .filter(|w| train_windows.iter().any(|v| v == *w))
            .count();
        hits as f64 / eval_windows.len() as f64
    }

    #[test]
    fn abab_fixture_two_thirds() {
        let side = toks(&["a b a b"]);
        let profile = dup_within(&side, &[2]);
        assert!((profile.probs[0] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn all_distinct_tokens_zero() {
        let side = toks(&["a b c d e f"]);
        let profile = dup_within(&side, &[1, 2, 3]);
        assert!(profile.probs.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn repeated_sentence_fully_duplicated() {
        let side = toks(&["x y z", "x y z"]);
        let profile = dup_within(&side, &[3]);
        assert_eq!(profile.probs[0], 1.0);
    }

    #[test]
    fn no_windows_yields_zero() {
        let side = toks(&["a b"]);
        let profile = dup_within(&side, &[5]);
        assert_eq!(profile.probs[0], 0.0);
    }

    #[test]
    fn cross_subset_is_one() {
        let train = toks(&["u v w x", "p q r"]);
        let eval = toks(&["u v w x"]);
        let profile = dup_cross(&eval, &train, &[1, 2, 3, 4]);
        assert!(profile.probs.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn cross_disjoint_vocab_is_zero() {
        let train = toks(&["a b c"]);
        let eval = toks(&["x y z"]);
        let profile = dup_cross(&eval, &train, &[1, 2]);
        assert!(profile.probs.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn cross_partial_overlap_half() {
        let train = toks(&["w x y"]);
        let eval = toks(&["x y z"]);
        let profile = dup_cross(&eval, &train, &[2]);
        assert!((profile.probs[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn cross_is_asymmetric() {
        let a = toks(&["x y", "x y"]);
        let b = toks(&["x y z q"]);
        let ab = dup_cross(&a, &b, &[2]).probs[0];
        let ba = dup_cross(&b, &a, &[2]).probs[0];
        assert!((ab - 1.0).abs() < 1e-12);
        assert!((ba - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn hash_matches_exact_oracle_on_random_corpora() {
        let mut rng = XorShift64::new(2024);
        for _ in 0..5 {
            let side: Vec<Vec<String>> = (0..20)
                .map(|_| {
                    (0..5 + rng.gen_index(20))
                        .map(|_| format!("w{}", rng.gen_index(12)))
                        .collect()
                })
                .collect();
            let other: Vec<Vec<String>> = (0..10)
                .map(|_| {
                    (0..5 + rng.gen_index(20))
                        .map(|_| format!("w{}", rng.gen_index(12)))
                        .collect()
                })
                .collect();
            for len in [1, 2, 3, 5] {
                let hashed = dup_within(&side, &[len]).probs[0];
                assert!((hashed - oracle_within(&side, len)).abs() < 1e-12, "L={len}");
                let crossed = dup_cross(&other, &side, &[len]).probs[0];
                assert!(
                    (crossed - oracle_cross(&other, &side, len)).abs() < 1e-12,
                    "L={len}"
                );
            }
        }
    }

    #[test]
    fn short_sentences_never_filtered() {
        let eval = toks(&["a b c d e"]);
        let train = toks(&["a b c d e"]);
        let (kept, removed) = filter_leaky(&eval, &train, 10);
        assert_eq!(kept, vec![0]);
        assert!(removed.is_empty());
    }

    #[test]
    fn long_verbatim_overlap_filtered() {
        let leaked = "t1 t2 t3 t4 t5 t6 t7 t8 t9 t10 t11";
        let eval = toks(&[&format!("prefix {leaked} suffix"), "clean sentence here"]);
        let train = toks(&[leaked, "other train data"]);
        let (kept, removed) = filter_leaky(&eval, &train, 10);
        assert_eq!(removed, vec![0]);
        assert_eq!(kept, vec![1]);
    }

    #[test]
    fn exactly_min_len_overlap_is_kept() {
        // a duplicated window of exactly min_len tokens does not trigger removal
        let shared = "t1 t2 t3 t4 t5 t6 t7 t8 t9 t10";
        let eval = toks(&[&format!("{shared} unique")]);
        let train = toks(&[&format!("{shared} different")]);
        let (kept, removed) = filter_leaky(&eval, &train, 10);
        assert_eq!(kept, vec![0]);
        assert!(removed.is_empty());
    }

    #[test]
    fn filter_with_min_len_above_longest_keeps_all() {
        let eval = toks(&["a a a a", "b b b"]);
        let train = eval.clone();
        let (kept, removed) = filter_leaky(&eval, &train, 50);
        assert_eq!(kept.len(), 2);
        assert!(removed.is_empty());
    }

    #[test]
    fn count_based_filter_thresholds_on_hits() {
        // eval item 0 shares 3 unigrams with train, item 1 shares 1
        let eval = toks(&["a b c d", "x a y z"]);
        let train = toks(&["a b c"]);
        let (kept, removed) = filter_leaky_count(&eval, &train, 1, 2);
        assert_eq!(removed, vec![0]);
        assert_eq!(kept, vec![1]);
        let (kept, removed) = filter_leaky_count(&eval, &train, 1, 3);
        assert_eq!(kept, vec![0, 1]);
        assert!(removed.is_empty());
    }

    #[test]
    fn report_rows() {
        let p = dup_within(&toks(&["a b a b"]), &[1, 2, 3]);
        let csv = profile_report(&[p.clone()]);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("length,series,prob\n"));
        let two = profile_report(&[p.clone(), p]);
        assert_eq!(two.lines().count(), 7);
        assert_eq!(profile_report(&[]), "length,series,prob\n");
    }

    #[test]
    fn within_monotone_on_generated_fixture() {
        let mut rng = XorShift64::new(5);
        let side: Vec<Vec<String>> = (0..30)
            .map(|_| {
                (0..15)
                    .map(|_| format!("w{}", rng.gen_index(8)))
                    .collect()
            })
            .collect();
        let lengths: Vec<usize> = (1..=8).collect();
        let profile = dup_within(&side, &lengths);
        for pair in profile.probs.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12);
        }
    }
}

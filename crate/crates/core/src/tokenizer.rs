//! Byte-level subword tokenizer: pair-merge training over whitespace-split
//! words with a 256-byte base alphabet, so any input tokenizes and
//! round-trips exactly.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use crate::error::{Error, Result};

/// Number of base symbols (one per byte value).
pub const BASE_VOCAB: usize = 256;

// Printable-unicode alias per byte so merge rules and tokens serialize as
// plain UTF-8 text (tabs, newlines, and arbitrary bytes included).
fn byte_to_char() -> &'static [char; 256] {
    static TABLE: OnceLock<[char; 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = ['\0'; 256];
        let mut n = 0u32;
        for b in 0..=255u32 {
            let printable = (0x21..=0x7e).contains(&b)
                || (0xa1..=0xac).contains(&b)
                || (0xae..=0xff).contains(&b);
            table[b as usize] = if printable {
                char::from_u32(b).unwrap()
            } else {
                let c = char::from_u32(256 + n).unwrap();
                n += 1;
                c
            };
        }
        table
    })
}

fn char_to_byte() -> &'static HashMap<char, u8> {
    static TABLE: OnceLock<HashMap<char, u8>> = OnceLock::new();
    TABLE.get_or_init(|| {
        byte_to_char()
            .iter()
            .enumerate()
            .map(|(b, &c)| (c, b as u8))
            .collect()
    })
}

/// Render a byte sequence as its printable-alias string.
pub fn bytes_to_display(bytes: &[u8]) -> String {
    let table = byte_to_char();
    bytes.iter().map(|&b| table[b as usize]).collect()
}

/// Inverse of [`bytes_to_display`].
pub fn display_to_bytes(s: &str) -> Result<Vec<u8>> {
    let table = char_to_byte();
    s.chars()
        .map(|c| {
            table
                .get(&c)
                .copied()
                .ok_or_else(|| Error::data(format!("invalid token character {c:?}")))
        })
        .collect()
}

/// An ordered list of byte-pair merge rules over a 256-byte base alphabet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubwordVocab {
    merges: Vec<(Vec<u8>, Vec<u8>)>,
    ranks: HashMap<(Vec<u8>, Vec<u8>), usize>,
}

impl SubwordVocab {
    fn from_merges(merges: Vec<(Vec<u8>, Vec<u8>)>) -> Self {
        let ranks = merges
            .iter()
            .cloned()
            .enumerate()
            .map(|(i, pair)| (pair, i))
            .collect();
        SubwordVocab { merges, ranks }
    }

    pub fn size(&self) -> usize {
        BASE_VOCAB + self.merges.len()
    }

    pub fn merges(&self) -> &[(Vec<u8>, Vec<u8>)] {
        &self.merges
    }

    /// Keep only the first `n` merges; the result tokenizes any sentence into
    /// at least as many tokens.
    pub fn truncated(&self, n: usize) -> SubwordVocab {
        SubwordVocab::from_merges(self.merges.iter().take(n).cloned().collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "bpe v1 {}", self.size())?;
        for (left, right) in &self.merges {
            writeln!(w, "{}\t{}", bytes_to_display(left), bytes_to_display(right))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<SubwordVocab> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data(format!("{}: empty vocab file", path.display())))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "bpe" || parts[1] != "v1" {
            return Err(Error::data(format!(
                "{}: bad vocab header {header:?}",
                path.display()
            )));
        }
        let mut merges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let (left, right) = line.split_once('\t').ok_or_else(|| {
                Error::data(format!("{}:{}: bad merge rule", path.display(), lineno + 2))
            })?;
            merges.push((display_to_bytes(left)?, display_to_bytes(right)?));
        }
        Ok(SubwordVocab::from_merges(merges))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    Whitespace,
    Subword,
}

#[derive(Debug, Clone)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    pub vocab: Option<SubwordVocab>,
    pub lowercase: bool,
}

impl TokenizerConfig {
    pub fn whitespace() -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Whitespace,
            vocab: None,
            lowercase: false,
        }
    }

    pub fn subword(vocab: SubwordVocab) -> Self {
        TokenizerConfig {
            mode: TokenizerMode::Subword,
            vocab: Some(vocab),
            lowercase: false,
        }
    }
}

/// Train merge rules on whitespace-split words. Merges stop when the vocab
/// reaches `vocab_size` or no adjacent pair occurs at least twice. Ties on
/// frequency break to the lexicographically smallest (left, right) pair.
pub fn train_subword<S: AsRef<str>>(sentences: &[S], vocab_size: usize) -> Result<SubwordVocab> {
    if sentences.is_empty() {
        return Err(Error::data("cannot train on an empty sentence collection"));
    }
    if vocab_size < BASE_VOCAB {
        return Err(Error::data(format!(
            "vocab_size {vocab_size} is below the byte base alphabet ({BASE_VOCAB})"
        )));
    }

    // Word frequencies; merges never cross whitespace.
    let mut word_counts: HashMap<&str, u64> = HashMap::new();
    for s in sentences {
        for w in s.as_ref().split_whitespace() {
            *word_counts.entry(w).or_insert(0) += 1;
        }
    }

    // Interned symbols: ids 0..256 are single bytes, merged symbols follow.
    let mut symbol_bytes: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
    let mut words: Vec<(Vec<u32>, u64)> = word_counts
        .into_iter()
        .map(|(w, c)| (w.bytes().map(|b| b as u32).collect(), c))
        .collect();
    // Stable iteration order for determinism.
    words.sort_by(|a, b| a.0.cmp(&b.0));

    let mut merges: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    while BASE_VOCAB + merges.len() < vocab_size {
        let mut pair_counts: HashMap<(u32, u32), u64> = HashMap::new();
        for (syms, count) in &words {
            for window in syms.windows(2) {
                *pair_counts.entry((window[0], window[1])).or_insert(0) += count;
            }
        }
        let best = pair_counts
            .iter()
            .filter(|(_, &c)| c >= 2)
            .min_by(|(pa, ca), (pb, cb)| {
                cb.cmp(ca).then_with(|| {
                    let ka = (
                        &symbol_bytes[pa.0 as usize],
                        &symbol_bytes[pa.1 as usize],
                    );
                    let kb = (
                        &symbol_bytes[pb.0 as usize],
                        &symbol_bytes[pb.1 as usize],
                    );
                    ka.cmp(&kb)
                })
            })
            .map(|(&pair, _)| pair);
        let Some((left, right)) = best else {
            break;
        };

        let new_id = symbol_bytes.len() as u32;
        let mut merged = symbol_bytes[left as usize].clone();
        merged.extend_from_slice(&symbol_bytes[right as usize]);
        merges.push((
            symbol_bytes[left as usize].clone(),
            symbol_bytes[right as usize].clone(),
        ));
        symbol_bytes.push(merged);

        for (syms, _) in &mut words {
            let mut i = 0;
            let mut out = Vec::with_capacity(syms.len());
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == left && syms[i + 1] == right {
                    out.push(new_id);
                    i += 2;
                } else {
                    out.push(syms[i]);
                    i += 1;
                }
            }
            *syms = out;
        }
    }

    Ok(SubwordVocab::from_merges(merges))
}

fn encode_word(word: &str, vocab: &SubwordVocab) -> Vec<String> {
    let mut symbols: Vec<Vec<u8>> = word.bytes().map(|b| vec![b]).collect();
    loop {
        let mut best: Option<(usize, usize)> = None; // (rank, position)
        for i in 0..symbols.len().saturating_sub(1) {
            let key = (symbols[i].clone(), symbols[i + 1].clone());
            if let Some(&rank) = vocab.ranks.get(&key) {
                if best.map_or(true, |(r, _)| rank < r) {
                    best = Some((rank, i));
                }
            }
        }
        let Some((_, i)) = best else { break };
        let right = symbols.remove(i + 1);
        symbols[i].extend_from_slice(&right);
    }
    symbols.iter().map(|s| bytes_to_display(s)).collect()
}

/// Tokenize text. Whitespace mode splits on Unicode whitespace; subword mode
/// applies merges inside words and emits whitespace bytes as their own
/// tokens, so detokenization is lossless.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> Result<Vec<String>> {
    let owned;
    let text = if config.lowercase {
        owned = text.to_lowercase();
        &owned
    } else {
        text
    };
    match config.mode {
        TokenizerMode::Whitespace => Ok(text.split_whitespace().map(str::to_string).collect()),
        TokenizerMode::Subword => {
            let vocab = config
                .vocab
                .as_ref()
                .ok_or_else(|| Error::config("subword mode requires a vocabulary"))?;
            let mut tokens = Vec::new();
            let mut rest = text;
            while !rest.is_empty() {
                let is_ws = rest.chars().next().unwrap().is_whitespace();
                let end = rest
                    .char_indices()
                    .find(|(_, c)| c.is_whitespace() != is_ws)
                    .map_or(rest.len(), |(i, _)| i);
                let (chunk, tail) = rest.split_at(end);
                if is_ws {
                    for b in chunk.bytes() {
                        tokens.push(bytes_to_display(&[b]));
                    }
                } else {
                    tokens.extend(encode_word(chunk, vocab));
                }
                rest = tail;
            }
            Ok(tokens)
        }
    }
}

/// Reassemble text from tokens. Exact inverse of subword tokenization;
/// whitespace mode joins tokens with single spaces.
pub fn detokenize(tokens: &[String], config: &TokenizerConfig) -> Result<String> {
    match config.mode {
        TokenizerMode::Whitespace => Ok(tokens.join(" ")),
        TokenizerMode::Subword => {
            let mut bytes = Vec::new();
            for t in tokens {
                bytes.extend(display_to_bytes(t)?);
            }
            String::from_utf8(bytes).map_err(|e| Error::data(format!("invalid UTF-8: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_merge_is_most_frequent_pair() {
        let vocab = train_subword(&["aaab", "aaab"], 258).unwrap();
        assert_eq!(vocab.merges()[0], (b"a".to_vec(), b"a".to_vec()));
    }

    #[test]
    fn single_char_yields_no_merges() {
        let vocab = train_subword(&["x"], 256).unwrap();
        assert!(vocab.merges().is_empty());
        assert_eq!(vocab.size(), 256);
    }

    #[test]
    fn vocab_size_below_base_is_error() {
        assert!(train_subword(&["abc"], 255).is_err());
    }

    #[test]
    fn training_is_deterministic() {
        let corpus = ["the cat sat", "the dog sat", "a cat and a dog"];
        let a = train_subword(&corpus, 300).unwrap();
        let b = train_subword(&corpus, 300).unwrap();
        assert_eq!(a.merges(), b.merges());
    }

    #[test]
    fn whitespace_mode_splits() {
        let cfg = TokenizerConfig::whitespace();
        assert_eq!(
            tokenize("4월 24일", &cfg).unwrap(),
            vec!["4월".to_string(), "24일".to_string()]
        );
    }

    #[test]
    fn oov_script_roundtrips() {
        let vocab = train_subword(&["english only here"], 300).unwrap();
        let cfg = TokenizerConfig::subword(vocab);
        let text = "로씨야련방 울라지보스또크";
        let tokens = tokenize(text, &cfg).unwrap();
        assert_eq!(detokenize(&tokens, &cfg).unwrap(), text);
    }

    #[test]
    fn merges_never_cross_whitespace() {
        let vocab = train_subword(&["a b a b a b a b"], 300).unwrap();
        for (l, r) in vocab.merges() {
            let mut joined = l.clone();
            joined.extend_from_slice(r);
            assert!(!joined.iter().any(|b| b.is_ascii_whitespace()));
        }
    }

    #[test]
    fn vocab_file_roundtrip() {
        let vocab = train_subword(&["the cat sat on the mat", "도착하시였다 도착하시였다"], 320)
            .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        vocab.save(f.path()).unwrap();
        let loaded = SubwordVocab::load(f.path()).unwrap();
        assert_eq!(vocab, loaded);
        let header = std::fs::read_to_string(f.path()).unwrap();
        assert!(header.starts_with(&format!("bpe v1 {}", vocab.size())));
    }

    #[test]
    fn truncated_vocab_never_tokenizes_shorter() {
        let corpus = ["abab abab ababab", "ab ab abab"];
        let full = train_subword(&corpus, 280).unwrap();
        let small = full.truncated(full.merges().len() / 2);
        let cfg_full = TokenizerConfig::subword(full.clone());
        let cfg_small = TokenizerConfig::subword(small);
        for text in ["ababab xyz", "ab a b", "totally unseen"] {
            let n_full = tokenize(text, &cfg_full).unwrap().len();
            let n_small = tokenize(text, &cfg_small).unwrap().len();
            assert!(n_full <= n_small, "{text}: {n_full} > {n_small}");
        }
    }

    proptest! {
        #[test]
        fn subword_roundtrip_identity(text in "\\PC*") {
            let vocab = train_subword(&["shared training text", text.as_str()], 300).unwrap();
            let cfg = TokenizerConfig::subword(vocab);
            let tokens = tokenize(&text, &cfg).unwrap();
            prop_assert_eq!(detokenize(&tokens, &cfg).unwrap(), text);
        }
    }
}

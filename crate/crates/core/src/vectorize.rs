//! tf-idf fitting and sparse-vector transforms. tf is the raw count,
//! idf = ln((1 + n_docs) / (1 + df)) + 1, L2 normalization on by default.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::corpus::Article;
use crate::error::{Error, Result};
use crate::tokenizer::{tokenize, TokenizerConfig};

#[derive(Debug, Clone)]
pub struct TfIdfModel {
    token_ids: HashMap<String, u32>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl TfIdfModel {
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn vocab_len(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self, token: &str) -> Option<f64> {
        self.token_ids.get(token).map(|&id| self.idf[id as usize])
    }

    /// Dump as TSV: header "tfidf v1 <n_docs>", then token<TAB>idf.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "tfidf v1 {}", self.n_docs)?;
        let mut tokens: Vec<(&String, &u32)> = self.token_ids.iter().collect();
        tokens.sort_by(|a, b| a.1.cmp(b.1));
        for (token, &id) in tokens {
            writeln!(w, "{token}\t{}", self.idf[id as usize])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TfIdfModel> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data(format!("{}: empty model file", path.display())))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "tfidf" || parts[1] != "v1" {
            return Err(Error::data(format!(
                "{}: bad model header {header:?}",
                path.display()
            )));
        }
        let n_docs: usize = parts[2]
            .parse()
            .map_err(|e| Error::data(format!("{}: bad n_docs: {e}", path.display())))?;
        let mut token_ids = HashMap::new();
        let mut idf = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let (token, weight) = line.split_once('\t').ok_or_else(|| {
                Error::data(format!("{}:{}: bad model line", path.display(), lineno + 2))
            })?;
            let weight: f64 = weight
                .parse()
                .map_err(|e| Error::data(format!("{}:{}: bad idf: {e}", path.display(), lineno + 2)))?;
            token_ids.insert(token.to_string(), idf.len() as u32);
            idf.push(weight);
        }
        Ok(TfIdfModel {
            token_ids,
            idf,
            n_docs,
        })
    }
}

/// Sparse vector over the model's token indices, with a cached L2 norm.
/// Zero-valued entries are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    entries: Vec<(u32, f64)>, // sorted by index
    norm: f64,
}

impl SparseVector {
    pub fn new(mut entries: Vec<(u32, f64)>) -> SparseVector {
        entries.retain(|&(_, w)| w != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        SparseVector { entries, norm }
    }

    pub fn zero() -> SparseVector {
        SparseVector {
            entries: Vec::new(),
            norm: 0.0,
        }
    }

    /// Dense-to-sparse: index i holds component i.
    pub fn from_dense(values: &[f64]) -> SparseVector {
        SparseVector::new(
            values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as u32, v))
                .collect(),
        )
    }

    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scale(&self, factor: f64) -> SparseVector {
        SparseVector::new(self.entries.iter().map(|&(i, w)| (i, w * factor)).collect())
    }

    /// Dot product by sorted-index merge.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let (mut i, mut j) = (0, 0);
        let mut sum = 0.0;
        while i < self.entries.len() && j < other.entries.len() {
            let (ia, wa) = self.entries[i];
            let (ib, wb) = other.entries[j];
            match ia.cmp(&ib) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += wa * wb;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Fit idf statistics over tokenized documents. Token index assignment is by
/// sorted token order, so fitting is independent of document order.
pub fn fit<T: AsRef<[String]>>(documents: &[T]) -> Result<TfIdfModel> {
    if documents.is_empty() || documents.iter().all(|d| d.as_ref().is_empty()) {
        return Err(Error::data("cannot fit tf-idf on an empty collection"));
    }
    let n_docs = documents.len();
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in documents {
        let unique: HashSet<&str> = doc.as_ref().iter().map(String::as_str).collect();
        for token in unique {
            *df.entry(token).or_insert(0) += 1;
        }
    }
    let sorted: BTreeSet<&str> = df.keys().copied().collect();
    let mut token_ids = HashMap::with_capacity(sorted.len());
    let mut idf = Vec::with_capacity(sorted.len());
    for token in sorted {
        let weight = ((1.0 + n_docs as f64) / (1.0 + df[token] as f64)).ln() + 1.0;
        token_ids.insert(token.to_string(), idf.len() as u32);
        idf.push(weight);
    }
    Ok(TfIdfModel {
        token_ids,
        idf,
        n_docs,
    })
}

/// Map tokens to a tf-idf vector. Unknown tokens are dropped; an empty or
/// all-OOV input yields the zero vector.
pub fn transform(tokens: &[String], model: &TfIdfModel, normalize: bool) -> SparseVector {
    let mut counts: HashMap<u32, f64> = HashMap::new();
    for token in tokens {
        if let Some(&id) = model.token_ids.get(token) {
            *counts.entry(id).or_insert(0.0) += 1.0;
        }
    }
    let v = SparseVector::new(
        counts
            .into_iter()
            .map(|(id, count)| (id, count * model.idf[id as usize]))
            .collect(),
    );
    if normalize && v.norm > 0.0 {
        v.scale(1.0 / v.norm)
    } else {
        v
    }
}

/// Token sequence of an article: title tokens, then all body-sentence tokens
/// in order.
pub fn article_tokens(article: &Article, config: &TokenizerConfig) -> Result<Vec<String>> {
    let mut tokens = tokenize(&article.title, config)?;
    for s in &article.sentences {
        tokens.extend(tokenize(&s.text, config)?);
    }
    Ok(tokens)
}

/// Vectorize an article from its concatenated title and body tokens.
pub fn article_vector(
    article: &Article,
    model: &TfIdfModel,
    config: &TokenizerConfig,
) -> Result<SparseVector> {
    Ok(transform(&article_tokens(article, config)?, model, true))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LangCode;

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn idf_hand_values() {
        let model = fit(&[toks(&["a", "b"]), toks(&["a"])]).unwrap();
        assert!((model.idf("a").unwrap() - 1.0).abs() < 1e-9);
        assert!((model.idf("b").unwrap() - (1.5f64.ln() + 1.0)).abs() < 1e-9);
        assert_eq!(model.idf("c"), None);
    }

    #[test]
    fn single_doc_idf_is_one() {
        let model = fit(&[toks(&["x"])]).unwrap();
        assert!((model.idf("x").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_collection_is_error() {
        assert!(fit::<Vec<String>>(&[]).is_err());
        assert!(fit(&[Vec::<String>::new()]).is_err());
    }

    #[test]
    fn transform_hand_values() {
        let model = fit(&[toks(&["a", "b"]), toks(&["a"])]).unwrap();
        let raw = transform(&toks(&["a", "a", "b"]), &model, false);
        let expect_b = 1.5f64.ln() + 1.0;
        let entries: HashMap<u32, f64> = raw.entries().iter().copied().collect();
        let a_id = *model.token_ids.get("a").unwrap();
        let b_id = *model.token_ids.get("b").unwrap();
        assert!((entries[&a_id] - 2.0).abs() < 1e-9);
        assert!((entries[&b_id] - expect_b).abs() < 1e-9);
        let normed = transform(&toks(&["a", "a", "b"]), &model, true);
        assert!((normed.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_and_oov_yield_zero_vector() {
        let model = fit(&[toks(&["a"])]).unwrap();
        assert!(transform(&[], &model, true).is_zero());
        assert!(transform(&toks(&["zzz"]), &model, true).is_zero());
        assert_eq!(transform(&[], &model, true).norm(), 0.0);
    }

    #[test]
    fn transform_is_linear_in_counts() {
        let model = fit(&[toks(&["a", "b", "c"]), toks(&["a"])]).unwrap();
        let once = transform(&toks(&["a", "b"]), &model, false);
        let twice = transform(&toks(&["a", "b", "a", "b"]), &model, false);
        for (&(i1, w1), &(i2, w2)) in once.entries().iter().zip(twice.entries()) {
            assert_eq!(i1, i2);
            assert!((w2 - 2.0 * w1).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_is_order_independent() {
        let docs = [toks(&["a", "b"]), toks(&["b", "c"]), toks(&["c"])];
        let rev: Vec<Vec<String>> = docs.iter().rev().cloned().collect();
        let m1 = fit(&docs).unwrap();
        let m2 = fit(&rev).unwrap();
        for token in ["a", "b", "c"] {
            assert_eq!(m1.idf(token), m2.idf(token));
        }
    }

    #[test]
    fn article_vector_concatenates_title_and_body() {
        let make = |title: &str| Article {
            id: "a1".into(),
            lang: LangCode::new("en").unwrap(),
            title: title.into(),
            sentences: vec![
                crate::corpus::Sentence {
                    id: "a1#0".into(),
                    text: "a".into(),
                    tokens: None,
                },
                crate::corpus::Sentence {
                    id: "a1#1".into(),
                    text: "b".into(),
                    tokens: None,
                },
            ],
            date: None,
        };
        let cfg = TokenizerConfig::whitespace();
        let model = fit(&[toks(&["t", "a", "b"])]).unwrap();
        let with_title = article_vector(&make("t"), &model, &cfg).unwrap();
        let direct = transform(&toks(&["t", "a", "b"]), &model, true);
        assert_eq!(with_title, direct);
        let no_title = article_vector(&make(""), &model, &cfg).unwrap();
        let body_only = transform(&toks(&["a", "b"]), &model, true);
        assert_eq!(no_title, body_only);
    }

    #[test]
    fn model_dump_roundtrip() {
        let model = fit(&[toks(&["a", "b"]), toks(&["a"])]).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        model.save(f.path()).unwrap();
        let loaded = TfIdfModel::load(f.path()).unwrap();
        assert_eq!(loaded.n_docs(), 2);
        assert!((loaded.idf("b").unwrap() - model.idf("b").unwrap()).abs() < 1e-12);
    }
}

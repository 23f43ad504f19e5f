//! Bidirectional pivot-translation score matrices and alignment extraction:
//! tokenize originals and translations with a small shared subword
//! vocabulary, vectorize with tf-idf, score candidate pairs with the margin
//! criterion, and select pairs greedily or by per-target argmax. Also the
//! naive index baseline and the external-embedding backend.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{
    AlignmentPair, AlignmentSet, Article, Corpus, Level, Mode,
};
use crate::error::{Error, Result};
use crate::similarity::{cosine, knn_cosines, MarginConfig, MarginVariant};
use crate::tokenizer::{tokenize, train_subword, TokenizerConfig};
use crate::translate::TranslatedDocument;
use crate::vectorize::{fit, transform, SparseVector, TfIdfModel};

pub const DEFAULT_VOCAB_SIZE: usize = 2000;

/// Per-component base of the default ratio-margin acceptance threshold.
pub const DEFAULT_THRESHOLD_PER_COMPONENT: f64 = 1.06;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMethod {
    ToPivot,
    FromPivot,
    Bidi,
    Naive,
    ExternalEmbedding,
}

impl std::fmt::Display for AlignMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AlignMethod::ToPivot => "to_pivot",
            AlignMethod::FromPivot => "from_pivot",
            AlignMethod::Bidi => "bidi",
            AlignMethod::Naive => "naive",
            AlignMethod::ExternalEmbedding => "external_embedding",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    GlobalGreedy,
    PerTargetArgmax,
}

impl std::fmt::Display for Selection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Selection::GlobalGreedy => "global_greedy",
            Selection::PerTargetArgmax => "per_target_argmax",
        })
    }
}

/// Scope of the tf-idf fit and margin neighborhoods for sentence alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolScope {
    PerProblem,
    Corpus,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlignConfig {
    pub method: AlignMethod,
    pub selection: Selection,
    /// None selects the default: 1.06 per score component for ratio margins,
    /// 0 otherwise.
    pub threshold: Option<f64>,
    pub margin: MarginConfig,
    pub vocab_size: usize,
    pub pool_scope: PoolScope,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            method: AlignMethod::Bidi,
            selection: Selection::GlobalGreedy,
            threshold: None,
            margin: MarginConfig::default(),
            vocab_size: DEFAULT_VOCAB_SIZE,
            pool_scope: PoolScope::PerProblem,
        }
    }
}

impl AlignConfig {
    pub fn n_components(&self) -> usize {
        match self.method {
            AlignMethod::Bidi => 2,
            _ => 1,
        }
    }

    pub fn effective_threshold(&self) -> f64 {
        if let Some(t) = self.threshold {
            return t;
        }
        match (self.method, self.margin.variant) {
            (AlignMethod::Naive, _) => f64::NEG_INFINITY,
            (_, MarginVariant::Ratio) => {
                DEFAULT_THRESHOLD_PER_COMPONENT * self.n_components() as f64
            }
            _ => 0.0,
        }
    }

    /// Header comments recorded on alignment output files.
    pub fn header_comments(&self, seed: u64) -> Vec<String> {
        vec![format!(
            "method={} selection={} k={} variant={} threshold={} vocab_size={} seed={}",
            self.method,
            self.selection,
            self.margin.k,
            self.margin.variant,
            self.effective_threshold(),
            self.vocab_size,
            seed
        )]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Component {
    ToPivot,
    FromPivot,
}

/// Candidate-pair scores for one alignment problem, row-major src x tgt.
#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    pub level: Level,
    pub src_ids: Vec<String>,
    pub tgt_ids: Vec<String>,
    pub components: Vec<Component>,
    scores: Vec<f64>,
}

impl ScoreMatrix {
    pub fn new(
        level: Level,
        src_ids: Vec<String>,
        tgt_ids: Vec<String>,
        components: Vec<Component>,
        scores: Vec<f64>,
    ) -> Result<ScoreMatrix> {
        if scores.len() != src_ids.len() * tgt_ids.len() {
            return Err(Error::data("score matrix dimensions do not match ids"));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::data("score matrix contains non-finite entries"));
        }
        Ok(ScoreMatrix {
            level,
            src_ids,
            tgt_ids,
            components,
            scores,
        })
    }

    pub fn n_src(&self) -> usize {
        self.src_ids.len()
    }

    pub fn n_tgt(&self) -> usize {
        self.tgt_ids.len()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.scores[j * self.tgt_ids.len() + k]
    }
}

/// Average of the top-k cosines of `v` against `pool`, halved; one side of
/// the margin denominator. k is clamped to the pool size.
fn nn_side(v: &SparseVector, pool: &[SparseVector], k: usize) -> Result<f64> {
    let nn = knn_cosines(v, pool, k)?;
    Ok(nn.iter().map(|&(_, c)| c).sum::<f64>() / (2.0 * nn.len() as f64))
}

/// Row-major margin scores of every (x, y) pair. `nn_pool_x` holds the
/// candidates each x competes against (its neighborhood pool), `nn_pool_y`
/// likewise for y.
fn component_margins(
    xs: &[SparseVector],
    ys: &[SparseVector],
    nn_pool_x: &[SparseVector],
    nn_pool_y: &[SparseVector],
    cfg: &MarginConfig,
) -> Result<Vec<f64>> {
    let needs_nn = cfg.variant != MarginVariant::Absolute;
    let x_sides: Vec<f64> = if needs_nn {
        xs.iter()
            .map(|x| nn_side(x, nn_pool_x, cfg.k))
            .collect::<Result<_>>()?
    } else {
        vec![0.0; xs.len()]
    };
    let y_sides: Vec<f64> = if needs_nn {
        ys.iter()
            .map(|y| nn_side(y, nn_pool_y, cfg.k))
            .collect::<Result<_>>()?
    } else {
        vec![0.0; ys.len()]
    };
    let mut out = Vec::with_capacity(xs.len() * ys.len());
    for (x, &sx) in xs.iter().zip(&x_sides) {
        for (y, &sy) in ys.iter().zip(&y_sides) {
            let a = cosine(x, y);
            let score = match cfg.variant {
                MarginVariant::Absolute => a,
                MarginVariant::Ratio => a / (sx + sy).max(1e-9),
                MarginVariant::Distance => a - (sx + sy),
            };
            out.push(score);
        }
    }
    Ok(out)
}

fn components_for(method: AlignMethod) -> Result<Vec<Component>> {
    Ok(match method {
        AlignMethod::ToPivot => vec![Component::ToPivot],
        AlignMethod::FromPivot => vec![Component::FromPivot],
        AlignMethod::Bidi => vec![Component::ToPivot, Component::FromPivot],
        _ => {
            return Err(Error::config(format!(
                "method {method} does not build pivot score matrices"
            )))
        }
    })
}

/// Sum component margin matrices. `n`/`t` are original-side vectors, `nt` the
/// source translated into the target language, `tp` the target translated
/// into the pivot. Neighborhood pools are the opposing candidate set of each
/// component's own comparison space.
fn pivot_matrix(
    n: &[SparseVector],
    t: &[SparseVector],
    nt: Option<&[SparseVector]>,
    tp: Option<&[SparseVector]>,
    components: &[Component],
    margin: &MarginConfig,
) -> Result<Vec<f64>> {
    let mut total = vec![0.0; n.len() * t.len()];
    for component in components {
        let part = match component {
            Component::ToPivot => {
                let tp = tp.ok_or_else(|| {
                    Error::data("method requires target-to-pivot translations")
                })?;
                component_margins(n, tp, tp, n, margin)?
            }
            Component::FromPivot => {
                let nt = nt.ok_or_else(|| {
                    Error::data("method requires source-from-pivot translations")
                })?;
                component_margins(nt, t, t, nt, margin)?
            }
        };
        for (acc, p) in total.iter_mut().zip(part) {
            *acc += p;
        }
    }
    Ok(total)
}

fn sentence_vectors(
    texts: &[&str],
    tok: &TokenizerConfig,
    model: &TfIdfModel,
) -> Result<Vec<SparseVector>> {
    texts
        .iter()
        .map(|t| Ok(transform(&tokenize(t, tok)?, model, true)))
        .collect()
}

/// Build the sentence-level score matrix for one document pair: the sum over
/// required components of margin scores between originals and translations.
pub fn score_matrix(
    src_doc: &Article,
    src_trans: Option<&TranslatedDocument>,
    tgt_doc: &Article,
    tgt_trans: Option<&TranslatedDocument>,
    cfg: &AlignConfig,
    tok: &TokenizerConfig,
    model: &TfIdfModel,
) -> Result<ScoreMatrix> {
    let components = components_for(cfg.method)?;
    let src_texts: Vec<&str> = src_doc.sentences.iter().map(|s| s.text.as_str()).collect();
    let tgt_texts: Vec<&str> = tgt_doc.sentences.iter().map(|s| s.text.as_str()).collect();
    let n = sentence_vectors(&src_texts, tok, model)?;
    let t = sentence_vectors(&tgt_texts, tok, model)?;
    let nt = src_trans
        .map(|d| {
            let texts: Vec<&str> = d.sentences.iter().map(String::as_str).collect();
            sentence_vectors(&texts, tok, model)
        })
        .transpose()?;
    let tp = tgt_trans
        .map(|d| {
            let texts: Vec<&str> = d.sentences.iter().map(String::as_str).collect();
            sentence_vectors(&texts, tok, model)
        })
        .transpose()?;
    let scores = pivot_matrix(&n, &t, nt.as_deref(), tp.as_deref(), &components, &cfg.margin)?;
    ScoreMatrix::new(
        Level::Sentence,
        src_doc.sentences.iter().map(|s| s.id.clone()).collect(),
        tgt_doc.sentences.iter().map(|s| s.id.clone()).collect(),
        components,
        scores,
    )
}

/// Extract an alignment from a score matrix. Global greedy repeatedly takes
/// the maximal remaining entry at or above the threshold and retires its row
/// and column; per-target argmax pairs each target with its best source.
/// Ties break to the smaller source index, then the smaller target index.
pub fn select_pairs(m: &ScoreMatrix, cfg: &AlignConfig) -> Result<AlignmentSet> {
    let threshold = cfg.effective_threshold();
    match cfg.selection {
        Selection::PerTargetArgmax => {
            let mut pairs = Vec::new();
            for k in 0..m.n_tgt() {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..m.n_src() {
                    let s = m.get(j, k);
                    if best.map_or(true, |(_, bs)| s > bs) {
                        best = Some((j, s));
                    }
                }
                if let Some((j, s)) = best {
                    if s >= threshold {
                        pairs.push(AlignmentPair {
                            src_id: m.src_ids[j].clone(),
                            tgt_id: m.tgt_ids[k].clone(),
                            score: s,
                        });
                    }
                }
            }
            AlignmentSet::new(m.level, Mode::PerTarget, pairs)
        }
        Selection::GlobalGreedy => {
            let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
            for j in 0..m.n_src() {
                for k in 0..m.n_tgt() {
                    let s = m.get(j, k);
                    if s >= threshold {
                        candidates.push((j, k, s));
                    }
                }
            }
            candidates.sort_by(|a, b| {
                b.2.partial_cmp(&a.2)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then_with(|| a.0.cmp(&b.0))
                    .then_with(|| a.1.cmp(&b.1))
            });
            let mut used_src = vec![false; m.n_src()];
            let mut used_tgt = vec![false; m.n_tgt()];
            let mut pairs = Vec::new();
            for (j, k, s) in candidates {
                if used_src[j] || used_tgt[k] {
                    continue;
                }
                used_src[j] = true;
                used_tgt[k] = true;
                pairs.push(AlignmentPair {
                    src_id: m.src_ids[j].clone(),
                    tgt_id: m.tgt_ids[k].clone(),
                    score: s,
                });
            }
            AlignmentSet::new(m.level, Mode::OneToOne, pairs)
        }
    }
}

/// Pool all sentence texts that participate in an alignment problem:
/// originals of both documents plus whatever translations exist.
fn pooled_texts<'a>(
    src: &'a Article,
    tgt: &'a Article,
    src_trans: Option<&'a TranslatedDocument>,
    tgt_trans: Option<&'a TranslatedDocument>,
) -> Vec<&'a str> {
    let mut texts: Vec<&str> = Vec::new();
    texts.extend(src.sentences.iter().map(|s| s.text.as_str()));
    texts.extend(tgt.sentences.iter().map(|s| s.text.as_str()));
    for trans in [src_trans, tgt_trans].into_iter().flatten() {
        texts.extend(trans.sentences.iter().map(String::as_str));
    }
    texts
}

fn fit_over_texts(texts: &[&str], vocab_size: usize) -> Result<(TokenizerConfig, TfIdfModel)> {
    let vocab = train_subword(texts, vocab_size)?;
    let tok = TokenizerConfig::subword(vocab);
    let docs: Vec<Vec<String>> = texts
        .iter()
        .map(|t| tokenize(t, &tok))
        .collect::<Result<_>>()?;
    let model = fit(&docs)?;
    Ok((tok, model))
}

/// Full sentence-alignment pipeline for one document pair: train the shared
/// subword vocabulary on originals plus translations, fit tf-idf on the same
/// pool, build the score matrix, and select pairs.
pub fn align_sentences(
    src: &Article,
    tgt: &Article,
    src_trans: Option<&TranslatedDocument>,
    tgt_trans: Option<&TranslatedDocument>,
    cfg: &AlignConfig,
) -> Result<AlignmentSet> {
    if cfg.method == AlignMethod::Naive {
        return naive_align(src, tgt);
    }
    let texts = pooled_texts(src, tgt, src_trans, tgt_trans);
    let (tok, model) = fit_over_texts(&texts, cfg.vocab_size)?;
    let m = score_matrix(src, src_trans, tgt, tgt_trans, cfg, &tok, &model)?;
    select_pairs(&m, cfg)
}

/// Sentence alignment over many document pairs. With `PoolScope::Corpus` the
/// vocabulary, tf-idf fit, and margin neighborhoods span every listed pair;
/// candidate matrices stay per document pair.
pub fn align_sentences_in_pairs(
    pairs: &[(&Article, &Article)],
    src_trans: &HashMap<String, TranslatedDocument>,
    tgt_trans: &HashMap<String, TranslatedDocument>,
    cfg: &AlignConfig,
) -> Result<Vec<AlignmentSet>> {
    if cfg.method == AlignMethod::Naive || cfg.pool_scope == PoolScope::PerProblem {
        return pairs
            .iter()
            .map(|(s, t)| {
                align_sentences(s, t, src_trans.get(&s.id), tgt_trans.get(&t.id), cfg)
            })
            .collect();
    }

    let components = components_for(cfg.method)?;
    let mut texts: Vec<&str> = Vec::new();
    for (s, t) in pairs {
        texts.extend(pooled_texts(s, t, src_trans.get(&s.id), tgt_trans.get(&t.id)));
    }
    let (tok, model) = fit_over_texts(&texts, cfg.vocab_size)?;

    // Corpus-wide neighborhood pools per component space.
    let mut pool_n: Vec<SparseVector> = Vec::new();
    let mut pool_t: Vec<SparseVector> = Vec::new();
    let mut pool_nt: Vec<SparseVector> = Vec::new();
    let mut pool_tp: Vec<SparseVector> = Vec::new();
    let mut per_pair: Vec<(Vec<SparseVector>, Vec<SparseVector>, Option<Vec<SparseVector>>, Option<Vec<SparseVector>>)> =
        Vec::new();
    for (s, t) in pairs {
        let sv = sentence_vectors(
            &s.sentences.iter().map(|x| x.text.as_str()).collect::<Vec<_>>(),
            &tok,
            &model,
        )?;
        let tv = sentence_vectors(
            &t.sentences.iter().map(|x| x.text.as_str()).collect::<Vec<_>>(),
            &tok,
            &model,
        )?;
        let ntv = src_trans
            .get(&s.id)
            .map(|d| {
                sentence_vectors(
                    &d.sentences.iter().map(String::as_str).collect::<Vec<_>>(),
                    &tok,
                    &model,
                )
            })
            .transpose()?;
        let tpv = tgt_trans
            .get(&t.id)
            .map(|d| {
                sentence_vectors(
                    &d.sentences.iter().map(String::as_str).collect::<Vec<_>>(),
                    &tok,
                    &model,
                )
            })
            .transpose()?;
        pool_n.extend(sv.iter().cloned());
        pool_t.extend(tv.iter().cloned());
        if let Some(v) = &ntv {
            pool_nt.extend(v.iter().cloned());
        }
        if let Some(v) = &tpv {
            pool_tp.extend(v.iter().cloned());
        }
        per_pair.push((sv, tv, ntv, tpv));
    }

    let mut out = Vec::with_capacity(pairs.len());
    for ((s, t), (n, tv, nt, tp)) in pairs.iter().zip(&per_pair) {
        let mut total = vec![0.0; n.len() * tv.len()];
        for component in &components {
            let part = match component {
                Component::ToPivot => {
                    let tp = tp.as_ref().ok_or_else(|| {
                        Error::data("method requires target-to-pivot translations")
                    })?;
                    component_margins(n, tp, &pool_tp, &pool_n, &cfg.margin)?
                }
                Component::FromPivot => {
                    let nt = nt.as_ref().ok_or_else(|| {
                        Error::data("method requires source-from-pivot translations")
                    })?;
                    component_margins(nt, tv, &pool_t, &pool_nt, &cfg.margin)?
                }
            };
            for (acc, p) in total.iter_mut().zip(part) {
                *acc += p;
            }
        }
        let m = ScoreMatrix::new(
            Level::Sentence,
            s.sentences.iter().map(|x| x.id.clone()).collect(),
            t.sentences.iter().map(|x| x.id.clone()).collect(),
            components.clone(),
            total,
        )?;
        out.push(select_pairs(&m, cfg)?);
    }
    Ok(out)
}

/// Concatenated token sequence of a translated article: translated title
/// first, then translated body sentences in order.
fn translated_article_tokens(
    doc: &TranslatedDocument,
    tok: &TokenizerConfig,
) -> Result<Vec<String>> {
    let mut tokens = match &doc.title {
        Some(title) => tokenize(title, tok)?,
        None => Vec::new(),
    };
    for s in &doc.sentences {
        tokens.extend(tokenize(s, tok)?);
    }
    Ok(tokens)
}

/// Article-level alignment across two full corpora. Articles are vectorized
/// from their concatenated title and body tokens; margin neighborhoods span
/// the whole corpus.
pub fn align_articles(
    src: &Corpus,
    tgt: &Corpus,
    src_trans: &HashMap<String, TranslatedDocument>,
    tgt_trans: &HashMap<String, TranslatedDocument>,
    cfg: &AlignConfig,
) -> Result<AlignmentSet> {
    if src.articles.is_empty() || tgt.articles.is_empty() {
        return Err(Error::data("article alignment requires non-empty corpora"));
    }
    let components = components_for(cfg.method)?;

    let mut texts: Vec<String> = Vec::new();
    for corpus in [src, tgt] {
        for a in &corpus.articles {
            texts.push(a.title.clone());
            texts.extend(a.sentences.iter().map(|s| s.text.clone()));
        }
    }
    for trans in [src_trans, tgt_trans] {
        for d in trans.values() {
            if let Some(title) = &d.title {
                texts.push(title.clone());
            }
            texts.extend(d.sentences.iter().cloned());
        }
    }
    let vocab = train_subword(&texts, cfg.vocab_size)?;
    let tok = TokenizerConfig::subword(vocab);

    let article_token_seq = |a: &Article| -> Result<Vec<String>> {
        crate::vectorize::article_tokens(a, &tok)
    };
    let mut docs: Vec<Vec<String>> = Vec::new();
    for a in src.articles.iter().chain(&tgt.articles) {
        docs.push(article_token_seq(a)?);
    }
    let mut trans_docs: HashMap<(bool, String), Vec<String>> = HashMap::new();
    for (is_src, trans) in [(true, src_trans), (false, tgt_trans)] {
        for (id, d) in trans {
            let tokens = translated_article_tokens(d, &tok)?;
            docs.push(tokens.clone());
            trans_docs.insert((is_src, id.clone()), tokens);
        }
    }
    let model = fit(&docs)?;

    let vectors_of = |articles: &[Article]| -> Result<Vec<SparseVector>> {
        articles
            .iter()
            .map(|a| Ok(transform(&article_token_seq(a)?, &model, true)))
            .collect()
    };
    let n = vectors_of(&src.articles)?;
    let t = vectors_of(&tgt.articles)?;
    let trans_vec = |is_src: bool, articles: &[Article]| -> Result<Option<Vec<SparseVector>>> {
        let mut out = Vec::with_capacity(articles.len());
        for a in articles {
            match trans_docs.get(&(is_src, a.id.clone())) {
                Some(tokens) => out.push(transform(tokens, &model, true)),
                None => return Ok(None),
            }
        }
        Ok(Some(out))
    };
    let nt = trans_vec(true, &src.articles)?;
    let tp = trans_vec(false, &tgt.articles)?;

    let scores = pivot_matrix(&n, &t, nt.as_deref(), tp.as_deref(), &components, &cfg.margin)?;
    let m = ScoreMatrix::new(
        Level::Article,
        src.articles.iter().map(|a| a.id.clone()).collect(),
        tgt.articles.iter().map(|a| a.id.clone()).collect(),
        components,
        scores,
    )?;
    select_pairs(&m, cfg)
}

/// Index baseline: pair sentence i with sentence i.
pub fn naive_align(src: &Article, tgt: &Article) -> Result<AlignmentSet> {
    let n = src.sentences.len().min(tgt.sentences.len());
    let pairs = (0..n)
        .map(|i| AlignmentPair {
            src_id: src.sentences[i].id.clone(),
            tgt_id: tgt.sentences[i].id.clone(),
            score: 1.0,
        })
        .collect();
    AlignmentSet::new(Level::Sentence, Mode::OneToOne, pairs)
}

/// External per-sentence dense embeddings: header "emb v1 <dim>", then
/// "sentence_id<TAB>v1,v2,...,v_dim" per line.
#[derive(Debug, Clone)]
pub struct EmbeddingFile {
    pub dim: usize,
    vectors: HashMap<String, SparseVector>,
}

impl EmbeddingFile {
    pub fn load(path: &Path) -> Result<EmbeddingFile> {
        let reader = BufReader::new(File::open(path)?);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::data(format!("{}: empty embedding file", path.display())))??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 || parts[0] != "emb" || parts[1] != "v1" {
            return Err(Error::data(format!(
                "{}: bad embedding header {header:?}",
                path.display()
            )));
        }
        let dim: usize = parts[2]
            .parse()
            .map_err(|e| Error::data(format!("{}: bad dimension: {e}", path.display())))?;
        let mut vectors = HashMap::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, values) = line.split_once('\t').ok_or_else(|| {
                Error::data(format!("{}:{}: bad embedding line", path.display(), lineno + 2))
            })?;
            let values: Vec<f64> = values
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|e| {
                        Error::data(format!("{}:{}: bad value: {e}", path.display(), lineno + 2))
                    })
                })
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(Error::data(format!(
                    "{}:{}: dimension mismatch: got {} values, expected {}",
                    path.display(),
                    lineno + 2,
                    values.len(),
                    dim
                )));
            }
            vectors.insert(id.to_string(), SparseVector::from_dense(&values));
        }
        Ok(EmbeddingFile { dim, vectors })
    }

    pub fn get(&self, id: &str) -> Option<&SparseVector> {
        self.vectors.get(id)
    }

    fn require(&self, id: &str) -> Result<&SparseVector> {
        self.vectors
            .get(id)
            .ok_or_else(|| Error::data(format!("missing embedding for {id}")))
    }
}

fn single_component_matrix(
    level: Level,
    src_ids: Vec<String>,
    tgt_ids: Vec<String>,
    xs: &[SparseVector],
    ys: &[SparseVector],
    margin: &MarginConfig,
) -> Result<ScoreMatrix> {
    let scores = component_margins(xs, ys, ys, xs, margin)?;
    ScoreMatrix::new(level, src_ids, tgt_ids, vec![Component::ToPivot], scores)
}

/// Sentence alignment from external embeddings with margin scoring.
pub fn external_align_sentences(
    src: &Article,
    tgt: &Article,
    emb: &EmbeddingFile,
    cfg: &AlignConfig,
) -> Result<AlignmentSet> {
    let xs: Vec<SparseVector> = src
        .sentences
        .iter()
        .map(|s| emb.require(&s.id).cloned())
        .collect::<Result<_>>()?;
    let ys: Vec<SparseVector> = tgt
        .sentences
        .iter()
        .map(|s| emb.require(&s.id).cloned())
        .collect::<Result<_>>()?;
    let m = single_component_matrix(
        Level::Sentence,
        src.sentences.iter().map(|s| s.id.clone()).collect(),
        tgt.sentences.iter().map(|s| s.id.clone()).collect(),
        &xs,
        &ys,
        &cfg.margin,
    )?;
    select_pairs(&m, cfg)
}

/// Mean-pool an article's sentence embeddings (plus "<id>#title" when that
/// vector is provided) into one article vector.
pub fn article_embedding(article: &Article, emb: &EmbeddingFile) -> Result<SparseVector> {
    let mut parts: Vec<&SparseVector> = Vec::new();
    if let Some(v) = emb.get(&Article::title_id(&article.id)) {
        parts.push(v);
    }
    for s in &article.sentences {
        parts.push(emb.require(&s.id)?);
    }
    let mut dense = vec![0.0; emb.dim];
    for v in &parts {
        for &(i, w) in v.entries() {
            dense[i as usize] += w;
        }
    }
    let count = parts.len() as f64;
    for w in &mut dense {
        *w /= count;
    }
    Ok(SparseVector::from_dense(&dense))
}

/// Article alignment from mean-pooled external embeddings.
pub fn external_align_articles(
    src: &Corpus,
    tgt: &Corpus,
    emb: &EmbeddingFile,
    cfg: &AlignConfig,
) -> Result<AlignmentSet> {
    let xs: Vec<SparseVector> = src
        .articles
        .iter()
        .map(|a| article_embedding(a, emb))
        .collect::<Result<_>>()?;
    let ys: Vec<SparseVector> = tgt
        .articles
        .iter()
        .map(|a| article_embedding(a, emb))
        .collect::<Result<_>>()?;
    let m = single_component_matrix(
        Level::Article,
        src.articles.iter().map(|a| a.id.clone()).collect(),
        tgt.articles.iter().map(|a| a.id.clone()).collect(),
        &xs,
        &ys,
        &cfg.margin,
    )?;
    select_pairs(&m, cfg)
}

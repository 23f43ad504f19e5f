//! End-to-end orchestration: translate both corpora through the pivot
//! backend, align articles then sentences, exclude gold evaluation
//! sentences, split the mined pairs, profile duplication, and evaluate.
//! Every run writes a `run.json` manifest carrying the config hash and seed.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aligner::{
    align_articles, align_sentences_in_pairs, external_align_articles,
    external_align_sentences, AlignConfig, AlignMethod, EmbeddingFile,
};
use crate::corpus::{
    load_corpus, load_gold, split_eval, AlignmentPair, AlignmentSet, Corpus, LangCode, Level,
    Mode,
};
use crate::dedup::{dup_cross, dup_within, profile_report};
use crate::error::{Error, Result};
use crate::evaluation::{prf, Prf};
use crate::rng::derive_seed;
use crate::tokenizer::{train_subword, TokenizerConfig};
use crate::translate::{
    open_backend, translate_article, BackendConfig, Direction, TranslatedDocument,
    TranslationCache,
};

/// Flat JSON pipeline configuration. Paths are resolved relative to the
/// process working directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub src_corpus: String,
    pub tgt_corpus: String,
    pub src_lang: String,
    pub tgt_lang: String,
    /// Language the target side is translated into; defaults to src_lang
    /// (the pivot is a language close to the source).
    #[serde(default)]
    pub pivot_lang: Option<String>,
    pub backend: Option<BackendConfig>,
    /// Per-sentence dense embeddings, required by the external_embedding
    /// method only.
    #[serde(default)]
    pub embeddings: Option<String>,
    #[serde(default)]
    pub align: AlignConfig,
    /// Gold article mapping; when given, sentence alignment runs inside these
    /// pairs instead of automatically aligned ones.
    #[serde(default)]
    pub gold_articles: Option<String>,
    /// Gold sentence pairs for evaluation; their sentences are excluded from
    /// the mined corpus before splitting.
    #[serde(default)]
    pub gold_sentences: Option<String>,
    #[serde(default)]
    pub n_dev: usize,
    #[serde(default)]
    pub n_test: usize,
    pub seed: u64,
    pub output_dir: String,
    /// Translation cache log; defaults to "<output_dir>/cache.log". Point it
    /// outside the output directory to share across runs.
    #[serde(default)]
    pub cache_path: Option<String>,
    #[serde(default = "default_dedup_lengths")]
    pub dedup_lengths: Vec<usize>,
    /// Which side's word tokens the dedup report measures.
    #[serde(default = "default_dedup_side")]
    pub dedup_side: String,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
}

fn default_dedup_lengths() -> Vec<usize> {
    vec![1, 2, 5, 10, 20]
}

fn default_dedup_side() -> String {
    "tgt".to_string()
}

fn default_jobs() -> usize {
    4
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<PipelineConfig> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, path) in [("src_corpus", &self.src_corpus), ("tgt_corpus", &self.tgt_corpus)] {
            if !Path::new(path).exists() {
                return Err(Error::config(format!("{name} does not exist: {path}")));
            }
        }
        for path in [&self.gold_articles, &self.gold_sentences, &self.embeddings]
            .into_iter()
            .flatten()
        {
            if !Path::new(path).exists() {
                return Err(Error::config(format!("path does not exist: {path}")));
            }
        }
        LangCode::new(&self.src_lang)?;
        LangCode::new(&self.tgt_lang)?;
        if let Some(p) = &self.pivot_lang {
            LangCode::new(p)?;
        }
        match self.align.method {
            AlignMethod::Naive => {}
            AlignMethod::ExternalEmbedding => {
                if self.embeddings.is_none() {
                    return Err(Error::config(
                        "external_embedding method requires an embeddings path",
                    ));
                }
            }
            _ => {
                if self.backend.is_none() {
                    return Err(Error::config("pivot methods require a backend"));
                }
            }
        }
        Ok(())
    }

    /// Hex digest of the canonical serialized config.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub stages: Vec<String>,
    /// Wall-clock stage durations; the only nondeterministic manifest field.
    pub timings_ms: HashMap<String, u128>,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sentence: Option<Prf>,
    pub n_mined_articles: usize,
    pub n_mined_sentences: usize,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
}

fn stage_err(stage: &str, e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("stage {stage}: {m}")),
        Error::Io(e) => Error::Io(std::io::Error::new(e.kind(), format!("stage {stage}: {e}"))),
        Error::Backend(m) => Error::Backend(format!("stage {stage}: {m}")),
        Error::Data(m) => Error::Data(format!("stage {stage}: {m}")),
    }
}

struct StageClock {
    stages: Vec<String>,
    timings_ms: HashMap<String, u128>,
}

impl StageClock {
    fn new() -> StageClock {
        StageClock {
            stages: Vec::new(),
            timings_ms: HashMap::new(),
        }
    }

    fn run<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().map_err(|e| stage_err(name, e));
        self.stages.push(name.to_string());
        self.timings_ms
            .insert(name.to_string(), start.elapsed().as_millis());
        out
    }
}

/// Translate every article of `corpus` in `direction`, through the cache.
pub fn translate_corpus(
    corpus: &Corpus,
    direction: &Direction,
    backend_cfg: &BackendConfig,
    cache: &TranslationCache,
    jobs: usize,
) -> Result<HashMap<String, TranslatedDocument>> {
    let backend = open_backend(backend_cfg)?;
    let mut out = HashMap::new();
    for article in &corpus.articles {
        let doc = translate_article(
            article,
            direction,
            backend.as_ref(),
            cache,
            backend_cfg.batch_size,
            jobs,
        )?;
        out.insert(article.id.clone(), doc);
    }
    Ok(out)
}

fn all_texts<'a>(
    corpora: &'a [&Corpus],
    translations: &'a [&HashMap<String, TranslatedDocument>],
) -> Vec<&'a str> {
    let mut texts: Vec<&str> = Vec::new();
    for corpus in corpora {
        for a in &corpus.articles {
            texts.push(a.title.as_str());
            texts.extend(a.sentences.iter().map(|s| s.text.as_str()));
        }
    }
    for trans in translations {
        let mut ids: Vec<&String> = trans.keys().collect();
        ids.sort();
        for id in ids {
            let d = &trans[id];
            if let Some(t) = &d.title {
                texts.push(t.as_str());
            }
            texts.extend(d.sentences.iter().map(String::as_str));
        }
    }
    texts
}

/// Whitespace word-token sequences of one side of a mined pair list, for the
/// dedup report.
fn side_tokens(
    pairs: &AlignmentSet,
    corpus: &Corpus,
    take_src: bool,
) -> Result<Vec<Vec<String>>> {
    pairs
        .pairs
        .iter()
        .map(|p| {
            let id = if take_src { &p.src_id } else { &p.tgt_id };
            let s = corpus
                .sentence(id)
                .ok_or_else(|| Error::data(format!("unknown sentence id {id}")))?;
            Ok(s.text.split_whitespace().map(str::to_string).collect())
        })
        .collect()
}

/// Execute the full pipeline. Returns the manifest after writing every
/// artifact into the output directory. A `STALE` marker exists in the output
/// directory while a run is in flight or after a failed run.
pub fn run(cfg: &PipelineConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let out_dir = PathBuf::from(&cfg.output_dir);
    fs::create_dir_all(&out_dir)?;
    let stale = out_dir.join("STALE");
    fs::write(&stale, "run in flight or failed\n")?;

    let mut clock = StageClock::new();
    let mut artifacts: Vec<String> = Vec::new();

    let src_lang = LangCode::new(&cfg.src_lang)?;
    let tgt_lang = LangCode::new(&cfg.tgt_lang)?;
    let pivot_lang = match &cfg.pivot_lang {
        Some(p) => LangCode::new(p)?,
        None => src_lang.clone(),
    };
    let src = load_corpus(Path::new(&cfg.src_corpus), &src_lang)?;
    let tgt = load_corpus(Path::new(&cfg.tgt_corpus), &tgt_lang)?;

    // translate
    let needs_src_trans = matches!(cfg.align.method, AlignMethod::FromPivot | AlignMethod::Bidi);
    let needs_tgt_trans = matches!(cfg.align.method, AlignMethod::ToPivot | AlignMethod::Bidi);
    let mut src_trans: HashMap<String, TranslatedDocument> = HashMap::new();
    let mut tgt_trans: HashMap<String, TranslatedDocument> = HashMap::new();
    if needs_src_trans || needs_tgt_trans {
        let backend_cfg = cfg.backend.as_ref().expect("validated");
        let cache_path = cfg
            .cache_path
            .clone()
            .unwrap_or_else(|| out_dir.join("cache.log").to_string_lossy().into_owned());
        let cache = TranslationCache::open(Path::new(&cache_path))?;
        clock.run("translate", || {
            if needs_src_trans {
                let dir = Direction::new(src_lang.clone(), tgt_lang.clone())?;
                src_trans = translate_corpus(&src, &dir, backend_cfg, &cache, cfg.jobs)?;
            }
            if needs_tgt_trans {
                let dir = Direction::new(tgt_lang.clone(), pivot_lang.clone())?;
                tgt_trans = translate_corpus(&tgt, &dir, backend_cfg, &cache, cfg.jobs)?;
            }
            Ok(())
        })?;
    }

    // train-subword
    let uses_vocab = !matches!(
        cfg.align.method,
        AlignMethod::Naive | AlignMethod::ExternalEmbedding
    );
    if uses_vocab {
        let corpora = [&src, &tgt];
        let translations = [&src_trans, &tgt_trans];
        clock.run("train-subword", || {
            let texts = all_texts(&corpora, &translations);
            let vocab = train_subword(&texts, cfg.align.vocab_size)?;
            let path = out_dir.join("vocab.txt");
            vocab.save(&path)?;
            artifacts.push("vocab.txt".to_string());
            // sanity: the saved vocabulary round-trips
            let _ = TokenizerConfig::subword(vocab);
            Ok(())
        })?;
    }

    let embeddings = match &cfg.embeddings {
        Some(p) if cfg.align.method == AlignMethod::ExternalEmbedding => {
            Some(EmbeddingFile::load(Path::new(p))?)
        }
        _ => None,
    };

    // align-articles
    let article_pairs: AlignmentSet = clock.run("align-articles", || {
        if let Some(path) = &cfg.gold_articles {
            let gold = load_gold(Path::new(path))?;
            if gold.level != Level::Article {
                return Err(Error::data(format!(
                    "{path} does not hold article-level pairs"
                )));
            }
            return Ok(gold);
        }
        match cfg.align.method {
            AlignMethod::Naive => {
                let n = src.articles.len().min(tgt.articles.len());
                let pairs = (0..n)
                    .map(|i| AlignmentPair {
                        src_id: src.articles[i].id.clone(),
                        tgt_id: tgt.articles[i].id.clone(),
                        score: 1.0,
                    })
                    .collect();
                AlignmentSet::new(Level::Article, Mode::OneToOne, pairs)
            }
            AlignMethod::ExternalEmbedding => external_align_articles(
                &src,
                &tgt,
                embeddings.as_ref().expect("validated"),
                &cfg.align,
            ),
            _ => align_articles(&src, &tgt, &src_trans, &tgt_trans, &cfg.align),
        }
    })?;
    article_pairs.write_tsv(
        &out_dir.join("articles.tsv"),
        &cfg.align.header_comments(cfg.seed),
    )?;
    artifacts.push("articles.tsv".to_string());

    // align-sentences
    let mined: AlignmentSet = clock.run("align-sentences", || {
        let doc_pairs: Vec<(&crate::corpus::Article, &crate::corpus::Article)> = article_pairs
            .pairs
            .iter()
            .map(|p| {
                let s = src
                    .article(&p.src_id)
                    .ok_or_else(|| Error::data(format!("unknown article id {}", p.src_id)))?;
                let t = tgt
                    .article(&p.tgt_id)
                    .ok_or_else(|| Error::data(format!("unknown article id {}", p.tgt_id)))?;
                Ok((s, t))
            })
            .collect::<Result<_>>()?;
        let sets = match cfg.align.method {
            AlignMethod::ExternalEmbedding => {
                let emb = embeddings.as_ref().expect("validated");
                doc_pairs
                    .iter()
                    .map(|(s, t)| external_align_sentences(s, t, emb, &cfg.align))
                    .collect::<Result<Vec<_>>>()?
            }
            _ => align_sentences_in_pairs(&doc_pairs, &src_trans, &tgt_trans, &cfg.align)?,
        };
        let pairs: Vec<AlignmentPair> = sets.into_iter().flat_map(|s| s.pairs).collect();
        AlignmentSet::new(Level::Sentence, Mode::OneToOne, pairs)
    })?;
    mined.write_tsv(
        &out_dir.join("sentences.tsv"),
        &cfg.align.header_comments(cfg.seed),
    )?;
    artifacts.push("sentences.tsv".to_string());

    // eval against gold sentence pairs, on the full mined set
    let gold_sentences = cfg
        .gold_sentences
        .as_ref()
        .map(|p| load_gold(Path::new(p)))
        .transpose()?;
    let sentence_prf = match &gold_sentences {
        Some(gold) => Some(clock.run("eval", || prf(&mined, gold))?),
        None => None,
    };

    // exclude gold evaluation sentences from the mined corpus
    let kept: AlignmentSet = clock.run("exclude-gold", || {
        let mut excluded: std::collections::HashSet<&str> = std::collections::HashSet::new();
        if let Some(gold) = &gold_sentences {
            for p in &gold.pairs {
                excluded.insert(p.src_id.as_str());
                excluded.insert(p.tgt_id.as_str());
            }
        }
        AlignmentSet::new(
            Level::Sentence,
            mined.mode,
            mined
                .pairs
                .iter()
                .filter(|p| {
                    !excluded.contains(p.src_id.as_str()) && !excluded.contains(p.tgt_id.as_str())
                })
                .cloned()
                .collect(),
        )
    })?;

    // split
    let (dev, test, train) = clock.run("split", || {
        split_eval(&kept, cfg.n_dev, cfg.n_test, derive_seed(cfg.seed, "split"))
    })?;
    for (name, set) in [("dev.tsv", &dev), ("test.tsv", &test), ("train.tsv", &train)] {
        set.write_tsv(&out_dir.join(name), &cfg.align.header_comments(cfg.seed))?;
        artifacts.push(name.to_string());
    }

    // dedup-report
    clock.run("dedup-report", || {
        let take_src = cfg.dedup_side == "src";
        let corpus = if take_src { &src } else { &tgt };
        let train_tokens = side_tokens(&train, corpus, take_src)?;
        let test_tokens = side_tokens(&test, corpus, take_src)?;
        let mut profiles = vec![dup_within(&train_tokens, &cfg.dedup_lengths)];
        if !test_tokens.is_empty() {
            profiles.push(dup_cross(&test_tokens, &train_tokens, &cfg.dedup_lengths));
        }
        fs::write(out_dir.join("dedup.csv"), profile_report(&profiles))?;
        artifacts.push("dedup.csv".to_string());
        Ok(())
    })?;

    // report
    let report = RunReport {
        sentence: sentence_prf,
        n_mined_articles: article_pairs.len(),
        n_mined_sentences: mined.len(),
        n_train: train.len(),
        n_dev: dev.len(),
        n_test: test.len(),
    };
    fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    artifacts.push("report.json".to_string());

    artifacts.sort();
    let manifest = RunManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION").to_string(),
        stages: clock.stages,
        timings_ms: clock.timings_ms,
        artifacts,
    };
    fs::write(
        out_dir.join("run.json"),
        serde_json::to_string_pretty(&manifest)? + "\n",
    )?;
    fs::remove_file(&stale)?;
    Ok(manifest)
}

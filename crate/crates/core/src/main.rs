//! Command-line front end. Every module operation is a subcommand; `run`
//! executes the whole pipeline from a flat JSON config. Errors exit with
//! per-category codes: config=2, io=3, backend=4, data=5.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pivotalign::aligner::{
    align_articles, align_sentences_in_pairs, external_align_articles, external_align_sentences,
    AlignConfig, AlignMethod, EmbeddingFile, PoolScope, Selection,
};
use pivotalign::corpus::{
    load_alignment, load_corpus, load_gold, split_eval, AlignmentPair, AlignmentSet, Corpus,
    LangCode, Level, Mode,
};
use pivotalign::dedup::{dup_cross, dup_within, filter_leaky, filter_leaky_count, profile_report};
use pivotalign::error::{Error, Result};
use pivotalign::evaluation::{agreement, prf, significance};
use pivotalign::pipeline::{self, PipelineConfig};
use pivotalign::rng::derive_seed;
use pivotalign::similarity::{MarginConfig, MarginVariant};
use pivotalign::tokenizer::train_subword;
use pivotalign::translate::{
    BackendConfig, BackendKind, Direction, TranslationCache,
};

#[derive(Parser)]
#[command(name = "pivotalign", version, about = "Mine parallel articles and sentences from comparable bilingual corpora via pivot translation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Source-side corpus (JSONL, one article per line)
    #[arg(long)]
    src_corpus: PathBuf,
    #[arg(long)]
    src_lang: String,
    /// Target-side corpus (JSONL, one article per line)
    #[arg(long)]
    tgt_corpus: PathBuf,
    #[arg(long)]
    tgt_lang: String,
}

impl CorpusArgs {
    fn load(&self) -> Result<(Corpus, Corpus)> {
        let src = load_corpus(&self.src_corpus, &LangCode::new(&self.src_lang)?)?;
        let tgt = load_corpus(&self.tgt_corpus, &LangCode::new(&self.tgt_lang)?)?;
        Ok((src, tgt))
    }
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long, value_enum, default_value = "bidi")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "global-greedy")]
    selection: SelectionArg,
    /// Score acceptance threshold; default depends on method and variant
    #[arg(long)]
    threshold: Option<f64>,
    /// Neighborhood size of the margin criterion
    #[arg(long, default_value_t = 4)]
    k: usize,
    #[arg(long, value_enum, default_value = "ratio")]
    variant: VariantArg,
    #[arg(long, default_value_t = 2000)]
    vocab_size: usize,
    /// Fit vocabulary/tf-idf and margin pools per document pair or corpus-wide
    #[arg(long, value_enum, default_value = "per-problem")]
    pool_scope: PoolScopeArg,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum MethodArg {
    ToPivot,
    FromPivot,
    Bidi,
    Naive,
    ExternalEmbedding,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum SelectionArg {
    GlobalGreedy,
    PerTargetArgmax,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Ratio,
    Distance,
    Absolute,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum PoolScopeArg {
    PerProblem,
    Corpus,
}

impl AlignArgs {
    fn config(&self) -> AlignConfig {
        AlignConfig {
            method: match self.method {
                MethodArg::ToPivot => AlignMethod::ToPivot,
                MethodArg::FromPivot => AlignMethod::FromPivot,
                MethodArg::Bidi => AlignMethod::Bidi,
                MethodArg::Naive => AlignMethod::Naive,
                MethodArg::ExternalEmbedding => AlignMethod::ExternalEmbedding,
            },
            selection: match self.selection {
                SelectionArg::GlobalGreedy => Selection::GlobalGreedy,
                SelectionArg::PerTargetArgmax => Selection::PerTargetArgmax,
            },
            threshold: self.threshold,
            margin: MarginConfig {
                k: self.k,
                variant: match self.variant {
                    VariantArg::Ratio => MarginVariant::Ratio,
                    VariantArg::Distance => MarginVariant::Distance,
                    VariantArg::Absolute => MarginVariant::Absolute,
                },
            },
            vocab_size: self.vocab_size,
            pool_scope: match self.pool_scope {
                PoolScopeArg::PerProblem => PoolScope::PerProblem,
                PoolScopeArg::Corpus => PoolScope::Corpus,
            },
        }
    }
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum)]
    backend_kind: Option<BackendKindArg>,
    /// Directory (file backend) or URL (http backend). The http URL can also
    /// come from PIVOTALIGN_BACKEND_URL.
    #[arg(long)]
    backend_path: Option<String>,
    /// Translation cache log file
    #[arg(long)]
    cache: Option<PathBuf>,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 30_000)]
    timeout_ms: u64,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum BackendKindArg {
    File,
    Http,
}

impl BackendArgs {
    fn config(&self) -> Result<Option<BackendConfig>> {
        let env_url = std::env::var("PIVOTALIGN_BACKEND_URL").ok();
        let kind = match (self.backend_kind, &env_url) {
            (Some(k), _) => k,
            (None, Some(_)) => BackendKindArg::Http,
            (None, None) => return Ok(None),
        };
        let path_or_url = match (&self.backend_path, env_url) {
            (Some(p), _) => p.clone(),
            (None, Some(url)) => url,
            (None, None) => {
                return Err(Error::config(
                    "backend requires --backend-path or PIVOTALIGN_BACKEND_URL",
                ))
            }
        };
        let mut cfg = match kind {
            BackendKindArg::File => BackendConfig::file(path_or_url),
            BackendKindArg::Http => BackendConfig::http(path_or_url),
        };
        cfg.batch_size = self.batch_size;
        cfg.timeout_ms = self.timeout_ms;
        Ok(Some(cfg))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute the full pipeline from a flat JSON config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the worker count from the config
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Learn a subword merge vocabulary from a text file (one text per line)
    TokenizeTrain {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 2000)]
        vocab_size: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Translate every article of a corpus; writes translated documents as JSONL
    Translate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        lang: String,
        /// Target language of the translation
        #[arg(long)]
        to: String,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Align whole articles across the two corpora
    AlignArticles {
        #[command(flatten)]
        corpora: CorpusArgs,
        #[command(flatten)]
        align: AlignArgs,
        /// Source-side translations (JSONL from `translate`)
        #[arg(long)]
        src_translations: Option<PathBuf>,
        /// Target-side translations (JSONL from `translate`)
        #[arg(long)]
        tgt_translations: Option<PathBuf>,
        /// Per-sentence dense embeddings (external_embedding method)
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Align sentences inside given article pairs
    AlignSentences {
        #[command(flatten)]
        corpora: CorpusArgs,
        #[command(flatten)]
        align: AlignArgs,
        /// Article pair TSV (from `align-articles` or a gold mapping)
        #[arg(long)]
        articles: PathBuf,
        #[arg(long)]
        src_translations: Option<PathBuf>,
        #[arg(long)]
        tgt_translations: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score a predicted alignment against gold pairs (prints JSON)
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
    },
    /// Paired randomization test on the F1 gap between two predictions
    Significance {
        #[arg(long)]
        pred_a: PathBuf,
        #[arg(long)]
        pred_b: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long, default_value_t = 1000)]
        resamples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Inter-annotator style agreement between two alignments
    Agreement {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        /// File of universe source-side ids, one per line
        #[arg(long)]
        universe: PathBuf,
    },
    /// Duplication-probability profile of a token file (prints CSV)
    DedupStats {
        /// Text file, one sentence per line, whitespace tokens
        #[arg(long)]
        input: PathBuf,
        /// When given, also report cross-duplication of input against this file
        #[arg(long)]
        cross: Option<PathBuf>,
        /// Comma-separated window lengths
        #[arg(long, default_value = "1,2,5,10,20", value_delimiter = ',')]
        lengths: Vec<usize>,
    },
    /// Split evaluation sentences by substring leakage against training text
    FilterLeaky {
        #[arg(long)]
        eval: PathBuf,
        #[arg(long)]
        train: PathBuf,
        /// Remove items sharing a duplicated window longer than this
        #[arg(long, default_value_t = 10)]
        min_len: usize,
        /// Alternate reading: remove items with more than --max-count
        /// duplicated windows of length --min-len
        #[arg(long)]
        count_based: bool,
        #[arg(long, default_value_t = 10)]
        max_count: usize,
        #[arg(long)]
        kept: PathBuf,
        #[arg(long)]
        removed: PathBuf,
    },
    /// Shuffle an alignment TSV into dev/test/train files
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        dev: usize,
        #[arg(long)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output_dir: PathBuf,
    },
    /// Materialize an alignment as parallel text: pairs TSV plus two text
    /// files whose line i form a pair
    Export {
        #[arg(long)]
        alignment: PathBuf,
        #[command(flatten)]
        corpora: CorpusArgs,
        #[arg(long)]
        output_dir: PathBuf,
    },
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .map(str::to_string)
        .collect())
}

fn read_token_lines(path: &Path) -> Result<Vec<Vec<String>>> {
    Ok(read_lines(path)?
        .iter()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect())
}

fn load_translations(
    path: Option<&PathBuf>,
) -> Result<std::collections::HashMap<String, pivotalign::translate::TranslatedDocument>> {
    let mut out = std::collections::HashMap::new();
    if let Some(path) = path {
        for (lineno, line) in fs::read_to_string(path)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let doc: pivotalign::translate::TranslatedDocument = serde_json::from_str(line)
                .map_err(|e| {
                    Error::data(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
            out.insert(doc.source_article_id.clone(), doc);
        }
    }
    Ok(out)
}

fn doc_pairs<'a>(
    mapping: &AlignmentSet,
    src: &'a Corpus,
    tgt: &'a Corpus,
) -> Result<Vec<(&'a pivotalign::corpus::Article, &'a pivotalign::corpus::Article)>> {
    mapping
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
        .collect()
}

fn run_command(command: Command) -> Result<()> {
    match command {
        Command::Run { config, jobs } => {
            let mut cfg = PipelineConfig::load(&config)?;
            if let Some(jobs) = jobs {
                cfg.jobs = jobs;
            } else if let Ok(v) = std::env::var("PIVOTALIGN_JOBS") {
                cfg.jobs = v
                    .parse()
                    .map_err(|e| Error::config(format!("PIVOTALIGN_JOBS: {e}")))?;
            }
            if let (Ok(url), Some(backend)) =
                (std::env::var("PIVOTALIGN_BACKEND_URL"), cfg.backend.as_mut())
            {
                backend.kind = BackendKind::Http;
                backend.path_or_url = url;
            }
            let manifest = pipeline::run(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&manifest)?);
        }
        Command::TokenizeTrain {
            input,
            vocab_size,
            output,
        } => {
            let texts = read_lines(&input)?;
            let vocab = train_subword(&texts, vocab_size)?;
            vocab.save(&output)?;
            println!("trained {} merges", vocab.merges().len());
        }
        Command::Translate {
            corpus,
            lang,
            to,
            backend,
            output,
            jobs,
        } => {
            let lang = LangCode::new(&lang)?;
            let corpus = load_corpus(&corpus, &lang)?;
            let direction = Direction::new(lang, LangCode::new(&to)?)?;
            let backend_cfg = backend
                .config()?
                .ok_or_else(|| Error::config("translate requires a backend"))?;
            let cache = match &backend.cache {
                Some(path) => TranslationCache::open(path)?,
                None => TranslationCache::in_memory(),
            };
            let docs =
                pipeline::translate_corpus(&corpus, &direction, &backend_cfg, &cache, jobs)?;
            let mut ids: Vec<&String> = docs.keys().collect();
            ids.sort();
            let mut out = String::new();
            for id in ids {
                out.push_str(&serde_json::to_string(&docs[id])?);
                out.push('\n');
            }
            fs::write(&output, out)?;
            println!("translated {} articles", corpus.articles.len());
        }
        Command::AlignArticles {
            corpora,
            align,
            src_translations,
            tgt_translations,
            embeddings,
            seed,
            output,
        } => {
            let (src, tgt) = corpora.load()?;
            let cfg = align.config();
            let set = match cfg.method {
                AlignMethod::ExternalEmbedding => {
                    let path = embeddings
                        .ok_or_else(|| Error::config("external_embedding requires --embeddings"))?;
                    external_align_articles(&src, &tgt, &EmbeddingFile::load(&path)?, &cfg)?
                }
                AlignMethod::Naive => {
                    let n = src.articles.len().min(tgt.articles.len());
                    AlignmentSet::new(
                        Level::Article,
                        Mode::OneToOne,
                        (0..n)
                            .map(|i| AlignmentPair {
                                src_id: src.articles[i].id.clone(),
                                tgt_id: tgt.articles[i].id.clone(),
                                score: 1.0,
                            })
                            .collect(),
                    )?
                }
                _ => {
                    let src_trans = load_translations(src_translations.as_ref())?;
                    let tgt_trans = load_translations(tgt_translations.as_ref())?;
                    align_articles(&src, &tgt, &src_trans, &tgt_trans, &cfg)?
                }
            };
            set.write_tsv(&output, &cfg.header_comments(seed))?;
            println!("aligned {} article pairs", set.len());
        }
        Command::AlignSentences {
            corpora,
            align,
            articles,
            src_translations,
            tgt_translations,
            embeddings,
            seed,
            output,
        } => {
            let (src, tgt) = corpora.load()?;
            let cfg = align.config();
            let mapping = load_gold(&articles)?;
            if mapping.level != Level::Article {
                return Err(Error::data(format!(
                    "{} does not hold article-level pairs",
                    articles.display()
                )));
            }
            let pairs = doc_pairs(&mapping, &src, &tgt)?;
            let sets = match cfg.method {
                AlignMethod::ExternalEmbedding => {
                    let path = embeddings
                        .ok_or_else(|| Error::config("external_embedding requires --embeddings"))?;
                    let emb = EmbeddingFile::load(&path)?;
                    pairs
                        .iter()
                        .map(|(s, t)| external_align_sentences(s, t, &emb, &cfg))
                        .collect::<Result<Vec<_>>>()?
                }
                _ => {
                    let src_trans = load_translations(src_translations.as_ref())?;
                    let tgt_trans = load_translations(tgt_translations.as_ref())?;
                    align_sentences_in_pairs(&pairs, &src_trans, &tgt_trans, &cfg)?
                }
            };
            let set = AlignmentSet::new(
                Level::Sentence,
                Mode::OneToOne,
                sets.into_iter().flat_map(|s| s.pairs).collect(),
            )?;
            set.write_tsv(&output, &cfg.header_comments(seed))?;
            println!("aligned {} sentence pairs", set.len());
        }
        Command::Evaluate { pred, gold } => {
            let pred = load_alignment(&pred, Mode::OneToOne)?;
            let gold = load_gold(&gold)?;
            let result = prf(&pred, &gold)?;
            println!("{}", serde_json::to_string_pretty(&result)?);
        }
        Command::Significance {
            pred_a,
            pred_b,
            gold,
            resamples,
            seed,
        } => {
            let a = load_alignment(&pred_a, Mode::OneToOne)?;
            let b = load_alignment(&pred_b, Mode::OneToOne)?;
            let gold = load_gold(&gold)?;
            let p = significance(&a, &b, &gold, resamples, seed)?;
            println!("{p}");
        }
        Command::Agreement { a, b, universe } => {
            let a = load_alignment(&a, Mode::OneToOne)?;
            let b = load_alignment(&b, Mode::OneToOne)?;
            let universe: BTreeSet<String> = read_lines(&universe)?
                .into_iter()
                .filter(|l| !l.trim().is_empty())
                .collect();
            println!("{}", agreement(&a, &b, &universe)?);
        }
        Command::DedupStats {
            input,
            cross,
            lengths,
        } => {
            let side = read_token_lines(&input)?;
            let mut profiles = vec![dup_within(&side, &lengths)];
            if let Some(train) = cross {
                let train = read_token_lines(&train)?;
                profiles.push(dup_cross(&side, &train, &lengths));
            }
            print!("{}", profile_report(&profiles));
        }
        Command::FilterLeaky {
            eval,
            train,
            min_len,
            count_based,
            max_count,
            kept,
            removed,
        } => {
            let eval_lines = read_lines(&eval)?;
            let eval_tokens: Vec<Vec<String>> = eval_lines
                .iter()
                .map(|l| l.split_whitespace().map(str::to_string).collect())
                .collect();
            let train_tokens = read_token_lines(&train)?;
            let (keep, remove) = if count_based {
                filter_leaky_count(&eval_tokens, &train_tokens, min_len, max_count)
            } else {
                filter_leaky(&eval_tokens, &train_tokens, min_len)
            };
            let write_subset = |path: &Path, idx: &[usize]| -> Result<()> {
                let mut out = String::new();
                for &i in idx {
                    out.push_str(&eval_lines[i]);
                    out.push('\n');
                }
                Ok(fs::write(path, out)?)
            };
            write_subset(&kept, &keep)?;
            write_subset(&removed, &remove)?;
            println!("kept {} removed {}", keep.len(), remove.len());
        }
        Command::Split {
            input,
            dev,
            test,
            seed,
            output_dir,
        } => {
            let set = load_alignment(&input, Mode::OneToOne)?;
            let (dev_set, test_set, train_set) =
                split_eval(&set, dev, test, derive_seed(seed, "split"))?;
            fs::create_dir_all(&output_dir)?;
            let header = vec![format!("seed={seed}")];
            for (name, subset) in [
                ("dev.tsv", &dev_set),
                ("test.tsv", &test_set),
                ("train.tsv", &train_set),
            ] {
                subset.write_tsv(&output_dir.join(name), &header)?;
            }
            println!(
                "dev {} test {} train {}",
                dev_set.len(),
                test_set.len(),
                train_set.len()
            );
        }
        Command::Export {
            alignment,
            corpora,
            output_dir,
        } => {
            let set = load_alignment(&alignment, Mode::OneToOne)?;
            if set.level != Level::Sentence {
                return Err(Error::data("export requires sentence-level pairs"));
            }
            let (src, tgt) = corpora.load()?;
            fs::create_dir_all(&output_dir)?;
            let mut tsv = String::new();
            let mut src_txt = String::new();
            let mut tgt_txt = String::new();
            for p in &set.pairs {
                let s = src
                    .sentence(&p.src_id)
                    .ok_or_else(|| Error::data(format!("unknown sentence id {}", p.src_id)))?;
                let t = tgt
                    .sentence(&p.tgt_id)
                    .ok_or_else(|| Error::data(format!("unknown sentence id {}", p.tgt_id)))?;
                tsv.push_str(&format!("{}\t{}\t{}\n", p.src_id, p.tgt_id, p.score));
                src_txt.push_str(&s.text.replace('\n', " "));
                src_txt.push('\n');
                tgt_txt.push_str(&t.text.replace('\n', " "));
                tgt_txt.push('\n');
            }
            fs::write(output_dir.join("pairs.tsv"), tsv)?;
            fs::write(
                output_dir.join(format!("{}.txt", corpora.src_lang)),
                src_txt,
            )?;
            fs::write(
                output_dir.join(format!("{}.txt", corpora.tgt_lang)),
                tgt_txt,
            )?;
            println!("exported {} pairs", set.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! Corpus data model: articles, sentences, alignment sets, and their file
//! formats (JSONL corpora, TSV alignment files), plus seeded evaluation splits.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::XorShift64;

/// Short lowercase language tag, e.g. "nk", "en", "ja".
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LangCode(String);

impl LangCode {
    pub fn new(code: &str) -> Result<Self> {
        if code.is_empty() || code.len() > 8 || code.len() < 2 {
            return Err(Error::data(format!(
                "language code must be 2-8 characters: {code:?}"
            )));
        }
        if !code.bytes().all(|b| b.is_ascii_lowercase()) {
            return Err(Error::data(format!(
                "language code must be ASCII lowercase: {code:?}"
            )));
        }
        Ok(LangCode(code.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LangCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for LangCode {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        LangCode::new(&s)
    }
}

impl From<LangCode> for String {
    fn from(l: LangCode) -> String {
        l.0
    }
}

#[derive(Debug, Clone)]
pub struct Sentence {
    pub id: String,
    pub text: String,
    pub tokens: Option<Vec<String>>,
}

#[derive(Debug, Clone)]
pub struct Article {
    pub id: String,
    pub lang: LangCode,
    pub title: String,
    pub sentences: Vec<Sentence>,
    pub date: Option<String>,
}

impl Article {
    /// Sentence id scheme: "<article_id>#<zero-based index>".
    pub fn sentence_id(article_id: &str, index: usize) -> String {
        format!("{article_id}#{index}")
    }

    pub fn title_id(article_id: &str) -> String {
        format!("{article_id}#title")
    }
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub lang: LangCode,
    pub articles: Vec<Article>,
}

impl Corpus {
    pub fn n_sentences(&self) -> usize {
        self.articles.iter().map(|a| a.sentences.len()).sum()
    }

    pub fn article(&self, id: &str) -> Option<&Article> {
        self.articles.iter().find(|a| a.id == id)
    }

    /// Look up a sentence by its "<article_id>#<index>" id.
    pub fn sentence(&self, id: &str) -> Option<&Sentence> {
        let (aid, idx) = id.rsplit_once('#')?;
        let idx: usize = idx.parse().ok()?;
        self.article(aid)?.sentences.get(idx)
    }
}

/// One line of the corpus JSONL format.
#[derive(Debug, Serialize, Deserialize)]
struct ArticleRecord {
    id: String,
    lang: String,
    title: String,
    date: Option<String>,
    sentences: Vec<String>,
}

/// Load a line-delimited JSON corpus, validating ids and the expected language.
pub fn load_corpus(path: &Path, lang: &LangCode) -> Result<Corpus> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let reader = BufReader::new(file);
    let mut articles = Vec::new();
    let mut seen_ids = HashSet::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ArticleRecord = serde_json::from_str(&line).map_err(|e| {
            Error::data(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        if rec.lang != lang.as_str() {
            return Err(Error::data(format!(
                "{}:{}: article {} has lang {:?}, expected {:?}",
                path.display(),
                lineno + 1,
                rec.id,
                rec.lang,
                lang.as_str()
            )));
        }
        if !seen_ids.insert(rec.id.clone()) {
            return Err(Error::data(format!(
                "{}:{}: duplicate article id {:?}",
                path.display(),
                lineno + 1,
                rec.id
            )));
        }
        if rec.sentences.is_empty() {
            return Err(Error::data(format!(
                "{}:{}: article {} has no sentences",
                path.display(),
                lineno + 1,
                rec.id
            )));
        }
        let sentences = rec
            .sentences
            .iter()
            .enumerate()
            .map(|(i, text)| {
                if text.trim().is_empty() {
                    return Err(Error::data(format!(
                        "{}:{}: article {} sentence {} is empty",
                        path.display(),
                        lineno + 1,
                        rec.id,
                        i
                    )));
                }
                Ok(Sentence {
                    id: Article::sentence_id(&rec.id, i),
                    text: text.clone(),
                    tokens: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        articles.push(Article {
            id: rec.id,
            lang: lang.clone(),
            title: rec.title,
            sentences,
            date: rec.date,
        });
    }
    if articles.is_empty() {
        return Err(Error::data(format!("{}: no articles", path.display())));
    }
    Ok(Corpus {
        lang: lang.clone(),
        articles,
    })
}

/// Serialize a corpus back to JSONL with normalized field order.
pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for article in &corpus.articles {
        let rec = ArticleRecord {
            id: article.id.clone(),
            lang: article.lang.as_str().to_string(),
            title: article.title.clone(),
            date: article.date.clone(),
            sentences: article.sentences.iter().map(|s| s.text.clone()).collect(),
        };
        serde_json::to_writer(&mut w, &rec).map_err(|e| Error::data(e.to_string()))?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Sentence,
    Article,
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Sentence => "sentence",
            Level::Article => "article",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OneToOne,
    PerTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignmentPair {
    pub src_id: String,
    pub tgt_id: String,
    pub score: f64,
}

#[derive(Debug, Clone)]
pub struct AlignmentSet {
    pub level: Level,
    pub mode: Mode,
    pub pairs: Vec<AlignmentPair>,
}

impl AlignmentSet {
    pub fn new(level: Level, mode: Mode, pairs: Vec<AlignmentPair>) -> Result<Self> {
        let mut seen_pairs = HashSet::new();
        let mut seen_src = HashSet::new();
        let mut seen_tgt = HashSet::new();
        for p in &pairs {
            if !seen_pairs.insert((p.src_id.clone(), p.tgt_id.clone())) {
                return Err(Error::data(format!(
                    "duplicate pair ({}, {})",
                    p.src_id, p.tgt_id
                )));
            }
            if mode == Mode::OneToOne {
                if !seen_src.insert(p.src_id.clone()) {
                    return Err(Error::data(format!(
                        "one-to-one violation: src {} appears twice",
                        p.src_id
                    )));
                }
                if !seen_tgt.insert(p.tgt_id.clone()) {
                    return Err(Error::data(format!(
                        "one-to-one violation: tgt {} appears twice",
                        p.tgt_id
                    )));
                }
            }
        }
        Ok(AlignmentSet { level, mode, pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair_set(&self) -> HashSet<(&str, &str)> {
        self.pairs
            .iter()
            .map(|p| (p.src_id.as_str(), p.tgt_id.as_str()))
            .collect()
    }

    /// Write "src_id<TAB>tgt_id<TAB>score", descending score, with header
    /// comments carried through verbatim.
    pub fn write_tsv(&self, path: &Path, header_comments: &[String]) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        for c in header_comments {
            writeln!(w, "# {c}")?;
        }
        let mut pairs: Vec<&AlignmentPair> = self.pairs.iter().collect();
        pairs.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.src_id.cmp(&b.src_id))
                .then_with(|| a.tgt_id.cmp(&b.tgt_id))
        });
        for p in pairs {
            writeln!(w, "{}\t{}\t{}", p.src_id, p.tgt_id, p.score)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Infer the alignment level from an id: sentence ids carry a "#index" suffix.
fn infer_level(ids: impl Iterator<Item = impl AsRef<str>>) -> Level {
    let mut level = Level::Article;
    for id in ids {
        if id.as_ref().contains('#') {
            level = Level::Sentence;
            break;
        }
    }
    level
}

/// Load a gold alignment file: TSV with src_id, tgt_id columns; "#"-prefixed
/// lines are comments. All pairs get score 1.0 and the set is one-to-one.
pub fn load_gold(path: &Path) -> Result<AlignmentSet> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let (src, tgt) = match (fields.next(), fields.next()) {
            (Some(s), Some(t)) if !s.is_empty() && !t.is_empty() => (s, t),
            _ => {
                return Err(Error::data(format!(
                    "{}:{}: expected two tab-separated ids",
                    path.display(),
                    lineno + 1
                )))
            }
        };
        pairs.push(AlignmentPair {
            src_id: src.to_string(),
            tgt_id: tgt.to_string(),
            score: 1.0,
        });
    }
    let level = infer_level(pairs.iter().map(|p| p.src_id.as_str()));
    AlignmentSet::new(level, Mode::OneToOne, pairs)
}

/// Load a predicted alignment TSV (three columns, comments allowed).
pub fn load_alignment(path: &Path, mode: Mode) -> Result<AlignmentSet> {
    let file = File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let reader = BufReader::new(file);
    let mut pairs = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 {
            return Err(Error::data(format!(
                "{}:{}: expected at least two columns",
                path.display(),
                lineno + 1
            )));
        }
        let score = if fields.len() >= 3 {
            fields[2].parse::<f64>().map_err(|e| {
                Error::data(format!("{}:{}: bad score: {e}", path.display(), lineno + 1))
            })?
        } else {
            1.0
        };
        pairs.push(AlignmentPair {
            src_id: fields[0].to_string(),
            tgt_id: fields[1].to_string(),
            score,
        });
    }
    let level = infer_level(pairs.iter().map(|p| p.src_id.as_str()));
    AlignmentSet::new(level, mode, pairs)
}

/// Randomly partition an alignment set into dev/test/rest with a seeded,
/// portable shuffle.
pub fn split_eval(
    pairs: &AlignmentSet,
    n_dev: usize,
    n_test: usize,
    seed: u64,
) -> Result<(AlignmentSet, AlignmentSet, AlignmentSet)> {
    if n_dev + n_test > pairs.len() {
        return Err(Error::data(format!(
            "insufficient pairs: need {} but have {}",
            n_dev + n_test,
            pairs.len()
        )));
    }
    let mut indices: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = XorShift64::new(seed);
    rng.shuffle(&mut indices);
    let take = |range: std::ops::Range<usize>| -> Result<AlignmentSet> {
        AlignmentSet::new(
            pairs.level,
            pairs.mode,
            indices[range]
                .iter()
                .map(|&i| pairs.pairs[i].clone())
                .collect(),
        )
    };
    let dev = take(0..n_dev)?;
    let test = take(n_dev..n_dev + n_test)?;
    let rest = take(n_dev + n_test..pairs.len())?;
    Ok((dev, test, rest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn sample_jsonl() -> String {
        let mut s = String::new();
        for aid in ["a1", "a2"] {
            s.push_str(&format!(
                "{}\n",
                serde_json::json!({
                    "id": aid,
                    "lang": "nk",
                    "title": format!("title {aid}"),
                    "date": null,
                    "sentences": ["one", "two", "three"],
                })
            ));
        }
        s
    }

    #[test]
    fn load_counts() {
        let f = write_tmp(&sample_jsonl());
        let corpus = load_corpus(f.path(), &LangCode::new("nk").unwrap()).unwrap();
        assert_eq!(corpus.articles.len(), 2);
        assert_eq!(corpus.n_sentences(), 6);
        assert_eq!(corpus.articles[0].sentences[1].id, "a1#1");
    }

    #[test]
    fn empty_file_is_error() {
        let f = write_tmp("");
        let err = load_corpus(f.path(), &LangCode::new("nk").unwrap()).unwrap_err();
        assert!(err.to_string().contains("no articles"));
    }

    #[test]
    fn lang_mismatch_is_error() {
        let f = write_tmp(&sample_jsonl());
        assert!(load_corpus(f.path(), &LangCode::new("en").unwrap()).is_err());
    }

    #[test]
    fn duplicate_article_id_is_error() {
        let line = sample_jsonl().lines().next().unwrap().to_string();
        let f = write_tmp(&format!("{line}\n{line}\n"));
        let err = load_corpus(f.path(), &LangCode::new("nk").unwrap()).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn roundtrip_is_byte_identical() {
        let f = write_tmp(&sample_jsonl());
        let corpus = load_corpus(f.path(), &LangCode::new("nk").unwrap()).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&corpus, out.path()).unwrap();
        let reloaded = load_corpus(out.path(), &LangCode::new("nk").unwrap()).unwrap();
        let out2 = tempfile::NamedTempFile::new().unwrap();
        save_corpus(&reloaded, out2.path()).unwrap();
        assert_eq!(
            std::fs::read(out.path()).unwrap(),
            std::fs::read(out2.path()).unwrap()
        );
    }

    #[test]
    fn lang_code_validation() {
        assert!(LangCode::new("nk").is_ok());
        assert!(LangCode::new("").is_err());
        assert!(LangCode::new("x").is_err());
        assert!(LangCode::new("EN").is_err());
        assert!(LangCode::new("toolongcode").is_err());
    }

    #[test]
    fn gold_single_pair() {
        let f = write_tmp("# comment\na1#0\tb1#0\n");
        let gold = load_gold(f.path()).unwrap();
        assert_eq!(gold.len(), 1);
        assert_eq!(gold.level, Level::Sentence);
        assert_eq!(gold.pairs[0].score, 1.0);
    }

    #[test]
    fn gold_repeated_src_is_error() {
        let f = write_tmp("a1#0\tb1#0\na1#0\tb1#1\n");
        assert!(load_gold(f.path()).is_err());
    }

    #[test]
    fn gold_article_level_inferred() {
        let f = write_tmp("a1\tb1\n");
        assert_eq!(load_gold(f.path()).unwrap().level, Level::Article);
    }

    fn pairs_of(n: usize) -> AlignmentSet {
        AlignmentSet::new(
            Level::Sentence,
            Mode::OneToOne,
            (0..n)
                .map(|i| AlignmentPair {
                    src_id: format!("a#{i}"),
                    tgt_id: format!("b#{i}"),
                    score: 1.0,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn split_sizes_and_disjoint() {
        let pairs = pairs_of(10);
        let (dev, test, rest) = split_eval(&pairs, 3, 3, 9).unwrap();
        assert_eq!((dev.len(), test.len(), rest.len()), (3, 3, 4));
        let mut all: Vec<(String, String)> = Vec::new();
        for set in [&dev, &test, &rest] {
            for p in &set.pairs {
                all.push((p.src_id.clone(), p.tgt_id.clone()));
            }
        }
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn split_half_and_half() {
        let pairs = pairs_of(1000);
        let (dev, test, rest) = split_eval(&pairs, 500, 500, 1).unwrap();
        assert_eq!((dev.len(), test.len(), rest.len()), (500, 500, 0));
    }

    #[test]
    fn split_deterministic() {
        let pairs = pairs_of(20);
        let a = split_eval(&pairs, 5, 5, 77).unwrap();
        let b = split_eval(&pairs, 5, 5, 77).unwrap();
        assert_eq!(a.0.pairs, b.0.pairs);
        assert_eq!(a.1.pairs, b.1.pairs);
        assert_eq!(a.2.pairs, b.2.pairs);
    }

    #[test]
    fn split_insufficient_is_error() {
        let pairs = pairs_of(4);
        assert!(split_eval(&pairs, 3, 3, 0).is_err());
    }

    #[test]
    fn one_to_one_duplicate_tgt_rejected() {
        let res = AlignmentSet::new(
            Level::Sentence,
            Mode::OneToOne,
            vec![
                AlignmentPair {
                    src_id: "a#0".into(),
                    tgt_id: "b#0".into(),
                    score: 1.0,
                },
                AlignmentPair {
                    src_id: "a#1".into(),
                    tgt_id: "b#0".into(),
                    score: 1.0,
                },
            ],
        );
        assert!(res.is_err());
    }
}

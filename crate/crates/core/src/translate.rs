//! Pivot-translation gateway: obtain per-sentence translations from a
//! file-based or HTTP MT backend, behind a persistent append-only cache.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Article, LangCode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Direction {
    pub src: LangCode,
    pub tgt: LangCode,
}

impl Direction {
    pub fn new(src: LangCode, tgt: LangCode) -> Result<Self> {
        if src == tgt {
            return Err(Error::config(format!(
                "translation direction must change language: {src}"
            )));
        }
        Ok(Direction { src, tgt })
    }

    pub fn tag(&self) -> String {
        format!("{}-{}", self.src, self.tgt)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    File,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub path_or_url: String,
    #[serde(default = "default_timeout_ms")]
    pub timeout_ms: u64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Base of the retry backoff; lowered in tests.
    #[serde(default = "default_retry_base_ms")]
    pub retry_base_ms: u64,
}

fn default_timeout_ms() -> u64 {
    30_000
}

fn default_batch_size() -> usize {
    32
}

fn default_retry_base_ms() -> u64 {
    100
}

impl BackendConfig {
    pub fn file(path: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::File,
            path_or_url: path.into(),
            timeout_ms: default_timeout_ms(),
            batch_size: default_batch_size(),
            retry_base_ms: default_retry_base_ms(),
        }
    }

    pub fn http(url: impl Into<String>) -> Self {
        BackendConfig {
            kind: BackendKind::Http,
            path_or_url: url.into(),
            timeout_ms: default_timeout_ms(),
            batch_size: default_batch_size(),
            retry_base_ms: default_retry_base_ms(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        Ok(())
    }

    /// Stable identifier mixed into cache keys.
    pub fn backend_id(&self) -> String {
        match self.kind {
            BackendKind::File => format!("file:{}", self.path_or_url),
            BackendKind::Http => format!("http:{}", self.path_or_url),
        }
    }
}

/// One article's translations; position i translates source sentence i.
/// `title` is the title translated as a single text unit (None when the
/// source has no title or the backend provides none).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TranslatedDocument {
    pub source_article_id: String,
    pub direction: Direction,
    pub title: Option<String>,
    pub sentences: Vec<String>,
}

/// Deterministic 128-bit digest of (normalized text, direction, backend id),
/// rendered as 32 hex chars.
pub fn cache_key(text: &str, direction: &Direction, backend_id: &str) -> String {
    let mut hasher = Sha256::new();
    for field in [backend_id, direction.src.as_str(), direction.tgt.as_str(), text.trim()] {
        hasher.update((field.len() as u64).to_le_bytes());
        hasher.update(field.as_bytes());
    }
    let digest = hasher.finalize();
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

struct CacheInner {
    map: HashMap<String, String>,
    file: Option<File>,
}

/// Append-only key-value log: one "key<TAB>json-string" line per entry,
/// loaded fully at open. Writes are serialized; a batch is appended only
/// after its backend call succeeded.
pub struct TranslationCache {
    inner: Mutex<CacheInner>,
}

impl TranslationCache {
    pub fn open(path: &Path) -> Result<TranslationCache> {
        let mut map = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line?;
                if line.is_empty() {
                    continue;
                }
                let (key, value) = line.split_once('\t').ok_or_else(|| {
                    Error::data(format!("{}:{}: bad cache line", path.display(), lineno + 1))
                })?;
                let value: String = serde_json::from_str(value).map_err(|e| {
                    Error::data(format!("{}:{}: bad cache value: {e}", path.display(), lineno + 1))
                })?;
                map.insert(key.to_string(), value);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TranslationCache {
            inner: Mutex::new(CacheInner {
                map,
                file: Some(file),
            }),
        })
    }

    /// Cache without a backing file; used in tests and dry runs.
    pub fn in_memory() -> TranslationCache {
        TranslationCache {
            inner: Mutex::new(CacheInner {
                map: HashMap::new(),
                file: None,
            }),
        }
    }

    pub fn get(&self, key: &str) -> Option<String> {
        self.inner.lock().unwrap().map.get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn put_batch(&self, entries: &[(String, String)]) -> Result<()> {
        let mut inner = self.inner.lock().unwrap();
        if let Some(file) = inner.file.as_mut() {
            let mut buf = String::new();
            for (key, value) in entries {
                buf.push_str(key);
                buf.push('\t');
                buf.push_str(&serde_json::to_string(value).map_err(|e| Error::data(e.to_string()))?);
                buf.push('\n');
            }
            file.write_all(buf.as_bytes())?;
            file.flush()?;
        }
        for (key, value) in entries {
            inner.map.insert(key.clone(), value.clone());
        }
        Ok(())
    }
}

/// A translation backend. Production backends are file and HTTP; tests plug
/// in mocks to observe request counts.
pub trait TranslateBackend: Sync {
    fn id(&self) -> String;

    /// Translate a batch of texts, order-aligned with the input.
    fn translate_batch(&self, direction: &Direction, texts: &[String]) -> Result<Vec<String>>;

    /// File backends translate whole articles from pre-computed files and
    /// cannot serve arbitrary batches.
    fn translate_article_file(
        &self,
        _article: &Article,
        _direction: &Direction,
    ) -> Option<Result<(Option<String>, Vec<String>)>> {
        None
    }
}

/// Pre-computed translations on disk: `<article_id>.<src>-<tgt>.txt` with one
/// line per source sentence, plus optional `<article_id>.title.<src>-<tgt>.txt`.
pub struct FileBackend {
    root: PathBuf,
}

impl FileBackend {
    pub fn new(root: impl Into<PathBuf>) -> FileBackend {
        FileBackend { root: root.into() }
    }

    pub fn article_path(&self, article_id: &str, direction: &Direction) -> PathBuf {
        self.root
            .join(format!("{article_id}.{}.txt", direction.tag()))
    }

    pub fn title_path(&self, article_id: &str, direction: &Direction) -> PathBuf {
        self.root
            .join(format!("{article_id}.title.{}.txt", direction.tag()))
    }
}

impl TranslateBackend for FileBackend {
    fn id(&self) -> String {
        format!("file:{}", self.root.display())
    }

    fn translate_batch(&self, _direction: &Direction, _texts: &[String]) -> Result<Vec<String>> {
        Err(Error::backend(
            "file backend serves whole articles, not ad-hoc batches",
        ))
    }

    fn translate_article_file(
        &self,
        article: &Article,
        direction: &Direction,
    ) -> Option<Result<(Option<String>, Vec<String>)>> {
        Some(self.read_article(article, direction))
    }
}

impl FileBackend {
    fn read_article(
        &self,
        article: &Article,
        direction: &Direction,
    ) -> Result<(Option<String>, Vec<String>)> {
        let path = self.article_path(&article.id, direction);
        let content = std::fs::read_to_string(&path).map_err(|e| {
            Error::backend(format!(
                "article {}: cannot read {}: {e}",
                article.id,
                path.display()
            ))
        })?;
        let lines: Vec<String> = content.lines().map(str::to_string).collect();
        if lines.len() != article.sentences.len() {
            return Err(Error::backend(format!(
                "article {}: {} has {} lines but the article has {} sentences",
                article.id,
                path.display(),
                lines.len(),
                article.sentences.len()
            )));
        }
        let title = if article.title.trim().is_empty() {
            None
        } else {
            let tpath = self.title_path(&article.id, direction);
            if tpath.exists() {
                Some(
                    std::fs::read_to_string(&tpath)
                        .map_err(|e| Error::backend(format!("article {}: {e}", article.id)))?
                        .lines()
                        .next()
                        .unwrap_or("")
                        .to_string(),
                )
            } else {
                Some(String::new())
            }
        };
        Ok((title, lines))
    }
}

#[derive(Serialize)]
struct HttpRequest<'a> {
    src: &'a str,
    tgt: &'a str,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct HttpResponse {
    translations: Vec<String>,
}

/// JSON-over-HTTP backend: POST {"src","tgt","texts"} -> {"translations"}.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    retry_base: Duration,
}

impl HttpBackend {
    pub fn new(url: impl Into<String>, timeout_ms: u64, retry_base_ms: u64) -> Result<HttpBackend> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(timeout_ms))
            .build()
            .map_err(|e| Error::backend(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: url.into(),
            retry_base: Duration::from_millis(retry_base_ms),
        })
    }

    fn request_once(&self, direction: &Direction, texts: &[String]) -> Result<Vec<String>> {
        let response = self
            .client
            .post(&self.url)
            .json(&HttpRequest {
                src: direction.src.as_str(),
                tgt: direction.tgt.as_str(),
                texts,
            })
            .send()
            .map_err(|e| Error::backend(e.to_string()))?;
        if !response.status().is_success() {
            return Err(Error::backend(format!(
                "backend returned status {}",
                response.status()
            )));
        }
        let body: HttpResponse = response
            .json()
            .map_err(|e| Error::backend(format!("bad backend response: {e}")))?;
        if body.translations.len() != texts.len() {
            return Err(Error::backend(format!(
                "backend returned {} translations for {} texts",
                body.translations.len(),
                texts.len()
            )));
        }
        Ok(body.translations)
    }
}

impl TranslateBackend for HttpBackend {
    fn id(&self) -> String {
        format!("http:{}", self.url)
    }

    fn translate_batch(&self, direction: &Direction, texts: &[String]) -> Result<Vec<String>> {
        // Two retries with exponential backoff, then surface the error.
        let mut last_err = None;
        for attempt in 0..3 {
            if attempt > 0 {
                std::thread::sleep(self.retry_base * (1 << (attempt - 1)));
            }
            match self.request_once(direction, texts) {
                Ok(translations) => return Ok(translations),
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap())
    }
}

pub fn open_backend(cfg: &BackendConfig) -> Result<Box<dyn TranslateBackend>> {
    cfg.validate()?;
    Ok(match cfg.kind {
        BackendKind::File => Box::new(FileBackend::new(&cfg.path_or_url)),
        BackendKind::Http => Box::new(HttpBackend::new(
            &cfg.path_or_url,
            cfg.timeout_ms,
            cfg.retry_base_ms,
        )?),
    })
}

/// Translate cache-missing texts through the backend, at most `jobs` batches
/// in flight, writing each successful batch to the cache.
fn translate_misses(
    backend: &dyn TranslateBackend,
    direction: &Direction,
    cache: &TranslationCache,
    misses: Vec<(String, String)>, // (key, text)
    batch_size: usize,
    jobs: usize,
) -> Result<HashMap<String, String>> {
    let batches: Vec<&[(String, String)]> = misses.chunks(batch_size.max(1)).collect();
    let results: Mutex<HashMap<String, String>> = Mutex::new(HashMap::new());
    let next = AtomicUsize::new(0);
    let first_err: Mutex<Option<Error>> = Mutex::new(None);

    std::thread::scope(|scope| {
        for _ in 0..jobs.max(1).min(batches.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= batches.len() || first_err.lock().unwrap().is_some() {
                    return;
                }
                let batch = batches[i];
                let texts: Vec<String> = batch.iter().map(|(_, t)| t.clone()).collect();
                match backend.translate_batch(direction, &texts) {
                    Ok(translations) => {
                        let entries: Vec<(String, String)> = batch
                            .iter()
                            .map(|(k, _)| k.clone())
                            .zip(translations)
                            .collect();
                        if let Err(e) = cache.put_batch(&entries) {
                            *first_err.lock().unwrap() = Some(e);
                            return;
                        }
                        results.lock().unwrap().extend(entries);
                    }
                    Err(e) => {
                        *first_err.lock().unwrap() = Some(e);
                        return;
                    }
                }
            });
        }
    });

    if let Some(e) = first_err.into_inner().unwrap() {
        return Err(e);
    }
    Ok(results.into_inner().unwrap())
}

/// Translate one article, consulting the cache first and updating it after.
/// The title, when present, is translated as a single text unit.
pub fn translate_article(
    article: &Article,
    direction: &Direction,
    backend: &dyn TranslateBackend,
    cache: &TranslationCache,
    batch_size: usize,
    jobs: usize,
) -> Result<TranslatedDocument> {
    let backend_id = backend.id();
    let has_title = !article.title.trim().is_empty();

    let mut texts: Vec<&str> = Vec::new();
    if has_title {
        texts.push(article.title.as_str());
    }
    texts.extend(article.sentences.iter().map(|s| s.text.as_str()));
    let keys: Vec<String> = texts
        .iter()
        .map(|t| cache_key(t, direction, &backend_id))
        .collect();

    let mut found: HashMap<String, String> = HashMap::new();
    let mut misses: Vec<(String, String)> = Vec::new();
    for (key, text) in keys.iter().zip(&texts) {
        match cache.get(key) {
            Some(tr) => {
                found.insert(key.clone(), tr);
            }
            None => misses.push((key.clone(), text.to_string())),
        }
    }

    if !misses.is_empty() {
        // File backends serve the whole article at once.
        if let Some(result) = backend.translate_article_file(article, direction) {
            let (title_tr, sent_trs) = result?;
            let mut entries = Vec::new();
            let mut iter = keys.iter();
            if has_title {
                let key = iter.next().unwrap();
                entries.push((key.clone(), title_tr.unwrap_or_default()));
            }
            for (key, tr) in iter.zip(sent_trs) {
                entries.push((key.clone(), tr));
            }
            cache.put_batch(&entries)?;
            found.extend(entries);
        } else {
            let fetched = translate_misses(backend, direction, cache, misses, batch_size, jobs)
                .map_err(|e| Error::backend(format!("article {}: {e}", article.id)))?;
            found.extend(fetched);
        }
    }

    let mut iter = keys.iter();
    let title = if has_title {
        Some(found[iter.next().unwrap()].clone())
    } else {
        None
    };
    let sentences: Vec<String> = iter.map(|k| found[k].clone()).collect();
    debug_assert_eq!(sentences.len(), article.sentences.len());
    Ok(TranslatedDocument {
        source_article_id: article.id.clone(),
        direction: direction.clone(),
        title,
        sentences,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Sentence;
    use crate::rng::XorShift64;
    use std::collections::HashSet;

    fn dir(src: &str, tgt: &str) -> Direction {
        Direction::new(LangCode::new(src).unwrap(), LangCode::new(tgt).unwrap()).unwrap()
    }

    fn article(id: &str, title: &str, sentences: &[&str]) -> Article {
        Article {
            id: id.to_string(),
            lang: LangCode::new("nk").unwrap(),
            title: title.to_string(),
            sentences: sentences
                .iter()
                .enumerate()
                .map(|(i, t)| Sentence {
                    id: Article::sentence_id(id, i),
                    text: t.to_string(),
                    tokens: None,
                })
                .collect(),
            date: None,
        }
    }

    /// Mock backend that reverses the words of each text and counts requests.
    struct MockBackend {
        requests: AtomicUsize,
        fail: bool,
    }

    impl MockBackend {
        fn new() -> Self {
            MockBackend {
                requests: AtomicUsize::new(0),
                fail: false,
            }
        }
    }

    impl TranslateBackend for MockBackend {
        fn id(&self) -> String {
            "mock".to_string()
        }

        fn translate_batch(&self, _d: &Direction, texts: &[String]) -> Result<Vec<String>> {
            self.requests.fetch_add(1, Ordering::SeqCst);
            if self.fail {
                return Err(Error::backend("mock failure"));
            }
            Ok(texts
                .iter()
                .map(|t| t.split_whitespace().rev().collect::<Vec<_>>().join(" "))
                .collect())
        }
    }

    #[test]
    fn direction_requires_distinct_languages() {
        assert!(Direction::new(
            LangCode::new("nk").unwrap(),
            LangCode::new("nk").unwrap()
        )
        .is_err());
    }

    #[test]
    fn cache_key_deterministic_and_sensitive() {
        let d = dir("nk", "en");
        let k1 = cache_key("hello world", &d, "backend");
        assert_eq!(k1, cache_key("hello world", &d, "backend"));
        assert_ne!(k1, cache_key("hello world!", &d, "backend"));
        assert_ne!(k1, cache_key("hello world", &dir("en", "nk"), "backend"));
        assert_ne!(k1, cache_key("hello world", &d, "other"));
        assert_eq!(k1.len(), 32);
    }

    #[test]
    fn cache_key_no_collisions_at_scale() {
        let d = dir("nk", "en");
        let mut rng = XorShift64::new(99);
        let mut keys = HashSet::new();
        for i in 0..100_000 {
            let text = format!("sentence {i} {}", rng.next_u64());
            assert!(keys.insert(cache_key(&text, &d, "b")), "collision at {i}");
        }
    }

    #[test]
    fn file_backend_matching_lines() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("a1.nk-en.txt"), "one\ntwo\n").unwrap();
        let backend = FileBackend::new(tmp.path());
        let cache = TranslationCache::in_memory();
        let art = article("a1", "", &["하나", "둘"]);
        let doc = translate_article(&art, &dir("nk", "en"), &backend, &cache, 32, 1).unwrap();
        assert_eq!(doc.sentences, vec!["one", "two"]);
        assert_eq!(doc.title, None);
    }

    #[test]
    fn file_backend_length_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("a1.nk-en.txt"), "one\n").unwrap();
        let backend = FileBackend::new(tmp.path());
        let cache = TranslationCache::in_memory();
        let art = article("a1", "", &["하나", "둘"]);
        let err = translate_article(&art, &dir("nk", "en"), &backend, &cache, 32, 1).unwrap_err();
        assert!(err.to_string().contains("a1"), "{err}");
    }

    #[test]
    fn file_backend_title_file() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("a1.nk-en.txt"), "one\n").unwrap();
        std::fs::write(tmp.path().join("a1.title.nk-en.txt"), "the title\n").unwrap();
        let backend = FileBackend::new(tmp.path());
        let cache = TranslationCache::in_memory();
        let art = article("a1", "제목", &["하나"]);
        let doc = translate_article(&art, &dir("nk", "en"), &backend, &cache, 32, 1).unwrap();
        assert_eq!(doc.title.as_deref(), Some("the title"));
    }

    #[test]
    fn warm_cache_makes_zero_requests() {
        let backend = MockBackend::new();
        let cache = TranslationCache::in_memory();
        let art = article("a1", "title here", &["one two", "three four"]);
        let d = dir("nk", "en");
        let first = translate_article(&art, &d, &backend, &cache, 1, 2).unwrap();
        let after_first = backend.requests.load(Ordering::SeqCst);
        assert!(after_first > 0);
        let second = translate_article(&art, &d, &backend, &cache, 1, 2).unwrap();
        assert_eq!(backend.requests.load(Ordering::SeqCst), after_first);
        assert_eq!(first.sentences, second.sentences);
        assert_eq!(first.title, second.title);
    }

    #[test]
    fn failed_batch_leaves_cache_unmodified() {
        let backend = MockBackend {
            requests: AtomicUsize::new(0),
            fail: true,
        };
        let cache = TranslationCache::in_memory();
        let art = article("a1", "", &["one", "two"]);
        assert!(translate_article(&art, &dir("nk", "en"), &backend, &cache, 32, 1).is_err());
        assert!(cache.is_empty());
    }

    #[test]
    fn cache_log_roundtrip() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("cache.log");
        {
            let cache = TranslationCache::open(&path).unwrap();
            cache
                .put_batch(&[
                    ("k1".to_string(), "line with\ttab and\nnewline".to_string()),
                    ("k2".to_string(), "plain".to_string()),
                ])
                .unwrap();
        }
        let cache = TranslationCache::open(&path).unwrap();
        assert_eq!(cache.len(), 2);
        assert_eq!(cache.get("k1").as_deref(), Some("line with\ttab and\nnewline"));
        assert_eq!(cache.get("k2").as_deref(), Some("plain"));
    }
}

//! Synthetic comparable-corpus generator used by the integration tests: two
//! corpora with known article/sentence permutations, whose "translations"
//! are the true counterparts with token-dropout noise.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use pivotalign::corpus::{
    Article, AlignmentPair, AlignmentSet, Corpus, LangCode, Level, Mode, Sentence,
};
use pivotalign::rng::{derive_seed, XorShift64};
use pivotalign::translate::{Direction, TranslatedDocument};

pub const SRC_LANG: &str = "nk";
pub const TGT_LANG: &str = "en";

pub struct SynOptions {
    pub n_articles: usize,
    pub n_sentences: usize,
    pub dropout: f64,
    pub seed: u64,
}

pub struct Synthetic {
    pub src: Corpus,
    pub tgt: Corpus,
    /// src articles translated into the target language, keyed by article id
    pub src_trans: HashMap<String, TranslatedDocument>,
    /// tgt articles translated into the pivot (= source) language
    pub tgt_trans: HashMap<String, TranslatedDocument>,
    pub gold_articles: AlignmentSet,
    pub gold_sentences: AlignmentSet,
}

fn word(rng: &mut XorShift64) -> String {
    let len = 4 + rng.gen_index(3);
    (0..len)
        .map(|_| (b'a' + rng.gen_index(26) as u8) as char)
        .collect()
}

/// Deterministic token-level "translation" into the target language.
fn map_token(token: &str) -> String {
    let mut out: String = token.chars().rev().collect();
    out.push('x');
    out
}

fn drop_tokens(text: &str, p: f64, rng: &mut XorShift64) -> String {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let kept: Vec<&str> = tokens
        .iter()
        .filter(|_| !rng.gen_bool_p(p))
        .copied()
        .collect();
    if kept.is_empty() {
        tokens[0].to_string()
    } else {
        kept.join(" ")
    }
}

pub fn generate(opts: &SynOptions) -> Synthetic {
    let mut rng = XorShift64::new(opts.seed);
    let src_lang = LangCode::new(SRC_LANG).unwrap();
    let tgt_lang = LangCode::new(TGT_LANG).unwrap();

    // source articles with unique-ish random-word sentences
    let mut src_articles = Vec::new();
    for a in 0..opts.n_articles {
        let id = format!("s{a:03}");
        let sentences: Vec<Sentence> = (0..opts.n_sentences)
            .map(|i| {
                let text = (0..6).map(|_| word(&mut rng)).collect::<Vec<_>>().join(" ");
                Sentence {
                    id: Article::sentence_id(&id, i),
                    text,
                    tokens: None,
                }
            })
            .collect();
        let title = format!("{} {}", word(&mut rng), word(&mut rng));
        src_articles.push(Article {
            id,
            lang: src_lang.clone(),
            title,
            sentences,
            date: None,
        });
    }

    // target corpus: permuted articles, permuted sentences, mapped tokens
    let mut article_perm: Vec<usize> = (0..opts.n_articles).collect();
    rng.shuffle(&mut article_perm);
    let mut tgt_articles = Vec::new();
    let mut gold_article_pairs = Vec::new();
    let mut gold_sentence_pairs = Vec::new();
    let mut sentence_perms: HashMap<String, Vec<usize>> = HashMap::new();
    for (b, &a) in article_perm.iter().enumerate() {
        let src_art = &src_articles[a];
        let id = format!("t{b:03}");
        let mut perm: Vec<usize> = (0..opts.n_sentences).collect();
        rng.shuffle(&mut perm);
        let sentences: Vec<Sentence> = perm
            .iter()
            .enumerate()
            .map(|(j, &i)| Sentence {
                id: Article::sentence_id(&id, j),
                text: src_art.sentences[i]
                    .text
                    .split_whitespace()
                    .map(map_token)
                    .collect::<Vec<_>>()
                    .join(" "),
                tokens: None,
            })
            .collect();
        for (j, &i) in perm.iter().enumerate() {
            gold_sentence_pairs.push(AlignmentPair {
                src_id: Article::sentence_id(&src_art.id, i),
                tgt_id: Article::sentence_id(&id, j),
                score: 1.0,
            });
        }
        gold_article_pairs.push(AlignmentPair {
            src_id: src_art.id.clone(),
            tgt_id: id.clone(),
            score: 1.0,
        });
        let title = src_art
            .title
            .split_whitespace()
            .map(map_token)
            .collect::<Vec<_>>()
            .join(" ");
        sentence_perms.insert(id.clone(), perm);
        tgt_articles.push(Article {
            id,
            lang: tgt_lang.clone(),
            title,
            sentences,
            date: None,
        });
    }

    // translations: the true counterpart text with token dropout
    let mut src_trans = HashMap::new();
    for (b, &a) in article_perm.iter().enumerate() {
        let src_art = &src_articles[a];
        let tgt_art = &tgt_articles[b];
        let perm = &sentence_perms[&tgt_art.id];
        // inverse permutation: where did src sentence i land in the target
        let mut inv = vec![0; perm.len()];
        for (j, &i) in perm.iter().enumerate() {
            inv[i] = j;
        }
        let mut noise =
            XorShift64::new(derive_seed(opts.seed, &format!("src-noise-{}", src_art.id)));
        let sentences: Vec<String> = (0..opts.n_sentences)
            .map(|i| drop_tokens(&tgt_art.sentences[inv[i]].text, opts.dropout, &mut noise))
            .collect();
        src_trans.insert(
            src_art.id.clone(),
            TranslatedDocument {
                source_article_id: src_art.id.clone(),
                direction: Direction::new(src_lang.clone(), tgt_lang.clone()).unwrap(),
                title: Some(drop_tokens(&tgt_art.title, opts.dropout, &mut noise)),
                sentences,
            },
        );
    }
    let mut tgt_trans = HashMap::new();
    for (b, &a) in article_perm.iter().enumerate() {
        let src_art = &src_articles[a];
        let tgt_art = &tgt_articles[b];
        let perm = &sentence_perms[&tgt_art.id];
        let mut noise =
            XorShift64::new(derive_seed(opts.seed, &format!("tgt-noise-{}", tgt_art.id)));
        let sentences: Vec<String> = perm
            .iter()
            .map(|&i| drop_tokens(&src_art.sentences[i].text, opts.dropout, &mut noise))
            .collect();
        tgt_trans.insert(
            tgt_art.id.clone(),
            TranslatedDocument {
                source_article_id: tgt_art.id.clone(),
                direction: Direction::new(tgt_lang.clone(), src_lang.clone()).unwrap(),
                title: Some(drop_tokens(&src_art.title, opts.dropout, &mut noise)),
                sentences,
            },
        );
    }

    Synthetic {
        src: Corpus {
            lang: src_lang,
            articles: src_articles,
        },
        tgt: Corpus {
            lang: tgt_lang,
            articles: tgt_articles,
        },
        src_trans,
        tgt_trans,
        gold_articles: AlignmentSet::new(Level::Article, Mode::OneToOne, gold_article_pairs)
            .unwrap(),
        gold_sentences: AlignmentSet::new(Level::Sentence, Mode::OneToOne, gold_sentence_pairs)
            .unwrap(),
    }
}

/// Materialize the fixture on disk: corpora as JSONL, translations as a
/// file-backend directory, gold pairs as TSVs. Returns the backend directory.
#[allow(dead_code)]
pub fn write_fixture(dir: &Path, syn: &Synthetic) -> std::path::PathBuf {
    pivotalign::corpus::save_corpus(&syn.src, &dir.join("src.jsonl")).unwrap();
    pivotalign::corpus::save_corpus(&syn.tgt, &dir.join("tgt.jsonl")).unwrap();
    let backend = dir.join("backend");
    fs::create_dir_all(&backend).unwrap();
    for trans in [&syn.src_trans, &syn.tgt_trans] {
        for doc in trans.values() {
            let tag = doc.direction.tag();
            fs::write(
                backend.join(format!("{}.{}.txt", doc.source_article_id, tag)),
                doc.sentences.join("\n") + "\n",
            )
            .unwrap();
            if let Some(title) = &doc.title {
                fs::write(
                    backend.join(format!("{}.title.{}.txt", doc.source_article_id, tag)),
                    title.clone() + "\n",
                )
                .unwrap();
            }
        }
    }
    syn.gold_articles
        .write_tsv(&dir.join("gold_articles.tsv"), &[])
        .unwrap();
    syn.gold_sentences
        .write_tsv(&dir.join("gold_sentences.tsv"), &[])
        .unwrap();
    backend
}

//! Post- and user-level feature vectors and their fusion into clique vectors.
//!
//! Clique vector layout, fixed for a given pair of lexicons:
//!
//! | block      | width                   | content                               |
//! |------------|-------------------------|---------------------------------------|
//! | stylistic  | 15                      | per-category relative frequency       |
//! | affective  | number of affect classes| per-category relative frequency       |
//! | user       | 11                      | engagement ratios and length moments  |

mod lexicon;
mod regression;
mod standardize;
mod user;

pub use lexicon::{AffectiveLexicon, StylisticLexicon, PROPER_NOUNS, STYLISTIC_CATEGORIES};
pub use regression::{helpfulness_regression, HelpfulnessReport, RidgeFit};
pub use standardize::Standardizer;
pub use user::{moments, user_features, Moments, UserFeatureVector, USER_FEATURES};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_token, Corpus, Post, StatementCatalog, StatementInstance, User};
use crate::matrix::FeatureMatrix;
use crate::par::{self, Parallelism};

/// Lowercased maximal alphanumeric runs, and the number of `.`/`!`/`?`
/// delimited sentences that contain at least one token.
pub fn tokenize(text: &str) -> (Vec<String>, usize) {
    let t = Tokenized::new(text);
    (t.tokens, t.sentences)
}

/// Tokens plus the surface facts the proper-noun rule needs.
#[derive(Debug, Clone)]
struct Tokenized {
    tokens: Vec<String>,
    capitalized: Vec<bool>,
    sentence_initial: Vec<bool>,
    sentence_of: Vec<usize>,
    sentences: usize,
}

impl Tokenized {
    fn new(text: &str) -> Self {
        let mut out = Tokenized {
            tokens: Vec::new(),
            capitalized: Vec::new(),
            sentence_initial: Vec::new(),
            sentence_of: Vec::new(),
            sentences: 0,
        };
        let mut current = String::new();
        let mut first_upper = false;
        let mut in_sentence = false;
        let flush = |out: &mut Tokenized, current: &mut String, first_upper: bool, in_sentence: &mut bool| {
            if current.is_empty() {
                return;
            }
            out.tokens.push(current.to_lowercase());
            out.capitalized.push(first_upper);
            out.sentence_initial.push(!*in_sentence);
            out.sentence_of.push(out.sentences);
            *in_sentence = true;
            current.clear();
        };
        for ch in text.chars() {
            if ch.is_alphanumeric() {
                if current.is_empty() {
                    first_upper = ch.is_uppercase();
                }
                current.push(ch);
                continue;
            }
            flush(&mut out, &mut current, first_upper, &mut in_sentence);
            if matches!(ch, '.' | '!' | '?') && in_sentence {
                out.sentences += 1;
                in_sentence = false;
            }
        }
        flush(&mut out, &mut current, first_upper, &mut in_sentence);
        if in_sentence {
            out.sentences += 1;
        }
        out
    }
}

/// Raw category counts for one post. Vectors are `counts / length`.
#[derive(Debug, Clone, PartialEq)]
pub struct PostCounts {
    pub length: usize,
    pub sentences: usize,
    pub stylistic: Vec<u32>,
    pub affective: Vec<u32>,
}

impl PostCounts {
    pub fn stylistic_vector(&self) -> Vec<f64> {
        ratio(&self.stylistic, self.length)
    }

    pub fn affective_vector(&self) -> Vec<f64> {
        ratio(&self.affective, self.length)
    }
}

fn ratio(counts: &[u32], length: usize) -> Vec<f64> {
    if length == 0 {
        return vec![0.0; counts.len()];
    }
    counts.iter().map(|&c| f64::from(c) / length as f64).collect()
}

/// Names of every clique vector dimension, grouped by block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureLayout {
    pub stylistic: Vec<String>,
    pub affective: Vec<String>,
    pub user: Vec<String>,
}

impl FeatureLayout {
    pub fn dim(&self) -> usize {
        self.stylistic.len() + self.affective.len() + self.user.len()
    }

    /// Range of the post-language block (stylistic then affective).
    pub fn post_block(&self) -> std::ops::Range<usize> {
        0..self.stylistic.len() + self.affective.len()
    }

    pub fn user_block(&self) -> std::ops::Range<usize> {
        self.stylistic.len() + self.affective.len()..self.dim()
    }

    /// Flat list of qualified names (`sty:`, `aff:`, `user:` prefixes).
    pub fn names(&self) -> Vec<String> {
        let sty = self.stylistic.iter().map(|n| format!("sty:{n}"));
        let aff = self.affective.iter().map(|n| format!("aff:{n}"));
        let usr = self.user.iter().map(|n| format!("user:{n}"));
        sty.chain(aff).chain(usr).collect()
    }
}

/// Lexicon-driven extractor. The optional catalog feeds the proper-noun rule.
#[derive(Debug, Clone, Default)]
pub struct FeatureExtractor {
    pub stylistic: StylisticLexicon,
    pub affective: AffectiveLexicon,
    pub catalog: Option<StatementCatalog>,
}

impl FeatureExtractor {
    pub fn new(stylistic: StylisticLexicon, affective: AffectiveLexicon, catalog: Option<StatementCatalog>) -> Self {
        Self {
            stylistic,
            affective,
            catalog,
        }
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout {
            stylistic: STYLISTIC_CATEGORIES.iter().map(|s| s.to_string()).collect(),
            affective: self.affective.categories().to_vec(),
            user: USER_FEATURES.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn post_counts(&self, text: &str) -> PostCounts {
        let tok = Tokenized::new(text);
        let n = tok.tokens.len();
        let mut marks = vec![vec![false; n]; STYLISTIC_CATEGORIES.len()];
        self.stylistic.mark(&tok.tokens, &mut marks);

        // Proper nouns: lexicon entries, catalog alias occurrences, and
        // capitalized tokens that do not open a sentence (the pronoun "I"
        // excluded).
        if let Some(cat) = &self.catalog {
            let mut start = 0;
            while start < n {
                let s = tok.sentence_of[start];
                let end = (start..n).find(|&i| tok.sentence_of[i] != s).unwrap_or(n);
                let norm: Vec<String> = tok.tokens[start..end].iter().map(|t| normalize_token(t)).collect();
                for (k, m) in cat.mark_alias_tokens(&norm).into_iter().enumerate() {
                    if m {
                        marks[PROPER_NOUNS][start + k] = true;
                    }
                }
                start = end;
            }
        }
        for i in 0..n {
            if tok.capitalized[i] && !tok.sentence_initial[i] && tok.tokens[i] != "i" {
                marks[PROPER_NOUNS][i] = true;
            }
        }

        let stylistic = marks
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count() as u32)
            .collect();
        let mut affective = vec![0u32; self.affective.categories().len()];
        for t in &tok.tokens {
            for &c in self.affective.categories_of(t) {
                affective[c] += 1;
            }
        }
        PostCounts {
            length: n,
            sentences: tok.sentences,
            stylistic,
            affective,
        }
    }

    /// Per-post stylistic and affective relative frequencies. Empty posts map
    /// to zero vectors.
    pub fn extract_post_features(&self, text: &str) -> (Vec<f64>, Vec<f64>) {
        let c = self.post_counts(text);
        (c.stylistic_vector(), c.affective_vector())
    }

    /// Pooled per-user language vectors: summed category counts over summed
    /// post lengths.
    pub fn aggregate_user_language<'a>(&self, posts: impl IntoIterator<Item = &'a Post>) -> (Vec<f64>, Vec<f64>) {
        let mut sty = vec![0u64; STYLISTIC_CATEGORIES.len()];
        let mut aff = vec![0u64; self.affective.categories().len()];
        let mut len = 0u64;
        for p in posts {
            let c = self.post_counts(&p.text);
            len += c.length as u64;
            sty.iter_mut().zip(&c.stylistic).for_each(|(a, &b)| *a += u64::from(b));
            aff.iter_mut().zip(&c.affective).for_each(|(a, &b)| *a += u64::from(b));
        }
        if len == 0 {
            log::warn!("aggregate over posts with zero total length; returning zero vectors");
            return (vec![0.0; sty.len()], vec![0.0; aff.len()]);
        }
        let div = |v: Vec<u64>| v.into_iter().map(|c| c as f64 / len as f64).collect();
        (div(sty), div(aff))
    }
}

/// Clique vectors for a list of instances, one row per instance, in order.
/// Rows depend only on (post, user), so each post and each user is
/// featurized once.
pub fn build_clique_vectors(
    corpus: &Corpus,
    instances: &[StatementInstance],
    extractor: &FeatureExtractor,
    par: Parallelism,
) -> FeatureMatrix {
    let layout = extractor.layout();
    let posts: Vec<&Post> = corpus.posts().collect();
    let post_rows = par::map(par, &posts, |p| {
        let c = extractor.post_counts(&p.text);
        let mut v = c.stylistic_vector();
        v.extend(c.affective_vector());
        (p.id.as_str(), v)
    });
    let post_rows: BTreeMap<&str, Vec<f64>> = post_rows.into_iter().collect();

    let by_user = corpus.posts_by_user();
    let users: Vec<&User> = corpus.users().collect();
    let user_rows = par::map(par, &users, |u| {
        let posts = by_user.get(u.id.as_str()).map(Vec::as_slice).unwrap_or(&[]);
        (u.id.as_str(), user_features(extractor, u, posts).to_vec())
    });
    let user_rows: BTreeMap<&str, Vec<f64>> = user_rows.into_iter().collect();

    let mut m = FeatureMatrix::zeros(instances.len(), layout.dim());
    let split = layout.post_block().end;
    for (i, inst) in instances.iter().enumerate() {
        let row = m.row_mut(i);
        row[..split].copy_from_slice(&post_rows[inst.post_id.as_str()]);
        row[split..].copy_from_slice(&user_rows[inst.user_id.as_str()]);
    }
    m
}

/// Post-language block of a single post with the user block left at zero.
pub fn post_language_vector(extractor: &FeatureExtractor, text: &str) -> Vec<f64> {
    let c = extractor.post_counts(text);
    let mut v = c.stylistic_vector();
    v.extend(c.affective_vector());
    v.resize(extractor.layout().dim(), 0.0);
    v
}

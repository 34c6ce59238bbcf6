use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::Path;

use crate::tsv;
use crate::{Error, Result};

use super::tokenize;

/// Stylistic categories in vector-layout order.
pub const STYLISTIC_CATEGORIES: [&str; 15] = [
    "strong_modals",
    "weak_modals",
    "conditionals",
    "negation",
    "inferential_conj",
    "contrasting_conj",
    "following_conj",
    "definite_det",
    "first_person",
    "second_person",
    "third_person",
    "question_particles",
    "adjectives",
    "adverbs",
    "proper_nouns",
];

/// Index of the proper-noun category, which has extra matching rules.
pub const PROPER_NOUNS: usize = 14;

const DEFAULT_STYLISTIC: &str = include_str!("../../data/stylistic.tsv");
const DEFAULT_AFFECTIVE: &str = include_str!("../../data/affective.tsv");

/// Word lists for the fifteen stylistic categories. Entries may be
/// multi-word phrases (e.g. "in spite").
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StylisticLexicon {
    words: Vec<HashSet<String>>,
    phrases: Vec<Vec<Vec<String>>>,
}

impl Default for StylisticLexicon {
    fn default() -> Self {
        Self::parse(Path::new("<bundled stylistic lexicon>"), DEFAULT_STYLISTIC)
            .expect("bundled stylistic lexicon parses")
    }
}

impl StylisticLexicon {
    /// Parses `category<TAB>word1,word2,...`. Unknown category names are an
    /// error; categories missing from the file have no words.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut words = vec![HashSet::new(); STYLISTIC_CATEGORIES.len()];
        let mut phrases = vec![Vec::new(); STYLISTIC_CATEGORIES.len()];
        for (line, f) in tsv::parse_records(text) {
            let name = f[0].trim();
            let idx = STYLISTIC_CATEGORIES
                .iter()
                .position(|c| *c == name)
                .ok_or_else(|| Error::parse(path, line, format!("unknown stylistic category {name:?}")))?;
            let Some(list) = f.get(1) else { continue };
            for entry in list.split(',') {
                let toks = tokenize(entry).0;
                match toks.len() {
                    0 => {}
                    1 => {
                        words[idx].insert(toks.into_iter().next().unwrap_or_default());
                    }
                    _ => phrases[idx].push(toks),
                }
            }
        }
        Ok(Self { words, phrases })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn categories(&self) -> &'static [&'static str] {
        &STYLISTIC_CATEGORIES
    }

    /// Marks, per category, which token positions are covered by a word or a
    /// contiguous phrase of that category.
    pub(crate) fn mark(&self, tokens: &[String], marks: &mut [Vec<bool>]) {
        for (c, set) in self.words.iter().enumerate() {
            for (i, t) in tokens.iter().enumerate() {
                if set.contains(t) {
                    marks[c][i] = true;
                }
            }
        }
        for (c, list) in self.phrases.iter().enumerate() {
            for p in list {
                if p.len() > tokens.len() {
                    continue;
                }
                for start in 0..=tokens.len() - p.len() {
                    if tokens[start..start + p.len()] == p[..] {
                        marks[c][start..start + p.len()].iter_mut().for_each(|m| *m = true);
                    }
                }
            }
        }
    }

    /// All single words and phrase tokens of a category.
    pub fn words_of(&self, category: usize) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.words[category].iter().cloned().collect();
        for p in &self.phrases[category] {
            out.insert(p.join(" "));
        }
        out
    }
}

/// Surface word to affect categories. Category order is lexicographic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffectiveLexicon {
    categories: Vec<String>,
    entries: HashMap<String, Vec<usize>>,
}

impl Default for AffectiveLexicon {
    fn default() -> Self {
        Self::parse(Path::new("<bundled affective lexicon>"), DEFAULT_AFFECTIVE)
            .expect("bundled affective lexicon parses")
    }
}

impl AffectiveLexicon {
    /// Parses `word<TAB>cat1,cat2,...`.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut raw: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (line, f) in tsv::parse_records(text) {
            let toks = tokenize(&f[0]).0;
            if toks.len() != 1 {
                return Err(Error::parse(path, line, format!("affective entry {:?} must be one word", f[0])));
            }
            let cats: BTreeSet<String> = f
                .get(1)
                .map(|l| l.split(',').map(|c| c.trim().to_lowercase()).filter(|c| !c.is_empty()).collect())
                .unwrap_or_default();
            if cats.is_empty() {
                return Err(Error::parse(path, line, "affective entry without categories"));
            }
            raw.entry(toks[0].clone()).or_default().extend(cats);
        }
        let categories: Vec<String> = raw
            .values()
            .flatten()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let index: HashMap<&str, usize> = categories.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
        let entries = raw
            .iter()
            .map(|(w, cs)| (w.clone(), cs.iter().map(|c| index[c.as_str()]).collect()))
            .collect();
        Ok(Self { categories, entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn categories_of(&self, word: &str) -> &[usize] {
        self.entries.get(word).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Words listing the given category, sorted.
    pub fn words_in(&self, category: &str) -> Vec<String> {
        let Some(idx) = self.categories.iter().position(|c| c == category) else {
            return Vec::new();
        };
        let mut out: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, cs)| cs.contains(&idx))
            .map(|(w, _)| w.clone())
            .collect();
        out.sort();
        out
    }

    pub fn words(&self) -> Vec<String> {
        let mut out: Vec<String> = self.entries.keys().cloned().collect();
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicons_load() {
        let s = StylisticLexicon::default();
        assert!(s.words_of(2).contains("if"));
        assert!(s.words_of(5).contains("in spite"));
        assert!(s.words_of(PROPER_NOUNS).contains("depo provera"));
        let a = AffectiveLexicon::default();
        assert_eq!(a.categories().len(), 40);
        assert_eq!(a.categories()[0], "affection");
        let hopeless: Vec<&str> = a.categories_of("hopeless").iter().map(|&i| a.categories()[i].as_str()).collect();
        assert_eq!(hopeless, ["depression", "downheartedness", "misery"]);
    }

    #[test]
    fn unknown_category_rejected() {
        assert!(StylisticLexicon::parse(Path::new("x"), "modals\tcan\n").is_err());
        assert!(AffectiveLexicon::parse(Path::new("x"), "two words\tjoy\n").is_err());
        assert!(AffectiveLexicon::parse(Path::new("x"), "joy\t\n").is_err());
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::tsv;
use crate::{Error, Result};

/// Matcher normalization of a single lowercase token: one trailing `s` is
/// stripped from tokens of four or more characters.
pub fn normalize_token(token: &str) -> String {
    let lower = token.to_lowercase();
    if lower.chars().count() >= 4 && lower.ends_with('s') {
        lower[..lower.len() - 1].to_string()
    } else {
        lower
    }
}

/// Lowercase, split on any non-alphanumeric character, normalize each token.
pub fn normalize_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(normalize_token)
        .collect()
}

/// Normalized tokens per sentence (`.`, `!`, `?` terminate sentences).
/// Sentences without tokens are dropped.
pub fn split_sentences(text: &str) -> Vec<Vec<String>> {
    text.split(['.', '!', '?'])
        .map(normalize_tokens)
        .filter(|s| !s.is_empty())
        .collect()
}

/// True when `needle` occurs in `haystack` as an ordered (possibly gapped)
/// token subsequence.
fn is_subsequence(haystack: &[String], needle: &[String]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogEntry {
    /// Normalized canonical form, tokens joined by single spaces.
    pub canonical: String,
    /// Normalized token sequences, the canonical form first.
    pub aliases: Vec<Vec<String>>,
}

impl CatalogEntry {
    fn occurs_in(&self, sentences: &[Vec<String>]) -> bool {
        self.aliases
            .iter()
            .any(|a| sentences.iter().any(|s| is_subsequence(s, a)))
    }
}

/// Drug and effect vocabularies with aliases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatementCatalog {
    drugs: Vec<CatalogEntry>,
    effects: Vec<CatalogEntry>,
}

impl StatementCatalog {
    pub fn drugs(&self) -> &[CatalogEntry] {
        &self.drugs
    }

    pub fn effects(&self) -> &[CatalogEntry] {
        &self.effects
    }

    pub fn is_empty(&self) -> bool {
        self.drugs.is_empty() && self.effects.is_empty()
    }

    /// Parses `kind<TAB>canonical<TAB>alias1,alias2,...` lines.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut drugs: BTreeMap<String, CatalogEntry> = BTreeMap::new();
        let mut effects: BTreeMap<String, CatalogEntry> = BTreeMap::new();
        // alias -> canonical, per kind
        let mut owner: [BTreeMap<Vec<String>, String>; 2] = Default::default();
        for (line, f) in tsv::parse_records(text) {
            if f.len() < 2 {
                return Err(Error::parse(path, line, "expected kind<TAB>canonical<TAB>aliases"));
            }
            let (slot, table) = match f[0].trim() {
                "drug" => (0, &mut drugs),
                "effect" => (1, &mut effects),
                other => return Err(Error::parse(path, line, format!("unknown kind {other:?}"))),
            };
            let canon_tokens = normalize_tokens(&f[1]);
            if canon_tokens.is_empty() {
                return Err(Error::parse(path, line, "empty canonical form"));
            }
            let canonical = canon_tokens.join(" ");
            let mut aliases = vec![canon_tokens];
            if let Some(list) = f.get(2) {
                for a in list.split(',') {
                    let toks = normalize_tokens(a);
                    if !toks.is_empty() && !aliases.contains(&toks) {
                        aliases.push(toks);
                    }
                }
            }
            for a in &aliases {
                match owner[slot].get(a) {
                    Some(c) if *c != canonical => {
                        return Err(Error::parse(
                            path,
                            line,
                            format!("alias {:?} already belongs to {c:?}", a.join(" ")),
                        ))
                    }
                    _ => {
                        owner[slot].insert(a.clone(), canonical.clone());
                    }
                }
            }
            let entry = table.entry(canonical.clone()).or_insert_with(|| CatalogEntry {
                canonical,
                aliases: Vec::new(),
            });
            for a in aliases {
                if !entry.aliases.contains(&a) {
                    entry.aliases.push(a);
                }
            }
        }
        Ok(Self {
            drugs: drugs.into_values().collect(),
            effects: effects.into_values().collect(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (kind, entries) in [("drug", &self.drugs), ("effect", &self.effects)] {
            for e in entries {
                let aliases: Vec<String> = e.aliases.iter().skip(1).map(|a| a.join(" ")).collect();
                out.push_str(&format!("{kind}\t{}\t{}\n", e.canonical, aliases.join(",")));
            }
        }
        out
    }

    /// Canonical drugs with at least one alias present, sorted.
    pub fn drugs_in(&self, sentences: &[Vec<String>]) -> Vec<String> {
        self.drugs
            .iter()
            .filter(|e| e.occurs_in(sentences))
            .map(|e| e.canonical.clone())
            .collect()
    }

    pub fn effects_in(&self, sentences: &[Vec<String>]) -> Vec<String> {
        self.effects
            .iter()
            .filter(|e| e.occurs_in(sentences))
            .map(|e| e.canonical.clone())
            .collect()
    }

    /// Marks tokens of one sentence (already matcher-normalized) that belong to
    /// a contiguous occurrence of any drug or effect alias.
    pub fn mark_alias_tokens(&self, sentence: &[String]) -> Vec<bool> {
        let mut marks = vec![false; sentence.len()];
        for entry in self.drugs.iter().chain(&self.effects) {
            for alias in &entry.aliases {
                let n = alias.len();
                if n == 0 || n > sentence.len() {
                    continue;
                }
                for start in 0..=sentence.len() - n {
                    if sentence[start..start + n] == alias[..] {
                        marks[start..start + n].iter_mut().for_each(|m| *m = true);
                    }
                }
            }
        }
        marks
    }
}

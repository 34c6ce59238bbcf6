//! Synthetic communities with planted statement credibility, user trust and
//! language objectivity.
//!
//! Each user belongs to a trustworthy or an untrustworthy class with
//! truth-telling rate `t_high` or `t_low`. Every post asserts one statement,
//! drawn from the credible statements with probability equal to the author's
//! rate and from the non-credible ones otherwise. Post text is a bag of
//! tokens: objective lexicon words (definite determiners, inferential
//! conjunctions, confidence words), subjective lexicon words (strong modals,
//! conditionals, negative affect), class-neutral lexicon words, and filler
//! tokens that appear in no lexicon.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{statement_id, Corpus, Gender, LabelPartition, Post, StatementCatalog, StatementInstance, User};
use crate::evaluation::Tier;
use crate::{seed, tsv, Error, Result};

const OBJECTIVE: &[&str] = &[
    "the", "this", "that", "these", "those", "therefore", "thus", "furthermore", "certain", "clearly", "confident",
    "definitely", "sure",
];
const SUBJECTIVE: &[&str] = &[
    "might", "could", "can", "would", "may", "if", "awful", "horrible", "terrible", "miserable", "depressed", "hopeless",
    "sad", "panic", "worried", "anxious", "suffering",
];
const NEUTRAL: &[&str] = &[
    "i", "we", "my", "me", "you", "your", "he", "she", "it", "not", "no", "never", "should", "will", "need", "but",
    "however", "yet", "though", "until", "why", "what", "when", "about", "much", "long", "calm", "love", "surprised",
    "relieved",
];
const FILLER_VOCAB: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub users: usize,
    pub statements: usize,
    pub drugs: usize,
    pub posts_min: usize,
    pub posts_max: usize,
    pub trustworthy_fraction: f64,
    pub t_high: f64,
    pub t_low: f64,
    pub credible_fraction: f64,
    pub labeled_fraction: f64,
    pub tokens_min: usize,
    pub tokens_max: usize,
    /// Per-token rates of objective / subjective words for trustworthy users.
    pub trusted_objective_rate: f64,
    pub trusted_subjective_rate: f64,
    /// Per-token rates for untrustworthy users.
    pub untrusted_objective_rate: f64,
    pub untrusted_subjective_rate: f64,
    /// Per-token rate of class-neutral lexicon words (all users).
    pub neutral_rate: f64,
    /// Also emit expert frequency tiers for the labeled statements.
    pub tiers: bool,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            users: 200,
            statements: 300,
            drugs: 10,
            posts_min: 5,
            posts_max: 25,
            trustworthy_fraction: 0.3,
            t_high: 0.9,
            t_low: 0.2,
            credible_fraction: 0.5,
            labeled_fraction: 0.3,
            tokens_min: 15,
            tokens_max: 35,
            trusted_objective_rate: 0.12,
            trusted_subjective_rate: 0.04,
            untrusted_objective_rate: 0.04,
            untrusted_subjective_rate: 0.12,
            neutral_rate: 0.10,
            tiers: true,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        if self.users == 0 || self.statements == 0 || self.drugs == 0 {
            return bad("users, statements and drugs must be >= 1".into());
        }
        if self.posts_min == 0 || self.posts_max < self.posts_min {
            return bad(format!("posts per user range {}..={} is infeasible", self.posts_min, self.posts_max));
        }
        if self.tokens_max < self.tokens_min {
            return bad("tokens_max < tokens_min".into());
        }
        for (name, v) in [
            ("trustworthy_fraction", self.trustworthy_fraction),
            ("t_high", self.t_high),
            ("t_low", self.t_low),
            ("credible_fraction", self.credible_fraction),
            ("labeled_fraction", self.labeled_fraction),
            ("trusted_objective_rate", self.trusted_objective_rate),
            ("trusted_subjective_rate", self.trusted_subjective_rate),
            ("untrusted_objective_rate", self.untrusted_objective_rate),
            ("untrusted_subjective_rate", self.untrusted_subjective_rate),
            ("neutral_rate", self.neutral_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must be in [0, 1], got {v}"));
            }
        }
        if self.t_high <= self.t_low {
            return bad(format!("t_high ({}) must exceed t_low ({})", self.t_high, self.t_low));
        }
        for (o, s) in [
            (self.trusted_objective_rate, self.trusted_subjective_rate),
            (self.untrusted_objective_rate, self.untrusted_subjective_rate),
        ] {
            if o + s + self.neutral_rate > 1.0 {
                return bad("token rates sum above 1".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthWorld {
    pub corpus: Corpus,
    pub catalog: StatementCatalog,
    pub instances: Vec<StatementInstance>,
    pub ground_truth: BTreeMap<String, bool>,
    /// Planted truth-telling rate per user.
    pub planted_trust: BTreeMap<String, f64>,
    pub tiers: Option<BTreeMap<String, Tier>>,
}

impl SynthWorld {
    pub fn trustworthy(&self, t_high: f64) -> BTreeSet<String> {
        self.planted_trust
            .iter()
            .filter(|(_, &r)| r == t_high)
            .map(|(u, _)| u.clone())
            .collect()
    }

    /// Writes the corpus files plus `catalog.tsv`, `ground_truth.tsv`,
    /// `planted_trust.tsv` and, when present, `tiers.tsv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        self.corpus.write(dir)?;
        tsv::write_file(&dir.join("catalog.tsv"), &self.catalog.render())?;
        let gt: String = self.ground_truth.iter().map(|(id, y)| format!("{id}\t{y}\n")).collect();
        tsv::write_file(&dir.join("ground_truth.tsv"), &gt)?;
        let pt: String = self.planted_trust.iter().map(|(u, r)| format!("{u}\t{r}\n")).collect();
        tsv::write_file(&dir.join("planted_trust.tsv"), &pt)?;
        if let Some(tiers) = &self.tiers {
            let t: String = tiers
                .iter()
                .map(|(id, t)| {
                    let name = match t {
                        Tier::Common => "common",
                        Tier::LessCommon => "less_common",
                        Tier::Rare => "rare",
                        Tier::Unobserved => "unobserved",
                    };
                    format!("{id}\t{name}\n")
                })
                .collect();
            tsv::write_file(&dir.join("tiers.tsv"), &t)?;
        }
        Ok(())
    }
}

fn exact_subset(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut flags: Vec<bool> = (0..n).map(|i| i < k).collect();
    flags.shuffle(rng);
    flags
}

fn body_token(rng: &mut ChaCha8Rng, objective: f64, subjective: f64, neutral: f64) -> String {
    let u: f64 = rng.random();
    let pick = |rng: &mut ChaCha8Rng, pool: &[&str]| pool.choose(rng).copied().unwrap_or("the").to_string();
    if u < objective {
        pick(rng, OBJECTIVE)
    } else if u < objective + subjective {
        pick(rng, SUBJECTIVE)
    } else if u < objective + subjective + neutral {
        pick(rng, NEUTRAL)
    } else {
        format!("f{:03}", rng.random_range(0..FILLER_VOCAB))
    }
}

pub fn generate(config: &SynthConfig) -> Result<SynthWorld> {
    config.validate()?;
    let drugs = config.drugs.min(config.statements);
    let effects = config.statements.div_ceil(drugs);
    let mut catalog_text = String::new();
    for d in 0..drugs {
        catalog_text.push_str(&format!("drug\tdrug{d:02}\t\n"));
    }
    for e in 0..effects {
        catalog_text.push_str(&format!("effect\teffect{e:02}\t\n"));
    }
    let catalog = StatementCatalog::parse(Path::new("<synth catalog>"), &catalog_text)?;
    let pairs: Vec<(String, String)> = (0..config.statements)
        .map(|i| (format!("drug{:02}", i % drugs), format!("effect{:02}", i / drugs)))
        .collect();

    let mut rng = seed::rng(config.seed, "synth-statements", 0);
    let credible = exact_subset(pairs.len(), config.credible_fraction, &mut rng);
    let ground_truth: BTreeMap<String, bool> = pairs
        .iter()
        .zip(&credible)
        .map(|((d, e), &c)| (statement_id(d, e), c))
        .collect();
    let pos: Vec<usize> = (0..pairs.len()).filter(|&i| credible[i]).collect();
    let neg: Vec<usize> = (0..pairs.len()).filter(|&i| !credible[i]).collect();

    // Labeled subset, stratified by class.
    let mut labeled = BTreeMap::new();
    for class in [&pos, &neg] {
        let flags = exact_subset(class.len(), config.labeled_fraction, &mut rng);
        for (&i, f) in class.iter().zip(flags) {
            if f {
                let id = statement_id(&pairs[i].0, &pairs[i].1);
                labeled.insert(id.clone(), ground_truth[&id]);
            }
        }
    }
    let tiers = config.tiers.then(|| {
        let mut order = pos.clone();
        order.shuffle(&mut rng);
        let n = order.len() as f64;
        let (c, l) = ((0.60 * n).round() as usize, (0.25 * n).round() as usize);
        let mut t = BTreeMap::new();
        for (k, &i) in order.iter().enumerate() {
            let tier = if k < c {
                Tier::Common
            } else if k < c + l {
                Tier::LessCommon
            } else {
                Tier::Rare
            };
            t.insert(statement_id(&pairs[i].0, &pairs[i].1), tier);
        }
        for &i in &neg {
            t.insert(statement_id(&pairs[i].0, &pairs[i].1), Tier::Unobserved);
        }
        // The expert only grades the statements it labels.
        t.retain(|id, _| labeled.contains_key(id));
        t
    });

    let mut urng = seed::rng(config.seed, "synth-users", 0);
    let trusted = exact_subset(config.users, config.trustworthy_fraction, &mut urng);
    let mut prng = seed::rng(config.seed, "synth-posts", 0);
    let mut users = Vec::new();
    let mut posts = Vec::new();
    let mut planted_trust = BTreeMap::new();
    for (k, &good) in trusted.iter().enumerate() {
        let id = format!("u{k:03}");
        let rate = if good { config.t_high } else { config.t_low };
        planted_trust.insert(id.clone(), rate);
        let n_posts = urng.random_range(config.posts_min..=config.posts_max);
        let mut u = User::new(&id);
        u.gender = [Gender::Female, Gender::Male, Gender::Unknown][urng.random_range(0..3)];
        u.age = Some(urng.random_range(18..80));
        u.num_posts = n_posts as u64;
        u.num_questions = urng.random_range(0..=n_posts as u64 / 2);
        u.num_replies = n_posts as u64 - u.num_questions;
        let thank_rate = if good { 0.5 } else { 0.3 };
        u.num_thanks = (0..3 * n_posts).filter(|_| urng.random::<f64>() < thank_rate).count() as u64;
        users.push(u);

        let (obj, subj) = if good {
            (config.trusted_objective_rate, config.trusted_subjective_rate)
        } else {
            (config.untrusted_objective_rate, config.untrusted_subjective_rate)
        };
        for j in 0..n_posts {
            let agree = prng.random::<f64>() < rate;
            let pool = match (agree, pos.is_empty(), neg.is_empty()) {
                (true, false, _) | (false, _, true) => &pos,
                _ => &neg,
            };
            let s = *pool.choose(&mut prng).ok_or_else(|| Error::Invalid("no statements to assert".into()))?;
            let len = prng.random_range(config.tokens_min..=config.tokens_max);
            let mut body: Vec<String> = (0..len).map(|_| body_token(&mut prng, obj, subj, config.neutral_rate)).collect();
            let at = prng.random_range(0..=body.len());
            body.insert(at, pairs[s].1.clone());
            body.insert(at, pairs[s].0.clone());
            let mut text = String::new();
            let mut since = 0;
            let mut next_break = prng.random_range(5..=12);
            for (i, t) in body.iter().enumerate() {
                if i > 0 {
                    text.push(' ');
                }
                text.push_str(t);
                since += 1;
                // Keep the drug and effect tokens in one sentence.
                if since >= next_break && i != at {
                    text.push('.');
                    since = 0;
                    next_break = prng.random_range(5..=12);
                }
            }
            text.push('.');
            posts.push(Post::new(format!("{id}-p{j:02}"), &id, text));
        }
    }

    let (mut corpus, _) = Corpus::from_parts(users, posts, LabelPartition::new(labeled))?;
    let instances = corpus.match_statements(&catalog)?;
    Ok(SynthWorld {
        corpus,
        catalog,
        instances,
        ground_truth,
        planted_trust,
        tiers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            users: 40,
            statements: 60,
            drugs: 6,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn one_instance_per_post() {
        let w = generate(&small()).unwrap();
        assert_eq!(w.instances.len(), w.corpus.num_posts());
        assert_eq!(w.corpus.labels().len(), 18);
        assert_eq!(w.planted_trust.values().filter(|&&r| r == 0.9).count(), 12);
    }

    #[test]
    fn degenerate_rates() {
        let w = generate(&SynthConfig {
            t_high: 1.0,
            t_low: 0.0,
            labeled_fraction: 1.0,
            ..small()
        })
        .unwrap();
        assert_eq!(w.corpus.labels().len(), 60);
        for i in &w.instances {
            let truth = w.ground_truth[&i.statement_id];
            assert_eq!(truth, w.planted_trust[&i.user_id] == 1.0);
        }
    }

    #[test]
    fn infeasible_rejected() {
        assert!(generate(&SynthConfig { posts_min: 0, ..small() }).is_err());
        assert!(generate(&SynthConfig { t_high: 0.1, t_low: 0.2, ..small() }).is_err());
    }
}

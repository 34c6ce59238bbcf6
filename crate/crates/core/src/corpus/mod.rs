//! The observed world: users, posts, statements and their matched instances.

mod catalog;

pub use catalog::{normalize_token, normalize_tokens, split_sentences, CatalogEntry, StatementCatalog};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::tsv;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Female,
    Male,
    #[default]
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct User {
    pub id: String,
    #[serde(default)]
    pub gender: Gender,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<u32>,
    #[serde(default)]
    pub num_questions: u64,
    #[serde(default)]
    pub num_replies: u64,
    #[serde(default)]
    pub num_posts: u64,
    #[serde(default)]
    pub num_thanks: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member_type: Option<String>,
}

impl User {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            gender: Gender::Unknown,
            age: None,
            num_questions: 0,
            num_replies: 0,
            num_posts: 0,
            num_thanks: 0,
            member_type: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Post {
    pub id: String,
    pub user_id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thread_id: Option<String>,
}

impl Post {
    pub fn new(id: impl Into<String>, user_id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            user_id: user_id.into(),
            text: text.into(),
            thread_id: None,
        }
    }
}

/// A (drug, effect) assertion.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Statement {
    pub id: String,
    pub drug: String,
    pub effect: String,
}

impl Statement {
    pub fn new(drug: &str, effect: &str) -> Self {
        Self {
            id: statement_id(drug, effect),
            drug: drug.to_string(),
            effect: effect.to_string(),
        }
    }
}

/// Canonical statement identifier for a normalized (drug, effect) pair.
pub fn statement_id(drug: &str, effect: &str) -> String {
    format!("{drug}:{effect}")
}

/// One occurrence of a statement in a post. Field order gives the canonical
/// (statement, post, user) sort order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StatementInstance {
    pub statement_id: String,
    pub post_id: String,
    pub user_id: String,
}

/// Expert labels; statements without a key are unknown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelPartition {
    pub labeled: BTreeMap<String, bool>,
}

impl LabelPartition {
    pub fn new(labeled: BTreeMap<String, bool>) -> Self {
        Self { labeled }
    }

    pub fn get(&self, statement_id: &str) -> Option<bool> {
        self.labeled.get(statement_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labeled.is_empty()
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let mut labeled = BTreeMap::new();
        for (line, f) in tsv::parse_records(text) {
            if f.len() < 2 {
                return Err(Error::parse(path, line, "expected statement_id<TAB>true|false"));
            }
            let value = parse_bool(f[1].trim())
                .ok_or_else(|| Error::parse(path, line, format!("bad label {:?}", f[1])))?;
            let id = f[0].trim().to_string();
            if labeled.insert(id.clone(), value).is_some() {
                return Err(Error::DuplicateId { kind: "label", id });
            }
        }
        Ok(Self { labeled })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (id, v) in &self.labeled {
            let _ = writeln!(out, "{id}\t{v}");
        }
        out
    }
}

pub(crate) fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "1" => Some(true),
        "false" | "0" => Some(false),
        _ => None,
    }
}

/// Counts and non-fatal findings from a load.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub users: usize,
    pub posts: usize,
    pub labels: usize,
    pub warnings: Vec<String>,
}

/// Validated corpus. Users, posts and statements are keyed by id, so iteration
/// order never depends on input row order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    users: BTreeMap<String, User>,
    posts: BTreeMap<String, Post>,
    statements: BTreeMap<String, Statement>,
    instances: BTreeSet<StatementInstance>,
    labels: LabelPartition,
}

impl Corpus {
    /// Validates and assembles a corpus from parsed records.
    pub fn from_parts(users: Vec<User>, posts: Vec<Post>, labels: LabelPartition) -> Result<(Self, LoadReport)> {
        let mut report = LoadReport {
            users: users.len(),
            posts: posts.len(),
            labels: labels.len(),
            warnings: Vec::new(),
        };
        let mut user_map = BTreeMap::new();
        for u in users {
            if u.id.is_empty() {
                return Err(Error::Invalid("user with empty id".into()));
            }
            if user_map.contains_key(&u.id) {
                return Err(Error::DuplicateId { kind: "user", id: u.id });
            }
            user_map.insert(u.id.clone(), u);
        }
        let mut post_map = BTreeMap::new();
        for p in posts {
            if post_map.contains_key(&p.id) {
                return Err(Error::DuplicateId { kind: "post", id: p.id });
            }
            if !user_map.contains_key(&p.user_id) {
                return Err(Error::DanglingReference {
                    kind: "user",
                    id: p.user_id,
                });
            }
            if p.text.trim().is_empty() {
                return Err(Error::Invalid(format!("post {} has empty text", p.id)));
            }
            post_map.insert(p.id.clone(), p);
        }
        if labels.is_empty() {
            let msg = "labels file is empty; running in pure-prediction mode".to_string();
            log::warn!("{msg}");
            report.warnings.push(msg);
        }
        Ok((
            Self {
                users: user_map,
                posts: post_map,
                statements: BTreeMap::new(),
                instances: BTreeSet::new(),
                labels,
            },
            report,
        ))
    }

    pub fn users(&self) -> impl Iterator<Item = &User> {
        self.users.values()
    }

    pub fn posts(&self) -> impl Iterator<Item = &Post> {
        self.posts.values()
    }

    pub fn statements(&self) -> impl Iterator<Item = &Statement> {
        self.statements.values()
    }

    pub fn instances(&self) -> impl Iterator<Item = &StatementInstance> {
        self.instances.iter()
    }

    pub fn user(&self, id: &str) -> Option<&User> {
        self.users.get(id)
    }

    pub fn post(&self, id: &str) -> Option<&Post> {
        self.posts.get(id)
    }

    pub fn statement(&self, id: &str) -> Option<&Statement> {
        self.statements.get(id)
    }

    pub fn labels(&self) -> &LabelPartition {
        &self.labels
    }

    pub fn set_labels(&mut self, labels: LabelPartition) {
        self.labels = labels;
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_posts(&self) -> usize {
        self.posts.len()
    }

    pub fn num_statements(&self) -> usize {
        self.statements.len()
    }

    pub fn num_instances(&self) -> usize {
        self.instances.len()
    }

    /// Posts grouped by author, each list sorted by post id. Users without
    /// posts map to an empty list.
    pub fn posts_by_user(&self) -> BTreeMap<&str, Vec<&Post>> {
        let mut map: BTreeMap<&str, Vec<&Post>> = self.users.keys().map(|k| (k.as_str(), Vec::new())).collect();
        for p in self.posts.values() {
            map.entry(p.user_id.as_str()).or_default().push(p);
        }
        map
    }

    /// Registers a statement; returns false if one with the same id already exists.
    pub fn add_statement(&mut self, statement: Statement) -> bool {
        if self.statements.contains_key(&statement.id) {
            return false;
        }
        self.statements.insert(statement.id.clone(), statement);
        true
    }

    /// Adds an instance after checking every reference. Duplicate triples are
    /// collapsed; returns whether the instance was new.
    pub fn add_instance(&mut self, instance: StatementInstance) -> Result<bool> {
        if !self.statements.contains_key(&instance.statement_id) {
            return Err(Error::DanglingReference {
                kind: "statement",
                id: instance.statement_id,
            });
        }
        let post = self.posts.get(&instance.post_id).ok_or_else(|| Error::DanglingReference {
            kind: "post",
            id: instance.post_id.clone(),
        })?;
        if !self.users.contains_key(&instance.user_id) {
            return Err(Error::DanglingReference {
                kind: "user",
                id: instance.user_id,
            });
        }
        if post.user_id != instance.user_id {
            return Err(Error::Invalid(format!(
                "instance names user {} but post {} is by {}",
                instance.user_id, instance.post_id, post.user_id
            )));
        }
        Ok(self.instances.insert(instance))
    }

    /// Matches catalog drug/effect aliases in every post, registering new
    /// statements and instances. Output is sorted by post id, then statement id.
    pub fn match_statements(&mut self, catalog: &StatementCatalog) -> Result<Vec<StatementInstance>> {
        if catalog.drugs().is_empty() || catalog.effects().is_empty() {
            return Err(Error::Invalid("catalog needs at least one drug and one effect".into()));
        }
        let mut found = Vec::new();
        for post in self.posts.values() {
            let sentences = split_sentences(&post.text);
            let drugs = catalog.drugs_in(&sentences);
            let effects = catalog.effects_in(&sentences);
            for d in &drugs {
                for e in &effects {
                    found.push((post.id.clone(), post.user_id.clone(), Statement::new(d, e)));
                }
            }
        }
        let mut out = Vec::with_capacity(found.len());
        for (post_id, user_id, st) in found {
            let inst = StatementInstance {
                statement_id: st.id.clone(),
                post_id,
                user_id,
            };
            self.add_statement(st);
            self.add_instance(inst.clone())?;
            out.push(inst);
        }
        out.sort_by(|a, b| (&a.post_id, &a.statement_id).cmp(&(&b.post_id, &b.statement_id)));
        out.dedup();
        Ok(out)
    }

    /// Writes `users.jsonl`, `posts.jsonl` and `labels.tsv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        tsv::write_file(&dir.join("users.jsonl"), &render_jsonl(self.users.values())?)?;
        tsv::write_file(&dir.join("posts.jsonl"), &render_jsonl(self.posts.values())?)?;
        tsv::write_file(&dir.join("labels.tsv"), &self.labels.render())
    }
}

fn render_jsonl<'a, T: Serialize + 'a>(items: impl Iterator<Item = &'a T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    Ok(out)
}

fn parse_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        out.push(item);
    }
    Ok(out)
}

/// Loads and validates a corpus from its three input files.
pub fn load_corpus(users_path: &Path, posts_path: &Path, labels_path: &Path) -> Result<(Corpus, LoadReport)> {
    let users: Vec<User> = parse_jsonl(users_path)?;
    let posts: Vec<Post> = parse_jsonl(posts_path)?;
    let labels = LabelPartition::load(labels_path)?;
    let (corpus, report) = Corpus::from_parts(users, posts, labels)?;
    log::info!(
        "loaded {} users, {} posts, {} labels",
        report.users,
        report.posts,
        report.labels
    );
    Ok((corpus, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn small_files(dir: &Path, posts: &str, labels: &str) -> Result<(Corpus, LoadReport)> {
        let u = write(
            dir,
            "users.jsonl",
            "{\"id\":\"u1\",\"gender\":\"female\",\"num_posts\":2}\n{\"id\":\"u2\"}\n",
        );
        let p = write(dir, "posts.jsonl", posts);
        let l = write(dir, "labels.tsv", labels);
        load_corpus(&u, &p, &l)
    }

    const POSTS: &str = "{\"id\":\"p1\",\"user_id\":\"u1\",\"text\":\"xanax gave me hallucinations\"}\n\
{\"id\":\"p2\",\"user_id\":\"u1\",\"text\":\"hello there\"}\n\
{\"id\":\"p3\",\"user_id\":\"u2\",\"text\":\"I took advil\"}\n";

    #[test]
    fn counts_after_load() {
        let dir = tempdir().unwrap();
        let (c, r) = small_files(dir.path(), POSTS, "xanax:hallucination\ttrue\n").unwrap();
        assert_eq!((c.num_users(), c.num_posts(), c.labels().len()), (2, 3, 1));
        assert_eq!((r.users, r.posts, r.labels), (2, 3, 1));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn dangling_user_is_named() {
        let dir = tempdir().unwrap();
        let posts = "{\"id\":\"p1\",\"user_id\":\"u9\",\"text\":\"hi\"}\n";
        let err = small_files(dir.path(), posts, "").unwrap_err();
        assert!(matches!(&err, Error::DanglingReference { id, .. } if id == "u9"), "{err}");
        assert!(err.to_string().contains("u9"));
    }

    #[test]
    fn empty_labels_warn() {
        let dir = tempdir().unwrap();
        let (c, r) = small_files(dir.path(), POSTS, "").unwrap();
        assert!(c.labels().is_empty());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn parse_error_reports_line() {
        let dir = tempdir().unwrap();
        let posts = "{\"id\":\"p1\",\"user_id\":\"u1\",\"text\":\"hi\"}\n{not json\n";
        match small_files(dir.path(), posts, "").unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            e => panic!("unexpected {e}"),
        }
        let err = small_files(dir.path(), POSTS, "a\tmaybe\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let dir = tempdir().unwrap();
        let posts = "{\"id\":\"p1\",\"user_id\":\"u1\",\"text\":\"a\"}\n{\"id\":\"p1\",\"user_id\":\"u2\",\"text\":\"b\"}\n";
        assert!(matches!(
            small_files(dir.path(), posts, "").unwrap_err(),
            Error::DuplicateId { kind: "post", .. }
        ));
    }

    #[test]
    fn blank_post_rejected() {
        let dir = tempdir().unwrap();
        let posts = "{\"id\":\"p1\",\"user_id\":\"u1\",\"text\":\"   \"}\n";
        assert!(matches!(small_files(dir.path(), posts, "").unwrap_err(), Error::Invalid(_)));
    }

    fn catalog(text: &str) -> StatementCatalog {
        StatementCatalog::parse(Path::new("catalog.tsv"), text).unwrap()
    }

    #[test]
    fn matching_examples() {
        let dir = tempdir().unwrap();
        let (mut c, _) = small_files(dir.path(), POSTS, "").unwrap();
        let cat = catalog("drug\txanax\t\neffect\thallucination\t\n");
        let inst = c.match_statements(&cat).unwrap();
        assert_eq!(inst.len(), 1);
        assert_eq!(inst[0].statement_id, "xanax:hallucination");
        assert_eq!(inst[0].post_id, "p1");

        // drug without any effect
        let cat = catalog("drug\tadvil\t\neffect\tnausea\t\n");
        let (mut c2, _) = small_files(dir.path(), POSTS, "").unwrap();
        assert!(c2.match_statements(&cat).unwrap().is_empty());
    }

    #[test]
    fn two_effects_one_drug() {
        let (mut c, _) = Corpus::from_parts(
            vec![User::new("u1")],
            vec![Post::new("p1", "u1", "Xanax gave me headaches and nausea.")],
            LabelPartition::default(),
        )
        .unwrap();
        let cat = catalog("drug\txanax\talprazolam\neffect\theadache\t\neffect\tnausea\t\n");
        let inst = c.match_statements(&cat).unwrap();
        assert_eq!(inst.len(), 2);
        assert_eq!(c.num_statements(), 2);
    }

    #[test]
    fn matching_is_idempotent() {
        let dir = tempdir().unwrap();
        let (mut c, _) = small_files(dir.path(), POSTS, "").unwrap();
        let cat = catalog("drug\txanax\t\ndrug\tibuprofen\tadvil\neffect\thallucination\t\n");
        let first = c.match_statements(&cat).unwrap();
        let snapshot = c.clone();
        let second = c.match_statements(&cat).unwrap();
        assert_eq!(first, second);
        assert_eq!(snapshot, c);
    }

    #[test]
    fn instance_author_must_match_post() {
        let (mut c, _) = Corpus::from_parts(
            vec![User::new("u1"), User::new("u2")],
            vec![Post::new("p1", "u1", "x")],
            LabelPartition::default(),
        )
        .unwrap();
        c.add_statement(Statement::new("a", "b"));
        let bad = StatementInstance {
            statement_id: "a:b".into(),
            post_id: "p1".into(),
            user_id: "u2".into(),
        };
        assert!(c.add_instance(bad).is_err());
        let good = StatementInstance {
            statement_id: "a:b".into(),
            post_id: "p1".into(),
            user_id: "u1".into(),
        };
        assert!(c.add_instance(good.clone()).unwrap());
        assert!(!c.add_instance(good).unwrap());
        assert_eq!(c.num_instances(), 1);
    }
}

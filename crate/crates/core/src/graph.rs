//! Triangle cliques (statement, post, user) and the labeled/unknown split.

use std::collections::BTreeMap;

use crate::corpus::{LabelPartition, StatementInstance};
use crate::matrix::FeatureMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clique {
    pub index: usize,
    pub statement_id: String,
    pub post_id: String,
    pub user_id: String,
    /// Dense index into [`CliqueGraph::statements`].
    pub statement: usize,
    /// Dense index into [`CliqueGraph::users`].
    pub user: usize,
}

/// Cliques sorted by (statement, post, user), with the feature matrix rows
/// permuted to match, and adjacency lists per statement and per user.
#[derive(Debug, Clone, PartialEq)]
pub struct CliqueGraph {
    cliques: Vec<Clique>,
    features: FeatureMatrix,
    statements: Vec<String>,
    users: Vec<String>,
    by_statement: Vec<Vec<usize>>,
    by_user: Vec<Vec<usize>>,
}

impl CliqueGraph {
    pub fn cliques(&self) -> &[Clique] {
        &self.cliques
    }

    pub fn num_cliques(&self) -> usize {
        self.cliques.len()
    }

    /// Raw (unstandardized) clique vectors, row `i` belonging to clique `i`.
    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    /// Statement ids in sorted order.
    pub fn statements(&self) -> &[String] {
        &self.statements
    }

    /// Ids of users authoring at least one clique, sorted.
    pub fn users(&self) -> &[String] {
        &self.users
    }

    pub fn statement_index(&self, id: &str) -> Option<usize> {
        self.statements.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn user_index(&self, id: &str) -> Option<usize> {
        self.users.binary_search_by(|s| s.as_str().cmp(id)).ok()
    }

    pub fn statement_cliques(&self, statement: usize) -> &[usize] {
        &self.by_statement[statement]
    }

    pub fn user_cliques(&self, user: usize) -> &[usize] {
        &self.by_user[user]
    }

    /// `clique_index<TAB>statement_id<TAB>post_id<TAB>user_id` per clique.
    pub fn render_dump(&self) -> String {
        let mut out = String::new();
        for c in &self.cliques {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", c.index, c.statement_id, c.post_id, c.user_id));
        }
        out
    }
}

/// One clique per distinct instance. `vectors` row `i` belongs to
/// `instances[i]`; input order does not affect the result.
pub fn build_graph(instances: &[StatementInstance], vectors: &FeatureMatrix) -> Result<CliqueGraph> {
    if instances.is_empty() {
        return Err(Error::Invalid("cannot build a graph without statement instances".into()));
    }
    if vectors.rows() != instances.len() {
        return Err(Error::Invalid(format!(
            "{} instances but {} feature rows",
            instances.len(),
            vectors.rows()
        )));
    }
    let mut order: BTreeMap<&StatementInstance, usize> = BTreeMap::new();
    for (i, inst) in instances.iter().enumerate() {
        order.entry(inst).or_insert(i);
    }
    let rows: Vec<usize> = order.values().copied().collect();
    let features = vectors.select(&rows);

    let mut statements: Vec<String> = order.keys().map(|i| i.statement_id.clone()).collect();
    statements.dedup();
    let mut users: Vec<String> = order.keys().map(|i| i.user_id.clone()).collect();
    users.sort();
    users.dedup();

    let mut by_statement = vec![Vec::new(); statements.len()];
    let mut by_user = vec![Vec::new(); users.len()];
    let mut cliques = Vec::with_capacity(order.len());
    for (index, inst) in order.keys().enumerate() {
        let statement = statements.binary_search(&inst.statement_id).unwrap_or_default();
        let user = users.binary_search(&inst.user_id).unwrap_or_default();
        by_statement[statement].push(index);
        by_user[user].push(index);
        cliques.push(Clique {
            index,
            statement_id: inst.statement_id.clone(),
            post_id: inst.post_id.clone(),
            user_id: inst.user_id.clone(),
            statement,
            user,
        });
    }
    Ok(CliqueGraph {
        cliques,
        features,
        statements,
        users,
        by_statement,
        by_user,
    })
}

/// Labeled and unknown statements of a graph, by dense statement index.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Partition {
    /// Expert label per statement index, `None` for unknowns.
    pub clamped: Vec<Option<bool>>,
    /// Unknown statement indices, ascending (the Gibbs sweep order).
    pub unknown: Vec<usize>,
    /// Labeled statement indices, ascending.
    pub labeled: Vec<usize>,
    /// Labels for statements absent from the graph.
    pub ignored: Vec<String>,
}

impl Partition {
    pub fn label(&self, statement: usize) -> Option<bool> {
        self.clamped[statement]
    }

    pub fn has_both_classes(&self) -> bool {
        let pos = self.labeled.iter().filter(|&&s| self.clamped[s] == Some(true)).count();
        pos > 0 && pos < self.labeled.len()
    }
}

pub fn partition(graph: &CliqueGraph, labels: &LabelPartition) -> Partition {
    let mut clamped = vec![None; graph.statements().len()];
    let mut ignored = Vec::new();
    for (id, &y) in &labels.labeled {
        match graph.statement_index(id) {
            Some(s) => clamped[s] = Some(y),
            None => ignored.push(id.clone()),
        }
    }
    if !ignored.is_empty() {
        log::warn!(
            "{} labeled statement(s) have no clique and are ignored (first: {})",
            ignored.len(),
            ignored[0]
        );
    }
    let unknown = (0..clamped.len()).filter(|&s| clamped[s].is_none()).collect();
    let labeled = (0..clamped.len()).filter(|&s| clamped[s].is_some()).collect();
    Partition {
        clamped,
        unknown,
        labeled,
        ignored,
    }
}

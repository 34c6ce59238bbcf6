//! Clique potentials, trust scores, Gibbs and exact E-steps, the Newton
//! M-step and the EM driver.
//!
//! Each clique `c = (s_i, p_j, u_k)` carries a standardized feature vector
//! `x_c` and the linear score `η_c = w·x_c + b`. Its log-potential is `η_c`
//! when the statement is credible and `0` otherwise; in trust mode the
//! author's `t_k` adds `ln t_k` and `ln(1 − t_k)` respectively.

mod em;
mod exact;
mod gibbs;
mod model;

pub use em::{fit, m_step, EmRecord, FitResult};
pub use exact::{exact_marginals, ExactResult, ENUMERATION_LIMIT};
pub use gibbs::{e_step, LabelState};
pub use model::{post_objectivity, predict, rank_statements, rank_users, ModelFile, PotentialModel};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::{CliqueGraph, Partition};
use crate::matrix::{log_add_exp, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrustMode {
    None,
    #[default]
    Multiplicative,
}

impl TrustMode {
    pub fn is_on(self) -> bool {
        self == TrustMode::Multiplicative
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EStepKind {
    #[default]
    Gibbs,
    /// Enumeration over all unknown labelings (small graphs only).
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// L2 strength on the feature weights.
    pub lambda: f64,
    pub burn_in: usize,
    pub sweeps: usize,
    pub max_iter: usize,
    /// EM stops when no weight moves by more than this.
    pub tol: f64,
    pub trust: TrustMode,
    pub e_step: EStepKind,
    pub with_bias: bool,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            burn_in: 100,
            sweeps: 400,
            max_iter: 50,
            tol: 1e-4,
            trust: TrustMode::Multiplicative,
            e_step: EStepKind::Gibbs,
            with_bias: false,
            newton_tol: 1e-6,
            newton_max_iter: 1000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(crate::Error::Invalid(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if self.sweeps == 0 {
            return Err(crate::Error::Invalid("collection sweeps must be >= 1".into()));
        }
        if !(self.tol > 0.0) || !(self.newton_tol > 0.0) {
            return Err(crate::Error::Invalid("tolerances must be > 0".into()));
        }
        Ok(())
    }
}

/// Log-potential of one clique. `eta` is `w·x + b` on the standardized
/// vector; `trust` is the author's `t_k` when trust mode is on.
pub fn clique_log_potential(eta: f64, label: bool, trust: Option<f64>) -> f64 {
    match (label, trust) {
        (true, None) => eta,
        (false, None) => 0.0,
        (true, Some(t)) => eta + t.ln(),
        (false, Some(t)) => (1.0 - t).ln(),
    }
}

/// Conditional probability of label 1 from per-clique `(ln φ(1), ln φ(0))`
/// pairs: `σ(Σ (ln φ(1) − ln φ(0)))`.
pub fn conditional_from_potentials(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    sigmoid(pairs.into_iter().map(|(a, b)| a - b).sum())
}

/// Per-clique log-odds `η_c (+ logit t_k)`.
pub fn clique_log_odds(eta: f64, trust: Option<f64>) -> f64 {
    clique_log_potential(eta, true, trust) - clique_log_potential(eta, false, trust)
}

/// `Pr(S_i = 1 | ...)` for one statement given per-clique scores and trust.
pub fn gibbs_conditional(graph: &CliqueGraph, eta: &[f64], trust: Option<&TrustScores>, statement: usize) -> f64 {
    let cliques = graph.statement_cliques(statement);
    assert!(!cliques.is_empty(), "statement without cliques");
    conditional_from_potentials(cliques.iter().map(|&c| {
        let t = trust.map(|t| t.scores[graph.cliques()[c].user]);
        (clique_log_potential(eta[c], true, t), clique_log_potential(eta[c], false, t))
    }))
}

/// Normalized per-clique log-potential `ln σ(±a)`, used by the marginal
/// log-likelihood.
pub(crate) fn log_sigmoid(a: f64) -> f64 {
    -log_add_exp(0.0, -a)
}

/// Smoothed per-user fraction of credible statements, `(1 + pos) / (2 + total)`
/// over the user's cliques. Tallies may be fractional (expected counts).
#[derive(Debug, Clone, PartialEq)]
pub struct TrustScores {
    pub scores: Vec<f64>,
    pub positive: Vec<f64>,
    pub total: Vec<f64>,
}

impl TrustScores {
    /// All users at the uninformed 0.5.
    pub fn uniform(users: usize) -> Self {
        Self {
            scores: vec![0.5; users],
            positive: vec![0.0; users],
            total: vec![0.0; users],
        }
    }

    pub fn from_tallies(positive: Vec<f64>, total: Vec<f64>) -> Self {
        let scores = positive.iter().zip(&total).map(|(p, n)| (1.0 + p) / (2.0 + n)).collect();
        Self { scores, positive, total }
    }

    pub fn logit(&self, user: usize) -> f64 {
        let t = self.scores[user];
        t.ln() - (1.0 - t).ln()
    }

    pub fn to_map(&self, graph: &CliqueGraph) -> BTreeMap<String, f64> {
        graph.users().iter().cloned().zip(self.scores.iter().copied()).collect()
    }
}

/// Trust from hard labels, one entry per statement index.
pub fn compute_trust(graph: &CliqueGraph, labels: &[bool]) -> TrustScores {
    let probs: Vec<f64> = labels.iter().map(|&l| if l { 1.0 } else { 0.0 }).collect();
    compute_trust_soft(graph, &probs)
}

/// Trust from per-statement probabilities of credibility (expected tallies).
pub fn compute_trust_soft(graph: &CliqueGraph, probs: &[f64]) -> TrustScores {
    let users = graph.users().len();
    let mut positive = vec![0.0; users];
    let mut total = vec![0.0; users];
    for u in 0..users {
        for &c in graph.user_cliques(u) {
            positive[u] += probs[graph.cliques()[c].statement];
            total[u] += 1.0;
        }
    }
    TrustScores::from_tallies(positive, total)
}

/// Trust from the clamped expert labels alone; cliques of unknown statements
/// are not counted. This is the estimate before any EM iteration has
/// labeled the unknowns.
pub fn compute_trust_labeled(graph: &CliqueGraph, partition: &Partition) -> TrustScores {
    let users = graph.users().len();
    let mut positive = vec![0.0; users];
    let mut total = vec![0.0; users];
    for u in 0..users {
        for &c in graph.user_cliques(u) {
            if let Some(y) = partition.clamped[graph.cliques()[c].statement] {
                positive[u] += f64::from(u8::from(y));
                total[u] += 1.0;
            }
        }
    }
    TrustScores::from_tallies(positive, total)
}

/// Posterior probability of credibility for each unknown statement.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MarginalEstimates {
    pub marginals: BTreeMap<String, f64>,
    pub burn_in: usize,
    pub sweeps: usize,
}

impl MarginalEstimates {
    pub(crate) fn from_probs(graph: &CliqueGraph, partition: &Partition, probs: &[f64], burn_in: usize, sweeps: usize) -> Self {
        let marginals = partition
            .unknown
            .iter()
            .map(|&s| (graph.statements()[s].clone(), probs[s]))
            .collect();
        Self {
            marginals,
            burn_in,
            sweeps,
        }
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.marginals.get(id).copied()
    }

    pub fn len(&self) -> usize {
        self.marginals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.marginals.is_empty()
    }

    /// Predicted credible when the marginal exceeds 0.5.
    pub fn predicted(&self, id: &str) -> Option<bool> {
        self.get(id).map(|p| p > 0.5)
    }
}

/// Per-statement probability vector: clamped labels as 0/1, unknowns from
/// `marginals` (indexed like `partition.unknown`).
pub(crate) fn full_probs(partition: &Partition, unknown_probs: &[f64]) -> Vec<f64> {
    let mut probs: Vec<f64> = partition
        .clamped
        .iter()
        .map(|l| match l {
            Some(true) => 1.0,
            _ => 0.0,
        })
        .collect();
    for (k, &s) in partition.unknown.iter().enumerate() {
        probs[s] = unknown_probs[k];
    }
    probs
}
